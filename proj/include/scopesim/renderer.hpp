#pragma once

#include <string>
#include <vector>

#include "scopesim/geometry.hpp"
#include "scopesim/pointcloud.hpp"

namespace scopesim {

struct CameraIntrinsics {
  double fx = 175.0;
  double fy = 175.0;
  double cx = 80.0;
  double cy = 64.0;
  int width = 160;
  int height = 128;

  bool valid() const {
    return fx > 0 && fy > 0 && cx > 0 && cx < width && cy > 0 && cy < height;
  }
};

/// RGB-D observation. rgb is H*W*3 in [0,1]; depth is H*W in millimeters with
/// 0 marking pixels no point reached.
struct RGBDImage {
  int width = 0;
  int height = 0;
  std::vector<float> rgb;
  std::vector<float> depth;

  RGBDImage() = default;
  RGBDImage(int w, int h)
      : width(w), height(h), rgb(static_cast<std::size_t>(w) * h * 3, 0.0f),
        depth(static_cast<std::size_t>(w) * h, 0.0f) {}

  std::size_t pixel_count() const { return static_cast<std::size_t>(width) * height; }
};

constexpr double kNearPlaneMm = 0.1;

/// Pinhole projection of the cloud with z-buffered point splatting. `pose` is
/// the camera pose in world coordinates; the camera looks along +Z of its own
/// frame. Each point covers a disc of `splat_radius` pixels around its
/// projection; the smallest camera-space z wins per pixel, ties broken by
/// point index so the result is independent of thread count.
RGBDImage render(const PointCloudScene& scene, const Pose& pose,
                 const CameraIntrinsics& intrinsics, int splat_radius);

/// Straightforward sequential implementation kept as the reference the
/// parallel kernel is tested and benchmarked against.
RGBDImage render_reference(const PointCloudScene& scene, const Pose& pose,
                           const CameraIntrinsics& intrinsics, int splat_radius);

struct RenderRequest {
  const PointCloudScene* scene = nullptr;
  Pose pose;
};

std::vector<RGBDImage> render_batch(const std::vector<RenderRequest>& requests,
                                    const CameraIntrinsics& intrinsics,
                                    int splat_radius);
std::vector<RGBDImage> render_batch_reference(const std::vector<RenderRequest>& requests,
                                              const CameraIntrinsics& intrinsics,
                                              int splat_radius);

/// Area-average for rgb; min-pooling over the non-zero depth entries covered
/// by each output pixel (0 when all covered entries are 0). Output dimensions
/// must not exceed the source.
RGBDImage downscale(const RGBDImage& img, int out_w, int out_h);

/// Preview export: binary PPM for rgb, 16-bit binary PGM for depth
/// (millimeters clamped to [0, 65535]).
void write_ppm(const RGBDImage& img, const std::string& path);
void write_pgm16(const RGBDImage& img, const std::string& path);

}  // namespace scopesim
