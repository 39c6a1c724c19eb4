#include "scopesim/renderer.hpp"

#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <stdexcept>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace scopesim {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct CameraFrame {
  Mat3 world_to_cam;
  Vec3 offset;
};

CameraFrame camera_frame(const Pose& pose) {
  CameraFrame f;
  f.world_to_cam = pose.rotation.transposed();
  f.offset = f.world_to_cam * (Vec3{} - pose.translation);
  return f;
}

// Splat one point's candidate (z, index) into the winner buffers; smaller z
// wins, ties go to the smaller point index.
inline void splat(std::size_t point, double z, int px, int py, int radius,
                  int width, int height, double* zbuf, std::int64_t* ibuf) {
  const int r2 = radius * radius;
  for (int dy = -radius; dy <= radius; ++dy) {
    const int y = py + dy;
    if (y < 0 || y >= height) continue;
    for (int dx = -radius; dx <= radius; ++dx) {
      if (dx * dx + dy * dy > r2) continue;
      const int x = px + dx;
      if (x < 0 || x >= width) continue;
      const std::size_t pix = static_cast<std::size_t>(y) * width + x;
      const auto idx = static_cast<std::int64_t>(point);
      if (z < zbuf[pix] || (z == zbuf[pix] && idx < ibuf[pix])) {
        zbuf[pix] = z;
        ibuf[pix] = idx;
      }
    }
  }
}

inline bool project(const CameraFrame& frame, const CameraIntrinsics& intr,
                    const Vec3& world, double& z, int& px, int& py) {
  const Vec3 cam = frame.world_to_cam * world + frame.offset;
  if (cam.z <= kNearPlaneMm) return false;
  const double u = intr.fx * cam.x / cam.z + intr.cx;
  const double v = intr.fy * cam.y / cam.z + intr.cy;
  px = static_cast<int>(std::lround(u));
  py = static_cast<int>(std::lround(v));
  if (px < 0 || px >= intr.width || py < 0 || py >= intr.height) return false;
  z = cam.z;
  return true;
}

RGBDImage finalize(const PointCloudScene& scene, const CameraIntrinsics& intr,
                   const double* zbuf, const std::int64_t* ibuf) {
  RGBDImage img(intr.width, intr.height);
  const std::size_t npix = img.pixel_count();
  for (std::size_t pix = 0; pix < npix; ++pix) {
    const std::int64_t idx = ibuf[pix];
    if (idx < 0) continue;
    img.depth[pix] = static_cast<float>(zbuf[pix]);
    img.rgb[3 * pix] = scene.colors[3 * idx];
    img.rgb[3 * pix + 1] = scene.colors[3 * idx + 1];
    img.rgb[3 * pix + 2] = scene.colors[3 * idx + 2];
  }
  return img;
}

void validate(const CameraIntrinsics& intr, int splat_radius) {
  if (!intr.valid()) throw std::invalid_argument("render: invalid intrinsics");
  if (splat_radius < 0) throw std::invalid_argument("render: negative splat radius");
}

}  // namespace

RGBDImage render_reference(const PointCloudScene& scene, const Pose& pose,
                           const CameraIntrinsics& intrinsics, int splat_radius) {
  validate(intrinsics, splat_radius);
  const CameraFrame frame = camera_frame(pose);
  const std::size_t npix =
      static_cast<std::size_t>(intrinsics.width) * intrinsics.height;
  std::vector<double> zbuf(npix, kInf);
  std::vector<std::int64_t> ibuf(npix, -1);

  for (std::size_t i = 0; i < scene.size(); ++i) {
    double z;
    int px, py;
    if (!project(frame, intrinsics, scene.position(i), z, px, py)) continue;
    splat(i, z, px, py, splat_radius, intrinsics.width, intrinsics.height,
          zbuf.data(), ibuf.data());
  }
  return finalize(scene, intrinsics, zbuf.data(), ibuf.data());
}

RGBDImage render(const PointCloudScene& scene, const Pose& pose,
                 const CameraIntrinsics& intrinsics, int splat_radius) {
  validate(intrinsics, splat_radius);
  const CameraFrame frame = camera_frame(pose);
  const std::size_t npix =
      static_cast<std::size_t>(intrinsics.width) * intrinsics.height;

  int max_threads = 1;
#ifdef _OPENMP
  max_threads = omp_get_max_threads();
#endif
  // Per-thread winner buffers merged with the same (z, index) rule the
  // sequential loop applies, so the output is bitwise identical to
  // render_reference for any thread count.
  std::vector<std::vector<double>> zbufs(max_threads,
                                         std::vector<double>(npix, kInf));
  std::vector<std::vector<std::int64_t>> ibufs(
      max_threads, std::vector<std::int64_t>(npix, -1));

#pragma omp parallel num_threads(max_threads)
  {
    int tid = 0;
#ifdef _OPENMP
    tid = omp_get_thread_num();
#endif
    double* zbuf = zbufs[tid].data();
    std::int64_t* ibuf = ibufs[tid].data();
#pragma omp for schedule(static)
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(scene.size()); ++i) {
      double z;
      int px, py;
      if (!project(frame, intrinsics, scene.position(static_cast<std::size_t>(i)), z,
                   px, py))
        continue;
      splat(static_cast<std::size_t>(i), z, px, py, splat_radius, intrinsics.width,
            intrinsics.height, zbuf, ibuf);
    }
  }

  for (int t = 1; t < max_threads; ++t) {
    const double* zsrc = zbufs[t].data();
    const std::int64_t* isrc = ibufs[t].data();
    double* zdst = zbufs[0].data();
    std::int64_t* idst = ibufs[0].data();
    for (std::size_t pix = 0; pix < npix; ++pix) {
      if (isrc[pix] < 0) continue;
      if (zsrc[pix] < zdst[pix] ||
          (zsrc[pix] == zdst[pix] && isrc[pix] < idst[pix])) {
        zdst[pix] = zsrc[pix];
        idst[pix] = isrc[pix];
      }
    }
  }
  return finalize(scene, intrinsics, zbufs[0].data(), ibufs[0].data());
}

std::vector<RGBDImage> render_batch(const std::vector<RenderRequest>& requests,
                                    const CameraIntrinsics& intrinsics,
                                    int splat_radius) {
  if (requests.empty()) throw std::invalid_argument("render_batch: empty batch");
  std::vector<RGBDImage> out(requests.size());
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(requests.size()); ++i)
    out[static_cast<std::size_t>(i)] =
        render(*requests[static_cast<std::size_t>(i)].scene,
               requests[static_cast<std::size_t>(i)].pose, intrinsics, splat_radius);
  return out;
}

std::vector<RGBDImage> render_batch_reference(const std::vector<RenderRequest>& requests,
                                              const CameraIntrinsics& intrinsics,
                                              int splat_radius) {
  if (requests.empty()) throw std::invalid_argument("render_batch: empty batch");
  std::vector<RGBDImage> out;
  out.reserve(requests.size());
  for (const RenderRequest& req : requests)
    out.push_back(render_reference(*req.scene, req.pose, intrinsics, splat_radius));
  return out;
}

RGBDImage downscale(const RGBDImage& img, int out_w, int out_h) {
  if (out_w < 1 || out_h < 1 || out_w > img.width || out_h > img.height)
    throw std::invalid_argument("downscale: output must be within source dims");
  if (out_w == img.width && out_h == img.height) return img;

  RGBDImage out(out_w, out_h);
  const double sx = static_cast<double>(img.width) / out_w;
  const double sy = static_cast<double>(img.height) / out_h;

  for (int oy = 0; oy < out_h; ++oy) {
    const double y0 = oy * sy, y1 = (oy + 1) * sy;
    for (int ox = 0; ox < out_w; ++ox) {
      const double x0 = ox * sx, x1 = (ox + 1) * sx;

      double acc[3] = {0.0, 0.0, 0.0};
      double area = 0.0;
      double min_depth = kInf;
      for (int y = static_cast<int>(std::floor(y0)); y < y1; ++y) {
        const double wy =
            std::min<double>(y + 1, y1) - std::max<double>(y, y0);
        if (wy <= 0) continue;
        for (int x = static_cast<int>(std::floor(x0)); x < x1; ++x) {
          const double wx =
              std::min<double>(x + 1, x1) - std::max<double>(x, x0);
          if (wx <= 0) continue;
          const std::size_t pix = static_cast<std::size_t>(y) * img.width + x;
          const double w = wx * wy;
          acc[0] += w * img.rgb[3 * pix];
          acc[1] += w * img.rgb[3 * pix + 1];
          acc[2] += w * img.rgb[3 * pix + 2];
          area += w;
          if (img.depth[pix] > 0.0f)
            min_depth = std::min(min_depth, static_cast<double>(img.depth[pix]));
        }
      }
      const std::size_t opix = static_cast<std::size_t>(oy) * out_w + ox;
      for (int c = 0; c < 3; ++c)
        out.rgb[3 * opix + c] = static_cast<float>(acc[c] / area);
      out.depth[opix] =
          min_depth == kInf ? 0.0f : static_cast<float>(min_depth);
    }
  }
  return out;
}

void write_ppm(const RGBDImage& img, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write image: " + path);
  out << "P6\n" << img.width << " " << img.height << "\n255\n";
  std::vector<unsigned char> row(static_cast<std::size_t>(img.width) * 3);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      const std::size_t pix = static_cast<std::size_t>(y) * img.width + x;
      for (int c = 0; c < 3; ++c) {
        const float v = std::clamp(img.rgb[3 * pix + c], 0.0f, 1.0f);
        row[3 * static_cast<std::size_t>(x) + c] =
            static_cast<unsigned char>(std::lround(v * 255.0f));
      }
    }
    out.write(reinterpret_cast<const char*>(row.data()),
              static_cast<std::streamsize>(row.size()));
  }
}

void write_pgm16(const RGBDImage& img, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write image: " + path);
  out << "P5\n" << img.width << " " << img.height << "\n65535\n";
  std::vector<unsigned char> row(static_cast<std::size_t>(img.width) * 2);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      const std::size_t pix = static_cast<std::size_t>(y) * img.width + x;
      const double mm = std::clamp(static_cast<double>(img.depth[pix]), 0.0, 65535.0);
      const auto v = static_cast<std::uint16_t>(std::lround(mm));
      row[2 * static_cast<std::size_t>(x)] = static_cast<unsigned char>(v >> 8);
      row[2 * static_cast<std::size_t>(x) + 1] = static_cast<unsigned char>(v & 0xff);
    }
    out.write(reinterpret_cast<const char*>(row.data()),
              static_cast<std::streamsize>(row.size()));
  }
}

}  // namespace scopesim
