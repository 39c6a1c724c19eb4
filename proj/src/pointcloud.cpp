#include "scopesim/pointcloud.hpp"

#include <bit>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

static_assert(std::endian::native == std::endian::little,
              "scene files store little-endian float32 records");

namespace scopesim {

void PointCloudScene::recompute_bounds() {
  if (positions.empty()) {
    bounds = Aabb{};
    return;
  }
  bounds.min_corner = bounds.max_corner = position(0);
  for (std::size_t i = 1; i < size(); ++i) bounds.expand(position(i));
}

void save_scene(const PointCloudScene& scene, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write scene file: " + path);

  char header[256];
  std::snprintf(header, sizeof(header),
                "SCOPESCENE 1\npoints %zu\nbounds %.9g %.9g %.9g %.9g %.9g %.9g\n"
                "end_header\n",
                scene.size(), scene.bounds.min_corner.x, scene.bounds.min_corner.y,
                scene.bounds.min_corner.z, scene.bounds.max_corner.x,
                scene.bounds.max_corner.y, scene.bounds.max_corner.z);
  out << header;

  std::vector<float> record(6);
  for (std::size_t i = 0; i < scene.size(); ++i) {
    record[0] = scene.positions[3 * i];
    record[1] = scene.positions[3 * i + 1];
    record[2] = scene.positions[3 * i + 2];
    record[3] = scene.colors[3 * i];
    record[4] = scene.colors[3 * i + 1];
    record[5] = scene.colors[3 * i + 2];
    out.write(reinterpret_cast<const char*>(record.data()),
              static_cast<std::streamsize>(record.size() * sizeof(float)));
  }
  if (!out) throw std::runtime_error("write failed for scene file: " + path);
}

PointCloudScene load_scene(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read scene file: " + path);

  std::string line;
  if (!std::getline(in, line) || line != "SCOPESCENE 1")
    throw std::runtime_error(path + ": not a SCOPESCENE 1 file");

  std::size_t count = 0;
  bool header_done = false;
  while (std::getline(in, line)) {
    if (line == "end_header") {
      header_done = true;
      break;
    }
    std::istringstream ls(line);
    std::string key;
    ls >> key;
    if (key == "points") ls >> count;
    // bounds are recomputed from the payload
  }
  if (!header_done) throw std::runtime_error(path + ": missing end_header");
  if (count == 0) throw std::runtime_error(path + ": scene has no points");

  PointCloudScene scene;
  scene.positions.resize(count * 3);
  scene.colors.resize(count * 3);
  std::vector<float> record(6);
  for (std::size_t i = 0; i < count; ++i) {
    in.read(reinterpret_cast<char*>(record.data()),
            static_cast<std::streamsize>(record.size() * sizeof(float)));
    if (!in) throw std::runtime_error(path + ": truncated point records");
    scene.positions[3 * i] = record[0];
    scene.positions[3 * i + 1] = record[1];
    scene.positions[3 * i + 2] = record[2];
    scene.colors[3 * i] = record[3];
    scene.colors[3 * i + 1] = record[4];
    scene.colors[3 * i + 2] = record[5];
  }
  scene.recompute_bounds();
  return scene;
}

}  // namespace scopesim
