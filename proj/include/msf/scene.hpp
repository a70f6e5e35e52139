#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "msf/geometry.hpp"
#include "msf/head.hpp"
#include "msf/pointcloud.hpp"

namespace msf {

struct CameraRigSpec {
  std::size_t num_cameras = 6;  // yaw-spaced around the ego vehicle
  double image_width = 256.0;
  double image_height = 256.0;
  double focal = 256.0;  // pixels
};

struct SceneSpec {
  std::uint64_t seed = 0;
  std::size_t min_objects = 3;
  std::size_t max_objects = 8;
  std::vector<double> class_weights;  // empty = uniform over 10 classes
  SceneBounds bounds;
  CameraRigSpec rig;
  std::size_t points_per_object = 128;
  std::size_t ground_points = 512;
  double noise_sigma = 0.02;  // meters

  void validate() const {
    require(min_objects <= max_objects, "SceneSpec: min_objects must be <= max_objects");
    require(rig.num_cameras >= 1, "SceneSpec: at least one camera required");
    require(noise_sigma >= 0.0, "SceneSpec: noise sigma must be >= 0");
    bounds.validate();
  }
};

struct Scene {
  std::string sample_id;
  std::vector<Box3D> gt;
  PointCloud cloud;
  std::vector<CameraModel> cameras;
};

// Deterministic: identical (spec, seed) yields a bitwise-identical scene.
Scene generate_scene(const SceneSpec& spec, std::uint64_t seed);

// Points on the five visible faces of each box plus ground-plane returns;
// intensity encodes the class id so the signal is learnable.
PointCloud simulate_lidar(const std::vector<Box3D>& gt, const SceneSpec& spec, Rng& rng);

// Per camera: 4 maps at strides 4/8/16/32 of the nominal image size; each
// ground-truth object deposits a Gaussian blob (sigma 2 cells) whose
// channels encode class and normalized depth.
std::vector<FeaturePyramid> synthesize_image_pyramids(const Scene& scene,
                                                      std::size_t channels);

std::vector<CameraModel> make_camera_rig(const CameraRigSpec& rig);

// Structured text scene files (cameras, boxes, points).
void write_scenes(const std::string& path, const std::vector<Scene>& scenes);
std::vector<Scene> read_scenes(const std::string& path);

}  // namespace msf
