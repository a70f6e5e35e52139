#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "msf/tensor.hpp"

namespace msf {

struct SceneBounds {
  std::array<double, 3> min{-51.2, -51.2, -5.0};
  std::array<double, 3> max{51.2, 51.2, 3.0};

  void validate() const {
    for (int i = 0; i < 3; ++i)
      require(min[i] < max[i], "SceneBounds: min must be < max componentwise");
  }
  bool contains(double x, double y, double z) const {
    return x >= min[0] && x <= max[0] && y >= min[1] && y <= max[1] && z >= min[2] &&
           z <= max[2];
  }
};

// Pinhole intrinsics + ego-to-camera extrinsics. p_cam = R * p_ego + t.
class CameraModel {
 public:
  CameraModel(double fx, double fy, double cx, double cy,
              const std::array<double, 9>& rotation, const std::array<double, 3>& translation,
              double image_w, double image_h, double skew = 0.0);

  double fx() const { return fx_; }
  double fy() const { return fy_; }
  double cx() const { return cx_; }
  double cy() const { return cy_; }
  double skew() const { return skew_; }
  double width() const { return w_; }
  double height() const { return h_; }
  const std::array<double, 9>& rotation() const { return rot_; }
  const std::array<double, 3>& translation() const { return t_; }

  std::array<double, 3> to_camera(const std::array<double, 3>& p_ego) const;
  std::array<double, 3> to_ego(const std::array<double, 3>& p_cam) const;

  static constexpr double kMinDepth = 0.1;  // meters; behind/near-plane points are invalid

 private:
  double fx_, fy_, cx_, cy_, skew_, w_, h_;
  std::array<double, 9> rot_;
  std::array<double, 3> t_;
};

struct BevGridSpec {
  double x_min = -51.2, x_max = 51.2;
  double y_min = -51.2, y_max = 51.2;
  double cell_size = 0.2;

  void validate() const;
  std::size_t nx() const;  // cells along x
  std::size_t ny() const;  // cells along y
};

// Per-camera (or BEV) 4-level feature stack; level tensors are {h, w, c}.
struct FeaturePyramid {
  std::vector<Tensor> levels;
};

struct ProjectedPoints {
  Tensor coords;                // n x 2, normalized [0,1]; (0,0) where invalid
  std::vector<std::uint8_t> valid;
};

// r = bounds.min + sigmoid(linear(q)) * (bounds.max - bounds.min), per row.
Tensor decode_reference_points(Tape& t, const Tensor& queries, const Tensor& phi_w,
                               const Tensor& phi_b, const SceneBounds& bounds);

ProjectedPoints project_to_image(Tape& t, const Tensor& points, const CameraModel& cam);
ProjectedPoints project_to_bev(Tape& t, const Tensor& points, const BevGridSpec& grid);

// Align-corners bilinear sampling of map {h,w,c} at normalized coords
// (u -> columns, v -> rows). Invalid rows yield zero vectors.
Tensor bilinear_sample(Tape& t, const Tensor& map, const Tensor& coords,
                       const std::vector<std::uint8_t>& valid);

}  // namespace msf
