#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "msf/geometry.hpp"
#include "msf/tensor.hpp"

namespace msf {

// P x 4 point cloud: x, y, z (meters) + intensity in [0,1].
struct PointCloud {
  std::vector<std::array<double, 4>> points;

  void validate() const {
    for (const auto& p : points)
      for (double v : p) require(std::isfinite(v), "PointCloud: non-finite coordinate");
  }
};

struct Pillar {
  std::size_t ix = 0, iy = 0;            // grid cell
  std::vector<std::size_t> point_rows;   // indices into the source cloud
  // Per point: x, y, z, intensity, x-xm, y-ym, z-zm, x-xc, y-yc.
  std::vector<std::array<double, 9>> augmented;
};

struct PillarSet {
  std::vector<Pillar> pillars;
  std::size_t in_range = 0;
  std::size_t dropped_by_cap = 0;
  std::size_t out_of_range = 0;
};

struct Voxel {
  long ix = 0, iy = 0, iz = 0;
  std::array<double, 4> mean{};
  std::size_t count = 0;
};

struct BevFeaturePyramid {
  std::vector<Tensor> levels;  // 4 maps {h, w, c}, 2x downsampled per level
};

// Points fall into cell floor((x - x_min)/cell); excess points beyond the
// caps are dropped first-come in input order.
PillarSet pillarize(const PointCloud& cloud, const BevGridSpec& grid,
                    std::size_t max_points_per_pillar = 32, std::size_t max_pillars = 4096);

// Per pillar: elementwise max over relu(linear(aug, w, b)) of its points,
// scattered into a dense {ny, nx, c} map.
Tensor encode_pillars(Tape& t, const PillarSet& pillars, const Tensor& w, const Tensor& b,
                      const BevGridSpec& grid);

// Mean point feature and count per occupied voxel, sorted by (ix, iy, iz).
std::vector<Voxel> voxelize(const PointCloud& cloud, double voxel_size);

// Height-compressed BEV base map from voxels: per grid cell, mean of the
// member voxel mean-features; {ny, nx, 4} constant tensor.
Tensor voxel_bev_base(const std::vector<Voxel>& voxels, double voxel_size,
                      const BevGridSpec& grid);

// Level 1 = per-cell linear of base; level x+1 = 2x2 average pool of level x
// followed by a per-cell linear. Weights: ws[x] (c_prev x c), bs[x] (c).
BevFeaturePyramid build_bev_pyramid(Tape& t, const Tensor& base,
                                    const std::vector<Tensor>& ws,
                                    const std::vector<Tensor>& bs);

// 2x2 average pooling with ceil extents; partial border windows average
// the cells present.
Tensor avg_pool2(Tape& t, const Tensor& map);

// Flat binary point dump: u32 count, u32 channels (=4), then count*4
// little-endian f32 values.
void write_point_dump(const std::string& path, const PointCloud& cloud);
PointCloud read_point_dump(const std::string& path);

}  // namespace msf
