#include "msf/pointcloud.hpp"

#include <cmath>
#include <cstdio>
#include <map>
#include <tuple>
#include <unordered_map>

namespace msf {

PillarSet pillarize(const PointCloud& cloud, const BevGridSpec& grid,
                    std::size_t max_points_per_pillar, std::size_t max_pillars) {
  grid.validate();
  cloud.validate();
  require(max_points_per_pillar >= 1 && max_pillars >= 1, "pillarize: caps must be >= 1");
  PillarSet set;
  std::unordered_map<std::uint64_t, std::size_t> by_cell;
  std::size_t nx = grid.nx(), ny = grid.ny();

  for (std::size_t row = 0; row < cloud.points.size(); ++row) {
    const auto& p = cloud.points[row];
    if (p[0] < grid.x_min || p[0] >= grid.x_max || p[1] < grid.y_min || p[1] >= grid.y_max) {
      ++set.out_of_range;
      continue;
    }
    auto ix = static_cast<std::size_t>(std::floor((p[0] - grid.x_min) / grid.cell_size));
    auto iy = static_cast<std::size_t>(std::floor((p[1] - grid.y_min) / grid.cell_size));
    if (ix >= nx) ix = nx - 1;
    if (iy >= ny) iy = ny - 1;
    std::uint64_t key = static_cast<std::uint64_t>(iy) * nx + ix;
    auto it = by_cell.find(key);
    if (it == by_cell.end()) {
      if (set.pillars.size() >= max_pillars) {
        ++set.dropped_by_cap;
        continue;
      }
      it = by_cell.emplace(key, set.pillars.size()).first;
      set.pillars.push_back(Pillar{ix, iy, {}, {}});
    }
    Pillar& pil = set.pillars[it->second];
    if (pil.point_rows.size() >= max_points_per_pillar) {
      ++set.dropped_by_cap;
      continue;
    }
    pil.point_rows.push_back(row);
    ++set.in_range;
  }

  for (auto& pil : set.pillars) {
    ExactSum sx, sy, sz;
    for (std::size_t r : pil.point_rows) {
      sx.add(cloud.points[r][0]);
      sy.add(cloud.points[r][1]);
      sz.add(cloud.points[r][2]);
    }
    double n = static_cast<double>(pil.point_rows.size());
    double xm = sx.result() / n, ym = sy.result() / n, zm = sz.result() / n;
    double xc = grid.x_min + (static_cast<double>(pil.ix) + 0.5) * grid.cell_size;
    double yc = grid.y_min + (static_cast<double>(pil.iy) + 0.5) * grid.cell_size;
    pil.augmented.reserve(pil.point_rows.size());
    for (std::size_t r : pil.point_rows) {
      const auto& p = cloud.points[r];
      pil.augmented.push_back({p[0], p[1], p[2], p[3], p[0] - xm, p[1] - ym, p[2] - zm,
                               p[0] - xc, p[1] - yc});
    }
  }
  return set;
}

Tensor encode_pillars(Tape& t, const PillarSet& set, const Tensor& w, const Tensor& b,
                      const BevGridSpec& grid) {
  require(w.shape.size() == 2 && w.shape[0] == 9, "encode_pillars: weights must be 9 x c");
  std::size_t c = w.shape[1];
  std::size_t ny = grid.ny(), nx = grid.nx();

  std::size_t n_pts = 0;
  for (const auto& p : set.pillars) n_pts += p.augmented.size();

  Tensor out = Tensor::zeros({ny, nx, c});
  if (n_pts == 0) {
    // All-zero map; still tracked if the weights are, so gradients exist.
    if (w.node >= 0 || b.node >= 0) out.node = t.push(out.size());
    return out;
  }

  Tensor aug = Tensor::zeros({n_pts, 9});
  std::vector<std::size_t> segment(n_pts);  // pillar index per point row
  std::size_t r = 0;
  for (std::size_t pi = 0; pi < set.pillars.size(); ++pi)
    for (const auto& a : set.pillars[pi].augmented) {
      for (int j = 0; j < 9; ++j) aug.data[r * 9 + j] = a[j];
      segment[r++] = pi;
    }

  Tensor feats = relu(t, linear(t, aug, w, b));

  // Segment max + scatter into the dense map; argmax (first max) carries
  // the gradient.
  std::vector<std::size_t> cell_of_pillar(set.pillars.size());
  for (std::size_t pi = 0; pi < set.pillars.size(); ++pi)
    cell_of_pillar[pi] = set.pillars[pi].iy * nx + set.pillars[pi].ix;

  std::vector<long> argmax(set.pillars.size() * c, -1);
  for (std::size_t row = 0; row < n_pts; ++row) {
    std::size_t pi = segment[row];
    for (std::size_t ch = 0; ch < c; ++ch) {
      double v = feats.data[row * c + ch];
      long& am = argmax[pi * c + ch];
      if (am < 0 || v > feats.data[static_cast<std::size_t>(am) * c + ch]) am = static_cast<long>(row);
    }
  }
  for (std::size_t pi = 0; pi < set.pillars.size(); ++pi)
    for (std::size_t ch = 0; ch < c; ++ch) {
      long am = argmax[pi * c + ch];
      if (am >= 0)
        out.data[cell_of_pillar[pi] * c + ch] = feats.data[static_cast<std::size_t>(am) * c + ch];
    }

  if (feats.node >= 0) {
    int fn = feats.node;
    int id = t.push(out.size());
    t.set_back(id, [id, fn, argmax, cell_of_pillar, c](Tape& tp) {
      const auto& gy = tp.grad(id);
      auto& gf = tp.grad(fn);
      for (std::size_t pi = 0; pi < cell_of_pillar.size(); ++pi)
        for (std::size_t ch = 0; ch < c; ++ch) {
          long am = argmax[pi * c + ch];
          if (am >= 0)
            gf[static_cast<std::size_t>(am) * c + ch] += gy[cell_of_pillar[pi] * c + ch];
        }
    });
    out.node = id;
  }
  return out;
}

std::vector<Voxel> voxelize(const PointCloud& cloud, double voxel_size) {
  require(voxel_size > 0.0, "voxelize: voxel_size must be positive");
  cloud.validate();
  std::map<std::tuple<long, long, long>, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < cloud.points.size(); ++i) {
    const auto& p = cloud.points[i];
    auto key = std::make_tuple(static_cast<long>(std::floor(p[0] / voxel_size)),
                               static_cast<long>(std::floor(p[1] / voxel_size)),
                               static_cast<long>(std::floor(p[2] / voxel_size)));
    groups[key].push_back(i);
  }
  std::vector<Voxel> out;
  out.reserve(groups.size());
  for (const auto& [key, rows] : groups) {
    Voxel v;
    std::tie(v.ix, v.iy, v.iz) = key;
    v.count = rows.size();
    for (int ch = 0; ch < 4; ++ch) {
      ExactSum s;
      for (std::size_t r : rows) s.add(cloud.points[r][ch]);
      v.mean[ch] = s.result() / static_cast<double>(rows.size());
    }
    out.push_back(v);
  }
  return out;
}

Tensor voxel_bev_base(const std::vector<Voxel>& voxels, double voxel_size,
                      const BevGridSpec& grid) {
  grid.validate();
  std::size_t ny = grid.ny(), nx = grid.nx();
  Tensor base = Tensor::zeros({ny, nx, 4});
  std::vector<std::size_t> counts(ny * nx, 0);
  for (const auto& v : voxels) {
    double x = (static_cast<double>(v.ix) + 0.5) * voxel_size;
    double y = (static_cast<double>(v.iy) + 0.5) * voxel_size;
    if (x < grid.x_min || x >= grid.x_max || y < grid.y_min || y >= grid.y_max) continue;
    auto cx = static_cast<std::size_t>(std::floor((x - grid.x_min) / grid.cell_size));
    auto cy = static_cast<std::size_t>(std::floor((y - grid.y_min) / grid.cell_size));
    std::size_t cell = cy * nx + cx;
    for (int ch = 0; ch < 4; ++ch) base.data[cell * 4 + ch] += v.mean[ch];
    ++counts[cell];
  }
  for (std::size_t cell = 0; cell < counts.size(); ++cell)
    if (counts[cell] > 0)
      for (int ch = 0; ch < 4; ++ch)
        base.data[cell * 4 + ch] /= static_cast<double>(counts[cell]);
  return base;
}

Tensor avg_pool2(Tape& t, const Tensor& map) {
  require(map.shape.size() == 3, "avg_pool2: map must be h x w x c");
  std::size_t h = map.shape[0], w = map.shape[1], c = map.shape[2];
  std::size_t ho = (h + 1) / 2, wo = (w + 1) / 2;
  Tensor y = Tensor::zeros({ho, wo, c});
  for (std::size_t i = 0; i < ho; ++i)
    for (std::size_t j = 0; j < wo; ++j) {
      std::size_t h2 = std::min<std::size_t>(2, h - 2 * i);
      std::size_t w2 = std::min<std::size_t>(2, w - 2 * j);
      double inv = 1.0 / static_cast<double>(h2 * w2);
      for (std::size_t ch = 0; ch < c; ++ch) {
        double s = 0.0;
        for (std::size_t di = 0; di < h2; ++di)
          for (std::size_t dj = 0; dj < w2; ++dj)
            s += map.data[((2 * i + di) * w + (2 * j + dj)) * c + ch];
        y.data[(i * wo + j) * c + ch] = s * inv;
      }
    }
  if (map.node >= 0) {
    int mn = map.node;
    int id = t.push(y.size());
    t.set_back(id, [id, mn, h, w, c, ho, wo](Tape& tp) {
      const auto& gy = tp.grad(id);
      auto& gm = tp.grad(mn);
      for (std::size_t i = 0; i < ho; ++i)
        for (std::size_t j = 0; j < wo; ++j) {
          std::size_t h2 = std::min<std::size_t>(2, h - 2 * i);
          std::size_t w2 = std::min<std::size_t>(2, w - 2 * j);
          double inv = 1.0 / static_cast<double>(h2 * w2);
          for (std::size_t ch = 0; ch < c; ++ch) {
            double g = gy[(i * wo + j) * c + ch] * inv;
            for (std::size_t di = 0; di < h2; ++di)
              for (std::size_t dj = 0; dj < w2; ++dj)
                gm[((2 * i + di) * w + (2 * j + dj)) * c + ch] += g;
          }
        }
    });
    y.node = id;
  }
  return y;
}

namespace {

Tensor percell_linear(Tape& t, const Tensor& map, const Tensor& w, const Tensor& b) {
  std::size_t h = map.shape[0], wd = map.shape[1], cin = map.shape[2];
  require(w.shape[0] == cin, "build_bev_pyramid: per-cell weight shape " + shape_str(w.shape) +
                                 " does not match channels " + std::to_string(cin));
  Tensor flat = reshape(map, {h * wd, cin});
  Tensor y = linear(t, flat, w, b);
  return reshape(y, {h, wd, w.shape[1]});
}

}  // namespace

BevFeaturePyramid build_bev_pyramid(Tape& t, const Tensor& base,
                                    const std::vector<Tensor>& ws,
                                    const std::vector<Tensor>& bs) {
  require(base.shape.size() == 3, "build_bev_pyramid: base must be h x w x c");
  require(base.shape[0] >= 8 && base.shape[1] >= 8,
          "build_bev_pyramid: base extents must be >= 8, got " + shape_str(base.shape));
  require(ws.size() == 4 && bs.size() == 4, "build_bev_pyramid: expected 4 level transforms");
  BevFeaturePyramid pyr;
  Tensor cur = percell_linear(t, base, ws[0], bs[0]);
  pyr.levels.push_back(cur);
  for (int x = 1; x < 4; ++x) {
    cur = percell_linear(t, avg_pool2(t, cur), ws[static_cast<std::size_t>(x)],
                         bs[static_cast<std::size_t>(x)]);
    pyr.levels.push_back(cur);
  }
  return pyr;
}

void write_point_dump(const std::string& path, const PointCloud& cloud) {
  std::FILE* f = std::fopen(path.c_str(), "wb");
  if (!f) throw input_error("cannot open point dump for writing: " + path);
  std::uint32_t count = static_cast<std::uint32_t>(cloud.points.size());
  std::uint32_t channels = 4;
  std::fwrite(&count, sizeof count, 1, f);
  std::fwrite(&channels, sizeof channels, 1, f);
  for (const auto& p : cloud.points)
    for (double v : p) {
      float fv = static_cast<float>(v);
      std::fwrite(&fv, sizeof fv, 1, f);
    }
  std::fclose(f);
}

PointCloud read_point_dump(const std::string& path) {
  std::FILE* f = std::fopen(path.c_str(), "rb");
  if (!f) throw input_error("cannot open point dump: " + path);
  std::uint32_t count = 0, channels = 0;
  if (std::fread(&count, sizeof count, 1, f) != 1 ||
      std::fread(&channels, sizeof channels, 1, f) != 1 || channels != 4) {
    std::fclose(f);
    throw input_error("malformed point dump header: " + path);
  }
  PointCloud cloud;
  cloud.points.resize(count);
  for (auto& p : cloud.points)
    for (double& v : p) {
      float fv = 0.0f;
      if (std::fread(&fv, sizeof fv, 1, f) != 1) {
        std::fclose(f);
        throw input_error("truncated point dump: " + path);
      }
      v = static_cast<double>(fv);
    }
  std::fclose(f);
  return cloud;
}

}  // namespace msf
