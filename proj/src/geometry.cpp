#include "msf/geometry.hpp"

#include <cmath>

namespace msf {

namespace {

void check_rotation(const std::array<double, 9>& r) {
  // R * R^T = I to 1e-9 and det(R) = +1.
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      double s = 0.0;
      for (int k = 0; k < 3; ++k) s += r[i * 3 + k] * r[j * 3 + k];
      double want = (i == j) ? 1.0 : 0.0;
      require(std::fabs(s - want) < 1e-9, "CameraModel: rotation is not orthonormal");
    }
  double det = r[0] * (r[4] * r[8] - r[5] * r[7]) - r[1] * (r[3] * r[8] - r[5] * r[6]) +
               r[2] * (r[3] * r[7] - r[4] * r[6]);
  require(std::fabs(det - 1.0) < 1e-9, "CameraModel: rotation determinant must be +1");
}

}  // namespace

CameraModel::CameraModel(double fx, double fy, double cx, double cy,
                         const std::array<double, 9>& rotation,
                         const std::array<double, 3>& translation, double image_w,
                         double image_h, double skew)
    : fx_(fx), fy_(fy), cx_(cx), cy_(cy), skew_(skew), w_(image_w), h_(image_h),
      rot_(rotation), t_(translation) {
  require(fx > 0 && fy > 0, "CameraModel: focal lengths must be positive");
  require(image_w > 0 && image_h > 0, "CameraModel: image size must be positive");
  check_rotation(rot_);
}

std::array<double, 3> CameraModel::to_camera(const std::array<double, 3>& p) const {
  std::array<double, 3> q;
  for (int i = 0; i < 3; ++i)
    q[i] = rot_[i * 3] * p[0] + rot_[i * 3 + 1] * p[1] + rot_[i * 3 + 2] * p[2] + t_[i];
  return q;
}

std::array<double, 3> CameraModel::to_ego(const std::array<double, 3>& p_cam) const {
  std::array<double, 3> d{p_cam[0] - t_[0], p_cam[1] - t_[1], p_cam[2] - t_[2]};
  std::array<double, 3> q;
  for (int i = 0; i < 3; ++i)  // R^T (p_cam - t)
    q[i] = rot_[i] * d[0] + rot_[3 + i] * d[1] + rot_[6 + i] * d[2];
  return q;
}

void BevGridSpec::validate() const {
  require(cell_size > 0.0, "BevGridSpec: cell_size must be positive");
  require(x_max > x_min && y_max > y_min, "BevGridSpec: empty range");
  double rx = (x_max - x_min) / cell_size;
  double ry = (y_max - y_min) / cell_size;
  require(std::fabs(rx - std::round(rx)) < 1e-9 && std::fabs(ry - std::round(ry)) < 1e-9,
          "BevGridSpec: ranges must be divisible by cell_size");
  require(std::round(rx) >= 1 && std::round(ry) >= 1, "BevGridSpec: grid extents must be >= 1");
}

std::size_t BevGridSpec::nx() const {
  return static_cast<std::size_t>(std::round((x_max - x_min) / cell_size));
}
std::size_t BevGridSpec::ny() const {
  return static_cast<std::size_t>(std::round((y_max - y_min) / cell_size));
}

Tensor decode_reference_points(Tape& t, const Tensor& queries, const Tensor& phi_w,
                               const Tensor& phi_b, const SceneBounds& bounds) {
  bounds.validate();
  require(phi_w.shape.size() == 2 && phi_w.shape[1] == 3,
          "decode_reference_points: phi must map d -> 3");
  Tensor s = sigmoid(t, linear(t, queries, phi_w, phi_b));
  std::vector<double> scl(3), off(3);
  for (int i = 0; i < 3; ++i) {
    scl[i] = bounds.max[i] - bounds.min[i];
    off[i] = bounds.min[i];
  }
  return affine_cols(t, s, scl, off);
}

ProjectedPoints project_to_image(Tape& t, const Tensor& points, const CameraModel& cam) {
  require(points.shape.size() == 2 && points.shape[1] == 3,
          "project_to_image: points must be n x 3");
  std::size_t n = points.shape[0];
  ProjectedPoints out;
  out.coords = Tensor::zeros({n, 2});
  out.valid.assign(n, 0);

  const auto& r = cam.rotation();
  double W = cam.width(), H = cam.height();
  // Rows of the 2x3 Jacobian d(u_norm, v_norm)/d(p_ego) for valid points.
  std::vector<double> jac(n * 6, 0.0);

  for (std::size_t i = 0; i < n; ++i) {
    std::array<double, 3> p{points.data[i * 3], points.data[i * 3 + 1],
                            points.data[i * 3 + 2]};
    auto q = cam.to_camera(p);
    if (q[2] <= CameraModel::kMinDepth) continue;
    double u = cam.fx() * q[0] / q[2] + cam.skew() * q[1] / q[2] + cam.cx();
    double v = cam.fy() * q[1] / q[2] + cam.cy();
    if (u < 0.0 || u > W || v < 0.0 || v > H) continue;
    out.valid[i] = 1;
    out.coords.data[i * 2] = u / W;
    out.coords.data[i * 2 + 1] = v / H;
    // d(u)/d(q) = [fx/z, skew/z, -(fx x + skew y)/z^2]; d(v)/d(q) = [0, fy/z, -fy y/z^2]
    double du_q[3] = {cam.fx() / q[2], cam.skew() / q[2],
                      -(cam.fx() * q[0] + cam.skew() * q[1]) / (q[2] * q[2])};
    double dv_q[3] = {0.0, cam.fy() / q[2], -cam.fy() * q[1] / (q[2] * q[2])};
    for (int j = 0; j < 3; ++j) {
      double du = 0.0, dv = 0.0;
      for (int k = 0; k < 3; ++k) {
        du += du_q[k] * r[k * 3 + j];
        dv += dv_q[k] * r[k * 3 + j];
      }
      jac[i * 6 + j] = du / W;
      jac[i * 6 + 3 + j] = dv / H;
    }
  }

  if (points.node >= 0) {
    int pn = points.node;
    int id = t.push(out.coords.size());
    std::vector<std::uint8_t> valid = out.valid;
    t.set_back(id, [id, pn, jac, valid, n](Tape& tp) {
      const auto& gy = tp.grad(id);
      auto& gp = tp.grad(pn);
      for (std::size_t i = 0; i < n; ++i) {
        if (!valid[i]) continue;
        for (int j = 0; j < 3; ++j)
          gp[i * 3 + j] += gy[i * 2] * jac[i * 6 + j] + gy[i * 2 + 1] * jac[i * 6 + 3 + j];
      }
    });
    out.coords.node = id;
  }
  return out;
}

ProjectedPoints project_to_bev(Tape& t, const Tensor& points, const BevGridSpec& grid) {
  require(points.shape.size() == 2 && points.shape[1] == 3,
          "project_to_bev: points must be n x 3");
  grid.validate();
  std::size_t n = points.shape[0];
  ProjectedPoints out;
  out.coords = Tensor::zeros({n, 2});
  out.valid.assign(n, 0);
  double rx = grid.x_max - grid.x_min, ry = grid.y_max - grid.y_min;
  for (std::size_t i = 0; i < n; ++i) {
    double x = points.data[i * 3], y = points.data[i * 3 + 1];
    if (x < grid.x_min || x > grid.x_max || y < grid.y_min || y > grid.y_max) continue;
    out.valid[i] = 1;
    out.coords.data[i * 2] = (x - grid.x_min) / rx;
    out.coords.data[i * 2 + 1] = (y - grid.y_min) / ry;
  }
  if (points.node >= 0) {
    int pn = points.node;
    int id = t.push(out.coords.size());
    std::vector<std::uint8_t> valid = out.valid;
    t.set_back(id, [id, pn, valid, rx, ry, n](Tape& tp) {
      const auto& gy = tp.grad(id);
      auto& gp = tp.grad(pn);
      for (std::size_t i = 0; i < n; ++i) {
        if (!valid[i]) continue;
        gp[i * 3] += gy[i * 2] / rx;
        gp[i * 3 + 1] += gy[i * 2 + 1] / ry;
      }
    });
    out.coords.node = id;
  }
  return out;
}

Tensor bilinear_sample(Tape& t, const Tensor& map, const Tensor& coords,
                       const std::vector<std::uint8_t>& valid) {
  require(map.shape.size() == 3, "bilinear_sample: map must be h x w x c");
  require(coords.shape.size() == 2 && coords.shape[1] == 2,
          "bilinear_sample: coords must be n x 2");
  std::size_t h = map.shape[0], w = map.shape[1], c = map.shape[2];
  std::size_t n = coords.shape[0];
  require(valid.size() == n, "bilinear_sample: valid mask length mismatch");
  for (double v : coords.data) require(std::isfinite(v), "bilinear_sample: non-finite coords");

  Tensor y = Tensor::zeros({n, c});
  // Saved geometry per sample for the backward pass.
  struct Cell {
    std::size_t x0, y0;
    double fx, fy;
  };
  std::vector<Cell> cells(n);

  auto locate = [](double u, std::size_t extent) {
    // Align corners: u=0 -> pixel 0 center, u=1 -> pixel extent-1 center.
    double p = u * static_cast<double>(extent - 1);
    double f = std::floor(p);
    std::size_t i0 = static_cast<std::size_t>(std::max(0.0, f));
    if (extent >= 2 && i0 > extent - 2) i0 = extent - 2;
    double frac = (extent >= 2) ? p - static_cast<double>(i0) : 0.0;
    return std::pair<std::size_t, double>(i0, frac);
  };

  for (std::size_t i = 0; i < n; ++i) {
    if (!valid[i]) continue;
    auto [x0, fx] = locate(coords.data[i * 2], w);
    auto [y0, fy] = locate(coords.data[i * 2 + 1], h);
    cells[i] = Cell{x0, y0, fx, fy};
    std::size_t x1 = (w >= 2) ? x0 + 1 : x0;
    std::size_t y1 = (h >= 2) ? y0 + 1 : y0;
    for (std::size_t ch = 0; ch < c; ++ch) {
      double m00 = map.data[(y0 * w + x0) * c + ch];
      double m01 = map.data[(y0 * w + x1) * c + ch];
      double m10 = map.data[(y1 * w + x0) * c + ch];
      double m11 = map.data[(y1 * w + x1) * c + ch];
      y.data[i * c + ch] = (1 - fy) * ((1 - fx) * m00 + fx * m01) +
                           fy * ((1 - fx) * m10 + fx * m11);
    }
  }

  if (map.node >= 0 || coords.node >= 0) {
    int mn = map.node, cn = coords.node;
    int id = t.push(y.size());
    std::vector<double> md = map.data;
    std::vector<std::uint8_t> vmask = valid;
    t.set_back(id, [id, mn, cn, md, vmask, cells, h, w, c, n](Tape& tp) {
      const auto& gy = tp.grad(id);
      for (std::size_t i = 0; i < n; ++i) {
        if (!vmask[i]) continue;
        const Cell& cl = cells[i];
        std::size_t x1 = (w >= 2) ? cl.x0 + 1 : cl.x0;
        std::size_t y1 = (h >= 2) ? cl.y0 + 1 : cl.y0;
        if (mn >= 0) {
          auto& gm = tp.grad(mn);
          for (std::size_t ch = 0; ch < c; ++ch) {
            double g = gy[i * c + ch];
            gm[(cl.y0 * w + cl.x0) * c + ch] += g * (1 - cl.fy) * (1 - cl.fx);
            gm[(cl.y0 * w + x1) * c + ch] += g * (1 - cl.fy) * cl.fx;
            gm[(y1 * w + cl.x0) * c + ch] += g * cl.fy * (1 - cl.fx);
            gm[(y1 * w + x1) * c + ch] += g * cl.fy * cl.fx;
          }
        }
        if (cn >= 0) {
          auto& gc = tp.grad(cn);
          double du = 0.0, dv = 0.0;
          for (std::size_t ch = 0; ch < c; ++ch) {
            double g = gy[i * c + ch];
            double m00 = md[(cl.y0 * w + cl.x0) * c + ch];
            double m01 = md[(cl.y0 * w + x1) * c + ch];
            double m10 = md[(y1 * w + cl.x0) * c + ch];
            double m11 = md[(y1 * w + x1) * c + ch];
            du += g * ((1 - cl.fy) * (m01 - m00) + cl.fy * (m11 - m10));
            dv += g * ((1 - cl.fx) * (m10 - m00) + cl.fx * (m11 - m01));
          }
          gc[i * 2] += du * static_cast<double>(w - 1);
          gc[i * 2 + 1] += dv * static_cast<double>(h - 1);
        }
      }
    });
    y.node = id;
  }
  return y;
}

}  // namespace msf
