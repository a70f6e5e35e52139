#include "msf/matching.hpp"

#include <cmath>
#include <limits>

namespace msf {

Assignment hungarian(const std::vector<std::vector<double>>& cost) {
  std::size_t m = cost.size();
  Assignment out;
  if (m == 0) return out;
  std::size_t n = cost[0].size();
  require(m <= n, "hungarian: need rows <= columns, got " + std::to_string(m) + " x " +
                      std::to_string(n));
  for (const auto& row : cost) {
    require(row.size() == n, "hungarian: ragged cost matrix");
    for (double v : row)
      if (!std::isfinite(v)) throw input_error("hungarian: non-finite cost entry");
  }

  // Shortest augmenting path with row/column potentials, 1-indexed.
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(m + 1, 0.0), v(n + 1, 0.0);
  std::vector<std::size_t> p(n + 1, 0), way(n + 1, 0);
  for (std::size_t i = 1; i <= m; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::vector<double> minv(n + 1, inf);
    std::vector<char> used(n + 1, 0);
    do {
      used[j0] = 1;
      std::size_t i0 = p[j0], j1 = 0;
      double delta = inf;
      for (std::size_t j = 1; j <= n; ++j) {
        if (used[j]) continue;
        double cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      std::size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }

  out.pairs.resize(m);
  for (std::size_t j = 1; j <= n; ++j)
    if (p[j] != 0) out.pairs[p[j] - 1] = {p[j] - 1, j - 1};
  for (const auto& [row, col] : out.pairs) out.total_cost += cost[row][col];
  return out;
}

namespace {

double softplus(double x) {
  return std::log1p(std::exp(-std::fabs(x))) + std::max(x, 0.0);
}

double stable_sigmoid(double v) {
  return v >= 0.0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v));
}

}  // namespace

Tensor focal_loss(Tape& t, const Tensor& logits, const std::vector<int>& targets,
                  const FocalParams& fp, double norm) {
  fp.validate();
  require(logits.shape.size() == 2, "focal_loss: logits must be n x C");
  std::size_t n = logits.shape[0], C = logits.shape[1];
  require(targets.size() == n, "focal_loss: one target per prediction required");
  require(norm > 0.0, "focal_loss: normalizer must be positive");

  double a = fp.alpha, g = fp.gamma;
  ExactSum acc;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t c = 0; c < C; ++c) {
      double z = logits.data[i * C + c];
      double p = stable_sigmoid(z);
      bool pos = targets[i] == static_cast<int>(c);
      double term = pos ? a * std::pow(1.0 - p, g) * softplus(-z)
                        : (1.0 - a) * std::pow(p, g) * softplus(z);
      acc.add(term);
    }
  Tensor y = Tensor::scalar(acc.result() / norm);

  if (logits.node >= 0) {
    int zn = logits.node;
    int id = t.push(1);
    std::vector<double> zd = logits.data;
    std::vector<int> tg = targets;
    t.set_back(id, [id, zn, zd, tg, a, g, norm, n, C](Tape& tp) {
      double gy = tp.grad(id)[0] / norm;
      auto& gz = tp.grad(zn);
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t c = 0; c < C; ++c) {
          double z = zd[i * C + c];
          double p = stable_sigmoid(z);
          double d;
          if (tg[i] == static_cast<int>(c)) {
            // d/dz of a (1-p)^g * (-ln p)
            d = -a * g * p * std::pow(1.0 - p, g) * softplus(-z) -
                a * std::pow(1.0 - p, g + 1.0);
          } else {
            d = (1.0 - a) * std::pow(p, g + 1.0) +
                (1.0 - a) * g * std::pow(p, g) * (1.0 - p) * softplus(z);
          }
          gz[i * C + c] += gy * d;
        }
    });
    y.node = id;
  }
  return y;
}

std::array<double, 10> encode_box(const Box3D& gt, const SceneBounds& bounds) {
  bounds.validate();
  require(bounds.contains(gt.center[0], gt.center[1], gt.center[2]),
          "encode_box: ground truth center outside scene bounds");
  std::array<double, 10> e{};
  for (int i = 0; i < 3; ++i) {
    auto ui = static_cast<std::size_t>(i);
    e[ui] = (gt.center[ui] - bounds.min[ui]) / (bounds.max[ui] - bounds.min[ui]);
    e[3 + ui] = std::log(gt.size[ui]);
  }
  e[6] = std::sin(gt.yaw);
  e[7] = std::cos(gt.yaw);
  e[8] = gt.velocity[0];
  e[9] = gt.velocity[1];
  return e;
}

Tensor encode_pred(Tape& t, const Tensor& reg_raw) {
  require(reg_raw.shape.size() == 2 && reg_raw.shape[1] == 10,
          "encode_pred: raw predictions must be n x 10");
  Tensor center = sigmoid(t, slice_cols(t, reg_raw, 0, 3));
  Tensor rest = slice_cols(t, reg_raw, 3, 7);
  return concat_cols(t, {center, rest});
}

double l1_box_loss(const double* pred_raw, const Box3D& gt, const SceneBounds& bounds) {
  auto e = encode_box(gt, bounds);
  double s = 0.0;
  for (int i = 0; i < 10; ++i) {
    double pv = (i < 3) ? stable_sigmoid(pred_raw[i]) : pred_raw[i];
    s += std::fabs(pv - e[static_cast<std::size_t>(i)]);
  }
  return s / 10.0;
}

std::vector<std::vector<double>> pairwise_cost(const LayerOutput& layer,
                                               const std::vector<Box3D>& gts,
                                               const SceneBounds& bounds,
                                               const CostWeights& w, const FocalParams& fp) {
  w.validate();
  fp.validate();
  std::size_t M = gts.size();
  std::size_t N = layer.reg_raw.shape[0];
  std::size_t C = layer.cls_logits.shape[1];
  std::vector<std::vector<double>> cost(M, std::vector<double>(N, 0.0));
  for (std::size_t i = 0; i < M; ++i) {
    auto cid = static_cast<std::size_t>(gts[i].class_id);
    require(cid < C, "pairwise_cost: ground-truth class id out of range");
    for (std::size_t j = 0; j < N; ++j) {
      double p = stable_sigmoid(layer.cls_logits.data[j * C + cid]);
      cost[i][j] = w.w_cls * (-p) + w.w_box * l1_box_loss(&layer.reg_raw.data[j * 10],
                                                          gts[i], bounds);
    }
  }
  return cost;
}

LossBreakdown set_loss(Tape& t, const std::vector<LayerOutput>& layers,
                       const std::vector<Box3D>& gts, const SceneBounds& bounds,
                       const CostWeights& w, const FocalParams& fp) {
  require(!layers.empty(), "set_loss: at least one layer required");
  w.validate();
  fp.validate();
  std::size_t M = gts.size();

  LossBreakdown out;
  Tensor total = Tensor::scalar(0.0);
  bool first = true;
  std::size_t layer_index = 0;
  for (const auto& layer : layers) {
    std::size_t N = layer.reg_raw.shape[0];
    require(M <= N, "set_loss: more ground truths than predictions");

    std::vector<int> targets(N, -1);
    std::vector<std::size_t> matched_cols;
    std::vector<std::array<double, 10>> gt_enc;
    if (M > 0) {
      Assignment assign = hungarian(pairwise_cost(layer, gts, bounds, w, fp));
      matched_cols.reserve(M);
      gt_enc.reserve(M);
      for (const auto& [gi, pj] : assign.pairs) {
        targets[pj] = gts[gi].class_id;
        matched_cols.push_back(pj);
        gt_enc.push_back(encode_box(gts[gi], bounds));
      }
    }

    Tensor cls = focal_loss(t, layer.cls_logits, targets, fp,
                            static_cast<double>(std::max<std::size_t>(M, 1)));
    Tensor box = Tensor::scalar(0.0);
    if (M > 0) {
      Tensor pred = encode_pred(t, gather_rows(t, layer.reg_raw, matched_cols));
      Tensor gt_t = Tensor::zeros({M, 10});
      for (std::size_t i = 0; i < M; ++i)
        for (int j = 0; j < 10; ++j)
          gt_t.data[i * 10 + static_cast<std::size_t>(j)] = gt_enc[i][static_cast<std::size_t>(j)];
      box = mean_all(t, abs_op(t, sub(t, pred, gt_t)));
    }

    if (!std::isfinite(cls.data[0]))
      throw numeric_error("set_loss: non-finite classification term at layer " +
                          std::to_string(layer_index));
    if (!std::isfinite(box.data[0]))
      throw numeric_error("set_loss: non-finite box term at layer " +
                          std::to_string(layer_index));
    out.per_layer.emplace_back(cls.data[0], box.data[0]);
    Tensor layer_total = add(t, scale(t, cls, w.w_cls), scale(t, box, w.w_box));
    total = first ? layer_total : add(t, total, layer_total);
    first = false;
    ++layer_index;
  }
  out.total = total;
  return out;
}

}  // namespace msf
