#pragma once

#include <array>
#include <utility>
#include <vector>

#include "msf/head.hpp"
#include "msf/tensor.hpp"

namespace msf {

struct CostWeights {
  double w_cls = 2.0;
  double w_box = 0.25;

  void validate() const {
    require(w_cls >= 0.0 && w_box >= 0.0 && (w_cls > 0.0 || w_box > 0.0),
            "CostWeights: weights must be >= 0 and not both zero");
  }
};

struct FocalParams {
  double alpha = 0.25;
  double gamma = 2.0;

  void validate() const {
    require(alpha > 0.0 && alpha < 1.0, "FocalParams: alpha must lie in (0,1)");
    require(gamma >= 0.0, "FocalParams: gamma must be >= 0");
  }
};

struct Assignment {
  std::vector<std::pair<std::size_t, std::size_t>> pairs;  // (row=gt, col=prediction)
  double total_cost = 0.0;
};

struct LossBreakdown {
  Tensor total;  // scalar, on tape
  std::vector<std::pair<double, double>> per_layer;  // (cls, box) values
};

// Minimum-cost assignment of each row to a distinct column; M <= N.
Assignment hungarian(const std::vector<std::vector<double>>& cost);

// Per-class binary focal loss on sigmoid logits. targets[i] is the class id
// of prediction i, or -1 for the no-object slot. Normalized by `norm`.
Tensor focal_loss(Tape& t, const Tensor& logits, const std::vector<int>& targets,
                  const FocalParams& fp, double norm);

// Ground truth in the regression-head encoding: normalized center, log
// sizes, sin/cos yaw, velocity.
std::array<double, 10> encode_box(const Box3D& gt, const SceneBounds& bounds);

// Raw predictions in the same encoding (center logits pass through sigmoid).
Tensor encode_pred(Tape& t, const Tensor& reg_raw);

double l1_box_loss(const double* pred_raw, const Box3D& gt, const SceneBounds& bounds);

std::vector<std::vector<double>> pairwise_cost(const LayerOutput& layer,
                                               const std::vector<Box3D>& gts,
                                               const SceneBounds& bounds,
                                               const CostWeights& w, const FocalParams& fp);

LossBreakdown set_loss(Tape& t, const std::vector<LayerOutput>& layers,
                       const std::vector<Box3D>& gts, const SceneBounds& bounds,
                       const CostWeights& w, const FocalParams& fp);

}  // namespace msf
