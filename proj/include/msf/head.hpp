#pragma once

#include <vector>

#include "msf/geometry.hpp"
#include "msf/pointcloud.hpp"
#include "msf/tensor.hpp"

namespace msf {

// 9-parameter oriented box + class/score.
struct Box3D {
  std::array<double, 3> center{};    // meters, ego frame
  std::array<double, 3> size{1, 1, 1};  // w, l, h
  double yaw = 0.0;                  // radians, (-pi, pi]
  std::array<double, 2> velocity{};  // vx, vy
  int class_id = 0;
  double score = 0.0;

  void validate() const {
    for (double s : size) require(s > 0.0, "Box3D: sizes must be positive");
    require(yaw > -M_PI - 1e-12 && yaw <= M_PI + 1e-12, "Box3D: yaw must lie in (-pi, pi]");
  }
};

enum class AttentionWeightMode { kSigmoid, kSoftmax };

struct HeadConfig {
  std::size_t layers = 6;
  std::size_t num_queries = 900;
  std::size_t hidden_dim = 256;
  std::size_t num_heads = 8;
  std::size_t ffn_dim = 512;
  std::size_t num_classes = 10;
  std::size_t top_k = 300;
  std::size_t num_cameras = 6;
  AttentionWeightMode weight_mode = AttentionWeightMode::kSigmoid;

  void validate() const {
    require(layers >= 1, "HeadConfig: layers must be >= 1");
    require(num_queries >= 1, "HeadConfig: num_queries must be >= 1");
    require(num_heads >= 1 && hidden_dim % num_heads == 0,
            "HeadConfig: num_heads must divide hidden_dim");
    require(num_classes >= 1, "HeadConfig: num_classes must be >= 1");
    require(num_cameras >= 1, "HeadConfig: at least one camera required");
    require(top_k >= 1 && top_k <= num_queries, "HeadConfig: top_k must lie in [1, num_queries]");
  }
};

// Feature context the head cross-attends into.
struct FusionContext {
  std::vector<FeaturePyramid> image_pyramids;  // one per camera, 4 levels
  FeaturePyramid bev_pyramid;                  // 4 levels
  std::vector<CameraModel> cameras;
  SceneBounds bounds;
  BevGridSpec grid;
};

struct LayerOutput {
  Tensor queries;      // N_q x d refined queries
  Tensor reg_raw;      // N_q x 10 raw box parameters
  Tensor cls_logits;   // N_q x n_classes
  std::vector<Box3D> boxes;  // decoded, with argmax class and score
};

// Registers all head parameters (queries, phi, per-layer blocks and heads)
// into the store with hierarchical names.
void init_head_params(ParamStore& store, const HeadConfig& cfg, Rng& rng);

Tensor multi_head_self_attention(Tape& t, const Tensor& q, ParamStore& store,
                                 const std::string& prefix, std::size_t num_heads);

Tensor msf_cross_attention(Tape& t, const Tensor& q, ParamStore& store,
                           const std::string& prefix, const FusionContext& ctx,
                           const HeadConfig& cfg);

Tensor ffn(Tape& t, const Tensor& q, ParamStore& store, const std::string& prefix);

Tensor msf_block(Tape& t, const Tensor& q, ParamStore& store, const std::string& prefix,
                 const FusionContext& ctx, const HeadConfig& cfg);

LayerOutput predict(Tape& t, const Tensor& q, ParamStore& store, const std::string& prefix,
                    const SceneBounds& bounds, std::size_t num_classes);

std::vector<LayerOutput> run_head(Tape& t, ParamStore& store, const HeadConfig& cfg,
                                  const FusionContext& ctx);

// Decode one raw 10-vector (center logits, log sizes, sin/cos yaw, velocity).
Box3D decode_box(const double* raw, const SceneBounds& bounds);

// Boxes sorted by score descending (ties: lower query index), truncated to k.
std::vector<Box3D> select_top_k(const LayerOutput& final, std::size_t k);

}  // namespace msf
