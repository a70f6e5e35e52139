#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "msf/matching.hpp"
#include "msf/metrics.hpp"
#include "msf/scene.hpp"

namespace msf {

struct OptimConfig {
  double peak_lr = 2e-4;
  double min_lr = 2e-7;
  double weight_decay = 1e-2;
  std::size_t warmup_steps = 2000;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double clip_norm = 35.0;  // 0 disables clipping

  void validate() const {
    require(min_lr > 0.0 && min_lr <= peak_lr, "OptimConfig: need 0 < min_lr <= peak_lr");
  }
};

enum class LidarEncoder { kPillar, kVoxel };

struct TrainConfig {
  std::uint64_t seed = 0;
  std::size_t epochs = 24;
  std::size_t batch_size = 1;
  std::size_t num_scenes = 16;
  std::size_t checkpoint_every = 1000;
  std::size_t log_every = 10;
  OptimConfig optim;
  HeadConfig head;
  CostWeights loss_weights;
  FocalParams focal;
  SceneBounds bounds;
  BevGridSpec grid;
  LidarEncoder encoder = LidarEncoder::kPillar;
  double voxel_size = 0.1;
  std::size_t max_points_per_pillar = 32;
  std::size_t max_pillars = 4096;
  SceneSpec scene;

  void validate() const;
  std::size_t total_steps() const { return epochs * num_scenes / batch_size; }
};

TrainConfig load_config(const std::string& path);        // strict: unknown keys rejected
TrainConfig parse_config_text(const std::string& text);  // same, from a string
std::string dump_config(const TrainConfig& cfg);         // canonical JSON text

// Linear warmup to peak over W steps, then cosine to min_lr at step T.
double cosine_warmup_lr(std::size_t step, const OptimConfig& cfg, std::size_t total_steps);

class AdamW {
 public:
  explicit AdamW(const OptimConfig& cfg) : cfg_(cfg) { cfg.validate(); }

  // Applies one update; throws numeric_error naming the parameter on a
  // non-finite gradient. Gradients are clipped to cfg.clip_norm first.
  void step(ParamStore& params, Tape& tape, double lr);

  std::size_t steps_taken() const { return t_; }

  struct Moments {
    std::vector<double> m, v;
  };
  std::vector<Moments>& moments() { return moments_; }
  void set_step(std::size_t t) { t_ = t; }

 private:
  OptimConfig cfg_;
  std::vector<Moments> moments_;
  std::size_t t_ = 0;
};

// Versioned binary checkpoint; save/load/save round trips byte-identically.
struct Checkpoint {
  std::uint32_t version = 1;
  std::uint64_t step = 0;
  std::string config_text;  // verbatim config snapshot
  ParamStore params;
  std::vector<AdamW::Moments> moments;
};

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

struct Model {
  HeadConfig head;
  ParamStore params;
};

// Registers head + LiDAR-encoder parameters.
Model build_model(const TrainConfig& cfg);

// Full differentiable forward: LiDAR encode -> BEV pyramid; synthetic image
// pyramids; run_head.
std::vector<LayerOutput> forward_scene(Tape& tape, Model& model, const TrainConfig& cfg,
                                       const Scene& scene);

struct TrainResult {
  Checkpoint checkpoint;
  std::vector<double> loss_history;
};

// If checkpoint_path is set, a checkpoint is written there every
// cfg.checkpoint_every steps (and the final one is still returned).
TrainResult train(const TrainConfig& cfg, const std::vector<Scene>& scenes,
                  const std::string& log_path = "", const std::string& checkpoint_path = "");

std::vector<DetectionRecord> infer_scene(Model& model, const TrainConfig& cfg,
                                         const Scene& scene);

// Detections text format: sample id, class label, score, then
// x y z w l h yaw vx vy. Ground-truth files omit the score column.
void write_detections(const std::string& path, const std::vector<DetectionRecord>& dets,
                      const std::vector<std::string>& class_names);
std::vector<DetectionRecord> read_detections(const std::string& path,
                                             const std::vector<std::string>& class_names);
void write_ground_truth(const std::string& path, const std::vector<GroundTruthRecord>& gts,
                        const std::vector<std::string>& class_names);
std::vector<GroundTruthRecord> read_ground_truth(const std::string& path,
                                                 const std::vector<std::string>& class_names);

}  // namespace msf
