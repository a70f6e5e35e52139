#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "msf/head.hpp"

namespace msf {

struct DetectionRecord {
  std::string sample_id;
  Box3D box;  // carries class_id and score
};

struct GroundTruthRecord {
  std::string sample_id;
  Box3D box;  // score unused
  std::optional<std::string> attribute;
};

inline const std::vector<std::string>& default_class_names() {
  static const std::vector<std::string> names = {
      "car",        "truck",      "trailer",    "bus",          "construction_vehicle",
      "bicycle",    "motorcycle", "pedestrian", "traffic_cone", "barrier"};
  return names;
}

struct EvalConfig {
  std::vector<double> thresholds = {0.5, 1.0, 2.0, 4.0};  // meters
  double min_recall = 0.1;
  double min_precision = 0.1;
  double tp_threshold = 2.0;  // meters, TP-error matching
  std::vector<std::string> classes = default_class_names();
  std::vector<double> distance_bin_edges = {0.0, 20.0, 30.0};  // last bin open-ended
  std::vector<double> size_bin_edges = {0.0, 4.0};
  std::size_t recall_samples = 41;

  void validate() const {
    require(!thresholds.empty(), "EvalConfig: thresholds required");
    for (std::size_t i = 0; i < thresholds.size(); ++i) {
      require(thresholds[i] > 0.0, "EvalConfig: thresholds must be positive");
      if (i) require(thresholds[i] > thresholds[i - 1], "EvalConfig: thresholds must ascend");
    }
    require(recall_samples >= 2, "EvalConfig: need at least 2 recall samples");
  }
};

struct TpErrors {
  double ate = 1.0, ase = 1.0, aoe = 1.0, ave = 1.0, aae = 1.0;
};

struct MetricsReport {
  // ap[class][threshold index]
  std::map<std::string, std::vector<double>> ap;
  std::map<std::string, TpErrors> tp;
  double mAP = 0.0;
  double mATE = 1.0, mASE = 1.0, mAOE = 1.0, mAVE = 1.0, mAAE = 1.0;
  double nds_score = 0.0;
  std::vector<std::string> evaluated_classes;  // classes with ground truth
  // Optional binned breakdowns: bin label -> mAP.
  std::map<std::string, double> map_by_distance;
  std::map<std::string, double> map_by_size;
};

struct MatchResult {
  std::vector<char> tp_flags;  // per prediction, in sorted order
  std::vector<std::pair<std::size_t, std::size_t>> pairs;  // (pred idx, gt idx)
  std::size_t fn = 0;
};

// Greedy nuScenes matching: predictions in score order claim the nearest
// unclaimed same-sample ground truth within `threshold` (2D center distance).
MatchResult match_by_center_distance(const std::vector<DetectionRecord>& preds_sorted,
                                     const std::vector<GroundTruthRecord>& gts,
                                     double threshold);

double average_precision(const std::vector<DetectionRecord>& preds_sorted,
                         const std::vector<GroundTruthRecord>& gts, double threshold,
                         const EvalConfig& cfg);

TpErrors tp_errors(const std::vector<DetectionRecord>& preds_sorted,
                   const std::vector<GroundTruthRecord>& gts,
                   const std::vector<std::pair<std::size_t, std::size_t>>& pairs);

// NDS = (1/10) [5 mAP + sum over the 5 TP means of (1 - min(1, e))].
double nds(double mAP, const TpErrors& e);

MetricsReport evaluate(const std::vector<DetectionRecord>& preds,
                       const std::vector<GroundTruthRecord>& gts, const EvalConfig& cfg,
                       bool with_bins = false);

// Stable evaluation order: score desc, then sample id, then insertion index.
std::vector<DetectionRecord> sort_predictions(const std::vector<DetectionRecord>& preds);

std::string render_report_table(const MetricsReport& rep);

}  // namespace msf
