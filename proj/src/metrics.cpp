#include "msf/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <sstream>

namespace msf {

std::vector<DetectionRecord> sort_predictions(const std::vector<DetectionRecord>& preds) {
  std::vector<std::size_t> order(preds.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (preds[a].box.score != preds[b].box.score) return preds[a].box.score > preds[b].box.score;
    return preds[a].sample_id < preds[b].sample_id;  // then insertion index (stable)
  });
  std::vector<DetectionRecord> out;
  out.reserve(preds.size());
  for (std::size_t i : order) out.push_back(preds[i]);
  return out;
}

namespace {

double center_dist2d(const Box3D& a, const Box3D& b) {
  return std::hypot(a.center[0] - b.center[0], a.center[1] - b.center[1]);
}

}  // namespace

MatchResult match_by_center_distance(const std::vector<DetectionRecord>& preds_sorted,
                                     const std::vector<GroundTruthRecord>& gts,
                                     double threshold) {
  MatchResult r;
  r.tp_flags.assign(preds_sorted.size(), 0);
  std::vector<char> claimed(gts.size(), 0);
  for (std::size_t pi = 0; pi < preds_sorted.size(); ++pi) {
    const auto& p = preds_sorted[pi];
    double best = threshold;
    long best_g = -1;
    for (std::size_t gi = 0; gi < gts.size(); ++gi) {
      if (claimed[gi] || gts[gi].sample_id != p.sample_id) continue;
      double d = center_dist2d(p.box, gts[gi].box);
      if (d <= best) {
        best = d;
        best_g = static_cast<long>(gi);
      }
    }
    if (best_g >= 0) {
      claimed[static_cast<std::size_t>(best_g)] = 1;
      r.tp_flags[pi] = 1;
      r.pairs.emplace_back(pi, static_cast<std::size_t>(best_g));
    }
  }
  r.fn = gts.size() - r.pairs.size();
  return r;
}

double average_precision(const std::vector<DetectionRecord>& preds_sorted,
                         const std::vector<GroundTruthRecord>& gts, double threshold,
                         const EvalConfig& cfg) {
  if (gts.empty()) return 0.0;
  MatchResult m = match_by_center_distance(preds_sorted, gts, threshold);

  // Raw PR points in prediction order.
  std::vector<double> rec, prec;
  std::size_t tp = 0, fp = 0;
  for (char f : m.tp_flags) {
    if (f)
      ++tp;
    else
      ++fp;
    rec.push_back(static_cast<double>(tp) / static_cast<double>(gts.size()));
    prec.push_back(static_cast<double>(tp) / static_cast<double>(tp + fp));
  }

  // Precision at evenly spaced recall samples (linear interpolation, 0 past
  // the achieved recall), then normalized trapezoid over [min_recall, 1].
  std::size_t S = cfg.recall_samples;
  std::vector<double> p_at(S, 0.0);
  for (std::size_t s = 0; s < S; ++s) {
    double r = static_cast<double>(s) / static_cast<double>(S - 1);
    if (rec.empty() || r > rec.back() + 1e-12) {
      p_at[s] = 0.0;
      continue;
    }
    // First PR point with recall >= r.
    auto it = std::lower_bound(rec.begin(), rec.end(), r - 1e-12);
    std::size_t k = static_cast<std::size_t>(it - rec.begin());
    if (k >= rec.size()) {
      p_at[s] = 0.0;
    } else if (k == 0 || rec[k] == rec[k - 1]) {
      p_at[s] = prec[k];
    } else {
      double t = (r - rec[k - 1]) / (rec[k] - rec[k - 1]);
      t = std::clamp(t, 0.0, 1.0);
      p_at[s] = prec[k - 1] + t * (prec[k] - prec[k - 1]);
    }
  }

  double area = 0.0;
  double dr = 1.0 / static_cast<double>(S - 1);
  auto clamped = [&](std::size_t s) { return std::max(p_at[s] - cfg.min_precision, 0.0); };
  for (std::size_t s = 0; s + 1 < S; ++s) {
    double r0 = static_cast<double>(s) * dr;
    if (r0 + dr <= cfg.min_recall + 1e-12) continue;
    area += 0.5 * (clamped(s) + clamped(s + 1)) * dr;
  }
  double norm = (1.0 - cfg.min_recall) * (1.0 - cfg.min_precision);
  return area / norm;
}

TpErrors tp_errors(const std::vector<DetectionRecord>& preds_sorted,
                   const std::vector<GroundTruthRecord>& gts,
                   const std::vector<std::pair<std::size_t, std::size_t>>& pairs) {
  TpErrors e;  // defaults to the all-ones unmatched convention
  if (pairs.empty()) return e;
  double ate = 0, ase = 0, aoe = 0, ave = 0, aae = 0;
  for (const auto& [pi, gi] : pairs) {
    const Box3D& p = preds_sorted[pi].box;
    const Box3D& g = gts[gi].box;
    ate += center_dist2d(p, g);
    double inter = std::min(p.size[0], g.size[0]) * std::min(p.size[1], g.size[1]) *
                   std::min(p.size[2], g.size[2]);
    double vp = p.size[0] * p.size[1] * p.size[2];
    double vg = g.size[0] * g.size[1] * g.size[2];
    ase += 1.0 - inter / (vp + vg - inter);
    aoe += std::fabs(wrap_angle(p.yaw - g.yaw));
    ave += std::hypot(p.velocity[0] - g.velocity[0], p.velocity[1] - g.velocity[1]);
    // Attribute error: 0 when neither side carries attributes.
    aae += gts[gi].attribute.has_value() ? 1.0 : 0.0;
  }
  double n = static_cast<double>(pairs.size());
  e.ate = ate / n;
  e.ase = ase / n;
  e.aoe = aoe / n;
  e.ave = ave / n;
  e.aae = aae / n;
  return e;
}

double nds(double mAP, const TpErrors& e) {
  require(mAP >= 0.0 && mAP <= 1.0, "nds: mAP must lie in [0,1]");
  double s = 5.0 * mAP;
  for (double err : {e.ate, e.ase, e.aoe, e.ave, e.aae}) {
    require(err >= 0.0, "nds: TP errors must be >= 0");
    s += 1.0 - std::min(1.0, err);
  }
  return s / 10.0;
}

namespace {

struct ClassSets {
  std::vector<DetectionRecord> preds;  // sorted
  std::vector<GroundTruthRecord> gts;
};

std::map<std::string, ClassSets> split_by_class(const std::vector<DetectionRecord>& preds,
                                                const std::vector<GroundTruthRecord>& gts,
                                                const EvalConfig& cfg) {
  std::set<int> known;
  for (std::size_t c = 0; c < cfg.classes.size(); ++c) known.insert(static_cast<int>(c));
  std::map<std::string, ClassSets> by_class;
  for (const auto& p : preds) {
    if (!known.count(p.box.class_id))
      throw input_error("evaluate: unknown prediction class id " +
                        std::to_string(p.box.class_id));
    by_class[cfg.classes[static_cast<std::size_t>(p.box.class_id)]].preds.push_back(p);
  }
  for (const auto& g : gts) {
    require(known.count(g.box.class_id) != 0, "evaluate: unknown ground-truth class id");
    by_class[cfg.classes[static_cast<std::size_t>(g.box.class_id)]].gts.push_back(g);
  }
  for (auto& [name, sets] : by_class) sets.preds = sort_predictions(sets.preds);
  return by_class;
}

double longest_edge(const Box3D& b) { return std::max(b.size[0], b.size[1]); }

std::vector<std::string> bin_labels(const std::vector<double>& edges) {
  std::vector<std::string> labels;
  for (std::size_t i = 0; i < edges.size(); ++i) {
    std::ostringstream os;
    os << "[" << edges[i] << ",";
    if (i + 1 < edges.size())
      os << edges[i + 1] << ")";
    else
      os << "inf)";
    labels.push_back(os.str());
  }
  return labels;
}

std::size_t bin_of(double v, const std::vector<double>& edges) {
  std::size_t b = 0;
  for (std::size_t i = 1; i < edges.size(); ++i)
    if (v >= edges[i]) b = i;
  return b;
}

// mAP over classes/thresholds where both sets are filtered to one bin;
// predictions follow their matched gt's bin (at each threshold), or their
// own value when unmatched.
std::map<std::string, double> binned_map(const std::map<std::string, ClassSets>& by_class,
                                         const EvalConfig& cfg,
                                         const std::vector<double>& edges, bool by_size) {
  auto labels = bin_labels(edges);
  std::map<std::string, std::vector<double>> aps;  // label -> AP samples
  for (const auto& [name, sets] : by_class) {
    if (sets.gts.empty()) continue;
    for (double thr : cfg.thresholds) {
      MatchResult m = match_by_center_distance(sets.preds, sets.gts, thr);
      std::vector<long> matched_gt(sets.preds.size(), -1);
      for (const auto& [pi, gi] : m.pairs) matched_gt[pi] = static_cast<long>(gi);
      auto value_of = [&](const Box3D& b) {
        return by_size ? longest_edge(b) : std::hypot(b.center[0], b.center[1]);
      };
      for (std::size_t bi = 0; bi < edges.size(); ++bi) {
        ClassSets sub;
        for (const auto& g : sets.gts)
          if (bin_of(value_of(g.box), edges) == bi) sub.gts.push_back(g);
        for (std::size_t pi = 0; pi < sets.preds.size(); ++pi) {
          const Box3D& ref = matched_gt[pi] >= 0
                                 ? sets.gts[static_cast<std::size_t>(matched_gt[pi])].box
                                 : sets.preds[pi].box;
          if (bin_of(value_of(ref), edges) == bi) sub.preds.push_back(sets.preds[pi]);
        }
        double ap = sub.gts.empty() ? -1.0 : average_precision(sub.preds, sub.gts, thr, cfg);
        if (ap >= 0.0) aps[labels[bi]].push_back(ap);
      }
    }
  }
  std::map<std::string, double> out;
  for (const auto& label : labels) {
    const auto& v = aps[label];
    out[label] = v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) /
                                       static_cast<double>(v.size());
  }
  return out;
}

}  // namespace

MetricsReport evaluate(const std::vector<DetectionRecord>& preds,
                       const std::vector<GroundTruthRecord>& gts, const EvalConfig& cfg,
                       bool with_bins) {
  cfg.validate();
  MetricsReport rep;
  auto by_class = split_by_class(preds, gts, cfg);

  std::vector<double> all_aps;
  std::vector<TpErrors> all_tp;
  for (const auto& name : cfg.classes) {
    auto it = by_class.find(name);
    if (it == by_class.end() || it->second.gts.empty()) continue;  // absent classes excluded
    rep.evaluated_classes.push_back(name);
    const auto& sets = it->second;
    std::vector<double>& aps = rep.ap[name];
    for (double thr : cfg.thresholds) {
      double ap = average_precision(sets.preds, sets.gts, thr, cfg);
      aps.push_back(ap);
      all_aps.push_back(ap);
    }
    MatchResult m = match_by_center_distance(sets.preds, sets.gts, cfg.tp_threshold);
    TpErrors e = tp_errors(sets.preds, sets.gts, m.pairs);
    rep.tp[name] = e;
    all_tp.push_back(e);
  }

  if (!all_aps.empty())
    rep.mAP = std::accumulate(all_aps.begin(), all_aps.end(), 0.0) /
              static_cast<double>(all_aps.size());
  if (!all_tp.empty()) {
    double n = static_cast<double>(all_tp.size());
    rep.mATE = rep.mASE = rep.mAOE = rep.mAVE = rep.mAAE = 0.0;
    for (const auto& e : all_tp) {
      rep.mATE += e.ate / n;
      rep.mASE += e.ase / n;
      rep.mAOE += e.aoe / n;
      rep.mAVE += e.ave / n;
      rep.mAAE += e.aae / n;
    }
  }
  rep.nds_score = nds(rep.mAP, TpErrors{rep.mATE, rep.mASE, rep.mAOE, rep.mAVE, rep.mAAE});

  if (with_bins) {
    rep.map_by_distance = binned_map(by_class, cfg, cfg.distance_bin_edges, false);
    rep.map_by_size = binned_map(by_class, cfg, cfg.size_bin_edges, true);
  }
  return rep;
}

std::string render_report_table(const MetricsReport& rep) {
  std::ostringstream os;
  os.setf(std::ios::fixed);
  os.precision(3);
  os << "Class                 |";
  os << "   AP@th |  mean\n";
  for (const auto& [name, aps] : rep.ap) {
    os << name;
    for (std::size_t i = name.size(); i < 22; ++i) os << ' ';
    os << "|";
    double s = 0.0;
    for (double a : aps) {
      os << " " << a;
      s += a;
    }
    os << " | " << (aps.empty() ? 0.0 : s / static_cast<double>(aps.size())) << "\n";
  }
  os << "\nNDS     mAP     mATE    mASE    mAOE    mAVE    mAAE\n";
  os << rep.nds_score << "   " << rep.mAP << "   " << rep.mATE << "   " << rep.mASE << "   "
     << rep.mAOE << "   " << rep.mAVE << "   " << rep.mAAE << "\n";
  if (!rep.map_by_distance.empty()) {
    os << "\nmAP by distance:\n";
    for (const auto& [label, v] : rep.map_by_distance) os << "  " << label << "  " << v << "\n";
  }
  if (!rep.map_by_size.empty()) {
    os << "\nmAP by size:\n";
    for (const auto& [label, v] : rep.map_by_size) os << "  " << label << "  " << v << "\n";
  }
  return os.str();
}

}  // namespace msf
