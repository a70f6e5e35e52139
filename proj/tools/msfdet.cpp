// msfdet: camera-LiDAR fusion 3D detection pipeline driver.
//
// Subcommands: generate, train, infer, eval, gradcheck, report.
// Exit codes: 0 success, 1 input error, 2 contract violation, 3 numeric failure.

#include <cmath>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "msf/trainer.hpp"

using nlohmann::json;

namespace {

json report_to_json(const msf::MetricsReport& rep, const msf::EvalConfig& cfg) {
  json j;
  j["thresholds"] = cfg.thresholds;
  j["classes"] = rep.evaluated_classes;
  for (const auto& [cls, aps] : rep.ap) j["ap"][cls] = aps;
  for (const auto& [cls, e] : rep.tp)
    j["tp_errors"][cls] = {{"ate", e.ate}, {"ase", e.ase}, {"aoe", e.aoe},
                           {"ave", e.ave}, {"aae", e.aae}};
  j["summary"] = {{"mAP", rep.mAP},   {"mATE", rep.mATE}, {"mASE", rep.mASE},
                  {"mAOE", rep.mAOE}, {"mAVE", rep.mAVE}, {"mAAE", rep.mAAE},
                  {"NDS", rep.nds_score}};
  if (!rep.map_by_distance.empty()) j["map_by_distance"] = rep.map_by_distance;
  if (!rep.map_by_size.empty()) j["map_by_size"] = rep.map_by_size;
  return j;
}

msf::MetricsReport report_from_json(const json& j) {
  msf::MetricsReport rep;
  if (j.contains("classes")) rep.evaluated_classes = j["classes"].get<std::vector<std::string>>();
  if (j.contains("ap"))
    for (auto it = j["ap"].begin(); it != j["ap"].end(); ++it)
      rep.ap[it.key()] = it.value().get<std::vector<double>>();
  if (j.contains("tp_errors"))
    for (auto it = j["tp_errors"].begin(); it != j["tp_errors"].end(); ++it) {
      msf::TpErrors e;
      e.ate = it.value().at("ate").get<double>();
      e.ase = it.value().at("ase").get<double>();
      e.aoe = it.value().at("aoe").get<double>();
      e.ave = it.value().at("ave").get<double>();
      e.aae = it.value().at("aae").get<double>();
      rep.tp[it.key()] = e;
    }
  const json& s = j.at("summary");
  rep.mAP = s.at("mAP").get<double>();
  rep.mATE = s.at("mATE").get<double>();
  rep.mASE = s.at("mASE").get<double>();
  rep.mAOE = s.at("mAOE").get<double>();
  rep.mAVE = s.at("mAVE").get<double>();
  rep.mAAE = s.at("mAAE").get<double>();
  rep.nds_score = s.at("NDS").get<double>();
  if (j.contains("map_by_distance"))
    rep.map_by_distance = j["map_by_distance"].get<std::map<std::string, double>>();
  if (j.contains("map_by_size"))
    rep.map_by_size = j["map_by_size"].get<std::map<std::string, double>>();
  return rep;
}

std::vector<msf::Scene> make_scenes(const msf::TrainConfig& cfg) {
  std::vector<msf::Scene> scenes;
  for (std::size_t i = 0; i < cfg.num_scenes; ++i)
    scenes.push_back(msf::generate_scene(cfg.scene, cfg.seed + i));
  return scenes;
}

std::vector<msf::GroundTruthRecord> collect_gt(const std::vector<msf::Scene>& scenes) {
  std::vector<msf::GroundTruthRecord> gts;
  for (const auto& s : scenes)
    for (const auto& b : s.gt) gts.push_back({s.sample_id, b, std::nullopt});
  return gts;
}

// Refuses to run inference when the checkpoint was trained with different
// model hyperparameters than the requested config; prints a field-level diff.
void check_hyperparams(const msf::TrainConfig& ckpt_cfg, const msf::TrainConfig& cfg) {
  std::vector<std::string> diffs;
  auto cmp = [&](const std::string& name, auto a, auto b) {
    if (a != b) {
      std::ostringstream os;
      os << name << ": checkpoint=" << a << " config=" << b;
      diffs.push_back(os.str());
    }
  };
  cmp("head.layers", ckpt_cfg.head.layers, cfg.head.layers);
  cmp("head.num_queries", ckpt_cfg.head.num_queries, cfg.head.num_queries);
  cmp("head.hidden_dim", ckpt_cfg.head.hidden_dim, cfg.head.hidden_dim);
  cmp("head.num_heads", ckpt_cfg.head.num_heads, cfg.head.num_heads);
  cmp("head.ffn_dim", ckpt_cfg.head.ffn_dim, cfg.head.ffn_dim);
  cmp("head.num_classes", ckpt_cfg.head.num_classes, cfg.head.num_classes);
  cmp("head.num_cameras", ckpt_cfg.head.num_cameras, cfg.scene.rig.num_cameras);
  cmp("lidar.encoder", static_cast<int>(ckpt_cfg.encoder), static_cast<int>(cfg.encoder));
  cmp("bev_grid.cell_size", ckpt_cfg.grid.cell_size, cfg.grid.cell_size);
  if (!diffs.empty()) {
    std::string msg = "checkpoint/config hyperparameter mismatch:";
    for (const auto& d : diffs) msg += "\n  " + d;
    throw msf::input_error(msg);
  }
}

msf::Model model_from_checkpoint(const msf::Checkpoint& ckpt, const msf::TrainConfig& cfg) {
  msf::Model model;
  model.head = cfg.head;
  model.params = ckpt.params;
  return model;
}

int run_gradcheck(std::size_t coords, std::uint64_t seed);

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"msfdet: camera-LiDAR fusion 3D object detection (training, inference, eval)"};
  app.require_subcommand(1);

  std::string config_path, scenes_path, out_path, log_path, ckpt_path;
  std::string det_path, gt_path, report_path;
  bool with_bins = false;
  std::size_t gc_coords = 20;
  std::uint64_t gc_seed = 7;

  auto* gen = app.add_subcommand("generate", "Generate synthetic scenes");
  gen->add_option("--config", config_path, "Config file (JSON)")->required();
  gen->add_option("--out", out_path, "Output scene file")->required();
  std::string gen_gt_path;
  gen->add_option("--gt", gen_gt_path, "Also write ground truth in detections format");

  auto* tr = app.add_subcommand("train", "Train a model");
  tr->add_option("--config", config_path, "Config file (JSON)")->required();
  tr->add_option("--scenes", scenes_path, "Scene file (default: generate from config)");
  tr->add_option("--out", out_path, "Output checkpoint")->required();
  tr->add_option("--log", log_path, "Per-step loss log file");

  auto* inf = app.add_subcommand("infer", "Run inference from a checkpoint");
  inf->add_option("--checkpoint", ckpt_path, "Checkpoint file")->required();
  inf->add_option("--scenes", scenes_path, "Scene file")->required();
  inf->add_option("--out", out_path, "Output detections file")->required();
  inf->add_option("--config", config_path, "Config to cross-check against the checkpoint");

  auto* ev = app.add_subcommand("eval", "Evaluate detections against ground truth");
  ev->add_option("--detections", det_path, "Detections file")->required();
  ev->add_option("--gt", gt_path, "Ground-truth file")->required();
  ev->add_option("--out", out_path, "Structured report file (JSON)");
  ev->add_flag("--bins", with_bins, "Include distance/size-binned mAP breakdowns");

  auto* gc = app.add_subcommand("gradcheck", "Run the gradient-check suite");
  gc->add_option("--coords", gc_coords, "Sampled coordinates per parameter");
  gc->add_option("--seed", gc_seed, "Sampling seed");

  auto* rp = app.add_subcommand("report", "Render a report file as a text table");
  rp->add_option("--report", report_path, "Report file from eval")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  try {
    if (gen->parsed()) {
      msf::TrainConfig cfg = msf::load_config(config_path);
      auto scenes = make_scenes(cfg);
      msf::write_scenes(out_path, scenes);
      if (!gen_gt_path.empty())
        msf::write_ground_truth(gen_gt_path, collect_gt(scenes), msf::default_class_names());
      std::cout << "wrote " << scenes.size() << " scenes to " << out_path << std::endl;
    } else if (tr->parsed()) {
      msf::TrainConfig cfg = msf::load_config(config_path);
      std::vector<msf::Scene> scenes =
          scenes_path.empty() ? make_scenes(cfg) : msf::read_scenes(scenes_path);
      msf::TrainResult result = msf::train(cfg, scenes, log_path, out_path);
      msf::save_checkpoint(out_path, result.checkpoint);
      std::cout << "trained " << result.checkpoint.step << " steps; final loss "
                << (result.loss_history.empty() ? 0.0 : result.loss_history.back())
                << "; checkpoint " << out_path << std::endl;
    } else if (inf->parsed()) {
      msf::Checkpoint ckpt = msf::load_checkpoint(ckpt_path);
      msf::TrainConfig cfg = msf::parse_config_text(ckpt.config_text);
      if (!config_path.empty()) check_hyperparams(cfg, msf::load_config(config_path));
      msf::Model model = model_from_checkpoint(ckpt, cfg);
      auto scenes = msf::read_scenes(scenes_path);
      std::vector<msf::DetectionRecord> dets;
      for (const auto& s : scenes) {
        auto d = msf::infer_scene(model, cfg, s);
        dets.insert(dets.end(), d.begin(), d.end());
      }
      msf::write_detections(out_path, dets, msf::default_class_names());
      std::cout << "wrote " << dets.size() << " detections to " << out_path << std::endl;
    } else if (ev->parsed()) {
      auto dets = msf::read_detections(det_path, msf::default_class_names());
      auto gts = msf::read_ground_truth(gt_path, msf::default_class_names());
      msf::EvalConfig ecfg;
      msf::MetricsReport rep = msf::evaluate(dets, gts, ecfg, with_bins);
      if (!out_path.empty()) {
        std::ofstream f(out_path);
        if (!f) throw msf::input_error("cannot open report file for writing: " + out_path);
        f << report_to_json(rep, ecfg).dump(2) << "\n";
      }
      std::cout << msf::render_report_table(rep);
    } else if (gc->parsed()) {
      return run_gradcheck(gc_coords, gc_seed);
    } else if (rp->parsed()) {
      std::ifstream f(report_path);
      if (!f) throw msf::input_error("cannot open report file: " + report_path);
      json j;
      try {
        f >> j;
      } catch (const std::exception& e) {
        throw msf::input_error(std::string("report parse error: ") + e.what());
      }
      std::cout << msf::render_report_table(report_from_json(j));
    }
  } catch (const msf::input_error& e) {
    std::cerr << "input error: " << e.what() << std::endl;
    return 1;
  } catch (const msf::contract_error& e) {
    std::cerr << "contract violation: " << e.what() << std::endl;
    return 2;
  } catch (const msf::numeric_error& e) {
    std::cerr << "numeric failure: " << e.what() << std::endl;
    return 3;
  }
  return 0;
}

namespace {

// Gradient-check suite: primitive ops, then the fused attention block and
// the full matched loss on a small head.
int run_gradcheck(std::size_t coords, std::uint64_t seed) {
  using namespace msf;
  Rng rng(seed);
  bool all_ok = true;
  auto check = [&](const std::string& name, ParamStore& params,
                   const std::function<Tensor(Tape&)>& f, double tol) {
    Rng local(seed ^ std::hash<std::string>{}(name));
    GradCheckReport rep = grad_check(params, f, 1e-5, coords, local);
    bool ok = rep.finite && rep.max_rel_err < tol;
    all_ok = all_ok && ok;
    std::cout << (ok ? "PASS " : "FAIL ") << name << "  max_rel_err " << rep.max_rel_err
              << " (tol " << tol << ", worst " << rep.worst_param << "[" << rep.worst_index
              << "])" << std::endl;
  };

  auto randt = [&](std::vector<std::size_t> shape) {
    Tensor t = Tensor::zeros(shape);
    for (double& v : t.data) v = rng.uniform(-1.0, 1.0);
    return t;
  };

  // Primitive ops on small operands; objective is the mean of the output.
  struct OpCase {
    std::string name;
    std::function<Tensor(Tape&, ParamStore&)> fn;
  };
  std::vector<OpCase> ops = {
      {"add", [](Tape& t, ParamStore& p) { return add(t, p.get("a"), p.get("b")); }},
      {"sub", [](Tape& t, ParamStore& p) { return sub(t, p.get("a"), p.get("b")); }},
      {"mul", [](Tape& t, ParamStore& p) { return mul(t, p.get("a"), p.get("b")); }},
      {"relu", [](Tape& t, ParamStore& p) { return relu(t, p.get("a")); }},
      {"sigmoid", [](Tape& t, ParamStore& p) { return sigmoid(t, p.get("a")); }},
      {"exp", [](Tape& t, ParamStore& p) { return exp_op(t, p.get("a")); }},
      {"abs", [](Tape& t, ParamStore& p) { return abs_op(t, p.get("a")); }},
      {"softmax", [](Tape& t, ParamStore& p) { return softmax(t, p.get("a"), 1); }},
      {"layer_norm",
       [](Tape& t, ParamStore& p) {
         return layer_norm(t, p.get("a"), p.get("gain"), p.get("bias"));
       }},
      {"linear",
       [](Tape& t, ParamStore& p) { return linear(t, p.get("a"), p.get("w"), p.get("wb")); }},
      {"matmul", [](Tape& t, ParamStore& p) { return matmul(t, p.get("a"), p.get("w")); }},
      {"matmul_nt", [](Tape& t, ParamStore& p) { return matmul_nt(t, p.get("a"), p.get("b")); }},
      {"matmul_exact",
       [](Tape& t, ParamStore& p) { return matmul_exact(t, p.get("a"), p.get("w")); }},
      {"scale_rows",
       [](Tape& t, ParamStore& p) { return scale_rows(t, p.get("a"), p.get("s")); }},
  };
  for (auto& op : ops) {
    ParamStore params;
    params.add("a", randt({3, 4}));
    params.add("b", randt({3, 4}));
    params.add("gain", randt({4}));
    params.add("bias", randt({4}));
    params.add("w", randt({4, 5}));
    params.add("wb", randt({5}));
    params.add("s", randt({3}));
    check("op." + op.name, params,
          [&op, &params](Tape& t) { return mean_all(t, op.fn(t, params)); }, 1e-6);
  }

  // Head-level checks on a tiny model: 2 layers, 5 queries, 1 camera, d=8.
  TrainConfig cfg;
  cfg.head.layers = 2;
  cfg.head.num_queries = 5;
  cfg.head.hidden_dim = 8;
  cfg.head.num_heads = 2;
  cfg.head.ffn_dim = 16;
  cfg.head.top_k = 5;
  cfg.bounds.min = {-12.8, -12.8, -5.0};
  cfg.bounds.max = {12.8, 12.8, 3.0};
  cfg.grid = BevGridSpec{-12.8, 12.8, -12.8, 12.8, 1.6};
  cfg.scene.bounds = cfg.bounds;
  cfg.scene.rig.num_cameras = 1;
  cfg.head.num_cameras = 1;
  cfg.scene.min_objects = 2;
  cfg.scene.max_objects = 2;
  cfg.scene.points_per_object = 40;
  cfg.scene.ground_points = 60;
  cfg.seed = seed;
  cfg.scene.seed = seed;

  Scene scene = generate_scene(cfg.scene, seed);
  Model model = build_model(cfg);

  {
    ParamStore& params = model.params;
    check("head.cross_attention", params,
          [&](Tape& t) {
            std::vector<FeaturePyramid> img = synthesize_image_pyramids(scene, cfg.head.hidden_dim);
            PillarSet ps = pillarize(scene.cloud, cfg.grid);
            Tensor base = encode_pillars(t, ps, params.get("pillar.w"), params.get("pillar.b"),
                                         cfg.grid);
            std::vector<Tensor> ws, bs;
            for (int l = 0; l < 4; ++l) {
              ws.push_back(params.get("bev_fpn.l" + std::to_string(l) + ".w"));
              bs.push_back(params.get("bev_fpn.l" + std::to_string(l) + ".b"));
            }
            BevFeaturePyramid bev = build_bev_pyramid(t, base, ws, bs);
            FusionContext ctx;
            ctx.image_pyramids = img;
            ctx.bev_pyramid.levels = bev.levels;
            ctx.cameras = scene.cameras;
            ctx.bounds = cfg.bounds;
            ctx.grid = cfg.grid;
            Tensor q = params.get("queries");
            return mean_all(t, msf_cross_attention(t, q, params, "layer0.cross_attn", ctx,
                                                   cfg.head));
          },
          1e-4);
    check("head.block", params,
          [&](Tape& t) {
            std::vector<FeaturePyramid> img = synthesize_image_pyramids(scene, cfg.head.hidden_dim);
            PillarSet ps = pillarize(scene.cloud, cfg.grid);
            Tensor base = encode_pillars(t, ps, params.get("pillar.w"), params.get("pillar.b"),
                                         cfg.grid);
            std::vector<Tensor> ws, bs;
            for (int l = 0; l < 4; ++l) {
              ws.push_back(params.get("bev_fpn.l" + std::to_string(l) + ".w"));
              bs.push_back(params.get("bev_fpn.l" + std::to_string(l) + ".b"));
            }
            BevFeaturePyramid bev = build_bev_pyramid(t, base, ws, bs);
            FusionContext ctx;
            ctx.image_pyramids = img;
            ctx.bev_pyramid.levels = bev.levels;
            ctx.cameras = scene.cameras;
            ctx.bounds = cfg.bounds;
            ctx.grid = cfg.grid;
            Tensor q = params.get("queries");
            return mean_all(t, msf_block(t, q, params, "layer0.", ctx, cfg.head));
          },
          1e-4);
    check("head.set_loss", params,
          [&](Tape& t) {
            auto layers = forward_scene(t, model, cfg, scene);
            LossBreakdown loss = set_loss(t, layers, scene.gt, cfg.bounds, cfg.loss_weights,
                                          cfg.focal);
            return loss.total;
          },
          1e-4);
  }

  std::cout << (all_ok ? "gradcheck: all checks passed" : "gradcheck: FAILURES detected")
            << std::endl;
  return all_ok ? 0 : 3;
}

}  // namespace
