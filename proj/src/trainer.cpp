#include "msf/trainer.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iostream>
#include <sstream>

#include <json.hpp>

namespace msf {

using nlohmann::json;

void TrainConfig::validate() const {
  require(batch_size >= 1, "TrainConfig: batch_size must be >= 1");
  require(num_scenes >= 1, "TrainConfig: num_scenes must be >= 1");
  require(epochs >= 1, "TrainConfig: epochs must be >= 1");
  optim.validate();
  head.validate();
  loss_weights.validate();
  focal.validate();
  bounds.validate();
  grid.validate();
  scene.validate();
  require(head.num_cameras == scene.rig.num_cameras,
          "TrainConfig: head camera count must match the scene rig");
}

// ---- config file --------------------------------------------------------

namespace {

void reject_unknown(const json& obj, const std::vector<std::string>& allowed,
                    const std::string& where) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    bool ok = false;
    for (const auto& k : allowed) ok = ok || (it.key() == k);
    if (!ok) throw input_error("config: unknown key '" + where + it.key() + "'");
  }
}

template <typename T>
void opt(const json& obj, const char* key, T& out) {
  if (obj.contains(key)) out = obj.at(key).get<T>();
}

}  // namespace

TrainConfig load_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw input_error("cannot open config file: " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  try {
    return parse_config_text(ss.str());
  } catch (const input_error& e) {
    throw input_error(std::string(e.what()) + " (in " + path + ")");
  }
}

TrainConfig parse_config_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const std::exception& e) {
    throw input_error(std::string("config parse error: ") + e.what());
  }

  TrainConfig cfg;
  reject_unknown(j, {"seed", "epochs", "batch_size", "num_scenes", "checkpoint_every",
                     "log_every", "optimizer", "head", "loss", "bounds", "bev_grid", "lidar",
                     "scene"},
                 "");
  opt(j, "seed", cfg.seed);
  opt(j, "epochs", cfg.epochs);
  opt(j, "batch_size", cfg.batch_size);
  opt(j, "num_scenes", cfg.num_scenes);
  opt(j, "checkpoint_every", cfg.checkpoint_every);
  opt(j, "log_every", cfg.log_every);

  if (j.contains("optimizer")) {
    const json& o = j["optimizer"];
    reject_unknown(o, {"peak_lr", "min_lr", "weight_decay", "warmup_steps", "beta1", "beta2",
                       "eps", "clip_norm"},
                   "optimizer.");
    opt(o, "peak_lr", cfg.optim.peak_lr);
    opt(o, "min_lr", cfg.optim.min_lr);
    opt(o, "weight_decay", cfg.optim.weight_decay);
    opt(o, "warmup_steps", cfg.optim.warmup_steps);
    opt(o, "beta1", cfg.optim.beta1);
    opt(o, "beta2", cfg.optim.beta2);
    opt(o, "eps", cfg.optim.eps);
    opt(o, "clip_norm", cfg.optim.clip_norm);
  }
  if (j.contains("head")) {
    const json& h = j["head"];
    reject_unknown(h, {"layers", "num_queries", "hidden_dim", "num_heads", "ffn_dim",
                       "num_classes", "top_k", "attention_weight_mode"},
                   "head.");
    opt(h, "layers", cfg.head.layers);
    opt(h, "num_queries", cfg.head.num_queries);
    opt(h, "hidden_dim", cfg.head.hidden_dim);
    opt(h, "num_heads", cfg.head.num_heads);
    opt(h, "ffn_dim", cfg.head.ffn_dim);
    opt(h, "num_classes", cfg.head.num_classes);
    opt(h, "top_k", cfg.head.top_k);
    if (h.contains("attention_weight_mode")) {
      std::string m = h["attention_weight_mode"].get<std::string>();
      if (m == "sigmoid")
        cfg.head.weight_mode = AttentionWeightMode::kSigmoid;
      else if (m == "softmax")
        cfg.head.weight_mode = AttentionWeightMode::kSoftmax;
      else
        throw input_error("config: attention_weight_mode must be 'sigmoid' or 'softmax'");
    }
  }
  if (j.contains("loss")) {
    const json& l = j["loss"];
    reject_unknown(l, {"w_cls", "w_box", "focal_alpha", "focal_gamma"}, "loss.");
    opt(l, "w_cls", cfg.loss_weights.w_cls);
    opt(l, "w_box", cfg.loss_weights.w_box);
    opt(l, "focal_alpha", cfg.focal.alpha);
    opt(l, "focal_gamma", cfg.focal.gamma);
  }
  if (j.contains("bounds")) {
    const json& b = j["bounds"];
    reject_unknown(b, {"min", "max"}, "bounds.");
    if (b.contains("min")) {
      auto v = b["min"].get<std::vector<double>>();
      require(v.size() == 3, "config: bounds.min must have 3 entries");
      std::copy(v.begin(), v.end(), cfg.bounds.min.begin());
    }
    if (b.contains("max")) {
      auto v = b["max"].get<std::vector<double>>();
      require(v.size() == 3, "config: bounds.max must have 3 entries");
      std::copy(v.begin(), v.end(), cfg.bounds.max.begin());
    }
  }
  if (j.contains("bev_grid")) {
    const json& g = j["bev_grid"];
    reject_unknown(g, {"x_min", "x_max", "y_min", "y_max", "cell_size"}, "bev_grid.");
    opt(g, "x_min", cfg.grid.x_min);
    opt(g, "x_max", cfg.grid.x_max);
    opt(g, "y_min", cfg.grid.y_min);
    opt(g, "y_max", cfg.grid.y_max);
    opt(g, "cell_size", cfg.grid.cell_size);
  }
  if (j.contains("lidar")) {
    const json& l = j["lidar"];
    reject_unknown(l, {"encoder", "voxel_size", "max_points_per_pillar", "max_pillars"},
                   "lidar.");
    if (l.contains("encoder")) {
      std::string e = l["encoder"].get<std::string>();
      if (e == "pillar")
        cfg.encoder = LidarEncoder::kPillar;
      else if (e == "voxel")
        cfg.encoder = LidarEncoder::kVoxel;
      else
        throw input_error("config: lidar.encoder must be 'pillar' or 'voxel'");
    }
    opt(l, "voxel_size", cfg.voxel_size);
    opt(l, "max_points_per_pillar", cfg.max_points_per_pillar);
    opt(l, "max_pillars", cfg.max_pillars);
  }
  if (j.contains("scene")) {
    const json& s = j["scene"];
    reject_unknown(s, {"seed", "min_objects", "max_objects", "class_weights",
                       "points_per_object", "ground_points", "noise_sigma", "cameras",
                       "image_width", "image_height", "focal"},
                   "scene.");
    opt(s, "seed", cfg.scene.seed);
    opt(s, "min_objects", cfg.scene.min_objects);
    opt(s, "max_objects", cfg.scene.max_objects);
    opt(s, "class_weights", cfg.scene.class_weights);
    opt(s, "points_per_object", cfg.scene.points_per_object);
    opt(s, "ground_points", cfg.scene.ground_points);
    opt(s, "noise_sigma", cfg.scene.noise_sigma);
    opt(s, "cameras", cfg.scene.rig.num_cameras);
    opt(s, "image_width", cfg.scene.rig.image_width);
    opt(s, "image_height", cfg.scene.rig.image_height);
    opt(s, "focal", cfg.scene.rig.focal);
  }
  cfg.scene.bounds = cfg.bounds;
  cfg.head.num_cameras = cfg.scene.rig.num_cameras;
  cfg.validate();
  return cfg;
}

std::string dump_config(const TrainConfig& cfg) {
  json j;
  j["seed"] = cfg.seed;
  j["epochs"] = cfg.epochs;
  j["batch_size"] = cfg.batch_size;
  j["num_scenes"] = cfg.num_scenes;
  j["checkpoint_every"] = cfg.checkpoint_every;
  j["log_every"] = cfg.log_every;
  j["optimizer"] = {{"peak_lr", cfg.optim.peak_lr},
                    {"min_lr", cfg.optim.min_lr},
                    {"weight_decay", cfg.optim.weight_decay},
                    {"warmup_steps", cfg.optim.warmup_steps},
                    {"beta1", cfg.optim.beta1},
                    {"beta2", cfg.optim.beta2},
                    {"eps", cfg.optim.eps},
                    {"clip_norm", cfg.optim.clip_norm}};
  j["head"] = {{"layers", cfg.head.layers},
               {"num_queries", cfg.head.num_queries},
               {"hidden_dim", cfg.head.hidden_dim},
               {"num_heads", cfg.head.num_heads},
               {"ffn_dim", cfg.head.ffn_dim},
               {"num_classes", cfg.head.num_classes},
               {"top_k", cfg.head.top_k},
               {"attention_weight_mode",
                cfg.head.weight_mode == AttentionWeightMode::kSigmoid ? "sigmoid" : "softmax"}};
  j["loss"] = {{"w_cls", cfg.loss_weights.w_cls},
               {"w_box", cfg.loss_weights.w_box},
               {"focal_alpha", cfg.focal.alpha},
               {"focal_gamma", cfg.focal.gamma}};
  j["bounds"] = {{"min", cfg.bounds.min}, {"max", cfg.bounds.max}};
  j["bev_grid"] = {{"x_min", cfg.grid.x_min},
                   {"x_max", cfg.grid.x_max},
                   {"y_min", cfg.grid.y_min},
                   {"y_max", cfg.grid.y_max},
                   {"cell_size", cfg.grid.cell_size}};
  j["lidar"] = {{"encoder", cfg.encoder == LidarEncoder::kPillar ? "pillar" : "voxel"},
                {"voxel_size", cfg.voxel_size},
                {"max_points_per_pillar", cfg.max_points_per_pillar},
                {"max_pillars", cfg.max_pillars}};
  j["scene"] = {{"seed", cfg.scene.seed},
                {"min_objects", cfg.scene.min_objects},
                {"max_objects", cfg.scene.max_objects},
                {"class_weights", cfg.scene.class_weights},
                {"points_per_object", cfg.scene.points_per_object},
                {"ground_points", cfg.scene.ground_points},
                {"noise_sigma", cfg.scene.noise_sigma},
                {"cameras", cfg.scene.rig.num_cameras},
                {"image_width", cfg.scene.rig.image_width},
                {"image_height", cfg.scene.rig.image_height},
                {"focal", cfg.scene.rig.focal}};
  return j.dump(2);
}

// ---- schedule / optimizer -----------------------------------------------

double cosine_warmup_lr(std::size_t step, const OptimConfig& cfg, std::size_t total_steps) {
  cfg.validate();
  require(total_steps > cfg.warmup_steps,
          "cosine_warmup_lr: total steps must exceed warmup steps");
  std::size_t W = cfg.warmup_steps;
  if (step < W)
    return cfg.peak_lr * static_cast<double>(step) / static_cast<double>(W);
  double frac = static_cast<double>(step - W) / static_cast<double>(total_steps - W);
  return cfg.min_lr + 0.5 * (cfg.peak_lr - cfg.min_lr) * (1.0 + std::cos(M_PI * frac));
}

void AdamW::step(ParamStore& params, Tape& tape, double lr) {
  auto& items = params.items();
  if (moments_.empty()) {
    moments_.resize(items.size());
    for (std::size_t i = 0; i < items.size(); ++i) {
      moments_[i].m.assign(items[i].tensor.size(), 0.0);
      moments_[i].v.assign(items[i].tensor.size(), 0.0);
    }
  }
  require(moments_.size() == items.size(), "AdamW: moments do not match parameter set");

  double sq = 0.0;
  for (const auto& p : items) {
    if (!p.requires_grad) continue;
    const auto& g = tape.grad(p.tensor.node);
    for (double v : g) {
      if (!std::isfinite(v))
        throw numeric_error("AdamW: non-finite gradient for parameter '" + p.name +
                            "'; step rejected");
      sq += v * v;
    }
  }
  double gscale = 1.0;
  if (cfg_.clip_norm > 0.0) {
    double norm = std::sqrt(sq);
    if (norm > cfg_.clip_norm) gscale = cfg_.clip_norm / norm;
  }

  ++t_;
  double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (std::size_t i = 0; i < items.size(); ++i) {
    auto& p = items[i];
    if (!p.requires_grad) continue;
    const auto& g = tape.grad(p.tensor.node);
    auto& m = moments_[i].m;
    auto& v = moments_[i].v;
    for (std::size_t k = 0; k < g.size(); ++k) {
      double gv = g[k] * gscale;
      p.tensor.data[k] *= (1.0 - lr * cfg_.weight_decay);  // decoupled decay
      m[k] = cfg_.beta1 * m[k] + (1.0 - cfg_.beta1) * gv;
      v[k] = cfg_.beta2 * v[k] + (1.0 - cfg_.beta2) * gv * gv;
      double mhat = m[k] / bc1;
      double vhat = v[k] / bc2;
      p.tensor.data[k] -= lr * mhat / (std::sqrt(vhat) + cfg_.eps);
    }
  }
}

// ---- checkpoint ---------------------------------------------------------

namespace {

constexpr char kMagic[8] = {'M', 'S', 'F', 'C', 'K', 'P', 'T', '\0'};

template <typename T>
void put(std::FILE* f, const T& v) {
  std::fwrite(&v, sizeof v, 1, f);
}
template <typename T>
void get(std::FILE* f, T& v) {
  if (std::fread(&v, sizeof v, 1, f) != 1) throw input_error("checkpoint: truncated file");
}

void put_bytes(std::FILE* f, const void* p, std::size_t n) { std::fwrite(p, 1, n, f); }
void get_bytes(std::FILE* f, void* p, std::size_t n) {
  if (std::fread(p, 1, n, f) != n) throw input_error("checkpoint: truncated file");
}

}  // namespace

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  std::FILE* f = std::fopen(path.c_str(), "wb");
  if (!f) throw input_error("cannot open checkpoint for writing: " + path);
  put_bytes(f, kMagic, 8);
  put(f, ckpt.version);
  put(f, ckpt.step);
  std::uint64_t clen = ckpt.config_text.size();
  put(f, clen);
  put_bytes(f, ckpt.config_text.data(), ckpt.config_text.size());
  std::uint64_t np = ckpt.params.items().size();
  put(f, np);
  for (const auto& p : ckpt.params.items()) {
    std::uint32_t nlen = static_cast<std::uint32_t>(p.name.size());
    put(f, nlen);
    put_bytes(f, p.name.data(), p.name.size());
    std::uint8_t rg = p.requires_grad ? 1 : 0;
    put(f, rg);
    std::uint32_t rank = static_cast<std::uint32_t>(p.tensor.shape.size());
    put(f, rank);
    for (std::size_t e : p.tensor.shape) put(f, static_cast<std::uint64_t>(e));
    put_bytes(f, p.tensor.data.data(), p.tensor.data.size() * sizeof(double));
  }
  std::uint64_t nm = ckpt.moments.size();
  put(f, nm);
  for (const auto& mo : ckpt.moments) {
    put_bytes(f, mo.m.data(), mo.m.size() * sizeof(double));
    put_bytes(f, mo.v.data(), mo.v.size() * sizeof(double));
  }
  std::fclose(f);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::FILE* f = std::fopen(path.c_str(), "rb");
  if (!f) throw input_error("cannot open checkpoint: " + path);
  Checkpoint ckpt;
  try {
    char magic[8];
    get_bytes(f, magic, 8);
    if (std::memcmp(magic, kMagic, 8) != 0)
      throw input_error("checkpoint: bad magic in " + path);
    get(f, ckpt.version);
    if (ckpt.version != 1)
      throw input_error("checkpoint: unsupported version " + std::to_string(ckpt.version));
    get(f, ckpt.step);
    std::uint64_t clen = 0;
    get(f, clen);
    ckpt.config_text.resize(clen);
    get_bytes(f, ckpt.config_text.data(), clen);
    std::uint64_t np = 0;
    get(f, np);
    for (std::uint64_t i = 0; i < np; ++i) {
      std::uint32_t nlen = 0;
      get(f, nlen);
      std::string name(nlen, '\0');
      get_bytes(f, name.data(), nlen);
      std::uint8_t rg = 0;
      get(f, rg);
      std::uint32_t rank = 0;
      get(f, rank);
      std::vector<std::size_t> shape(rank);
      for (auto& e : shape) {
        std::uint64_t v = 0;
        get(f, v);
        e = static_cast<std::size_t>(v);
      }
      Tensor t = Tensor::zeros(shape);
      get_bytes(f, t.data.data(), t.data.size() * sizeof(double));
      ckpt.params.add(name, std::move(t), rg != 0);
    }
    std::uint64_t nm = 0;
    get(f, nm);
    ckpt.moments.resize(nm);
    for (std::uint64_t i = 0; i < nm; ++i) {
      std::size_t sz = ckpt.params.items()[i].tensor.size();
      ckpt.moments[i].m.resize(sz);
      ckpt.moments[i].v.resize(sz);
      get_bytes(f, ckpt.moments[i].m.data(), sz * sizeof(double));
      get_bytes(f, ckpt.moments[i].v.data(), sz * sizeof(double));
    }
  } catch (...) {
    std::fclose(f);
    throw;
  }
  std::fclose(f);
  return ckpt;
}

// ---- model / forward ----------------------------------------------------

Model build_model(const TrainConfig& cfg) {
  cfg.validate();
  Model model;
  model.head = cfg.head;
  Rng rng(cfg.seed * 0x2545F4914F6CDD1DULL + 0x9e3779b97f4a7c15ULL);
  init_head_params(model.params, cfg.head, rng);
  std::size_t d = cfg.head.hidden_dim;
  std::size_t c_in = (cfg.encoder == LidarEncoder::kPillar) ? d : 4;
  if (cfg.encoder == LidarEncoder::kPillar) {
    Tensor w = Tensor::zeros({9, d});
    double bound = 1.0 / 3.0;  // 1/sqrt(9)
    for (double& v : w.data) v = rng.uniform(-bound, bound);
    model.params.add("pillar.w", std::move(w));
    model.params.add("pillar.b", Tensor::zeros({d}));
  }
  for (int l = 0; l < 4; ++l) {
    std::size_t in = (l == 0) ? c_in : d;
    Tensor w = Tensor::zeros({in, d});
    double bound = 1.0 / std::sqrt(static_cast<double>(in));
    for (double& v : w.data) v = rng.uniform(-bound, bound);
    model.params.add("bev_fpn.l" + std::to_string(l) + ".w", std::move(w));
    model.params.add("bev_fpn.l" + std::to_string(l) + ".b", Tensor::zeros({d}));
  }
  return model;
}

namespace {

struct SceneCache {
  PillarSet pillars;            // pillar encoder path
  Tensor voxel_base;            // voxel encoder path
  std::vector<FeaturePyramid> image_pyramids;
};

SceneCache prepare_scene(const TrainConfig& cfg, const Scene& scene) {
  SceneCache cache;
  if (cfg.encoder == LidarEncoder::kPillar) {
    cache.pillars =
        pillarize(scene.cloud, cfg.grid, cfg.max_points_per_pillar, cfg.max_pillars);
  } else {
    cache.voxel_base = voxel_bev_base(voxelize(scene.cloud, cfg.voxel_size), cfg.voxel_size,
                                      cfg.grid);
  }
  cache.image_pyramids = synthesize_image_pyramids(scene, cfg.head.hidden_dim);
  return cache;
}

std::vector<LayerOutput> forward_cached(Tape& tape, Model& model, const TrainConfig& cfg,
                                        const Scene& scene, const SceneCache& cache) {
  Tensor base;
  if (cfg.encoder == LidarEncoder::kPillar) {
    base = encode_pillars(tape, cache.pillars, model.params.get("pillar.w"),
                          model.params.get("pillar.b"), cfg.grid);
  } else {
    base = cache.voxel_base;
  }
  std::vector<Tensor> ws, bs;
  for (int l = 0; l < 4; ++l) {
    ws.push_back(model.params.get("bev_fpn.l" + std::to_string(l) + ".w"));
    bs.push_back(model.params.get("bev_fpn.l" + std::to_string(l) + ".b"));
  }
  BevFeaturePyramid bev = build_bev_pyramid(tape, base, ws, bs);

  FusionContext ctx;
  ctx.image_pyramids = cache.image_pyramids;
  ctx.bev_pyramid.levels = bev.levels;
  ctx.cameras = scene.cameras;
  ctx.bounds = cfg.bounds;
  ctx.grid = cfg.grid;
  return run_head(tape, model.params, model.head, ctx);
}

}  // namespace

std::vector<LayerOutput> forward_scene(Tape& tape, Model& model, const TrainConfig& cfg,
                                       const Scene& scene) {
  SceneCache cache = prepare_scene(cfg, scene);
  return forward_cached(tape, model, cfg, scene, cache);
}

TrainResult train(const TrainConfig& cfg, const std::vector<Scene>& scenes,
                  const std::string& log_path, const std::string& checkpoint_path) {
  cfg.validate();
  require(!scenes.empty(), "train: at least one scene required");
  Model model = build_model(cfg);
  AdamW opt(cfg.optim);
  std::size_t T = cfg.total_steps();

  std::ofstream log;
  if (!log_path.empty()) {
    log.open(log_path);
    if (!log) throw input_error("cannot open training log: " + log_path);
  }

  std::vector<SceneCache> caches;
  caches.reserve(scenes.size());
  for (const auto& s : scenes) caches.push_back(prepare_scene(cfg, s));

  TrainResult result;
  for (std::size_t step = 0; step < T; ++step) {
    std::size_t si = step % scenes.size();
    double lr = cosine_warmup_lr(step, cfg.optim, T);
    Tape tape;
    model.params.watch_all(tape);
    std::vector<LayerOutput> layers;
    LossBreakdown loss;
    try {
      layers = forward_cached(tape, model, cfg, scenes[si], caches[si]);
      loss = set_loss(tape, layers, scenes[si].gt, cfg.bounds, cfg.loss_weights, cfg.focal);
      tape.backward(loss.total);
      opt.step(model.params, tape, lr);
    } catch (...) {
      model.params.unwatch();
      throw;
    }
    model.params.unwatch();
    result.loss_history.push_back(loss.total.data[0]);

    if (log) {
      log << "step " << step << " lr " << lr << " total " << loss.total.data[0];
      for (std::size_t l = 0; l < loss.per_layer.size(); ++l)
        log << " layer" << l << ".cls " << loss.per_layer[l].first << " layer" << l << ".box "
            << loss.per_layer[l].second;
      log << "\n";
    }
    if (cfg.log_every > 0 && step % cfg.log_every == 0)
      std::cout << "step " << step << "/" << T << " lr " << lr << " loss "
                << loss.total.data[0] << std::endl;
    if (!checkpoint_path.empty() && cfg.checkpoint_every > 0 &&
        (step + 1) % cfg.checkpoint_every == 0 && step + 1 < T) {
      Checkpoint mid;
      mid.step = step + 1;
      mid.config_text = dump_config(cfg);
      mid.params = model.params;
      mid.moments = opt.moments();
      save_checkpoint(checkpoint_path, mid);
    }
  }

  result.checkpoint.step = T;
  result.checkpoint.config_text = dump_config(cfg);
  result.checkpoint.params = model.params;
  result.checkpoint.moments = opt.moments();
  return result;
}

std::vector<DetectionRecord> infer_scene(Model& model, const TrainConfig& cfg,
                                         const Scene& scene) {
  Tape tape;  // parameters stay unwatched; pure forward
  auto layers = forward_scene(tape, model, cfg, scene);
  auto boxes = select_top_k(layers.back(), cfg.head.top_k);
  std::vector<DetectionRecord> dets;
  dets.reserve(boxes.size());
  for (const auto& b : boxes) dets.push_back(DetectionRecord{scene.sample_id, b});
  return dets;
}

// ---- detections files ---------------------------------------------------

namespace {

int class_id_of(const std::string& label, const std::vector<std::string>& names) {
  for (std::size_t i = 0; i < names.size(); ++i)
    if (names[i] == label) return static_cast<int>(i);
  throw input_error("unknown class label '" + label + "'");
}

void write_box_fields(std::ostream& os, const Box3D& b) {
  os << b.center[0] << " " << b.center[1] << " " << b.center[2] << " " << b.size[0] << " "
     << b.size[1] << " " << b.size[2] << " " << b.yaw << " " << b.velocity[0] << " "
     << b.velocity[1];
}

}  // namespace

void write_detections(const std::string& path, const std::vector<DetectionRecord>& dets,
                      const std::vector<std::string>& class_names) {
  std::ofstream f(path);
  if (!f) throw input_error("cannot open detections file for writing: " + path);
  f.precision(17);
  f << "# sample_id class score x y z w l h yaw vx vy\n";
  for (const auto& d : dets) {
    auto cid = static_cast<std::size_t>(d.box.class_id);
    require(cid < class_names.size(), "write_detections: class id out of range");
    f << d.sample_id << " " << class_names[cid] << " " << d.box.score << " ";
    write_box_fields(f, d.box);
    f << "\n";
  }
}

std::vector<DetectionRecord> read_detections(const std::string& path,
                                             const std::vector<std::string>& class_names) {
  std::ifstream f(path);
  if (!f) throw input_error("cannot open detections file: " + path);
  std::vector<DetectionRecord> out;
  std::string line;
  while (std::getline(f, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream is(line);
    DetectionRecord d;
    std::string label;
    is >> d.sample_id >> label >> d.box.score >> d.box.center[0] >> d.box.center[1] >>
        d.box.center[2] >> d.box.size[0] >> d.box.size[1] >> d.box.size[2] >> d.box.yaw >>
        d.box.velocity[0] >> d.box.velocity[1];
    if (!is) throw input_error("malformed detection line: " + line);
    d.box.class_id = class_id_of(label, class_names);
    out.push_back(d);
  }
  return out;
}

void write_ground_truth(const std::string& path, const std::vector<GroundTruthRecord>& gts,
                        const std::vector<std::string>& class_names) {
  std::ofstream f(path);
  if (!f) throw input_error("cannot open ground-truth file for writing: " + path);
  f.precision(17);
  f << "# sample_id class x y z w l h yaw vx vy\n";
  for (const auto& g : gts) {
    auto cid = static_cast<std::size_t>(g.box.class_id);
    require(cid < class_names.size(), "write_ground_truth: class id out of range");
    f << g.sample_id << " " << class_names[cid] << " ";
    write_box_fields(f, g.box);
    f << "\n";
  }
}

std::vector<GroundTruthRecord> read_ground_truth(const std::string& path,
                                                 const std::vector<std::string>& class_names) {
  std::ifstream f(path);
  if (!f) throw input_error("cannot open ground-truth file: " + path);
  std::vector<GroundTruthRecord> out;
  std::string line;
  while (std::getline(f, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream is(line);
    GroundTruthRecord g;
    std::string label;
    is >> g.sample_id >> label >> g.box.center[0] >> g.box.center[1] >> g.box.center[2] >>
        g.box.size[0] >> g.box.size[1] >> g.box.size[2] >> g.box.yaw >> g.box.velocity[0] >>
        g.box.velocity[1];
    if (!is) throw input_error("malformed ground-truth line: " + line);
    g.box.class_id = class_id_of(label, class_names);
    out.push_back(g);
  }
  return out;
}

}  // namespace msf
