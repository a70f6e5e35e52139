#include "msf/head.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace msf {

namespace {

Tensor uniform_init(std::vector<std::size_t> shape, std::size_t fan_in, Rng& rng) {
  Tensor t = Tensor::zeros(std::move(shape));
  double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  for (double& v : t.data) v = rng.uniform(-bound, bound);
  return t;
}

void add_linear(ParamStore& s, const std::string& name, std::size_t in, std::size_t out,
                Rng& rng, double bias_init = 0.0) {
  s.add(name + ".w", uniform_init({in, out}, in, rng));
  s.add(name + ".b", Tensor::full({out}, bias_init));
}

void add_norm(ParamStore& s, const std::string& name, std::size_t d) {
  s.add(name + ".gain", Tensor::full({d}, 1.0));
  s.add(name + ".bias", Tensor::zeros({d}));
}

}  // namespace

void init_head_params(ParamStore& s, const HeadConfig& cfg, Rng& rng) {
  cfg.validate();
  std::size_t d = cfg.hidden_dim;
  {
    Tensor q = Tensor::zeros({cfg.num_queries, d});
    for (double& v : q.data) v = rng.uniform(-1.0, 1.0);
    s.add("queries", q);
  }
  add_linear(s, "phi", d, 3, rng);  // shared reference-point decoder
  std::size_t slots = 4 * cfg.num_cameras + 4;
  // Classification prior ~0.01 so initial scores sit near the focal-loss
  // friendly operating point.
  double cls_bias = -std::log((1.0 - 0.01) / 0.01);
  for (std::size_t l = 0; l < cfg.layers; ++l) {
    std::string p = "layer" + std::to_string(l) + ".";
    add_linear(s, p + "self_attn.q", d, d, rng);
    add_linear(s, p + "self_attn.k", d, d, rng);
    add_linear(s, p + "self_attn.v", d, d, rng);
    add_linear(s, p + "self_attn.out", d, d, rng);
    add_norm(s, p + "norm1", d);
    add_linear(s, p + "cross_attn.weight_net", d, slots, rng);
    add_linear(s, p + "cross_attn.fuse1", 2 * d, d, rng);
    add_linear(s, p + "cross_attn.fuse2", d, d, rng);
    add_norm(s, p + "norm2", d);
    add_linear(s, p + "ffn.fc1", d, cfg.ffn_dim, rng);
    add_linear(s, p + "ffn.fc2", cfg.ffn_dim, d, rng);
    add_norm(s, p + "norm3", d);
    add_linear(s, p + "reg.fc1", d, d, rng);
    add_linear(s, p + "reg.fc2", d, 10, rng);
    add_linear(s, p + "cls.fc1", d, d, rng);
    add_linear(s, p + "cls.fc2", d, cfg.num_classes, rng, cls_bias);
  }
}

Tensor multi_head_self_attention(Tape& t, const Tensor& q, ParamStore& s,
                                 const std::string& prefix, std::size_t num_heads) {
  std::size_t d = q.shape[1];
  require(d % num_heads == 0, "self_attention: num_heads must divide hidden dim");
  std::size_t dh = d / num_heads;
  Tensor Q = linear(t, q, s.get(prefix + ".q.w"), s.get(prefix + ".q.b"));
  Tensor K = linear(t, q, s.get(prefix + ".k.w"), s.get(prefix + ".k.b"));
  Tensor V = linear(t, q, s.get(prefix + ".v.w"), s.get(prefix + ".v.b"));
  double scl = 1.0 / std::sqrt(static_cast<double>(dh));
  std::vector<Tensor> heads;
  heads.reserve(num_heads);
  for (std::size_t h = 0; h < num_heads; ++h) {
    Tensor Qh = slice_cols(t, Q, h * dh, dh);
    Tensor Kh = slice_cols(t, K, h * dh, dh);
    Tensor Vh = slice_cols(t, V, h * dh, dh);
    Tensor scores = scale(t, matmul_nt(t, Qh, Kh), scl);
    Tensor attn = softmax(t, scores, 1);
    heads.push_back(matmul_exact(t, attn, Vh));
  }
  Tensor cat = concat_cols(t, heads);
  return linear(t, cat, s.get(prefix + ".out.w"), s.get(prefix + ".out.b"));
}

Tensor msf_cross_attention(Tape& t, const Tensor& q, ParamStore& s, const std::string& prefix,
                           const FusionContext& ctx, const HeadConfig& cfg) {
  require(!ctx.cameras.empty(), "msf_cross_attention: at least one camera required");
  require(ctx.image_pyramids.size() == ctx.cameras.size(),
          "msf_cross_attention: one image pyramid per camera required");
  std::size_t V = ctx.cameras.size();
  std::size_t n = q.shape[0], d = q.shape[1];
  std::size_t slots = 4 * V + 4;

  Tensor ref = decode_reference_points(t, q, s.get("phi.w"), s.get("phi.b"), ctx.bounds);

  Tensor logits = linear(t, q, s.get(prefix + ".weight_net.w"), s.get(prefix + ".weight_net.b"));
  require(logits.shape[1] == slots, "msf_cross_attention: weight net emits " +
                                        std::to_string(logits.shape[1]) + " slots, expected " +
                                        std::to_string(slots));
  Tensor weights = (cfg.weight_mode == AttentionWeightMode::kSigmoid)
                       ? sigmoid(t, logits)
                       : softmax(t, logits, 1);

  Tensor g_img = Tensor::zeros({n, d});
  bool have_img = false;
  std::size_t slot = 0;
  for (std::size_t v = 0; v < V; ++v) {
    ProjectedPoints proj = project_to_image(t, ref, ctx.cameras[v]);
    const FeaturePyramid& pyr = ctx.image_pyramids[v];
    require(pyr.levels.size() == 4, "msf_cross_attention: image pyramid must have 4 levels");
    for (std::size_t x = 0; x < 4; ++x, ++slot) {
      require(pyr.levels[x].shape[2] == d,
              "msf_cross_attention: image feature channels must equal hidden dim");
      Tensor f = bilinear_sample(t, pyr.levels[x], proj.coords, proj.valid);
      Tensor a = slice_cols(t, weights, slot, 1);
      Tensor wf = scale_rows(t, f, reshape(a, {n}));
      g_img = have_img ? add(t, g_img, wf) : wf;
      have_img = true;
    }
  }

  ProjectedPoints bev = project_to_bev(t, ref, ctx.grid);
  require(ctx.bev_pyramid.levels.size() == 4,
          "msf_cross_attention: BEV pyramid must have 4 levels");
  Tensor g_bev = Tensor::zeros({n, d});
  bool have_bev = false;
  for (std::size_t x = 0; x < 4; ++x, ++slot) {
    require(ctx.bev_pyramid.levels[x].shape[2] == d,
            "msf_cross_attention: BEV feature channels must equal hidden dim");
    Tensor f = bilinear_sample(t, ctx.bev_pyramid.levels[x], bev.coords, bev.valid);
    Tensor a = slice_cols(t, weights, slot, 1);
    Tensor wf = scale_rows(t, f, reshape(a, {n}));
    g_bev = have_bev ? add(t, g_bev, wf) : wf;
    have_bev = true;
  }

  Tensor fused = concat_cols(t, {g_img, g_bev});
  Tensor h = relu(t, linear(t, fused, s.get(prefix + ".fuse1.w"), s.get(prefix + ".fuse1.b")));
  return linear(t, h, s.get(prefix + ".fuse2.w"), s.get(prefix + ".fuse2.b"));
}

Tensor ffn(Tape& t, const Tensor& q, ParamStore& s, const std::string& prefix) {
  Tensor h = relu(t, linear(t, q, s.get(prefix + ".fc1.w"), s.get(prefix + ".fc1.b")));
  return linear(t, h, s.get(prefix + ".fc2.w"), s.get(prefix + ".fc2.b"));
}

Tensor msf_block(Tape& t, const Tensor& q, ParamStore& s, const std::string& prefix,
                 const FusionContext& ctx, const HeadConfig& cfg) {
  Tensor q1 = layer_norm(t, add(t, q, multi_head_self_attention(t, q, s, prefix + "self_attn",
                                                                cfg.num_heads)),
                         s.get(prefix + "norm1.gain"), s.get(prefix + "norm1.bias"));
  Tensor q2 = layer_norm(t, add(t, q1, msf_cross_attention(t, q1, s, prefix + "cross_attn",
                                                           ctx, cfg)),
                         s.get(prefix + "norm2.gain"), s.get(prefix + "norm2.bias"));
  Tensor q3 = layer_norm(t, add(t, q2, ffn(t, q2, s, prefix + "ffn")),
                         s.get(prefix + "norm3.gain"), s.get(prefix + "norm3.bias"));
  return q3;
}

Box3D decode_box(const double* raw, const SceneBounds& bounds) {
  auto sg = [](double v) {
    return v >= 0.0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v));
  };
  Box3D b;
  for (int i = 0; i < 3; ++i)
    b.center[static_cast<std::size_t>(i)] =
        bounds.min[static_cast<std::size_t>(i)] +
        sg(raw[i]) * (bounds.max[static_cast<std::size_t>(i)] - bounds.min[static_cast<std::size_t>(i)]);
  for (int i = 0; i < 3; ++i) b.size[static_cast<std::size_t>(i)] = std::exp(raw[3 + i]);
  b.yaw = std::atan2(raw[6], raw[7]);
  if (b.yaw <= -M_PI) b.yaw += 2.0 * M_PI;
  b.velocity = {raw[8], raw[9]};
  return b;
}

LayerOutput predict(Tape& t, const Tensor& q, ParamStore& s, const std::string& prefix,
                    const SceneBounds& bounds, std::size_t num_classes) {
  LayerOutput out;
  out.queries = q;
  Tensor hr = relu(t, linear(t, q, s.get(prefix + "reg.fc1.w"), s.get(prefix + "reg.fc1.b")));
  out.reg_raw = linear(t, hr, s.get(prefix + "reg.fc2.w"), s.get(prefix + "reg.fc2.b"));
  Tensor hc = relu(t, linear(t, q, s.get(prefix + "cls.fc1.w"), s.get(prefix + "cls.fc1.b")));
  out.cls_logits = linear(t, hc, s.get(prefix + "cls.fc2.w"), s.get(prefix + "cls.fc2.b"));

  std::size_t n = q.shape[0];
  out.boxes.resize(n);
  auto sg = [](double v) {
    return v >= 0.0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v));
  };
  for (std::size_t i = 0; i < n; ++i) {
    Box3D b = decode_box(&out.reg_raw.data[i * 10], bounds);
    std::size_t best = 0;
    for (std::size_t c = 1; c < num_classes; ++c)
      if (out.cls_logits.data[i * num_classes + c] > out.cls_logits.data[i * num_classes + best])
        best = c;
    b.class_id = static_cast<int>(best);
    b.score = sg(out.cls_logits.data[i * num_classes + best]);
    out.boxes[i] = b;
  }
  return out;
}

std::vector<LayerOutput> run_head(Tape& t, ParamStore& s, const HeadConfig& cfg,
                                  const FusionContext& ctx) {
  cfg.validate();
  Tensor q = s.get("queries");
  std::vector<LayerOutput> outs;
  outs.reserve(cfg.layers);
  for (std::size_t l = 0; l < cfg.layers; ++l) {
    std::string prefix = "layer" + std::to_string(l) + ".";
    q = msf_block(t, q, s, prefix, ctx, cfg);
    outs.push_back(predict(t, q, s, prefix, ctx.bounds, cfg.num_classes));
  }
  return outs;
}

std::vector<Box3D> select_top_k(const LayerOutput& final, std::size_t k) {
  require(k >= 1, "select_top_k: k must be positive");
  require(k <= final.boxes.size(), "select_top_k: k exceeds query count");
  std::vector<std::size_t> order(final.boxes.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return final.boxes[a].score > final.boxes[b].score;  // ties keep lower query index
  });
  std::vector<Box3D> out;
  out.reserve(k);
  for (std::size_t i = 0; i < k; ++i) out.push_back(final.boxes[order[i]]);
  return out;
}

}  // namespace msf
