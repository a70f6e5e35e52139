#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "msf/trainer.hpp"

using namespace msf;

namespace {

TrainConfig tiny_config(std::uint64_t seed = 5) {
  TrainConfig cfg;
  cfg.seed = seed;
  cfg.head.layers = 2;
  cfg.head.num_queries = 6;
  cfg.head.hidden_dim = 16;
  cfg.head.num_heads = 2;
  cfg.head.ffn_dim = 24;
  cfg.head.top_k = 6;
  cfg.head.num_cameras = 1;
  cfg.bounds.min = {-12.8, -12.8, -5.0};
  cfg.bounds.max = {12.8, 12.8, 3.0};
  cfg.grid = BevGridSpec{-12.8, 12.8, -12.8, 12.8, 1.6};
  cfg.scene.bounds = cfg.bounds;
  cfg.scene.seed = seed;
  cfg.scene.rig.num_cameras = 1;
  cfg.scene.min_objects = 3;
  cfg.scene.max_objects = 3;
  cfg.scene.points_per_object = 50;
  cfg.scene.ground_points = 80;
  return cfg;
}

FusionContext make_context(Tape& t, Model& model, const TrainConfig& cfg, const Scene& scene) {
  PillarSet ps = pillarize(scene.cloud, cfg.grid);
  Tensor base =
      encode_pillars(t, ps, model.params.get("pillar.w"), model.params.get("pillar.b"), cfg.grid);
  std::vector<Tensor> ws, bs;
  for (int l = 0; l < 4; ++l) {
    ws.push_back(model.params.get("bev_fpn.l" + std::to_string(l) + ".w"));
    bs.push_back(model.params.get("bev_fpn.l" + std::to_string(l) + ".b"));
  }
  BevFeaturePyramid bev = build_bev_pyramid(t, base, ws, bs);
  FusionContext ctx;
  ctx.image_pyramids = synthesize_image_pyramids(scene, cfg.head.hidden_dim);
  ctx.bev_pyramid.levels = bev.levels;
  ctx.cameras = scene.cameras;
  ctx.bounds = cfg.bounds;
  ctx.grid = cfg.grid;
  return ctx;
}

}  // namespace

TEST_CASE("head parameter registry is complete and uses the low-score class prior") {
  HeadConfig cfg;
  cfg.layers = 2;
  cfg.num_queries = 10;
  cfg.hidden_dim = 32;
  cfg.num_heads = 4;
  cfg.top_k = 5;
  cfg.num_cameras = 3;
  ParamStore s;
  Rng rng(1);
  init_head_params(s, cfg, rng);
  CHECK(s.get("queries").shape == std::vector<std::size_t>{10, 32});
  CHECK(s.get("phi.w").shape == std::vector<std::size_t>{32, 3});
  for (int l = 0; l < 2; ++l) {
    std::string p = "layer" + std::to_string(l) + ".";
    for (const char* n :
         {"self_attn.q.w", "self_attn.k.w", "self_attn.v.w", "self_attn.out.w", "norm1.gain",
          "cross_attn.weight_net.w", "cross_attn.fuse1.w", "cross_attn.fuse2.w", "norm2.gain",
          "ffn.fc1.w", "ffn.fc2.w", "norm3.gain", "reg.fc1.w", "reg.fc2.w", "cls.fc1.w",
          "cls.fc2.w"})
      CHECK(s.has(p + n));
    // 4 slots per camera + 4 BEV slots.
    CHECK(s.get(p + "cross_attn.weight_net.w").shape == std::vector<std::size_t>{32, 16});
    double b = s.get(p + "cls.fc2.b").data[0];
    CHECK(1.0 / (1.0 + std::exp(-b)) == doctest::Approx(0.01));
  }
}

TEST_CASE("box decoding maps raw parameters through sigmoid, exp and atan2") {
  SceneBounds bounds;
  double raw0[10] = {0, 0, 0, 0, 0, 0, 0, 1, 0.3, -0.4};
  Box3D b = decode_box(raw0, bounds);
  CHECK(b.center[0] == doctest::Approx(0.0));
  CHECK(b.center[2] == doctest::Approx(-1.0));
  CHECK(b.size[0] == doctest::Approx(1.0));
  CHECK(b.yaw == doctest::Approx(0.0));
  CHECK(b.velocity[0] == doctest::Approx(0.3));
  CHECK(b.velocity[1] == doctest::Approx(-0.4));

  double raw1[10] = {50, -50, 0, 1, -1, 0.5, 1, 0, 0, 0};
  Box3D b1 = decode_box(raw1, bounds);
  CHECK(b1.center[0] == doctest::Approx(51.2));
  CHECK(b1.center[1] == doctest::Approx(-51.2));
  CHECK(b1.size[0] == doctest::Approx(std::exp(1.0)));
  CHECK(b1.size[1] == doctest::Approx(std::exp(-1.0)));
  CHECK(b1.yaw == doctest::Approx(M_PI / 2));

  double raw2[10] = {0, 0, 0, 0, 0, 0, 0, -1, 0, 0};  // sin 0, cos -1
  CHECK(decode_box(raw2, bounds).yaw == doctest::Approx(M_PI));
  double raw3[10] = {0, 0, 0, 0, 0, 0, -1, 0, 0, 0};
  CHECK(decode_box(raw3, bounds).yaw == doctest::Approx(-M_PI / 2));
  decode_box(raw2, bounds).validate();
}

TEST_CASE("top-k selection sorts by score with stable tie-breaks") {
  LayerOutput out;
  double scores[5] = {0.3, 0.9, 0.3, 0.95, 0.1};
  for (int i = 0; i < 5; ++i) {
    Box3D b;
    b.score = scores[i];
    b.class_id = i;
    out.boxes.push_back(b);
  }
  auto top = select_top_k(out, 4);
  REQUIRE(top.size() == 4);
  CHECK(top[0].class_id == 3);
  CHECK(top[1].class_id == 1);
  CHECK(top[2].class_id == 0);  // tie at 0.3: lower query index first
  CHECK(top[3].class_id == 2);
  CHECK_THROWS_AS((void)select_top_k(out, 6), contract_error);
}

TEST_CASE("single-query self-attention reduces to the value path") {
  // With one query the softmax over keys is exactly 1, so the output is
  // out(v(q)) regardless of the q/k projections.
  std::size_t d = 4;
  ParamStore s;
  Rng rng(9);
  auto randt = [&](std::vector<std::size_t> shape) {
    Tensor t = Tensor::zeros(shape);
    for (double& v : t.data) v = rng.uniform(-1, 1);
    return t;
  };
  for (const char* n : {"q", "k", "v", "out"}) {
    s.add(std::string("sa.") + n + ".w", randt({d, d}));
    s.add(std::string("sa.") + n + ".b", randt({d}));
  }
  Tensor q = randt({1, d});
  Tape t;
  Tensor y = multi_head_self_attention(t, q, s, "sa", 2);

  Tensor v = linear(t, q, s.get("sa.v.w"), s.get("sa.v.b"));
  Tensor expect = linear(t, v, s.get("sa.out.w"), s.get("sa.out.b"));
  REQUIRE(y.size() == expect.size());
  for (std::size_t i = 0; i < y.size(); ++i)
    CHECK(y.data[i] == doctest::Approx(expect.data[i]).epsilon(1e-12));
}

TEST_CASE("run_head emits one output per layer with sane boxes") {
  TrainConfig cfg = tiny_config();
  Scene scene = generate_scene(cfg.scene, cfg.seed);
  Model model = build_model(cfg);
  Tape t;
  FusionContext ctx = make_context(t, model, cfg, scene);
  auto outs = run_head(t, model.params, cfg.head, ctx);
  REQUIRE(outs.size() == cfg.head.layers);
  for (const auto& layer : outs) {
    CHECK(layer.reg_raw.shape == std::vector<std::size_t>{6, 10});
    CHECK(layer.cls_logits.shape == std::vector<std::size_t>{6, cfg.head.num_classes});
    REQUIRE(layer.boxes.size() == 6);
    for (const auto& b : layer.boxes) {
      b.validate();
      CHECK(b.center[0] >= cfg.bounds.min[0]);
      CHECK(b.center[0] <= cfg.bounds.max[0]);
      CHECK(b.score > 0.0);
      CHECK(b.score < 1.0);
    }
  }
}

TEST_CASE("run_head is bitwise equivariant under query permutation") {
  TrainConfig cfg = tiny_config(21);
  Scene scene = generate_scene(cfg.scene, cfg.seed);
  Model model = build_model(cfg);
  std::size_t n = cfg.head.num_queries;

  std::vector<LayerOutput> base;
  {
    Tape t;
    FusionContext ctx = make_context(t, model, cfg, scene);
    base = run_head(t, model.params, cfg.head, ctx);
  }

  Rng rng(77);
  for (int trial = 0; trial < 3; ++trial) {
    std::vector<std::size_t> perm(n);
    for (std::size_t i = 0; i < n; ++i) perm[i] = i;
    for (std::size_t i = n; i > 1; --i) std::swap(perm[i - 1], perm[rng.index(i)]);

    Tensor orig = model.params.get("queries");
    Tensor permuted = orig;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t c = 0; c < cfg.head.hidden_dim; ++c)
        permuted.at2(i, c) = orig.at2(perm[i], c);
    model.params.get("queries") = permuted;

    Tape t;
    FusionContext ctx = make_context(t, model, cfg, scene);
    auto outs = run_head(t, model.params, cfg.head, ctx);
    model.params.get("queries") = orig;

    for (std::size_t l = 0; l < outs.size(); ++l)
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t c = 0; c < 10; ++c)
          CHECK(outs[l].reg_raw.at2(i, c) == base[l].reg_raw.at2(perm[i], c));  // bitwise
  }
}

TEST_CASE("saturated-negative slot weights gate the features out") {
  TrainConfig cfg = tiny_config(31);
  Scene scene = generate_scene(cfg.scene, cfg.seed);
  Model model = build_model(cfg);
  // Force every slot weight to sigmoid(-30) ~ 1e-13.
  auto& wn_w = model.params.get("layer0.cross_attn.weight_net.w");
  auto& wn_b = model.params.get("layer0.cross_attn.weight_net.b");
  for (double& v : wn_w.data) v = 0.0;
  for (double& v : wn_b.data) v = -30.0;

  auto attended = [&](std::uint64_t scene_seed) {
    Scene s2 = generate_scene(cfg.scene, scene_seed);
    Tape t;
    FusionContext ctx = make_context(t, model, cfg, scene);
    ctx.image_pyramids = synthesize_image_pyramids(s2, cfg.head.hidden_dim);
    return msf_cross_attention(t, model.params.get("queries"), model.params,
                               "layer0.cross_attn", ctx, cfg.head);
  };
  Tensor y1 = attended(100);
  Tensor y2 = attended(200);  // different image features, same gated-off weights
  for (std::size_t i = 0; i < y1.size(); ++i)
    CHECK(y1.data[i] == doctest::Approx(y2.data[i]).epsilon(1e-9));
}

TEST_CASE("cross-attention insists on matching channel width and pyramid depth") {
  TrainConfig cfg = tiny_config(41);
  Scene scene = generate_scene(cfg.scene, cfg.seed);
  Model model = build_model(cfg);
  Tape t;
  FusionContext ctx = make_context(t, model, cfg, scene);
  FusionContext broken = ctx;
  broken.image_pyramids[0].levels.pop_back();
  CHECK_THROWS_AS((void)msf_cross_attention(t, model.params.get("queries"), model.params,
                                            "layer0.cross_attn", broken, cfg.head),
                  contract_error);
  FusionContext narrow = ctx;
  narrow.image_pyramids[0].levels[0] = Tensor::zeros({4, 4, 2});
  CHECK_THROWS_AS((void)msf_cross_attention(t, model.params.get("queries"), model.params,
                                            "layer0.cross_attn", narrow, cfg.head),
                  contract_error);
}
