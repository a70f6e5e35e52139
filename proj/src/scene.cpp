#include "msf/scene.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace msf {

namespace {

// Mean (w, l, h) size priors per class, loosely vehicle-scale.
const std::array<std::array<double, 3>, 10> kSizePriors = {{
    {1.9, 4.6, 1.7},   // car
    {2.5, 6.9, 2.8},   // truck
    {2.9, 12.3, 3.9},  // trailer
    {2.9, 11.2, 3.5},  // bus
    {2.8, 6.4, 3.2},   // construction_vehicle
    {0.6, 1.7, 1.3},   // bicycle
    {0.8, 2.1, 1.5},   // motorcycle
    {0.7, 0.7, 1.8},   // pedestrian
    {0.4, 0.4, 1.1},   // traffic_cone
    {2.5, 0.5, 1.0},   // barrier
}};

int sample_class(Rng& rng, const std::vector<double>& weights) {
  if (weights.empty()) return static_cast<int>(rng.index(10));
  double total = 0.0;
  for (double w : weights) total += w;
  double u = rng.uniform(0.0, total);
  double acc = 0.0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    acc += weights[i];
    if (u < acc) return static_cast<int>(i);
  }
  return static_cast<int>(weights.size() - 1);
}

}  // namespace

std::vector<CameraModel> make_camera_rig(const CameraRigSpec& rig) {
  std::vector<CameraModel> cams;
  for (std::size_t v = 0; v < rig.num_cameras; ++v) {
    double yaw = 2.0 * M_PI * static_cast<double>(v) / static_cast<double>(rig.num_cameras);
    double cy = std::cos(yaw), sy = std::sin(yaw);
    // Camera axes in ego coordinates: z forward along the view direction,
    // x image-right, y image-down. Rows of R are the camera axes.
    std::array<double, 9> R = {sy, -cy, 0,   // x_cam
                               0,  0,   -1,  // y_cam
                               cy, sy,  0};  // z_cam
    cams.emplace_back(rig.focal, rig.focal, rig.image_width / 2.0, rig.image_height / 2.0, R,
                      std::array<double, 3>{0, 0, 0}, rig.image_width, rig.image_height);
  }
  return cams;
}

PointCloud simulate_lidar(const std::vector<Box3D>& gt, const SceneSpec& spec, Rng& rng) {
  PointCloud cloud;
  // Faces of the unit box excluding the bottom: +-x, +-y, top.
  for (const auto& box : gt) {
    double cyaw = std::cos(box.yaw), syaw = std::sin(box.yaw);
    double intensity = (static_cast<double>(box.class_id) + 0.5) / 10.0;
    for (std::size_t i = 0; i < spec.points_per_object; ++i) {
      std::size_t face = i % 5;
      double a = rng.uniform(-0.5, 0.5), b = rng.uniform(-0.5, 0.5);
      double lx, ly, lz;  // local frame, box-sized
      switch (face) {
        case 0: lx = 0.5; ly = a; lz = b; break;
        case 1: lx = -0.5; ly = a; lz = b; break;
        case 2: lx = a; ly = 0.5; lz = b; break;
        case 3: lx = a; ly = -0.5; lz = b; break;
        default: lx = a; ly = b; lz = 0.5; break;
      }
      lx *= box.size[0];
      ly *= box.size[1];
      lz *= box.size[2];
      double x = box.center[0] + cyaw * lx - syaw * ly + rng.normal(0.0, spec.noise_sigma);
      double y = box.center[1] + syaw * lx + cyaw * ly + rng.normal(0.0, spec.noise_sigma);
      double z = box.center[2] + lz + rng.normal(0.0, spec.noise_sigma);
      double inten = std::clamp(intensity + rng.normal(0.0, 0.01), 0.0, 1.0);
      cloud.points.push_back({x, y, z, inten});
    }
  }
  for (std::size_t i = 0; i < spec.ground_points; ++i) {
    double x = rng.uniform(spec.bounds.min[0], spec.bounds.max[0]);
    double y = rng.uniform(spec.bounds.min[1], spec.bounds.max[1]);
    double z = spec.bounds.min[2] + rng.normal(0.0, spec.noise_sigma);
    cloud.points.push_back({x, y, std::max(z, spec.bounds.min[2]), 0.0});
  }
  return cloud;
}

Scene generate_scene(const SceneSpec& spec, std::uint64_t seed) {
  spec.validate();
  Rng rng(spec.seed ^ (seed * 0x9e3779b97f4a7c15ULL) ^ seed);
  Scene scene;
  scene.sample_id = "scene-" + std::to_string(seed);
  std::size_t count = spec.min_objects +
                      (spec.max_objects > spec.min_objects
                           ? rng.index(spec.max_objects - spec.min_objects + 1)
                           : 0);
  for (std::size_t i = 0; i < count; ++i) {
    Box3D b;
    b.class_id = sample_class(rng, spec.class_weights);
    const auto& prior = kSizePriors[static_cast<std::size_t>(b.class_id)];
    for (int a = 0; a < 3; ++a) {
      auto ai = static_cast<std::size_t>(a);
      b.center[ai] = rng.uniform(spec.bounds.min[ai], spec.bounds.max[ai]);
      b.size[ai] = prior[ai] * rng.uniform(0.85, 1.15);
    }
    b.yaw = wrap_angle(rng.uniform(-M_PI, M_PI));
    b.velocity = {rng.normal(0.0, 0.5), rng.normal(0.0, 0.5)};
    b.score = 1.0;
    b.validate();
    scene.gt.push_back(b);
  }
  scene.cloud = simulate_lidar(scene.gt, spec, rng);
  scene.cameras = make_camera_rig(spec.rig);
  return scene;
}

std::vector<FeaturePyramid> synthesize_image_pyramids(const Scene& scene,
                                                      std::size_t channels) {
  require(channels >= 4, "synthesize_image_pyramids: need at least 4 channels");
  const double strides[4] = {4, 8, 16, 32};
  const double sigma = 2.0;  // cells, every level
  std::vector<FeaturePyramid> out;
  double far = 0.0;
  {
    SceneBounds b;  // depth normalizer from the default detection range
    far = std::hypot(b.max[0], b.max[1]);
  }
  for (const auto& cam : scene.cameras) {
    FeaturePyramid pyr;
    for (double stride : strides) {
      auto w = static_cast<std::size_t>(std::max(1.0, std::floor(cam.width() / stride)));
      auto h = static_cast<std::size_t>(std::max(1.0, std::floor(cam.height() / stride)));
      Tensor map = Tensor::zeros({h, w, channels});
      for (const auto& box : scene.gt) {
        auto q = cam.to_camera(box.center);
        if (q[2] <= CameraModel::kMinDepth) continue;
        double u = cam.fx() * q[0] / q[2] + cam.cx();
        double v = cam.fy() * q[1] / q[2] + cam.cy();
        if (u < 0.0 || u > cam.width() || v < 0.0 || v > cam.height()) continue;
        // Align-corners cell position matching the sampler's convention.
        double cxp = u / cam.width() * static_cast<double>(w - 1);
        double cyp = v / cam.height() * static_cast<double>(h - 1);
        double depth_norm = std::clamp(q[2] / far, 0.0, 1.0);
        std::vector<double> amp(channels, 0.0);
        amp[0] = 1.0;                // presence
        amp[1] = depth_norm;         // encodes center distance
        std::size_t cls_ch = 2 + static_cast<std::size_t>(box.class_id);
        if (cls_ch < channels) amp[cls_ch] = 1.0;  // class one-hot
        long r0 = static_cast<long>(std::floor(cyp - 4 * sigma));
        long r1 = static_cast<long>(std::ceil(cyp + 4 * sigma));
        long c0 = static_cast<long>(std::floor(cxp - 4 * sigma));
        long c1 = static_cast<long>(std::ceil(cxp + 4 * sigma));
        for (long r = std::max(0L, r0); r <= std::min<long>(static_cast<long>(h) - 1, r1); ++r)
          for (long c = std::max(0L, c0); c <= std::min<long>(static_cast<long>(w) - 1, c1);
               ++c) {
            double dy = static_cast<double>(r) - cyp;
            double dx = static_cast<double>(c) - cxp;
            double g = std::exp(-(dx * dx + dy * dy) / (2.0 * sigma * sigma));
            for (std::size_t ch = 0; ch < channels; ++ch)
              map.data[(static_cast<std::size_t>(r) * w + static_cast<std::size_t>(c)) *
                           channels +
                       ch] += g * amp[ch];
          }
      }
      pyr.levels.push_back(std::move(map));
    }
    out.push_back(std::move(pyr));
  }
  return out;
}

// ---- scene files --------------------------------------------------------

void write_scenes(const std::string& path, const std::vector<Scene>& scenes) {
  std::ofstream f(path);
  if (!f) throw input_error("cannot open scene file for writing: " + path);
  f.precision(17);
  for (const auto& s : scenes) {
    f << "scene " << s.sample_id << "\n";
    for (const auto& c : s.cameras) {
      f << "camera " << c.fx() << " " << c.fy() << " " << c.cx() << " " << c.cy() << " "
        << c.skew() << " " << c.width() << " " << c.height();
      for (double r : c.rotation()) f << " " << r;
      for (double tv : c.translation()) f << " " << tv;
      f << "\n";
    }
    for (const auto& b : s.gt) {
      f << "box " << b.center[0] << " " << b.center[1] << " " << b.center[2] << " "
        << b.size[0] << " " << b.size[1] << " " << b.size[2] << " " << b.yaw << " "
        << b.velocity[0] << " " << b.velocity[1] << " " << b.class_id << "\n";
    }
    f << "points " << s.cloud.points.size() << "\n";
    for (const auto& p : s.cloud.points)
      f << p[0] << " " << p[1] << " " << p[2] << " " << p[3] << "\n";
    f << "end\n";
  }
}

std::vector<Scene> read_scenes(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw input_error("cannot open scene file: " + path);
  std::vector<Scene> scenes;
  std::string line;
  Scene cur;
  bool open = false;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    std::istringstream is(line);
    std::string tag;
    is >> tag;
    if (tag == "scene") {
      require(!open, "scene file: nested scene block in " + path);
      cur = Scene{};
      is >> cur.sample_id;
      open = true;
    } else if (tag == "camera") {
      double fx, fy, cx, cy, skew, w, h;
      std::array<double, 9> R;
      std::array<double, 3> tt;
      is >> fx >> fy >> cx >> cy >> skew >> w >> h;
      for (double& r : R) is >> r;
      for (double& tv : tt) is >> tv;
      if (!is) throw input_error("scene file: malformed camera line");
      cur.cameras.emplace_back(fx, fy, cx, cy, R, tt, w, h, skew);
    } else if (tag == "box") {
      Box3D b;
      is >> b.center[0] >> b.center[1] >> b.center[2] >> b.size[0] >> b.size[1] >>
          b.size[2] >> b.yaw >> b.velocity[0] >> b.velocity[1] >> b.class_id;
      if (!is) throw input_error("scene file: malformed box line");
      b.validate();
      cur.gt.push_back(b);
    } else if (tag == "points") {
      std::size_t n = 0;
      is >> n;
      cur.cloud.points.resize(n);
      for (auto& p : cur.cloud.points) {
        if (!std::getline(f, line)) throw input_error("scene file: truncated point list");
        std::istringstream ps(line);
        ps >> p[0] >> p[1] >> p[2] >> p[3];
        if (!ps) throw input_error("scene file: malformed point line");
      }
    } else if (tag == "points_bin") {
      std::string bin_path;
      is >> bin_path;
      cur.cloud = read_point_dump(bin_path);
    } else if (tag == "end") {
      require(open, "scene file: stray end");
      scenes.push_back(std::move(cur));
      open = false;
    } else {
      throw input_error("scene file: unknown tag '" + tag + "'");
    }
  }
  require(!open, "scene file: missing end for last scene");
  return scenes;
}

}  // namespace msf
