#include "atom/perception.hpp"

#include <cmath>
#include <fstream>

#include <json.hpp>

#include "atom/binio.hpp"

namespace atom::perception {

ScenarioSpec id_scenario(const world::ScanConfig& scan_cfg) {
  ScenarioSpec s;
  s.shapes = {world::Shape::kCircle};
  s.size_lo = 0.1;
  s.size_hi = 0.5;
  s.scan_cfg = scan_cfg;
  s.tag = "id";
  return s;
}

ScenarioSpec ood_scenario(const world::ScanConfig& scan_cfg) {
  ScenarioSpec s;
  s.shapes = {world::Shape::kSquare, world::Shape::kTriangle, world::Shape::kStar};
  s.size_lo = 1.5;
  s.size_hi = 2.0;
  s.scan_cfg = scan_cfg;
  s.tag = "ood";
  return s;
}

Dataset generate_dataset(const ScenarioSpec& scenario, int n, std::uint64_t seed) {
  if (n <= 0) throw ContractViolation("generate_dataset: n must be positive");
  if (scenario.shapes.empty())
    throw ContractViolation("generate_dataset: empty obstacle family");
  if (scenario.size_lo <= 0.0 || scenario.size_hi < scenario.size_lo)
    throw ContractViolation("generate_dataset: bad size range");

  Dataset out;
  out.n_beams = scenario.scan_cfg.n_beams;
  out.max_range = scenario.scan_cfg.max_range;
  out.provenance = scenario.tag + ":seed=" + std::to_string(seed);
  out.samples.reserve(std::size_t(n));

  Rng rng(seed);
  for (int i = 0; i < n; ++i) {
    world::Obstacle obs;
    obs.shape = scenario.shapes[rng.uniform_index(scenario.shapes.size())];
    obs.size = rng.uniform(scenario.size_lo, scenario.size_hi);
    obs.orientation = rng.uniform(0.0, kTwoPi);
    obs.center = {0.0, 0.0};
    const double r = world::min_enclosing_radius(obs);

    const double d = rng.uniform(r + scenario.annulus_margin, scenario.d_max);
    const double psi = rng.uniform(-kPi, kPi);
    const double alpha = wrap_angle(rng.uniform(-scenario.alpha_max, scenario.alpha_max));
    world::Pose pose;
    pose.x = d * std::cos(psi);
    pose.y = d * std::sin(psi);
    pose.theta = wrap_angle(std::atan2(-pose.y, -pose.x) + alpha);

    LabeledSample s;
    s.scan = world::scan(pose, obs, scenario.scan_cfg);
    if (scenario.corruption)
      s.scan = world::corrupt_scan(s.scan, *scenario.corruption, rng.next_u64(),
                                   scenario.scan_cfg.max_range);
    s.state = world::relative_state(pose, obs.center);
    out.samples.push_back(std::move(s));
  }
  return out;
}

Eigen::VectorXd normalize_scan(const std::vector<double>& scan, double max_range) {
  if (max_range <= 0.0)
    throw ContractViolation("normalize_scan: max_range must be > 0");
  // Proximity encoding: 1 - r/max_range. Free space maps to 0 and close
  // returns to 1, so network inputs (and Jacobians) concentrate on the
  // beams that actually see the obstacle.
  Eigen::VectorXd v(Eigen::Index(scan.size()));
  for (std::size_t i = 0; i < scan.size(); ++i)
    v(Eigen::Index(i)) = 1.0 - scan[i] / max_range;
  return v;
}

void to_matrices(const Dataset& data, Eigen::MatrixXd& inputs,
                 Eigen::MatrixXd& targets) {
  if (data.samples.empty()) throw ContractViolation("to_matrices: empty dataset");
  const Eigen::Index n = Eigen::Index(data.samples.size());
  inputs.resize(n, data.n_beams);
  targets.resize(n, 2);
  for (Eigen::Index i = 0; i < n; ++i) {
    const LabeledSample& s = data.samples[std::size_t(i)];
    if (int(s.scan.size()) != data.n_beams)
      throw ContractViolation("to_matrices: inhomogeneous scan length");
    inputs.row(i) = normalize_scan(s.scan, data.max_range).transpose();
    targets(i, 0) = s.state.d;
    targets(i, 1) = s.state.alpha;
  }
}

world::RelState predict(const nn::DenseNet& net, const std::vector<double>& scan,
                        double max_range, double obstacle_radius) {
  if (int(scan.size()) != net.input_dim())
    throw ContractViolation("predict: scan length does not match net input");
  const Eigen::VectorXd out = nn::forward(net, normalize_scan(scan, max_range));
  world::RelState est;
  est.d = std::max(out(0), obstacle_radius + kDistClampMargin);
  est.alpha = wrap_angle(out(1));
  return est;
}

void save_dataset(const Dataset& data, const std::string& path) {
  io::Writer w(path);
  w.magic("ATOMDS1");
  w.u64(data.samples.size());
  w.u64(std::uint64_t(data.n_beams));
  w.f64(data.max_range);
  for (const LabeledSample& s : data.samples) {
    if (int(s.scan.size()) != data.n_beams)
      throw ContractViolation("save_dataset: inhomogeneous scan length");
    for (double r : s.scan) w.f64(r);
    w.f64(s.state.d);
    w.f64(s.state.alpha);
  }
  nlohmann::ordered_json side;
  side["format"] = "ATOMDS1";
  side["provenance"] = data.provenance;
  side["n_samples"] = data.samples.size();
  side["n_beams"] = data.n_beams;
  side["max_range"] = data.max_range;
  std::ofstream js(path + ".json", std::ios::trunc);
  js << side.dump(2) << "\n";
}

Dataset load_dataset(const std::string& path) {
  io::Reader r(path);
  r.expect_magic("ATOMDS1");
  Dataset out;
  const std::uint64_t n = r.u64();
  out.n_beams = int(r.u64());
  out.max_range = r.f64();
  if (out.n_beams <= 0 || out.max_range <= 0.0)
    throw ContractViolation("load_dataset: corrupt header in " + path);
  out.samples.resize(n);
  for (auto& s : out.samples) {
    s.scan.resize(std::size_t(out.n_beams));
    for (auto& v : s.scan) v = r.f64();
    s.state.d = r.f64();
    s.state.alpha = r.f64();
  }
  std::ifstream js(path + ".json");
  if (js) {
    try {
      nlohmann::json side = nlohmann::json::parse(js);
      out.provenance = side.value("provenance", "");
    } catch (const nlohmann::json::exception&) {
      out.provenance = "";
    }
  }
  return out;
}

}  // namespace atom::perception
