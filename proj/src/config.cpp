#include "atom/config.hpp"

#include <cctype>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace atom::harness {

namespace {

std::string trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

// Flat key -> setter table; keys are "section.name".
struct Binding {
  std::function<void(Config&, const std::string&)> set;
};

double parse_double(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double x = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw ConfigError("config: bad numeric value for " + key + ": '" + v + "'");
  }
}

std::int64_t parse_int(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const std::int64_t x = std::stoll(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw ConfigError("config: bad integer value for " + key + ": '" + v + "'");
  }
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true") return true;
  if (v == "false") return false;
  throw ConfigError("config: bad boolean value for " + key + ": '" + v + "'");
}

const std::map<std::string, Binding>& bindings() {
  static const std::map<std::string, Binding> table = [] {
    std::map<std::string, Binding> m;
    auto dbl = [&m](const std::string& key, double Config::* field) {
      m[key] = {[key, field](Config& c, const std::string& v) {
        c.*field = parse_double(key, v);
      }};
    };
    auto itg = [&m](const std::string& key, int Config::* field) {
      m[key] = {[key, field](Config& c, const std::string& v) {
        c.*field = int(parse_int(key, v));
      }};
    };
    auto bol = [&m](const std::string& key, bool Config::* field) {
      m[key] = {[key, field](Config& c, const std::string& v) {
        c.*field = parse_bool(key, v);
      }};
    };
    dbl("world.dt", &Config::dt);
    itg("world.n_beams", &Config::n_beams);
    dbl("world.fov", &Config::fov);
    dbl("world.max_range", &Config::max_range);
    dbl("world.beam_0_offset", &Config::beam_0_offset);

    itg("perception.hidden1", &Config::hidden1);
    itg("perception.hidden2", &Config::hidden2);
    dbl("perception.learning_rate", &Config::learning_rate);
    itg("perception.epochs", &Config::epochs);
    itg("perception.batch_size", &Config::batch_size);
    itg("perception.n_train", &Config::n_train);
    itg("perception.n_cal", &Config::n_cal);
    itg("perception.n_test", &Config::n_test);
    dbl("perception.annulus_margin", &Config::annulus_margin);
    dbl("perception.d_max", &Config::d_max);
    dbl("perception.alpha_max", &Config::alpha_max);

    itg("euq.ensemble_members", &Config::ensemble_members);
    itg("euq.laplace_rank", &Config::laplace_rank);
    dbl("euq.prior_scale", &Config::prior_scale);
    itg("euq.fisher_max_samples", &Config::fisher_max_samples);

    dbl("calibration.gamma_mult", &Config::gamma_mult);

    m["filter.kappa_gain"] = {[](Config& c, const std::string& v) {
      c.filter.kappa_gain = parse_double("filter.kappa_gain", v);
    }};
    m["filter.lip_lfh"] = {[](Config& c, const std::string& v) {
      c.filter.lip_lfh = parse_double("filter.lip_lfh", v);
    }};
    m["filter.lip_lgh"] = {[](Config& c, const std::string& v) {
      c.filter.lip_lgh = parse_double("filter.lip_lgh", v);
    }};
    m["filter.lip_kh"] = {[](Config& c, const std::string& v) {
      c.filter.lip_kh = parse_double("filter.lip_kh", v);
    }};
    m["filter.slack_penalty"] = {[](Config& c, const std::string& v) {
      c.filter.slack_penalty = parse_double("filter.slack_penalty", v);
    }};
    m["filter.v_min"] = {[](Config& c, const std::string& v) {
      c.filter.v_min = parse_double("filter.v_min", v);
    }};
    m["filter.v_max"] = {[](Config& c, const std::string& v) {
      c.filter.v_max = parse_double("filter.v_max", v);
    }};
    m["filter.omega_min"] = {[](Config& c, const std::string& v) {
      c.filter.omega_min = parse_double("filter.omega_min", v);
    }};
    m["filter.omega_max"] = {[](Config& c, const std::string& v) {
      c.filter.omega_max = parse_double("filter.omega_max", v);
    }};
    bol("filter.use_estimated_lipschitz", &Config::use_estimated_lipschitz);

    itg("experiment.trials", &Config::trials);
    itg("experiment.max_steps", &Config::max_steps);
    dbl("experiment.goal_radius", &Config::goal_radius);
    dbl("experiment.start_d_lo", &Config::start_d_lo);
    dbl("experiment.start_d_hi", &Config::start_d_hi);
    dbl("experiment.goal_back_lo", &Config::goal_back_lo);
    dbl("experiment.goal_back_hi", &Config::goal_back_hi);
    dbl("experiment.start_alpha_pad_lo", &Config::start_alpha_pad_lo);
    dbl("experiment.start_alpha_pad_hi", &Config::start_alpha_pad_hi);
    bol("experiment.disengage_after_pass", &Config::disengage_after_pass);
    dbl("experiment.stagnation_window", &Config::stagnation_window);
    dbl("experiment.stagnation_dist", &Config::stagnation_dist);
    m["experiment.seed"] = {[](Config& c, const std::string& v) {
      c.seed = std::uint64_t(parse_int("experiment.seed", v));
    }};
    itg("experiment.n_ood_eval", &Config::n_ood_eval);
    bol("experiment.include_corrupt_cells", &Config::include_corrupt_cells);
    dbl("experiment.corrupt_gain", &Config::corrupt_gain);
    dbl("experiment.corrupt_bias", &Config::corrupt_bias);
    dbl("experiment.corrupt_noise", &Config::corrupt_noise);
    itg("experiment.parallel", &Config::parallel);
    return m;
  }();
  return table;
}

void check(const Config& c) {
  if (c.dt <= 0.0) throw ConfigError("config: world.dt must be > 0");
  if (c.n_beams < 8) throw ConfigError("config: world.n_beams must be >= 8");
  if (c.max_range <= 0.0) throw ConfigError("config: world.max_range must be > 0");
  if (c.n_train <= 0 || c.n_cal <= 0 || c.n_test <= 0)
    throw ConfigError("config: dataset sizes must be positive");
  if (c.ensemble_members < 2)
    throw ConfigError("config: euq.ensemble_members must be >= 2");
  if (c.gamma_mult <= 0.0) throw ConfigError("config: calibration.gamma_mult must be > 0");
  if (c.trials <= 0) throw ConfigError("config: experiment.trials must be > 0");
  if (c.parallel < 1) throw ConfigError("config: experiment.parallel must be >= 1");
  filter::validate(c.filter);
}

}  // namespace

Config load_config(const std::string& path) {
  Config cfg;
  if (path.empty()) {
    check(cfg);
    return cfg;
  }
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open " + path);
  std::string line, section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']')
        throw ConfigError("config: malformed section at line " +
                          std::to_string(lineno));
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config: expected key = value at line " +
                        std::to_string(lineno));
    const std::string key = section + "." + trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (value.size() >= 2 && value.front() == '"' && value.back() == '"')
      value = value.substr(1, value.size() - 2);
    const auto it = bindings().find(key);
    if (it == bindings().end())
      throw ConfigError("config: unknown key '" + key + "' at line " +
                        std::to_string(lineno));
    it->second.set(cfg, value);
  }
  check(cfg);
  return cfg;
}

std::string canonical_config(const Config& c) {
  std::ostringstream out;
  auto put = [&out](const char* key, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    out << key << " = " << buf << "\n";
  };
  auto puti = [&out](const char* key, std::int64_t v) {
    out << key << " = " << v << "\n";
  };
  auto putb = [&out](const char* key, bool v) {
    out << key << " = " << (v ? "true" : "false") << "\n";
  };
  put("world.dt", c.dt);
  puti("world.n_beams", c.n_beams);
  put("world.fov", c.fov);
  put("world.max_range", c.max_range);
  put("world.beam_0_offset", c.beam_0_offset);
  puti("perception.hidden1", c.hidden1);
  puti("perception.hidden2", c.hidden2);
  put("perception.learning_rate", c.learning_rate);
  puti("perception.epochs", c.epochs);
  puti("perception.batch_size", c.batch_size);
  puti("perception.n_train", c.n_train);
  puti("perception.n_cal", c.n_cal);
  puti("perception.n_test", c.n_test);
  put("perception.annulus_margin", c.annulus_margin);
  put("perception.d_max", c.d_max);
  put("perception.alpha_max", c.alpha_max);
  puti("euq.ensemble_members", c.ensemble_members);
  puti("euq.laplace_rank", c.laplace_rank);
  put("euq.prior_scale", c.prior_scale);
  puti("euq.fisher_max_samples", c.fisher_max_samples);
  put("calibration.gamma_mult", c.gamma_mult);
  put("filter.kappa_gain", c.filter.kappa_gain);
  put("filter.lip_lfh", c.filter.lip_lfh);
  put("filter.lip_lgh", c.filter.lip_lgh);
  put("filter.lip_kh", c.filter.lip_kh);
  put("filter.slack_penalty", c.filter.slack_penalty);
  put("filter.v_min", c.filter.v_min);
  put("filter.v_max", c.filter.v_max);
  put("filter.omega_min", c.filter.omega_min);
  put("filter.omega_max", c.filter.omega_max);
  putb("filter.use_estimated_lipschitz", c.use_estimated_lipschitz);
  puti("experiment.trials", c.trials);
  puti("experiment.max_steps", c.max_steps);
  put("experiment.goal_radius", c.goal_radius);
  put("experiment.start_d_lo", c.start_d_lo);
  put("experiment.start_d_hi", c.start_d_hi);
  put("experiment.goal_back_lo", c.goal_back_lo);
  put("experiment.goal_back_hi", c.goal_back_hi);
  put("experiment.start_alpha_pad_lo", c.start_alpha_pad_lo);
  put("experiment.start_alpha_pad_hi", c.start_alpha_pad_hi);
  putb("experiment.disengage_after_pass", c.disengage_after_pass);
  put("experiment.stagnation_window", c.stagnation_window);
  put("experiment.stagnation_dist", c.stagnation_dist);
  puti("experiment.seed", std::int64_t(c.seed));
  puti("experiment.n_ood_eval", c.n_ood_eval);
  putb("experiment.include_corrupt_cells", c.include_corrupt_cells);
  put("experiment.corrupt_gain", c.corrupt_gain);
  put("experiment.corrupt_bias", c.corrupt_bias);
  put("experiment.corrupt_noise", c.corrupt_noise);
  return out.str();
}

std::string config_hash(const Config& cfg) {
  // FNV-1a 64 over the canonical dump. experiment.parallel is excluded from
  // the canonical form: it never affects results.
  const std::string s = canonical_config(cfg);
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace atom::harness
