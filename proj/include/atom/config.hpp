#pragma once

#include <cstdint>
#include <string>

#include "atom/filter.hpp"
#include "atom/world.hpp"

namespace atom::harness {

/// Full experiment configuration. Values here are the desk-scale defaults;
/// a TOML-style config file with [world] / [perception] / [euq] /
/// [calibration] / [filter] / [experiment] sections overrides them
/// selectively. Every output embeds the hash of the effective config.
struct Config {
  // [world]
  double dt = 0.02;
  int n_beams = 128;
  double fov = kTwoPi;
  double max_range = 10.0;
  double beam_0_offset = 0.0;

  // [perception]
  int hidden1 = 64, hidden2 = 64;
  double learning_rate = 0.001;
  int epochs = 3000;
  int batch_size = 32;
  int n_train = 2400, n_cal = 500, n_test = 250;
  double annulus_margin = 0.1;
  double d_max = 4.0;
  double alpha_max = 2.2;

  // [euq]
  int ensemble_members = 5;
  int laplace_rank = 128;
  double prior_scale = 1.0;
  int fisher_max_samples = 2000;

  // [calibration]
  double gamma_mult = 1.0;

  // [filter]
  filter::FilterConfig filter{};
  bool use_estimated_lipschitz = false;

  // [experiment]
  int trials = 100;
  int max_steps = 2000;
  double goal_radius = 0.3;
  double start_d_lo = 3.0, start_d_hi = 3.6;
  double goal_back_lo = 2.4, goal_back_hi = 3.0;
  double start_alpha_pad_lo = 0.05, start_alpha_pad_hi = 0.35;
  bool disengage_after_pass = true;
  double stagnation_window = 5.0;   // seconds
  double stagnation_dist = 0.05;    // meters
  std::uint64_t seed = 12345;
  int n_ood_eval = 400;             // static OoD scans for EUQ evaluation
  bool include_corrupt_cells = false;
  double corrupt_gain = 0.7;
  double corrupt_bias = 1.5;
  double corrupt_noise = 0.0;
  int parallel = 1;

  world::ScanConfig scan_config() const {
    return {n_beams, fov, max_range, beam_0_offset};
  }
};

/// Parses a config file; unknown keys are a ConfigError. Missing keys keep
/// their defaults. Pass an empty path for pure defaults.
Config load_config(const std::string& path);

/// Canonical "section.key = value" dump of the effective config; its FNV-1a
/// hash is the provenance hash embedded in outputs.
std::string canonical_config(const Config& cfg);
std::string config_hash(const Config& cfg);

}  // namespace atom::harness
