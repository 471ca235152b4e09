#pragma once

// Experiment configuration: a single YAML document with nested tables.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "cmj/characteristics.hpp"
#include "cmj/models.hpp"

namespace cmj {

struct CharacteristicSpec {
  std::string kind = "one";  // one | leaf | fringe | nerman
  std::string pattern;       // fringe literal, e.g. "(()())"
};

struct Tolerances {
  double root_tol = 1e-10;
  /// Renewal density grid step; empty selects 0.01 / alpha.
  std::optional<double> grid_step;
  /// Renewal kernel range; empty selects what the experiment needs.
  std::optional<double> s_max;
  int nested_mc_m = 200;
  /// t_big - t for the W proxy; empty selects ceil(4.6 / alpha).
  std::optional<double> delta_w;
};

struct SimulateSpec {
  std::optional<double> time;        // TimeHorizon
  std::optional<std::size_t> weight;  // WeightThreshold
};

struct CltSpec {
  std::optional<double> t;      // defaults to the last horizon
  std::optional<double> t_big;  // defaults to t + delta_w
  /// Keep simulating until this many replicas survive (0: run `replicas` only).
  std::size_t survivors = 0;
  std::size_t sigma_samples = 4000;
  double sigma_step = 0.0;
  double sigma_s_min = 0.0;
  double sigma_s_max = 0.0;
  double p_threshold = 0.01;
};

struct FringeSpec {
  std::vector<std::string> patterns;  // empty: every pattern up to h_max / max_degree
  int h_max = 2;
  int max_degree = 2;
};

struct MartingaleSpec {
  std::vector<double> times;  // empty: the horizons
  int generations = 6;
  std::vector<double> thetas;  // empty: alpha and alpha - 0.1
  /// Time cut for generation sums under laws with infinitely many children;
  /// 0 selects ln(2000) / alpha.
  double generation_horizon = 0.0;
};

struct ExperimentConfig {
  BirthLaw model = BirthLaw::galton_watson({0.0, 0.0, 1.0});
  double im_max = 50.0;
  CharacteristicSpec characteristic;
  std::vector<double> horizons{1.0};
  std::size_t replicas = 1000;
  std::uint64_t master_seed = 0;
  Tolerances tolerances;
  std::string output_dir = ".";
  SimulateSpec simulate;
  CltSpec clt;
  FringeSpec fringe;
  MartingaleSpec martingales;
};

/// Parses and validates a configuration document. Throws ConfigError (and
/// AssumptionViolation for law parameters outside the model assumptions).
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::string& path);

/// Instantiates the configured characteristic.
CharacteristicPtr make_characteristic(const CharacteristicSpec& spec, std::shared_ptr<const IntensityData> mu,
                                      double alpha);

}  // namespace cmj
