#pragma once

// Monte Carlo experiments: replica farms for the law of large numbers, the
// CLT distributional test, fringe census and martingale mean traces.
//
// Replica i draws from make_rng(master_seed, Stream::replica, i) (and
// Stream::biggins for generation-capped populations). Results are stored by
// replica index and aggregated in index order, so reports do not depend on
// the thread count.

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "cmj/config.hpp"
#include "cmj/renewal.hpp"

namespace cmj {

struct RunOptions {
  unsigned threads = 1;
  /// Relative bias injected into a_alpha (negative control).
  double aalpha_bias = 0.0;
};

/// Runs f(i) for i in [begin, end) on `threads` workers pulling indices from a
/// shared counter. f must only write to slot i of its outputs.
void parallel_for(std::size_t begin, std::size_t end, unsigned threads, const std::function<void(std::size_t)>& f);

/// Spectral data, renewal kernel and characteristic shared by the experiments.
struct ExperimentSetup {
  BirthLaw law;
  std::shared_ptr<const IntensityData> mu;
  MalthusianSolution sol;
  RenewalKernel kernel;
  CharacteristicPtr phi;
  /// E[phi], when available in closed form.
  std::optional<MeanFn> mean_fn;
};

/// Solves for alpha, scans the roots and builds a kernel covering s_max.
/// s_max <= 0 covers every time the configured experiments can reach.
ExperimentSetup prepare(const ExperimentConfig& cfg, double s_max = 0.0);

struct ReplicaRecord {
  std::uint64_t seed = 0;
  bool survived = false;
  std::size_t z_t = 0;
  double z_phi_t = 0.0;
  double w_main = 0.0;  // W at the horizon t
  double w_ext = 0.0;   // W at the extended horizon
  std::optional<double> normalized_stat;
};

void write_replicas_csv(const std::vector<ReplicaRecord>& rows, std::ostream& os);

struct LlnRow {
  double t = 0.0;
  std::size_t n_survived = 0;
  double mean_scaled = 0.0;  // mean of e^{-alpha t} Z_t^phi over all replicas
  double se = 0.0;
  std::optional<double> predicted_mean;  // e^{-alpha t} m_t
  double z_score = 0.0;                  // against predicted_mean
  double limit = 0.0;                    // a_alpha = key renewal limit times E[W]
  double z_limit = 0.0;
  double fraction_mean = 0.0;  // mean of Z_t^phi / Z_t over survivors
  double fraction_se = 0.0;
  double fraction_limit = 0.0;  // a_alpha beta / c_alpha
};

struct LlnReport {
  std::string law;
  std::string characteristic;
  double alpha = 0.0;
  double a_alpha = 0.0;
  std::vector<LlnRow> rows;
  std::vector<ReplicaRecord> replicas;  // at the last horizon
  bool passed = false;                  // |z_score| <= 4 at every horizon
};

LlnReport run_lln(const ExperimentConfig& cfg, const RunOptions& opts = {});

struct CltReport {
  std::size_t n_replicas = 0;
  std::size_t n_survived = 0;
  double t = 0.0;
  double t_big = 0.0;
  double a_alpha = 0.0;       // key renewal limit
  double a_alpha_used = 0.0;  // after bias injection
  double ks_statistic = 0.0;
  double ks_p_value = 1.0;
  double anderson_darling_stat = 0.0;
  double anderson_darling_p_value = 1.0;
  double mean_stat = 0.0;
  /// Sample variance of e^{-alpha t/2}(Z_t^phi - a_alpha e^{alpha t} W)/(W/beta)^{1/2}.
  double empirical_variance = 0.0;
  double sigma2_formula = 0.0;
  double sigma2_se = 0.0;
  double sigma2_ratio = 0.0;  // sigma2_formula / empirical_variance
  double w_bias_factor = 0.0;  // e^{-alpha (t_big - t)/2}
  double extinction_fraction = 0.0;
  std::optional<double> extinction_probability;
  bool degenerate = false;  // sigma^2 = 0: no distributional test
  bool passed = false;
  std::string reason;
  SigmaResult sigma;
  std::vector<ReplicaRecord> replicas;
};

/// Throws UnsupportedRegime for boundary roots or other roots in the strip.
/// sigma^2 = 0 yields a degenerate report without a test.
CltReport run_clt(const ExperimentConfig& cfg, const RunOptions& opts = {});

struct FringeRow {
  std::string pattern;
  double mean_count = 0.0;  // E[N_T(T_t)] over all replicas
  double count_se = 0.0;
  std::optional<double> predicted_count;  // mean_process
  double z_count = 0.0;
  double mean_fraction = 0.0;  // N_T / Z_t over survivors
  double fraction_se = 0.0;
  std::optional<double> predicted_fraction;  // a_alpha(T) beta / c_alpha
};

struct FringeReport {
  double t = 0.0;
  std::size_t n_replicas = 0;
  std::size_t n_survived = 0;
  std::vector<FringeRow> rows;
  bool passed = false;  // |z_count| <= 4 wherever a prediction exists
};

FringeReport run_fringe_census(const ExperimentConfig& cfg, const RunOptions& opts = {});

struct TracePoint {
  double x = 0.0;  // time, or generation for Biggins traces
  double mean = 0.0;
  double se = 0.0;
  double variance = 0.0;
  double expected = 0.0;
  double z = 0.0;
  bool flagged = false;  // |mean - expected| > 4 se
};

struct Trace {
  std::string name;
  std::vector<TracePoint> points;
};

struct MartingaleReport {
  std::size_t n_replicas = 0;
  std::vector<Trace> traces;
  /// Var(W_t) non-decreasing: paired increments E[W_t^2 - W_s^2] >= -4 se.
  bool variance_monotone = true;
  bool passed = false;
};

MartingaleReport run_martingale_suite(const ExperimentConfig& cfg, const RunOptions& opts = {});
void write_trace_csv(const Trace& trace, std::ostream& os);

std::string to_json(const LlnReport& r);
std::string to_json(const CltReport& r);
std::string to_json(const FringeReport& r);
std::string to_json(const MartingaleReport& r);

/// Extinction probability of the embedded Galton-Watson process, by
/// fixed-point iteration of the offspring generating function.
double extinction_probability(const BirthLaw& law);

}  // namespace cmj
