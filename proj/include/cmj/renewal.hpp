#pragma once

// Renewal theory for the mean process: the tilted renewal measure
// e^{-alpha x} nu(dx) = sum_i mu_alpha^{*i}(dx), m_t = E[Z_t^phi], the key
// renewal limit a_alpha, the E1 diagnostic and the CLT variance constant.

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "cmj/characteristics.hpp"
#include "cmj/spectral.hpp"

namespace cmj {

using MeanFn = std::function<double(double)>;

struct KernelOptions {
  /// Density grid step; 0 selects 0.01 / alpha.
  double step = 0.0;
};

/// Tilted renewal measure on [0, s_max]: atoms (the unit atom at 0 included)
/// plus a density tabulated on grids of step h, h/2 and h/4, combined by
/// Richardson extrapolation.
struct RenewalKernel {
  double alpha = 0.0;
  double beta = 0.0;
  std::optional<double> lattice_span;
  double step = 0.0;
  double s_max = 0.0;
  double mu_alpha_mass = 0.0;  // mu^(alpha), 1 up to root-finding error
  std::vector<Atom> atoms;     // tilted masses, sorted by position
  /// Untilted lattice masses nu({n d}), kept so that integer-valued means stay exact.
  std::vector<double> lattice_mass;
  std::vector<double> density;  // at j * step
  std::vector<std::vector<double>> refined;  // at j * step / 2 and j * step / 4

  bool lattice() const noexcept { return lattice_span.has_value(); }
  /// c_alpha = int_{[0,inf)} e^{-alpha x} l(dx): 1/alpha, or d / (1 - e^{-alpha d}) on dZ.
  double c_alpha() const;
};

RenewalKernel make_kernel(const IntensityData& mu, const MalthusianSolution& sol, double s_max,
                          const KernelOptions& opts = {});

/// m_t = int_{[0,t]} E[phi](t - x) nu(dx) for a mean function vanishing on
/// the negative half-line. Exact on lattices; otherwise trapezoid against the
/// density grids with Richardson extrapolation. `error` receives the
/// estimated absolute error.
double mean_process(const RenewalKernel& kernel, const MeanFn& mean_fn, double t, double* error = nullptr);

/// (1/beta) int_G E[phi](x) e^{-alpha x} l(dx) over [lower, inf).
double key_renewal_limit(const RenewalKernel& kernel, const MeanFn& mean_fn, double lower = 0.0);

/// Adaptive Simpson quadrature of f over [a, b] to absolute tolerance tol.
double adaptive_simpson(const std::function<double(double)>& f, double a, double b, double tol);

/// E[H_Lambda(t)] = a_alpha e^{alpha t}. Throws UnsupportedRegime unless alpha
/// is the only (simple) root with real part >= alpha/2.
double h_lambda_mean(const MalthusianSolution& sol, double a_alpha, double t);

struct RemainderSample {
  double t;
  double r;
  double error;  // numerical error of m_t
};

struct MeanExpansion {
  double a_alpha = 0.0;
  std::vector<RemainderSample> remainder_samples;
  /// Least-squares slope of log|r(t)| against t over the resolved samples.
  double decay_exponent_fit = 0.0;
  /// max over samples of |r(t)| (1 + t^2) e^{-alpha t / 2}.
  double bound_constant = 0.0;
  bool passed = false;
  std::string reason;
};

/// Samples r(t) = m_t - a_alpha e^{alpha t} and tests |r(t)| <= C e^{alpha t/2}/(1+t^2):
/// the fitted growth rate of |r| must stay below alpha/2 and the scaled
/// remainder must not grow along the grid. Samples with |r| below the
/// numerical error of m_t are treated as zero.
MeanExpansion check_e1(const RenewalKernel& kernel, const MeanFn& mean_fn, double a_alpha,
                       const std::vector<double>& t_grid);

/// g(t) = m_t - a_alpha e^{alpha t} (with m_t = 0 for t < 0), tabulated for
/// non-lattice kernels and exact on lattices.
class MeanRemainder {
 public:
  MeanRemainder(const RenewalKernel& kernel, MeanFn mean_fn, double a_alpha, double t_max);
  double operator()(double t) const;

 private:
  const RenewalKernel* kernel_;
  MeanFn mean_fn_;
  double a_alpha_;
  double step_ = 0.0;
  std::vector<double> table_;  // e^{-alpha t} g(t) on the grid
};

struct SigmaOptions {
  std::size_t samples_per_point = 4000;
  /// Quadrature step for non-lattice laws; 0 selects 0.1 / alpha. Lattice
  /// laws always sum over the lattice.
  double step = 0.0;
  /// Window [-s_min, s_max]; 0 selects 10/alpha and 12/alpha.
  double s_min = 0.0;
  double s_max = 0.0;
  int nested_mc_m = 200;
  std::uint64_t seed = 0;
  /// Fail when se / sigma2 exceeds this (0 disables).
  double max_relative_se = 0.0;
  unsigned threads = 1;
};

struct SigmaGridPoint {
  double s;
  double chi_sq_mean;
  double chi_sq_se;
  double weight;  // quadrature weight including e^{-alpha s}
};

struct SigmaResult {
  double sigma2 = 0.0;
  double se = 0.0;
  double a_alpha = 0.0;
  double truncation_error_bound = 0.0;
  double s_min = 0.0;
  double s_max = 0.0;
  double step = 0.0;
  std::vector<SigmaGridPoint> grid;
};

/// sigma^2 = int_G E[chi^(psi,h)(s)^2] e^{-alpha s} l(ds) with psi = phi + g * xi.
/// Each grid point is an independent Monte Carlo job over fresh root-started
/// populations.
SigmaResult sigma_squared(const BirthLaw& law, const CharacteristicPtr& phi, const MalthusianSolution& sol,
                          const RenewalKernel& kernel, const SigmaOptions& opts = {});

void write_sigma_csv(const SigmaResult& r, std::ostream& os);
std::string sigma_json(const SigmaResult& r);

struct StoneCheck {
  double theta = 0.0;
  double max_density_error = 0.0;  // numerical density vs 1/beta
  bool s1_holds = false;
};

/// Closed-form Stone decomposition of the Poisson-intensity renewal measure:
/// nu_1 has density a - a e^{-theta x}, nu_2 density a e^{-theta x}. S1 needs
/// theta > alpha/2. The numerical density is compared with 1/beta = a.
StoneCheck stone_check_poisson(const RenewalKernel& kernel, double theta);

}  // namespace cmj
