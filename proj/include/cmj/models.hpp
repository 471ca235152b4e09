#pragma once

// Catalog of reproduction point processes: Galton-Watson, conservative
// fragmentation and Poisson processes with intensity a*e^{b x}. Each law comes
// with an exact sampler and with the analytic data of its intensity measure.

#include <complex>
#include <functional>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "cmj/rng.hpp"

namespace cmj {

/// xi = N * delta_1 with P(N = k) = offspring[k].
struct GaltonWatson {
  std::vector<double> offspring;
};

/// Every split produces the same masses (V_1, ..., V_b).
struct DeterministicDislocation {
  std::vector<double> masses;
};

/// (V_1, ..., V_b) uniform on the simplex, i.e. Dirichlet(1, ..., 1).
struct UniformDislocation {
  int pieces = 2;
};

using Dislocation = std::variant<DeterministicDislocation, UniformDislocation>;

/// xi = sum over pieces with V_i > 0 of delta_{-log V_i}.
struct Fragmentation {
  Dislocation dislocation;
};

/// Poisson point process on [0, inf) with intensity a * exp(b_exp * x) dx.
struct PoissonIntensity {
  double a = 1.0;
  int b_exp = 0;
};

class BirthLaw {
 public:
  using Kind = std::variant<GaltonWatson, Fragmentation, PoissonIntensity>;

  /// Validates parameters; throws ConfigError or AssumptionViolation (A1/A3).
  explicit BirthLaw(Kind kind);

  static BirthLaw galton_watson(std::vector<double> offspring);
  static BirthLaw fragmentation(std::vector<double> masses);
  static BirthLaw uniform_fragmentation(int pieces);
  static BirthLaw poisson(double a, int b_exp);

  const Kind& kind() const noexcept { return kind_; }
  template <class T>
  const T* as() const noexcept {
    return std::get_if<T>(&kind_);
  }

  /// True when xi([0, inf)) is finite almost surely, so a single draw yields
  /// every birth of an individual.
  bool finite_offspring() const noexcept;

  std::string describe() const;

 private:
  Kind kind_;
};

/// The offsets of one individual's children, sorted ascending. Offsets are
/// known exactly on [0, limit]; limit is +inf once the whole point process has
/// been drawn.
struct BirthDraw {
  std::vector<double> offsets;
  double limit = 0.0;

  bool complete() const noexcept;
};

/// Draws xi restricted to [0, limit] (the full process for finite laws).
BirthDraw draw_births(const BirthLaw& law, double limit, Rng& rng);

/// Extends an incomplete draw to [0, new_limit] using independent increments.
void extend_births(const BirthLaw& law, BirthDraw& draw, double new_limit, Rng& rng);

/// Sorted birth offsets in [0, horizon]. Ties keep child-index order.
std::vector<double> sample_births(const BirthLaw& law, double horizon, Rng& rng);

struct Atom {
  double at;
  double mass;
};

/// Analytic description of the intensity measure mu = E[xi].
class IntensityData {
 public:
  explicit IntensityData(const BirthLaw& law);

  /// Laplace transform mu^(lambda) = int e^{-lambda x} mu(dx).
  /// Throws DomainError outside the half-plane of absolute convergence.
  std::complex<double> laplace(std::complex<double> lambda) const;
  double laplace(double lambda) const;
  /// d/dlambda of the Laplace transform.
  std::complex<double> laplace_derivative(std::complex<double> lambda) const;
  double laplace_derivative(double lambda) const;

  /// The transform converges for Re(lambda) > domain_lower().
  double domain_lower() const noexcept { return domain_lower_; }
  bool in_domain(std::complex<double> lambda) const noexcept;

  double mu_mass() const noexcept { return mu_mass_; }
  double mu_atom_at_zero() const noexcept;
  std::optional<double> lattice_span() const noexcept { return lattice_span_; }

  const std::vector<Atom>& atoms() const noexcept { return atoms_; }
  bool has_density() const noexcept { return has_density_; }
  /// Density of the absolutely continuous part (0 when there is none).
  double density(double x) const;

  /// mu([0, t]).
  double mass_up_to(double t) const;

  /// int_{(lo, hi]} f(x) mu(dx); hi may be +inf.
  double integrate(const std::function<double(double)>& f, double lo, double hi) const;
  std::complex<double> integrate_complex(const std::function<std::complex<double>(double)>& f,
                                         double lo, double hi) const;

  /// int_{(lo, inf)} e^{-lambda x} mu(dx).
  std::complex<double> laplace_tail(std::complex<double> lambda, double lo) const;

  /// int_{(lo, inf)} (shift + x)^i e^{-lambda (shift + x)} mu(dx), the mean
  /// contribution of unsampled births to the complex martingales.
  std::complex<double> moment_tail(std::complex<double> lambda, double shift, double lo, int i) const;

  const BirthLaw& law() const noexcept { return law_; }

 private:
  BirthLaw law_;
  std::vector<Atom> atoms_;
  bool has_density_ = false;
  double domain_lower_ = 0.0;
  double mu_mass_ = 0.0;
  std::optional<double> lattice_span_;
};

IntensityData intensity_data(const BirthLaw& law);

/// Largest d > 0 with every point an integer multiple of d, if one exists
/// (ratios are matched to rationals with denominators up to 1000).
std::optional<double> common_lattice_span(const std::vector<double>& points);

}  // namespace cmj
