#pragma once

// Malthusian parameter, beta, and the roots of mu^(lambda) = 1 in the strip
// Re(lambda) >= alpha/2.

#include <complex>
#include <cstdint>
#include <optional>
#include <vector>

#include "cmj/models.hpp"

namespace cmj {

struct Root {
  std::complex<double> value;
  int multiplicity = 1;
  double residual = 0.0;  // |mu^(value) - 1|
};

struct ScanOptions {
  double strip_resolution = 0.25;
  /// Half-height of the scanned window in the non-lattice case. Roots with
  /// |Im| > im_max are not searched for.
  double im_max = 50.0;
  double root_tol = 1e-10;
};

struct MalthusianSolution {
  double alpha = 0.0;
  double beta = 0.0;
  std::optional<double> lattice_span;
  std::vector<Root> roots;
  double residual = 0.0;
  bool boundary_roots_present = false;

  /// True when the only root in the strip is alpha and it is simple.
  bool simple_alpha_only() const;
};

/// Solves mu^(alpha) = 1 by doubling a bracket and refining with safeguarded
/// Newton. Throws AssumptionViolation("A4") when no sign change exists.
double solve_malthusian(const IntensityData& data, double tol = 1e-14);

/// beta = -mu^'(alpha).
double compute_beta(const IntensityData& data, double alpha);

/// All zeros of mu^(lambda) - 1 with Re(lambda) >= alpha/2 (lattice: Im in
/// (-pi/d, pi/d]) located by winding numbers on a quadtree of boxes and
/// polished by complex Newton. Sets *boundary when a root sits on
/// Re(lambda) = alpha/2.
std::vector<Root> scan_roots(const IntensityData& data, double alpha, const ScanOptions& opts = {},
                             bool* boundary = nullptr);

/// alpha, beta and the root scan in one report.
MalthusianSolution analyze(const IntensityData& data, const ScanOptions& opts = {});

/// Winding number of mu^ - 1 around the rectangle [re0, re1] x [im0, im1].
/// Throws NumericalError when the contour passes too close to a zero.
int winding_number(const IntensityData& data, double re0, double re1, double im0, double im1,
                   double min_step = 0.05);

struct A7Result {
  bool holds = false;
  double estimate = 0.0;  // E[(sum_i e^{-theta X_i})^2]
  double standard_error = 0.0;
  bool analytic = false;
};

/// Second moment of xi^(theta). Analytic for every catalog law.
A7Result check_a7(const BirthLaw& law, double alpha, double theta);

/// Monte Carlo estimate of E[(xi^(theta))^2] over `samples` draws. The
/// estimate is recomputed at 1/8, 1/4, 1/2 and all of the sample; a steadily
/// growing estimate with a large relative error marks A7 as violated.
A7Result a7_monte_carlo(const BirthLaw& law, double theta, std::size_t samples, Rng& rng);

}  // namespace cmj
