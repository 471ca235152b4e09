#include "cmj/spectral.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include "cmj/error.hpp"

namespace cmj {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kPi = std::numbers::pi;

// Raised inside the winding computation when the contour runs through (or
// extremely close to) a zero; callers retry with a shifted contour.
struct ContourTooClose {};

struct Box {
  double re0, re1, im0, im1;
  double size() const { return std::max(re1 - re0, im1 - im0); }
  std::complex<double> center() const { return {0.5 * (re0 + re1), 0.5 * (im0 + im1)}; }
};

class Winding {
 public:
  Winding(const IntensityData& data, double min_step) : data_(data), min_step_(min_step) {}

  int count(const Box& b) const {
    const std::array<std::complex<double>, 4> corner{std::complex<double>{b.re0, b.im0},
                                                     std::complex<double>{b.re1, b.im0},
                                                     std::complex<double>{b.re1, b.im1},
                                                     std::complex<double>{b.re0, b.im1}};
    double total = 0.0;
    for (int e = 0; e < 4; ++e) total += edge(corner[e], corner[(e + 1) % 4]);
    double w = total / (2.0 * kPi);
    double r = std::round(w);
    if (std::abs(w - r) > 0.05) throw ContourTooClose{};
    return static_cast<int>(r);
  }

 private:
  std::complex<double> f(std::complex<double> z) const {
    std::complex<double> v = data_.laplace(z) - 1.0;
    if (std::abs(v) < 1e-11) throw ContourTooClose{};
    return v;
  }

  double segment(std::complex<double> z0, std::complex<double> f0, std::complex<double> z1,
                 std::complex<double> f1, int depth) const {
    double d = std::arg(f1 / f0);
    if (std::abs(d) <= kPi / 3.0) return d;
    if (depth >= 48) throw ContourTooClose{};
    std::complex<double> zm = 0.5 * (z0 + z1);
    std::complex<double> fm = f(zm);
    return segment(z0, f0, zm, fm, depth + 1) + segment(zm, fm, z1, f1, depth + 1);
  }

  double edge(std::complex<double> a, std::complex<double> b) const {
    int n = std::max(8, static_cast<int>(std::ceil(std::abs(b - a) / min_step_)));
    double total = 0.0;
    std::complex<double> z0 = a, f0 = f(a);
    for (int j = 1; j <= n; ++j) {
      std::complex<double> z1 = (j == n) ? b : a + (b - a) * (static_cast<double>(j) / n);
      std::complex<double> f1 = f(z1);
      total += segment(z0, f0, z1, f1, 0);
      z0 = z1;
      f0 = f1;
    }
    return total;
  }

  const IntensityData& data_;
  double min_step_;
};

// Newton (modified for multiplicity k) started at z0. Returns the limit when
// the residual falls below tol.
std::optional<std::complex<double>> newton(const IntensityData& data, std::complex<double> z, int k,
                                           double tol) {
  try {
    for (int it = 0; it < 200; ++it) {
      std::complex<double> fz = data.laplace(z) - 1.0;
      std::complex<double> dz = data.laplace_derivative(z);
      if (std::abs(dz) == 0.0) break;
      std::complex<double> step = static_cast<double>(k) * fz / dz;
      z -= step;
      if (std::abs(step) <= 1e-15 * (1.0 + std::abs(z))) break;
    }
    if (std::abs(data.laplace(z) - 1.0) <= tol) return z;
  } catch (const DomainError&) {
  }
  return std::nullopt;
}

class RootRefiner {
 public:
  RootRefiner(const IntensityData& data, const Winding& w, const ScanOptions& opts)
      : data_(data), w_(w), opts_(opts) {}

  void refine(const Box& b, int count, std::vector<Root>& out) const {
    if (count == 0) return;
    double size = b.size();
    if (size <= opts_.strip_resolution) {
      if (count == 1) {
        auto z = newton(data_, b.center(), 1, opts_.root_tol);
        if (z && std::abs(z->real() - b.center().real()) <= size && std::abs(z->imag() - b.center().imag()) <= size) {
          out.push_back({*z, 1, std::abs(data_.laplace(*z) - 1.0)});
          return;
        }
      }
      if (size <= 1e-8) {
        auto z = newton(data_, b.center(), count, std::max(opts_.root_tol, 1e-8));
        if (!z) throw NumericalError("root refinement failed to converge inside a box of size 1e-8");
        out.push_back({*z, count, std::abs(data_.laplace(*z) - 1.0)});
        return;
      }
    }
    static constexpr std::array<double, 6> shifts{0.0131, -0.0217, 0.0379, -0.0443, 0.0571, -0.0693};
    for (double s : shifts) {
      double rm = b.re0 + (0.5 + s) * (b.re1 - b.re0);
      double im = b.im0 + (0.5 - 0.7 * s) * (b.im1 - b.im0);
      std::array<Box, 4> kids{Box{b.re0, rm, b.im0, im}, Box{rm, b.re1, b.im0, im}, Box{b.re0, rm, im, b.im1},
                              Box{rm, b.re1, im, b.im1}};
      std::array<int, 4> counts{};
      try {
        for (int i = 0; i < 4; ++i) counts[i] = w_.count(kids[i]);
      } catch (const ContourTooClose&) {
        continue;
      }
      if (counts[0] + counts[1] + counts[2] + counts[3] != count) continue;
      for (int i = 0; i < 4; ++i) refine(kids[i], counts[i], out);
      return;
    }
    throw NumericalError("winding numbers unstable after perturbing the subdivision");
  }

 private:
  const IntensityData& data_;
  const Winding& w_;
  const ScanOptions& opts_;
};

}  // namespace

bool MalthusianSolution::simple_alpha_only() const {
  return roots.size() == 1 && roots[0].multiplicity == 1 && std::abs(roots[0].value - alpha) < 1e-8;
}

double solve_malthusian(const IntensityData& data, double tol) {
  auto f = [&](double x) { return data.laplace(x) - 1.0; };
  double lo;
  if (data.domain_lower() < 0.0) {
    lo = 0.0;
  } else {
    double d = 1.0;
    lo = data.domain_lower() + d;
    for (int i = 0; i < 80 && !(f(lo) > 0.0); ++i) {
      d *= 0.5;
      lo = data.domain_lower() + d;
    }
  }
  if (!(f(lo) > 0.0)) throw AssumptionViolation("A4", "mu^(lambda) does not exceed 1 anywhere in its domain");
  double step = 1.0, hi = lo + step;
  int guard = 0;
  while (!(f(hi) < 0.0)) {
    if (f(hi) == 0.0) return hi;
    if (++guard > 200) throw AssumptionViolation("A4", "no Malthusian parameter: mu^(lambda) stays above 1");
    lo = hi;
    step *= 2.0;
    hi = lo + step;
  }
  double x = 0.5 * (lo + hi);
  for (int it = 0; it < 500; ++it) {
    double fx = f(x);
    if (std::abs(fx) <= tol) return x;
    if (fx > 0.0)
      lo = x;
    else
      hi = x;
    if (hi - lo <= 4.0 * std::numeric_limits<double>::epsilon() * std::abs(x)) return x;
    double d = data.laplace_derivative(x);
    double nx = (d != 0.0) ? x - fx / d : 0.5 * (lo + hi);
    x = (nx > lo && nx < hi) ? nx : 0.5 * (lo + hi);
  }
  return x;
}

double compute_beta(const IntensityData& data, double alpha) {
  double b = -data.laplace_derivative(alpha);
  if (!std::isfinite(b) || !(b > 0.0))
    throw AssumptionViolation("A7", "beta = int x e^{-alpha x} mu(dx) is not in (0, inf)");
  return b;
}

int winding_number(const IntensityData& data, double re0, double re1, double im0, double im1,
                   double min_step) {
  try {
    return Winding(data, min_step).count(Box{re0, re1, im0, im1});
  } catch (const ContourTooClose&) {
    throw NumericalError("contour passes too close to a zero of mu^ - 1");
  }
}

std::vector<Root> scan_roots(const IntensityData& data, double alpha, const ScanOptions& opts, bool* boundary) {
  const double half = alpha / 2.0;
  double im_lo, im_hi;
  if (auto d = data.lattice_span()) {
    double eta = 1e-3 * kPi / *d;
    im_lo = -kPi / *d + eta;
    im_hi = kPi / *d + eta;
  } else {
    im_lo = -opts.im_max;
    im_hi = opts.im_max;
  }
  const double min_step = std::min(0.05, opts.strip_resolution / 4.0);
  Winding w(data, min_step);
  RootRefiner refiner(data, w, opts);
  std::vector<Root> found;
  bool done = false;
  for (int attempt = 0; attempt < 4 && !done; ++attempt) {
    double jitter = 1e-7 * attempt;
    Box outer{half - 1e-6 - jitter, alpha + 0.5 + 0.01 * attempt, im_lo - jitter, im_hi + jitter};
    try {
      int total = w.count(outer);
      found.clear();
      refiner.refine(outer, total, found);
      done = true;
    } catch (const ContourTooClose&) {
    }
  }
  if (!done) throw NumericalError("winding computation on the outer contour is unstable");

  std::vector<Root> roots;
  bool on_boundary = false;
  for (const Root& r : found) {
    if (r.value.real() < half - 1e-7) continue;
    if (std::abs(r.value.real() - half) <= 1e-7) on_boundary = true;
    bool dup = false;
    for (Root& q : roots)
      if (std::abs(q.value - r.value) < 1e-8) dup = true;
    if (!dup) roots.push_back(r);
  }
  std::sort(roots.begin(), roots.end(), [](const Root& a, const Root& b) {
    if (a.value.real() != b.value.real()) return a.value.real() > b.value.real();
    return a.value.imag() < b.value.imag();
  });
  if (boundary) *boundary = on_boundary;
  return roots;
}

MalthusianSolution analyze(const IntensityData& data, const ScanOptions& opts) {
  MalthusianSolution s;
  s.alpha = solve_malthusian(data);
  if (!(s.alpha > 0.0)) throw AssumptionViolation("A4", "Malthusian parameter is not positive");
  s.beta = compute_beta(data, s.alpha);
  s.lattice_span = data.lattice_span();
  s.residual = std::abs(data.laplace(s.alpha) - 1.0);
  s.roots = scan_roots(data, s.alpha, opts, &s.boundary_roots_present);
  bool alpha_seen = false;
  for (const Root& r : s.roots)
    if (std::abs(r.value - s.alpha) < 1e-8) {
      alpha_seen = true;
      if (r.multiplicity != 1) throw NumericalError("alpha reported with multiplicity other than 1");
    }
  if (!alpha_seen) throw NumericalError("root scan did not recover alpha");
  return s;
}

A7Result check_a7(const BirthLaw& law, double alpha, double theta) {
  if (!(theta > 0.0 && theta < alpha / 2.0)) {
    std::ostringstream os;
    os << "theta = " << theta << " must lie in (0, alpha/2) = (0, " << alpha / 2.0 << ")";
    throw DomainError(os.str());
  }
  A7Result r;
  r.analytic = true;
  if (const auto* gw = law.as<GaltonWatson>()) {
    double m2 = 0.0;
    for (std::size_t k = 0; k < gw->offspring.size(); ++k) m2 += double(k) * double(k) * gw->offspring[k];
    r.estimate = std::exp(2.0 * theta) * m2;
  } else if (const auto* f = law.as<Fragmentation>()) {
    if (const auto* d = std::get_if<DeterministicDislocation>(&f->dislocation)) {
      double s = 0.0;
      for (double v : d->masses)
        if (v > 0.0) s += std::pow(v, theta);
      r.estimate = s * s;
    } else {
      // Dirichlet(1,...,1): E[V_1^p V_2^q] = G(b) G(1+p) G(1+q) / G(b+p+q)
      double b = std::get<UniformDislocation>(f->dislocation).pieces;
      double single = std::exp(std::lgamma(b) + std::lgamma(1.0 + 2.0 * theta) - std::lgamma(b + 2.0 * theta));
      double cross =
          std::exp(std::lgamma(b) + 2.0 * std::lgamma(1.0 + theta) - std::lgamma(b + 2.0 * theta));
      r.estimate = b * single + b * (b - 1.0) * cross;
    }
  } else {
    const auto& p = *law.as<PoissonIntensity>();
    double bb = p.b_exp;
    if (theta <= bb)
      r.estimate = kInf;
    else
      r.estimate = p.a / (2.0 * theta - bb) + std::pow(p.a / (theta - bb), 2);
  }
  r.holds = std::isfinite(r.estimate);
  return r;
}

A7Result a7_monte_carlo(const BirthLaw& law, double theta, std::size_t samples, Rng& rng) {
  if (samples < 8) throw ConfigError("a7_monte_carlo needs at least 8 samples");
  A7Result r;
  double limit = kInf;
  if (const auto* p = law.as<PoissonIntensity>(); p && p->b_exp >= 0) {
    double bb = p->b_exp;
    if (theta <= bb) {
      r.estimate = kInf;
      return r;
    }
    // Points beyond `limit` contribute less than 1e-12 in mean.
    limit = std::log(1e-12 * (theta - bb) / p->a) / (bb - theta);
  }
  std::array<double, 4> est{};
  std::array<std::size_t, 4> marks{samples / 8, samples / 4, samples / 2, samples};
  double sum = 0.0, sum2 = 0.0;
  std::size_t next = 0;
  for (std::size_t i = 1; i <= samples; ++i) {
    BirthDraw d = draw_births(law, limit, rng);
    double s = 0.0;
    for (double x : d.offsets) s += std::exp(-theta * x);
    double y = s * s;
    sum += y;
    sum2 += y * y;
    if (i == marks[next]) est[next++] = sum / static_cast<double>(i);
  }
  double n = static_cast<double>(samples);
  double mean = sum / n;
  double var = std::max(0.0, (sum2 - n * mean * mean) / (n - 1.0));
  r.estimate = mean;
  r.standard_error = std::sqrt(var / n);
  bool growing = est[0] < est[1] && est[1] < est[2] && est[2] < est[3];
  r.holds = std::isfinite(mean) && !(growing && est[3] - est[0] > 4.0 * r.standard_error &&
                                     r.standard_error > 0.1 * mean);
  return r;
}

}  // namespace cmj
