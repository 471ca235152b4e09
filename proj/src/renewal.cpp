#include "cmj/renewal.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <ostream>
#include <thread>

#include <json.hpp>

#include "cmj/error.hpp"
#include "cmj/rng.hpp"

namespace cmj {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr std::size_t kMaxAtoms = 2'000'000;

// On a lattice every meaningful time is a multiple of the span; undo the
// rounding noise of sums of offsets.
double snap(const RenewalKernel& k, double t) {
  if (!k.lattice()) return t;
  double d = *k.lattice_span, n = std::round(t / d);
  return std::abs(t / d - n) < 1e-9 ? n * d : t;
}

// Solves u = f + f * u by the trapezoid rule on [0, (n-1) h].
std::vector<double> volterra(const std::function<double(double)>& f, double h, std::size_t n) {
  std::vector<double> fv(n), u(n);
  for (std::size_t j = 0; j < n; ++j) fv[j] = f(static_cast<double>(j) * h);
  u[0] = fv[0];
  const double denom = 1.0 - 0.5 * h * fv[0];
  for (std::size_t i = 1; i < n; ++i) {
    double s = 0.5 * fv[i] * u[0];
    for (std::size_t j = 1; j < i; ++j) s += fv[i - j] * u[j];
    u[i] = (fv[i] + h * s) / denom;
  }
  return u;
}

// int_0^t F(t - x) u(x) dx with u tabulated at step h.
double convolve(const std::vector<double>& u, double h, const std::function<double(double)>& F, double t) {
  if (t <= 0.0 || u.empty()) return 0.0;
  std::size_t n = static_cast<std::size_t>(std::floor(t / h));
  if (n + 1 >= u.size()) n = u.size() - 2;
  double s = 0.0;
  if (n > 0) {
    s = 0.5 * (F(t) * u[0] + F(t - static_cast<double>(n) * h) * u[n]);
    for (std::size_t j = 1; j < n; ++j) s += F(t - static_cast<double>(j) * h) * u[j];
    s *= h;
  }
  double x0 = static_cast<double>(n) * h, rest = t - x0;
  if (rest > 0.0) {
    double ut = u[n] + (u[n + 1] - u[n]) * rest / h;
    s += 0.5 * rest * (F(rest) * u[n] + F(0.0) * ut);
  }
  return s;
}

void enumerate_atoms(const IntensityData& mu, double alpha, double s_max, std::vector<Atom>& out) {
  std::vector<double> pos, w;
  for (const Atom& a : mu.atoms()) {
    if (!pos.empty() && std::abs(pos.back() - a.at) < 1e-12) {
      w.back() += a.mass * std::exp(-alpha * a.at);
    } else {
      pos.push_back(a.at);
      w.push_back(a.mass * std::exp(-alpha * a.at));
    }
  }
  if (!pos.empty() && pos.front() <= 0.0)
    throw CapabilityError("atomic renewal enumeration needs strictly positive atoms");
  // nu(c) = sum_i w_i nu(c - e_i), level by level in the total count.
  using Key = std::vector<int>;
  std::map<Key, double> level{{Key(pos.size(), 0), 1.0}};
  out.push_back({0.0, 1.0});
  std::size_t total = 1;
  while (!level.empty()) {
    std::map<Key, double> next;
    for (const auto& [c, v] : level) {
      double at = 0.0;
      for (std::size_t i = 0; i < pos.size(); ++i) at += c[i] * pos[i];
      for (std::size_t i = 0; i < pos.size(); ++i) {
        if (at + pos[i] > s_max) continue;
        Key k = c;
        ++k[i];
        next[k] += w[i] * v;
      }
    }
    for (const auto& [c, v] : next) {
      double at = 0.0;
      for (std::size_t i = 0; i < pos.size(); ++i) at += c[i] * pos[i];
      out.push_back({at, v});
    }
    total += next.size();
    if (total > kMaxAtoms) throw ResourceError("renewal atom enumeration exceeds " + std::to_string(kMaxAtoms) + " atoms");
    level = std::move(next);
  }
  std::sort(out.begin(), out.end(), [](const Atom& a, const Atom& b) { return a.at < b.at; });
}

double least_squares_slope(const std::vector<double>& x, const std::vector<double>& y) {
  double n = static_cast<double>(x.size()), sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
    sxx += x[i] * x[i];
    sxy += x[i] * y[i];
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

double simpson_rec(const std::function<double(double)>& f, double a, double b, double fa, double fm, double fb,
                   double whole, double tol, int depth) {
  double m = 0.5 * (a + b), lm = 0.5 * (a + m), rm = 0.5 * (m + b);
  double flm = f(lm), frm = f(rm);
  double left = (m - a) / 6.0 * (fa + 4 * flm + fm), right = (b - m) / 6.0 * (fm + 4 * frm + fb);
  double delta = left + right - whole;
  if (depth <= 0 || std::abs(delta) <= 15.0 * tol) return left + right + delta / 15.0;
  return simpson_rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
         simpson_rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

}  // namespace

double RenewalKernel::c_alpha() const {
  if (lattice()) {
    double d = *lattice_span;
    return d / (1.0 - std::exp(-alpha * d));
  }
  return 1.0 / alpha;
}

RenewalKernel make_kernel(const IntensityData& mu, const MalthusianSolution& sol, double s_max,
                          const KernelOptions& opts) {
  if (!(s_max > 0.0)) throw DomainError("renewal kernel needs s_max > 0");
  RenewalKernel k;
  k.alpha = sol.alpha;
  k.beta = sol.beta;
  k.lattice_span = mu.lattice_span();
  k.s_max = s_max;
  k.mu_alpha_mass = mu.laplace(sol.alpha);
  if (std::abs(k.mu_alpha_mass - 1.0) > 1e-10)
    throw NumericalError("tilted intensity has mass " + std::to_string(k.mu_alpha_mass) + ", expected 1");

  if (k.lattice()) {
    const double d = *k.lattice_span;
    k.step = d;
    std::size_t n = static_cast<std::size_t>(std::floor(s_max / d + 1e-9));
    // Same recursion for the tilted and the untilted masses.
    auto renew = [n](const std::vector<double>& q) {
      std::vector<double> nu(n + 1, 0.0);
      for (std::size_t i = 0; i <= n; ++i) {
        double s = i == 0 ? 1.0 : 0.0;
        for (std::size_t j = 1; j <= i; ++j) s += q[j] * nu[i - j];
        nu[i] = s / (1.0 - q[0]);
      }
      return nu;
    };
    std::vector<double> q(n + 1, 0.0), qa(n + 1, 0.0);
    for (const Atom& a : mu.atoms()) {
      auto idx = static_cast<std::size_t>(std::llround(a.at / d));
      if (idx > n) continue;
      q[idx] += a.mass;
      qa[idx] += a.mass * std::exp(-k.alpha * a.at);
    }
    k.lattice_mass = renew(q);
    std::vector<double> nu = renew(qa);
    for (std::size_t i = 0; i <= n; ++i) k.atoms.push_back({static_cast<double>(i) * d, nu[i]});
    return k;
  }
  if (!mu.has_density()) {
    k.step = 0.0;
    enumerate_atoms(mu, k.alpha, s_max, k.atoms);
    return k;
  }
  if (!mu.atoms().empty()) throw CapabilityError("renewal kernel for intensities mixing atoms and densities");
  k.step = opts.step > 0.0 ? opts.step : 0.01 / k.alpha;
  k.atoms.push_back({0.0, 1.0});
  const double a = k.alpha;
  auto f = [&](double x) { return mu.density(x) * std::exp(-a * x); };
  auto n = static_cast<std::size_t>(std::ceil(s_max / k.step)) + 2;
  k.density = volterra(f, k.step, n);
  k.refined.push_back(volterra(f, 0.5 * k.step, 2 * n - 1));
  k.refined.push_back(volterra(f, 0.25 * k.step, 4 * n - 3));
  return k;
}

double mean_process(const RenewalKernel& k, const MeanFn& mean_fn, double t, double* error) {
  t = snap(k, t);
  if (error) *error = 0.0;
  if (t < 0.0) return 0.0;
  if (t > k.s_max * (1.0 + 1e-12)) throw DomainError("mean_process: t beyond the renewal kernel window");
  const double a = k.alpha;
  auto F = [&](double s) { return mean_fn(s) * std::exp(-a * s); };
  if (k.lattice()) {
    const double d = *k.lattice_span;
    double m = 0.0, mag = 0.0;
    std::size_t used = 0;
    for (std::size_t i = 0; i < k.lattice_mass.size() && static_cast<double>(i) * d <= t + 1e-9 * d; ++i, ++used) {
      double v = k.lattice_mass[i] * mean_fn(std::max(snap(k, t - static_cast<double>(i) * d), 0.0));
      m += v;
      mag += std::abs(v);
    }
    if (error) *error = 4e-16 * mag * static_cast<double>(used + 1);
    return m;
  }
  double y = 0.0, mag = 0.0;
  std::size_t used = 0;
  for (const Atom& at : k.atoms) {
    if (at.at > t) break;
    double v = at.mass * F(t - at.at);
    y += v;
    mag += std::abs(v);
    ++used;
  }
  double err = 4e-16 * mag * static_cast<double>(used + 1);
  if (!k.density.empty()) {
    // Trapezoid errors expand in even powers of the step.
    double c1 = convolve(k.density, k.step, F, t);
    double c2 = convolve(k.refined[0], 0.5 * k.step, F, t);
    double c4 = convolve(k.refined[1], 0.25 * k.step, F, t);
    double r1 = c2 + (c2 - c1) / 3.0, r2 = c4 + (c4 - c2) / 3.0;
    y += r2 + (r2 - r1) / 15.0;
    err += std::abs(r2 - r1);
  }
  double g = std::exp(a * t);
  if (error) *error = err * g;
  return y * g;
}

double adaptive_simpson(const std::function<double(double)>& f, double a, double b, double tol) {
  if (a == b) return 0.0;
  // Split in four so that features narrower than the interval are seen.
  double q = 0.25 * (b - a), s = 0.0;
  for (int i = 0; i < 4; ++i) {
    double lo = a + i * q, hi = lo + q, flo = f(lo), fhi = f(hi), fmid = f(0.5 * (lo + hi));
    s += simpson_rec(f, lo, hi, flo, fmid, fhi, q / 6.0 * (flo + 4 * fmid + fhi), 0.25 * tol, 40);
  }
  return s;
}

double key_renewal_limit(const RenewalKernel& k, const MeanFn& mean_fn, double lower) {
  const double a = k.alpha;
  auto F = [&](double x) { return mean_fn(x) * std::exp(-a * x); };
  double total = 0.0;
  if (k.lattice()) {
    const double d = *k.lattice_span;
    long long n = static_cast<long long>(std::ceil(lower / d - 1e-9));
    int quiet = 0;
    for (long long i = 0; i < 100'000'000; ++i, ++n) {
      double v = F(static_cast<double>(n) * d);
      total += v;
      quiet = std::abs(v) <= 1e-17 * std::abs(total) ? quiet + 1 : 0;
      if (quiet >= 20 && static_cast<double>(n) * d > 0.0) return d * total / k.beta;
    }
    throw NumericalError("key renewal sum does not converge");
  }
  double lo = lower, width = 1.0 / a;
  int quiet = 0;
  for (int chunk = 0; chunk < 200; ++chunk) {
    double v = adaptive_simpson(F, lo, lo + width, 1e-14 * std::max(1.0, std::abs(total)));
    total += v;
    lo += width;
    quiet = std::abs(v) <= 1e-15 * std::abs(total) ? quiet + 1 : 0;
    if (quiet >= 2 && lo > 0.0) return total / k.beta;
    if (chunk >= 8) width *= 2.0;
  }
  throw NumericalError("tilted mean is not integrable");
}

double h_lambda_mean(const MalthusianSolution& sol, double a_alpha, double t) {
  if (!sol.simple_alpha_only())
    throw UnsupportedRegime("E[H_Lambda] = a_alpha e^{alpha t} needs alpha to be the only root with Re >= alpha/2");
  return a_alpha * std::exp(sol.alpha * t);
}

MeanExpansion check_e1(const RenewalKernel& k, const MeanFn& mean_fn, double a_alpha,
                       const std::vector<double>& t_grid) {
  MeanExpansion out;
  out.a_alpha = a_alpha;
  std::vector<double> xs, ys;
  for (double t : t_grid) {
    double err = 0.0;
    double m = mean_process(k, mean_fn, t, &err);
    double r = m - a_alpha * std::exp(k.alpha * t);
    out.remainder_samples.push_back({t, r, err});
    // Below the numerical resolution r is indistinguishable from zero.
    if (std::abs(r) > 10.0 * err + 1e-300) {
      xs.push_back(t);
      ys.push_back(std::log(std::abs(r)));
      out.bound_constant = std::max(out.bound_constant, std::abs(r) * (1 + t * t) * std::exp(-0.5 * k.alpha * t));
    }
  }
  if (xs.size() < 2) {
    out.decay_exponent_fit = -kInf;
    out.passed = true;
    out.reason = "remainder below numerical resolution";
    return out;
  }
  out.decay_exponent_fit = least_squares_slope(xs, ys);
  out.passed = out.decay_exponent_fit < 0.5 * k.alpha;
  out.reason = out.passed ? "remainder grows slower than e^{alpha t/2}"
                          : "remainder grows at rate " + std::to_string(out.decay_exponent_fit) +
                                " >= alpha/2 = " + std::to_string(0.5 * k.alpha);
  return out;
}

MeanRemainder::MeanRemainder(const RenewalKernel& kernel, MeanFn mean_fn, double a_alpha, double t_max)
    : kernel_(&kernel), mean_fn_(std::move(mean_fn)), a_alpha_(a_alpha) {
  if (kernel.lattice()) return;
  if (t_max > kernel.s_max) throw DomainError("remainder table beyond the renewal kernel window");
  step_ = kernel.density.empty() ? 0.01 / kernel.alpha : kernel.step;
  auto n = static_cast<std::size_t>(std::ceil(t_max / step_)) + 3;
  n = std::min(n, static_cast<std::size_t>(std::floor(kernel.s_max / step_)) + 1);
  table_.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    double t = static_cast<double>(i) * step_;
    table_[i] = mean_process(kernel, mean_fn_, t) * std::exp(-kernel.alpha * t) - a_alpha_;
  }
}

double MeanRemainder::operator()(double t) const {
  const RenewalKernel& k = *kernel_;
  t = snap(k, t);
  if (t < 0.0) return -a_alpha_ * std::exp(k.alpha * t);
  if (k.lattice()) return mean_process(k, mean_fn_, t) - a_alpha_ * std::exp(k.alpha * t);
  double x = t / step_;
  auto i = static_cast<std::size_t>(x);
  if (i + 2 >= table_.size()) throw DomainError("remainder evaluated beyond its table");
  double w = x - static_cast<double>(i);
  // Catmull-Rom cubic; one-sided at the left end, where g may jump.
  double p0 = i > 0 ? table_[i - 1] : 2 * table_[0] - table_[1], p1 = table_[i], p2 = table_[i + 1],
         p3 = table_[i + 2];
  double v = p1 + 0.5 * w * (p2 - p0 + w * (2 * p0 - 5 * p1 + 4 * p2 - p3 + w * (3 * (p1 - p2) + p3 - p0)));
  return std::exp(k.alpha * t) * v;
}

SigmaResult sigma_squared(const BirthLaw& law, const CharacteristicPtr& phi, const MalthusianSolution& sol,
                          const RenewalKernel& kernel, const SigmaOptions& opts) {
  if (sol.boundary_roots_present || !sol.simple_alpha_only())
    throw UnsupportedRegime("sigma^2 is computed only when alpha is the only root with Re >= alpha/2");
  const double alpha = sol.alpha;
  auto mean_opt = phi->mean(0.0);
  if (!mean_opt) throw CapabilityError(phi->name() + " has no closed-form mean");
  MeanFn mean_fn = [phi](double t) { return *phi->mean(t); };

  SigmaResult out;
  out.a_alpha = key_renewal_limit(kernel, mean_fn);
  out.s_min = opts.s_min > 0.0 ? opts.s_min : 10.0 / alpha;
  out.s_max = opts.s_max > 0.0 ? opts.s_max : 12.0 / alpha;

  // Quadrature nodes and weights; the integrand jumps at s = 0, so the
  // non-lattice rule treats [-s_min, 0) and [0, s_max] separately.
  std::vector<double> nodes, weights;
  if (kernel.lattice()) {
    const double d = *kernel.lattice_span;
    out.step = d;
    auto lo = static_cast<long long>(std::ceil(out.s_min / d)), hi = static_cast<long long>(std::ceil(out.s_max / d));
    for (long long n = -lo; n <= hi; ++n) {
      double s = static_cast<double>(n) * d;
      nodes.push_back(s);
      weights.push_back(d * std::exp(-alpha * s));
    }
  } else {
    const double h = opts.step > 0.0 ? opts.step : 0.1 / alpha;
    out.step = h;
    auto nl = static_cast<long long>(std::ceil(out.s_min / h)), nr = static_cast<long long>(std::ceil(out.s_max / h));
    out.s_min = static_cast<double>(nl) * h;
    out.s_max = static_cast<double>(nr) * h;
    for (long long n = -nl; n <= 0; ++n) {
      double s = n == 0 ? -1e-9 : static_cast<double>(n) * h;
      nodes.push_back(s);
      weights.push_back((n == -nl || n == 0 ? 0.5 : 1.0) * h * std::exp(-alpha * s));
    }
    for (long long n = 0; n <= nr; ++n) {
      double s = static_cast<double>(n) * h;
      nodes.push_back(s);
      weights.push_back((n == 0 || n == nr ? 0.5 : 1.0) * h * std::exp(-alpha * s));
    }
  }

  const double t_max = out.s_max + (kernel.lattice() ? 0.0 : 4.0 * kernel.step);
  if (t_max > kernel.s_max) throw DomainError("renewal kernel window shorter than the sigma^2 grid");
  auto remainder = std::make_shared<MeanRemainder>(kernel, mean_fn, out.a_alpha, t_max);
  auto mu = std::make_shared<const IntensityData>(law);
  std::function<double(double)> g = [remainder](double t) { return (*remainder)(t); };
  // m solves m = E[phi] + mu * m, hence mu * g = g - E[phi] and E[psi] = g.
  CharacteristicPtr psi = shifted_characteristic(phi, g, mu, g);

  const int h = phi->depth();
  const bool finite = law.finite_offspring();
  double lookahead = 0.0;
  if (!finite) {
    // Births past the window contribute g(negative) ~ e^{alpha (s - x)}; their
    // variance decays at rate 2 alpha - b.
    double b = law.as<PoissonIntensity>()->b_exp;
    lookahead = std::log(1e8) / (2.0 * alpha - b);
  }

  out.grid.resize(nodes.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (std::size_t i = next++; i < nodes.size(); i = next++) {
      const double s = nodes[i];
      Rng rng = make_rng(opts.seed, Stream::sigma_grid, i);
      ProjectionOptions popts{opts.nested_mc_m, &rng};
      const double horizon = finite ? kInf : std::max(s, 0.0) + lookahead;
      double sum = 0.0, sum2 = 0.0;
      for (std::size_t j = 0; j < opts.samples_per_point; ++j) {
        Population pop(mu, TimeHorizon{horizon}, horizon);
        pop.add_root(draw_births(law, horizon, rng));
        grow_subtree(pop, 0, h, horizon, rng);
        double c = chi(*psi, pop, 0, s, popts).value;
        sum += c * c;
        sum2 += c * c * c * c;
      }
      double n = static_cast<double>(opts.samples_per_point);
      double m = sum / n;
      double var = n > 1 ? std::max(0.0, (sum2 - n * m * m) / (n - 1)) : 0.0;
      out.grid[i] = {s, m, std::sqrt(var / n), weights[i]};
    }
  };
  unsigned threads = std::max(1u, opts.threads);
  std::vector<std::thread> pool;
  for (unsigned w = 1; w < threads; ++w) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();

  double var = 0.0;
  for (const auto& p : out.grid) {
    out.sigma2 += p.weight * p.chi_sq_mean;
    var += p.weight * p.weight * p.chi_sq_se * p.chi_sq_se;
  }
  out.se = std::sqrt(var);
  // Geometric tails beyond both ends of the window.
  const double ratio = kernel.lattice() ? std::exp(-alpha * out.step) / (1.0 - std::exp(-alpha * out.step)) * out.step
                                        : 1.0 / alpha;
  const auto& first = out.grid.front();
  const auto& last = out.grid.back();
  out.truncation_error_bound = ratio * (first.chi_sq_mean * std::exp(-alpha * first.s) +
                                        last.chi_sq_mean * std::exp(-alpha * last.s));
  if (opts.max_relative_se > 0.0 && out.se > opts.max_relative_se * out.sigma2)
    throw ResourceError("sigma^2 standard error " + std::to_string(out.se) + " exceeds the requested " +
                        std::to_string(opts.max_relative_se) + " relative tolerance; raise samples_per_point");
  return out;
}

void write_sigma_csv(const SigmaResult& r, std::ostream& os) {
  os << "s,chi_sq_mean,chi_sq_se,weight\r\n";
  char buf[128];
  for (const auto& p : r.grid) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g\r\n", p.s, p.chi_sq_mean, p.chi_sq_se, p.weight);
    os << buf;
  }
}

std::string sigma_json(const SigmaResult& r) {
  nlohmann::ordered_json j;
  j["sigma2"] = r.sigma2;
  j["se"] = r.se;
  j["a_alpha"] = r.a_alpha;
  j["grid"] = {{"s_min", r.s_min}, {"s_max", r.s_max}, {"step", r.step}, {"points", r.grid.size()}};
  j["truncation_error_bound"] = r.truncation_error_bound;
  return j.dump(2);
}

StoneCheck stone_check_poisson(const RenewalKernel& k, double theta) {
  if (k.density.empty()) throw CapabilityError("Stone decomposition check needs a density kernel");
  StoneCheck c;
  c.theta = theta;
  const double target = 1.0 / k.beta;
  for (double u : k.density) c.max_density_error = std::max(c.max_density_error, std::abs(u - target));
  c.s1_holds = theta > 0.5 * k.alpha;
  return c;
}

}  // namespace cmj
