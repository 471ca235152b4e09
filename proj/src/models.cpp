#include "cmj/models.hpp"

#include <algorithm>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "cmj/error.hpp"

namespace cmj {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

double gw_mean(const GaltonWatson& gw) {
  double m = 0.0;
  for (std::size_t k = 0; k < gw.offspring.size(); ++k) m += static_cast<double>(k) * gw.offspring[k];
  return m;
}

void check_probability_vector(const std::vector<double>& p, const char* what) {
  if (p.empty()) throw ConfigError(std::string(what) + ": empty probability vector");
  double s = 0.0;
  for (double x : p) {
    if (!(x >= 0.0) || !std::isfinite(x)) throw ConfigError(std::string(what) + ": entries must be finite and non-negative");
    s += x;
  }
  if (std::abs(s - 1.0) > 1e-12) {
    std::ostringstream os;
    os.precision(17);
    os << what << ": entries sum to " << s << ", expected 1 +- 1e-12";
    throw ConfigError(os.str());
  }
}

void validate(const BirthLaw::Kind& kind) {
  std::visit(
      overloaded{
          [](const GaltonWatson& gw) {
            check_probability_vector(gw.offspring, "offspring distribution");
            double m = gw_mean(gw);
            if (!(m > 1.0)) {
              std::ostringstream os;
              os << "E[N] = " << m << " <= 1 (not supercritical)";
              throw AssumptionViolation("A.2", os.str());
            }
          },
          [](const Fragmentation& f) {
            std::visit(overloaded{
                           [](const DeterministicDislocation& d) {
                             if (d.masses.size() < 2) throw ConfigError("dislocation needs at least 2 pieces");
                             check_probability_vector(d.masses, "dislocation masses");
                             int positive = 0;
                             for (double v : d.masses) {
                               if (v == 1.0) throw AssumptionViolation("A1", "a piece of mass 1 puts a unit atom at 0");
                               if (v > 0.0) ++positive;
                             }
                             if (positive < 2)
                               throw AssumptionViolation("A.2", "fewer than two pieces of positive mass");
                           },
                           [](const UniformDislocation& u) {
                             if (u.pieces < 2) throw ConfigError("uniform dislocation needs at least 2 pieces");
                           }},
                       f.dislocation);
          },
          [](const PoissonIntensity& p) {
            if (!(p.a > 0.0) || !std::isfinite(p.a)) throw ConfigError("Poisson intensity: a must be positive");
            if (p.b_exp < -1 || p.b_exp > 1) throw ConfigError("Poisson intensity: b_exp must be -1, 0 or 1");
            if (p.b_exp != 0 && !(p.a > 1.0))
              throw ConfigError("Poisson intensity: a > 1 is required when b_exp = +-1");
          }},
      kind);
}

// Cumulative intensity Lambda(x) = int_0^x a e^{b s} ds and its inverse.
double poisson_cumulative(const PoissonIntensity& p, double x) {
  if (p.b_exp == 0) return p.a * x;
  if (p.b_exp == 1) return p.a * std::expm1(x);
  return -p.a * std::expm1(-x);
}

double poisson_inverse(const PoissonIntensity& p, double level) {
  if (p.b_exp == 0) return level / p.a;
  if (p.b_exp == 1) return std::log1p(level / p.a);
  if (level >= p.a) return kInf;
  return -std::log1p(-level / p.a);
}

// Appends Poisson points in (lo, hi] (hi may be +inf only when the mass is finite).
void poisson_points(const PoissonIntensity& p, double lo, double hi, std::vector<double>& out, Rng& rng) {
  double level = poisson_cumulative(p, lo);
  for (;;) {
    level += exponential1(rng);
    double x = poisson_inverse(p, level);
    if (!(x <= hi) || x == kInf) break;
    out.push_back(x);
  }
}

}  // namespace

BirthLaw::BirthLaw(Kind kind) : kind_(std::move(kind)) { validate(kind_); }

BirthLaw BirthLaw::galton_watson(std::vector<double> offspring) {
  return BirthLaw(GaltonWatson{std::move(offspring)});
}

BirthLaw BirthLaw::fragmentation(std::vector<double> masses) {
  return BirthLaw(Fragmentation{DeterministicDislocation{std::move(masses)}});
}

BirthLaw BirthLaw::uniform_fragmentation(int pieces) {
  return BirthLaw(Fragmentation{UniformDislocation{pieces}});
}

BirthLaw BirthLaw::poisson(double a, int b_exp) { return BirthLaw(PoissonIntensity{a, b_exp}); }

bool BirthLaw::finite_offspring() const noexcept {
  if (auto* p = as<PoissonIntensity>()) return p->b_exp < 0;
  return true;
}

std::string BirthLaw::describe() const {
  std::ostringstream os;
  os.precision(6);
  std::visit(overloaded{
                 [&](const GaltonWatson& gw) {
                   os << "GaltonWatson(p=[";
                   for (std::size_t k = 0; k < gw.offspring.size(); ++k) os << (k ? "," : "") << gw.offspring[k];
                   os << "])";
                 },
                 [&](const Fragmentation& f) {
                   if (auto* d = std::get_if<DeterministicDislocation>(&f.dislocation)) {
                     os << "Fragmentation(V=[";
                     for (std::size_t k = 0; k < d->masses.size(); ++k) os << (k ? "," : "") << d->masses[k];
                     os << "])";
                   } else {
                     os << "Fragmentation(uniform, b=" << std::get<UniformDislocation>(f.dislocation).pieces << ")";
                   }
                 },
                 [&](const PoissonIntensity& p) { os << "PoissonIntensity(a=" << p.a << ", b=" << p.b_exp << ")"; }},
             kind_);
  return os.str();
}

bool BirthDraw::complete() const noexcept { return limit == kInf; }

BirthDraw draw_births(const BirthLaw& law, double limit, Rng& rng) {
  BirthDraw d;
  std::visit(overloaded{
                 [&](const GaltonWatson& gw) {
                   double u = uniform01(rng);
                   std::size_t n = 0;
                   double c = gw.offspring[0];
                   while (u >= c && n + 1 < gw.offspring.size()) c += gw.offspring[++n];
                   d.offsets.assign(n, 1.0);
                   d.limit = kInf;
                 },
                 [&](const Fragmentation& f) {
                   if (auto* det = std::get_if<DeterministicDislocation>(&f.dislocation)) {
                     for (double v : det->masses)
                       if (v > 0.0) d.offsets.push_back(-std::log(v));
                   } else {
                     int b = std::get<UniformDislocation>(f.dislocation).pieces;
                     std::vector<double> e(static_cast<std::size_t>(b));
                     for (double& x : e) x = exponential1(rng);
                     double log_total = std::log(std::accumulate(e.begin(), e.end(), 0.0));
                     for (double x : e) d.offsets.push_back(std::max(0.0, log_total - std::log(x)));
                   }
                   std::stable_sort(d.offsets.begin(), d.offsets.end());
                   d.limit = kInf;
                 },
                 [&](const PoissonIntensity& p) {
                   if (p.b_exp < 0) {
                     poisson_points(p, 0.0, kInf, d.offsets, rng);
                     d.limit = kInf;
                   } else {
                     if (!(limit >= 0.0)) throw DomainError("draw limit must be non-negative");
                     poisson_points(p, 0.0, limit, d.offsets, rng);
                     d.limit = limit;
                   }
                 }},
             law.kind());
  return d;
}

void extend_births(const BirthLaw& law, BirthDraw& draw, double new_limit, Rng& rng) {
  if (draw.complete() || new_limit <= draw.limit) return;
  const auto* p = law.as<PoissonIntensity>();
  if (!p) throw CapabilityError("only Poisson draws can be extended");
  poisson_points(*p, draw.limit, new_limit, draw.offsets, rng);
  draw.limit = new_limit;
}

std::vector<double> sample_births(const BirthLaw& law, double horizon, Rng& rng) {
  if (!(horizon >= 0.0)) throw DomainError("sample_births: horizon must be non-negative");
  BirthDraw d = draw_births(law, horizon, rng);
  auto end = std::upper_bound(d.offsets.begin(), d.offsets.end(), horizon);
  d.offsets.erase(end, d.offsets.end());
  return std::move(d.offsets);
}

std::optional<double> common_lattice_span(const std::vector<double>& points) {
  std::vector<double> x;
  for (double p : points)
    if (p > 0.0) x.push_back(p);
  if (x.empty()) return std::nullopt;
  std::sort(x.begin(), x.end());
  const double base = x.front();
  // Express every ratio x_i / base as p_i / q_i by continued fractions.
  std::vector<std::pair<long long, long long>> fracs;
  long long lcm_q = 1;
  for (double xi : x) {
    double r = xi / base;
    long long h0 = 1, h1 = 0, k0 = 0, k1 = 1;  // convergents h/k
    double rem = r;
    bool found = false;
    for (int it = 0; it < 40; ++it) {
      double a = std::floor(rem);
      long long ai = static_cast<long long>(a);
      long long h2 = ai * h0 + h1, k2 = ai * k0 + k1;
      h1 = h0;
      h0 = h2;
      k1 = k0;
      k0 = k2;
      if (k0 > 1000) break;
      if (std::abs(r - static_cast<double>(h0) / static_cast<double>(k0)) <= 1e-11 * r) {
        found = true;
        break;
      }
      double frac = rem - a;
      if (frac < 1e-15) break;
      rem = 1.0 / frac;
    }
    if (!found) return std::nullopt;
    fracs.emplace_back(h0, k0);
    lcm_q = std::lcm(lcm_q, k0);
    if (lcm_q > 1000000) return std::nullopt;
  }
  long long g = 0;
  for (auto [p, q] : fracs) g = std::gcd(g, p * (lcm_q / q));
  return base * static_cast<double>(g) / static_cast<double>(lcm_q);
}

IntensityData::IntensityData(const BirthLaw& law) : law_(law) {
  std::visit(overloaded{
                 [&](const GaltonWatson& gw) {
                   double m = gw_mean(gw);
                   atoms_.push_back({1.0, m});
                   domain_lower_ = -kInf;
                   mu_mass_ = m;
                   lattice_span_ = 1.0;
                 },
                 [&](const Fragmentation& f) {
                   if (auto* det = std::get_if<DeterministicDislocation>(&f.dislocation)) {
                     std::vector<double> pts;
                     for (double v : det->masses)
                       if (v > 0.0) pts.push_back(-std::log(v));
                     std::sort(pts.begin(), pts.end());
                     for (double p : pts) {
                       if (!atoms_.empty() && atoms_.back().at == p)
                         atoms_.back().mass += 1.0;
                       else
                         atoms_.push_back({p, 1.0});
                     }
                     domain_lower_ = -kInf;
                     mu_mass_ = static_cast<double>(pts.size());
                     lattice_span_ = common_lattice_span(pts);
                   } else {
                     int b = std::get<UniformDislocation>(f.dislocation).pieces;
                     has_density_ = true;
                     domain_lower_ = -1.0;
                     mu_mass_ = b;
                   }
                 },
                 [&](const PoissonIntensity& p) {
                   has_density_ = true;
                   domain_lower_ = p.b_exp;
                   mu_mass_ = p.b_exp < 0 ? p.a : kInf;
                 }},
             law.kind());
}

IntensityData intensity_data(const BirthLaw& law) { return IntensityData(law); }

bool IntensityData::in_domain(std::complex<double> lambda) const noexcept {
  return lambda.real() > domain_lower_;
}

double IntensityData::mu_atom_at_zero() const noexcept {
  for (const Atom& a : atoms_)
    if (a.at == 0.0) return a.mass;
  return 0.0;
}

std::complex<double> IntensityData::laplace(std::complex<double> lambda) const {
  if (!in_domain(lambda)) {
    std::ostringstream os;
    os << "Laplace transform undefined at " << lambda << " (requires Re > " << domain_lower_ << ")";
    throw DomainError(os.str());
  }
  std::complex<double> s = 0.0;
  for (const Atom& a : atoms_) s += a.mass * std::exp(-lambda * a.at);
  if (const auto* p = law_.as<PoissonIntensity>()) {
    s += p->a / (lambda - static_cast<double>(p->b_exp));
  } else if (const auto* f = law_.as<Fragmentation>()) {
    if (const auto* u = std::get_if<UniformDislocation>(&f->dislocation)) {
      // b E[V^lambda] with V ~ Beta(1, b-1): b! / prod_{j=1}^{b-1} (lambda + j)
      std::complex<double> v = 1.0;
      for (int j = 1; j < u->pieces; ++j) v *= static_cast<double>(j + 1) / (lambda + static_cast<double>(j));
      s += v;
    }
  }
  return s;
}

double IntensityData::laplace(double lambda) const { return laplace(std::complex<double>(lambda, 0.0)).real(); }

std::complex<double> IntensityData::laplace_derivative(std::complex<double> lambda) const {
  if (!in_domain(lambda)) throw DomainError("Laplace derivative outside the convergence domain");
  std::complex<double> s = 0.0;
  for (const Atom& a : atoms_) s -= a.mass * a.at * std::exp(-lambda * a.at);
  if (const auto* p = law_.as<PoissonIntensity>()) {
    std::complex<double> d = lambda - static_cast<double>(p->b_exp);
    s -= p->a / (d * d);
  } else if (const auto* f = law_.as<Fragmentation>()) {
    if (const auto* u = std::get_if<UniformDislocation>(&f->dislocation)) {
      std::complex<double> v = 1.0, harmonic = 0.0;
      for (int j = 1; j < u->pieces; ++j) {
        v *= static_cast<double>(j + 1) / (lambda + static_cast<double>(j));
        harmonic += 1.0 / (lambda + static_cast<double>(j));
      }
      s -= v * harmonic;
    }
  }
  return s;
}

double IntensityData::laplace_derivative(double lambda) const {
  return laplace_derivative(std::complex<double>(lambda, 0.0)).real();
}

double IntensityData::density(double x) const {
  if (!has_density_ || x < 0.0) return 0.0;
  if (const auto* p = law_.as<PoissonIntensity>()) return p->a * std::exp(p->b_exp * x);
  int b = std::get<UniformDislocation>(law_.as<Fragmentation>()->dislocation).pieces;
  // Each piece has density (b-1)(1-e^{-x})^{b-2} e^{-x} for -log V.
  return b * (b - 1) * std::pow(-std::expm1(-x), b - 2) * std::exp(-x);
}

double IntensityData::mass_up_to(double t) const {
  if (t < 0.0) return 0.0;
  double s = 0.0;
  for (const Atom& a : atoms_)
    if (a.at <= t) s += a.mass;
  if (const auto* p = law_.as<PoissonIntensity>()) {
    s += poisson_cumulative(*p, t);
  } else if (has_density_) {
    int b = std::get<UniformDislocation>(law_.as<Fragmentation>()->dislocation).pieces;
    s += b * std::pow(-std::expm1(-t), b - 1);
  }
  return s;
}

double IntensityData::integrate(const std::function<double(double)>& f, double lo, double hi) const {
  double s = 0.0;
  for (const Atom& a : atoms_)
    if (a.at > lo && a.at <= hi) s += a.mass * f(a.at);
  if (has_density_) {
    double a = std::max(lo, 0.0);
    if (hi > a) {
      using boost::math::quadrature::gauss_kronrod;
      s += gauss_kronrod<double, 61>::integrate([&](double x) { return f(x) * density(x); }, a, hi, 15, 1e-13);
    }
  }
  return s;
}

std::complex<double> IntensityData::integrate_complex(const std::function<std::complex<double>(double)>& f,
                                                      double lo, double hi) const {
  double re = integrate([&](double x) { return f(x).real(); }, lo, hi);
  double im = integrate([&](double x) { return f(x).imag(); }, lo, hi);
  return {re, im};
}

std::complex<double> IntensityData::laplace_tail(std::complex<double> lambda, double lo) const {
  if (!in_domain(lambda)) throw DomainError("Laplace tail outside the convergence domain");
  if (lo < 0.0) return laplace(lambda);
  std::complex<double> s = 0.0;
  for (const Atom& a : atoms_)
    if (a.at > lo) s += a.mass * std::exp(-lambda * a.at);
  if (const auto* p = law_.as<PoissonIntensity>()) {
    std::complex<double> d = lambda - static_cast<double>(p->b_exp);
    s += p->a * std::exp(-d * lo) / d;
  } else if (has_density_) {
    s += integrate_complex([&](double x) { return std::exp(-lambda * x); }, lo, kInf);
  }
  return s;
}

std::complex<double> IntensityData::moment_tail(std::complex<double> lambda, double shift, double lo,
                                                int i) const {
  if (i < 0) throw DomainError("moment_tail: negative moment index");
  if (!in_domain(lambda)) throw DomainError("moment_tail outside the convergence domain");
  auto term = [&](double x) {
    std::complex<double> y = shift + x;
    return std::pow(y, i) * std::exp(-lambda * y);
  };
  std::complex<double> s = 0.0;
  for (const Atom& a : atoms_)
    if (a.at > lo) s += a.mass * term(a.at);
  if (const auto* p = law_.as<PoissonIntensity>()) {
    // a e^{-b shift} int_Y^inf y^i e^{-d y} dy with d = lambda - b, Y = shift + max(lo, 0),
    // via I_i = (Y^i e^{-dY} + i I_{i-1}) / d.
    std::complex<double> d = lambda - static_cast<double>(p->b_exp);
    double y0 = shift + std::max(lo, 0.0);
    std::complex<double> e = std::exp(-d * y0);
    std::complex<double> acc = e / d;
    for (int k = 1; k <= i; ++k) acc = (std::pow(y0, k) * e + static_cast<double>(k) * acc) / d;
    s += p->a * std::exp(-static_cast<double>(p->b_exp) * shift) * acc;
  } else if (has_density_) {
    s += integrate_complex(term, lo, kInf);
  }
  return s;
}

}  // namespace cmj
