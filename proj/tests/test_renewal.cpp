#include <doctest.h>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>
#include <sstream>

#include "cmj/error.hpp"
#include "cmj/renewal.hpp"

using namespace cmj;

namespace {

struct Moments {
  double sum = 0, sum2 = 0;
  int n = 0;
  void add(double x) {
    sum += x;
    sum2 += x * x;
    ++n;
  }
  double mean() const { return sum / n; }
  double se() const { return std::sqrt(std::max(0.0, sum2 / n - mean() * mean()) / n); }
};

struct Setup {
  BirthLaw law;
  std::shared_ptr<const IntensityData> mu;
  MalthusianSolution sol;
  RenewalKernel kernel;
};

Setup setup(const BirthLaw& law, double s_max) {
  auto mu = std::make_shared<const IntensityData>(law);
  auto sol = analyze(*mu);
  return {law, mu, sol, make_kernel(*mu, sol, s_max)};
}

const MeanFn one = [](double t) { return t >= 0.0 ? 1.0 : 0.0; };

}  // namespace

TEST_CASE("deterministic binary Galton-Watson: m_n = 2^{n+1} - 1") {
  auto s = setup(BirthLaw::galton_watson({0, 0, 1}), 30.0);
  REQUIRE(s.kernel.lattice());
  for (int n = 0; n <= 30; ++n) CHECK(mean_process(s.kernel, one, n) == std::ldexp(1.0, n + 1) - 1.0);
  CHECK(mean_process(s.kernel, one, 2.5) == 7.0);
  CHECK(mean_process(s.kernel, one, -0.5) == 0.0);
  CHECK(key_renewal_limit(s.kernel, one) == doctest::Approx(2.0).epsilon(1e-14));
  CHECK(s.kernel.c_alpha() / s.kernel.beta == doctest::Approx(2.0).epsilon(1e-14));
  CHECK_THROWS_AS(mean_process(s.kernel, one, 31.0), DomainError);

  // The same tree in continuous time: halving fragmentation on ln(2) Z.
  auto f = setup(BirthLaw::fragmentation({0.5, 0.5}), 20.0);
  REQUIRE(f.kernel.lattice());
  for (int n = 0; n <= 20; n += 5)
    CHECK(mean_process(f.kernel, one, n * std::log(2.0)) == doctest::Approx(std::ldexp(1.0, n + 1) - 1.0).epsilon(1e-13));
}

TEST_CASE("closed-form renewal measures for exponential tilts") {
  // Poisson(1, 0): e^{-alpha x} nu(dx) = delta_0 + dx, so m_t = e^t.
  auto p = setup(BirthLaw::poisson(1.0, 0), 12.0);
  for (double t : {0.0, 0.37, 1.0, 5.5, 10.0}) {
    double err = 0;
    double m = mean_process(p.kernel, one, t, &err);
    CHECK(m == doctest::Approx(std::exp(t)).epsilon(1e-10));
    CHECK(std::abs(m - std::exp(t)) <= err + 1e-12);
    CHECK(err <= 1e-8 * std::exp(t));
  }
  // Leaf indicator: E[phi](t) = e^{-t}, m_t = (e^t + e^{-t}) / 2.
  MeanFn leaf = [](double t) { return t >= 0.0 ? std::exp(-t) : 0.0; };
  for (double t : {0.5, 2.0, 8.0}) CHECK(mean_process(p.kernel, leaf, t) == doctest::Approx(std::cosh(t)).epsilon(1e-9));
  CHECK(key_renewal_limit(p.kernel, leaf) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(key_renewal_limit(p.kernel, one) == doctest::Approx(1.0 / (p.sol.alpha * p.sol.beta)).epsilon(1e-12));

  // Poisson(2, -1) and uniform binary splits share mu_alpha = 2 e^{-2x} dx,
  // so m_t = 2 e^t - 1.
  for (const auto& law : {BirthLaw::poisson(2.0, -1), BirthLaw::uniform_fragmentation(2)}) {
    auto s = setup(law, 10.0);
    CHECK(s.sol.alpha == doctest::Approx(1.0));
    for (double t : {0.25, 3.0, 9.0}) CHECK(mean_process(s.kernel, one, t) == doctest::Approx(2 * std::exp(t) - 1).epsilon(1e-9));
  }
}

TEST_CASE("mean process against simulated Z_t") {
  struct Case {
    BirthLaw law;
    double t;
  };
  std::vector<Case> cases{{BirthLaw::uniform_fragmentation(3), 3.0},
                          {BirthLaw::fragmentation({1.0 / 3, 2.0 / 3}), 4.0},
                          {BirthLaw::galton_watson({0.1, 0.3, 0.6}), 6.0},
                          {BirthLaw::poisson(2.0, 1), 0.8}};
  std::uint64_t seed = 0;
  for (const auto& c : cases) {
    auto s = setup(c.law, c.t + 1.0);
    double predicted = mean_process(s.kernel, one, c.t);
    Moments z;
    for (int r = 0; r < 4000; ++r)
      z.add(static_cast<double>(simulate(c.law, TimeHorizon{c.t}, derive_seed(20, Stream::replica, seed++)).born_by(c.t)));
    INFO(c.law.describe());
    CHECK(std::abs(z.mean() - predicted) <= 4 * z.se() + 1e-9 * predicted);
  }
}

TEST_CASE("elementary renewal theorem on lattices") {
  for (const auto& law : {BirthLaw::galton_watson({0.1, 0.3, 0.6}), BirthLaw::galton_watson({0.2, 0.2, 0.2, 0.2, 0.2}),
                          BirthLaw::galton_watson({0, 0, 1})}) {
    auto s = setup(law, 200.0);
    REQUIRE(s.kernel.atoms.size() == 201);
    CHECK(std::abs(s.kernel.atoms[200].mass * s.kernel.beta - 1.0) < 0.01);
    CHECK(std::abs(s.kernel.mu_alpha_mass - 1.0) < 1e-10);
  }
}

TEST_CASE("key renewal limit against an independent integrator") {
  auto s = setup(BirthLaw::uniform_fragmentation(2), 5.0);
  // Leaf of a uniform binary split: P(max(V, 1 - V) < e^{-t}) = (2 e^{-t} - 1)_+.
  MeanFn leaf = [](double t) { return t >= 0.0 ? std::max(0.0, 2 * std::exp(-t) - 1) : 0.0; };
  double a = s.sol.alpha;
  auto f = [&](double x) { return leaf(x) * std::exp(-a * x); };
  double ref = boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, 0.0, std::log(2.0), 15, 1e-15);
  CHECK(std::abs(key_renewal_limit(s.kernel, leaf) * s.sol.beta - ref) < 1e-8);
  // int_0^{ln 2} (2 e^{-2x} - e^{-x}) dx = 1/4.
  CHECK(ref == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(adaptive_simpson([](double x) { return std::sin(x); }, 0.0, M_PI, 1e-12) == doctest::Approx(2.0).epsilon(1e-11));
}

TEST_CASE("E[H_Lambda]") {
  auto s = setup(BirthLaw::poisson(1.0, 0), 5.0);
  CHECK(h_lambda_mean(s.sol, 0.5, 0.0) == 0.5);
  CHECK(h_lambda_mean(s.sol, 0.0, 3.0) == 0.0);
  CHECK(h_lambda_mean(s.sol, 0.5, 2.0) == doctest::Approx(0.5 * std::exp(2.0)));
  MalthusianSolution extra = s.sol;
  extra.roots.push_back({{0.8, 1.0}, 1, 0.0});
  CHECK_THROWS_AS(h_lambda_mean(extra, 0.5, 1.0), UnsupportedRegime);
}

TEST_CASE("E1 diagnostic") {
  auto p = setup(BirthLaw::poisson(1.0, 0), 8.0);
  MeanFn leaf = [](double t) { return t >= 0.0 ? std::exp(-t) : 0.0; };
  std::vector<double> grid{1, 2, 3, 4, 5, 6};
  auto good = check_e1(p.kernel, leaf, 0.5, grid);
  CHECK(good.passed);
  CHECK(good.decay_exponent_fit == doctest::Approx(-1.0).epsilon(0.05));
  CHECK(!check_e1(p.kernel, leaf, 0.55, grid).passed);

  auto g = setup(BirthLaw::galton_watson({0, 0, 1}), 25.0);
  std::vector<double> n{5, 10, 15, 20, 25};
  auto e = check_e1(g.kernel, one, 2.0, n);
  CHECK(e.passed);
  for (const auto& r : e.remainder_samples) CHECK(r.r == doctest::Approx(-1.0).epsilon(1e-6));
  CHECK(!check_e1(g.kernel, one, 2.2, n).passed);
}

TEST_CASE("tabulated remainder") {
  auto p = setup(BirthLaw::poisson(1.0, 0), 6.0);
  MeanFn leaf = [](double t) { return t >= 0.0 ? std::exp(-t) : 0.0; };
  MeanRemainder g(p.kernel, leaf, 0.5, 5.0);
  // g(t) = e^{-t} / 2 for t >= 0 and -e^t / 2 for t < 0.
  for (double t : {0.0, 0.123, 1.7, 4.9}) CHECK(g(t) == doctest::Approx(0.5 * std::exp(-t)).epsilon(1e-5));
  CHECK(g(-1.0) == doctest::Approx(-0.5 * std::exp(-1.0)));
  // E[phi + g * xi] = g because m solves the renewal equation.
  auto leaf_phi = fringe_characteristic(FringePattern::parse("()"), p.mu);
  auto psi = shifted_characteristic(leaf_phi, [&](double t) { return g(t); }, p.mu);
  for (double t : {0.3, 1.0, 2.5}) CHECK(*psi->mean(t) == doctest::Approx(g(t)).epsilon(1e-6));
}

TEST_CASE("sigma^2 for the Galton-Watson leaf characteristic") {
  const std::vector<double> p{0.1, 0.3, 0.6};
  auto law = BirthLaw::galton_watson(p);
  auto s = setup(law, 40.0);
  auto leaf = fringe_characteristic(FringePattern::parse("()"), s.mu);

  // Oracle: with h = 0, sigma^2 = sum_{s in Z} Var(phi(s) + N g(s - 1)) m^{-s}
  // where everything is a function of N; g(n) = m_n - a m^n from direct sums.
  const double m = 1.5;
  auto mean_phi = [&](int n) { return n < 0 ? 0.0 : (n == 0 ? 1.0 : p[0]); };
  double a = 0;
  for (int n = 0; n < 200; ++n) a += mean_phi(n) * std::pow(m, -n);
  auto g = [&](int n) {
    double mn = 0;
    for (int j = 0; j <= n; ++j) mn += std::pow(m, j) * mean_phi(n - j);
    return mn - a * std::pow(m, n);
  };
  double exact = 0;
  for (int sp = -80; sp <= 80; ++sp) {
    double e1 = 0, e2 = 0;
    for (int k = 0; k < 3; ++k) {
      double phi = sp < 0 ? 0.0 : (sp == 0 ? 1.0 : (k == 0 ? 1.0 : 0.0));
      double psi = phi + k * g(sp - 1);
      e1 += p[k] * psi;
      e2 += p[k] * psi * psi;
    }
    exact += (e2 - e1 * e1) * std::pow(m, -sp);
  }
  CHECK(a == doctest::Approx(1.2).epsilon(1e-12));
  CHECK(exact == doctest::Approx(1.2).epsilon(1e-9));

  SigmaOptions o;
  o.samples_per_point = 20000;
  o.seed = 5;
  auto r = sigma_squared(law, leaf, s.sol, s.kernel, o);
  CHECK(r.a_alpha == doctest::Approx(1.2).epsilon(1e-12));
  CHECK(std::abs(r.sigma2 - exact) <= 4 * r.se + r.truncation_error_bound);
  CHECK(r.truncation_error_bound < 1e-3);
  std::ostringstream csv;
  write_sigma_csv(r, csv);
  CHECK(csv.str().rfind("s,chi_sq_mean,chi_sq_se,weight\r\n", 0) == 0);
  CHECK(sigma_json(r).find("\"sigma2\"") != std::string::npos);
}

TEST_CASE("sigma^2 vanishes without randomness") {
  auto law = BirthLaw::galton_watson({0, 0, 1});
  auto s = setup(law, 40.0);
  auto f = deterministic_characteristic([](double t) { return std::exp(-t); }, "exp");
  SigmaOptions o;
  o.samples_per_point = 50;
  auto r = sigma_squared(law, f, s.sol, s.kernel, o);
  CHECK(r.sigma2 == doctest::Approx(0.0).scale(1.0).epsilon(1e-20));
  auto leaf = fringe_characteristic(FringePattern::parse("(()())"), s.mu);
  r = sigma_squared(law, leaf, s.sol, s.kernel, o);
  CHECK(r.sigma2 == doctest::Approx(0.0).scale(1.0).epsilon(1e-20));
}

TEST_CASE("sigma^2 is reproducible and thread-count invariant") {
  auto law = BirthLaw::poisson(1.0, 0);
  auto s = setup(law, 15.0);
  auto leaf = fringe_characteristic(FringePattern::parse("()"), s.mu);
  SigmaOptions o;
  o.samples_per_point = 200;
  o.seed = 9;
  auto r1 = sigma_squared(law, leaf, s.sol, s.kernel, o);
  o.threads = 3;
  auto r2 = sigma_squared(law, leaf, s.sol, s.kernel, o);
  CHECK(r1.sigma2 == r2.sigma2);
  CHECK(r1.sigma2 > 0);
  o.max_relative_se = 1e-6;
  CHECK_THROWS_AS(sigma_squared(law, leaf, s.sol, s.kernel, o), ResourceError);
}

TEST_CASE("Stone decomposition for Poisson intensities") {
  auto s = setup(BirthLaw::poisson(2.0, 1), 3.0);
  auto c = stone_check_poisson(s.kernel, s.sol.alpha);
  CHECK(c.s1_holds);
  CHECK(c.max_density_error < 1e-3);
  CHECK(!stone_check_poisson(s.kernel, 0.4 * s.sol.alpha).s1_holds);
}
