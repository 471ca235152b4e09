#include <doctest.h>

#include <cmath>
#include <functional>
#include <map>
#include <string>

#include "cmj/characteristics.hpp"
#include "cmj/error.hpp"
#include "cmj/spectral.hpp"

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

std::shared_ptr<const IntensityData> data_of(const BirthLaw& law) {
  return std::make_shared<const IntensityData>(intensity_data(law));
}

// Brute-force oracle for lattice Galton-Watson trees: a tree is a literal
// string, children listed in order. Enumerates every tree of height <= n with
// its probability.
using TreeDist = std::map<std::string, double>;

TreeDist all_trees(const std::vector<double>& p, int n) {
  if (n == 0) return {{"()", 1.0}};
  TreeDist sub = all_trees(p, n - 1), out;
  for (std::size_t d = 0; d < p.size(); ++d) {
    if (p[d] == 0.0) continue;
    TreeDist seqs{{"", p[d]}};
    for (std::size_t i = 0; i < d; ++i) {
      TreeDist next;
      for (const auto& [s, ps] : seqs)
        for (const auto& [c, pc] : sub) next[s + c] += ps * pc;
      seqs = std::move(next);
    }
    for (const auto& [s, ps] : seqs) out["(" + s + ")"] += ps;
  }
  return out;
}

// Splits "(AB...)" into its child literals.
std::vector<std::string> split_children(const std::string& t) {
  std::vector<std::string> out;
  int level = 0;
  std::size_t start = 1;
  for (std::size_t i = 1; i + 1 < t.size(); ++i) {
    level += t[i] == '(' ? 1 : -1;
    if (level == 0) {
      out.push_back(t.substr(start, i - start + 1));
      start = i + 1;
    }
  }
  return out;
}

std::string truncate(const std::string& t, int depth) {
  if (depth == 0) return "()";
  std::string out = "(";
  for (const auto& c : split_children(t)) out += truncate(c, depth - 1);
  return out + ")";
}

// Number of vertices u at depth j <= n whose subtree, cut at depth n - j,
// equals the pattern.
double count_matches(const std::string& t, int depth, int n, const std::string& pattern) {
  double c = truncate(t, n - depth) == pattern ? 1.0 : 0.0;
  if (depth < n)
    for (const auto& ch : split_children(t)) c += count_matches(ch, depth + 1, n, pattern);
  return c;
}

// Characteristic that forwards everything but hides its closed-form
// projections, forcing nested Monte Carlo.
class Opaque final : public Characteristic {
 public:
  explicit Opaque(CharacteristicPtr inner) : inner_(std::move(inner)) {}
  int depth() const override { return inner_->depth(); }
  std::string name() const override { return "opaque"; }
  double eval(const Population& pop, NodeId u, double t) const override { return inner_->eval(pop, u, t); }

 private:
  CharacteristicPtr inner_;
};

}  // namespace

TEST_CASE("pattern literals") {
  auto p = FringePattern::parse("(()(()))");
  CHECK(p.size() == 4);
  CHECK(p.height() == 2);
  CHECK(p.children(0).size() == 2);
  CHECK(p.str() == "(()(()))");
  CHECK(FringePattern::parse(" ( ) ").str() == "()");
  CHECK_THROWS_AS(FringePattern::parse("(()"), ConfigError);
  CHECK_THROWS_AS(FringePattern::parse("()()"), ConfigError);
  CHECK_THROWS_AS(FringePattern::parse("(x)"), ConfigError);
  CHECK_THROWS_AS(FringePattern::parse(""), ConfigError);

  auto all = FringePattern::enumerate(2, 2);
  CHECK(all.size() == 13);
  for (std::size_t i = 0; i < all.size(); ++i)
    for (std::size_t j = i + 1; j < all.size(); ++j) CHECK(!(all[i] == all[j]));
  CHECK(FringePattern::enumerate(0, 3).size() == 1);
  CHECK(FringePattern::enumerate(1, 3).size() == 4);
}

TEST_CASE("indicator counts births") {
  auto law = BirthLaw::poisson(1.0, 0);
  auto pop = simulate(law, TimeHorizon{4.0}, 11);
  auto one = indicator_characteristic();
  for (double t : {0.0, 1.0, 2.5, 4.0}) CHECK(counted_process(pop, *one, t) == pop.born_by(t));
  CHECK(counted_process(pop, *one, -1.0) == 0.0);
  CHECK_THROWS_AS(counted_process(pop, *one, 5.0), UndecidableError);
}

TEST_CASE("Nerman characteristic reproduces W_t") {
  for (const auto& law : {BirthLaw::poisson(1.0, 0), BirthLaw::galton_watson({0.1, 0.3, 0.6}),
                          BirthLaw::uniform_fragmentation(3), BirthLaw::poisson(2.0, -1)}) {
    auto mu = data_of(law);
    double a = solve_malthusian(*mu);
    auto phi = nerman_characteristic(mu, a);
    auto pop = simulate(law, TimeHorizon{5.0}, 12);
    for (double t : {0.5, 2.0, 3.7, 5.0}) {
      double w = nerman_w(pop, a, t);
      CHECK(std::exp(-a * t) * counted_process(pop, *phi, t) == doctest::Approx(w).epsilon(1e-12));
    }
  }
}

TEST_CASE("fringe counts on the binary tree") {
  auto law = BirthLaw::galton_watson({0, 0, 1});
  auto mu = data_of(law);
  auto pop = simulate(law, TimeHorizon{3.0}, 1);
  auto leaf = fringe_characteristic(FringePattern::parse("()"), mu);
  auto cherry = fringe_characteristic(FringePattern::parse("(()())"), mu);
  CHECK(counted_process(pop, *leaf, 3.0) == 8.0);
  CHECK(counted_process(pop, *cherry, 3.0) == 4.0);
  CHECK(counted_process(pop, *leaf, 2.5) == 4.0);
  // On a fixed tree chi is identically zero.
  ProjectionOptions o;
  CHECK(chi(*cherry, pop, 0, 3.0, o).value == 0.0);
}

TEST_CASE("leaves plus non-leaves equal the population size") {
  auto law = BirthLaw::poisson(1.0, 0);
  auto mu = data_of(law);
  auto leaf = fringe_characteristic(FringePattern::parse("()"), mu);
  auto one = indicator_characteristic();
  auto pop = simulate(law, TimeHorizon{5.0}, 21);
  double non_leaf = 0;
  for (std::size_t i = 0; i < pop.size(); ++i)
    if (pop.nodes()[i].born_by(5.0) > 0) non_leaf += 1;
  CHECK(counted_process(pop, *leaf, 5.0) + non_leaf == counted_process(pop, *one, 5.0));
}

TEST_CASE("leaf probabilities") {
  auto leaf = FringePattern::parse("()");
  auto pm = data_of(BirthLaw::poisson(1.0, 0));
  CHECK(*fringe_shape_probability(*pm, leaf, 0, 2.0) == doctest::Approx(std::exp(-2.0)));
  auto pm1 = data_of(BirthLaw::poisson(2.0, 1));
  CHECK(*fringe_shape_probability(*pm1, leaf, 0, 1.0) == doctest::Approx(std::exp(-2.0 * (std::exp(1.0) - 1.0))));
  // Uniform binary split: V1 ~ U(0,1) and max(V1, 1 - V1) < s has probability 2s - 1.
  auto u2 = data_of(BirthLaw::uniform_fragmentation(2));
  CHECK(*fringe_shape_probability(*u2, leaf, 0, 0.3) == doctest::Approx(2 * std::exp(-0.3) - 1));
  CHECK(*fringe_shape_probability(*u2, leaf, 0, 1.0) == 0.0);
  // Three pieces: compare with direct simulation.
  auto law3 = BirthLaw::uniform_fragmentation(3);
  auto u3 = data_of(law3);
  Rng rng(5);
  Moments m;
  for (int i = 0; i < 40000; ++i) m.add(draw_births(law3, INFINITY, rng).offsets.front() > 0.8 ? 1.0 : 0.0);
  CHECK(std::abs(m.mean() - *fringe_shape_probability(*u3, leaf, 0, 0.8)) <= 4 * m.se());
  CHECK(!fringe_shape_probability(*pm, FringePattern::parse("(())"), 0, 1.0));
  // Deterministic halving: children at ln 2.
  auto half = data_of(BirthLaw::fragmentation({0.5, 0.5}));
  auto cherry = FringePattern::parse("(()())");
  CHECK(*fringe_shape_probability(*half, cherry, 0, 1.0) == 1.0);
  CHECK(*fringe_shape_probability(*half, cherry, 0, 0.5) == 0.0);
  CHECK(*fringe_shape_probability(*half, leaf, 0, 0.5) == 1.0);
}

TEST_CASE("Galton-Watson fringe means against exhaustive enumeration") {
  const std::vector<double> p{0.3, 0.2, 0.5};
  auto law = BirthLaw::galton_watson(p);
  auto mu = data_of(law);
  const int n = 3;
  TreeDist trees = all_trees(p, n);
  double total = 0;
  for (const auto& [t, pt] : trees) total += pt;
  REQUIRE(total == doctest::Approx(1.0).epsilon(1e-12));
  const double m = 1.2;
  for (const auto& pattern : FringePattern::enumerate(2, 2)) {
    double exact = 0;
    for (const auto& [t, pt] : trees) exact += pt * count_matches(t, 0, n, pattern.str());
    // Renewal form: sum over generations j of m^j p(T, n - j).
    double renewal = 0;
    for (int j = 0; j <= n; ++j) renewal += std::pow(m, j) * *fringe_shape_probability(*mu, pattern, 0, n - j);
    CHECK(renewal == doctest::Approx(exact).epsilon(1e-12));
  }
  // Simulation against the enumeration for one pattern.
  auto pat = FringePattern::parse("(()())");
  auto phi = fringe_characteristic(pat, mu);
  double exact = 0;
  for (const auto& [t, pt] : trees) exact += pt * count_matches(t, 0, n, pat.str());
  Moments z;
  for (std::uint64_t r = 0; r < 20000; ++r)
    z.add(counted_process(simulate(law, TimeHorizon{3.0}, derive_seed(8, Stream::replica, r)), *phi, 3.0));
  CHECK(std::abs(z.mean() - exact) <= 4 * z.se());
}

TEST_CASE("projections") {
  auto law = BirthLaw::galton_watson({0.3, 0.2, 0.5});
  auto mu = data_of(law);
  auto pat = FringePattern::parse("((())())");
  auto phi = fringe_characteristic(pat, mu);
  REQUIRE(phi->depth() == 2);
  Opaque opaque(phi);

  // Find a tree whose root has two children, the first one with a child.
  for (std::uint64_t s = 0;; ++s) {
    auto pop = simulate(law, TimeHorizon{3.0}, s);
    const Node& root = pop.node(0);
    if (root.children.size() != 2 || pop.node(root.children[0]).children.empty()) continue;
    Rng rng(99);
    ProjectionOptions o{4000, &rng};
    for (int k = 0; k <= 2; ++k) {
      double exact = phi->project(pop, 0, k, 3.0, o).value;
      ProjectionValue mc = opaque.project(pop, 0, k, 3.0, o);
      CHECK(std::abs(mc.value - exact) <= 4 * mc.standard_error + 1e-12);
    }
    CHECK(phi->project(pop, 0, 3, 3.0).value == phi->eval(pop, 0, 3.0));
    ProjectionOptions off{0, nullptr};
    CHECK_THROWS_AS(opaque.project(pop, 0, 1, 3.0, off), CapabilityError);
    // chi with closed forms against chi with nested Monte Carlo.
    ProjectionValue c1 = chi(*phi, pop, 0, 3.0, o);
    ProjectionValue c2 = chi(opaque, pop, 0, 3.0, o);
    CHECK(c1.standard_error == 0.0);
    CHECK(std::abs(c1.value - c2.value) <= 4 * c2.standard_error + 1e-12);
    break;
  }
}

TEST_CASE("chi with h = 0 is phi minus its mean") {
  auto law = BirthLaw::poisson(1.0, 0);
  auto mu = data_of(law);
  auto leaf = fringe_characteristic(FringePattern::parse("()"), mu);
  auto pop = simulate(law, TimeHorizon{3.0}, 4);
  for (double s : {0.2, 1.0, 3.0}) {
    double expected = leaf->eval(pop, 0, s) - std::exp(-s);
    CHECK(chi(*leaf, pop, 0, s).value == doctest::Approx(expected).epsilon(1e-14));
  }
  auto f = deterministic_characteristic([](double t) { return std::exp(-t); }, "exp");
  CHECK(chi(*f, pop, 0, 1.3).value == 0.0);
}

TEST_CASE("chi has mean zero") {
  auto law = BirthLaw::galton_watson({0.3, 0.2, 0.5});
  auto mu = data_of(law);
  auto phi = fringe_characteristic(FringePattern::parse("(()())"), mu);
  Moments m;
  for (std::uint64_t r = 0; r < 20000; ++r) {
    auto pop = simulate(law, TimeHorizon{2.0}, derive_seed(9, Stream::replica, r));
    m.add(chi(*phi, pop, 0, 2.0).value);
  }
  CHECK(std::abs(m.mean()) <= 4 * m.se());

  auto ulaw = BirthLaw::uniform_fragmentation(2);
  auto uphi = fringe_characteristic(FringePattern::parse("()"), data_of(ulaw));
  Moments u;
  for (std::uint64_t r = 0; r < 20000; ++r) {
    auto pop = simulate(ulaw, TimeHorizon{0.4}, derive_seed(10, Stream::replica, r));
    u.add(chi(*uphi, pop, 0, 0.4).value);
  }
  CHECK(std::abs(u.mean()) <= 4 * u.se());
}

TEST_CASE("shifted characteristics") {
  auto law = BirthLaw::galton_watson({0.3, 0.2, 0.5});
  auto mu = data_of(law);
  auto pop = simulate(law, TimeHorizon{4.0}, 31);
  auto one = indicator_characteristic();
  auto same = shifted_characteristic(one, [](double) { return 0.0; }, mu);
  CHECK(counted_process(pop, *same, 3.0, 0.0) == counted_process(pop, *one, 3.0));
  CHECK(*same->mean(2.0) == 1.0);

  // Zero base with g = 1_{[0,inf)} counts the children born by time t.
  auto zero = deterministic_characteristic([](double) { return 0.0; }, "zero");
  auto step = [](double t) { return t >= 0.0 ? 1.0 : 0.0; };
  auto kids = shifted_characteristic(zero, step, mu);
  for (std::size_t i = 0; i < pop.size(); ++i) {
    const Node& n = pop.nodes()[i];
    CHECK(kids->eval(pop, static_cast<NodeId>(i), 3.5) == static_cast<double>(n.born_within(3.5 - n.birth_time)));
  }
  CHECK(*kids->mean(3.0) == doctest::Approx(1.2));
  CHECK(*kids->mean(0.5) == 0.0);
  CHECK_THROWS_AS(counted_process(pop, *kids, 3.0), UndecidableError);

  // Poisson intensity: mean of g * mu for g = 1_{[0,inf)} is Lambda(t).
  auto plaw = BirthLaw::poisson(1.0, 0);
  auto pmu = data_of(plaw);
  auto pk = shifted_characteristic(zero, step, pmu);
  CHECK(*pk->mean(2.0) == doctest::Approx(2.0).epsilon(1e-9));
  // Exponential g needs the tail beyond the sampled window.
  auto pexp = shifted_characteristic(zero, [](double t) { return t < 0 ? std::exp(2 * t) : 0.0; }, pmu);
  CHECK(*pexp->mean(0.0) == doctest::Approx(0.5).epsilon(1e-9));
  Moments m;
  Rng rng(4);
  for (int r = 0; r < 20000; ++r) {
    auto q = simulate(plaw, TimeHorizon{1.0}, rng);
    m.add(pexp->eval(q, 0, 1.0));
  }
  CHECK(std::abs(m.mean() - *pexp->mean(1.0)) <= 4 * m.se());
}
