#include "cmj/characteristics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "cmj/error.hpp"

namespace cmj {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::string label_string(const Population& pop, NodeId id) {
  std::ostringstream os;
  os << "node " << id << " (label ";
  auto lab = pop.label(id);
  if (lab.empty()) os << "root";
  for (std::size_t i = 0; i < lab.size(); ++i) os << (i ? "." : "") << lab[i];
  os << ")";
  return os.str();
}

void require_life_known(const Node& n, double t) {
  if (!n.life.complete() && n.birth_time + n.life.limit < t)
    throw UndecidableError("life sampled only up to local time " + std::to_string(n.life.limit));
}

// Copies the known part of u's subtree (lives of relative depth < k) into a
// fresh population and resamples everything from depth k down to depth h.
Population completion(const Population& pop, NodeId u, int k, int h, double t, Rng& rng) {
  const BirthLaw& law = pop.law();
  const Node& root = pop.node(u);
  Population out(pop.intensity_ptr(), TimeHorizon{t}, t);
  if (k == 0) {
    out.add_root(draw_births(law, t - root.birth_time, rng), root.birth_time);
    grow_subtree(out, 0, h, t, rng);
    return out;
  }
  out.add_root(root.life, root.birth_time);
  struct Item {
    NodeId src, dst;
    int depth;
  };
  std::vector<Item> stack{{u, 0, 0}};
  while (!stack.empty()) {
    Item it = stack.back();
    stack.pop_back();
    const Node& sv = pop.node(it.src);
    require_life_known(sv, t);
    std::size_t born = sv.born_by(t);
    for (std::size_t i = 0; i < born; ++i) {
      double s = sv.birth_time + sv.life.offsets[i];
      if (it.depth + 1 <= k - 1) {
        if (i >= sv.children.size()) throw UndecidableError("observed generation is not materialized");
        NodeId c = out.add_child(it.dst, i, pop.node(sv.children[i]).life);
        stack.push_back({sv.children[i], c, it.depth + 1});
      } else {
        NodeId c = out.add_child(it.dst, i, draw_births(law, t - s, rng));
        grow_subtree(out, c, h - k, t, rng);
      }
    }
  }
  return out;
}

class Indicator final : public Characteristic {
 public:
  int depth() const override { return 0; }
  std::string name() const override { return "indicator"; }
  double eval(const Population& pop, NodeId u, double t) const override {
    return t >= pop.node(u).birth_time ? 1.0 : 0.0;
  }
  std::optional<double> mean(double t) const override { return t >= 0.0 ? 1.0 : 0.0; }
};

class Nerman final : public Characteristic {
 public:
  Nerman(std::shared_ptr<const IntensityData> mu, double alpha) : mu_(std::move(mu)), alpha_(alpha) {}
  int depth() const override { return 0; }
  bool causal() const override { return false; }
  std::string name() const override { return "nerman"; }
  double eval(const Population& pop, NodeId u, double t) const override {
    const Node& n = pop.node(u);
    if (t < n.birth_time) return 0.0;
    require_life_known(n, t);
    double s = 0.0;
    for (std::size_t k = n.born_by(t); k < n.life.offsets.size(); ++k)
      s += std::exp(-alpha_ * (n.birth_time + n.life.offsets[k] - t));
    if (!n.life.complete())
      s += std::exp(-alpha_ * (n.birth_time - t)) * mu_->laplace_tail(alpha_, n.life.limit).real();
    return s;
  }
  std::optional<double> mean(double t) const override {
    if (t < 0.0) return 0.0;
    return std::exp(alpha_ * t) * mu_->laplace_tail(alpha_, t).real();
  }

 private:
  std::shared_ptr<const IntensityData> mu_;
  double alpha_;
};

class Fringe final : public Characteristic {
 public:
  Fringe(FringePattern p, std::shared_ptr<const IntensityData> mu) : pattern_(std::move(p)), mu_(std::move(mu)) {}
  int depth() const override { return pattern_.height(); }
  std::string name() const override { return "fringe" + pattern_.str(); }

  double eval(const Population& pop, NodeId u, double t) const override {
    if (t < pop.node(u).birth_time) return 0.0;
    return match(pop, u, 0, t) ? 1.0 : 0.0;
  }
  std::optional<double> mean(double t) const override {
    if (t < 0.0) return 0.0;
    return fringe_shape_probability(*mu_, pattern_, 0, t);
  }
  std::optional<double> analytic_projection(const Population& pop, NodeId u, int k, double t) const override {
    if (t < pop.node(u).birth_time) return 0.0;
    return partial(pop, u, 0, 0, k, t);
  }

 private:
  bool match(const Population& pop, NodeId v, int pv, double t) const {
    const Node& n = pop.node(v);
    require_life_known(n, t);
    const auto& pc = pattern_.children(pv);
    std::size_t c = n.born_by(t);
    if (c != pc.size()) return false;
    for (std::size_t i = 0; i < c; ++i) {
      if (i >= n.children.size()) throw UndecidableError("descendant born by the evaluation time is not materialized");
      if (!match(pop, n.children[i], pc[i], t)) return false;
    }
    return true;
  }

  // Conditional probability of a match given lives of relative depth < k.
  std::optional<double> partial(const Population& pop, NodeId v, int pv, int d, int k, double t) const {
    const Node& n = pop.node(v);
    require_life_known(n, t);
    const auto& pc = pattern_.children(pv);
    std::size_t c = n.born_by(t);
    if (c != pc.size()) return 0.0;
    double prod = 1.0;
    for (std::size_t i = 0; i < c && prod > 0.0; ++i) {
      std::optional<double> p;
      if (d + 1 < k) {
        if (i >= n.children.size()) throw UndecidableError("observed generation is not materialized");
        p = partial(pop, n.children[i], pc[i], d + 1, k, t);
      } else {
        p = fringe_shape_probability(*mu_, pattern_, pc[i], t - (n.birth_time + n.life.offsets[i]));
      }
      if (!p) return std::nullopt;
      prod *= *p;
    }
    return prod;
  }

  FringePattern pattern_;
  std::shared_ptr<const IntensityData> mu_;
};

class Deterministic final : public Characteristic {
 public:
  Deterministic(std::function<double(double)> f, std::string name, bool vanishes)
      : f_(std::move(f)), name_(std::move(name)), vanishes_(vanishes) {}
  int depth() const override { return 0; }
  bool vanishes_on_negative() const override { return vanishes_; }
  std::string name() const override { return name_; }
  double eval(const Population& pop, NodeId u, double t) const override { return value(t - pop.node(u).birth_time); }
  std::optional<double> mean(double t) const override { return value(t); }

 private:
  double value(double t) const { return (vanishes_ && t < 0.0) ? 0.0 : f_(t); }
  std::function<double(double)> f_;
  std::string name_;
  bool vanishes_;
};

class Shifted final : public Characteristic {
 public:
  Shifted(CharacteristicPtr base, std::function<double(double)> g, std::shared_ptr<const IntensityData> mu,
          std::function<double(double)> mean)
      : base_(std::move(base)), g_(std::move(g)), mu_(std::move(mu)), mean_(std::move(mean)) {}
  int depth() const override { return base_->depth(); }
  bool vanishes_on_negative() const override { return false; }
  bool causal() const override { return false; }
  std::string name() const override { return base_->name() + "+g*xi"; }

  double eval(const Population& pop, NodeId u, double t) const override {
    return base_->eval(pop, u, t) + own(pop.node(u), t);
  }
  std::optional<double> mean(double t) const override {
    if (mean_) return mean_(t);
    auto m = base_->mean(t);
    if (!m) return std::nullopt;
    auto f = [&](double x) { return g_(t - x); };
    // Split at the kink of g at 0.
    double conv = mu_->integrate(f, -1.0, std::max(t, 0.0)) + mu_->integrate(f, std::max(t, 0.0), kInf);
    return *m + conv;
  }
  ProjectionValue project(const Population& pop, NodeId u, int k, double t,
                          const ProjectionOptions& opts) const override {
    if (k < 0) throw DomainError("projection order must be non-negative");
    const Node& n = pop.node(u);
    if (k == 0) {
      auto m = mean(t - n.birth_time);
      if (m) return {*m, 0.0};
      ProjectionValue b = base_->project(pop, u, 0, t, opts);
      auto f = [&](double x) { return g_(t - n.birth_time - x); };
      double local = std::max(t - n.birth_time, 0.0);
      return {b.value + mu_->integrate(f, -1.0, local) + mu_->integrate(f, local, kInf), b.standard_error};
    }
    ProjectionValue b = base_->project(pop, u, k, t, opts);
    return {b.value + own(n, t), b.standard_error};
  }

 private:
  // g * xi_u evaluated at local time t - S(u), over all of u's births.
  double own(const Node& n, double t) const {
    double local = t - n.birth_time, s = 0.0;
    for (double x : n.life.offsets) s += g_(local - x);
    if (!n.life.complete()) s += mu_->integrate([&](double x) { return g_(local - x); }, n.life.limit, kInf);
    return s;
  }

  CharacteristicPtr base_;
  std::function<double(double)> g_;
  std::shared_ptr<const IntensityData> mu_;
  std::function<double(double)> mean_;
};

}  // namespace

FringePattern FringePattern::parse(std::string_view text) {
  FringePattern p;
  std::vector<int> stack;
  bool closed_root = false;
  for (char ch : text) {
    if (std::isspace(static_cast<unsigned char>(ch))) continue;
    if (closed_root) throw ConfigError("fringe pattern: trailing characters after the root");
    if (ch == '(') {
      int id = static_cast<int>(p.children_.size());
      p.children_.emplace_back();
      if (!stack.empty()) p.children_[static_cast<std::size_t>(stack.back())].push_back(id);
      stack.push_back(id);
    } else if (ch == ')') {
      if (stack.empty()) throw ConfigError("fringe pattern: unbalanced ')'");
      stack.pop_back();
      if (stack.empty()) closed_root = true;
    } else {
      throw ConfigError(std::string("fringe pattern: unexpected character '") + ch + "'");
    }
  }
  if (!closed_root) throw ConfigError("fringe pattern: unbalanced or empty literal");
  return p;
}

int FringePattern::height_from(int v) const {
  int h = 0;
  for (int c : children(v)) h = std::max(h, 1 + height_from(c));
  return h;
}

std::string FringePattern::str() const {
  std::string out;
  auto rec = [&](auto&& self, int v) -> void {
    out += '(';
    for (int c : children(v)) self(self, c);
    out += ')';
  };
  rec(rec, 0);
  return out;
}

std::vector<FringePattern> FringePattern::enumerate(int max_height, int max_degree) {
  // Literals of all trees with height <= h, built bottom up.
  std::vector<std::string> level{"()"};
  for (int h = 1; h <= max_height; ++h) {
    std::vector<std::string> next{"()"};
    std::vector<std::string> seqs{""};
    for (int d = 1; d <= max_degree; ++d) {
      std::vector<std::string> longer;
      for (const auto& s : seqs)
        for (const auto& c : level) longer.push_back(s + c);
      for (const auto& s : longer) next.push_back("(" + s + ")");
      seqs = std::move(longer);
    }
    level = std::move(next);
  }
  std::vector<FringePattern> out;
  for (const auto& s : level) out.push_back(parse(s));
  return out;
}

ProjectionValue Characteristic::project(const Population& pop, NodeId u, int k, double t,
                                        const ProjectionOptions& opts) const {
  if (k < 0) throw DomainError("projection order must be non-negative");
  const int h = depth();
  if (k >= h + 1) return {eval(pop, u, t), 0.0};
  const double local = t - pop.node(u).birth_time;
  if (vanishes_on_negative() && local < 0.0) return {0.0, 0.0};
  if (k == 0) {
    if (auto m = mean(local)) return {*m, 0.0};
  } else if (auto a = analytic_projection(pop, u, k, t)) {
    return {*a, 0.0};
  }
  if (!causal()) throw CapabilityError(name() + ": no closed-form projection and not causal, nested Monte Carlo impossible");
  if (opts.nested_mc_m <= 0 || !opts.rng)
    throw CapabilityError(name() + ": no closed-form projection of order " + std::to_string(k) +
                          " and nested Monte Carlo is disabled");
  double s = 0.0, s2 = 0.0;
  const int m = opts.nested_mc_m;
  for (int j = 0; j < m; ++j) {
    Population c = completion(pop, u, k, h, t, *opts.rng);
    double v = eval(c, 0, t);
    s += v;
    s2 += v * v;
  }
  double mean_v = s / m;
  double var = m > 1 ? std::max(0.0, (s2 - m * mean_v * mean_v) / (m - 1)) : 0.0;
  return {mean_v, std::sqrt(var / m)};
}

double counted_process(const Population& pop, const Characteristic& phi, double t, std::optional<double> support) {
  double reach = t;
  if (!phi.vanishes_on_negative()) {
    if (!support)
      throw UndecidableError(phi.name() + " does not vanish on the negative half-line; a support bound is required");
    reach = t + *support;
  }
  pop.require_known(reach);
  double sum = 0.0;
  for (std::size_t i = 0; i < pop.size(); ++i) {
    if (pop.nodes()[i].birth_time > reach) continue;
    try {
      sum += phi.eval(pop, static_cast<NodeId>(i), t);
    } catch (const UndecidableError& e) {
      throw UndecidableError(phi.name() + " at " + label_string(pop, static_cast<NodeId>(i)) + ": " + e.what());
    }
  }
  return sum;
}

ProjectionValue chi(const Characteristic& phi, const Population& pop, NodeId u, double s,
                    const ProjectionOptions& opts) {
  const int h = phi.depth();
  const double t = pop.node(u).birth_time + s;
  const bool vanishing = phi.vanishes_on_negative();
  struct Item {
    NodeId id;
    int depth;
  };
  std::vector<Item> stack{{u, 0}};
  double value = 0.0, var = 0.0;
  while (!stack.empty()) {
    Item it = stack.back();
    stack.pop_back();
    const Node& n = pop.node(it.id);
    if (vanishing && n.birth_time > t) continue;
    if (it.depth < h) {
      // Characteristics that do not vanish on negatives read descendants born
      // after t as well; those past the population horizon are neglected.
      std::size_t needed = n.born_by(vanishing ? t : pop.horizon());
      if (n.children.size() < needed)
        throw UndecidableError("chi needs every descendant within " + std::to_string(h) + " generations");
      for (std::size_t i = 0; i < needed; ++i) stack.push_back({n.children[i], it.depth + 1});
    }
    ProjectionValue a = phi.project(pop, it.id, h + 1 - it.depth, t, opts);
    ProjectionValue b = phi.project(pop, it.id, h - it.depth, t, opts);
    value += a.value - b.value;
    var += a.standard_error * a.standard_error + b.standard_error * b.standard_error;
  }
  return {value, std::sqrt(var)};
}

CharacteristicPtr indicator_characteristic() { return std::make_shared<Indicator>(); }

CharacteristicPtr nerman_characteristic(std::shared_ptr<const IntensityData> mu, double alpha) {
  return std::make_shared<Nerman>(std::move(mu), alpha);
}

CharacteristicPtr fringe_characteristic(const FringePattern& pattern, std::shared_ptr<const IntensityData> mu) {
  return std::make_shared<Fringe>(pattern, std::move(mu));
}

CharacteristicPtr deterministic_characteristic(std::function<double(double)> f, std::string name,
                                               bool vanishes_on_negative) {
  return std::make_shared<Deterministic>(std::move(f), std::move(name), vanishes_on_negative);
}

CharacteristicPtr shifted_characteristic(CharacteristicPtr base, std::function<double(double)> g,
                                         std::shared_ptr<const IntensityData> mu, std::function<double(double)> mean) {
  return std::make_shared<Shifted>(std::move(base), std::move(g), std::move(mu), std::move(mean));
}

std::optional<double> fringe_shape_probability(const IntensityData& mu, const FringePattern& pattern, int v,
                                               double r) {
  if (r < 0.0) return 0.0;
  const auto& pc = pattern.children(v);
  const BirthLaw& law = mu.law();
  if (const auto* gw = law.as<GaltonWatson>()) {
    if (r < 1.0) return pc.empty() ? 1.0 : 0.0;
    if (pc.size() >= gw->offspring.size()) return 0.0;
    double p = gw->offspring[pc.size()];
    for (int c : pc) {
      if (p == 0.0) break;
      p *= *fringe_shape_probability(mu, pattern, c, r - 1.0);
    }
    return p;
  }
  if (const auto* f = law.as<Fragmentation>()) {
    if (const auto* det = std::get_if<DeterministicDislocation>(&f->dislocation)) {
      std::vector<double> x;
      for (double m : det->masses)
        if (m > 0.0) x.push_back(-std::log(m));
      std::sort(x.begin(), x.end());
      std::size_t born = static_cast<std::size_t>(std::upper_bound(x.begin(), x.end(), r) - x.begin());
      if (born != pc.size()) return 0.0;
      double p = 1.0;
      for (std::size_t i = 0; i < born && p > 0.0; ++i) p *= *fringe_shape_probability(mu, pattern, pc[i], r - x[i]);
      return p;
    }
    if (!pc.empty()) return std::nullopt;
    // Leaf: every V_i < e^{-r}. For Dirichlet(1,...,1),
    // P(max V < s) = sum_j (-1)^j C(b,j) (1 - j s)_+^{b-1}.
    int b = std::get<UniformDislocation>(f->dislocation).pieces;
    double s = std::exp(-r), p = 0.0, binom = 1.0;
    for (int j = 0; j <= b; ++j) {
      double base = 1.0 - j * s;
      if (base > 0.0) p += ((j % 2) ? -binom : binom) * std::pow(base, b - 1);
      binom = binom * (b - j) / (j + 1);
    }
    return std::clamp(p, 0.0, 1.0);
  }
  if (!pc.empty()) return std::nullopt;
  return std::exp(-mu.mass_up_to(r));
}

}  // namespace cmj
