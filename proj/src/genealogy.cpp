#include "cmj/genealogy.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <ostream>
#include <queue>
#include <sstream>

#include "cmj/error.hpp"
#include "cmj/spectral.hpp"

namespace cmj {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct Event {
  double time;
  int kind;  // 0 = birth, 1 = extend the parent's life
  NodeId parent;
  std::size_t index;
};

struct Later {
  bool operator()(const Event& a, const Event& b) const {
    if (a.time != b.time) return a.time > b.time;
    if (a.kind != b.kind) return a.kind < b.kind;  // extensions first
    if (a.parent != b.parent) return a.parent > b.parent;
    return a.index > b.index;
  }
};

using EventQueue = std::priority_queue<Event, std::vector<Event>, Later>;

std::string undecidable_message(double t, double horizon) {
  std::ostringstream os;
  os.precision(17);
  os << "time " << t << " lies beyond the simulated horizon " << horizon;
  return os.str();
}

}  // namespace

std::size_t Node::born_within(double t) const {
  return static_cast<std::size_t>(std::upper_bound(life.offsets.begin(), life.offsets.end(), t) -
                                  life.offsets.begin());
}

std::size_t Node::born_by(double t) const {
  auto it = std::upper_bound(life.offsets.begin(), life.offsets.end(), t,
                             [&](double tt, double x) { return tt < birth_time + x; });
  return static_cast<std::size_t>(it - life.offsets.begin());
}

Population::Population(std::shared_ptr<const IntensityData> intensity, StopRule stop, double horizon,
                       std::optional<int> max_generation)
    : intensity_(std::move(intensity)), stop_(stop), horizon_(horizon), max_generation_(max_generation) {}

NodeId Population::add_root(BirthDraw life, double birth_time) {
  if (!nodes_.empty()) throw ConfigError("population already has a root");
  Node n;
  n.birth_time = birth_time;
  n.life = std::move(life);
  nodes_.push_back(std::move(n));
  return 0;
}

NodeId Population::add_child(NodeId parent, std::size_t index, BirthDraw life) {
  Node& p = nodes_.at(static_cast<std::size_t>(parent));
  if (index != p.children.size()) throw ConfigError("children must be materialized in birth order");
  if (index >= p.life.offsets.size()) throw ConfigError("child index beyond the parent's sampled births");
  Node n;
  n.birth_time = p.birth_time + p.life.offsets[index];
  n.parent = parent;
  n.generation = p.generation + 1;
  n.rank = static_cast<int>(index) + 1;
  n.life = std::move(life);
  auto id = static_cast<NodeId>(nodes_.size());
  p.children.push_back(id);
  nodes_.push_back(std::move(n));
  return id;
}

std::size_t Population::born_by(double t) const {
  std::size_t c = 0;
  for (const Node& n : nodes_)
    if (n.birth_time <= t) ++c;
  return c;
}

std::vector<int> Population::label(NodeId id) const {
  std::vector<int> path;
  while (id > 0) {
    const Node& n = node(id);
    path.push_back(n.rank);
    id = n.parent;
  }
  std::reverse(path.begin(), path.end());
  return path;
}

void Population::require_known(double t) const {
  if (t > horizon_) throw UndecidableError(undecidable_message(t, horizon_));
  if (!max_generation_) return;
  for (const Node& n : nodes_) {
    if (n.generation == *max_generation_ && !n.life.offsets.empty() && n.birth_time + n.life.offsets[0] <= t) {
      std::ostringstream os;
      os << "births of generation " << *max_generation_ + 1 << " before time " << t << " are not materialized";
      throw UndecidableError(os.str());
    }
  }
}

void Population::write_csv(std::ostream& os) const {
  os << "node_id,parent_id,birth_time,child_rank\r\n";
  char buf[64];
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    const Node& n = nodes_[i];
    std::snprintf(buf, sizeof buf, "%.17g", n.birth_time);
    os << i << ',';
    if (n.parent >= 0) os << n.parent;
    os << ',' << buf << ',' << n.rank << "\r\n";
  }
}

double default_lookahead(const BirthLaw& law) {
  if (law.finite_offspring()) return 0.0;
  IntensityData d(law);
  double alpha = solve_malthusian(d);
  double b = law.as<PoissonIntensity>()->b_exp;
  return std::log(1e6) / (alpha - b);
}

Population simulate(const BirthLaw& law, const StopRule& stop, Rng& rng, const SimOptions& opts) {
  auto intensity = std::make_shared<const IntensityData>(law);
  const bool finite = law.finite_offspring();
  const double lookahead = finite ? 0.0 : (opts.lookahead >= 0.0 ? opts.lookahead : default_lookahead(law));
  const auto* horizon_rule = std::get_if<TimeHorizon>(&stop);
  const auto* weight_rule = std::get_if<WeightThreshold>(&stop);

  double horizon = kInf;
  if (horizon_rule) {
    horizon = horizon_rule->t;
    if (!(horizon >= 0.0)) throw ConfigError("time horizon must be non-negative");
    if (horizon == kInf && (!opts.max_generation || !finite))
      throw ConfigError("an infinite time horizon needs max_generation and a law with finitely many children");
  } else if (weight_rule->n < 1) {
    throw ConfigError("weight threshold must be at least 1");
  }

  Population pop(intensity, stop, horizon, opts.max_generation);
  // Local sampling window of a node born at s. Under a weight threshold the
  // window grows in chunks through extension events.
  const double chunk = finite ? kInf : std::max(1.0, lookahead);
  auto window = [&](double s) { return horizon_rule ? horizon - s + lookahead : chunk; };

  EventQueue queue;
  auto schedule = [&](NodeId id, std::size_t first) {
    const Node& n = pop.node(id);
    if (opts.max_generation && n.generation >= *opts.max_generation) return;
    for (std::size_t i = first; i < n.life.offsets.size(); ++i) {
      double t = n.birth_time + n.life.offsets[i];
      if (t > horizon) break;
      queue.push({t, 0, id, i});
    }
    if (weight_rule && !n.life.complete()) queue.push({n.birth_time + n.life.limit, 1, id, 0});
  };

  pop.add_root(draw_births(law, window(0.0), rng));
  schedule(0, 0);
  std::optional<double> tau;
  if (weight_rule && weight_rule->n == 1) tau = 0.0;

  while (!queue.empty()) {
    Event ev = queue.top();
    if (tau && ev.time > *tau) break;
    queue.pop();
    if (ev.kind == 1) {
      Node& n = pop.nodes()[static_cast<std::size_t>(ev.parent)];
      std::size_t before = n.life.offsets.size();
      extend_births(law, n.life, n.life.limit + chunk, rng);
      schedule(ev.parent, before);
      continue;
    }
    if (pop.size() >= opts.node_cap) {
      std::ostringstream os;
      os << "node cap of " << opts.node_cap << " exceeded at time " << ev.time;
      throw ResourceError(os.str());
    }
    NodeId id = pop.add_child(ev.parent, ev.index, draw_births(law, window(ev.time), rng));
    schedule(id, 0);
    if (weight_rule && !tau && pop.size() == weight_rule->n) tau = ev.time;
  }

  if (weight_rule) {
    // Extinct before reaching n births: everything that will ever happen is known.
    pop.set_horizon(tau ? *tau : kInf);
    if (!finite) {
      for (Node& n : pop.nodes()) extend_births(law, n.life, *tau - n.birth_time + lookahead, rng);
    }
  }
  return pop;
}

Population simulate(const BirthLaw& law, const StopRule& stop, std::uint64_t seed, const SimOptions& opts) {
  Rng rng(seed);
  Population p = simulate(law, stop, rng, opts);
  p.seed = seed;
  return p;
}

void grow_subtree(Population& pop, NodeId v, int depth, double until, Rng& rng) {
  if (depth <= 0) return;
  const BirthLaw& law = pop.law();
  std::size_t first = pop.node(v).children.size();
  for (std::size_t i = first;; ++i) {
    const Node& n = pop.node(v);
    if (i >= n.life.offsets.size() || n.birth_time + n.life.offsets[i] > until) break;
    double s = n.birth_time + n.life.offsets[i];
    NodeId c = pop.add_child(v, i, draw_births(law, until - s, rng));
    grow_subtree(pop, c, depth - 1, until, rng);
  }
}

std::vector<ComingMember> coming_generation(const Population& pop, double t) {
  std::vector<ComingMember> out;
  if (t < 0.0) return out;
  pop.require_known(t);
  for (std::size_t i = 0; i < pop.size(); ++i) {
    const Node& n = pop.nodes()[i];
    if (n.birth_time > t) continue;
    const auto& off = n.life.offsets;
    for (std::size_t k = n.born_by(t); k < off.size(); ++k) {
      NodeId child = k < n.children.size() ? n.children[k] : -1;
      out.push_back({static_cast<NodeId>(i), n.birth_time + off[k], child});
    }
  }
  return out;
}

bool extinct_by(const Population& pop, double t) {
  if (t < 0.0) return false;
  pop.require_known(t);
  for (const Node& n : pop.nodes()) {
    if (n.birth_time > t) continue;
    if (!n.life.complete() || n.born_by(t) < n.life.offsets.size()) return false;
  }
  return true;
}

std::complex<double> complex_martingale(const Population& pop, std::complex<double> lambda, int i, double t) {
  if (i < 0) throw DomainError("martingale index must be non-negative");
  if (t < 0.0) return 0.0;
  pop.require_known(t);
  const IntensityData& mu = pop.intensity();
  std::complex<double> sum = 0.0;
  for (const Node& n : pop.nodes()) {
    if (n.birth_time > t) continue;
    const auto& off = n.life.offsets;
    for (std::size_t k = n.born_by(t); k < off.size(); ++k) {
      double s = n.birth_time + off[k];
      sum += std::pow(s, i) * std::exp(-lambda * s);
    }
    if (!n.life.complete()) sum += mu.moment_tail(lambda, n.birth_time, n.life.limit, i);
  }
  return (i % 2 == 0) ? sum : -sum;
}

double nerman_w(const Population& pop, double alpha, double t) {
  if (t < 0.0) return 0.0;
  pop.require_known(t);
  const IntensityData& mu = pop.intensity();
  double sum = 0.0;
  for (const Node& n : pop.nodes()) {
    if (n.birth_time > t) continue;
    const auto& off = n.life.offsets;
    for (std::size_t k = n.born_by(t); k < off.size(); ++k)
      sum += std::exp(-alpha * (n.birth_time + off[k]));
    if (!n.life.complete()) sum += std::exp(-alpha * n.birth_time) * mu.laplace_tail(alpha, n.life.limit).real();
  }
  return sum;
}

double biggins(const Population& pop, double theta, int n) {
  if (n < 0) throw DomainError("generation index must be non-negative");
  if (pop.max_generation() && *pop.max_generation() < n)
    throw UndecidableError("generation beyond the simulated generation cap");
  double sum = 0.0;
  for (const Node& v : pop.nodes()) {
    if (v.generation < n) {
      if (!v.life.complete() || v.children.size() != v.life.offsets.size()) {
        std::ostringstream os;
        os << "generation " << n << " is incomplete: a node of generation " << v.generation
           << " has unmaterialized children";
        throw UndecidableError(os.str());
      }
    } else if (v.generation == n) {
      sum += std::exp(-theta * v.birth_time);
    }
  }
  return sum / std::pow(pop.intensity().laplace(theta), n);
}

double biggins_completed(const Population& pop, double theta, int n) {
  if (n < 0) throw DomainError("generation index must be non-negative");
  if (pop.max_generation() && *pop.max_generation() < n)
    throw UndecidableError("generation beyond the simulated generation cap");
  const IntensityData& mu = pop.intensity();
  const double m = mu.laplace(theta);
  double sum = 0.0;
  for (const Node& v : pop.nodes()) {
    if (v.generation == n) {
      sum += std::exp(-theta * v.birth_time);
    } else if (v.generation < n) {
      // Each unmaterialized child born at S contributes e^{-theta S} m^{n-|v|-1}
      // to the conditional mean of the generation-n sum.
      const double below = std::pow(m, n - v.generation - 1);
      for (std::size_t i = v.children.size(); i < v.life.offsets.size(); ++i)
        sum += std::exp(-theta * (v.birth_time + v.life.offsets[i])) * below;
      if (!v.life.complete())
        sum += std::exp(-theta * v.birth_time) * mu.laplace_tail(theta, v.life.limit).real() * below;
    }
  }
  return sum / std::pow(m, n);
}

MartingaleTrace nerman_trace(const Population& pop, double alpha, double until) {
  pop.require_known(until);
  const IntensityData& mu = pop.intensity();
  std::vector<NodeId> order(pop.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](NodeId a, NodeId b) { return pop.node(a).birth_time < pop.node(b).birth_time; });
  MartingaleTrace tr;
  double w = 1.0;  // C_t = {root} just before time 0
  for (std::size_t j = 0; j < order.size();) {
    double s = pop.node(order[j]).birth_time;
    if (s > until) break;
    for (; j < order.size() && pop.node(order[j]).birth_time == s; ++j) {
      const Node& n = pop.node(order[j]);
      w -= std::exp(-alpha * s);
      for (double x : n.life.offsets) w += std::exp(-alpha * (s + x));
      if (!n.life.complete()) w += std::exp(-alpha * s) * mu.laplace_tail(alpha, n.life.limit).real();
    }
    tr.times.push_back(s);
    tr.values.push_back(w);
  }
  return tr;
}

}  // namespace cmj
