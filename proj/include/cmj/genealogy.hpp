#pragma once

// Event-driven simulation of the CMJ genealogy and the martingales read off it.

#include <complex>
#include <cstdint>
#include <iosfwd>
#include <memory>
#include <optional>
#include <variant>
#include <vector>

#include "cmj/models.hpp"

namespace cmj {

using NodeId = std::int32_t;

struct Node {
  double birth_time = 0.0;  // S(u)
  NodeId parent = -1;
  int generation = 0;
  int rank = 0;  // 1-based position among the parent's children, 0 for the root
  /// Birth offsets of u's children (all of them for finite laws, the ones up to
  /// life.limit otherwise).
  BirthDraw life;
  /// Materialized children, in birth order. Child i corresponds to
  /// life.offsets[i]; only a prefix of the offsets is materialized.
  std::vector<NodeId> children;

  /// Number of children born within local time t.
  std::size_t born_within(double t) const;
  /// Number of children with absolute birth time S(u) + X_i <= t. Comparing
  /// absolute times keeps membership in C_t consistent with child birth times.
  std::size_t born_by(double t) const;
};

struct TimeHorizon {
  double t = 0.0;
};
/// Stop at the first time the number of births reaches n (ties included).
struct WeightThreshold {
  std::size_t n = 1;
};
using StopRule = std::variant<TimeHorizon, WeightThreshold>;

struct SimOptions {
  /// Nodes of higher generation are never materialized. Required for
  /// TimeHorizon{inf}.
  std::optional<int> max_generation;
  std::size_t node_cap = 100'000'000;
  /// Extra local time sampled past the horizon for laws with infinitely many
  /// children; negative selects ln(1e6)/(alpha - b).
  double lookahead = -1.0;
};

class Population {
 public:
  Population(std::shared_ptr<const IntensityData> intensity, StopRule stop, double horizon,
             std::optional<int> max_generation = std::nullopt);

  NodeId add_root(BirthDraw life, double birth_time = 0.0);
  /// Materializes child `index` (0-based) of `parent`; children must be added
  /// in index order.
  NodeId add_child(NodeId parent, std::size_t index, BirthDraw life);

  const std::vector<Node>& nodes() const noexcept { return nodes_; }
  std::vector<Node>& nodes() noexcept { return nodes_; }
  const Node& node(NodeId id) const { return nodes_.at(static_cast<std::size_t>(id)); }
  std::size_t size() const noexcept { return nodes_.size(); }

  const StopRule& stop_rule() const noexcept { return stop_; }
  /// Every birth at time <= horizon() is materialized (subject to
  /// max_generation()).
  double horizon() const noexcept { return horizon_; }
  void set_horizon(double h) noexcept { horizon_ = h; }
  std::optional<int> max_generation() const noexcept { return max_generation_; }

  std::uint64_t seed = 0;

  const IntensityData& intensity() const noexcept { return *intensity_; }
  std::shared_ptr<const IntensityData> intensity_ptr() const noexcept { return intensity_; }
  const BirthLaw& law() const noexcept { return intensity_->law(); }

  /// Z_t: number of births up to and including time t.
  std::size_t born_by(double t) const;
  /// Ulam-Harris label of a node (empty for the root).
  std::vector<int> label(NodeId id) const;

  /// Throws UndecidableError unless every birth up to time t is materialized.
  void require_known(double t) const;

  /// CSV with columns node_id,parent_id,birth_time,child_rank.
  void write_csv(std::ostream& os) const;

 private:
  std::shared_ptr<const IntensityData> intensity_;
  StopRule stop_;
  double horizon_;
  std::optional<int> max_generation_;
  std::vector<Node> nodes_;
};

Population simulate(const BirthLaw& law, const StopRule& stop, Rng& rng, const SimOptions& opts = {});
/// Same, with the stream seeded from `seed` and the seed recorded.
Population simulate(const BirthLaw& law, const StopRule& stop, std::uint64_t seed, const SimOptions& opts = {});

/// Default lookahead ln(1e6) / (alpha - b) for laws with infinite mass, 0 otherwise.
double default_lookahead(const BirthLaw& law);

/// Materializes the descendants of v born by time `until`, down to `depth`
/// generations below v, drawing each new life on [0, until - S].
void grow_subtree(Population& pop, NodeId v, int depth, double until, Rng& rng);

struct ComingMember {
  NodeId parent;
  double birth_time;
  NodeId node;  // -1 when the birth lies beyond the materialized horizon
};

/// C_t = {v : S(pr v) <= t < S(v)}, empty for t < 0. For laws with infinitely
/// many children only births within the sampled window are listed.
std::vector<ComingMember> coming_generation(const Population& pop, double t);

/// True when C_t is empty, i.e. the population is extinct by time t.
bool extinct_by(const Population& pop, double t);

/// W_t = sum_{u in C_t} e^{-alpha S(u)}. Births beyond a sampled window
/// contribute their conditional mean.
double nerman_w(const Population& pop, double alpha, double t);

/// W_t^{(i)}(lambda) = (-1)^i sum_{u in C_t} S(u)^i e^{-lambda S(u)}. The
/// caller is responsible for 0 <= i < k(lambda).
std::complex<double> complex_martingale(const Population& pop, std::complex<double> lambda, int i, double t);

/// Z_n^(theta) = mu^(theta)^{-n} sum_{|u| = n} e^{-theta S(u)}. Throws
/// UndecidableError unless generation n is completely materialized.
double biggins(const Population& pop, double theta, int n);

/// Z_n^(theta) with every generation-n descendant of an unmaterialized birth
/// replaced by its conditional mean. Equals biggins() on complete
/// generations and is unbiased otherwise, so it also serves laws with
/// infinitely many children.
double biggins_completed(const Population& pop, double theta, int n);

struct MartingaleTrace {
  std::vector<double> times;
  std::vector<double> values;
};

/// W_t at each birth time up to `until` (and at 0).
MartingaleTrace nerman_trace(const Population& pop, double alpha, double until);

}  // namespace cmj
