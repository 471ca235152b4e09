#pragma once

// Random characteristics: evaluation on a population, conditional projections
// phi^(k), the centred characteristic chi^(phi,h), and the catalog (indicator,
// Nerman's characteristic, fringe-tree indicators, deterministic functions,
// shifts by g * xi).
//
// Evaluation takes absolute times: eval(pop, u, t) is phi_u(t - S(u)). Offsets
// are compared as S(u) + X_i <= t so that results agree exactly with the
// martingale computations in genealogy.

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "cmj/genealogy.hpp"

namespace cmj {

/// Ordered rooted tree used as a fringe pattern. Node 0 is the root.
class FringePattern {
 public:
  /// Parses a parenthesized literal: "()" is a single vertex, "(()())" a root
  /// with two leaf children.
  static FringePattern parse(std::string_view text);
  /// Every ordered tree with height <= max_height and out-degree <= max_degree.
  static std::vector<FringePattern> enumerate(int max_height, int max_degree);

  int height() const { return height_from(0); }
  std::size_t size() const { return children_.size(); }
  const std::vector<int>& children(int v) const { return children_.at(static_cast<std::size_t>(v)); }
  std::string str() const;

  bool operator==(const FringePattern& o) const { return str() == o.str(); }

 private:
  int height_from(int v) const;
  std::vector<std::vector<int>> children_;
};

class Characteristic;
using CharacteristicPtr = std::shared_ptr<const Characteristic>;

struct ProjectionOptions {
  /// Samples per nested Monte Carlo estimate; 0 disables nested Monte Carlo.
  int nested_mc_m = 200;
  Rng* rng = nullptr;
};

struct ProjectionValue {
  double value = 0.0;
  double standard_error = 0.0;  // zero for exact evaluations
};

class Characteristic {
 public:
  virtual ~Characteristic() = default;

  /// Dependence depth h: phi_u reads u's life and descendants up to generation h.
  virtual int depth() const = 0;
  virtual bool vanishes_on_negative() const { return true; }
  /// True when phi_u(t - S(u)) only reads births up to time t.
  virtual bool causal() const { return true; }
  virtual std::string name() const = 0;

  /// phi_u(t - S(u)).
  virtual double eval(const Population& pop, NodeId u, double t) const = 0;
  /// E[phi](t) for local time t, when known in closed form.
  virtual std::optional<double> mean(double t) const {
    (void)t;
    return std::nullopt;
  }
  /// Closed form of phi_u^(k)(t - S(u)) for 1 <= k <= h, reading only the lives
  /// of u's descendants in generations < k.
  virtual std::optional<double> analytic_projection(const Population& pop, NodeId u, int k, double t) const {
    (void)pop, (void)u, (void)k, (void)t;
    return std::nullopt;
  }

  /// phi^(k) = E[phi | lives of generations < k below u]. k = 0 gives the
  /// mean and k >= h + 1 gives eval. Intermediate k use the closed form or,
  /// for causal characteristics, nested Monte Carlo over resampled completions.
  virtual ProjectionValue project(const Population& pop, NodeId u, int k, double t,
                                  const ProjectionOptions& opts = {}) const;
};

/// Z_t^phi = sum_u phi_u(t - S(u)). Characteristics that do not vanish on the
/// negative half-line need `support` with phi(s) = 0 for s < -support.
double counted_process(const Population& pop, const Characteristic& phi, double t,
                       std::optional<double> support = std::nullopt);

/// chi^(phi,h) for the individual u at local time s:
///   sum_{v below u, |v| - |u| <= h} (phi_v^(h+1-d) - phi_v^(h-d))(S(u) + s - S(v)).
/// For characteristics that do not vanish on negatives every descendant within
/// h generations born by the population horizon must be materialized; later
/// births are neglected.
ProjectionValue chi(const Characteristic& phi, const Population& pop, NodeId u, double s,
                    const ProjectionOptions& opts = {});

/// 1_{[0,inf)}: counts births.
CharacteristicPtr indicator_characteristic();

/// phi(t) = 1_{t >= 0} e^{alpha t} int_{(t,inf)} e^{-alpha x} xi(dx), so that
/// e^{-alpha t} Z_t^phi = W_t.
CharacteristicPtr nerman_characteristic(std::shared_ptr<const IntensityData> mu, double alpha);

/// phi^T(t) = 1 iff t >= 0 and the tree of u's descendants born within local
/// time t is order-isomorphic to T.
CharacteristicPtr fringe_characteristic(const FringePattern& pattern, std::shared_ptr<const IntensityData> mu);

/// Deterministic individual characteristic f.
CharacteristicPtr deterministic_characteristic(std::function<double(double)> f, std::string name,
                                               bool vanishes_on_negative = true);

/// phi + g * xi, i.e. eval' = eval + sum_i g(t - X_i) over u's own births.
/// `mean`, when given, replaces the numerical E[phi] + int g(t - x) mu(dx).
CharacteristicPtr shifted_characteristic(CharacteristicPtr base, std::function<double(double)> g,
                                         std::shared_ptr<const IntensityData> mu,
                                         std::function<double(double)> mean = {});

/// Probability that a fresh individual's descendants born within local time r
/// form the tree rooted at pattern vertex v, when known in closed form.
std::optional<double> fringe_shape_probability(const IntensityData& mu, const FringePattern& pattern, int v,
                                               double r);

}  // namespace cmj
