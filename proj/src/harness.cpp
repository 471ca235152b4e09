#include "cmj/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <mutex>
#include <ostream>
#include <thread>

#include <json.hpp>

#include "cmj/error.hpp"
#include "cmj/rng.hpp"
#include "cmj/stats.hpp"

namespace cmj {

namespace {

using Json = nlohmann::ordered_json;

constexpr double kZLimit = 4.0;

std::string fmt17(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

Json opt_json(const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); }

double z_of(double mean, double expected, double se) {
  const double diff = mean - expected;
  // Tolerate rounding when the estimator has no spread (deterministic models).
  if (std::abs(diff) <= 1e-9 * std::max(1.0, std::abs(expected))) return 0.0;
  return se > 0.0 ? diff / se : std::copysign(INFINITY, diff);
}

/// For lattice laws every limit statement is along t in dZ.
void require_on_lattice(const MalthusianSolution& sol, double t, const char* what) {
  if (!sol.lattice_span) return;
  const double d = *sol.lattice_span;
  if (std::abs(t / d - std::round(t / d)) > 1e-9)
    throw ConfigError(std::string(what) + " = " + fmt17(t) + " is not on the lattice " + fmt17(d) + "Z");
}

double default_delta_w(const MalthusianSolution& sol) {
  double dw = std::ceil(4.6 / sol.alpha);
  if (sol.lattice_span) dw = std::ceil(dw / *sol.lattice_span) * *sol.lattice_span;
  return dw;
}

double clt_t(const ExperimentConfig& cfg) { return cfg.clt.t.value_or(cfg.horizons.back()); }

double clt_t_big(const ExperimentConfig& cfg, const MalthusianSolution& sol) {
  if (cfg.clt.t_big) return *cfg.clt.t_big;
  return clt_t(cfg) + cfg.tolerances.delta_w.value_or(default_delta_w(sol));
}

const MeanFn& require_mean(const ExperimentSetup& s) {
  if (!s.mean_fn) throw CapabilityError(s.phi->name() + " has no closed-form mean under " + s.law.describe());
  return *s.mean_fn;
}

std::vector<double> martingale_times(const ExperimentConfig& cfg) {
  return cfg.martingales.times.empty() ? cfg.horizons : cfg.martingales.times;
}

Json trace_json(const Trace& tr) {
  Json pts = Json::array();
  for (const auto& p : tr.points)
    pts.push_back({{"x", p.x},
                   {"mean", p.mean},
                   {"se", p.se},
                   {"variance", p.variance},
                   {"expected", p.expected},
                   {"z", p.z},
                   {"flagged", p.flagged}});
  return {{"name", tr.name}, {"points", pts}};
}

}  // namespace

void parallel_for(std::size_t begin, std::size_t end, unsigned threads, const std::function<void(std::size_t)>& f) {
  std::atomic<std::size_t> next{begin};
  std::exception_ptr failure;
  std::mutex m;
  auto worker = [&]() {
    try {
      for (std::size_t i = next++; i < end; i = next++) f(i);
    } catch (...) {
      std::lock_guard lock(m);
      if (!failure) failure = std::current_exception();
      next = end;
    }
  };
  std::vector<std::thread> pool;
  for (unsigned w = 1; w < std::max(1u, threads); ++w) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();
  if (failure) std::rethrow_exception(failure);
}

ExperimentSetup prepare(const ExperimentConfig& cfg, double s_max) {
  ExperimentSetup s{cfg.model, std::make_shared<const IntensityData>(cfg.model), {}, {}, {}, std::nullopt};
  ScanOptions so;
  so.im_max = cfg.im_max;
  so.root_tol = cfg.tolerances.root_tol;
  s.sol = analyze(*s.mu, so);
  const double alpha = s.sol.alpha;
  if (s_max <= 0.0) {
    // Everything an experiment may evaluate m_t or g at.
    s_max = std::max({cfg.horizons.back(), martingale_times(cfg).back(), clt_t_big(cfg, s.sol),
                      cfg.clt.sigma_s_max > 0.0 ? cfg.clt.sigma_s_max : 12.0 / alpha});
    s_max = std::max(s_max, cfg.tolerances.s_max.value_or(0.0)) + 1.0 / alpha;
  }
  KernelOptions ko;
  ko.step = cfg.tolerances.grid_step.value_or(0.0);
  s.kernel = make_kernel(*s.mu, s.sol, s_max, ko);
  s.phi = make_characteristic(cfg.characteristic, s.mu, alpha);
  if (s.phi->mean(0.0)) {
    auto phi = s.phi;
    s.mean_fn = [phi](double t) { return *phi->mean(t); };
  }
  return s;
}

void write_replicas_csv(const std::vector<ReplicaRecord>& rows, std::ostream& os) {
  os << "replica,seed,survived,z_t,z_phi_t,w_main,w_ext,normalized_stat\r\n";
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& r = rows[i];
    os << i << ',' << r.seed << ',' << (r.survived ? 1 : 0) << ',' << r.z_t << ',' << fmt17(r.z_phi_t) << ','
       << fmt17(r.w_main) << ',' << fmt17(r.w_ext) << ',';
    if (r.normalized_stat) os << fmt17(*r.normalized_stat);
    os << "\r\n";
  }
}

LlnReport run_lln(const ExperimentConfig& cfg, const RunOptions& opts) {
  ExperimentSetup s = prepare(cfg);
  const MeanFn& mean_fn = require_mean(s);
  const double alpha = s.sol.alpha;
  for (double t : cfg.horizons) require_on_lattice(s.sol, t, "horizon");

  LlnReport rep;
  rep.law = s.law.describe();
  rep.characteristic = s.phi->name();
  rep.alpha = alpha;
  rep.a_alpha = key_renewal_limit(s.kernel, mean_fn);
  const double a_one = s.kernel.c_alpha() / s.sol.beta;

  const std::size_t nh = cfg.horizons.size();
  struct Sample {
    std::vector<double> z_phi, z;
    std::vector<char> alive;
    ReplicaRecord last;
  };
  std::vector<Sample> out(cfg.replicas);
  parallel_for(0, cfg.replicas, opts.threads, [&](std::size_t i) {
    const std::uint64_t seed = derive_seed(cfg.master_seed, Stream::replica, i);
    Population pop = simulate(s.law, TimeHorizon{cfg.horizons.back()}, seed);
    Sample& o = out[i];
    for (double t : cfg.horizons) {
      o.z_phi.push_back(counted_process(pop, *s.phi, t));
      o.z.push_back(static_cast<double>(pop.born_by(t)));
      o.alive.push_back(!extinct_by(pop, t));
    }
    const double t = cfg.horizons.back();
    o.last = {seed, static_cast<bool>(o.alive.back()), pop.born_by(t), o.z_phi.back(), nerman_w(pop, alpha, t),
              nerman_w(pop, alpha, t), std::nullopt};
  });

  rep.passed = true;
  for (std::size_t h = 0; h < nh; ++h) {
    const double t = cfg.horizons[h];
    RunningMoments scaled, frac;
    for (const auto& o : out) {
      scaled.add(std::exp(-alpha * t) * o.z_phi[h]);
      if (o.alive[h]) frac.add(o.z_phi[h] / o.z[h]);
    }
    LlnRow row;
    row.t = t;
    row.n_survived = frac.count();
    row.mean_scaled = scaled.mean();
    row.se = scaled.standard_error();
    row.predicted_mean = std::exp(-alpha * t) * mean_process(s.kernel, mean_fn, t);
    row.z_score = z_of(row.mean_scaled, *row.predicted_mean, row.se);
    row.limit = rep.a_alpha;
    row.z_limit = z_of(row.mean_scaled, row.limit, row.se);
    row.fraction_mean = frac.mean();
    row.fraction_se = frac.standard_error();
    row.fraction_limit = rep.a_alpha / a_one;
    if (!(std::abs(row.z_score) <= kZLimit)) rep.passed = false;
    rep.rows.push_back(row);
  }
  if (rep.rows.back().n_survived == 0)
    throw UnsupportedRegime("all replicas are extinct by t = " + fmt17(cfg.horizons.back()) +
                            "; use a law with a larger mean offspring number");
  for (auto& o : out) rep.replicas.push_back(o.last);
  return rep;
}

double extinction_probability(const BirthLaw& law) {
  if (const auto* gw = law.as<GaltonWatson>()) {
    double q = 0.0;
    for (int it = 0; it < 100000; ++it) {
      double f = 0.0, sp = 1.0;
      for (double p : gw->offspring) {
        f += p * sp;
        sp *= q;
      }
      if (std::abs(f - q) < 1e-16) break;
      q = f;
    }
    return q;
  }
  if (const auto* p = law.as<PoissonIntensity>(); p && p->b_exp < 0) {
    // N ~ Poisson(a).
    double q = 0.0;
    for (int it = 0; it < 100000; ++it) {
      double f = std::exp(p->a * (q - 1.0));
      if (std::abs(f - q) < 1e-16) break;
      q = f;
    }
    return q;
  }
  return 0.0;  // at least two children almost surely, or infinitely many
}

CltReport run_clt(const ExperimentConfig& cfg, const RunOptions& opts) {
  ExperimentSetup s = prepare(cfg);
  const double alpha = s.sol.alpha;
  if (s.sol.boundary_roots_present)
    throw UnsupportedRegime("roots on the line Re(lambda) = alpha/2: the oscillatory CLT constants are not computed");
  if (!s.sol.simple_alpha_only())
    throw UnsupportedRegime("roots other than alpha with Re(lambda) > alpha/2: only the Gaussian regime is supported");
  require_mean(s);

  CltReport rep;
  rep.t = clt_t(cfg);
  rep.t_big = clt_t_big(cfg, s.sol);
  require_on_lattice(s.sol, rep.t, "clt.t");
  require_on_lattice(s.sol, rep.t_big, "clt.t_big");
  if (rep.t_big < rep.t) throw ConfigError("clt.t_big must be at least clt.t");
  rep.w_bias_factor = std::exp(-alpha * (rep.t_big - rep.t) / 2.0);

  SigmaOptions so;
  so.samples_per_point = cfg.clt.sigma_samples;
  so.step = cfg.clt.sigma_step;
  so.s_min = cfg.clt.sigma_s_min;
  so.s_max = cfg.clt.sigma_s_max;
  so.nested_mc_m = cfg.tolerances.nested_mc_m;
  so.seed = cfg.master_seed;
  so.threads = opts.threads;
  rep.sigma = sigma_squared(s.law, s.phi, s.sol, s.kernel, so);
  rep.sigma2_formula = rep.sigma.sigma2;
  rep.sigma2_se = rep.sigma.se;
  rep.a_alpha = rep.sigma.a_alpha;
  rep.a_alpha_used = rep.a_alpha * (1.0 + opts.aalpha_bias);
  rep.extinction_probability = extinction_probability(s.law);

  if (!(rep.sigma2_formula > 1e-12)) {
    rep.degenerate = true;
    rep.reason = "sigma^2 = 0: the fluctuations vanish at the e^{alpha t/2} scale, no distributional test";
    return rep;
  }

  // Replicas in batches of `replicas` until enough survive.
  const std::size_t target = cfg.clt.survivors;
  const std::size_t cap = target ? std::max(cfg.replicas, 50 * target) : cfg.replicas;
  auto& recs = rep.replicas;
  std::size_t survived = 0;
  while (true) {
    const std::size_t begin = recs.size();
    if (begin >= cap)
      throw ResourceError("only " + std::to_string(survived) + " of " + std::to_string(begin) +
                          " replicas survived; " + std::to_string(target) + " survivors requested");
    const std::size_t end = std::min(cap, begin + cfg.replicas);
    recs.resize(end);
    parallel_for(begin, end, opts.threads, [&](std::size_t i) {
      const std::uint64_t seed = derive_seed(cfg.master_seed, Stream::replica, i);
      Population pop = simulate(s.law, TimeHorizon{rep.t_big}, seed);
      ReplicaRecord& r = recs[i];
      r.seed = seed;
      r.survived = !extinct_by(pop, rep.t_big);
      r.z_t = pop.born_by(rep.t);
      r.z_phi_t = counted_process(pop, *s.phi, rep.t);
      r.w_main = nerman_w(pop, alpha, rep.t);
      r.w_ext = nerman_w(pop, alpha, rep.t_big);
    });
    std::size_t i = begin;
    for (; i < end && (!target || survived < target); ++i) survived += recs[i].survived;
    if (!target) break;
    if (survived >= target) {
      recs.resize(i);
      break;
    }
  }

  const double sigma = std::sqrt(rep.sigma2_formula);
  const double beta = s.sol.beta;
  std::vector<double> v;
  RunningMoments u;
  for (auto& r : recs) {
    if (!r.survived) continue;
    const double x = std::exp(-alpha * rep.t / 2.0) * (r.z_phi_t - rep.a_alpha_used * std::exp(alpha * rep.t) * r.w_ext) /
                     std::sqrt(r.w_ext / beta);
    u.add(x);
    r.normalized_stat = x / sigma;
    v.push_back(x / sigma);
  }
  rep.n_replicas = recs.size();
  rep.n_survived = v.size();
  rep.extinction_fraction = 1.0 - static_cast<double>(rep.n_survived) / static_cast<double>(rep.n_replicas);
  if (v.size() < 2) throw UnsupportedRegime("fewer than two surviving replicas; use a law with a larger mean");

  const auto ks = ks_normal(v);
  const auto ad = anderson_darling_normal(v);
  rep.ks_statistic = ks.statistic;
  rep.ks_p_value = ks.p_value;
  rep.anderson_darling_stat = ad.statistic;
  rep.anderson_darling_p_value = ad.p_value;
  rep.mean_stat = u.mean() / sigma;
  rep.empirical_variance = u.variance();
  rep.sigma2_ratio = rep.sigma2_formula / rep.empirical_variance;
  rep.passed = rep.ks_p_value > cfg.clt.p_threshold;
  rep.reason = rep.passed ? "KS p-value above threshold" : "KS p-value below threshold";
  return rep;
}

FringeReport run_fringe_census(const ExperimentConfig& cfg, const RunOptions& opts) {
  ExperimentSetup s = prepare(cfg);
  const double t = cfg.horizons.back();
  require_on_lattice(s.sol, t, "horizon");

  std::vector<FringePattern> patterns;
  if (cfg.fringe.patterns.empty()) {
    patterns = FringePattern::enumerate(cfg.fringe.h_max, cfg.fringe.max_degree);
  } else {
    for (const auto& p : cfg.fringe.patterns) patterns.push_back(FringePattern::parse(p));
  }
  std::vector<CharacteristicPtr> phis;
  for (const auto& p : patterns) phis.push_back(fringe_characteristic(p, s.mu));

  struct Sample {
    std::vector<double> n;
    double z = 0.0;
    bool alive = false;
  };
  std::vector<Sample> out(cfg.replicas);
  parallel_for(0, cfg.replicas, opts.threads, [&](std::size_t i) {
    Population pop = simulate(s.law, TimeHorizon{t}, derive_seed(cfg.master_seed, Stream::replica, i));
    Sample& o = out[i];
    for (const auto& phi : phis) o.n.push_back(counted_process(pop, *phi, t));
    o.z = static_cast<double>(pop.born_by(t));
    o.alive = !extinct_by(pop, t);
  });

  FringeReport rep;
  rep.t = t;
  rep.n_replicas = cfg.replicas;
  for (const auto& o : out) rep.n_survived += o.alive;
  if (rep.n_survived == 0)
    throw UnsupportedRegime("all replicas are extinct by t = " + fmt17(t) +
                            "; use a law with a larger mean offspring number");
  const double a_one = s.kernel.c_alpha() / s.sol.beta;
  rep.passed = true;
  for (std::size_t k = 0; k < patterns.size(); ++k) {
    RunningMoments count, frac;
    for (const auto& o : out) {
      count.add(o.n[k]);
      if (o.alive) frac.add(o.n[k] / o.z);
    }
    FringeRow row;
    row.pattern = patterns[k].str();
    row.mean_count = count.mean();
    row.count_se = count.standard_error();
    row.mean_fraction = frac.mean();
    row.fraction_se = frac.standard_error();
    if (phis[k]->mean(0.0)) {
      auto phi = phis[k];
      MeanFn mf = [phi](double x) { return *phi->mean(x); };
      row.predicted_count = mean_process(s.kernel, mf, t);
      row.z_count = z_of(row.mean_count, *row.predicted_count, row.count_se);
      row.predicted_fraction = key_renewal_limit(s.kernel, mf) / a_one;
      if (!(std::abs(row.z_count) <= kZLimit)) rep.passed = false;
    }
    rep.rows.push_back(row);
  }
  return rep;
}

MartingaleReport run_martingale_suite(const ExperimentConfig& cfg, const RunOptions& opts) {
  ExperimentSetup s = prepare(cfg);
  const double alpha = s.sol.alpha;
  const std::vector<double> times = martingale_times(cfg);
  const int gens = cfg.martingales.generations;
  std::vector<double> thetas = cfg.martingales.thetas;
  if (thetas.empty()) thetas = {alpha, alpha - 0.1};
  for (double th : thetas)
    if (!s.mu->in_domain(th)) throw ConfigError("theta = " + fmt17(th) + " lies outside the domain of mu^");

  // Complex roots other than alpha in the strip give further martingales.
  struct ComplexSeries {
    std::complex<double> lambda;
    int i;
  };
  std::vector<ComplexSeries> cseries;
  for (const auto& r : s.sol.roots) {
    if (std::abs(r.value - std::complex<double>(alpha, 0.0)) < 1e-8) continue;
    for (int i = 0; i < r.multiplicity; ++i) cseries.push_back({r.value, i});
  }

  const bool finite = s.law.finite_offspring();
  const double gen_horizon = finite ? INFINITY
                                    : (cfg.martingales.generation_horizon > 0.0 ? cfg.martingales.generation_horizon
                                                                                : std::log(2000.0) / alpha);
  const std::size_t nt = times.size();
  // Per replica: W at each time, Biggins values, complex values (re, im).
  std::vector<std::vector<double>> w(cfg.replicas), big(cfg.replicas);
  std::vector<std::vector<std::complex<double>>> cx(cfg.replicas);
  parallel_for(0, cfg.replicas, opts.threads, [&](std::size_t i) {
    Population pop = simulate(s.law, TimeHorizon{times.back()}, derive_seed(cfg.master_seed, Stream::replica, i));
    for (double t : times) w[i].push_back(nerman_w(pop, alpha, t));
    for (const auto& c : cseries)
      for (double t : times) cx[i].push_back(complex_martingale(pop, c.lambda, c.i, t));
    SimOptions so;
    so.max_generation = gens;
    Population gp = simulate(s.law, TimeHorizon{gen_horizon}, derive_seed(cfg.master_seed, Stream::biggins, i), so);
    for (double th : thetas)
      for (int n = 0; n <= gens; ++n) big[i].push_back(biggins_completed(gp, th, n));
  });

  MartingaleReport rep;
  rep.n_replicas = cfg.replicas;
  auto make_point = [](double x, const RunningMoments& m, double expected) {
    TracePoint p;
    p.x = x;
    p.mean = m.mean();
    p.se = m.standard_error();
    p.variance = m.variance();
    p.expected = expected;
    p.z = z_of(p.mean, expected, p.se);
    p.flagged = !(std::abs(p.z) <= kZLimit);
    return p;
  };

  Trace wt{"W", {}};
  for (std::size_t k = 0; k < nt; ++k) {
    RunningMoments m;
    for (const auto& r : w) m.add(r[k]);
    wt.points.push_back(make_point(times[k], m, 1.0));
  }
  for (std::size_t k = 1; k < nt; ++k) {
    RunningMoments d;
    for (const auto& r : w) d.add(r[k] * r[k] - r[k - 1] * r[k - 1]);
    if (d.mean() < -kZLimit * d.standard_error() - 1e-12) rep.variance_monotone = false;
  }
  rep.traces.push_back(wt);

  for (std::size_t j = 0; j < thetas.size(); ++j) {
    char name[64];
    std::snprintf(name, sizeof name, "biggins_theta_%.6g", thetas[j]);
    Trace tr{name, {}};
    for (int n = 0; n <= gens; ++n) {
      RunningMoments m;
      for (const auto& r : big) m.add(r[j * static_cast<std::size_t>(gens + 1) + static_cast<std::size_t>(n)]);
      tr.points.push_back(make_point(n, m, 1.0));
    }
    rep.traces.push_back(tr);
  }

  for (std::size_t c = 0; c < cseries.size(); ++c) {
    char name[96];
    std::snprintf(name, sizeof name, "complex_%.6g%+.6gi_i%d", cseries[c].lambda.real(), cseries[c].lambda.imag(),
                  cseries[c].i);
    Trace re{std::string(name) + "_re", {}}, im{std::string(name) + "_im", {}};
    const double expected = cseries[c].i == 0 ? 1.0 : 0.0;
    for (std::size_t k = 0; k < nt; ++k) {
      RunningMoments mr, mi;
      for (const auto& r : cx) {
        mr.add(r[c * nt + k].real());
        mi.add(r[c * nt + k].imag());
      }
      re.points.push_back(make_point(times[k], mr, expected));
      im.points.push_back(make_point(times[k], mi, 0.0));
    }
    rep.traces.push_back(re);
    rep.traces.push_back(im);
  }

  rep.passed = rep.variance_monotone;
  for (const auto& tr : rep.traces)
    for (const auto& p : tr.points)
      if (p.flagged) rep.passed = false;
  return rep;
}

void write_trace_csv(const Trace& trace, std::ostream& os) {
  os << "x,mean,se,variance,expected,z,flagged\r\n";
  for (const auto& p : trace.points)
    os << fmt17(p.x) << ',' << fmt17(p.mean) << ',' << fmt17(p.se) << ',' << fmt17(p.variance) << ','
       << fmt17(p.expected) << ',' << fmt17(p.z) << ',' << (p.flagged ? 1 : 0) << "\r\n";
}

std::string to_json(const LlnReport& r) {
  Json rows = Json::array();
  for (const auto& x : r.rows)
    rows.push_back({{"t", x.t},
                    {"n_survived", x.n_survived},
                    {"mean_scaled", x.mean_scaled},
                    {"se", x.se},
                    {"predicted_mean", opt_json(x.predicted_mean)},
                    {"z_score", x.z_score},
                    {"limit", x.limit},
                    {"z_limit", x.z_limit},
                    {"fraction_mean", x.fraction_mean},
                    {"fraction_se", x.fraction_se},
                    {"fraction_limit", x.fraction_limit}});
  Json j{{"experiment", "lln"},     {"passed", r.passed},   {"law", r.law},
         {"characteristic", r.characteristic}, {"alpha", r.alpha}, {"a_alpha", r.a_alpha},
         {"rows", rows}};
  return j.dump(2) + "\n";
}

std::string to_json(const CltReport& r) {
  Json j;
  j["experiment"] = "clt";
  j["passed"] = r.passed;
  j["degenerate"] = r.degenerate;
  j["reason"] = r.reason;
  j["n_replicas"] = r.n_replicas;
  j["n_survived"] = r.n_survived;
  j["t"] = r.t;
  j["t_big"] = r.t_big;
  j["a_alpha"] = r.a_alpha;
  j["a_alpha_used"] = r.a_alpha_used;
  j["ks_statistic"] = r.ks_statistic;
  j["ks_p_value"] = r.ks_p_value;
  j["anderson_darling_stat"] = r.anderson_darling_stat;
  j["anderson_darling_p_value"] = r.anderson_darling_p_value;
  j["mean_stat"] = r.mean_stat;
  j["empirical_variance"] = r.empirical_variance;
  j["sigma2_formula"] = r.sigma2_formula;
  j["sigma2_se"] = r.sigma2_se;
  j["sigma2_ratio"] = r.sigma2_ratio;
  j["sigma2_truncation_error_bound"] = r.sigma.truncation_error_bound;
  j["w_bias_factor"] = r.w_bias_factor;
  j["extinction_fraction"] = r.extinction_fraction;
  j["extinction_probability"] = opt_json(r.extinction_probability);
  return j.dump(2) + "\n";
}

std::string to_json(const FringeReport& r) {
  Json rows = Json::array();
  for (const auto& x : r.rows)
    rows.push_back({{"pattern", x.pattern},
                    {"mean_count", x.mean_count},
                    {"count_se", x.count_se},
                    {"predicted_count", opt_json(x.predicted_count)},
                    {"z_count", x.z_count},
                    {"mean_fraction", x.mean_fraction},
                    {"fraction_se", x.fraction_se},
                    {"predicted_fraction", opt_json(x.predicted_fraction)}});
  Json j{{"experiment", "fringe"}, {"passed", r.passed},        {"t", r.t},
         {"n_replicas", r.n_replicas}, {"n_survived", r.n_survived}, {"rows", rows}};
  return j.dump(2) + "\n";
}

std::string to_json(const MartingaleReport& r) {
  Json traces = Json::array();
  for (const auto& t : r.traces) traces.push_back(trace_json(t));
  Json j{{"experiment", "martingales"},
         {"passed", r.passed},
         {"n_replicas", r.n_replicas},
         {"variance_monotone", r.variance_monotone},
         {"traces", traces}};
  return j.dump(2) + "\n";
}

}  // namespace cmj
