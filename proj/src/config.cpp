#include "cmj/config.hpp"

#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "cmj/error.hpp"

namespace cmj {

namespace {

template <class T>
T get(const YAML::Node& n, const std::string& key, const std::string& where) {
  try {
    return n[key].as<T>();
  } catch (const YAML::Exception& e) {
    throw ConfigError(where + "." + key + ": " + e.msg);
  }
}

template <class T>
std::optional<T> get_opt(const YAML::Node& n, const std::string& key, const std::string& where) {
  if (!n || !n[key]) return std::nullopt;
  return get<T>(n, key, where);
}

void check_keys(const YAML::Node& n, const std::string& where, std::initializer_list<const char*> allowed) {
  if (!n) return;
  if (!n.IsMap()) throw ConfigError(where + " must be a table");
  std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& kv : n) {
    auto k = kv.first.as<std::string>();
    if (!ok.count(k)) throw ConfigError("unknown key " + where + "." + k);
  }
}

double positive(double v, const std::string& what) {
  if (!(v > 0.0) || !std::isfinite(v)) throw ConfigError(what + " must be positive");
  return v;
}

BirthLaw parse_model(const YAML::Node& m, double& im_max) {
  if (!m) throw ConfigError("missing table 'model'");
  check_keys(m, "model", {"law", "offspring", "fixed", "masses", "pieces", "a", "b_exp", "im_max"});
  const auto law = get<std::string>(m, "law", "model");
  if (auto v = get_opt<double>(m, "im_max", "model")) im_max = positive(*v, "model.im_max");
  if (law == "galton_watson") {
    if (auto k = get_opt<int>(m, "fixed", "model")) {
      if (*k < 0) throw ConfigError("model.fixed must be non-negative");
      std::vector<double> p(static_cast<std::size_t>(*k) + 1, 0.0);
      p.back() = 1.0;
      return BirthLaw::galton_watson(p);
    }
    return BirthLaw::galton_watson(get<std::vector<double>>(m, "offspring", "model"));
  }
  if (law == "fragmentation") return BirthLaw::fragmentation(get<std::vector<double>>(m, "masses", "model"));
  if (law == "uniform_fragmentation") return BirthLaw::uniform_fragmentation(get<int>(m, "pieces", "model"));
  if (law == "poisson") return BirthLaw::poisson(get<double>(m, "a", "model"), get<int>(m, "b_exp", "model"));
  throw ConfigError("model.law must be galton_watson, fragmentation, uniform_fragmentation or poisson");
}

}  // namespace

ExperimentConfig parse_config(const std::string& text) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::Exception& e) {
    throw ConfigError("config: " + e.msg);
  }
  if (!root.IsMap()) throw ConfigError("config must be a table of keys");
  check_keys(root, "config",
             {"model", "characteristic", "horizons", "replicas", "master_seed", "tolerances", "output_dir",
              "simulate", "clt", "fringe", "martingales"});

  ExperimentConfig c;
  c.model = parse_model(root["model"], c.im_max);

  if (auto ch = root["characteristic"]) {
    check_keys(ch, "characteristic", {"kind", "pattern"});
    c.characteristic.kind = get<std::string>(ch, "kind", "characteristic");
    c.characteristic.pattern = get_opt<std::string>(ch, "pattern", "characteristic").value_or("");
    const auto& k = c.characteristic.kind;
    if (k != "one" && k != "leaf" && k != "fringe" && k != "nerman")
      throw ConfigError("characteristic.kind must be one, leaf, fringe or nerman");
    if (k == "fringe") FringePattern::parse(c.characteristic.pattern);
  }

  if (root["horizons"]) c.horizons = get<std::vector<double>>(root, "horizons", "config");
  if (c.horizons.empty()) throw ConfigError("horizons must be non-empty");
  if (!std::is_sorted(c.horizons.begin(), c.horizons.end())) throw ConfigError("horizons must be sorted");
  for (double t : c.horizons)
    if (!(t >= 0.0) || !std::isfinite(t)) throw ConfigError("horizons must be finite and non-negative");

  if (auto r = get_opt<long long>(root, "replicas", "config")) {
    if (*r < 1) throw ConfigError("replicas must be at least 1");
    c.replicas = static_cast<std::size_t>(*r);
  }
  c.master_seed = get_opt<std::uint64_t>(root, "master_seed", "config").value_or(0);
  c.output_dir = get_opt<std::string>(root, "output_dir", "config").value_or(".");

  if (auto t = root["tolerances"]) {
    check_keys(t, "tolerances", {"root_tol", "grid_step", "s_max", "nested_mc_m", "delta_w"});
    if (auto v = get_opt<double>(t, "root_tol", "tolerances")) c.tolerances.root_tol = positive(*v, "tolerances.root_tol");
    if (auto v = get_opt<double>(t, "grid_step", "tolerances")) c.tolerances.grid_step = positive(*v, "tolerances.grid_step");
    if (auto v = get_opt<double>(t, "s_max", "tolerances")) c.tolerances.s_max = positive(*v, "tolerances.s_max");
    if (auto v = get_opt<int>(t, "nested_mc_m", "tolerances")) {
      if (*v < 1) throw ConfigError("tolerances.nested_mc_m must be positive");
      c.tolerances.nested_mc_m = *v;
    }
    if (auto v = get_opt<double>(t, "delta_w", "tolerances")) c.tolerances.delta_w = positive(*v, "tolerances.delta_w");
  }

  if (auto s = root["simulate"]) {
    check_keys(s, "simulate", {"t", "n"});
    c.simulate.time = get_opt<double>(s, "t", "simulate");
    if (auto n = get_opt<long long>(s, "n", "simulate")) {
      if (*n < 1) throw ConfigError("simulate.n must be at least 1");
      c.simulate.weight = static_cast<std::size_t>(*n);
    }
    if (c.simulate.time.has_value() == c.simulate.weight.has_value())
      throw ConfigError("simulate needs exactly one of t (time horizon) or n (weight threshold)");
  }

  if (auto s = root["clt"]) {
    check_keys(s, "clt",
               {"t", "t_big", "survivors", "sigma_samples", "sigma_step", "sigma_s_min", "sigma_s_max",
                "p_threshold"});
    c.clt.t = get_opt<double>(s, "t", "clt");
    c.clt.t_big = get_opt<double>(s, "t_big", "clt");
    c.clt.survivors = get_opt<std::size_t>(s, "survivors", "clt").value_or(0);
    c.clt.sigma_samples = get_opt<std::size_t>(s, "sigma_samples", "clt").value_or(c.clt.sigma_samples);
    if (c.clt.sigma_samples < 2) throw ConfigError("clt.sigma_samples must be at least 2");
    if (auto v = get_opt<double>(s, "sigma_step", "clt")) c.clt.sigma_step = positive(*v, "clt.sigma_step");
    if (auto v = get_opt<double>(s, "sigma_s_min", "clt")) c.clt.sigma_s_min = positive(*v, "clt.sigma_s_min");
    if (auto v = get_opt<double>(s, "sigma_s_max", "clt")) c.clt.sigma_s_max = positive(*v, "clt.sigma_s_max");
    if (auto v = get_opt<double>(s, "p_threshold", "clt")) c.clt.p_threshold = positive(*v, "clt.p_threshold");
    if (c.clt.t && c.clt.t_big && *c.clt.t_big < *c.clt.t) throw ConfigError("clt.t_big must be at least clt.t");
  }

  if (auto s = root["fringe"]) {
    check_keys(s, "fringe", {"patterns", "h_max", "max_degree"});
    c.fringe.patterns = get_opt<std::vector<std::string>>(s, "patterns", "fringe").value_or(std::vector<std::string>{});
    c.fringe.h_max = get_opt<int>(s, "h_max", "fringe").value_or(c.fringe.h_max);
    c.fringe.max_degree = get_opt<int>(s, "max_degree", "fringe").value_or(c.fringe.max_degree);
    if (c.fringe.h_max < 0 || c.fringe.max_degree < 0) throw ConfigError("fringe.h_max and fringe.max_degree must be non-negative");
    for (const auto& p : c.fringe.patterns)
      if (FringePattern::parse(p).height() > c.fringe.h_max)
        throw ConfigError("fringe pattern " + p + " is higher than fringe.h_max");
  }

  if (auto s = root["martingales"]) {
    check_keys(s, "martingales", {"times", "generations", "thetas", "generation_horizon"});
    c.martingales.times = get_opt<std::vector<double>>(s, "times", "martingales").value_or(std::vector<double>{});
    if (!std::is_sorted(c.martingales.times.begin(), c.martingales.times.end()))
      throw ConfigError("martingales.times must be sorted");
    c.martingales.generations = get_opt<int>(s, "generations", "martingales").value_or(c.martingales.generations);
    if (c.martingales.generations < 0) throw ConfigError("martingales.generations must be non-negative");
    c.martingales.thetas = get_opt<std::vector<double>>(s, "thetas", "martingales").value_or(std::vector<double>{});
    if (auto v = get_opt<double>(s, "generation_horizon", "martingales"))
      c.martingales.generation_horizon = positive(*v, "martingales.generation_horizon");
  }
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path);
  std::ostringstream os;
  os << in.rdbuf();
  return parse_config(os.str());
}

CharacteristicPtr make_characteristic(const CharacteristicSpec& spec, std::shared_ptr<const IntensityData> mu,
                                      double alpha) {
  if (spec.kind == "one") return indicator_characteristic();
  if (spec.kind == "leaf") return fringe_characteristic(FringePattern::parse("()"), std::move(mu));
  if (spec.kind == "fringe") return fringe_characteristic(FringePattern::parse(spec.pattern), std::move(mu));
  if (spec.kind == "nerman") return nerman_characteristic(std::move(mu), alpha);
  throw ConfigError("unknown characteristic kind " + spec.kind);
}

}  // namespace cmj
