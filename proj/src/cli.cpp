#include "cmj/cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>

#include "cmj/error.hpp"
#include "cmj/harness.hpp"
#include "cmj/spectral.hpp"

namespace cmj {

namespace {

namespace fs = std::filesystem;

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw ConfigError("cannot write " + path.string());
  os << content;
}

template <class F>
void write_with(const fs::path& path, F&& f) {
  std::ostringstream os;
  f(os);
  write_file(path, os.str());
}

const char* verdict(bool ok) { return ok ? "PASS" : "FAIL"; }

}  // namespace

std::string spectral_json(const ExperimentConfig& cfg) {
  IntensityData mu(cfg.model);
  ScanOptions so;
  so.im_max = cfg.im_max;
  so.root_tol = cfg.tolerances.root_tol;
  MalthusianSolution sol = analyze(mu, so);

  // A7 asks for some theta in (0, alpha/2); try a grid across the interval.
  std::optional<double> a7_theta;
  A7Result a7;
  for (int k = 1; k < 20 && !a7_theta; ++k) {
    const double theta = sol.alpha / 2.0 * k / 20.0;
    if (!mu.in_domain(theta)) continue;
    a7 = check_a7(cfg.model, sol.alpha, theta);
    if (a7.holds) a7_theta = theta;
  }
  if (!a7_theta) throw AssumptionViolation("A7", "E[xi^(theta)^2] is infinite for every theta in (0, alpha/2)");

  nlohmann::ordered_json j;
  j["law"] = cfg.model.describe();
  j["alpha"] = sol.alpha;
  j["beta"] = sol.beta;
  j["lattice_span"] = sol.lattice_span ? nlohmann::ordered_json(*sol.lattice_span) : nlohmann::ordered_json(nullptr);
  j["residual"] = sol.residual;
  auto roots = nlohmann::ordered_json::array();
  for (const auto& r : sol.roots)
    roots.push_back({{"re", r.value.real()}, {"im", r.value.imag()}, {"multiplicity", r.multiplicity},
                     {"residual", r.residual}});
  j["roots"] = roots;
  j["boundary_roots_present"] = sol.boundary_roots_present;
  j["simple_alpha_only"] = sol.simple_alpha_only();
  j["a7"] = {{"holds", a7.holds}, {"theta", *a7_theta}, {"second_moment", a7.estimate}};
  return j.dump(2) + "\n";
}

int run_command(const std::string& command, const ExperimentConfig& cfg_in, const CliOptions& opts,
                std::ostream& log) {
  ExperimentConfig cfg = cfg_in;
  if (opts.seed) cfg.master_seed = *opts.seed;
  const fs::path out = opts.out ? fs::path(*opts.out) : fs::path(cfg.output_dir);
  fs::create_directories(out);
  RunOptions ro;
  ro.threads = std::max(1u, opts.threads);
  ro.aalpha_bias = opts.aalpha_bias;

  if (command == "spectral") {
    const std::string j = spectral_json(cfg);
    write_file(out / "spectral.json", j);
    log << j;
    return 0;
  }
  if (command == "simulate") {
    StopRule stop = TimeHorizon{cfg.horizons.back()};
    if (cfg.simulate.time) stop = TimeHorizon{*cfg.simulate.time};
    if (cfg.simulate.weight) stop = WeightThreshold{*cfg.simulate.weight};
    Population pop = simulate(cfg.model, stop, derive_seed(cfg.master_seed, Stream::replica, 0));
    write_with(out / "population.csv", [&](std::ostream& os) { pop.write_csv(os); });
    log << "simulate: " << pop.size() << " nodes written to " << (out / "population.csv").string() << "\n";
    return 0;
  }
  if (command == "lln") {
    LlnReport r = run_lln(cfg, ro);
    write_file(out / "report.json", to_json(r));
    write_with(out / "replicas.csv", [&](std::ostream& os) { write_replicas_csv(r.replicas, os); });
    log << "lln: " << verdict(r.passed) << " a_alpha=" << r.a_alpha << "\n";
    return 0;
  }
  if (command == "clt") {
    CltReport r = run_clt(cfg, ro);
    write_file(out / "report.json", to_json(r));
    write_with(out / "sigma.csv", [&](std::ostream& os) { write_sigma_csv(r.sigma, os); });
    write_file(out / "sigma.json", sigma_json(r.sigma));
    if (r.degenerate) {
      log << "clt: degenerate regime: " << r.reason << "\n";
      return static_cast<int>(ExitCode::unsupported_regime);
    }
    write_with(out / "replicas.csv", [&](std::ostream& os) { write_replicas_csv(r.replicas, os); });
    log << "clt: " << verdict(r.passed) << " ks_p=" << r.ks_p_value << " ad_p=" << r.anderson_darling_p_value
        << " sigma2_ratio=" << r.sigma2_ratio << " survivors=" << r.n_survived << "\n";
    return 0;
  }
  if (command == "fringe") {
    FringeReport r = run_fringe_census(cfg, ro);
    write_file(out / "report.json", to_json(r));
    log << "fringe: " << verdict(r.passed);
    for (const auto& row : r.rows) {
      log << ' ' << row.pattern << '=' << row.mean_fraction;
      if (row.predicted_fraction) log << " (predicted " << *row.predicted_fraction << ')';
    }
    log << "\n";
    return 0;
  }
  if (command == "martingales") {
    MartingaleReport r = run_martingale_suite(cfg, ro);
    write_file(out / "report.json", to_json(r));
    for (const auto& tr : r.traces)
      write_with(out / ("trace_" + tr.name + ".csv"), [&](std::ostream& os) { write_trace_csv(tr, os); });
    log << "martingales: " << verdict(r.passed) << " traces=" << r.traces.size() << "\n";
    return 0;
  }
  throw ConfigError("unknown command " + command);
}

int cli_main(int argc, char** argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Simulator and numerical checks for supercritical CMJ branching processes"};
  app.require_subcommand(1);
  CliOptions opts;
  app.add_option("--config", opts.config_path, "Experiment configuration (YAML)")->required()->check(CLI::ExistingFile);
  app.add_option("--seed", opts.seed, "Master seed (overrides master_seed)");
  app.add_option("--threads", opts.threads, "Worker threads")->check(CLI::Range(1u, 1024u));
  app.add_option("--out", opts.out, "Output directory (overrides output_dir)");
  app.add_option("--inject-aalpha-bias", opts.aalpha_bias, "Relative bias added to a_alpha (negative control)");
  const std::pair<const char*, const char*> commands[] = {
      {"spectral", "Malthusian parameter, beta, roots in the critical strip, A7 check"},
      {"simulate", "Simulate one population and dump it as CSV"},
      {"lln", "Law of large numbers: e^{-alpha t} Z_t^phi against the renewal prediction"},
      {"clt", "CLT distributional test with KS and Anderson-Darling, sigma^2 cross-check"},
      {"fringe", "Fringe-tree census against renewal predictions"},
      {"martingales", "Mean and variance traces of W_t, Biggins and complex martingales"}};
  for (auto [name, help] : commands) app.add_subcommand(name, help)->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << "\n" << app.help();
    return static_cast<int>(ExitCode::usage);
  }
  const std::string command = app.get_subcommands().front()->get_name();
  try {
    ExperimentConfig cfg = load_config(opts.config_path);
    return run_command(command, cfg, opts, out);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return static_cast<int>(e.exit_code());
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return static_cast<int>(ExitCode::usage);
  }
}

}  // namespace cmj
