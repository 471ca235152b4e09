#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "cmj/cli.hpp"
#include "cmj/error.hpp"
#include "cmj/harness.hpp"
#include "cmj/stats.hpp"

namespace py = pybind11;
using namespace cmj;

namespace {

RunOptions run_options(unsigned threads, double bias) {
  RunOptions o;
  o.threads = threads;
  o.aalpha_bias = bias;
  return o;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Simulator and numerical checks for supercritical CMJ branching processes";

  auto base = py::register_exception<Error>(m, "CmjError");
  py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
  py::register_exception<AssumptionViolation>(m, "AssumptionViolation", base.ptr());
  py::register_exception<UnsupportedRegime>(m, "UnsupportedRegime", base.ptr());
  py::register_exception<ResourceError>(m, "ResourceError", base.ptr());
  py::register_exception<DomainError>(m, "DomainError", base.ptr());
  py::register_exception<UndecidableError>(m, "UndecidableError", base.ptr());
  py::register_exception<CapabilityError>(m, "CapabilityError", base.ptr());
  py::register_exception<NumericalError>(m, "NumericalError", base.ptr());

  // Reports cross the boundary as JSON text; the Python package decodes them.
  m.def(
      "spectral", [](const std::string& config) { return spectral_json(parse_config(config)); }, py::arg("config"),
      "Spectral report for a configuration document.");
  m.def(
      "run_lln",
      [](const std::string& config, unsigned threads) {
        py::gil_scoped_release release;
        return to_json(run_lln(parse_config(config), run_options(threads, 0.0)));
      },
      py::arg("config"), py::arg("threads") = 1);
  m.def(
      "run_clt",
      [](const std::string& config, unsigned threads, double aalpha_bias) {
        py::gil_scoped_release release;
        return to_json(run_clt(parse_config(config), run_options(threads, aalpha_bias)));
      },
      py::arg("config"), py::arg("threads") = 1, py::arg("aalpha_bias") = 0.0);
  m.def(
      "run_fringe_census",
      [](const std::string& config, unsigned threads) {
        py::gil_scoped_release release;
        return to_json(run_fringe_census(parse_config(config), run_options(threads, 0.0)));
      },
      py::arg("config"), py::arg("threads") = 1);
  m.def(
      "run_martingale_suite",
      [](const std::string& config, unsigned threads) {
        py::gil_scoped_release release;
        return to_json(run_martingale_suite(parse_config(config), run_options(threads, 0.0)));
      },
      py::arg("config"), py::arg("threads") = 1);
  m.def(
      "simulate_csv",
      [](const std::string& config, std::uint64_t seed) {
        ExperimentConfig cfg = parse_config(config);
        StopRule stop = TimeHorizon{cfg.simulate.time.value_or(cfg.horizons.back())};
        if (cfg.simulate.weight) stop = WeightThreshold{*cfg.simulate.weight};
        std::ostringstream os;
        simulate(cfg.model, stop, seed).write_csv(os);
        return os.str();
      },
      py::arg("config"), py::arg("seed"), "Population dump (node_id,parent_id,birth_time,child_rank).");
  m.def(
      "ks_normal",
      [](std::vector<double> x) {
        auto r = cmj::ks_normal(std::move(x));
        return py::make_tuple(r.statistic, r.p_value);
      },
      py::arg("x"), "KS statistic and asymptotic p-value against N(0, 1).");
  m.def(
      "anderson_darling_normal",
      [](std::vector<double> x) {
        auto r = cmj::anderson_darling_normal(std::move(x));
        return py::make_tuple(r.statistic, r.p_value);
      },
      py::arg("x"), "Anderson-Darling A^2 and p-value against N(0, 1).");
}
