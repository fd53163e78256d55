#include <pybind11/complex.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "dsasim/engine.hpp"

namespace py = pybind11;
using namespace dsa;

namespace {

Theta theta_from_list(const std::vector<double>& v) {
  if (v.size() != 6)
    throw py::value_error("theta must be [p00,p01,p10,p11,q0,q1]");
  return Theta::from_array({v[0], v[1], v[2], v[3], v[4], v[5]});
}

std::vector<double> theta_to_list(const Theta& t) {
  const auto a = t.as_array();
  return {a.begin(), a.end()};
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Spectrum occupancy simulation, model estimation and sensing-policy solver";

  py::class_<Theta>(m, "Theta")
      .def(py::init([](double p00, double p01, double p10, double p11, double q0,
                       double q1) {
             return Theta{p00, p01, p10, p11, q0, q1};
           }),
           py::arg("p00"), py::arg("p01"), py::arg("p10"), py::arg("p11"),
           py::arg("q0"), py::arg("q1"))
      .def_static("from_list", &theta_from_list)
      .def("to_list", &theta_to_list)
      .def_readwrite("p00", &Theta::p00)
      .def_readwrite("p01", &Theta::p01)
      .def_readwrite("p10", &Theta::p10)
      .def_readwrite("p11", &Theta::p11)
      .def_readwrite("q0", &Theta::q0)
      .def_readwrite("q1", &Theta::q1)
      .def("__repr__", [](const Theta& t) {
        std::string s = "Theta(";
        const auto a = t.as_array();
        const char* names[] = {"p00", "p01", "p10", "p11", "q0", "q1"};
        for (int i = 0; i < 6; ++i)
          s += std::string(i ? ", " : "") + names[i] + "=" + std::to_string(a[i]);
        return s + ")";
      });

  m.def(
      "transition_probability",
      [](std::uint32_t from, std::uint32_t to, int width, const Theta& theta) {
        return transition_probability({from, width}, {to, width}, theta);
      },
      py::arg("from_state"), py::arg("to_state"), py::arg("width"),
      py::arg("theta"));

  m.def(
      "sample_trace",
      [](const Theta& theta, int width, std::size_t tau, std::uint64_t seed,
         const std::string& init) {
        Rng rng(seed);
        const InitDistribution dist = init == "all-idle"
                                          ? InitDistribution::AllIdle
                                          : InitDistribution::Uniform;
        return sample_trace(theta, width, tau, dist, rng).states;
      },
      py::arg("theta"), py::arg("width"), py::arg("tau"), py::arg("seed"),
      py::arg("init") = "uniform");

  m.def(
      "trace_log_likelihood",
      [](const std::vector<std::uint32_t>& states, int width, const Theta& theta) {
        OccupancyTrace trace{width, states};
        const LogProb ll = trace_log_likelihood(trace, theta);
        return py::make_tuple(ll.value, ll.finite);
      },
      py::arg("states"), py::arg("width"), py::arg("theta"));

  m.def(
      "bic",
      [](const std::vector<std::uint32_t>& states, int width, const Theta& theta,
         int gamma_params, std::size_t nu) {
        OccupancyTrace trace{width, states};
        return bic(trace, theta, gamma_params, nu).value;
      },
      py::arg("states"), py::arg("width"), py::arg("theta"),
      py::arg("gamma_params") = 6, py::arg("nu"));

  m.def("marcum_q1", &marcum_q1, py::arg("a"), py::arg("b"));
  m.def("los_probability", &los_probability, py::arg("elevation_rad"),
        py::arg("z1"), py::arg("z2"));
  m.def("outage_probability", &outage_probability, py::arg("rate_bps"),
        py::arg("psi"), py::arg("k_factor"), py::arg("p_t"), py::arg("sigma_v2"),
        py::arg("w_hz"));
  m.def("adapt_rate", &adapt_rate, py::arg("psi"), py::arg("k_factor"),
        py::arg("p_t"), py::arg("sigma_v2"), py::arg("w_hz"));

  m.def(
      "posterior_update",
      [](const std::vector<double>& prior, const std::vector<int>& indices,
         const std::vector<std::complex<double>>& samples, double p_t,
         double sigma_h2, double sigma_v2) {
        ObservationVector obs{indices, samples};
        return posterior_update(prior, obs, {p_t, sigma_h2, sigma_v2});
      },
      py::arg("prior"), py::arg("indices"), py::arg("samples"), py::arg("p_t"),
      py::arg("sigma_h2"), py::arg("sigma_v2"));

  m.def(
      "propagate_prior",
      [](const std::vector<double>& posterior, const Theta& theta, int width,
         int delta) {
        const TransitionModel model(theta, width);
        const HammingNeighborhoods nbhd(width, delta == 0 ? width : delta);
        return propagate_prior_hamming(posterior, model, nbhd);
      },
      py::arg("posterior"), py::arg("theta"), py::arg("width"),
      py::arg("delta") = 0);

  m.def(
      "marginal_occupancy",
      [](const std::vector<double>& belief, int width) {
        return marginal_occupancy(belief, width);
      },
      py::arg("belief"), py::arg("width"));

  m.def(
      "access_decision",
      [](const std::vector<double>& marginals, double lambda) {
        const AccessDecision phi = access_decision(marginals, lambda);
        std::vector<int> bits(phi.width);
        for (int k = 0; k < phi.width; ++k) bits[k] = (phi.bits >> k) & 1u;
        return bits;
      },
      py::arg("marginals"), py::arg("lambda_"));

  m.def(
      "estimate",
      [](const Theta& theta_true, int k, int fragment_width, int sensing_budget,
         std::size_t tau, std::uint64_t seed, int max_iters, double tol,
         double snr_db) {
        ScenarioConfig cfg;
        cfg.k = k;
        cfg.fragment_width = fragment_width;
        cfg.sensing_budget = sensing_budget;
        cfg.theta_true = theta_true;
        cfg.sensing.sigma_v2 = 1.0;
        cfg.sensing.sigma_h2 = 1.0;
        cfg.sensing.p_t = std::pow(10.0, snr_db / 10.0);
        cfg.seed = seed;
        cfg.validate();
        const SyntheticLog log = synthesize_sensing_log(cfg, tau, seed);
        EstimateOptions opts;
        opts.max_iters = max_iters;
        opts.tol = tol;
        opts.obs = cfg.sensing;
        opts.reference = theta_true;
        const EstimateResult res = estimate(log.fragment_logs, Theta::all_half(), opts);
        py::dict out;
        out["theta"] = res.theta;
        out["converged"] = res.converged;
        out["mse"] = res.trace.empty() ? 0.0 : *res.trace.back().mse_vs_reference;
        out["iterations"] = res.trace.size();
        return out;
      },
      py::arg("theta_true"), py::arg("k") = 18, py::arg("fragment_width") = 6,
      py::arg("sensing_budget") = 6, py::arg("tau") = 10000, py::arg("seed") = 1,
      py::arg("max_iters") = 50, py::arg("tol") = 1e-7, py::arg("snr_db") = 10.0);

  m.def(
      "solve_fragment",
      [](const Theta& theta, int width, int budget, int u_beliefs, int n_mc,
         double gamma, double epsilon, int delta, double lambda,
         std::uint64_t seed) {
        SolverConfig sc;
        sc.u_beliefs = u_beliefs;
        sc.n_mc = n_mc;
        sc.gamma = gamma;
        sc.epsilon = epsilon;
        sc.delta = delta;
        sc.lambda = lambda;
        sc.seed = seed;
        const SolveResult res = solve_fragment(theta, width, budget, sc, {10.0, 1.0, 1.0});
        py::dict out;
        out["converged"] = res.converged;
        out["iterations"] = res.trace.size();
        py::list entries;
        for (const auto& e : res.policy.entries) {
          py::dict d;
          d["action"] = e.action;
          d["alpha"] = e.alpha;
          entries.append(d);
        }
        out["entries"] = entries;
        return out;
      },
      py::arg("theta"), py::arg("width") = 3, py::arg("budget") = 1,
      py::arg("u_beliefs") = 32, py::arg("n_mc") = 16, py::arg("gamma") = 0.9,
      py::arg("epsilon") = 1e-4, py::arg("delta") = 0, py::arg("lambda_") = 1.0,
      py::arg("seed") = 1);

  m.def(
      "run_scenario_json",
      [](const std::string& config_json) {
        const ScenarioConfig cfg = parse_config_json(config_json);
        const RunOutcome outcome = run_scenario(cfg);
        py::dict out;
        out["mean_utility"] = outcome.report.mean_utility;
        out["mean_normalized_loss"] = outcome.report.mean_normalized_loss;
        out["p_fa"] = outcome.report.p_fa;
        out["p_md"] = outcome.report.p_md;
        out["cr_throughput_bps"] = outcome.report.cr_throughput_bps;
        out["lu_throughput_bps"] = outcome.report.lu_throughput_bps;
        out["theta_estimate"] = theta_to_list(outcome.theta_estimate);
        out["estimator_converged"] = outcome.estimator_converged;
        out["solver_converged"] = outcome.solver_converged;
        return out;
      },
      py::arg("config_json"));

  m.def(
      "run_consensus",
      [](const std::vector<std::vector<double>>& rssi_db, double threshold_db,
         int quorum, int stability_rounds, std::uint64_t seed) {
        const ConsensusOutcome res =
            run_consensus(rssi_db, threshold_db, {quorum, stability_rounds}, seed);
        py::dict out;
        out["all_reached"] = res.all_reached;
        out["rounds"] = res.rounds_used;
        py::list lists;
        for (const auto& l : res.lists) {
          if (l)
            lists.append(l->order);
          else
            lists.append(py::none());
        }
        out["lists"] = lists;
        return out;
      },
      py::arg("rssi_db"), py::arg("threshold_db"), py::arg("quorum"),
      py::arg("stability_rounds") = 3, py::arg("seed") = 1);
}
