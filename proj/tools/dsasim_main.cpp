#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "dsasim/engine.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitNotConverged = 3;

std::vector<double> parse_lambda_list(const std::string& text) {
  std::vector<double> out;
  std::istringstream ss(text);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    if (tok.empty()) continue;
    out.push_back(std::stod(tok));
  }
  return out;
}

dsa::ScenarioConfig load(const std::string& config_path,
                         const std::optional<std::uint64_t>& seed,
                         const std::optional<bool>& concurrent) {
  dsa::ScenarioConfig cfg =
      config_path.empty() ? dsa::ScenarioConfig{} : dsa::load_config(config_path);
  if (seed) cfg.seed = *seed;
  if (concurrent) cfg.run.concurrent = *concurrent;
  cfg.validate();
  return cfg;
}

void write_run_log_csv(const std::vector<dsa::EpisodeLogRow>& log, int width,
                       const std::string& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open for writing: " + path);
  os << "slot,sensed,access,truth,utility\n";
  auto mask_list = [&](std::uint32_t mask) {
    std::string s;
    for (int k = 0; k < width; ++k)
      if ((mask >> k) & 1u) {
        if (!s.empty()) s += ';';
        s += std::to_string(k + 1);
      }
    return s;
  };
  for (const auto& row : log) {
    os << row.slot << ',';
    for (std::size_t i = 0; i < row.sensed.size(); ++i)
      os << (i ? ";" : "") << row.sensed[i] + 1;
    os << ',' << mask_list(row.access_mask) << ',';
    for (int k = 0; k < width; ++k) os << ((row.truth_mask >> k) & 1u);
    os << ',' << dsa::format_number(row.utility) << "\n";
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Spectrum occupancy simulator and sensing/access policy solver"};
  app.require_subcommand(1);

  std::string config_path, out_dir = "out", in_dir, trace_path, lambda_text;
  std::optional<std::uint64_t> seed;
  std::optional<bool> concurrent;
  std::uint64_t tau_override = 0;

  auto add_common = [&](CLI::App* cmd, bool needs_config) {
    auto* opt = cmd->add_option("--config", config_path, "Scenario config (JSON)");
    if (needs_config) opt->check(CLI::ExistingFile);
    cmd->add_option("--seed", [&seed](const std::vector<std::string>& v) {
      seed = std::stoull(v[0]);
      return true;
    }, "Master seed override");
    cmd->add_option("--out", out_dir, "Output directory");
  };

  auto* sim = app.add_subcommand("simulate", "Sample an occupancy trace");
  add_common(sim, false);
  sim->add_option("--tau", tau_override, "Trace length (default: run.horizon)");

  auto* est = app.add_subcommand("estimate", "Baum-Welch model estimation");
  add_common(est, false);
  est->add_option("--trace", trace_path,
                  "Estimate from a fully observed occupancy trace CSV")
      ->check(CLI::ExistingFile);

  auto* solve = app.add_subcommand("solve", "Solve per-fragment sensing policies");
  add_common(solve, false);

  auto* run = app.add_subcommand("run", "End-to-end single-agent scenario");
  add_common(run, false);
  run->add_option("--concurrent-learning",
                  [&concurrent](const std::vector<std::string>& v) {
                    concurrent = (v[0] == "true" || v[0] == "1");
                    return true;
                  },
                  "Override run.concurrent (true/false)");

  auto* ma = app.add_subcommand("ma-run", "Distributed multi-agent episode");
  add_common(ma, false);

  auto* roc = app.add_subcommand("roc", "Operating-point sweep over lambda");
  add_common(roc, false);
  roc->add_option("--lambda", lambda_text, "Comma-separated lambda list");

  auto* rep = app.add_subcommand("report", "Re-emit a previously written report");
  rep->add_option("--in", in_dir, "Report directory to load")->required();
  rep->add_option("--out", out_dir, "Output directory");

  CLI11_PARSE(app, argc, argv);

  try {
    std::filesystem::create_directories(out_dir);
    if (sim->parsed()) {
      const dsa::ScenarioConfig cfg = load(config_path, seed, concurrent);
      const std::size_t tau = tau_override ? tau_override : cfg.run.horizon;
      dsa::Rng rng = dsa::Rng::derive(cfg.seed, 0xc4a1ull);
      const dsa::OccupancyTrace trace =
          dsa::sample_trace(cfg.theta_true, cfg.k, tau, cfg.init, rng);
      dsa::write_trace_csv(trace, out_dir + "/trace.csv");
      return kExitOk;
    }
    if (est->parsed()) {
      const dsa::ScenarioConfig cfg = load(config_path, seed, concurrent);
      if (!trace_path.empty()) {
        const dsa::OccupancyTrace trace = dsa::read_trace_csv(trace_path);
        const dsa::EStepStats counts = dsa::count_transitions(trace);
        const dsa::MStepResult res = dsa::m_step(counts, dsa::Theta::all_half());
        dsa::EstimateIteration rec;
        rec.iteration = 0;
        const dsa::LogProb ll = dsa::trace_log_likelihood(trace, res.theta, cfg.init);
        rec.log_likelihood = ll.value;
        rec.theta = res.theta;
        dsa::write_estimate_trace_csv({rec}, out_dir + "/estimator_trace.csv");
        return kExitOk;
      }
      const dsa::SyntheticLog log =
          dsa::synthesize_sensing_log(cfg, cfg.run.horizon, cfg.seed);
      dsa::EstimateOptions opts;
      opts.max_iters = cfg.estimator.max_iters;
      opts.tol = cfg.estimator.tol;
      opts.obs = cfg.sensing;
      opts.reference = cfg.theta_true;
      const dsa::EstimateResult res =
          dsa::estimate(log.fragment_logs, dsa::Theta::all_half(), opts);
      dsa::write_estimate_trace_csv(res.trace, out_dir + "/estimator_trace.csv");
      return res.converged ? kExitOk : kExitNotConverged;
    }
    if (solve->parsed()) {
      const dsa::ScenarioConfig cfg = load(config_path, seed, concurrent);
      bool all_converged = true;
      for (const dsa::FragmentSpec& frag : cfg.fragments()) {
        dsa::SolverConfig sc = cfg.solver;
        sc.delta = sc.delta == 0 ? cfg.fragment_width : sc.delta;
        sc.seed = dsa::mix64(cfg.seed ^ dsa::mix64(0x501eull +
                                                   static_cast<std::uint64_t>(frag.index)));
        const dsa::SolveResult res = dsa::solve_fragment(
            cfg.theta_true, frag.width, frag.budget, sc, cfg.sensing);
        all_converged = all_converged && res.converged;
        const std::string tag = std::to_string(frag.index);
        dsa::write_policy_csv(res.policy, out_dir + "/policy_f" + tag + ".csv");
        dsa::write_solver_trace_csv(res.trace,
                                    out_dir + "/solver_trace_f" + tag + ".csv");
      }
      return all_converged ? kExitOk : kExitNotConverged;
    }
    if (run->parsed()) {
      const dsa::ScenarioConfig cfg = load(config_path, seed, concurrent);
      const dsa::RunOutcome outcome = dsa::run_scenario(cfg);
      dsa::emit_report(outcome.report, out_dir);
      write_run_log_csv(outcome.episode_log, cfg.k, out_dir + "/run_log.csv");
      return (outcome.estimator_converged && outcome.solver_converged)
                 ? kExitOk
                 : kExitNotConverged;
    }
    if (ma->parsed()) {
      const dsa::ScenarioConfig cfg = load(config_path, seed, concurrent);
      const dsa::MaRunOutcome outcome = dsa::run_distributed_episode(cfg);
      dsa::emit_report(outcome.report, out_dir);
      dsa::write_episode_log_csv(outcome.episode_log, out_dir + "/episode_log.csv");
      return outcome.consensus_reached ? kExitOk : kExitNotConverged;
    }
    if (roc->parsed()) {
      const dsa::ScenarioConfig cfg = load(config_path, seed, concurrent);
      const std::vector<double> lambdas =
          lambda_text.empty() ? std::vector<double>{0, 0.25, 0.5, 1, 2, 4, 8}
                              : parse_lambda_list(lambda_text);
      dsa::MetricsReport report;
      report.roc = dsa::roc_sweep(cfg, lambdas, {});
      dsa::emit_report(report, out_dir);
      return kExitOk;
    }
    if (rep->parsed()) {
      const dsa::MetricsReport report = dsa::load_report(in_dir);
      dsa::emit_report(report, out_dir);
      return kExitOk;
    }
  } catch (const dsa::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return kExitOk;
}
