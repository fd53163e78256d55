#include "dsasim/engine.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>

namespace dsa {

namespace {

constexpr std::uint64_t kChainTag = 0xc4a1ull;
constexpr std::uint64_t kSenseTag = 0x5e25ull;
constexpr std::uint64_t kPolicyTag = 0x9017ull;
constexpr std::uint64_t kChannelTag = 0xc4a2ull;
constexpr std::uint64_t kWalkTag = 0x3a1bull;
constexpr std::uint64_t kSolveTag = 0x501eull;
constexpr std::uint64_t kRssiTag = 0x4551ull;
constexpr std::uint64_t kNpTag = 0x2b01ull;

double horizontal_dist(const Position& a, const Position& b) {
  return std::hypot(a.x - b.x, a.y - b.y);
}

double link_distance(const Position& a, const Position& b) {
  return std::max(1.0, std::hypot(a.x - b.x, a.y - b.y, a.z - b.z));
}

double elevation(const Position& a, const Position& b) {
  const double dh = horizontal_dist(a, b);
  const double dz = std::abs(a.z - b.z);
  if (dh < 1e-9) return std::numbers::pi / 2.0;
  const double chi = std::atan2(std::max(dz, 1e-6), dh);
  return std::clamp(chi, 1e-6, std::numbers::pi / 2.0);
}

Position random_in_disk(const Position& center, double radius, double z, Rng& rng) {
  const double r = radius * std::sqrt(rng.u01());
  const double phi = 2.0 * std::numbers::pi * rng.u01();
  return {center.x + r * std::cos(phi), center.y + r * std::sin(phi), z};
}

// Quasi-static link: LoS branch and K-factor are drawn once per episode;
// the pathloss tracks the (slowly moving) receiver distance.
struct EpisodeLink {
  bool is_los = false;
  double k_factor = 0;

  double psi(const Position& tx, const Position& rx,
             const ChannelEnvParams& env) const {
    return pathloss(is_los, link_distance(tx, rx), env);
  }
};

EpisodeLink draw_link(const Position& tx, const Position& rx,
                      const ChannelEnvParams& env, Rng& rng) {
  const LinkState ls = sample_link(link_distance(tx, rx), elevation(tx, rx), env, rng);
  return {ls.is_los, ls.k_factor};
}

double gain(const EpisodeLink& link, const Position& tx, const Position& rx,
            const ChannelEnvParams& env, Rng& rng) {
  return link.psi(tx, rx, env) * std::norm(sample_small_scale(link.k_factor, rng));
}

// Random-waypoint walk inside a disk; one step per slot.
struct Walker {
  Position center;
  double radius = 0;
  double step = 0;
  Position pos;
  Position target;

  void init(Rng& rng) {
    pos = random_in_disk(center, radius, 0.0, rng);
    target = random_in_disk(center, radius, 0.0, rng);
  }
  void advance(Rng& rng) {
    const double d = std::hypot(target.x - pos.x, target.y - pos.y);
    if (d < step) {
      pos = target;
      target = random_in_disk(center, radius, 0.0, rng);
      return;
    }
    pos.x += step * (target.x - pos.x) / d;
    pos.y += step * (target.y - pos.y) / d;
  }
};

std::uint32_t fragment_bits(std::uint32_t global, const FragmentSpec& f) {
  return (global >> f.base) & ((1u << f.width) - 1u);
}

}  // namespace

SyntheticLog synthesize_sensing_log(const ScenarioConfig& cfg, std::size_t tau,
                                    std::uint64_t seed) {
  const auto frags = cfg.fragments();
  Rng chain_rng = Rng::derive(seed, kChainTag);
  Rng sense_rng = Rng::derive(seed, kSenseTag);
  Rng policy_rng = Rng::derive(seed, kPolicyTag);

  SyntheticLog out;
  out.trace = sample_trace(cfg.theta_true, cfg.k, tau, cfg.init, chain_rng);
  out.fragment_logs.resize(frags.size());
  for (std::size_t f = 0; f < frags.size(); ++f)
    out.fragment_logs[f].width = frags[f].width;
  for (std::size_t t = 0; t < tau; ++t) {
    for (std::size_t f = 0; f < frags.size(); ++f) {
      const auto& spec = frags[f];
      const OccupancyState truth{fragment_bits(out.trace.states[t], spec),
                                 spec.width};
      const std::vector<int> action = policy_rng.subset(spec.width, spec.budget);
      const ObservationVector obs = sense(truth, action, cfg.sensing, sense_rng);
      out.fragment_logs[f].slots.push_back({obs.indices, obs.samples});
    }
  }
  return out;
}

RunOutcome run_scenario(const ScenarioConfig& cfg) {
  cfg.validate();
  const auto frags = cfg.fragments();
  const int nfrag = static_cast<int>(frags.size());
  const std::size_t tau = cfg.run.horizon;
  const double lambda = cfg.solver.lambda;
  const int delta = cfg.solver.delta == 0 ? cfg.fragment_width : cfg.solver.delta;

  RunOutcome out;
  out.theta_estimate = Theta::all_half();
  if (tau == 0) return out;

  Rng chain_rng = Rng::derive(cfg.seed, kChainTag);
  Rng sense_rng = Rng::derive(cfg.seed, kSenseTag);
  Rng policy_rng = Rng::derive(cfg.seed, kPolicyTag);
  Rng channel_rng = Rng::derive(cfg.seed, kChannelTag);
  Rng walk_rng = Rng::derive(cfg.seed, kWalkTag);

  const bool perseus = cfg.run.policy == PolicyMode::Perseus;
  const bool genie = cfg.run.policy == PolicyMode::Genie;
  const bool learn = !cfg.run.model_known && !genie;
  const std::size_t learning_end =
      learn ? std::min(cfg.run.learning_slots, tau) : 0;

  // ---- channel geometry, drawn once per episode ----
  const int num_lu = cfg.num_lu;
  const int lu_block = cfg.k / num_lu;  // static subcarrier ownership
  std::vector<Position> lu_rx(num_lu);
  for (int j = 0; j < num_lu; ++j)
    lu_rx[j] = random_in_disk(cfg.geometry.lu_tx[j], cfg.geometry.lu_rx_radius_m,
                              0.0, channel_rng);
  Walker cr_rx;
  cr_rx.center = cfg.geometry.cr_tx;
  cr_rx.radius = cfg.geometry.cr_rx_radius_m;
  cr_rx.step = cfg.geometry.cr_speed_mps * cfg.run.slot_seconds;
  cr_rx.init(walk_rng);
  std::vector<EpisodeLink> lu_sig(num_lu), cr_to_lu(num_lu), lu_to_cr(num_lu);
  for (int j = 0; j < num_lu; ++j) {
    lu_sig[j] = draw_link(cfg.geometry.lu_tx[j], lu_rx[j], cfg.channel, channel_rng);
    cr_to_lu[j] = draw_link(cfg.geometry.cr_tx, lu_rx[j], cfg.channel, channel_rng);
    lu_to_cr[j] = draw_link(cfg.geometry.lu_tx[j], cr_rx.pos, cfg.channel, channel_rng);
  }
  EpisodeLink cr_sig = draw_link(cfg.geometry.cr_tx, cr_rx.pos, cfg.channel, channel_rng);

  // ---- learned-model state ----
  Theta theta_belief = cfg.run.model_known ? cfg.theta_true : Theta::all_half();
  std::vector<TransitionModel> models;
  const HammingNeighborhoods nbhd(cfg.fragment_width, delta);
  auto rebuild_models = [&]() {
    models.clear();
    for (int f = 0; f < nfrag; ++f)
      models.emplace_back(theta_belief, cfg.fragment_width);
  };
  rebuild_models();

  std::vector<SensingLog> logs(nfrag);
  for (int f = 0; f < nfrag; ++f) logs[f].width = cfg.fragment_width;

  int em_iteration_base = 0;
  auto run_em = [&](int iters, double tol) {
    EstimateOptions opts;
    opts.max_iters = iters;
    opts.tol = tol;
    opts.obs = cfg.sensing;
    opts.reference = cfg.theta_true;
    const EstimateResult res = estimate(logs, theta_belief, opts);
    for (EstimateIteration rec : res.trace) {
      rec.iteration += em_iteration_base;
      out.report.estimator_trace.push_back(rec);
    }
    em_iteration_base += static_cast<int>(res.trace.size());
    theta_belief = res.theta;
    out.theta_estimate = res.theta;
    out.estimator_converged = res.converged;
    rebuild_models();
  };

  auto solve_all = [&]() {
    out.policies.clear();
    for (int f = 0; f < nfrag; ++f) {
      SolverConfig sc = cfg.solver;
      sc.delta = delta;
      sc.seed = mix64(cfg.seed ^ mix64(kSolveTag + static_cast<std::uint64_t>(f)));
      const SolveResult res =
          solve_fragment(theta_belief, cfg.fragment_width, frags[f].budget, sc,
                         cfg.sensing);
      out.solver_converged = out.solver_converged && res.converged;
      out.policies.push_back(res.policy);
      for (const auto& it : res.trace)
        out.report.solver_trace.push_back({f, it});
    }
  };

  if (perseus && learning_end == 0) solve_all();

  // ---- slot loop ----
  std::vector<Belief> priors(nfrag, uniform_belief(cfg.fragment_width));
  OccupancyState truth{sample_initial_state(cfg.k, cfg.init, chain_rng),
                       cfg.k};

  std::vector<double> realized_trace, oracle_trace;
  realized_trace.reserve(tau);
  oracle_trace.reserve(tau);
  std::vector<std::vector<CrChannelUse>> cr_rows;
  std::vector<std::vector<LuChannelUse>> lu_rows;
  std::size_t idle_total = 0, idle_not_accessed = 0, busy_total = 0,
              busy_accessed = 0;
  double utility_sum_eval = 0.0;
  std::size_t eval_slots = 0;

  for (std::size_t t = 1; t <= tau; ++t) {
    const bool learning = t <= learning_end;
    const bool eval = !learning;
    std::uint32_t phi_mask = 0;
    std::vector<int> sensed_global;

    if (genie) {
      phi_mask = ~truth.bits & ((1u << cfg.k) - 1u);
    } else {
      for (int f = 0; f < nfrag; ++f) {
        const auto& spec = frags[f];
        const OccupancyState ftruth{fragment_bits(truth.bits, spec), spec.width};
        std::vector<int> action;
        const bool has_policy = perseus && !out.policies.empty();
        if ((learning && !(cfg.run.concurrent && has_policy)) || !perseus) {
          action = policy_rng.subset(spec.width, spec.budget);
        } else if (has_policy) {
          action = policy_action(priors[f], out.policies[f]);
        }
        const ObservationVector obs = sense(ftruth, action, cfg.sensing, sense_rng);
        for (int k : action) sensed_global.push_back(spec.base + k);
        if (learning) logs[f].slots.push_back({obs.indices, obs.samples});
        const Belief post = posterior_update(priors[f], obs, cfg.sensing);
        const auto marg = marginal_occupancy(post, spec.width);
        const AccessDecision phi = access_decision(marg, lambda);
        phi_mask |= static_cast<std::uint32_t>(phi.bits) << spec.base;
        priors[f] = propagate_prior_hamming(post, models[f], nbhd);
      }
    }

    const AccessDecision phi{phi_mask, cfg.k};
    const double realized = realized_reward(phi, truth, lambda);
    const double oracle = oracle_reward(truth, lambda);
    realized_trace.push_back(realized);
    oracle_trace.push_back(oracle);

    EpisodeLogRow row;
    row.slot = t;
    row.agent_id = 0;
    row.sensed = sensed_global;
    row.access_mask = phi_mask;
    row.truth_mask = truth.bits;
    row.utility = realized;
    out.episode_log.push_back(std::move(row));

    if (eval) {
      ++eval_slots;
      utility_sum_eval += realized;
      for (int k = 0; k < cfg.k; ++k) {
        const bool busy = truth.bit(k);
        const bool accessed = (phi_mask >> k) & 1u;
        if (busy) {
          ++busy_total;
          if (accessed) ++busy_accessed;
        } else {
          ++idle_total;
          if (!accessed) ++idle_not_accessed;
        }
      }
      // Channel layer: per-subcarrier small-scale gains, SINR bookkeeping.
      const double cr_psi = cr_sig.psi(cfg.geometry.cr_tx, cr_rx.pos, cfg.channel);
      const double cr_rate =
          adapt_rate(cr_psi, cr_sig.k_factor, cfg.cr_tx_power_w,
                     cfg.channel.noise_power, cfg.channel.bandwidth_hz);
      std::vector<CrChannelUse> cr_slot(cfg.k);
      std::vector<LuChannelUse> lu_slot(cfg.k);
      for (int k = 0; k < cfg.k; ++k) {
        const int owner = k / lu_block;
        const bool busy = truth.bit(k);
        const bool accessed = (phi_mask >> k) & 1u;
        double lu_rx_gain = 0, lu_interf_at_lu = 0, cr_gain = 0, lu_interf_at_cr = 0;
        if (busy || accessed) {
          if (busy) {
            lu_rx_gain = gain(lu_sig[owner], cfg.geometry.lu_tx[owner], lu_rx[owner],
                              cfg.channel, channel_rng);
            if (accessed)
              lu_interf_at_lu = gain(cr_to_lu[owner], cfg.geometry.cr_tx,
                                     lu_rx[owner], cfg.channel, channel_rng);
          }
          if (accessed) {
            cr_gain = gain(cr_sig, cfg.geometry.cr_tx, cr_rx.pos, cfg.channel,
                           channel_rng);
            if (busy)
              lu_interf_at_cr = gain(lu_to_cr[owner], cfg.geometry.lu_tx[owner],
                                     cr_rx.pos, cfg.channel, channel_rng);
          }
        }
        lu_slot[k].busy = busy;
        if (busy)
          lu_slot[k].sinr = lu_rx_gain * cfg.lu_tx_power_w /
                            (cfg.channel.noise_power +
                             (accessed ? lu_interf_at_lu * cfg.cr_tx_power_w : 0.0));
        cr_slot[k].accessed = accessed;
        cr_slot[k].rate_bps = cr_rate;
        if (accessed)
          cr_slot[k].sinr = cr_gain * cfg.cr_tx_power_w /
                            (cfg.channel.noise_power +
                             (busy ? lu_interf_at_cr * cfg.lu_tx_power_w : 0.0));
      }
      cr_rows.push_back(std::move(cr_slot));
      lu_rows.push_back(std::move(lu_slot));
    }

    cr_rx.advance(walk_rng);
    if (t < tau) truth = sample_next_state(truth, cfg.theta_true, chain_rng);

    // Estimator checkpoints and the end-of-learning convergence pass.
    if (learning && t % cfg.estimator.checkpoint_every == 0 && t < learning_end) {
      run_em(cfg.estimator.checkpoint_iters, cfg.estimator.tol);
      if (cfg.run.concurrent && perseus) solve_all();
    }
    if (learning && t == learning_end) {
      run_em(cfg.estimator.max_iters, cfg.estimator.tol);
      if (perseus) solve_all();
    }
  }

  // ---- metrics ----
  out.report.utility_trace = realized_trace;
  const LossResult full_loss = normalized_loss(realized_trace, oracle_trace);
  out.report.loss_trace = full_loss.loss;
  out.report.loss_included = full_loss.included;
  const std::span<const double> realized_eval{realized_trace.data() + learning_end,
                                              tau - learning_end};
  const std::span<const double> oracle_eval{oracle_trace.data() + learning_end,
                                            tau - learning_end};
  const LossResult eval_loss = normalized_loss(realized_eval, oracle_eval);
  out.report.mean_normalized_loss = eval_loss.mean;
  out.report.loss_slots_included = eval_loss.included_count;
  out.report.mean_utility =
      eval_slots ? utility_sum_eval / static_cast<double>(eval_slots) : 0.0;
  const RocPoint pt =
      roc_point(idle_total, idle_not_accessed, busy_total, busy_accessed, lambda);
  out.report.p_fa = pt.p_fa;
  out.report.p_md = pt.p_md;
  out.report.p_fa_defined = pt.fa_defined;
  out.report.p_md_defined = pt.md_defined;
  out.report.cr_throughput_bps = cr_throughput(cr_rows, cfg.channel.bandwidth_hz);
  const LuThroughput lu = lu_throughput(lu_rows, cfg.lu_rate_bps,
                                        cfg.channel.bandwidth_hz);
  out.report.lu_throughput_bps = lu.value;
  out.report.lu_any_transmission = lu.any_transmission;
  return out;
}

RunOutcome neyman_pearson_baseline(const ScenarioConfig& cfg,
                                   const NpBaselineConfig& np) {
  cfg.validate();
  if (!(np.target_p_fa > 0.0 && np.target_p_fa < 1.0))
    throw ConfigError("np.target_p_fa", "must be in (0,1)");
  if (np.samples_per_decision < 1)
    throw ConfigError("np.samples_per_decision", "must be >= 1");
  const std::size_t tau = cfg.run.horizon;
  RunOutcome out;
  out.theta_estimate = cfg.theta_true;
  if (tau == 0) return out;

  Rng chain_rng = Rng::derive(cfg.seed, kChainTag);
  Rng np_rng = Rng::derive(cfg.seed, kNpTag);
  const double lambda = cfg.solver.lambda;
  const int m = np.samples_per_decision;
  // Per-sample exceed probability p solves p^M = target on the noise-only
  // energy law P(|Y|^2 > eta | idle) = exp(-eta / sigma_v2).
  const double per_sample = std::pow(np.target_p_fa, 1.0 / m);
  const double eta = -cfg.sensing.sigma_v2 * std::log(per_sample);

  OccupancyState truth{sample_initial_state(cfg.k, cfg.init, chain_rng), cfg.k};
  std::vector<double> realized_trace, oracle_trace;
  std::size_t idle_total = 0, idle_not_accessed = 0, busy_total = 0,
              busy_accessed = 0;
  double utility_sum = 0.0;

  for (std::size_t t = 1; t <= tau; ++t) {
    std::uint32_t phi_mask = 0;
    for (int k = 0; k < cfg.k; ++k) {
      const double v = cfg.sensing.variance(truth.bit(k));
      bool declared_busy = true;
      for (int s = 0; s < m; ++s) {
        const double energy = -v * std::log(np_rng.u01_open());
        if (energy <= eta) {
          declared_busy = false;
          break;
        }
      }
      if (!declared_busy) phi_mask |= (1u << k);
      if (truth.bit(k)) {
        ++busy_total;
        if (!declared_busy) ++busy_accessed;
      } else {
        ++idle_total;
        if (declared_busy) ++idle_not_accessed;
      }
    }
    const AccessDecision phi{phi_mask, cfg.k};
    const double realized = realized_reward(phi, truth, lambda);
    realized_trace.push_back(realized);
    oracle_trace.push_back(oracle_reward(truth, lambda));
    utility_sum += realized;
    EpisodeLogRow row;
    row.slot = t;
    row.access_mask = phi_mask;
    row.truth_mask = truth.bits;
    row.utility = realized;
    out.episode_log.push_back(std::move(row));
    if (t < tau) truth = sample_next_state(truth, cfg.theta_true, chain_rng);
  }

  out.report.utility_trace = realized_trace;
  const LossResult loss = normalized_loss(realized_trace, oracle_trace);
  out.report.loss_trace = loss.loss;
  out.report.loss_included = loss.included;
  out.report.mean_normalized_loss = loss.mean;
  out.report.loss_slots_included = loss.included_count;
  out.report.mean_utility = utility_sum / static_cast<double>(tau);
  const RocPoint pt = roc_point(idle_total, idle_not_accessed, busy_total,
                                busy_accessed, lambda);
  out.report.p_fa = pt.p_fa;
  out.report.p_md = pt.p_md;
  out.report.p_fa_defined = pt.fa_defined;
  out.report.p_md_defined = pt.md_defined;
  return out;
}

std::vector<RocPoint> roc_sweep(const ScenarioConfig& cfg,
                                const std::vector<double>& lambdas,
                                const NpBaselineConfig& np) {
  if (lambdas.empty())
    throw ConfigError("roc.lambda", "sweep needs at least one lambda");
  std::vector<RocPoint> points;
  for (double lambda : lambdas) {
    ScenarioConfig c = cfg;
    c.solver.lambda = lambda;
    const RunOutcome run = run_scenario(c);
    RocPoint pt;
    pt.lambda = lambda;
    pt.p_fa = run.report.p_fa;
    pt.p_md = run.report.p_md;
    pt.fa_defined = run.report.p_fa_defined;
    pt.md_defined = run.report.p_md_defined;
    pt.method = "lessa";
    points.push_back(pt);
  }
  const RunOutcome base = neyman_pearson_baseline(cfg, np);
  RocPoint pt;
  pt.lambda = np.target_p_fa;
  pt.p_fa = base.report.p_fa;
  pt.p_md = base.report.p_md;
  pt.fa_defined = base.report.p_fa_defined;
  pt.md_defined = base.report.p_md_defined;
  pt.method = "np";
  points.push_back(pt);
  return points;
}

std::vector<std::vector<double>> generate_rssi_matrix(int n, double threshold_db,
                                                      std::uint64_t seed) {
  Rng rng = Rng::derive(seed, kRssiTag);
  std::vector<std::vector<double>> rssi(n, std::vector<double>(n, -300.0));
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      const double v = threshold_db + 1.0 + rng.u01() * 20.0;
      rssi[i][j] = v;
      rssi[j][i] = v;
    }
  return rssi;
}

MaRunOutcome run_distributed_episode(const ScenarioConfig& cfg) {
  cfg.validate();
  const auto& ma = cfg.multi_agent;
  const auto frags = cfg.fragments();
  const int nfrag = static_cast<int>(frags.size());
  const int n = ma.num_agents;
  const int budget = ma.per_agent_budget;
  const double lambda = cfg.solver.lambda;
  const int delta = cfg.solver.delta == 0 ? cfg.fragment_width : cfg.solver.delta;

  MaRunOutcome out;

  // ---- access-rank consensus over the control channel ----
  RankedList rank;
  if (n == 1) {
    rank.order = {0};
    out.consensus_reached = true;
    out.consensus_lists = {rank};
  } else {
    const auto rssi = ma.rssi_db.empty()
                          ? generate_rssi_matrix(n, ma.rssi_threshold_db,
                                                 mix64(cfg.seed ^ kRssiTag))
                          : ma.rssi_db;
    ConsensusParams params;
    params.quorum = ma.quorum == 0 ? (n + 1) / 2 : ma.quorum;
    params.stability_rounds = ma.stability_rounds;
    const ConsensusOutcome consensus =
        run_consensus(rssi, ma.rssi_threshold_db, params, cfg.seed, ma.round_cap,
                      ma.drop_prob);
    out.consensus_lists = consensus.lists;
    out.consensus_rounds = consensus.rounds_used;
    out.consensus_reached = consensus.all_reached;
    if (consensus.all_reached) {
      rank = *consensus.lists[0];
    } else {
      rank.order.resize(n);
      for (int i = 0; i < n; ++i) rank.order[i] = i;  // degraded fallback
    }
  }

  // Multi-agent episodes run on a known (or externally estimated) model.
  const Theta theta = cfg.theta_true;
  std::vector<TransitionModel> models;
  for (int f = 0; f < nfrag; ++f) models.emplace_back(theta, cfg.fragment_width);
  const HammingNeighborhoods nbhd(cfg.fragment_width, delta);

  Rng chain_rng = Rng::derive(cfg.seed, kChainTag);
  Rng sense_rng = Rng::derive(cfg.seed, kSenseTag);
  OccupancyState truth{sample_initial_state(cfg.k, cfg.init, chain_rng), cfg.k};

  // beliefs[agent][fragment]
  std::vector<std::vector<Belief>> beliefs(
      n, std::vector<Belief>(nfrag, uniform_belief(cfg.fragment_width)));

  std::vector<double> realized_trace, oracle_trace;
  std::size_t idle_total = 0, idle_not_accessed = 0, busy_total = 0,
              busy_accessed = 0;
  double utility_sum = 0.0;

  for (std::size_t t = 1; t <= ma.horizon; ++t) {
    // Round-robin sensing assignment by rank; rotates over slots so every
    // subcarrier is revisited.
    std::vector<std::vector<int>> sensed_by(n);
    std::vector<ObservationVector> own_obs(n);
    const std::size_t rotation = (t - 1) * static_cast<std::size_t>(n) * budget;
    std::vector<std::pair<int, std::complex<double>>> shared;
    for (int pos = 0; pos < n; ++pos) {
      const AgentId agent = rank.order[pos];
      std::vector<int> ks;
      for (int j = 0; j < budget; ++j)
        ks.push_back(static_cast<int>((rotation + static_cast<std::size_t>(pos) * budget + j) %
                                      static_cast<std::size_t>(cfg.k)));
      std::sort(ks.begin(), ks.end());
      ks.erase(std::unique(ks.begin(), ks.end()), ks.end());
      own_obs[agent] = sense(truth, ks, cfg.sensing, sense_rng);
      sensed_by[agent] = ks;
      for (std::size_t i = 0; i < own_obs[agent].indices.size(); ++i)
        shared.emplace_back(own_obs[agent].indices[i], own_obs[agent].samples[i]);
    }
    std::sort(shared.begin(), shared.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });

    // Posterior updates: fused observations in cooperative mode, own only
    // otherwise.
    std::map<AgentId, std::vector<int>> preferences;
    for (int agent = 0; agent < n; ++agent) {
      std::vector<std::pair<int, std::complex<double>>> avail;
      if (ma.cooperative) {
        avail = shared;
      } else {
        for (std::size_t i = 0; i < own_obs[agent].indices.size(); ++i)
          avail.emplace_back(own_obs[agent].indices[i], own_obs[agent].samples[i]);
      }
      std::vector<std::pair<double, int>> prefs;  // (marginal, subcarrier)
      for (int f = 0; f < nfrag; ++f) {
        const auto& spec = frags[f];
        ObservationVector obs;
        for (const auto& [k, y] : avail)
          if (k >= spec.base && k < spec.base + spec.width) {
            obs.indices.push_back(k - spec.base);
            obs.samples.push_back(y);
          }
        const Belief post = posterior_update(beliefs[agent][f], obs, cfg.sensing);
        const auto marg = marginal_occupancy(post, spec.width);
        for (int k = 0; k < spec.width; ++k)
          if (marg[k] <= 1.0 / (1.0 + lambda))
            prefs.emplace_back(marg[k], spec.base + k);
        beliefs[agent][f] = propagate_prior_hamming(post, models[f], nbhd);
      }
      std::sort(prefs.begin(), prefs.end());
      std::vector<int> order;
      order.reserve(prefs.size());
      for (const auto& [m, k] : prefs) order.push_back(k);
      preferences[agent] = std::move(order);
    }

    const auto assignment = allocate_access(rank, preferences);
    std::uint32_t phi_mask = 0;
    double slot_utility = 0.0;
    for (std::size_t pos = 0; pos < rank.order.size(); ++pos) {
      const AgentId agent = rank.order[pos];
      EpisodeLogRow row;
      row.slot = t;
      row.agent_id = agent;
      row.sensed = sensed_by[agent];
      row.truth_mask = truth.bits;
      if (assignment[pos]) {
        const int k = *assignment[pos];
        row.access = k;
        row.truth_bit = truth.bit(k);
        row.utility = truth.bit(k) ? -lambda : 1.0;
        phi_mask |= (1u << k);
        slot_utility += row.utility;
      }
      out.episode_log.push_back(std::move(row));
    }
    for (int k = 0; k < cfg.k; ++k) {
      const bool busy = truth.bit(k);
      const bool accessed = (phi_mask >> k) & 1u;
      if (busy) {
        ++busy_total;
        if (accessed) ++busy_accessed;
      } else {
        ++idle_total;
        if (!accessed) ++idle_not_accessed;
      }
    }
    realized_trace.push_back(slot_utility);
    // The ensemble can claim at most one subcarrier per agent.
    const double idle_now = oracle_reward(truth, lambda);
    oracle_trace.push_back(std::min(idle_now, static_cast<double>(n)));
    utility_sum += slot_utility;
    if (t < ma.horizon) truth = sample_next_state(truth, cfg.theta_true, chain_rng);
  }

  out.report.utility_trace = realized_trace;
  const LossResult loss = normalized_loss(realized_trace, oracle_trace);
  out.report.loss_trace = loss.loss;
  out.report.loss_included = loss.included;
  out.report.mean_normalized_loss = loss.mean;
  out.report.loss_slots_included = loss.included_count;
  out.report.mean_utility =
      ma.horizon ? utility_sum / static_cast<double>(ma.horizon) : 0.0;
  const RocPoint pt = roc_point(idle_total, idle_not_accessed, busy_total,
                                busy_accessed, lambda);
  out.report.p_fa = pt.p_fa;
  out.report.p_md = pt.p_md;
  out.report.p_fa_defined = pt.fa_defined;
  out.report.p_md_defined = pt.md_defined;
  return out;
}

void write_episode_log_csv(const std::vector<EpisodeLogRow>& log,
                           const std::string& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open for writing: " + path);
  os << "slot,agent_id,sensed_subcarrier,access_subcarrier,truth_bit,utility\n";
  for (const auto& row : log) {
    os << row.slot << ',' << row.agent_id << ',';
    for (std::size_t i = 0; i < row.sensed.size(); ++i)
      os << (i ? ";" : "") << row.sensed[i] + 1;
    os << ',';
    if (row.access) {
      os << *row.access + 1;
    } else if (row.access_mask) {
      bool first = true;
      for (int k = 0; k < 32; ++k)
        if ((row.access_mask >> k) & 1u) {
          os << (first ? "" : ";") << k + 1;
          first = false;
        }
    }
    os << ',' << row.truth_bit << ',' << format_number(row.utility) << "\n";
  }
}

}  // namespace dsa
