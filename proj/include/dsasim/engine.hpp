#pragma once

#include <optional>
#include <string>
#include <vector>

#include "dsasim/belief.hpp"
#include "dsasim/metrics.hpp"
#include "dsasim/protocols.hpp"
#include "dsasim/scenario.hpp"

namespace dsa {

// One row of the single-agent or multi-agent episode log.
struct EpisodeLogRow {
  std::size_t slot = 0;
  int agent_id = 0;
  std::vector<int> sensed;  // global subcarrier indices, 0-based
  std::optional<int> access;  // multi-agent: the single allocated subcarrier
  std::uint32_t access_mask = 0;  // single-agent: full access decision
  int truth_bit = 0;  // of the accessed subcarrier (multi-agent rows)
  std::uint32_t truth_mask = 0;
  double utility = 0;
};

struct RunOutcome {
  MetricsReport report;
  std::vector<EpisodeLogRow> episode_log;
  Theta theta_estimate;
  bool estimator_converged = true;
  bool solver_converged = true;
  std::vector<PolicySet> policies;  // one per fragment
};

// End-to-end single-agent scenario: learning segment with random sensing,
// EM checkpoints (with interleaved solving in concurrent mode), policy
// evaluation segment, channel-layer throughput accounting.
RunOutcome run_scenario(const ScenarioConfig& cfg);

// Occupancy trace + matching sensing logs, shared by the estimate path.
struct SyntheticLog {
  OccupancyTrace trace;
  std::vector<SensingLog> fragment_logs;
};
SyntheticLog synthesize_sensing_log(const ScenarioConfig& cfg, std::size_t tau,
                                    std::uint64_t seed);

// Per-subcarrier energy detection with M samples per decision and AND
// fusion: a subcarrier is declared busy only when every sample's energy
// exceeds the per-sample threshold; the threshold solves
// p^M = target_p_fa on the noise-only energy law. Senses all K, no
// temporal model.
struct NpBaselineConfig {
  int samples_per_decision = 300;
  double target_p_fa = 0.30;
};
RunOutcome neyman_pearson_baseline(const ScenarioConfig& cfg,
                                   const NpBaselineConfig& np);

// LESSA operating points for a lambda sweep plus the NP baseline point.
std::vector<RocPoint> roc_sweep(const ScenarioConfig& cfg,
                                const std::vector<double>& lambdas,
                                const NpBaselineConfig& np);

// Distributed multi-agent episode: consensus-ranked access allocation,
// round-robin sensing assignment, optional observation sharing.
struct MaRunOutcome {
  MetricsReport report;
  std::vector<EpisodeLogRow> episode_log;
  std::vector<std::optional<RankedList>> consensus_lists;
  int consensus_rounds = 0;
  bool consensus_reached = false;
};
MaRunOutcome run_distributed_episode(const ScenarioConfig& cfg);

// Generated fully-connected symmetric RSSI matrix (used when the config
// does not pin one).
std::vector<std::vector<double>> generate_rssi_matrix(int n, double threshold_db,
                                                      std::uint64_t seed);

void write_episode_log_csv(const std::vector<EpisodeLogRow>& log,
                           const std::string& path);

}  // namespace dsa
