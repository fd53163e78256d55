#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "dsasim/rng.hpp"

namespace dsa {

using AgentId = int;

// Best-first permutation of an agent's known neighborhood plus itself.
struct RankedList {
  std::vector<AgentId> order;

  bool operator==(const RankedList&) const = default;
};

enum class MsgKind { DiscoveryBeacon, RssiRankedList, AggregatedRankedList };

struct ControlMessage {
  MsgKind kind = MsgKind::DiscoveryBeacon;
  AgentId sender = 0;
  RankedList payload;  // present iff kind != DiscoveryBeacon
  int round = 0;
};

// Peers whose expected RSSI clears the threshold, best-first. Ties are
// ordered by a per-episode random priority so that every node breaks them
// identically.
std::vector<AgentId> discover_neighbors(AgentId self,
                                        const std::map<AgentId, double>& rssi_db,
                                        double threshold_db,
                                        std::uint64_t episode_seed);

// Borda points for a 1-based ballot position.
int ballot_points(int position, int list_len);

// Point-sum aggregation of the ballots (self list included by the caller);
// members missing from a ballot score 0 on it. Ties via the shared
// per-episode priority.
RankedList aggregate_ballots(const std::vector<RankedList>& ballots,
                             std::uint64_t episode_seed);

struct ConsensusParams {
  int quorum = 1;            // neighbors required before balloting starts
  int stability_rounds = 3;  // consecutive matching rounds declaring consensus
};

// One CR's consensus state machine, advanced one synchronous round at a
// time by the episode scheduler.
class ConsensusNode {
 public:
  ConsensusNode(AgentId self, std::map<AgentId, double> rssi_db, double threshold_db,
                ConsensusParams params, std::uint64_t episode_seed);

  // Consumes last round's inbox, emits this round's outbox. Returns the
  // consensus list once reached (and keeps returning it).
  std::vector<ControlMessage> step(const std::vector<ControlMessage>& inbox);

  bool has_consensus() const { return consensus_.has_value(); }
  const std::optional<RankedList>& consensus() const { return consensus_; }
  const std::vector<AgentId>& neighbors() const { return neighbors_; }
  AgentId id() const { return self_; }

 private:
  RankedList initial_ballot() const;

  AgentId self_;
  std::map<AgentId, double> rssi_db_;
  double threshold_db_;
  ConsensusParams params_;
  std::uint64_t episode_seed_;
  std::vector<AgentId> neighbors_;
  bool quorum_met_ = false;
  bool ballot_sent_ = false;
  RankedList current_;
  int stable_rounds_ = 0;
  int round_ = 0;
  std::optional<RankedList> consensus_;
};

struct ConsensusOutcome {
  std::vector<std::optional<RankedList>> lists;  // per agent
  int rounds_used = 0;
  bool all_reached = false;
};

// Synchronous round-based simulation of the full exchange on a static
// topology. rssi_db[i][j] is the expected RSSI at i of j's transmissions;
// entries below threshold are simply never heard. drop_prob applies per
// (message, receiver) for robustness experiments.
ConsensusOutcome run_consensus(const std::vector<std::vector<double>>& rssi_db,
                               double threshold_db, const ConsensusParams& params,
                               std::uint64_t episode_seed, int round_cap = 100,
                               double drop_prob = 0.0);

// Rank-ordered access allocation: agents pick in rank order, each takes its
// highest-preference unclaimed subcarrier; agents with no remaining
// preference abstain. preferences[agent] is best-first.
std::vector<std::optional<int>> allocate_access(
    const RankedList& rank, const std::map<AgentId, std::vector<int>>& preferences);

}  // namespace dsa
