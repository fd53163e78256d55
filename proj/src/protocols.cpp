#include "dsasim/protocols.hpp"

#include <algorithm>
#include <set>
#include <stdexcept>

namespace dsa {

namespace {

// Shared per-episode random priority; every node sorts ties identically.
std::uint64_t tie_priority(std::uint64_t episode_seed, AgentId id) {
  return mix64(episode_seed ^ mix64(0x71e5ull + static_cast<std::uint64_t>(id)));
}

}  // namespace

std::vector<AgentId> discover_neighbors(AgentId self,
                                        const std::map<AgentId, double>& rssi_db,
                                        double threshold_db,
                                        std::uint64_t episode_seed) {
  std::vector<AgentId> out;
  for (const auto& [peer, rssi] : rssi_db) {
    if (peer == self)
      throw std::invalid_argument("discover_neighbors: rssi map contains self");
    if (rssi >= threshold_db) out.push_back(peer);
  }
  std::sort(out.begin(), out.end(), [&](AgentId a, AgentId b) {
    const double ra = rssi_db.at(a), rb = rssi_db.at(b);
    if (ra != rb) return ra > rb;
    return tie_priority(episode_seed, a) < tie_priority(episode_seed, b);
  });
  return out;
}

int ballot_points(int position, int list_len) {
  if (position < 1 || position > list_len)
    throw std::invalid_argument("ballot_points: position out of range");
  return list_len - position;
}

RankedList aggregate_ballots(const std::vector<RankedList>& ballots,
                             std::uint64_t episode_seed) {
  std::map<AgentId, long long> points;
  for (const auto& ballot : ballots) {
    const int len = static_cast<int>(ballot.order.size());
    for (int pos = 1; pos <= len; ++pos) {
      points[ballot.order[pos - 1]] += ballot_points(pos, len);
    }
  }
  RankedList out;
  out.order.reserve(points.size());
  for (const auto& [id, _] : points) out.order.push_back(id);
  std::sort(out.order.begin(), out.order.end(), [&](AgentId a, AgentId b) {
    if (points[a] != points[b]) return points[a] > points[b];
    return tie_priority(episode_seed, a) < tie_priority(episode_seed, b);
  });
  return out;
}

ConsensusNode::ConsensusNode(AgentId self, std::map<AgentId, double> rssi_db,
                             double threshold_db, ConsensusParams params,
                             std::uint64_t episode_seed)
    : self_(self),
      rssi_db_(std::move(rssi_db)),
      threshold_db_(threshold_db),
      params_(params),
      episode_seed_(episode_seed) {
  if (params_.quorum < 1)
    throw std::invalid_argument("consensus: quorum must be >= 1");
  if (params_.stability_rounds < 1)
    throw std::invalid_argument("consensus: stability_rounds must be >= 1");
}

RankedList ConsensusNode::initial_ballot() const {
  RankedList list;
  list.order.push_back(self_);
  for (AgentId peer : neighbors_) list.order.push_back(peer);
  return list;
}

std::vector<ControlMessage> ConsensusNode::step(
    const std::vector<ControlMessage>& inbox) {
  ++round_;
  std::vector<RankedList> heard_ballots;
  std::vector<const RankedList*> heard_aggregates;
  std::map<AgentId, double> heard_peers;
  for (const auto& msg : inbox) {
    if (msg.sender == self_) continue;
    const auto it = rssi_db_.find(msg.sender);
    if (it == rssi_db_.end() || it->second < threshold_db_) continue;
    heard_peers[msg.sender] = it->second;
    if (msg.kind == MsgKind::RssiRankedList) heard_ballots.push_back(msg.payload);
    if (msg.kind == MsgKind::AggregatedRankedList)
      heard_aggregates.push_back(&msg.payload);
  }
  // Grow the neighborhood with anything newly heard.
  for (const auto& [peer, rssi] : heard_peers) {
    (void)rssi;
    if (std::find(neighbors_.begin(), neighbors_.end(), peer) == neighbors_.end())
      neighbors_.push_back(peer);
  }
  std::sort(neighbors_.begin(), neighbors_.end(), [&](AgentId a, AgentId b) {
    const double ra = rssi_db_.at(a), rb = rssi_db_.at(b);
    if (ra != rb) return ra > rb;
    return tie_priority(episode_seed_, a) < tie_priority(episode_seed_, b);
  });

  if (!quorum_met_ &&
      static_cast<int>(neighbors_.size()) >= params_.quorum)
    quorum_met_ = true;

  if (!quorum_met_)
    return {{MsgKind::DiscoveryBeacon, self_, {}, round_}};

  if (!ballot_sent_) {
    current_ = initial_ballot();
    ballot_sent_ = true;
    return {{MsgKind::RssiRankedList, self_, current_, round_}};
  }

  if (!consensus_) {
    // Stability is judged on the aggregated lists heard this round, before
    // folding them into the next aggregate.
    if (!heard_aggregates.empty() &&
        std::all_of(heard_aggregates.begin(), heard_aggregates.end(),
                    [&](const RankedList* l) { return *l == current_; })) {
      ++stable_rounds_;
    } else {
      stable_rounds_ = 0;
    }
    std::vector<RankedList> ballots = std::move(heard_ballots);
    for (const RankedList* agg : heard_aggregates) ballots.push_back(*agg);
    if (!ballots.empty()) {
      ballots.push_back(current_);
      current_ = aggregate_ballots(ballots, episode_seed_);
    }
    if (stable_rounds_ >= params_.stability_rounds) consensus_ = current_;
  }
  return {{MsgKind::AggregatedRankedList, self_, current_, round_}};
}

ConsensusOutcome run_consensus(const std::vector<std::vector<double>>& rssi_db,
                               double threshold_db, const ConsensusParams& params,
                               std::uint64_t episode_seed, int round_cap,
                               double drop_prob) {
  const int n = static_cast<int>(rssi_db.size());
  std::vector<ConsensusNode> nodes;
  nodes.reserve(n);
  for (int i = 0; i < n; ++i) {
    if (static_cast<int>(rssi_db[i].size()) != n)
      throw std::invalid_argument("run_consensus: rssi matrix must be square");
    std::map<AgentId, double> row;
    for (int j = 0; j < n; ++j)
      if (j != i) row[j] = rssi_db[i][j];
    nodes.emplace_back(i, std::move(row), threshold_db, params, episode_seed);
  }
  Rng drop_rng = Rng::derive(episode_seed, 0xd809ull);
  std::vector<std::vector<ControlMessage>> inboxes(n);
  ConsensusOutcome out;
  for (int round = 0; round < round_cap; ++round) {
    std::vector<std::vector<ControlMessage>> outboxes(n);
    for (int i = 0; i < n; ++i) outboxes[i] = nodes[i].step(inboxes[i]);
    for (auto& inbox : inboxes) inbox.clear();
    for (int i = 0; i < n; ++i)
      for (const auto& msg : outboxes[i])
        for (int j = 0; j < n; ++j) {
          if (j == i) continue;
          if (rssi_db[j][i] < threshold_db) continue;  // out of range
          if (drop_prob > 0.0 && drop_rng.bernoulli(drop_prob)) continue;
          inboxes[j].push_back(msg);
        }
    out.rounds_used = round + 1;
    if (std::all_of(nodes.begin(), nodes.end(),
                    [](const ConsensusNode& nd) { return nd.has_consensus(); }))
      break;
  }
  out.lists.reserve(n);
  for (const auto& nd : nodes) out.lists.push_back(nd.consensus());
  out.all_reached = std::all_of(out.lists.begin(), out.lists.end(),
                                [](const auto& l) { return l.has_value(); });
  return out;
}

std::vector<std::optional<int>> allocate_access(
    const RankedList& rank, const std::map<AgentId, std::vector<int>>& preferences) {
  std::vector<std::optional<int>> out(rank.order.size());
  std::set<int> claimed;
  for (std::size_t pos = 0; pos < rank.order.size(); ++pos) {
    const auto it = preferences.find(rank.order[pos]);
    if (it == preferences.end()) continue;
    for (int channel : it->second) {
      if (!claimed.contains(channel)) {
        claimed.insert(channel);
        out[pos] = channel;
        break;
      }
    }
  }
  return out;
}

}  // namespace dsa
