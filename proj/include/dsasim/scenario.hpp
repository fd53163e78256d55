#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "dsasim/channel.hpp"
#include "dsasim/occupancy.hpp"
#include "dsasim/perseus.hpp"

namespace dsa {

// Configuration failure with the offending field path; the CLI maps this to
// exit code 2.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& field, const std::string& message)
      : std::runtime_error(field + ": " + message), field_(field) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

struct Position {
  double x = 0, y = 0, z = 0;
};

struct GeometryConfig {
  std::vector<Position> lu_tx = {{-225, 200, 40}, {225, 200, 40}, {0, -300, 40}};
  double lu_rx_radius_m = 200.0;
  Position cr_tx{0, 0, 20};
  double cr_rx_radius_m = 100.0;
  double cr_speed_mps = 1.4;
};

struct EstimatorConfig {
  int max_iters = 50;
  double tol = 1e-7;
  std::size_t checkpoint_every = 10000;
  int checkpoint_iters = 5;  // EM iterations per mid-run checkpoint
};

enum class PolicyMode { Perseus, Random, Genie };

struct RunConfig {
  std::size_t horizon = 50000;
  std::size_t learning_slots = 30000;
  bool concurrent = false;
  bool model_known = false;
  PolicyMode policy = PolicyMode::Perseus;
  double slot_seconds = 0.003;
};

struct MultiAgentConfig {
  int num_agents = 12;
  int per_agent_budget = 1;
  double rssi_threshold_db = 22.0;
  int quorum = 0;  // 0 = majority of the other nodes
  int stability_rounds = 3;
  bool cooperative = true;
  std::vector<std::vector<double>> rssi_db;  // empty = generated above threshold
  int round_cap = 100;
  double drop_prob = 0.0;
  std::size_t horizon = 10000;
};

struct ScenarioConfig {
  int k = 18;
  int fragment_width = 6;
  int sensing_budget = 6;
  int num_lu = 3;
  double bandwidth_hz = 160e3;
  Theta theta_true{0.1, 0.3, 0.3, 0.7, 0.3, 0.8};
  InitDistribution init = InitDistribution::Uniform;
  SensingParams sensing{10.0, 1.0, 1.0};
  ChannelEnvParams channel;
  double lu_rate_bps = 0.9e6;
  double lu_tx_power_w = 1.0;
  double cr_tx_power_w = 1.0;
  GeometryConfig geometry;
  SolverConfig solver;
  EstimatorConfig estimator;
  RunConfig run;
  MultiAgentConfig multi_agent;
  std::uint64_t seed = 1;

  void validate() const;  // throws ConfigError with field-level messages
  std::vector<FragmentSpec> fragments() const {
    return fragment_spectrum(k, fragment_width, sensing_budget);
  }
};

// Strict parse: unknown keys anywhere are hard errors.
ScenarioConfig load_config(const std::string& path);
ScenarioConfig parse_config_json(const std::string& text);

}  // namespace dsa
