#include "dsasim/scenario.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace dsa {

namespace {

using nlohmann::json;

void require_keys(const json& obj, const std::string& where,
                  const std::set<std::string>& allowed) {
  if (!obj.is_object()) throw ConfigError(where, "expected an object");
  for (const auto& [key, _] : obj.items())
    if (!allowed.contains(key))
      throw ConfigError(where + "." + key, "unknown key");
}

double get_num(const json& obj, const std::string& where, const std::string& key,
               double fallback) {
  if (!obj.contains(key)) return fallback;
  const auto& v = obj.at(key);
  if (!v.is_number()) throw ConfigError(where + "." + key, "expected a number");
  return v.get<double>();
}

std::int64_t get_int(const json& obj, const std::string& where,
                     const std::string& key, std::int64_t fallback) {
  if (!obj.contains(key)) return fallback;
  const auto& v = obj.at(key);
  if (!v.is_number_integer())
    throw ConfigError(where + "." + key, "expected an integer");
  return v.get<std::int64_t>();
}

bool get_bool(const json& obj, const std::string& where, const std::string& key,
              bool fallback) {
  if (!obj.contains(key)) return fallback;
  const auto& v = obj.at(key);
  if (!v.is_boolean()) throw ConfigError(where + "." + key, "expected a boolean");
  return v.get<bool>();
}

std::string get_str(const json& obj, const std::string& where,
                    const std::string& key, const std::string& fallback) {
  if (!obj.contains(key)) return fallback;
  const auto& v = obj.at(key);
  if (!v.is_string()) throw ConfigError(where + "." + key, "expected a string");
  return v.get<std::string>();
}

Theta parse_theta(const json& obj, const std::string& where, const Theta& fallback) {
  require_keys(obj, where, {"p00", "p01", "p10", "p11", "q0", "q1"});
  Theta t = fallback;
  t.p00 = get_num(obj, where, "p00", t.p00);
  t.p01 = get_num(obj, where, "p01", t.p01);
  t.p10 = get_num(obj, where, "p10", t.p10);
  t.p11 = get_num(obj, where, "p11", t.p11);
  t.q0 = get_num(obj, where, "q0", t.q0);
  t.q1 = get_num(obj, where, "q1", t.q1);
  return t;
}

Position parse_position(const json& obj, const std::string& where,
                        const Position& fallback) {
  require_keys(obj, where, {"x", "y", "z"});
  Position p = fallback;
  p.x = get_num(obj, where, "x", p.x);
  p.y = get_num(obj, where, "y", p.y);
  p.z = get_num(obj, where, "z", p.z);
  return p;
}

}  // namespace

void ScenarioConfig::validate() const {
  if (k < 1 || k > kMaxWidth) throw ConfigError("k", "must be in [1,20]");
  if (fragment_width < 1 || fragment_width > 12)
    throw ConfigError("fragment_width", "must be in [1,12]");
  if (k % fragment_width != 0)
    throw ConfigError("fragment_width", "must divide k");
  if (sensing_budget < 1 || sensing_budget > k)
    throw ConfigError("sensing_budget", "must be in [1,k]");
  const int nfrag = k / fragment_width;
  if (sensing_budget % nfrag != 0)
    throw ConfigError("sensing_budget",
                      "must be divisible by the fragment count " +
                          std::to_string(nfrag));
  if (num_lu < 1) throw ConfigError("num_lu", "must be >= 1");
  if (k % num_lu != 0)
    throw ConfigError("num_lu", "must divide k (static subcarrier ownership)");
  if (!theta_true.valid())
    throw ConfigError("occupancy.theta", "all parameters must lie in [0,1]");
  if (!(bandwidth_hz > 0)) throw ConfigError("bandwidth_hz", "must be > 0");
  if (!(sensing.p_t > 0) || !(sensing.sigma_h2 > 0) || !(sensing.sigma_v2 > 0))
    throw ConfigError("sensing", "powers and variances must be > 0");
  try {
    channel.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError("channel", e.what());
  }
  if (!(lu_rate_bps > 0)) throw ConfigError("lu_rate_bps", "must be > 0");
  if (!(lu_tx_power_w > 0)) throw ConfigError("lu_tx_power_w", "must be > 0");
  if (!(cr_tx_power_w > 0)) throw ConfigError("cr_tx_power_w", "must be > 0");
  if (static_cast<int>(geometry.lu_tx.size()) != num_lu)
    throw ConfigError("geometry.lu_tx", "need exactly num_lu positions");
  if (!(geometry.lu_rx_radius_m > 0) || !(geometry.cr_rx_radius_m > 0))
    throw ConfigError("geometry", "radii must be > 0");
  try {
    solver.validate(fragment_width);
  } catch (const std::invalid_argument& e) {
    throw ConfigError("solver", e.what());
  }
  if (estimator.max_iters < 1) throw ConfigError("estimator.max_iters", "must be >= 1");
  if (!(estimator.tol > 0)) throw ConfigError("estimator.tol", "must be > 0");
  if (estimator.checkpoint_every < 2)
    throw ConfigError("estimator.checkpoint_every", "must be >= 2");
  if (estimator.checkpoint_iters < 1)
    throw ConfigError("estimator.checkpoint_iters", "must be >= 1");
  if (run.learning_slots > run.horizon)
    throw ConfigError("run.learning_slots", "cannot exceed run.horizon");
  if (!(run.slot_seconds > 0)) throw ConfigError("run.slot_seconds", "must be > 0");
  if (multi_agent.num_agents < 1)
    throw ConfigError("multi_agent.num_agents", "must be >= 1");
  if (multi_agent.per_agent_budget < 1 || multi_agent.per_agent_budget > k)
    throw ConfigError("multi_agent.per_agent_budget", "must be in [1,k]");
  if (multi_agent.stability_rounds < 1)
    throw ConfigError("multi_agent.stability_rounds", "must be >= 1");
  if (multi_agent.quorum < 0 || multi_agent.quorum >= multi_agent.num_agents)
    throw ConfigError("multi_agent.quorum",
                      "must be in [0,num_agents) (0 = majority)");
  if (!multi_agent.rssi_db.empty()) {
    if (static_cast<int>(multi_agent.rssi_db.size()) != multi_agent.num_agents)
      throw ConfigError("multi_agent.rssi_db", "matrix must be num_agents square");
    for (const auto& row : multi_agent.rssi_db)
      if (static_cast<int>(row.size()) != multi_agent.num_agents)
        throw ConfigError("multi_agent.rssi_db", "matrix must be num_agents square");
  }
  if (multi_agent.round_cap < 1)
    throw ConfigError("multi_agent.round_cap", "must be >= 1");
  if (multi_agent.drop_prob < 0 || multi_agent.drop_prob >= 1)
    throw ConfigError("multi_agent.drop_prob", "must be in [0,1)");
}

ScenarioConfig parse_config_json(const std::string& text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError("<root>", std::string("invalid JSON: ") + e.what());
  }
  require_keys(root, "<root>",
               {"spectrum", "occupancy", "sensing", "channel", "geometry", "solver",
                "estimator", "run", "multi_agent", "seed"});
  ScenarioConfig cfg;

  if (root.contains("spectrum")) {
    const auto& s = root["spectrum"];
    require_keys(s, "spectrum",
                 {"k", "fragment_width", "sensing_budget", "num_lu", "bandwidth_hz",
                  "lu_rate_bps", "lu_tx_power_w", "cr_tx_power_w"});
    cfg.k = static_cast<int>(get_int(s, "spectrum", "k", cfg.k));
    cfg.fragment_width = static_cast<int>(
        get_int(s, "spectrum", "fragment_width", cfg.fragment_width));
    cfg.sensing_budget = static_cast<int>(
        get_int(s, "spectrum", "sensing_budget", cfg.sensing_budget));
    cfg.num_lu = static_cast<int>(get_int(s, "spectrum", "num_lu", cfg.num_lu));
    cfg.bandwidth_hz = get_num(s, "spectrum", "bandwidth_hz", cfg.bandwidth_hz);
    cfg.lu_rate_bps = get_num(s, "spectrum", "lu_rate_bps", cfg.lu_rate_bps);
    cfg.lu_tx_power_w = get_num(s, "spectrum", "lu_tx_power_w", cfg.lu_tx_power_w);
    cfg.cr_tx_power_w = get_num(s, "spectrum", "cr_tx_power_w", cfg.cr_tx_power_w);
  }
  if (root.contains("occupancy")) {
    const auto& o = root["occupancy"];
    require_keys(o, "occupancy", {"theta", "init"});
    if (o.contains("theta")) cfg.theta_true = parse_theta(o["theta"], "occupancy.theta", cfg.theta_true);
    const std::string init = get_str(o, "occupancy", "init", "uniform");
    if (init == "uniform")
      cfg.init = InitDistribution::Uniform;
    else if (init == "all-idle")
      cfg.init = InitDistribution::AllIdle;
    else
      throw ConfigError("occupancy.init", "expected 'uniform' or 'all-idle'");
  }
  if (root.contains("sensing")) {
    const auto& s = root["sensing"];
    require_keys(s, "sensing", {"p_t", "sigma_h2", "sigma_v2", "snr_db"});
    cfg.sensing.sigma_v2 = get_num(s, "sensing", "sigma_v2", cfg.sensing.sigma_v2);
    cfg.sensing.sigma_h2 = get_num(s, "sensing", "sigma_h2", cfg.sensing.sigma_h2);
    if (s.contains("snr_db")) {
      if (s.contains("p_t"))
        throw ConfigError("sensing.snr_db", "give either snr_db or p_t, not both");
      const double snr = std::pow(10.0, get_num(s, "sensing", "snr_db", 10.0) / 10.0);
      cfg.sensing.p_t = snr * cfg.sensing.sigma_v2 / cfg.sensing.sigma_h2;
    } else {
      cfg.sensing.p_t = get_num(s, "sensing", "p_t", cfg.sensing.p_t);
    }
  }
  if (root.contains("channel")) {
    const auto& c = root["channel"];
    require_keys(c, "channel",
                 {"mu_los", "mu_nlos", "iota", "psi0", "f1", "f2", "z1", "z2",
                  "noise_power", "bandwidth_hz"});
    cfg.channel.mu_los = get_num(c, "channel", "mu_los", cfg.channel.mu_los);
    cfg.channel.mu_nlos = get_num(c, "channel", "mu_nlos", cfg.channel.mu_nlos);
    cfg.channel.iota = get_num(c, "channel", "iota", cfg.channel.iota);
    cfg.channel.psi0 = get_num(c, "channel", "psi0", cfg.channel.psi0);
    cfg.channel.f1 = get_num(c, "channel", "f1", cfg.channel.f1);
    cfg.channel.f2 = get_num(c, "channel", "f2", cfg.channel.f2);
    cfg.channel.z1 = get_num(c, "channel", "z1", cfg.channel.z1);
    cfg.channel.z2 = get_num(c, "channel", "z2", cfg.channel.z2);
    cfg.channel.noise_power = get_num(c, "channel", "noise_power", cfg.channel.noise_power);
    cfg.channel.bandwidth_hz = get_num(c, "channel", "bandwidth_hz", cfg.bandwidth_hz);
  } else {
    cfg.channel.bandwidth_hz = cfg.bandwidth_hz;
  }
  if (root.contains("geometry")) {
    const auto& g = root["geometry"];
    require_keys(g, "geometry",
                 {"lu_tx", "lu_rx_radius_m", "cr_tx", "cr_rx_radius_m", "cr_speed_mps"});
    if (g.contains("lu_tx")) {
      if (!g["lu_tx"].is_array())
        throw ConfigError("geometry.lu_tx", "expected an array of positions");
      cfg.geometry.lu_tx.clear();
      int i = 0;
      for (const auto& p : g["lu_tx"])
        cfg.geometry.lu_tx.push_back(
            parse_position(p, "geometry.lu_tx[" + std::to_string(i++) + "]", {}));
    }
    cfg.geometry.lu_rx_radius_m =
        get_num(g, "geometry", "lu_rx_radius_m", cfg.geometry.lu_rx_radius_m);
    if (g.contains("cr_tx"))
      cfg.geometry.cr_tx = parse_position(g["cr_tx"], "geometry.cr_tx", cfg.geometry.cr_tx);
    cfg.geometry.cr_rx_radius_m =
        get_num(g, "geometry", "cr_rx_radius_m", cfg.geometry.cr_rx_radius_m);
    cfg.geometry.cr_speed_mps =
        get_num(g, "geometry", "cr_speed_mps", cfg.geometry.cr_speed_mps);
  }
  if (root.contains("solver")) {
    const auto& s = root["solver"];
    require_keys(s, "solver",
                 {"u_beliefs", "n_mc", "gamma", "epsilon", "delta", "lambda",
                  "max_iterations", "explore_horizon_factor"});
    cfg.solver.u_beliefs =
        static_cast<int>(get_int(s, "solver", "u_beliefs", cfg.solver.u_beliefs));
    cfg.solver.n_mc = static_cast<int>(get_int(s, "solver", "n_mc", cfg.solver.n_mc));
    cfg.solver.gamma = get_num(s, "solver", "gamma", cfg.solver.gamma);
    cfg.solver.epsilon = get_num(s, "solver", "epsilon", cfg.solver.epsilon);
    cfg.solver.delta = static_cast<int>(get_int(s, "solver", "delta", cfg.solver.delta));
    cfg.solver.lambda = get_num(s, "solver", "lambda", cfg.solver.lambda);
    cfg.solver.max_iterations = static_cast<int>(
        get_int(s, "solver", "max_iterations", cfg.solver.max_iterations));
    cfg.solver.explore_horizon_factor = static_cast<int>(get_int(
        s, "solver", "explore_horizon_factor", cfg.solver.explore_horizon_factor));
  }
  if (root.contains("estimator")) {
    const auto& e = root["estimator"];
    require_keys(e, "estimator",
                 {"max_iters", "tol", "checkpoint_every", "checkpoint_iters"});
    cfg.estimator.max_iters =
        static_cast<int>(get_int(e, "estimator", "max_iters", cfg.estimator.max_iters));
    cfg.estimator.tol = get_num(e, "estimator", "tol", cfg.estimator.tol);
    cfg.estimator.checkpoint_every = static_cast<std::size_t>(get_int(
        e, "estimator", "checkpoint_every",
        static_cast<std::int64_t>(cfg.estimator.checkpoint_every)));
    cfg.estimator.checkpoint_iters = static_cast<int>(
        get_int(e, "estimator", "checkpoint_iters", cfg.estimator.checkpoint_iters));
  }
  if (root.contains("run")) {
    const auto& r = root["run"];
    require_keys(r, "run",
                 {"horizon", "learning_slots", "concurrent", "model_known", "policy",
                  "slot_seconds"});
    cfg.run.horizon = static_cast<std::size_t>(
        get_int(r, "run", "horizon", static_cast<std::int64_t>(cfg.run.horizon)));
    cfg.run.learning_slots = static_cast<std::size_t>(get_int(
        r, "run", "learning_slots", static_cast<std::int64_t>(cfg.run.learning_slots)));
    cfg.run.concurrent = get_bool(r, "run", "concurrent", cfg.run.concurrent);
    cfg.run.model_known = get_bool(r, "run", "model_known", cfg.run.model_known);
    const std::string policy = get_str(r, "run", "policy", "perseus");
    if (policy == "perseus")
      cfg.run.policy = PolicyMode::Perseus;
    else if (policy == "random")
      cfg.run.policy = PolicyMode::Random;
    else if (policy == "genie")
      cfg.run.policy = PolicyMode::Genie;
    else
      throw ConfigError("run.policy", "expected 'perseus', 'random' or 'genie'");
    cfg.run.slot_seconds = get_num(r, "run", "slot_seconds", cfg.run.slot_seconds);
  }
  if (root.contains("multi_agent")) {
    const auto& m = root["multi_agent"];
    require_keys(m, "multi_agent",
                 {"num_agents", "per_agent_budget", "rssi_threshold_db", "quorum",
                  "stability_rounds", "cooperative", "rssi_db", "round_cap",
                  "drop_prob", "horizon"});
    cfg.multi_agent.num_agents = static_cast<int>(
        get_int(m, "multi_agent", "num_agents", cfg.multi_agent.num_agents));
    cfg.multi_agent.per_agent_budget = static_cast<int>(get_int(
        m, "multi_agent", "per_agent_budget", cfg.multi_agent.per_agent_budget));
    cfg.multi_agent.rssi_threshold_db = get_num(
        m, "multi_agent", "rssi_threshold_db", cfg.multi_agent.rssi_threshold_db);
    cfg.multi_agent.quorum =
        static_cast<int>(get_int(m, "multi_agent", "quorum", cfg.multi_agent.quorum));
    cfg.multi_agent.stability_rounds = static_cast<int>(get_int(
        m, "multi_agent", "stability_rounds", cfg.multi_agent.stability_rounds));
    cfg.multi_agent.cooperative =
        get_bool(m, "multi_agent", "cooperative", cfg.multi_agent.cooperative);
    if (m.contains("rssi_db")) {
      if (!m["rssi_db"].is_array())
        throw ConfigError("multi_agent.rssi_db", "expected an array of rows");
      for (const auto& row : m["rssi_db"]) {
        if (!row.is_array())
          throw ConfigError("multi_agent.rssi_db", "expected an array of rows");
        std::vector<double> r;
        for (const auto& v : row) {
          if (!v.is_number())
            throw ConfigError("multi_agent.rssi_db", "entries must be numbers");
          r.push_back(v.get<double>());
        }
        cfg.multi_agent.rssi_db.push_back(std::move(r));
      }
    }
    cfg.multi_agent.round_cap = static_cast<int>(
        get_int(m, "multi_agent", "round_cap", cfg.multi_agent.round_cap));
    cfg.multi_agent.drop_prob =
        get_num(m, "multi_agent", "drop_prob", cfg.multi_agent.drop_prob);
    cfg.multi_agent.horizon = static_cast<std::size_t>(
        get_int(m, "multi_agent", "horizon",
                static_cast<std::int64_t>(cfg.multi_agent.horizon)));
  }
  if (root.contains("seed")) {
    if (!root["seed"].is_number_unsigned() && !root["seed"].is_number_integer())
      throw ConfigError("seed", "expected an integer");
    cfg.seed = root["seed"].get<std::uint64_t>();
  }
  cfg.validate();
  return cfg;
}

ScenarioConfig load_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("<file>", "cannot open config: " + path);
  std::ostringstream ss;
  ss << is.rdbuf();
  return parse_config_json(ss.str());
}

}  // namespace dsa
