#include "dsasim/perseus.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace dsa {

namespace {

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

}  // namespace

std::vector<FragmentSpec> fragment_spectrum(int k_total, int k_prime,
                                            int kappa_total) {
  if (k_total < 1 || k_prime < 1 || kappa_total < 1)
    throw std::invalid_argument("fragment_spectrum: counts must be positive");
  if (kappa_total > k_total)
    throw std::invalid_argument("fragment_spectrum: sensing budget exceeds K");
  if (k_total % k_prime != 0)
    throw std::invalid_argument(
        "fragment_spectrum: fragment width must divide K (got K=" +
        std::to_string(k_total) + ", K'=" + std::to_string(k_prime) + ")");
  const int fragments = k_total / k_prime;
  if (kappa_total % fragments != 0)
    throw std::invalid_argument(
        "fragment_spectrum: per-fragment budget kappa*K'/K is not integral; "
        "choose kappa divisible by " + std::to_string(fragments));
  const int budget = kappa_total / fragments;
  std::vector<FragmentSpec> out;
  out.reserve(fragments);
  for (int i = 0; i < fragments; ++i)
    out.push_back({i, i * k_prime, k_prime, budget});
  return out;
}

SensingActionSpace SensingActionSpace::make(int width, int budget) {
  if (budget < 1 || budget > width)
    throw std::invalid_argument("SensingActionSpace: budget must be in [1,width]");
  SensingActionSpace sp;
  sp.width = width;
  sp.budget = budget;
  std::vector<int> cur(budget);
  std::iota(cur.begin(), cur.end(), 0);
  while (true) {
    sp.actions.push_back(cur);
    int i = budget - 1;
    while (i >= 0 && cur[i] == width - budget + i) --i;
    if (i < 0) break;
    ++cur[i];
    for (int j = i + 1; j < budget; ++j) cur[j] = cur[j - 1] + 1;
  }
  return sp;
}

void SolverConfig::validate(int width) const {
  if (u_beliefs < 1) throw std::invalid_argument("solver.u_beliefs must be >= 1");
  if (n_mc < 1) throw std::invalid_argument("solver.n_mc must be >= 1");
  if (!(gamma > 0.0 && gamma < 1.0))
    throw std::invalid_argument("solver.gamma must be in (0,1)");
  if (!(epsilon > 0.0)) throw std::invalid_argument("solver.epsilon must be > 0");
  if (delta != 0 && (delta < 1 || delta > width))
    throw std::invalid_argument("solver.delta must be in [1,K'] (or 0 = K')");
  if (lambda < 0.0) throw std::invalid_argument("solver.lambda must be >= 0");
  if (max_iterations < 1)
    throw std::invalid_argument("solver.max_iterations must be >= 1");
}

FragmentSolver::FragmentSolver(const Theta& theta, int width, int budget,
                               const SolverConfig& config, const SensingParams& obs)
    : theta_(theta),
      width_(width),
      budget_(budget),
      config_(config),
      obs_(obs),
      model_(theta, width),
      nbhd_(width, config.delta == 0 ? width : config.delta),
      actions_(SensingActionSpace::make(width, budget)) {
  config_.validate(width);
}

std::vector<Belief> FragmentSolver::explore_beliefs() {
  Rng rng = Rng::derive(config_.seed, 0xe81ul);
  beliefs_.clear();
  beliefs_.push_back(uniform_belief(width_));
  const int horizon = config_.explore_horizon_factor * config_.u_beliefs;
  OccupancyState truth{0, width_};
  Rng chain_rng = Rng::derive(config_.seed, 0x10ad5ul);
  truth.bits = sample_initial_state(width_, InitDistribution::Uniform, chain_rng);
  Belief prior = beliefs_.front();
  for (int t = 0; t < horizon; ++t) {
    if (static_cast<int>(beliefs_.size()) >= config_.u_beliefs) break;
    const auto& action =
        actions_.actions[rng.below(static_cast<std::uint64_t>(actions_.size()))];
    const ObservationVector obs = sense(truth, action, obs_, rng);
    const Belief post = posterior_update(prior, obs, obs_);
    prior = propagate_prior_hamming(post, model_, nbhd_);
    bool fresh = true;
    for (const auto& b : beliefs_) {
      double d = 0.0;
      for (std::size_t s = 0; s < b.size(); ++s)
        d = std::max(d, std::abs(b[s] - prior[s]));
      if (d < config_.dedup_tol) {
        fresh = false;
        break;
      }
    }
    if (fresh) beliefs_.push_back(prior);
    truth = sample_next_state(truth, theta_, chain_rng);
  }
  values_.assign(beliefs_.size(), 0.0);
  pool_alphas_.assign(1, std::vector<double>(std::size_t{1} << width_, 0.0));
  pool_actions_.assign(1, -1);  // empty initial action
  entry_pool_.assign(beliefs_.size(), 0);
  iteration_ = 0;
  return beliefs_;
}

void FragmentSolver::rebuild_ta(std::vector<std::vector<double>>& ta) const {
  const std::size_t n = std::size_t{1} << width_;
  ta.assign(pool_alphas_.size(), std::vector<double>(n, 0.0));
  for (std::size_t j = 0; j < pool_alphas_.size(); ++j) {
    const auto& alpha = pool_alphas_[j];
    auto& row = ta[j];
    for (std::uint32_t b = 0; b < n; ++b) {
      const double* t_row = model_.row_from(b);
      double acc = 0.0;
      for (std::size_t s = 0; s < n; ++s) acc += t_row[s] * alpha[s];
      row[b] = acc;
    }
  }
}

BackupResult FragmentSolver::backup_with_pool(
    const Belief& belief, const std::vector<std::vector<double>>& pool_alphas,
    const std::vector<std::vector<double>>& pool_ta, std::uint64_t seed_tag) const {
  const std::size_t n = std::size_t{1} << width_;
  const int num_patterns = 1 << budget_;
  const int n_mc = config_.n_mc;
  const std::uint32_t full = (1u << width_) - 1u;

  BackupResult best;
  best.value = -std::numeric_limits<double>::infinity();

  std::vector<double> post(n), prior(n), xi(n);
  std::vector<double> l0(budget_), l1(budget_);
  std::vector<std::uint32_t> phi_choice;
  std::vector<int> pick_choice;
  std::vector<std::complex<double>> unit(budget_);

  for (std::size_t a_idx = 0; a_idx < actions_.size(); ++a_idx) {
    const auto& action = actions_.actions[a_idx];
    Rng rng = Rng::derive(config_.seed ^ mix64(seed_tag), 0xbac0ul + a_idx);
    phi_choice.assign(static_cast<std::size_t>(num_patterns) * n_mc, 0);
    pick_choice.assign(static_cast<std::size_t>(num_patterns) * n_mc, 0);
    for (int mc = 0; mc < n_mc; ++mc) {
      // One unit complex draw per sensed subcarrier, shared by all sensed-bit
      // patterns (common random numbers across the per-state conditionals).
      for (int j = 0; j < budget_; ++j) unit[j] = rng.cnormal(1.0);
      for (int p = 0; p < num_patterns; ++p) {
        for (int j = 0; j < budget_; ++j) {
          const int bit = (p >> j) & 1;
          const double e = std::norm(unit[j]) * obs_.variance(bit);
          const double v0 = obs_.variance(0), v1 = obs_.variance(1);
          const double g0 = -e / v0 - std::log(v0);
          const double g1 = -e / v1 - std::log(v1);
          const double g = std::max(g0, g1);
          l0[j] = std::exp(g0 - g);
          l1[j] = std::exp(g1 - g);
        }
        double total = 0.0;
        for (std::size_t s = 0; s < n; ++s) {
          double w = belief[s];
          for (int j = 0; j < budget_; ++j)
            w *= ((s >> action[j]) & 1u) ? l1[j] : l0[j];
          post[s] = w;
          total += w;
        }
        if (!(total > 0.0))
          throw std::domain_error("backup: zero posterior mass");
        const double inv_total = 1.0 / total;
        for (std::size_t s = 0; s < n; ++s) post[s] *= inv_total;

        // Access decision from the posterior marginals.
        std::uint32_t phi = 0;
        const double threshold = 1.0 / (1.0 + config_.lambda);
        for (int k = 0; k < width_; ++k) {
          double mk = 0.0;
          const std::uint32_t mask = 1u << k;
          for (std::size_t s = 0; s < n; ++s)
            if (s & mask) mk += post[s];
          if (mk <= threshold) phi |= mask;
        }
        phi_choice[static_cast<std::size_t>(p) * n_mc + mc] = phi;

        // Hamming-filtered next prior, then the best future hyperplane.
        prior = propagate_prior_hamming(post, model_, nbhd_);
        int pick = 0;
        double pick_val = -std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < pool_alphas.size(); ++j) {
          const double v = dot(prior, pool_alphas[j]);
          if (v > pick_val) {
            pick_val = v;
            pick = static_cast<int>(j);
          }
        }
        pick_choice[static_cast<std::size_t>(p) * n_mc + mc] = pick;
      }
    }

    // Assemble the action's hyperplane per hidden state.
    const double inv_n = 1.0 / static_cast<double>(n_mc);
    for (std::size_t s = 0; s < n; ++s) {
      int p = 0;
      for (int j = 0; j < budget_; ++j) p |= static_cast<int>((s >> action[j]) & 1u) << j;
      double acc = 0.0;
      for (int mc = 0; mc < n_mc; ++mc) {
        const std::uint32_t phi = phi_choice[static_cast<std::size_t>(p) * n_mc + mc];
        const int pick = pick_choice[static_cast<std::size_t>(p) * n_mc + mc];
        const int hits = std::popcount(phi & ~static_cast<std::uint32_t>(s) & full);
        const int coll = std::popcount(phi & static_cast<std::uint32_t>(s));
        acc += static_cast<double>(hits) - config_.lambda * coll +
               config_.gamma * pool_ta[pick][s];
      }
      xi[s] = acc * inv_n;
    }
    const double value = dot(belief, xi);
    if (value > best.value) {
      best.value = value;
      best.alpha = xi;
      best.action_index = static_cast<int>(a_idx);
    }
  }
  return best;
}

BackupResult FragmentSolver::backup(const Belief& belief,
                                    const std::vector<PolicyEntry>& current,
                                    std::uint64_t seed_tag) const {
  std::vector<std::vector<double>> alphas;
  alphas.reserve(current.size());
  for (const auto& e : current) alphas.push_back(e.alpha);
  std::vector<std::vector<double>> ta(alphas.size());
  const std::size_t n = std::size_t{1} << width_;
  for (std::size_t j = 0; j < alphas.size(); ++j) {
    ta[j].assign(n, 0.0);
    for (std::uint32_t b = 0; b < n; ++b) {
      const double* row = model_.row_from(b);
      double acc = 0.0;
      for (std::size_t s = 0; s < n; ++s) acc += row[s] * alphas[j][s];
      ta[j][b] = acc;
    }
  }
  return backup_with_pool(belief, alphas, ta, seed_tag);
}

SolveIteration FragmentSolver::perseus_iteration() {
  if (beliefs_.empty())
    throw std::logic_error("perseus_iteration: call explore_beliefs() first");
  const std::vector<std::vector<double>> prev_alphas = pool_alphas_;
  const std::vector<int> prev_actions = pool_actions_;
  const std::vector<int> prev_entry = entry_pool_;
  const std::vector<double> prev_values = values_;

  std::vector<std::vector<double>> ta;
  {
    // Futures use the previous iteration's hyperplane set.
    rebuild_ta(ta);
  }

  std::vector<std::vector<double>> new_alphas;
  std::vector<int> new_pool_actions;
  std::vector<int> new_entry(beliefs_.size(), -1);
  std::vector<double> new_values(beliefs_.size(), 0.0);

  Rng pick_rng = Rng::derive(config_.seed, 0x91c4ull + static_cast<std::uint64_t>(iteration_));
  std::vector<int> unimproved(beliefs_.size());
  std::iota(unimproved.begin(), unimproved.end(), 0);
  int backups = 0;

  while (!unimproved.empty()) {
    const std::size_t pos = pick_rng.below(unimproved.size());
    const int u = unimproved[pos];
    unimproved.erase(unimproved.begin() + pos);

    BackupResult res = backup_with_pool(beliefs_[u], prev_alphas, ta,
                                        static_cast<std::uint64_t>(u));
    ++backups;
    int pool_id;
    double value_u;
    if (res.value >= prev_values[u]) {
      new_alphas.push_back(std::move(res.alpha));
      new_pool_actions.push_back(res.action_index);
      pool_id = static_cast<int>(new_alphas.size()) - 1;
      value_u = res.value;
    } else {
      // Monte-Carlo backup fell short of the stored value: retain the
      // previous hyperplane for this belief so values never regress.
      new_alphas.push_back(prev_alphas[prev_entry[u]]);
      new_pool_actions.push_back(prev_actions[prev_entry[u]]);
      pool_id = static_cast<int>(new_alphas.size()) - 1;
      value_u = prev_values[u];
    }
    new_entry[u] = pool_id;
    new_values[u] = value_u;

    // Broadcast: the fresh hyperplane may already improve other beliefs.
    const auto& alpha_new = new_alphas[pool_id];
    for (std::size_t i = 0; i < unimproved.size();) {
      const int v = unimproved[i];
      const double val = dot(beliefs_[v], alpha_new);
      if (val >= prev_values[v]) {
        new_entry[v] = pool_id;
        new_values[v] = val;
        unimproved.erase(unimproved.begin() + i);
      } else {
        ++i;
      }
    }
  }

  pool_alphas_ = std::move(new_alphas);
  pool_actions_ = std::move(new_pool_actions);
  entry_pool_ = std::move(new_entry);

  SolveIteration rec;
  rec.iteration = iteration_;
  rec.backups = backups;
  double mean = 0.0, max_change = 0.0;
  for (std::size_t u = 0; u < beliefs_.size(); ++u) {
    max_change = std::max(max_change, std::abs(new_values[u] - prev_values[u]));
    mean += new_values[u];
  }
  rec.max_change = max_change;
  rec.mean_value = mean / static_cast<double>(beliefs_.size());
  values_ = std::move(new_values);
  ++iteration_;
  return rec;
}

std::vector<PolicyEntry> FragmentSolver::current_entries() const {
  std::vector<PolicyEntry> out;
  out.reserve(entry_pool_.size());
  for (int id : entry_pool_) {
    PolicyEntry e;
    e.alpha = pool_alphas_[id];
    e.action = pool_actions_[id] < 0 ? std::vector<int>{}
                                     : actions_.actions[pool_actions_[id]];
    out.push_back(std::move(e));
  }
  return out;
}

SolveResult FragmentSolver::solve() {
  explore_beliefs();
  SolveResult out;
  for (int i = 0; i < config_.max_iterations; ++i) {
    const SolveIteration rec = perseus_iteration();
    out.trace.push_back(rec);
    if (rec.max_change <= config_.epsilon) {
      out.converged = true;
      break;
    }
  }
  out.policy.width = width_;
  out.policy.entries = current_entries();
  out.belief_set = beliefs_;
  out.values = values_;
  return out;
}

SolveResult solve_fragment(const Theta& theta, int width, int budget,
                           const SolverConfig& config, const SensingParams& obs) {
  FragmentSolver solver(theta, width, budget, config, obs);
  return solver.solve();
}

int policy_entry_index(const Belief& belief, const PolicySet& policy) {
  if (policy.entries.empty())
    throw std::invalid_argument("policy_action: empty policy");
  int best = 0;
  double best_val = -std::numeric_limits<double>::infinity();
  for (std::size_t u = 0; u < policy.entries.size(); ++u) {
    const double v = dot(belief, policy.entries[u].alpha);
    if (v > best_val) {
      best_val = v;
      best = static_cast<int>(u);
    }
  }
  return best;
}

const std::vector<int>& policy_action(const Belief& belief, const PolicySet& policy) {
  return policy.entries[policy_entry_index(belief, policy)].action;
}

void write_policy_csv(const PolicySet& policy, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open for writing: " + path);
  const std::size_t n = std::size_t{1} << policy.width;
  os << "entry_id,action_indices";
  for (std::size_t s = 0; s < n; ++s) os << ",alpha_" << s;
  os << "\n";
  char buf[64];
  for (std::size_t u = 0; u < policy.entries.size(); ++u) {
    os << u << ',';
    const auto& action = policy.entries[u].action;
    for (std::size_t j = 0; j < action.size(); ++j)
      os << (j ? ";" : "") << action[j] + 1;
    for (double a : policy.entries[u].alpha) {
      std::snprintf(buf, sizeof buf, "%.17g", a);
      os << ',' << buf;
    }
    os << "\n";
  }
}

PolicySet read_policy_csv(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open: " + path);
  std::string line;
  if (!std::getline(is, line)) throw std::runtime_error("policy csv: missing header");
  std::size_t cols = 1;
  for (char c : line)
    if (c == ',') ++cols;
  if (cols < 3) throw std::runtime_error("policy csv: bad header");
  const std::size_t n = cols - 2;
  int width = 0;
  while ((std::size_t{1} << width) < n) ++width;
  if ((std::size_t{1} << width) != n)
    throw std::runtime_error("policy csv: alpha column count is not a power of two");
  PolicySet policy;
  policy.width = width;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string cell;
    std::getline(ls, cell, ',');  // entry_id ignored on load
    PolicyEntry e;
    if (!std::getline(ls, cell, ',')) throw std::runtime_error("policy csv: bad row");
    if (!cell.empty()) {
      std::istringstream as(cell);
      std::string tok;
      while (std::getline(as, tok, ';')) e.action.push_back(std::stoi(tok) - 1);
    }
    e.alpha.reserve(n);
    while (std::getline(ls, cell, ',')) e.alpha.push_back(std::stod(cell));
    if (e.alpha.size() != n) throw std::runtime_error("policy csv: short row");
    policy.entries.push_back(std::move(e));
  }
  return policy;
}

void write_solver_trace_csv(const std::vector<SolveIteration>& trace,
                            const std::string& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open for writing: " + path);
  os << "iteration,max_change,mean_value\n";
  char buf[64];
  for (const auto& r : trace) {
    os << r.iteration << ',';
    std::snprintf(buf, sizeof buf, "%.9g", r.max_change);
    os << buf << ',';
    std::snprintf(buf, sizeof buf, "%.9g", r.mean_value);
    os << buf << "\n";
  }
}

}  // namespace dsa
