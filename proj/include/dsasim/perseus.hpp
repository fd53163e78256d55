#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dsasim/belief.hpp"
#include "dsasim/channel.hpp"
#include "dsasim/occupancy.hpp"
#include "dsasim/rng.hpp"

namespace dsa {

// One contiguous block of subcarriers solved as an independent sub-POMDP.
struct FragmentSpec {
  int index = 0;
  int base = 0;    // global index of the fragment's first subcarrier
  int width = 0;   // K'
  int budget = 0;  // kappa'
};

// Contiguous fragmentation of K subcarriers into K/K' blocks with the
// sensing budget split proportionally. Throws std::invalid_argument with
// guidance when the split is not integral.
std::vector<FragmentSpec> fragment_spectrum(int k_total, int k_prime,
                                            int kappa_total);

// All kappa'-subsets of {0..K'-1}, lexicographic.
struct SensingActionSpace {
  int width = 0;
  int budget = 0;
  std::vector<std::vector<int>> actions;

  static SensingActionSpace make(int width, int budget);
  std::size_t size() const { return actions.size(); }
};

struct PolicyEntry {
  std::vector<double> alpha;  // hyperplane over the 2^width states
  std::vector<int> action;    // sensed subcarriers, 0-based fragment-local
};

struct PolicySet {
  int width = 0;
  std::vector<PolicyEntry> entries;
};

struct SolverConfig {
  int u_beliefs = 128;
  int n_mc = 64;
  double gamma = 0.9;
  double epsilon = 1e-5;
  int delta = 0;       // Hamming radius; 0 = full width (exact propagation)
  double lambda = 1.0;
  std::uint64_t seed = 1;
  int max_iterations = 500;
  int explore_horizon_factor = 10;
  double dedup_tol = 1e-6;

  void validate(int width) const;
};

struct BackupResult {
  std::vector<double> alpha;
  int action_index = 0;
  double value = 0;
};

struct SolveIteration {
  int iteration = 0;
  double max_change = 0;
  double mean_value = 0;
  int backups = 0;
};

struct SolveResult {
  PolicySet policy;
  std::vector<SolveIteration> trace;
  bool converged = false;
  std::vector<Belief> belief_set;
  std::vector<double> values;
};

// Randomized point-based value iteration on one fragment: Monte-Carlo
// backups over the sensing-action space, Hamming-filtered belief updates,
// and value broadcast across the sampled belief set.
class FragmentSolver {
 public:
  FragmentSolver(const Theta& theta, int width, int budget,
                 const SolverConfig& config, const SensingParams& obs);

  // Step 1: collect up to U distinct reachable beliefs by random
  // interaction, starting from (and including) the uniform belief.
  std::vector<Belief> explore_beliefs();

  // Steps 7-11 for one belief: per-action Monte-Carlo hyperplane, best
  // action by inner product. seed_tag fixes the observation draws so
  // repeated backups of the same belief reuse one sample path.
  BackupResult backup(const Belief& belief, const std::vector<PolicyEntry>& current,
                      std::uint64_t seed_tag) const;

  // Steps 5-17: one improve-all pass over the stored belief set.
  SolveIteration perseus_iteration();

  // Full Algorithm-1 loop; stops once no sampled belief moves by more than
  // epsilon, or flags non-convergence at the iteration cap.
  SolveResult solve();

  const SensingActionSpace& action_space() const { return actions_; }
  const std::vector<Belief>& belief_set() const { return beliefs_; }
  const std::vector<double>& values() const { return values_; }
  std::vector<PolicyEntry> current_entries() const;

 private:
  struct PoolBackup {
    std::vector<double> alpha;
    int action_index = 0;
  };

  BackupResult backup_with_pool(const Belief& belief,
                                const std::vector<std::vector<double>>& pool_alphas,
                                const std::vector<std::vector<double>>& pool_ta,
                                std::uint64_t seed_tag) const;
  void rebuild_ta(std::vector<std::vector<double>>& ta) const;

  Theta theta_;
  int width_;
  int budget_;
  SolverConfig config_;
  SensingParams obs_;
  TransitionModel model_;
  HammingNeighborhoods nbhd_;
  SensingActionSpace actions_;

  std::vector<Belief> beliefs_;
  std::vector<double> values_;
  // Distinct hyperplanes live in a pool; per-belief entries reference it.
  std::vector<std::vector<double>> pool_alphas_;
  std::vector<int> pool_actions_;
  std::vector<int> entry_pool_;  // per belief: pool index
  int iteration_ = 0;
};

// Convenience wrapper: explore + iterate to convergence.
SolveResult solve_fragment(const Theta& theta, int width, int budget,
                           const SolverConfig& config, const SensingParams& obs);

// Sensing action of the value-maximizing hyperplane; ties break to the
// lowest entry index.
const std::vector<int>& policy_action(const Belief& belief, const PolicySet& policy);
int policy_entry_index(const Belief& belief, const PolicySet& policy);

// CSV persistence. Policy rows: entry_id,action_indices (semicolon-joined,
// 1-based),alpha_0..alpha_{2^width-1}. Trace rows: iteration,max_change,
// mean_value.
void write_policy_csv(const PolicySet& policy, const std::string& path);
PolicySet read_policy_csv(const std::string& path);
void write_solver_trace_csv(const std::vector<SolveIteration>& trace,
                            const std::string& path);

}  // namespace dsa
