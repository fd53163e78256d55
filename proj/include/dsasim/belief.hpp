#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "dsasim/channel.hpp"
#include "dsasim/occupancy.hpp"

namespace dsa {

// Probability distribution over the 2^width occupancy states of one
// fragment; indexed by the state bit mask.
using Belief = std::vector<double>;

Belief uniform_belief(int width);
bool is_normalized(const Belief& b, double tol = 1e-9);

// Access decision: bit k set = transmit on subcarrier k.
struct AccessDecision {
  std::uint32_t bits = 0;
  int width = 0;
};

// Precomputed Hamming-distance neighborhoods: for every target state, the
// list of source states within distance delta. delta = width reproduces
// exact propagation. Kept as flat index lists; the filter sits in the
// solver's hot loop.
class HammingNeighborhoods {
 public:
  HammingNeighborhoods(int width, int delta);

  int width() const { return width_; }
  int delta() const { return delta_; }
  bool full() const { return delta_ == width_; }
  std::span<const std::uint32_t> sources_of(std::uint32_t target) const {
    return {&flat_[static_cast<std::size_t>(target) * per_state_], per_state_};
  }

 private:
  int width_;
  int delta_;
  std::size_t per_state_;
  std::vector<std::uint32_t> flat_;
};

// Bayes posterior over fragment states given the slot's observations;
// unsensed subcarriers leave the prior untouched. Throws on zero total mass.
Belief posterior_update(const Belief& prior, const ObservationVector& obs,
                        const SensingParams& p);

// Next prior through the full transition model (Eq-13 style sum).
Belief propagate_prior_exact(const Belief& posterior, const TransitionModel& model);

// Transition sum restricted to sources within Hamming distance delta of each
// target, then globally renormalized.
Belief propagate_prior_hamming(const Belief& posterior, const TransitionModel& model,
                               const HammingNeighborhoods& nbhd);

// Per-subcarrier occupancy probabilities under the belief.
std::vector<double> marginal_occupancy(const Belief& belief, int width);

// Threshold access rule: access subcarrier k iff marginal_k <= 1/(1+lambda);
// equality accesses.
AccessDecision access_decision(std::span<const double> marginals, double lambda);

// Optimized expected reward sum_k max{1 - (1+lambda) marginal_k, 0}.
double expected_reward(std::span<const double> marginals, double lambda);

// Realized reward sum_k (1-B_k) phi_k - lambda B_k phi_k; may be negative.
double realized_reward(const AccessDecision& phi, const OccupancyState& truth,
                       double lambda);

// Best achievable realized reward with known truth: the idle count.
double oracle_reward(const OccupancyState& truth, double lambda);

}  // namespace dsa
