#include "dsasim/belief.hpp"

#include <bit>
#include <cmath>
#include <stdexcept>

namespace dsa {

Belief uniform_belief(int width) {
  const std::size_t n = std::size_t{1} << width;
  return Belief(n, 1.0 / static_cast<double>(n));
}

bool is_normalized(const Belief& b, double tol) {
  double sum = 0.0;
  for (double w : b) {
    if (w < 0.0) return false;
    sum += w;
  }
  return std::abs(sum - 1.0) <= tol;
}

HammingNeighborhoods::HammingNeighborhoods(int width, int delta)
    : width_(width), delta_(delta) {
  if (width < 1 || width > 12)
    throw std::invalid_argument("HammingNeighborhoods: width must be in [1,12]");
  if (delta < 1 || delta > width)
    throw std::invalid_argument("HammingNeighborhoods: delta must be in [1,width]");
  const std::uint32_t n = 1u << width;
  per_state_ = 0;
  for (int d = 0; d <= delta; ++d) {
    // cumulative binomial: states per neighborhood
    std::size_t c = 1;
    for (int i = 0; i < d; ++i) c = c * (width - i) / (i + 1);
    per_state_ += c;
  }
  flat_.reserve(per_state_ * n);
  for (std::uint32_t target = 0; target < n; ++target)
    for (std::uint32_t src = 0; src < n; ++src)
      if (std::popcount(target ^ src) <= delta) flat_.push_back(src);
}

Belief posterior_update(const Belief& prior, const ObservationVector& obs,
                        const SensingParams& p) {
  Belief post(prior);
  if (obs.size() == 0) return post;
  // Per-subcarrier two-point likelihoods; factors shared between the two
  // hypotheses cancel after normalization, so each pair is rescaled by its
  // max to keep the running product away from under/overflow at extreme SNR.
  for (std::size_t i = 0; i < obs.size(); ++i) {
    const int k = obs.indices[i];
    const double e = std::norm(obs.samples[i]);
    const double v0 = p.variance(0), v1 = p.variance(1);
    const double g0 = -e / v0 - std::log(v0);
    const double g1 = -e / v1 - std::log(v1);
    const double g = std::max(g0, g1);
    const double l0 = std::exp(g0 - g);
    const double l1 = std::exp(g1 - g);
    const std::uint32_t mask = 1u << k;
    for (std::size_t s = 0; s < post.size(); ++s)
      post[s] *= (s & mask) ? l1 : l0;
  }
  double total = 0.0;
  for (double w : post) total += w;
  if (!(total > 0.0))
    throw std::domain_error("posterior_update: zero posterior mass");
  for (double& w : post) w /= total;
  return post;
}

Belief propagate_prior_exact(const Belief& posterior, const TransitionModel& model) {
  const std::size_t n = posterior.size();
  Belief next(n, 0.0);
  for (std::uint32_t target = 0; target < n; ++target) {
    const double* row = model.row_to(target);
    double acc = 0.0;
    for (std::size_t src = 0; src < n; ++src) acc += row[src] * posterior[src];
    next[target] = acc;
  }
  double total = 0.0;
  for (double w : next) total += w;
  for (double& w : next) w /= total;
  return next;
}

Belief propagate_prior_hamming(const Belief& posterior, const TransitionModel& model,
                               const HammingNeighborhoods& nbhd) {
  if (nbhd.full()) return propagate_prior_exact(posterior, model);
  const std::size_t n = posterior.size();
  Belief next(n, 0.0);
  double total = 0.0;
  for (std::uint32_t target = 0; target < n; ++target) {
    const double* row = model.row_to(target);
    double acc = 0.0;
    for (std::uint32_t src : nbhd.sources_of(target))
      acc += row[src] * posterior[src];
    next[target] = acc;
    total += acc;
  }
  if (!(total > 0.0))
    throw std::domain_error("propagate_prior_hamming: zero mass after filtering");
  for (double& w : next) w /= total;
  return next;
}

std::vector<double> marginal_occupancy(const Belief& belief, int width) {
  std::vector<double> m(width, 0.0);
  for (std::size_t s = 0; s < belief.size(); ++s) {
    const double w = belief[s];
    for (int k = 0; k < width; ++k)
      if ((s >> k) & 1u) m[k] += w;
  }
  for (double& x : m) x = std::min(x, 1.0);
  return m;
}

AccessDecision access_decision(std::span<const double> marginals, double lambda) {
  if (lambda < 0.0) throw std::invalid_argument("access_decision: lambda must be >= 0");
  const double threshold = 1.0 / (1.0 + lambda);
  AccessDecision phi;
  phi.width = static_cast<int>(marginals.size());
  for (int k = 0; k < phi.width; ++k)
    if (marginals[k] <= threshold) phi.bits |= (1u << k);
  return phi;
}

double expected_reward(std::span<const double> marginals, double lambda) {
  if (lambda < 0.0) throw std::invalid_argument("expected_reward: lambda must be >= 0");
  double r = 0.0;
  for (double m : marginals) r += std::max(1.0 - (1.0 + lambda) * m, 0.0);
  return r;
}

double realized_reward(const AccessDecision& phi, const OccupancyState& truth,
                       double lambda) {
  if (phi.width != truth.width)
    throw std::invalid_argument("realized_reward: width mismatch");
  const std::uint32_t full = (phi.width == 32) ? ~0u : ((1u << phi.width) - 1u);
  const int hits = std::popcount(phi.bits & ~truth.bits & full);
  const int collisions = std::popcount(phi.bits & truth.bits);
  return static_cast<double>(hits) - lambda * static_cast<double>(collisions);
}

double oracle_reward(const OccupancyState& truth, double lambda) {
  if (lambda < 0.0) throw std::invalid_argument("oracle_reward: lambda must be >= 0");
  const std::uint32_t full = (truth.width == 32) ? ~0u : ((1u << truth.width) - 1u);
  return static_cast<double>(std::popcount(~truth.bits & full));
}

}  // namespace dsa
