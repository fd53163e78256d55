#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "dsasim/rng.hpp"

namespace dsa {

// The six transition parameters of the time-frequency occupancy chain.
// q_w drives the first subcarrier given its own previous state w; p_{u,v}
// drives subcarrier k given the already-drawn lower neighbor u = B_{k-1}(t+1)
// and the same subcarrier's previous state v = B_k(t).
struct Theta {
  double p00 = 0, p01 = 0, p10 = 0, p11 = 0, q0 = 0, q1 = 0;

  double p(int u, int v) const {
    return u ? (v ? p11 : p10) : (v ? p01 : p00);
  }
  double q(int w) const { return w ? q1 : q0; }
  bool valid() const;
  std::array<double, 6> as_array() const { return {p00, p01, p10, p11, q0, q1}; }

  static Theta from_array(const std::array<double, 6>& a) {
    return {a[0], a[1], a[2], a[3], a[4], a[5]};
  }
  static Theta all_half() { return {0.5, 0.5, 0.5, 0.5, 0.5, 0.5}; }
};

// Occupancy of K subcarriers in one time-slot. Bit j (LSB first) is
// subcarrier j+1, i.e. bit 0 is the lowest frequency.
struct OccupancyState {
  std::uint32_t bits = 0;
  int width = 0;

  int bit(int j) const { return static_cast<int>((bits >> j) & 1u); }
};

struct OccupancyTrace {
  int width = 0;
  std::vector<std::uint32_t> states;

  std::size_t length() const { return states.size(); }
};

enum class InitDistribution { Uniform, AllIdle };

// Log-likelihood value carrying a finite/impossible flag. An impossible
// event (probability 0 under theta) is reported as -inf with finite=false.
struct LogProb {
  double value = 0;
  bool finite = true;
};

constexpr int kMaxWidth = 20;  // enumeration-based code paths stop at 2^20 states

// P_B(to | from; theta): product of the first-subcarrier q-factor and the
// K-1 interior p-factors. Throws std::invalid_argument on width mismatch or
// invalid theta.
double transition_probability(const OccupancyState& from, const OccupancyState& to,
                              const Theta& theta);

// Same, on raw bit masks (no validation); hot-path form.
double transition_probability_raw(std::uint32_t from, std::uint32_t to, int width,
                                  const Theta& theta);

// Sequential Bernoulli draw of the next state, subcarrier 1 up to K.
OccupancyState sample_next_state(const OccupancyState& from, const Theta& theta,
                                 Rng& rng);

std::uint32_t sample_initial_state(int width, InitDistribution init, Rng& rng);

OccupancyTrace sample_trace(const Theta& theta, int width, std::size_t tau,
                            InitDistribution init, Rng& rng);

double init_log_probability(std::uint32_t state, int width, InitDistribution init);

// Sum over t>=2 of log P_B(B(t)|B(t-1); theta) plus the init term at t=1.
// Requires tau >= 2.
LogProb trace_log_likelihood(const OccupancyTrace& trace, const Theta& theta,
                             InitDistribution init = InitDistribution::Uniform);

// Bayesian information criterion: gamma_params * ln(nu) - 2 ln P(B|theta).
// For the parametric chain gamma_params = 6. Propagates the likelihood
// sentinel (finite=false -> +inf).
LogProb bic(const OccupancyTrace& trace, const Theta& theta_star, int gamma_params,
            std::size_t nu, InitDistribution init = InitDistribution::Uniform);

// Dense one-step transition matrix over all 2^width states, cached in both
// row layouts (from-major for likelihoods, to-major for belief propagation).
class TransitionModel {
 public:
  TransitionModel(const Theta& theta, int width);

  int width() const { return width_; }
  int num_states() const { return 1 << width_; }
  const Theta& theta() const { return theta_; }

  double prob(std::uint32_t from, std::uint32_t to) const {
    return from_major_[(static_cast<std::size_t>(from) << width_) + to];
  }
  // Row of the from-major layout: probabilities out of `from`.
  const double* row_from(std::uint32_t from) const {
    return &from_major_[static_cast<std::size_t>(from) << width_];
  }
  // Row of the to-major layout: probabilities into `to`.
  const double* row_to(std::uint32_t to) const {
    return &to_major_[static_cast<std::size_t>(to) << width_];
  }

 private:
  Theta theta_;
  int width_;
  std::vector<double> from_major_;
  std::vector<double> to_major_;
};

// CSV persistence: one row per time-slot, columns t,b_1..b_K in {0,1}.
void write_trace_csv(const OccupancyTrace& trace, std::ostream& os);
void write_trace_csv(const OccupancyTrace& trace, const std::string& path);
OccupancyTrace read_trace_csv(std::istream& is);
OccupancyTrace read_trace_csv(const std::string& path);

}  // namespace dsa
