#pragma once

#include <complex>
#include <span>
#include <vector>

#include "dsasim/occupancy.hpp"
#include "dsasim/rng.hpp"

namespace dsa {

// Propagation-environment constants for the geometric (throughput) path.
struct ChannelEnvParams {
  double mu_los = 2.0;        // LoS pathloss exponent, >= 2
  double mu_nlos = 2.8;       // NLoS pathloss exponent, >= mu_los
  double iota = 0.2;          // extra NLoS attenuation, in (0,1]
  double psi0 = 1e-4;         // reference pathloss at 1 m, linear
  double f1 = 1.0;            // Rician K-factor scale
  double f2 = 0.0512;         // Rician K-factor elevation slope
  double z1 = 9.12;           // LoS-probability offset
  double z2 = 0.16;           // LoS-probability slope
  double noise_power = 1e-13; // sigma_V^2 in watts (throughput path)
  double bandwidth_hz = 160e3;

  void validate() const;  // throws std::invalid_argument with the field name
};

// Large-scale state of one Tx/Rx link, quasi-static over an episode.
struct LinkState {
  bool is_los = false;
  double psi = 0;           // large-scale gain, linear
  double k_factor = 0;      // Rician K, linear; 0 on the NLoS (Rayleigh) branch
  double distance_m = 0;
  double elevation_rad = 0;
};

// Parameters of the flat-fading sensing observation model
// Y_k | B_k ~ CN(0, sigma_h2 * p_t * B_k + sigma_v2).
struct SensingParams {
  double p_t = 10.0;
  double sigma_h2 = 1.0;
  double sigma_v2 = 1.0;

  double variance(int bit) const { return bit ? sigma_h2 * p_t + sigma_v2 : sigma_v2; }
};

// Observations on the sensed subcarriers of one time-slot; indices are
// 0-based and strictly increasing.
struct ObservationVector {
  std::vector<int> indices;
  std::vector<std::complex<double>> samples;

  std::size_t size() const { return indices.size(); }
};

// P_LoS(chi) = 1 / (1 + z1 exp(-z2 (chi - z1))); chi in (0, pi/2].
double los_probability(double elevation_rad, double z1, double z2);

// Draws the LoS/NLoS branch and fills the branch-specific pathloss and
// K-factor.
LinkState sample_link(double distance_m, double elevation_rad,
                      const ChannelEnvParams& env, Rng& rng);

// Pathloss at distance d for an already-drawn LoS/NLoS branch.
double pathloss(bool is_los, double distance_m, const ChannelEnvParams& env);

// Small-scale complex gain with E|w|^2 = 1: Rician with the link's K-factor
// (Rayleigh when k = 0).
std::complex<double> sample_small_scale(double k_factor, Rng& rng);

// Noisy sensing snapshot of the sensed subcarriers (Eq-8 style flat model).
ObservationVector sense(const OccupancyState& state, std::span<const int> sensing_set,
                        const SensingParams& p, Rng& rng);

// Log density of one complex sample under occupancy bit b.
double observation_log_density(std::complex<double> y, int b, const SensingParams& p);

// First-order Marcum Q function, absolute accuracy ~1e-9 for moderate
// arguments (a, b up to ~30).
double marcum_q1(double a, double b);

// Outage probability of an interference-free Rician link at the given rate:
// 1 - Q1( sqrt(2K), sqrt(2(K+1) sigma_v2 / (psi p_t)) * (2^(rate/w) - 1) ).
double outage_probability(double rate_bps, double psi, double k_factor, double p_t,
                          double sigma_v2, double w_hz);

// Rate maximizing rate * (1 - P_out(rate)); golden-section search, relative
// bracket tolerance 1e-6.
double adapt_rate(double psi, double k_factor, double p_t, double sigma_v2,
                  double w_hz);

struct SinrCapacity {
  std::vector<double> sinr;
  std::vector<double> capacity_bps;
};

// gains[i][j]: |h|^2 from transmitter j to receiver i on one subcarrier;
// transmitter i is the one intended for receiver i. Idle transmitters are
// expressed as zero power.
SinrCapacity sinr_and_capacity(const std::vector<std::vector<double>>& gains,
                               std::span<const double> tx_power, double sigma_v2,
                               double w_hz);

}  // namespace dsa
