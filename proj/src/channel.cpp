#include "dsasim/channel.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace dsa {

namespace {

constexpr double kHalfPi = std::numbers::pi / 2.0;

}  // namespace

void ChannelEnvParams::validate() const {
  if (!(mu_los >= 2.0)) throw std::invalid_argument("channel.mu_los must be >= 2");
  if (!(mu_nlos >= mu_los))
    throw std::invalid_argument("channel.mu_nlos must be >= mu_los");
  if (!(iota > 0.0 && iota <= 1.0))
    throw std::invalid_argument("channel.iota must be in (0,1]");
  if (!(psi0 > 0.0)) throw std::invalid_argument("channel.psi0 must be > 0");
  if (!(noise_power > 0.0))
    throw std::invalid_argument("channel.noise_power must be > 0");
  if (!(bandwidth_hz > 0.0))
    throw std::invalid_argument("channel.bandwidth_hz must be > 0");
}

double los_probability(double elevation_rad, double z1, double z2) {
  if (!(elevation_rad > 0.0 && elevation_rad <= kHalfPi))
    throw std::invalid_argument("los_probability: elevation must be in (0, pi/2]");
  return 1.0 / (1.0 + z1 * std::exp(-z2 * (elevation_rad - z1)));
}

double pathloss(bool is_los, double distance_m, const ChannelEnvParams& env) {
  if (!(distance_m > 0.0))
    throw std::invalid_argument("pathloss: distance must be > 0");
  return is_los ? env.psi0 * std::pow(distance_m, -env.mu_los)
                : env.iota * env.psi0 * std::pow(distance_m, -env.mu_nlos);
}

LinkState sample_link(double distance_m, double elevation_rad,
                      const ChannelEnvParams& env, Rng& rng) {
  LinkState link;
  link.distance_m = distance_m;
  link.elevation_rad = elevation_rad;
  link.is_los = rng.bernoulli(los_probability(elevation_rad, env.z1, env.z2));
  link.psi = pathloss(link.is_los, distance_m, env);
  link.k_factor = link.is_los ? env.f1 * std::exp(env.f2 * elevation_rad) : 0.0;
  return link;
}

std::complex<double> sample_small_scale(double k_factor, Rng& rng) {
  // Rician with unit mean power: deterministic LoS ray of power K/(K+1)
  // plus scattered CN(0, 1/(K+1)).
  const double los = std::sqrt(k_factor / (k_factor + 1.0));
  return std::complex<double>{los, 0.0} + rng.cnormal(1.0 / (k_factor + 1.0));
}

ObservationVector sense(const OccupancyState& state, std::span<const int> sensing_set,
                        const SensingParams& p, Rng& rng) {
  ObservationVector obs;
  obs.indices.reserve(sensing_set.size());
  obs.samples.reserve(sensing_set.size());
  for (int k : sensing_set) {
    if (k < 0 || k >= state.width)
      throw std::invalid_argument("sense: subcarrier index out of range");
    obs.indices.push_back(k);
    obs.samples.push_back(rng.cnormal(p.variance(state.bit(k))));
  }
  return obs;
}

double observation_log_density(std::complex<double> y, int b, const SensingParams& p) {
  const double v = p.variance(b);
  if (!(v > 0.0))
    throw std::invalid_argument("observation_log_density: variance must be > 0");
  return -std::log(std::numbers::pi * v) - std::norm(y) / v;
}

double marcum_q1(double a, double b) {
  if (a < 0.0 || b < 0.0)
    throw std::invalid_argument("marcum_q1: arguments must be >= 0");
  if (b == 0.0) return 1.0;
  const double x = a * a / 2.0;  // Poisson mean of the a-series
  const double y = b * b / 2.0;  // Poisson mean of the b-series
  if (a == 0.0) return std::exp(-y);
  // Canonical series Q1(a,b) = sum_k Pois(x)[k] * P[Pois(y) <= k]. Both
  // factors are built iteratively; truncation once the remaining a-mass is
  // below 1e-14 bounds the absolute error by the same amount.
  if (x > 700.0 || y > 700.0) {
    // exp underflow region; normal approximation of the noncentral chi.
    return 0.5 * std::erfc((b - a) / std::sqrt(2.0));
  }
  double pois_a = std::exp(-x);   // Pois(x) pmf at k
  double cdf_a = pois_a;          // Pois(x) cdf at k
  double pois_b = std::exp(-y);   // Pois(y) pmf at k
  double cdf_b = pois_b;          // Pois(y) cdf at k
  double q = pois_a * cdf_b;
  for (int k = 1; k < 100000; ++k) {
    pois_a *= x / k;
    pois_b *= y / k;
    cdf_a += pois_a;
    cdf_b += pois_b;
    q += pois_a * cdf_b;
    if (1.0 - cdf_a < 1e-14 && k > x) break;
  }
  return std::clamp(q, 0.0, 1.0);
}

double outage_probability(double rate_bps, double psi, double k_factor, double p_t,
                          double sigma_v2, double w_hz) {
  if (!(psi > 0.0 && p_t > 0.0 && sigma_v2 > 0.0 && w_hz > 0.0) || rate_bps < 0.0 ||
      k_factor < 0.0)
    throw std::invalid_argument("outage_probability: bad arguments");
  const double snr_gap = std::exp2(rate_bps / w_hz) - 1.0;
  const double a = std::sqrt(2.0 * k_factor);
  const double b =
      std::sqrt(2.0 * (k_factor + 1.0) * sigma_v2 / (psi * p_t)) * snr_gap;
  return std::clamp(1.0 - marcum_q1(a, b), 0.0, 1.0);
}

double adapt_rate(double psi, double k_factor, double p_t, double sigma_v2,
                  double w_hz) {
  const double mean_snr = psi * p_t / sigma_v2;
  const double hi = 4.0 * w_hz * std::log2(1.0 + mean_snr);
  auto objective = [&](double rate) {
    return rate * (1.0 - outage_probability(rate, psi, k_factor, p_t, sigma_v2, w_hz));
  };
  // Golden-section search on [0, hi]. The objective rises from 0, peaks,
  // then collapses onto a flat zero tail; ties must shrink the right edge
  // or the search walks onto the tail.
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double lo = 0.0, up = hi;
  double c = up - inv_phi * (up - lo);
  double d = lo + inv_phi * (up - lo);
  double fc = objective(c), fd = objective(d);
  while ((up - lo) > 1e-6 * hi) {
    if (fc >= fd) {
      up = d;
      d = c;
      fd = fc;
      c = up - inv_phi * (up - lo);
      fc = objective(c);
    } else {
      lo = c;
      c = d;
      fc = fd;
      d = lo + inv_phi * (up - lo);
      fd = objective(d);
    }
  }
  return (lo + up) / 2.0;
}

SinrCapacity sinr_and_capacity(const std::vector<std::vector<double>>& gains,
                               std::span<const double> tx_power, double sigma_v2,
                               double w_hz) {
  if (!(sigma_v2 > 0.0 && w_hz > 0.0))
    throw std::invalid_argument("sinr_and_capacity: bad noise/bandwidth");
  SinrCapacity out;
  out.sinr.reserve(gains.size());
  out.capacity_bps.reserve(gains.size());
  for (std::size_t i = 0; i < gains.size(); ++i) {
    if (gains[i].size() != tx_power.size())
      throw std::invalid_argument("sinr_and_capacity: inconsistent index sets");
    double interference = 0.0;
    for (std::size_t j = 0; j < tx_power.size(); ++j)
      if (j != i) interference += gains[i][j] * tx_power[j];
    const double s = gains[i][i] * tx_power[i] / (sigma_v2 + interference);
    out.sinr.push_back(s);
    out.capacity_bps.push_back(w_hz * std::log2(1.0 + s));
  }
  return out;
}

}  // namespace dsa
