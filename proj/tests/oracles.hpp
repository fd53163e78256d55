#pragma once

// Independent reference computations for the test suites. Everything here
// recomputes results from first principles (enumeration, quadrature,
// counting) without touching the library's optimized code paths.

#include <cmath>
#include <complex>
#include <cstdint>
#include <functional>
#include <vector>

#include "dsasim/occupancy.hpp"

namespace oracles {

// Transition probability rebuilt factor-by-factor from the parameter
// definitions (independent construction route).
inline double transition_prob(std::uint32_t from, std::uint32_t to, int width,
                              const dsa::Theta& th) {
  auto bit = [](std::uint32_t s, int j) { return static_cast<int>((s >> j) & 1u); };
  double prob = 1.0;
  for (int j = 0; j < width; ++j) {
    double p_one;
    if (j == 0)
      p_one = bit(from, 0) ? th.q1 : th.q0;
    else
      p_one = th.p(bit(to, j - 1), bit(from, j));
    prob *= bit(to, j) ? p_one : 1.0 - p_one;
  }
  return prob;
}

// Adaptive Simpson quadrature.
inline double simpson(const std::function<double(double)>& f, double a, double b,
                      double fa, double fm, double fb, double eps, int depth) {
  const double m = (a + b) / 2;
  const double lm = (a + m) / 2, rm = (m + b) / 2;
  const double flm = f(lm), frm = f(rm);
  const double whole = (b - a) / 6 * (fa + 4 * fm + fb);
  const double left = (m - a) / 6 * (fa + 4 * flm + fm);
  const double right = (b - m) / 6 * (fm + 4 * frm + fb);
  if (depth <= 0 || std::abs(left + right - whole) < 15 * eps)
    return left + right + (left + right - whole) / 15;
  return simpson(f, a, m, fa, flm, fm, eps / 2, depth - 1) +
         simpson(f, m, b, fm, frm, fb, eps / 2, depth - 1);
}

inline double integrate(const std::function<double(double)>& f, double a, double b,
                        double eps = 1e-12) {
  const double m = (a + b) / 2;
  return simpson(f, a, b, f(a), f(m), f(b), eps, 48);
}

// Marcum Q1 through its defining integral (uses std::cyl_bessel_i).
inline double marcum_q1(double a, double b) {
  if (b == 0.0) return 1.0;
  const auto integrand = [a](double x) {
    return x * std::exp(-(x * x + a * a) / 2) * std::cyl_bessel_i(0.0, a * x);
  };
  // The integrand decays like exp(-(x-a)^2/2); 12 sigmas past max(a,b) is
  // far below the 1e-9 accuracy target.
  const double hi = std::max(a, b) + 12.0;
  return integrate(integrand, b, hi, 1e-13);
}

// Expected-reward maximization by exhaustive enumeration of phi.
inline double best_expected_reward(const std::vector<double>& marginals,
                                   double lambda, std::uint32_t* best_phi) {
  const int width = static_cast<int>(marginals.size());
  double best = -1e300;
  std::uint32_t arg = 0;
  for (std::uint32_t phi = 0; phi < (1u << width); ++phi) {
    double r = 0.0;
    for (int k = 0; k < width; ++k)
      if ((phi >> k) & 1u) r += (1.0 - marginals[k]) - lambda * marginals[k];
    if (r > best) {
      best = r;
      arg = phi;
    }
  }
  if (best_phi) *best_phi = arg;
  return best;
}

inline double realized(std::uint32_t phi, std::uint32_t truth, int width,
                       double lambda) {
  double r = 0.0;
  for (int k = 0; k < width; ++k)
    if ((phi >> k) & 1u) {
      const int b = (truth >> k) & 1u;
      r += b ? -lambda : 1.0;
    }
  return r;
}

inline double best_realized(std::uint32_t truth, int width, double lambda) {
  double best = -1e300;
  for (std::uint32_t phi = 0; phi < (1u << width); ++phi)
    best = std::max(best, realized(phi, truth, width, lambda));
  return best;
}

// Complex-Gaussian density (linear domain).
inline double cn_density(std::complex<double> y, double variance) {
  return std::exp(-std::norm(y) / variance) / (M_PI * variance);
}

// Brute-force posterior: prior times the per-sample densities, normalized.
inline std::vector<double> posterior(const std::vector<double>& prior,
                                     const std::vector<int>& idx,
                                     const std::vector<std::complex<double>>& y,
                                     double v0, double v1) {
  std::vector<double> post(prior);
  for (std::size_t s = 0; s < post.size(); ++s)
    for (std::size_t i = 0; i < idx.size(); ++i)
      post[s] *= cn_density(y[i], ((s >> idx[i]) & 1u) ? v1 : v0);
  double total = 0;
  for (double w : post) total += w;
  for (double& w : post) w /= total;
  return post;
}

// Brute-force restricted-sum prior propagation.
inline std::vector<double> propagate(const std::vector<double>& post, int width,
                                     const dsa::Theta& th, int delta) {
  const std::uint32_t n = 1u << width;
  std::vector<double> out(n, 0.0);
  double total = 0;
  for (std::uint32_t target = 0; target < n; ++target) {
    for (std::uint32_t src = 0; src < n; ++src) {
      int dist = 0;
      for (int j = 0; j < width; ++j) dist += ((target ^ src) >> j) & 1u;
      if (dist > delta) continue;
      out[target] += transition_prob(src, target, width, th) * post[src];
    }
    total += out[target];
  }
  for (double& w : out) w /= total;
  return out;
}

}  // namespace oracles
