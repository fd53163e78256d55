#include "dsasim/hmm.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <stdexcept>

namespace dsa {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// Per-slot emission weights over joint states, rescaled so the max is 1;
// the dropped scale is accumulated into log_scale (it shifts the data
// log-likelihood but not the posteriors).
void emission_weights(const SensingLog::Slot& slot, int width,
                      const SensingParams& obs, std::vector<double>& em,
                      double& log_scale) {
  std::fill(em.begin(), em.end(), 1.0);
  if (slot.indices.empty()) return;
  const double v0 = obs.variance(0), v1 = obs.variance(1);
  for (std::size_t i = 0; i < slot.indices.size(); ++i) {
    const int k = slot.indices[i];
    if (k < 0 || k >= width)
      throw std::invalid_argument("forward_backward: sensed index out of range");
    const double e = std::norm(slot.samples[i]);
    const double g0 = -e / v0 - std::log(v0);
    const double g1 = -e / v1 - std::log(v1);
    const double g = std::max(g0, g1);
    if (!std::isfinite(g)) {  // degenerate sample; zero emission -> sentinel
      std::fill(em.begin(), em.end(), 0.0);
      return;
    }
    const double l0 = std::exp(g0 - g);
    const double l1 = std::exp(g1 - g);
    log_scale += g - std::log(std::numbers::pi);  // restore the CN density scale
    const std::uint32_t mask = 1u << k;
    for (std::size_t s = 0; s < em.size(); ++s) em[s] *= (s & mask) ? l1 : l0;
  }
}

}  // namespace

void EStepStats::accumulate(const EStepStats& other) {
  for (int w = 0; w < 2; ++w)
    for (int b = 0; b < 2; ++b) a[w][b] += other.a[w][b];
  for (int u = 0; u < 2; ++u)
    for (int v = 0; v < 2; ++v)
      for (int b = 0; b < 2; ++b) b_counts[u][v][b] += other.b_counts[u][v][b];
}

double EStepStats::a_total() const {
  return a[0][0] + a[0][1] + a[1][0] + a[1][1];
}

double EStepStats::b_total() const {
  double t = 0;
  for (int u = 0; u < 2; ++u)
    for (int v = 0; v < 2; ++v)
      for (int b = 0; b < 2; ++b) t += b_counts[u][v][b];
  return t;
}

ForwardBackwardResult forward_backward(const SensingLog& log, const Theta& theta,
                                       const SensingParams& obs, bool q_rooted) {
  if (log.width < 1 || log.width > 12)
    throw std::invalid_argument("forward_backward: fragment width must be in [1,12]");
  const std::size_t tau = log.horizon();
  if (tau < 2)
    throw std::invalid_argument("forward_backward: need at least 2 slots");

  const int width = log.width;
  const std::size_t n = std::size_t{1} << width;
  const TransitionModel model(theta, width);

  // Scaled forward pass (Rabiner): alpha rows normalized to sum 1, scales
  // folded into the log-likelihood.
  std::vector<double> alpha(tau * n), em(tau * n);
  double log_like = 0.0;
  {
    std::vector<double> em_t(n);
    for (std::size_t t = 0; t < tau; ++t) {
      double log_scale = 0.0;
      emission_weights(log.slots[t], width, obs, em_t, log_scale);
      log_like += log_scale;
      std::copy(em_t.begin(), em_t.end(), em.begin() + t * n);
    }
  }
  const double init_w = 1.0 / static_cast<double>(n);  // uniform initial state law
  {
    double c = 0.0;
    for (std::size_t s = 0; s < n; ++s) {
      alpha[s] = init_w * em[s];
      c += alpha[s];
    }
    if (!(c > 0.0)) return {{}, kNegInf, false};
    for (std::size_t s = 0; s < n; ++s) alpha[s] /= c;
    log_like += std::log(c);
  }
  for (std::size_t t = 1; t < tau; ++t) {
    double* cur = &alpha[t * n];
    const double* prev = &alpha[(t - 1) * n];
    const double* em_t = &em[t * n];
    std::fill(cur, cur + n, 0.0);
    for (std::size_t from = 0; from < n; ++from) {
      const double a = prev[from];
      if (a == 0.0) continue;
      const double* row = model.row_from(static_cast<std::uint32_t>(from));
      for (std::size_t to = 0; to < n; ++to) cur[to] += a * row[to];
    }
    double c = 0.0;
    for (std::size_t s = 0; s < n; ++s) {
      cur[s] *= em_t[s];
      c += cur[s];
    }
    if (!(c > 0.0)) return {{}, kNegInf, false};
    for (std::size_t s = 0; s < n; ++s) cur[s] /= c;
    log_like += std::log(c);
  }

  // Backward pass with pairwise-weight accumulation. W[from][to] collects
  // sum_t xi_t(from,to); the A/B count stats are linear in W, so they are
  // reduced from it once at the end.
  std::vector<double> beta(n, 1.0), beta_prev(n), tmp(n);
  std::vector<double> w_pair(n * n, 0.0);
  for (std::size_t t = tau - 1; t >= 1; --t) {
    const double* em_t = &em[t * n];
    for (std::size_t s = 0; s < n; ++s) tmp[s] = em_t[s] * beta[s];
    const double* a_prev = &alpha[(t - 1) * n];
    // xi_t(from,to) proportional to alpha_{t-1}(from) T(from,to) em_t(to) beta_t(to)
    double z = 0.0;
    for (std::size_t from = 0; from < n; ++from) {
      const double* row = model.row_from(static_cast<std::uint32_t>(from));
      const double a = a_prev[from];
      double acc = 0.0;
      for (std::size_t to = 0; to < n; ++to) acc += row[to] * tmp[to];
      beta_prev[from] = acc;
      z += a * acc;
    }
    if (!(z > 0.0)) return {{}, kNegInf, false};
    const double inv_z = 1.0 / z;
    for (std::size_t from = 0; from < n; ++from) {
      const double scale = a_prev[from] * inv_z;
      if (scale == 0.0) continue;
      const double* row = model.row_from(static_cast<std::uint32_t>(from));
      double* wrow = &w_pair[from * n];
      for (std::size_t to = 0; to < n; ++to) wrow[to] += scale * row[to] * tmp[to];
    }
    // Rescale beta so it stays O(1); any positive scale works since xi is
    // normalized per step.
    double bmax = 0.0;
    for (std::size_t s = 0; s < n; ++s) bmax = std::max(bmax, beta_prev[s]);
    if (!(bmax > 0.0)) return {{}, kNegInf, false};
    for (std::size_t s = 0; s < n; ++s) beta[s] = beta_prev[s] / bmax;
  }

  ForwardBackwardResult out;
  out.log_likelihood = log_like;
  out.finite = true;
  for (std::size_t from = 0; from < n; ++from) {
    const double* wrow = &w_pair[from * n];
    for (std::size_t to = 0; to < n; ++to) {
      const double w = wrow[to];
      if (w == 0.0) continue;
      if (q_rooted) out.stats.a[from & 1u][to & 1u] += w;
      for (int k = 1; k < width; ++k) {
        const int u = static_cast<int>((to >> (k - 1)) & 1u);
        const int v = static_cast<int>((from >> k) & 1u);
        const int b = static_cast<int>((to >> k) & 1u);
        out.stats.b_counts[u][v][b] += w;
      }
    }
  }
  return out;
}

MStepResult m_step(const EStepStats& stats, const Theta& previous) {
  MStepResult out;
  out.theta = previous;
  auto ratio = [&](double c0, double c1, double& target, int flag_bit) {
    const double denom = c0 + c1;
    if (denom > 0.0)
      target = std::clamp(c1 / denom, 0.0, 1.0);
    else
      out.degenerate_mask |= (1u << flag_bit);
  };
  ratio(stats.b_counts[0][0][0], stats.b_counts[0][0][1], out.theta.p00, 0);
  ratio(stats.b_counts[0][1][0], stats.b_counts[0][1][1], out.theta.p01, 1);
  ratio(stats.b_counts[1][0][0], stats.b_counts[1][0][1], out.theta.p10, 2);
  ratio(stats.b_counts[1][1][0], stats.b_counts[1][1][1], out.theta.p11, 3);
  ratio(stats.a[0][0], stats.a[0][1], out.theta.q0, 4);
  ratio(stats.a[1][0], stats.a[1][1], out.theta.q1, 5);
  return out;
}

EstimateResult estimate(const std::vector<SensingLog>& logs, const Theta& theta0,
                        const EstimateOptions& opts) {
  if (logs.empty()) throw std::invalid_argument("estimate: no fragments");
  for (const auto& log : logs)
    if (log.horizon() < 2)
      throw std::invalid_argument("estimate: each log needs at least 2 slots");

  EstimateResult out;
  Theta theta = theta0;
  double prev_ll = kNegInf;
  for (int iter = 0; iter < opts.max_iters; ++iter) {
    EStepStats stats;
    double ll = 0.0;
    for (std::size_t f = 0; f < logs.size(); ++f) {
      const auto fb = forward_backward(logs[f], theta, opts.obs, f == 0);
      if (!fb.finite) {
        out.theta = theta;
        out.likelihood_finite = false;
        return out;
      }
      stats.accumulate(fb.stats);
      ll += fb.log_likelihood;
    }
    EstimateIteration rec;
    rec.iteration = iter;
    rec.log_likelihood = ll;
    rec.theta = theta;
    if (opts.reference) rec.mse_vs_reference = mse(theta, *opts.reference);
    out.trace.push_back(rec);
    if (iter > 0 && std::abs(ll - prev_ll) < opts.tol * (1.0 + std::abs(ll))) {
      out.converged = true;
      break;
    }
    prev_ll = ll;
    theta = m_step(stats, theta).theta;
  }
  out.theta = out.trace.empty() ? theta0 : out.trace.back().theta;
  return out;
}

EstimateResult estimate(const SensingLog& log, const Theta& theta0,
                        const EstimateOptions& opts) {
  return estimate(std::vector<SensingLog>{log}, theta0, opts);
}

EStepStats count_transitions(const OccupancyTrace& trace) {
  if (trace.length() < 2)
    throw std::invalid_argument("count_transitions: need at least 2 slots");
  EStepStats stats;
  for (std::size_t t = 1; t < trace.length(); ++t) {
    const std::uint32_t from = trace.states[t - 1];
    const std::uint32_t to = trace.states[t];
    stats.a[from & 1u][to & 1u] += 1.0;
    for (int k = 1; k < trace.width; ++k) {
      const int u = static_cast<int>((to >> (k - 1)) & 1u);
      const int v = static_cast<int>((from >> k) & 1u);
      const int b = static_cast<int>((to >> k) & 1u);
      stats.b_counts[u][v][b] += 1.0;
    }
  }
  return stats;
}

double mse(const Theta& a, const Theta& b) {
  const auto va = a.as_array();
  const auto vb = b.as_array();
  double s = 0.0;
  for (int i = 0; i < 6; ++i) {
    const double d = va[i] - vb[i];
    s += d * d;
  }
  return s;
}

void write_estimate_trace_csv(const std::vector<EstimateIteration>& trace,
                              const std::string& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open for writing: " + path);
  os << "iteration,log_likelihood,q0,q1,p00,p01,p10,p11,mse_if_reference\n";
  char buf[64];
  auto num = [&](double x) {
    std::snprintf(buf, sizeof buf, "%.9g", x);
    return std::string(buf);
  };
  for (const auto& r : trace) {
    os << r.iteration << ',' << num(r.log_likelihood) << ',' << num(r.theta.q0)
       << ',' << num(r.theta.q1) << ',' << num(r.theta.p00) << ','
       << num(r.theta.p01) << ',' << num(r.theta.p10) << ',' << num(r.theta.p11)
       << ',' << (r.mse_vs_reference ? num(*r.mse_vs_reference) : std::string())
       << "\n";
  }
}

}  // namespace dsa
