#pragma once

#include <complex>
#include <optional>
#include <string>
#include <vector>

#include "dsasim/channel.hpp"
#include "dsasim/occupancy.hpp"

namespace dsa {

// Per-slot record of what was sensed and the complex samples observed.
// Indices are 0-based within the fragment the log belongs to.
struct SensingLog {
  struct Slot {
    std::vector<int> indices;
    std::vector<std::complex<double>> samples;
  };
  int width = 0;
  std::vector<Slot> slots;

  std::size_t horizon() const { return slots.size(); }
};

// Expected transition counts from the E-step. a[w][b]: first-subcarrier
// transitions w->b; b_counts[u][v][b]: interior transitions with lower
// neighbor u (new slot) and own previous state v.
struct EStepStats {
  double a[2][2] = {{0, 0}, {0, 0}};
  double b_counts[2][2][2] = {{{0, 0}, {0, 0}}, {{0, 0}, {0, 0}}};

  void accumulate(const EStepStats& other);
  double a_total() const;
  double b_total() const;
};

struct ForwardBackwardResult {
  EStepStats stats;
  double log_likelihood = 0;
  bool finite = true;
};

// Exact smoothed E-step over the 2^width joint fragment states (width <= 12
// enforced). Unsensed subcarriers contribute likelihood factor 1. When
// q_rooted is false the fragment's first subcarrier still evolves under q in
// the fragment model, but its pairwise counts are left out of the A stats
// (used for fragments whose first subcarrier is not the global subcarrier 1).
ForwardBackwardResult forward_backward(const SensingLog& log, const Theta& theta,
                                       const SensingParams& obs, bool q_rooted = true);

struct MStepResult {
  Theta theta;
  // Bits flag zero-denominator cells that kept the previous value:
  // 0..3 = p00,p01,p10,p11; 4..5 = q0,q1.
  unsigned degenerate_mask = 0;
};

// Closed-form ratio update; zero-denominator cells keep the previous value.
MStepResult m_step(const EStepStats& stats, const Theta& previous);

struct EstimateIteration {
  int iteration = 0;
  double log_likelihood = 0;
  Theta theta;
  std::optional<double> mse_vs_reference;
};

struct EstimateOptions {
  int max_iters = 50;
  double tol = 1e-7;  // relative |delta log-likelihood| termination
  SensingParams obs;
  std::optional<Theta> reference;  // true theta, for MSE tracking only
};

struct EstimateResult {
  Theta theta;
  std::vector<EstimateIteration> trace;
  bool converged = false;
  bool likelihood_finite = true;
};

// EM over one or more fragment logs sharing one theta. logs[0] is treated as
// q-rooted; remaining fragments contribute interior (p) counts only.
EstimateResult estimate(const std::vector<SensingLog>& logs, const Theta& theta0,
                        const EstimateOptions& opts);
EstimateResult estimate(const SensingLog& log, const Theta& theta0,
                        const EstimateOptions& opts);

// Squared Euclidean distance between two parameter vectors.
double mse(const Theta& a, const Theta& b);

// Hard empirical transition counts of a fully observed trace; the
// closed-form MLE path for noiseless data (m_step on these counts).
EStepStats count_transitions(const OccupancyTrace& trace);

// Estimator checkpoint rows:
// iteration,log_likelihood,q0,q1,p00,p01,p10,p11,mse_if_reference
void write_estimate_trace_csv(const std::vector<EstimateIteration>& trace,
                              const std::string& path);

}  // namespace dsa
