#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "dsasim/hmm.hpp"
#include "dsasim/perseus.hpp"

namespace dsa {

// Per-(slot,subcarrier) record feeding the Eq-30 style CR throughput sum.
struct CrChannelUse {
  double rate_bps = 0;
  bool accessed = false;
  double sinr = 0;
};

// Per-(slot,subcarrier) record feeding the Eq-31 style LU throughput ratio.
struct LuChannelUse {
  bool busy = false;
  double sinr = 0;
};

struct LossResult {
  std::vector<double> loss;            // per slot; slots with oracle 0 excluded
  std::vector<std::uint8_t> included;  // aligned flags
  double mean = 0;                     // over included slots
  std::size_t included_count = 0;
};

struct RocPoint {
  double lambda = 0;
  double p_fa = 0;
  double p_md = 0;
  bool fa_defined = false;  // false when no idle (resp. busy) cells occurred
  bool md_defined = false;
  std::string method = "lessa";
};

struct SolverTraceRow {
  int fragment = 0;
  SolveIteration iter;
};

struct MetricsReport {
  double cr_throughput_bps = 0;
  double lu_throughput_bps = 0;
  bool lu_any_transmission = false;
  double mean_utility = 0;
  double mean_normalized_loss = 0;
  std::size_t loss_slots_included = 0;
  double p_fa = 0, p_md = 0;
  bool p_fa_defined = false, p_md_defined = false;
  std::vector<double> utility_trace;
  std::vector<double> loss_trace;
  std::vector<std::uint8_t> loss_included;
  std::vector<RocPoint> roc;
  std::vector<EstimateIteration> estimator_trace;
  std::vector<SolverTraceRow> solver_trace;
};

// (1/T) sum_t sum_k rate * accessed * I[sinr >= 2^(rate/w) - 1].
double cr_throughput(const std::vector<std::vector<CrChannelUse>>& slots,
                     double w_hz);

// sum Phi_LU * busy * I[sinr >= 2^(Phi_LU/w)-1] / sum busy; {0, flag unset}
// when nothing was transmitted.
struct LuThroughput {
  double value = 0;
  bool any_transmission = false;
};
LuThroughput lu_throughput(const std::vector<std::vector<LuChannelUse>>& slots,
                           double lu_rate_bps, double w_hz);

// Per-slot 1 - realized/oracle; all-busy slots (oracle == 0) are excluded
// from the average and flagged out.
LossResult normalized_loss(std::span<const double> realized,
                           std::span<const double> oracle);

// Empirical conditional frequencies over (slot,subcarrier) cells.
RocPoint roc_point(std::size_t idle_total, std::size_t idle_not_accessed,
                   std::size_t busy_total, std::size_t busy_accessed,
                   double lambda);

// Writes metrics.csv, utility_trace.csv, loss_trace.csv, roc.csv,
// estimator_trace.csv, solver_trace.csv into dir (creating it). Numbers are
// printed with 9 significant digits; byte output is deterministic for a
// fixed report.
void emit_report(const MetricsReport& report, const std::string& dir);

// Re-parses a directory written by emit_report.
MetricsReport load_report(const std::string& dir);

// %.9g formatting shared by all report writers.
std::string format_number(double x);

}  // namespace dsa
