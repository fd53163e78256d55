#include "dsasim/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

namespace dsa {

namespace {

std::ofstream open_out(const std::string& dir, const std::string& name) {
  const std::filesystem::path p = std::filesystem::path(dir) / name;
  std::ofstream os(p);
  if (!os) throw std::runtime_error("cannot open for writing: " + p.string());
  return os;
}

std::ifstream open_in(const std::string& dir, const std::string& name) {
  const std::filesystem::path p = std::filesystem::path(dir) / name;
  std::ifstream is(p);
  if (!is) throw std::runtime_error("cannot open: " + p.string());
  return is;
}

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream ls(line);
  while (std::getline(ls, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.push_back("");
  return cells;
}

}  // namespace

std::string format_number(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.9g", x);
  return buf;
}

double cr_throughput(const std::vector<std::vector<CrChannelUse>>& slots,
                     double w_hz) {
  if (slots.empty()) return 0.0;
  double total = 0.0;
  for (const auto& slot : slots)
    for (const auto& use : slot) {
      if (!use.accessed) continue;
      const double gap = std::exp2(use.rate_bps / w_hz) - 1.0;
      if (use.sinr >= gap) total += use.rate_bps;
    }
  return total / static_cast<double>(slots.size());
}

LuThroughput lu_throughput(const std::vector<std::vector<LuChannelUse>>& slots,
                           double lu_rate_bps, double w_hz) {
  const double gap = std::exp2(lu_rate_bps / w_hz) - 1.0;
  double numer = 0.0;
  std::size_t transmissions = 0;
  for (const auto& slot : slots)
    for (const auto& use : slot) {
      if (!use.busy) continue;
      ++transmissions;
      if (use.sinr >= gap) numer += lu_rate_bps;
    }
  if (transmissions == 0) return {0.0, false};
  return {numer / static_cast<double>(transmissions), true};
}

LossResult normalized_loss(std::span<const double> realized,
                           std::span<const double> oracle) {
  if (realized.size() != oracle.size())
    throw std::invalid_argument("normalized_loss: trace length mismatch");
  LossResult out;
  out.loss.resize(realized.size(), 0.0);
  out.included.resize(realized.size(), 0);
  double sum = 0.0;
  for (std::size_t t = 0; t < realized.size(); ++t) {
    if (oracle[t] > 0.0) {
      out.loss[t] = 1.0 - realized[t] / oracle[t];
      out.included[t] = 1;
      sum += out.loss[t];
      ++out.included_count;
    }
  }
  out.mean = out.included_count ? sum / static_cast<double>(out.included_count) : 0.0;
  return out;
}

RocPoint roc_point(std::size_t idle_total, std::size_t idle_not_accessed,
                   std::size_t busy_total, std::size_t busy_accessed,
                   double lambda) {
  RocPoint pt;
  pt.lambda = lambda;
  if (idle_total > 0) {
    pt.p_fa = static_cast<double>(idle_not_accessed) / static_cast<double>(idle_total);
    pt.fa_defined = true;
  }
  if (busy_total > 0) {
    pt.p_md = static_cast<double>(busy_accessed) / static_cast<double>(busy_total);
    pt.md_defined = true;
  }
  return pt;
}

void emit_report(const MetricsReport& report, const std::string& dir) {
  std::filesystem::create_directories(dir);
  {
    auto os = open_out(dir, "metrics.csv");
    os << "metric,value\n";
    os << "cr_throughput_bps," << format_number(report.cr_throughput_bps) << "\n";
    os << "lu_throughput_bps," << format_number(report.lu_throughput_bps) << "\n";
    os << "lu_any_transmission," << (report.lu_any_transmission ? 1 : 0) << "\n";
    os << "mean_utility," << format_number(report.mean_utility) << "\n";
    os << "mean_normalized_loss," << format_number(report.mean_normalized_loss)
       << "\n";
    os << "loss_slots_included," << report.loss_slots_included << "\n";
    os << "p_fa," << format_number(report.p_fa) << "\n";
    os << "p_fa_defined," << (report.p_fa_defined ? 1 : 0) << "\n";
    os << "p_md," << format_number(report.p_md) << "\n";
    os << "p_md_defined," << (report.p_md_defined ? 1 : 0) << "\n";
  }
  {
    auto os = open_out(dir, "utility_trace.csv");
    os << "slot,utility\n";
    for (std::size_t t = 0; t < report.utility_trace.size(); ++t)
      os << t + 1 << ',' << format_number(report.utility_trace[t]) << "\n";
  }
  {
    auto os = open_out(dir, "loss_trace.csv");
    os << "slot,loss,included\n";
    for (std::size_t t = 0; t < report.loss_trace.size(); ++t)
      os << t + 1 << ',' << format_number(report.loss_trace[t]) << ','
         << static_cast<int>(report.loss_included[t]) << "\n";
  }
  {
    auto os = open_out(dir, "roc.csv");
    os << "method,lambda,p_fa,p_md,fa_defined,md_defined\n";
    for (const auto& pt : report.roc)
      os << pt.method << ',' << format_number(pt.lambda) << ','
         << format_number(pt.p_fa) << ',' << format_number(pt.p_md) << ','
         << (pt.fa_defined ? 1 : 0) << ',' << (pt.md_defined ? 1 : 0) << "\n";
  }
  {
    auto os = open_out(dir, "estimator_trace.csv");
    os << "iteration,log_likelihood,q0,q1,p00,p01,p10,p11,mse_if_reference\n";
    for (const auto& r : report.estimator_trace) {
      os << r.iteration << ',' << format_number(r.log_likelihood) << ','
         << format_number(r.theta.q0) << ',' << format_number(r.theta.q1) << ','
         << format_number(r.theta.p00) << ',' << format_number(r.theta.p01) << ','
         << format_number(r.theta.p10) << ',' << format_number(r.theta.p11) << ','
         << (r.mse_vs_reference ? format_number(*r.mse_vs_reference)
                                : std::string())
         << "\n";
    }
  }
  {
    auto os = open_out(dir, "solver_trace.csv");
    os << "fragment,iteration,max_change,mean_value\n";
    for (const auto& r : report.solver_trace)
      os << r.fragment << ',' << r.iter.iteration << ','
         << format_number(r.iter.max_change) << ','
         << format_number(r.iter.mean_value) << "\n";
  }
}

MetricsReport load_report(const std::string& dir) {
  MetricsReport report;
  std::string line;
  {
    auto is = open_in(dir, "metrics.csv");
    std::getline(is, line);
    std::map<std::string, std::string> kv;
    while (std::getline(is, line)) {
      if (line.empty()) continue;
      const auto cells = split_line(line);
      if (cells.size() != 2) throw std::runtime_error("metrics.csv: bad row");
      kv[cells[0]] = cells[1];
    }
    report.cr_throughput_bps = std::stod(kv.at("cr_throughput_bps"));
    report.lu_throughput_bps = std::stod(kv.at("lu_throughput_bps"));
    report.lu_any_transmission = kv.at("lu_any_transmission") == "1";
    report.mean_utility = std::stod(kv.at("mean_utility"));
    report.mean_normalized_loss = std::stod(kv.at("mean_normalized_loss"));
    report.loss_slots_included = std::stoul(kv.at("loss_slots_included"));
    report.p_fa = std::stod(kv.at("p_fa"));
    report.p_fa_defined = kv.at("p_fa_defined") == "1";
    report.p_md = std::stod(kv.at("p_md"));
    report.p_md_defined = kv.at("p_md_defined") == "1";
  }
  {
    auto is = open_in(dir, "utility_trace.csv");
    std::getline(is, line);
    while (std::getline(is, line)) {
      if (line.empty()) continue;
      const auto cells = split_line(line);
      if (cells.size() != 2) throw std::runtime_error("utility_trace.csv: bad row");
      report.utility_trace.push_back(std::stod(cells[1]));
    }
  }
  {
    auto is = open_in(dir, "loss_trace.csv");
    std::getline(is, line);
    while (std::getline(is, line)) {
      if (line.empty()) continue;
      const auto cells = split_line(line);
      if (cells.size() != 3) throw std::runtime_error("loss_trace.csv: bad row");
      report.loss_trace.push_back(std::stod(cells[1]));
      report.loss_included.push_back(cells[2] == "1" ? 1 : 0);
    }
  }
  {
    auto is = open_in(dir, "roc.csv");
    std::getline(is, line);
    while (std::getline(is, line)) {
      if (line.empty()) continue;
      const auto cells = split_line(line);
      if (cells.size() != 6) throw std::runtime_error("roc.csv: bad row");
      RocPoint pt;
      pt.method = cells[0];
      pt.lambda = std::stod(cells[1]);
      pt.p_fa = std::stod(cells[2]);
      pt.p_md = std::stod(cells[3]);
      pt.fa_defined = cells[4] == "1";
      pt.md_defined = cells[5] == "1";
      report.roc.push_back(pt);
    }
  }
  {
    auto is = open_in(dir, "estimator_trace.csv");
    std::getline(is, line);
    while (std::getline(is, line)) {
      if (line.empty()) continue;
      const auto cells = split_line(line);
      if (cells.size() != 9) throw std::runtime_error("estimator_trace.csv: bad row");
      EstimateIteration r;
      r.iteration = std::stoi(cells[0]);
      r.log_likelihood = std::stod(cells[1]);
      r.theta.q0 = std::stod(cells[2]);
      r.theta.q1 = std::stod(cells[3]);
      r.theta.p00 = std::stod(cells[4]);
      r.theta.p01 = std::stod(cells[5]);
      r.theta.p10 = std::stod(cells[6]);
      r.theta.p11 = std::stod(cells[7]);
      if (!cells[8].empty()) r.mse_vs_reference = std::stod(cells[8]);
      report.estimator_trace.push_back(r);
    }
  }
  {
    auto is = open_in(dir, "solver_trace.csv");
    std::getline(is, line);
    while (std::getline(is, line)) {
      if (line.empty()) continue;
      const auto cells = split_line(line);
      if (cells.size() != 4) throw std::runtime_error("solver_trace.csv: bad row");
      SolverTraceRow r;
      r.fragment = std::stoi(cells[0]);
      r.iter.iteration = std::stoi(cells[1]);
      r.iter.max_change = std::stod(cells[2]);
      r.iter.mean_value = std::stod(cells[3]);
      report.solver_trace.push_back(r);
    }
  }
  return report;
}

}  // namespace dsa
