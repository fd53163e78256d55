#include "dsasim/occupancy.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace dsa {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

void check_theta(const Theta& theta) {
  if (!theta.valid())
    throw std::invalid_argument("theta: all six parameters must lie in [0,1]");
}

void check_width(int width) {
  if (width < 1 || width > kMaxWidth)
    throw std::invalid_argument("occupancy width must be in [1," +
                                std::to_string(kMaxWidth) + "]");
}

}  // namespace

bool Theta::valid() const {
  for (double x : as_array())
    if (!(x >= 0.0 && x <= 1.0)) return false;
  return true;
}

double transition_probability_raw(std::uint32_t from, std::uint32_t to, int width,
                                  const Theta& theta) {
  const double q = theta.q(from & 1u);
  double prob = (to & 1u) ? q : 1.0 - q;
  for (int j = 1; j < width; ++j) {
    const int u = static_cast<int>((to >> (j - 1)) & 1u);
    const int v = static_cast<int>((from >> j) & 1u);
    const double p = theta.p(u, v);
    prob *= ((to >> j) & 1u) ? p : 1.0 - p;
  }
  return prob;
}

double transition_probability(const OccupancyState& from, const OccupancyState& to,
                              const Theta& theta) {
  check_theta(theta);
  check_width(from.width);
  if (from.width != to.width)
    throw std::invalid_argument("transition_probability: width mismatch");
  return transition_probability_raw(from.bits, to.bits, from.width, theta);
}

OccupancyState sample_next_state(const OccupancyState& from, const Theta& theta,
                                 Rng& rng) {
  check_theta(theta);
  check_width(from.width);
  std::uint32_t next = rng.bernoulli(theta.q(from.bits & 1u)) ? 1u : 0u;
  for (int j = 1; j < from.width; ++j) {
    const int u = static_cast<int>((next >> (j - 1)) & 1u);
    const int v = static_cast<int>((from.bits >> j) & 1u);
    if (rng.bernoulli(theta.p(u, v))) next |= (1u << j);
  }
  return {next, from.width};
}

std::uint32_t sample_initial_state(int width, InitDistribution init, Rng& rng) {
  check_width(width);
  if (init == InitDistribution::AllIdle) return 0u;
  std::uint32_t s = 0;
  for (int j = 0; j < width; ++j)
    if (rng.bernoulli(0.5)) s |= (1u << j);
  return s;
}

OccupancyTrace sample_trace(const Theta& theta, int width, std::size_t tau,
                            InitDistribution init, Rng& rng) {
  check_theta(theta);
  check_width(width);
  if (tau < 1) throw std::invalid_argument("sample_trace: tau must be >= 1");
  OccupancyTrace trace;
  trace.width = width;
  trace.states.reserve(tau);
  OccupancyState cur{sample_initial_state(width, init, rng), width};
  trace.states.push_back(cur.bits);
  for (std::size_t t = 1; t < tau; ++t) {
    cur = sample_next_state(cur, theta, rng);
    trace.states.push_back(cur.bits);
  }
  return trace;
}

double init_log_probability(std::uint32_t state, int width, InitDistribution init) {
  if (init == InitDistribution::Uniform)
    return -static_cast<double>(width) * std::log(2.0);
  return state == 0u ? 0.0 : kNegInf;
}

LogProb trace_log_likelihood(const OccupancyTrace& trace, const Theta& theta,
                             InitDistribution init) {
  check_theta(theta);
  check_width(trace.width);
  if (trace.length() < 2)
    throw std::invalid_argument("trace_log_likelihood: need at least 2 slots");
  double ll = init_log_probability(trace.states[0], trace.width, init);
  for (std::size_t t = 1; t < trace.length(); ++t) {
    const double p = transition_probability_raw(trace.states[t - 1], trace.states[t],
                                                trace.width, theta);
    if (p <= 0.0) return {kNegInf, false};
    ll += std::log(p);
  }
  if (std::isinf(ll)) return {kNegInf, false};
  return {ll, true};
}

LogProb bic(const OccupancyTrace& trace, const Theta& theta_star, int gamma_params,
            std::size_t nu, InitDistribution init) {
  if (nu < 1) throw std::invalid_argument("bic: nu must be >= 1");
  const LogProb ll = trace_log_likelihood(trace, theta_star, init);
  if (!ll.finite) return {std::numeric_limits<double>::infinity(), false};
  return {gamma_params * std::log(static_cast<double>(nu)) - 2.0 * ll.value, true};
}

TransitionModel::TransitionModel(const Theta& theta, int width)
    : theta_(theta), width_(width) {
  check_theta(theta);
  check_width(width);
  if (width > 12)
    throw std::invalid_argument("TransitionModel: dense matrix limited to width 12");
  const std::size_t n = std::size_t{1} << width;
  from_major_.resize(n * n);
  to_major_.resize(n * n);
  for (std::uint32_t from = 0; from < n; ++from)
    for (std::uint32_t to = 0; to < n; ++to) {
      const double p = transition_probability_raw(from, to, width, theta);
      from_major_[(static_cast<std::size_t>(from) << width) + to] = p;
      to_major_[(static_cast<std::size_t>(to) << width) + from] = p;
    }
}

void write_trace_csv(const OccupancyTrace& trace, std::ostream& os) {
  os << "t";
  for (int j = 1; j <= trace.width; ++j) os << ",b_" << j;
  os << "\n";
  for (std::size_t t = 0; t < trace.length(); ++t) {
    os << t + 1;
    for (int j = 0; j < trace.width; ++j)
      os << ',' << ((trace.states[t] >> j) & 1u);
    os << "\n";
  }
}

void write_trace_csv(const OccupancyTrace& trace, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open for writing: " + path);
  write_trace_csv(trace, os);
}

OccupancyTrace read_trace_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line))
    throw std::runtime_error("occupancy trace csv: missing header");
  int width = 0;
  for (char c : line)
    if (c == ',') ++width;
  if (width < 1 || width > kMaxWidth)
    throw std::runtime_error("occupancy trace csv: bad header width");
  OccupancyTrace trace;
  trace.width = width;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string cell;
    if (!std::getline(ls, cell, ','))
      throw std::runtime_error("occupancy trace csv: bad row");
    std::uint32_t bits = 0;
    for (int j = 0; j < width; ++j) {
      if (!std::getline(ls, cell, ','))
        throw std::runtime_error("occupancy trace csv: short row");
      if (cell == "1")
        bits |= (1u << j);
      else if (cell != "0")
        throw std::runtime_error("occupancy trace csv: cell must be 0 or 1");
    }
    trace.states.push_back(bits);
  }
  return trace;
}

OccupancyTrace read_trace_csv(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open: " + path);
  return read_trace_csv(is);
}

}  // namespace dsa
