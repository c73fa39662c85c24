#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <system_error>
#include <vector>

#include "cmm/particle_filter.hpp"

namespace cmm {

/// Network error at one timestep. rmse^2 == variance + mean_bias_sq.
struct MetricsRecord {
  std::size_t t = 0;
  double rmse = 0.0;
  double variance = 0.0;      // (1/N) sum ||x_i - mean||^2, m^2
  double mean_bias_sq = 0.0;  // ||mean - c||^2, m^2
  std::vector<double> per_node_error;
};

/// Splits the mean squared error of the node estimates into their spread
/// around the network mean and the squared error of that mean.
inline MetricsRecord decompose_error(std::span<const CommonError> estimates, CommonError truth) {
  if (estimates.empty()) throw std::invalid_argument("no estimates to score");
  const double n = static_cast<double>(estimates.size());
  Vec2 mean;
  for (const auto& e : estimates) mean += e.offset;
  mean *= 1.0 / n;
  MetricsRecord r;
  for (const auto& e : estimates) {
    r.variance += squared_norm(e.offset - mean);
    r.per_node_error.push_back(distance(e.offset, truth.offset));
  }
  r.variance /= n;
  r.mean_bias_sq = squared_norm(mean - truth.offset);
  r.rmse = std::sqrt(r.variance + r.mean_bias_sq);
  return r;
}

/// Relative deviation from rmse^2 = variance + mean_bias_sq.
inline double identity_residual(const MetricsRecord& r) {
  const double lhs = r.rmse * r.rmse;
  const double rhs = r.variance + r.mean_bias_sq;
  const double scale = std::max({lhs, rhs, 1e-300});
  return std::abs(lhs - rhs) / scale;
}

inline std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline double parse_double(const std::string& s) {
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) throw std::runtime_error("bad number: " + s);
  return v;
}

/// CSV with `t,rmse,variance,mean_bias_sq,e0,e1,...`, shortest round-trip
/// decimal formatting. Throws if a record breaks the error identity.
inline void write_series(std::ostream& out, std::span<const MetricsRecord> records) {
  if (records.empty()) throw std::invalid_argument("no records to write");
  const std::size_t nodes = records.front().per_node_error.size();
  out << "t,rmse,variance,mean_bias_sq";
  for (std::size_t i = 0; i < nodes; ++i) out << ",e" << i;
  out << '\n';
  for (const auto& r : records) {
    if (!(identity_residual(r) <= 1e-9)) {
      throw std::logic_error("metrics record at t=" + std::to_string(r.t) + " violates rmse^2 = var + bias^2");
    }
    out << r.t << ',' << format_double(r.rmse) << ',' << format_double(r.variance) << ','
        << format_double(r.mean_bias_sq);
    for (double e : r.per_node_error) out << ',' << format_double(e);
    out << '\n';
  }
}

inline void emit_series(std::span<const MetricsRecord> records, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  write_series(out, records);
  if (!out) throw std::runtime_error("write failed: " + path);
}

inline std::vector<MetricsRecord> read_series(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("empty series");
  std::vector<MetricsRecord> records;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    for (std::string c; std::getline(ss, c, ',');) cells.push_back(c);
    if (cells.size() < 4) throw std::runtime_error("short series row");
    MetricsRecord r;
    r.t = std::stoul(cells[0]);
    r.rmse = parse_double(cells[1]);
    r.variance = parse_double(cells[2]);
    r.mean_bias_sq = parse_double(cells[3]);
    for (std::size_t k = 4; k < cells.size(); ++k) r.per_node_error.push_back(parse_double(cells[k]));
    records.push_back(std::move(r));
  }
  return records;
}

inline double pearson(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size() || a.size() < 2) throw std::invalid_argument("pearson needs paired samples");
  const double n = static_cast<double>(a.size());
  double ma = 0.0, mb = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    ma += a[k];
    mb += b[k];
  }
  ma /= n;
  mb /= n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    sab += (a[k] - ma) * (b[k] - mb);
    saa += (a[k] - ma) * (a[k] - ma);
    sbb += (b[k] - mb) * (b[k] - mb);
  }
  if (saa == 0.0 || sbb == 0.0) return 0.0;
  return sab / std::sqrt(saa * sbb);
}

/// Time averages of sqrt(MSE) and sqrt(variance) over the last half of a run.
struct SteadyState {
  double rmse = 0.0;
  double sqrt_variance = 0.0;
};

inline SteadyState steady_state(std::span<const MetricsRecord> records) {
  if (records.empty()) throw std::invalid_argument("no records");
  const std::size_t first = records.size() / 2;
  SteadyState s;
  for (std::size_t k = first; k < records.size(); ++k) {
    s.rmse += records[k].rmse;
    s.sqrt_variance += std::sqrt(records[k].variance);
  }
  const double count = static_cast<double>(records.size() - first);
  s.rmse /= count;
  s.sqrt_variance /= count;
  return s;
}

}  // namespace cmm
