#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <random>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "cmm/particle_filter.hpp"
#include "cmm/rng.hpp"
#include "cmm/vehicle_net.hpp"

namespace cmm {

/// One node's fusion weights: source node -> a_{i,j}. Self is always a key.
using WeightRow = std::map<NodeId, double>;

/// Row-stochastic matrix supported on the communication graph.
class ConsensusMatrix {
 public:
  ConsensusMatrix() = default;
  explicit ConsensusMatrix(Eigen::MatrixXd a) : a_(std::move(a)) {
    if (a_.rows() != a_.cols()) throw std::invalid_argument("consensus matrix must be square");
  }

  static ConsensusMatrix identity(std::size_t n) {
    return ConsensusMatrix(Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n)));
  }

  std::size_t size() const { return static_cast<std::size_t>(a_.rows()); }
  double operator()(NodeId i, NodeId j) const {
    return a_(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
  }
  const Eigen::MatrixXd& matrix() const { return a_; }

  /// Non-zero entries of row i plus the diagonal.
  WeightRow row(NodeId i) const {
    WeightRow out;
    for (NodeId j = 0; j < size(); ++j) {
      const double v = (*this)(i, j);
      if (v != 0.0 || j == i) out[j] = v;
    }
    return out;
  }

  /// Checks support, box and row-sum invariants against `support`.
  /// Returns a description of the first violation, or nullopt.
  std::optional<std::string> violation(const ConnectionMatrix& support, double tol = 1e-9) const {
    if (support.size() != size()) return "size mismatch with support";
    for (NodeId i = 0; i < size(); ++i) {
      double sum = 0.0;
      for (NodeId j = 0; j < size(); ++j) {
        const double v = (*this)(i, j);
        if (!std::isfinite(v) || v < -tol || v > 1.0 + tol) {
          return "entry (" + std::to_string(i) + "," + std::to_string(j) + ") outside [0,1]";
        }
        if (v != 0.0 && !support(i, j)) {
          return "entry (" + std::to_string(i) + "," + std::to_string(j) + ") off the support";
        }
        sum += v;
      }
      if (std::abs(sum - 1.0) > tol) return "row " + std::to_string(i) + " sums to " + std::to_string(sum);
    }
    return std::nullopt;
  }

 private:
  Eigen::MatrixXd a_;
};

// ---------------------------------------------------------------------------
// Local weight rules
// ---------------------------------------------------------------------------

/// A_ij = 1 / max(d_i, d_j) on the support, remainder on the diagonal.
/// Degrees are taken on the undirected graph underlying `support`; entries
/// are placed only where row i actually receives from j.
inline ConsensusMatrix max_degree_weights(const ConnectionMatrix& support) {
  const std::size_t n = support.size();
  std::vector<std::size_t> degree(n, 0);
  for (NodeId i = 0; i < n; ++i) {
    for (NodeId j = 0; j < n; ++j) {
      if (i != j && (support(i, j) || support(j, i))) ++degree[i];
    }
  }
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  for (NodeId i = 0; i < n; ++i) {
    double off = 0.0;
    for (auto j : support.sources(i)) {
      const double v = 1.0 / static_cast<double>(std::max(degree[i], degree[j]));
      a(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = v;
      off += v;
    }
    a(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)) = 1.0 - off;
  }
  return ConsensusMatrix(std::move(a));
}

inline ConsensusMatrix max_degree_weights(const VehicleNetwork& net) {
  return max_degree_weights(ConnectionMatrix::from_network(net));
}

/// Diagonal alpha, the remaining 1 - alpha split evenly over the row's sources.
inline ConsensusMatrix constant_alpha_weights(const ConnectionMatrix& support, double alpha) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw std::invalid_argument("alpha must lie in [0,1]");
  const std::size_t n = support.size();
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  for (NodeId i = 0; i < n; ++i) {
    const auto src = support.sources(i);
    const auto ii = static_cast<Eigen::Index>(i);
    if (src.empty()) {
      a(ii, ii) = 1.0;
      continue;
    }
    a(ii, ii) = alpha;
    for (auto j : src) a(ii, static_cast<Eigen::Index>(j)) = (1.0 - alpha) / static_cast<double>(src.size());
  }
  return ConsensusMatrix(std::move(a));
}

/// Per row, i.i.d. U(0,1) over self and sources, normalized to sum 1.
inline ConsensusMatrix random_weights(const ConnectionMatrix& support, std::uint64_t seed) {
  const std::size_t n = support.size();
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (NodeId i = 0; i < n; ++i) {
    Rng rng = make_rng({seed, tag(Stream::kWeights), i});
    const auto ii = static_cast<Eigen::Index>(i);
    double sum = 0.0;
    for (NodeId j = 0; j < n; ++j) {
      if (!support(i, j)) continue;
      double u = unit(rng);
      while (u == 0.0) u = unit(rng);
      a(ii, static_cast<Eigen::Index>(j)) = u;
      sum += u;
    }
    a.row(ii) /= sum;
  }
  return ConsensusMatrix(std::move(a));
}

inline ConsensusMatrix random_weights(const VehicleNetwork& net, std::uint64_t seed) {
  return random_weights(ConnectionMatrix::from_network(net), seed);
}

// ---------------------------------------------------------------------------
// Variance minimization
// ---------------------------------------------------------------------------

/// Network variance of the fused estimates, (1/N) sum_i ||(A x)_i - mean(A x)||^2,
/// summed over both axes.
inline double variance_objective(const Eigen::MatrixXd& a, std::span<const CommonError> estimates) {
  const auto n = static_cast<Eigen::Index>(estimates.size());
  Eigen::MatrixXd x(n, 2);
  for (Eigen::Index i = 0; i < n; ++i) {
    x(i, 0) = estimates[static_cast<std::size_t>(i)].offset.x;
    x(i, 1) = estimates[static_cast<std::size_t>(i)].offset.y;
  }
  const Eigen::MatrixXd y = a * x;
  const Eigen::RowVector2d mean = y.colwise().mean();
  return (y.rowwise() - mean).squaredNorm() / static_cast<double>(n);
}

/// Euclidean projection of `v` onto {a >= 0, a[self] >= floor, sum a = 1}.
inline std::vector<double> project_row(std::vector<double> v, std::size_t self, double floor) {
  const double radius = 1.0 - floor;
  v[self] -= floor;
  std::vector<double> sorted = v;
  std::sort(sorted.begin(), sorted.end(), std::greater<>());
  double cumulative = 0.0;
  double theta = 0.0;
  for (std::size_t k = 0; k < sorted.size(); ++k) {
    cumulative += sorted[k];
    const double t = (cumulative - radius) / static_cast<double>(k + 1);
    if (k + 1 == sorted.size() || sorted[k + 1] <= t) {
      theta = t;
      break;
    }
  }
  for (auto& e : v) e = std::max(e - theta, 0.0);
  v[self] += floor;
  return v;
}

struct VarianceMinOptions {
  double floor = 0.05;           // minimum self weight
  std::size_t max_iterations = 5000;
  double tolerance = 1e-10;      // stop once an iteration improves less than this
  /// When set, every node estimates the network mean of the fused outputs by
  /// this many rounds of local averaging per iteration instead of reading it
  /// globally.
  std::optional<std::size_t> distributed_rounds;
};

struct VarianceMinResult {
  ConsensusMatrix weights;
  double objective = 0.0;
  std::size_t iterations = 0;
};

namespace detail {

// Sparse row storage for the projected-gradient solver.
struct SparseRows {
  std::vector<std::vector<NodeId>> cols;     // support of each row
  std::vector<std::vector<double>> vals;
  std::vector<std::size_t> self_pos;         // index of the diagonal within cols[i]

  SparseRows(const ConnectionMatrix& support, const Eigen::MatrixXd& init) {
    const std::size_t n = support.size();
    cols.resize(n);
    vals.resize(n);
    self_pos.resize(n);
    for (NodeId i = 0; i < n; ++i) {
      for (NodeId j = 0; j < n; ++j) {
        if (!support(i, j)) continue;
        if (j == i) self_pos[i] = cols[i].size();
        cols[i].push_back(j);
        vals[i].push_back(init(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)));
      }
    }
  }

  std::vector<Vec2> apply(std::span<const Vec2> x) const {
    std::vector<Vec2> y(cols.size());
    for (std::size_t i = 0; i < cols.size(); ++i) {
      for (std::size_t k = 0; k < cols[i].size(); ++k) y[i] += vals[i][k] * x[cols[i][k]];
    }
    return y;
  }

  Eigen::MatrixXd dense() const {
    const auto n = static_cast<Eigen::Index>(cols.size());
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n, n);
    for (std::size_t i = 0; i < cols.size(); ++i) {
      for (std::size_t k = 0; k < cols[i].size(); ++k) {
        a(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(cols[i][k])) = vals[i][k];
      }
    }
    return a;
  }
};

inline double variance_of(std::span<const Vec2> y) {
  Vec2 mean;
  for (auto v : y) mean += v;
  mean *= 1.0 / static_cast<double>(y.size());
  double acc = 0.0;
  for (auto v : y) acc += squared_norm(v - mean);
  return acc / static_cast<double>(y.size());
}

// Lazy max-degree averaging matrix on the undirected graph behind `support`.
// Symmetric and doubly stochastic; the lazy half step keeps it aperiodic.
inline Eigen::MatrixXd averaging_matrix(const ConnectionMatrix& support) {
  const Eigen::MatrixXd w = max_degree_weights(support.symmetrized(std::vector<VehiclePose>(support.size()))).matrix();
  const auto n = static_cast<Eigen::Index>(support.size());
  return 0.5 * (Eigen::MatrixXd::Identity(n, n) + w);
}

}  // namespace detail

/// Chooses row-stochastic weights on `support` that minimize the spread of
/// the fused estimates A x, by projected gradient descent started from the
/// max-degree rule.
inline VarianceMinResult variance_min_weights(std::span<const CommonError> estimates, const ConnectionMatrix& support,
                                              const VarianceMinOptions& opt = {}) {
  const std::size_t n = support.size();
  if (estimates.size() != n) throw std::invalid_argument("one estimate per node required");
  if (!(opt.floor >= 0.0 && opt.floor < 1.0)) throw std::invalid_argument("self-weight floor must lie in [0,1)");
  std::vector<Vec2> x(n);
  Vec2 mean_x;
  for (std::size_t i = 0; i < n; ++i) {
    if (!is_finite(estimates[i].offset)) throw std::invalid_argument("non-finite estimate");
    x[i] = estimates[i].offset;
    mean_x += x[i];
  }
  mean_x *= 1.0 / static_cast<double>(n);

  detail::SparseRows rows(support, max_degree_weights(support).matrix());
  for (std::size_t i = 0; i < n; ++i) {
    if (rows.vals[i][rows.self_pos[i]] < opt.floor) rows.vals[i] = project_row(rows.vals[i], rows.self_pos[i], opt.floor);
  }

  // Lipschitz constant of the gradient: (2/N) * largest eigenvalue of Xc^T Xc.
  Eigen::Matrix2d gram = Eigen::Matrix2d::Zero();
  for (auto v : x) {
    const Eigen::Vector2d c(v.x - mean_x.x, v.y - mean_x.y);
    gram += c * c.transpose();
  }
  const double lipschitz = 2.0 / static_cast<double>(n) * gram.selfadjointView<Eigen::Lower>().eigenvalues().maxCoeff();

  std::vector<Vec2> y = rows.apply(x);
  double objective = detail::variance_of(y);
  VarianceMinResult result;
  if (lipschitz <= 0.0 || objective == 0.0) {
    result.weights = ConsensusMatrix(rows.dense());
    result.objective = objective;
    return result;
  }
  const double step = 1.0 / lipschitz;
  const double scale = 2.0 / static_cast<double>(n);

  Eigen::MatrixXd averaging;
  std::vector<Vec2> tracked;  // each node's running estimate of mean(y)
  if (opt.distributed_rounds) {
    averaging = detail::averaging_matrix(support);
    tracked = y;
  }
  auto average_rounds = [&](std::vector<Vec2> z) {
    for (std::size_t r = 0; r < *opt.distributed_rounds; ++r) {
      std::vector<Vec2> next(n);
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
          const double w = averaging(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
          if (w != 0.0) next[i] += w * z[j];
        }
      }
      z = std::move(next);
    }
    return z;
  };
  if (opt.distributed_rounds) tracked = average_rounds(tracked);

  std::size_t it = 0;
  for (; it < opt.max_iterations; ++it) {
    Vec2 mean_y;
    for (auto v : y) mean_y += v;
    mean_y *= 1.0 / static_cast<double>(n);

    std::vector<std::vector<double>> next_vals(n);
    double max_change = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const Vec2 target = opt.distributed_rounds ? tracked[i] : mean_y;
      const Vec2 dev = y[i] - target;
      std::vector<double> v = rows.vals[i];
      for (std::size_t k = 0; k < v.size(); ++k) v[k] -= step * scale * dot(dev, x[rows.cols[i][k]] - mean_x);
      next_vals[i] = project_row(std::move(v), rows.self_pos[i], opt.floor);
      for (std::size_t k = 0; k < next_vals[i].size(); ++k) {
        max_change = std::max(max_change, std::abs(next_vals[i][k] - rows.vals[i][k]));
      }
    }
    const auto prev_vals = std::exchange(rows.vals, std::move(next_vals));
    std::vector<Vec2> y_next = rows.apply(x);
    const double next_objective = detail::variance_of(y_next);

    if (opt.distributed_rounds) {
      // Dynamic average tracking: inject the local change, then mix.
      for (std::size_t i = 0; i < n; ++i) tracked[i] += y_next[i] - y[i];
      tracked = average_rounds(std::move(tracked));
      y = std::move(y_next);
      objective = next_objective;
      if (max_change < opt.tolerance) {
        ++it;
        break;
      }
      continue;
    }

    if (next_objective > objective) {
      // Numerical noise at the optimum; keep the better iterate.
      rows.vals = prev_vals;
      break;
    }
    const double improvement = objective - next_objective;
    y = std::move(y_next);
    objective = next_objective;
    if (improvement < opt.tolerance) {
      ++it;
      break;
    }
  }
  result.weights = ConsensusMatrix(rows.dense());
  result.objective = objective;
  result.iterations = it;
  return result;
}

inline VarianceMinResult variance_min_weights(std::span<const CommonError> estimates, const VehicleNetwork& net,
                                              const VarianceMinOptions& opt = {}) {
  return variance_min_weights(estimates, ConnectionMatrix::from_network(net), opt);
}

// ---------------------------------------------------------------------------
// Convergence rate
// ---------------------------------------------------------------------------

struct ConvergenceRate {
  double rate = 0.0;
  bool disconnected = false;
};

/// Second-largest eigenvalue modulus of A, i.e. the per-step decay factor of
/// the deviation from consensus. Disconnected support reports rate 1.
inline ConvergenceRate asymptotic_convergence_rate(const ConsensusMatrix& a) {
  const std::size_t n = a.size();
  if (n <= 1) return {0.0, false};

  VehicleNetwork support{std::vector<VehiclePose>(n)};
  for (NodeId i = 0; i < n; ++i) {
    for (NodeId j = 0; j < n; ++j) {
      if (i != j && a(i, j) != 0.0) support.add_edge(i, j);
    }
  }
  if (!is_connected(support)) return {1.0, true};

  // A = 1 pi^T maps every state straight onto consensus.
  bool rank_one = true;
  for (Eigen::Index i = 1; i < a.matrix().rows() && rank_one; ++i) {
    rank_one = a.matrix().row(i) == a.matrix().row(0);
  }
  if (rank_one) return {0.0, false};

  Eigen::EigenSolver<Eigen::MatrixXd> solver(a.matrix(), /*computeEigenvectors=*/false);
  if (solver.info() != Eigen::Success) throw std::runtime_error("eigenvalue computation failed");
  std::vector<std::complex<double>> ev(solver.eigenvalues().begin(), solver.eigenvalues().end());
  auto perron = std::min_element(ev.begin(), ev.end(), [](auto l, auto r) {
    return std::abs(l - 1.0) < std::abs(r - 1.0);
  });
  ev.erase(perron);
  double rate = 0.0;
  for (auto l : ev) rate = std::max(rate, std::abs(l));
  return {std::min(rate, 1.0), false};
}

// ---------------------------------------------------------------------------
// Policy selection
// ---------------------------------------------------------------------------

struct WeightPolicy {
  enum class Kind { kVarianceMin, kMaxDegree, kConstantAlpha, kRandom, kIdentity };

  Kind kind = Kind::kVarianceMin;
  double alpha = 0.5;        // kConstantAlpha
  std::uint64_t seed = 0;    // kRandom

  static WeightPolicy variance_min() { return {Kind::kVarianceMin}; }
  static WeightPolicy max_degree() { return {Kind::kMaxDegree}; }
  static WeightPolicy identity() { return {Kind::kIdentity}; }
  static WeightPolicy random(std::uint64_t s) { return {Kind::kRandom, 0.5, s}; }
  static WeightPolicy constant(double a) {
    if (!(a >= 0.0 && a <= 1.0)) throw std::invalid_argument("alpha must lie in [0,1]");
    return {Kind::kConstantAlpha, a, 0};
  }

  /// Accepts variance_min | max_degree | constant:<alpha> | random:<seed> | identity.
  static WeightPolicy parse(const std::string& text) {
    if (text == "variance_min") return variance_min();
    if (text == "max_degree") return max_degree();
    if (text == "identity") return identity();
    const auto colon = text.find(':');
    if (colon != std::string::npos) {
      const std::string head = text.substr(0, colon);
      const std::string arg = text.substr(colon + 1);
      std::size_t used = 0;
      try {
        if (head == "constant") {
          const double a = std::stod(arg, &used);
          if (used == arg.size()) return constant(a);
        } else if (head == "random") {
          const auto s = std::stoull(arg, &used);
          if (used == arg.size()) return random(s);
        }
      } catch (const std::logic_error&) {
      }
    }
    throw std::invalid_argument("unknown weight policy: " + text);
  }

  std::string name() const {
    switch (kind) {
      case Kind::kVarianceMin: return "variance_min";
      case Kind::kMaxDegree: return "max_degree";
      case Kind::kIdentity: return "identity";
      case Kind::kRandom: return "random:" + std::to_string(seed);
      case Kind::kConstantAlpha: {
        std::ostringstream os;
        os << "constant:" << alpha;
        return os.str();
      }
    }
    return "?";
  }

  /// Policies whose matrix does not depend on the current estimates.
  bool is_static() const { return kind != Kind::kVarianceMin; }
};

/// Weights of a static policy on `support`.
inline ConsensusMatrix static_weights(const WeightPolicy& policy, const ConnectionMatrix& support) {
  switch (policy.kind) {
    case WeightPolicy::Kind::kMaxDegree: return max_degree_weights(support);
    case WeightPolicy::Kind::kConstantAlpha: return constant_alpha_weights(support, policy.alpha);
    case WeightPolicy::Kind::kRandom: return random_weights(support, policy.seed);
    case WeightPolicy::Kind::kIdentity: return ConsensusMatrix::identity(support.size());
    case WeightPolicy::Kind::kVarianceMin: break;
  }
  throw std::invalid_argument("variance_min weights depend on the current estimates");
}

}  // namespace cmm
