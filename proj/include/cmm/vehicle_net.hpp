#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <queue>
#include <random>
#include <stdexcept>
#include <utility>
#include <vector>

#include "cmm/geometry.hpp"
#include "cmm/rng.hpp"
#include "cmm/roadmap.hpp"

namespace cmm {

using NodeId = std::size_t;

struct VehiclePose {
  Point2 position;
  double road_angle = 0.0;  // radians, heading of the occupied road
};

/// Static vehicle placement plus an undirected communication graph.
/// Node ids are 0-based indices into poses(); self links are implicit.
class VehicleNetwork {
 public:
  VehicleNetwork() = default;

  explicit VehicleNetwork(std::vector<VehiclePose> poses,
                          const std::vector<std::pair<NodeId, NodeId>>& edges = {})
      : poses_(std::move(poses)), adjacency_(poses_.size()) {
    for (auto [i, j] : edges) add_edge(i, j);
  }

  std::size_t size() const { return poses_.size(); }
  const std::vector<VehiclePose>& poses() const { return poses_; }
  const VehiclePose& pose(NodeId i) const { return poses_.at(i); }

  /// Sorted neighbor ids of i, excluding i.
  const std::vector<NodeId>& neighbors(NodeId i) const { return adjacency_.at(i); }
  std::size_t degree(NodeId i) const { return adjacency_.at(i).size(); }

  bool has_edge(NodeId i, NodeId j) const {
    const auto& n = adjacency_.at(i);
    return std::binary_search(n.begin(), n.end(), j);
  }

  std::size_t edge_count() const {
    std::size_t total = 0;
    for (const auto& n : adjacency_) total += n.size();
    return total / 2;
  }

  std::vector<std::pair<NodeId, NodeId>> edges() const {
    std::vector<std::pair<NodeId, NodeId>> out;
    for (NodeId i = 0; i < size(); ++i) {
      for (auto j : adjacency_[i]) {
        if (i < j) out.emplace_back(i, j);
      }
    }
    return out;
  }

  void add_edge(NodeId i, NodeId j) {
    if (i >= size() || j >= size()) throw std::out_of_range("edge endpoint is not a node");
    if (i == j) throw std::invalid_argument("self loops are implicit and may not be stored");
    insert_sorted(adjacency_[i], j);
    insert_sorted(adjacency_[j], i);
  }

 private:
  static void insert_sorted(std::vector<NodeId>& v, NodeId x) {
    auto it = std::lower_bound(v.begin(), v.end(), x);
    if (it == v.end() || *it != x) v.insert(it, x);
  }

  std::vector<VehiclePose> poses_;
  std::vector<std::vector<NodeId>> adjacency_;
};

/// Who-receives-from-whom matrix. Row i lists the sources node i hears;
/// the diagonal is always set. May be directed.
class ConnectionMatrix {
 public:
  explicit ConnectionMatrix(std::size_t n) : n_(n), entries_(n * n, 0) {
    for (std::size_t i = 0; i < n; ++i) entries_[i * n + i] = 1;
  }

  static ConnectionMatrix from_network(const VehicleNetwork& net) {
    ConnectionMatrix m(net.size());
    for (auto [i, j] : net.edges()) {
      m.set(i, j, true);
      m.set(j, i, true);
    }
    return m;
  }

  static ConnectionMatrix from_rows(const std::vector<std::vector<int>>& rows) {
    ConnectionMatrix m(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (rows[i].size() != rows.size()) throw std::invalid_argument("connection matrix must be square");
      for (std::size_t j = 0; j < rows.size(); ++j) {
        if (i == j) {
          if (rows[i][j] == 0) throw std::invalid_argument("connection matrix diagonal must be 1");
          continue;
        }
        m.set(i, j, rows[i][j] != 0);
      }
    }
    return m;
  }

  std::size_t size() const { return n_; }
  bool operator()(NodeId i, NodeId j) const { return entries_.at(i * n_ + j) != 0; }

  void set(NodeId i, NodeId j, bool v) {
    if (i == j && !v) throw std::invalid_argument("diagonal entries are always set");
    entries_.at(i * n_ + j) = v ? 1 : 0;
  }

  /// Non-self sources of row i, ascending.
  std::vector<NodeId> sources(NodeId i) const {
    std::vector<NodeId> out;
    for (NodeId j = 0; j < n_; ++j) {
      if (j != i && (*this)(i, j)) out.push_back(j);
    }
    return out;
  }

  bool symmetric() const {
    for (NodeId i = 0; i < n_; ++i) {
      for (NodeId j = i + 1; j < n_; ++j) {
        if ((*this)(i, j) != (*this)(j, i)) return false;
      }
    }
    return true;
  }

  /// Undirected graph with an edge wherever either direction is set.
  VehicleNetwork symmetrized(std::vector<VehiclePose> poses) const {
    if (poses.size() != n_) throw std::invalid_argument("pose count does not match matrix size");
    VehicleNetwork net(std::move(poses));
    for (NodeId i = 0; i < n_; ++i) {
      for (NodeId j = 0; j < n_; ++j) {
        if (i != j && (*this)(i, j)) net.add_edge(i, j);
      }
    }
    return net;
  }

 private:
  std::size_t n_;
  std::vector<unsigned char> entries_;
};

/// Edge (i, j) iff the planar distance between the vehicles is <= radius.
inline VehicleNetwork radius_graph(std::vector<VehiclePose> poses, double radius) {
  if (!(radius > 0.0)) throw std::invalid_argument("communication radius must be positive");
  VehicleNetwork net(std::move(poses));
  for (NodeId i = 0; i < net.size(); ++i) {
    for (NodeId j = i + 1; j < net.size(); ++j) {
      if (distance(net.pose(i).position, net.pose(j).position) <= radius) net.add_edge(i, j);
    }
  }
  return net;
}

struct TrimResult {
  VehicleNetwork network;
  std::vector<NodeId> kept;  // original id of each surviving node
};

/// Drops every node whose degree in `net` exceeds max_degree, in one pass
/// over the input degrees, and re-indexes the survivors densely.
inline TrimResult trim_by_degree(const VehicleNetwork& net, std::size_t max_degree) {
  TrimResult out;
  std::vector<std::optional<NodeId>> remap(net.size());
  std::vector<VehiclePose> poses;
  for (NodeId i = 0; i < net.size(); ++i) {
    if (net.degree(i) <= max_degree) {
      remap[i] = out.kept.size();
      out.kept.push_back(i);
      poses.push_back(net.pose(i));
    }
  }
  out.network = VehicleNetwork(std::move(poses));
  for (auto [i, j] : net.edges()) {
    if (remap[i] && remap[j]) out.network.add_edge(*remap[i], *remap[j]);
  }
  return out;
}

/// Hop distances from `source`; unreachable nodes hold nullopt.
inline std::vector<std::optional<std::size_t>> hop_distances(const VehicleNetwork& net, NodeId source) {
  std::vector<std::optional<std::size_t>> dist(net.size());
  std::queue<NodeId> frontier;
  dist.at(source) = 0;
  frontier.push(source);
  while (!frontier.empty()) {
    const NodeId u = frontier.front();
    frontier.pop();
    for (auto v : net.neighbors(u)) {
      if (!dist[v]) {
        dist[v] = *dist[u] + 1;
        frontier.push(v);
      }
    }
  }
  return dist;
}

inline bool is_connected(const VehicleNetwork& net) {
  if (net.size() == 0) throw std::invalid_argument("connectivity of an empty network is undefined");
  const auto dist = hop_distances(net, 0);
  return std::all_of(dist.begin(), dist.end(), [](const auto& d) { return d.has_value(); });
}

/// Number of connected components.
inline std::size_t component_count(const VehicleNetwork& net) {
  std::vector<bool> seen(net.size(), false);
  std::size_t count = 0;
  for (NodeId s = 0; s < net.size(); ++s) {
    if (seen[s]) continue;
    ++count;
    for (NodeId v = 0; const auto& d : hop_distances(net, s)) {
      if (d) seen[v] = true;
      ++v;
    }
  }
  return count;
}

/// Largest shortest-path hop count; nullopt when the graph is disconnected.
inline std::optional<std::size_t> network_diameter(const VehicleNetwork& net) {
  std::size_t diameter = 0;
  for (NodeId s = 0; s < net.size(); ++s) {
    for (const auto& d : hop_distances(net, s)) {
      if (!d) return std::nullopt;
      diameter = std::max(diameter, *d);
    }
  }
  return diameter;
}

/// histogram[k] = number of nodes with exactly k neighbors.
inline std::vector<std::size_t> degree_histogram(const VehicleNetwork& net) {
  std::size_t max_deg = 0;
  for (NodeId i = 0; i < net.size(); ++i) max_deg = std::max(max_deg, net.degree(i));
  std::vector<std::size_t> hist(net.size() == 0 ? 0 : max_deg + 1, 0);
  for (NodeId i = 0; i < net.size(); ++i) ++hist[net.degree(i)];
  return hist;
}

/// Synthetic placement: a segment is picked with probability proportional to
/// its length, a point uniformly along it, and a lateral offset drawn from
/// N(0, spread) truncated to the corridor.
inline std::vector<VehiclePose> sample_poses(const RoadMap& map, std::size_t n, std::uint64_t seed,
                                             double spread) {
  if (n == 0) throw std::invalid_argument("need at least one pose");
  std::vector<double> lengths;
  for (const auto& s : map.segments()) lengths.push_back(s.length());
  Rng rng = make_rng({seed, tag(Stream::kPlacement)});
  std::discrete_distribution<std::size_t> pick(lengths.begin(), lengths.end());
  std::uniform_real_distribution<double> along(0.0, 1.0);
  std::normal_distribution<double> lateral(0.0, 1.0);

  std::vector<VehiclePose> poses;
  poses.reserve(n);
  for (std::size_t k = 0; k < n; ++k) {
    const auto& seg = map.segments()[pick(rng)];
    const Vec2 dir = (1.0 / seg.length()) * (seg.end() - seg.start());
    const Vec2 normal{-dir.y, dir.x};
    double offset = 0.0;
    if (spread > 0.0) {
      do {
        offset = spread * lateral(rng);
      } while (std::abs(offset) > seg.half_width());
    }
    const double t = along(rng);
    poses.push_back({seg.start() + (t * seg.length()) * dir + offset * normal, seg.heading()});
  }
  return poses;
}

}  // namespace cmm
