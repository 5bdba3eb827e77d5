#include "partlift/superpoints.hpp"

#include "maxflow.hpp"
#include "partlift/parallel.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <optional>

namespace partlift {

PartitionEnergy energy(const Partition& partition, const Eigen::MatrixXd& features,
                       const AdjacencyGraph& graph, double rho) {
  if (partition.num_points() != static_cast<std::size_t>(features.rows()) ||
      partition.num_points() != graph.num_nodes()) {
    throw Error("energy: partition, features and graph disagree on point count");
  }
  const Partition recomputed = make_partition(partition.assignment, features);
  PartitionEnergy e;
  for (std::size_t p = 0; p < recomputed.num_points(); ++p) {
    e.data += (features.row(static_cast<Eigen::Index>(p)) -
               recomputed.means.row(recomputed.assignment[p]))
                  .squaredNorm();
  }
  for (const Edge& edge : graph.edges()) {
    if (partition.assignment[edge.a] != partition.assignment[edge.b]) e.boundary += edge.weight;
  }
  e.boundary *= rho;
  return e;
}

namespace {

using Members = std::vector<PointIndex>;

double data_term(const Eigen::MatrixXd& f, const Members& members) {
  if (members.empty()) return 0.0;
  Eigen::RowVectorXd mean = Eigen::RowVectorXd::Zero(f.cols());
  for (PointIndex p : members) mean += f.row(p);
  mean /= static_cast<double>(members.size());
  double sum = 0.0;
  for (PointIndex p : members) sum += (f.row(p) - mean).squaredNorm();
  return sum;
}

// Farthest feature pair: exact for small sets, double sweep otherwise.
std::pair<std::size_t, std::size_t> seed_pair(const Eigen::MatrixXd& f, const Members& m) {
  constexpr std::size_t kExactLimit = 1024;
  std::pair<std::size_t, std::size_t> best{0, 0};
  double best_d = -1.0;
  if (m.size() <= kExactLimit) {
    for (std::size_t i = 0; i < m.size(); ++i) {
      for (std::size_t j = i + 1; j < m.size(); ++j) {
        const double d = (f.row(m[i]) - f.row(m[j])).squaredNorm();
        if (d > best_d) {
          best_d = d;
          best = {i, j};
        }
      }
    }
    return best;
  }
  auto farthest_from = [&](std::size_t from) {
    std::size_t arg = 0;
    double far = -1.0;
    for (std::size_t i = 0; i < m.size(); ++i) {
      const double d = (f.row(m[i]) - f.row(m[from])).squaredNorm();
      if (d > far) {
        far = d;
        arg = i;
      }
    }
    return arg;
  };
  std::size_t a = farthest_from(0);
  std::size_t b = farthest_from(a);
  for (int sweep = 0; sweep < 3; ++sweep) {
    const std::size_t c = farthest_from(b);
    if (c == a) break;
    a = b;
    b = c;
  }
  return {std::min(a, b), std::max(a, b)};
}

struct LocalGraph {
  std::vector<std::vector<std::pair<std::size_t, double>>> adj;  // local index, weight
};

LocalGraph induced_subgraph(const AdjacencyGraph& graph, const Members& members,
                            const std::vector<std::uint32_t>& local_of) {
  LocalGraph g;
  g.adj.resize(members.size());
  for (std::size_t i = 0; i < members.size(); ++i) {
    const auto nb = graph.neighbors(members[i]);
    const auto w = graph.weights(members[i]);
    for (std::size_t e = 0; e < nb.size(); ++e) {
      const auto j = local_of[nb[e]];
      if (j != std::numeric_limits<std::uint32_t>::max()) g.adj[i].emplace_back(j, w[e]);
    }
  }
  return g;
}

// Binary labeling minimizing sum_i |f_i - c_{l_i}|^2 + rho * sum w [l_i != l_j].
std::vector<char> graph_cut(const Eigen::MatrixXd& f, const Members& m, const LocalGraph& g,
                            const Eigen::RowVectorXd& c0, const Eigen::RowVectorXd& c1,
                            double rho) {
  const int n = static_cast<int>(m.size());
  const int source = n;
  const int sink = n + 1;
  detail::MaxFlow flow(static_cast<std::size_t>(n) + 2);
  for (int i = 0; i < n; ++i) {
    const double d0 = (f.row(m[i]) - c0).squaredNorm();
    const double d1 = (f.row(m[i]) - c1).squaredNorm();
    const double base = std::min(d0, d1);
    // Source side means label 0: cutting source->i pays d1, i->sink pays d0.
    if (d1 - base > 0.0) flow.add_edge(source, i, d1 - base, 0.0);
    if (d0 - base > 0.0) flow.add_edge(i, sink, d0 - base, 0.0);
    for (const auto& [j, w] : g.adj[i]) {
      if (static_cast<int>(j) > i) flow.add_edge(i, static_cast<int>(j), rho * w, rho * w);
    }
  }
  flow.solve(source, sink);
  const auto side = flow.source_side(source);
  std::vector<char> labels(m.size());
  for (int i = 0; i < n; ++i) labels[i] = side[i] ? 0 : 1;
  return labels;
}

bool centroids(const Eigen::MatrixXd& f, const Members& m, const std::vector<char>& labels,
               Eigen::RowVectorXd& c0, Eigen::RowVectorXd& c1) {
  c0 = Eigen::RowVectorXd::Zero(f.cols());
  c1 = Eigen::RowVectorXd::Zero(f.cols());
  std::size_t n0 = 0;
  std::size_t n1 = 0;
  for (std::size_t i = 0; i < m.size(); ++i) {
    if (labels[i] == 0) {
      c0 += f.row(m[i]);
      ++n0;
    } else {
      c1 += f.row(m[i]);
      ++n1;
    }
  }
  if (n0 == 0 || n1 == 0) return false;
  c0 /= static_cast<double>(n0);
  c1 /= static_cast<double>(n1);
  return true;
}

struct SplitProposal {
  std::vector<Members> pieces;
  double delta = 0.0;  // energy change if accepted
};

LocalGraph local_graph(const AdjacencyGraph& graph, const Members& m,
                       std::vector<std::uint32_t>& local_of) {
  for (std::size_t i = 0; i < m.size(); ++i) local_of[m[i]] = static_cast<std::uint32_t>(i);
  LocalGraph g = induced_subgraph(graph, m, local_of);
  for (PointIndex p : m) local_of[p] = std::numeric_limits<std::uint32_t>::max();
  return g;
}

// Alternates graph cuts and centroid updates starting from `labels`.
void refine_bipartition(const Eigen::MatrixXd& f, const Members& m, const LocalGraph& g,
                        double rho, std::vector<char>& labels) {
  Eigen::RowVectorXd c0;
  Eigen::RowVectorXd c1;
  if (!centroids(f, m, labels, c0, c1)) return;
  for (int iter = 0; iter < 8; ++iter) {
    auto next = graph_cut(f, m, g, c0, c1, rho);
    if (next == labels) break;
    Eigen::RowVectorXd n0;
    Eigen::RowVectorXd n1;
    if (!centroids(f, m, next, n0, n1)) break;  // keep the last two-sided labeling
    labels = std::move(next);
    c0 = std::move(n0);
    c1 = std::move(n1);
  }
}

// Exact single-point flips on a binary labeling, with means updated after
// every flip. Never empties a side.
void flip_refine(const Eigen::MatrixXd& f, const Members& m, const LocalGraph& g, double rho,
                 std::vector<char>& labels) {
  std::array<Eigen::RowVectorXd, 2> sum{Eigen::RowVectorXd::Zero(f.cols()),
                                        Eigen::RowVectorXd::Zero(f.cols())};
  std::array<double, 2> count{0.0, 0.0};
  for (std::size_t i = 0; i < m.size(); ++i) {
    sum[labels[i]] += f.row(m[i]);
    count[labels[i]] += 1.0;
  }
  if (count[0] == 0.0 || count[1] == 0.0) return;
  for (int sweep = 0; sweep < 20; ++sweep) {
    bool moved = false;
    for (std::size_t i = 0; i < m.size(); ++i) {
      const int from = labels[i];
      const int to = 1 - from;
      if (count[from] <= 1.0) continue;
      const auto x = f.row(m[i]);
      const double removal = count[from] / (count[from] - 1.0) *
                             (x - sum[from] / count[from]).squaredNorm();
      const double addition = count[to] / (count[to] + 1.0) * (x - sum[to] / count[to]).squaredNorm();
      double same = 0.0;
      double other = 0.0;
      for (const auto& [j, w] : g.adj[i]) (labels[j] == from ? same : other) += w;
      const double delta = addition - removal + rho * (same - other);
      if (delta < -1e-12) {
        labels[i] = static_cast<char>(to);
        sum[from] -= x;
        sum[to] += x;
        count[from] -= 1.0;
        count[to] += 1.0;
        moved = true;
      }
    }
    if (!moved) break;
  }
}

// Splits `m` into connected pieces of equal label and scores the result
// against `base_energy`, the current energy restricted to `m`.
std::optional<SplitProposal> score_labels(const Eigen::MatrixXd& f, const Members& m,
                                          const LocalGraph& g, const std::vector<char>& labels,
                                          double rho, double base_energy) {
  constexpr auto kUnset = std::numeric_limits<std::uint32_t>::max();
  std::vector<std::uint32_t> piece_of(m.size(), kUnset);
  SplitProposal out;
  std::vector<std::size_t> stack;
  for (std::size_t seed = 0; seed < m.size(); ++seed) {
    if (piece_of[seed] != kUnset) continue;
    const auto id = static_cast<std::uint32_t>(out.pieces.size());
    out.pieces.emplace_back();
    piece_of[seed] = id;
    stack.push_back(seed);
    while (!stack.empty()) {
      const std::size_t cur = stack.back();
      stack.pop_back();
      out.pieces[id].push_back(m[cur]);
      for (const auto& [j, w] : g.adj[cur]) {
        if (piece_of[j] == kUnset && labels[j] == labels[cur]) {
          piece_of[j] = id;
          stack.push_back(j);
        }
      }
    }
  }
  if (out.pieces.size() < 2) return std::nullopt;
  for (auto& piece : out.pieces) std::sort(piece.begin(), piece.end());

  double cut = 0.0;
  for (std::size_t i = 0; i < m.size(); ++i) {
    for (const auto& [j, w] : g.adj[i]) {
      if (j > i && piece_of[i] != piece_of[j]) cut += w;
    }
  }
  double pieces_data = 0.0;
  for (const auto& piece : out.pieces) pieces_data += data_term(f, piece);
  out.delta = pieces_data + rho * cut - base_energy;
  return out;
}

std::vector<char> two_means(const Eigen::MatrixXd& f, const Members& m, Eigen::RowVectorXd c0,
                            Eigen::RowVectorXd c1) {
  std::vector<char> labels(m.size(), 0);
  for (int iter = 0; iter < 10; ++iter) {
    bool changed = false;
    for (std::size_t i = 0; i < m.size(); ++i) {
      const char l = (f.row(m[i]) - c1).squaredNorm() < (f.row(m[i]) - c0).squaredNorm() ? 1 : 0;
      changed |= (l != labels[i]);
      labels[i] = l;
    }
    if (!centroids(f, m, labels, c0, c1)) break;
    if (!changed && iter > 0) break;
  }
  return labels;
}

// Sign of the projection on the leading principal axis of the features.
std::vector<char> principal_split(const Eigen::MatrixXd& f, const Members& m) {
  Eigen::RowVectorXd mean = Eigen::RowVectorXd::Zero(f.cols());
  for (PointIndex p : m) mean += f.row(p);
  mean /= static_cast<double>(m.size());
  Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(f.cols(), f.cols());
  for (PointIndex p : m) {
    const Eigen::RowVectorXd d = f.row(p) - mean;
    cov += d.transpose() * d;
  }
  Eigen::VectorXd axis = Eigen::VectorXd::Ones(f.cols()).normalized();
  for (int iter = 0; iter < 50; ++iter) {
    Eigen::VectorXd next = cov * axis;
    const double norm = next.norm();
    if (norm == 0.0) break;
    axis = next / norm;
  }
  std::vector<char> labels(m.size());
  for (std::size_t i = 0; i < m.size(); ++i) {
    labels[i] = (f.row(m[i]) - mean).dot(axis.transpose()) > 0.0 ? 1 : 0;
  }
  return labels;
}

// Indices (into m) of the `count` points farthest from the feature mean.
std::vector<std::size_t> farthest_from_mean(const Eigen::MatrixXd& f, const Members& m,
                                            std::size_t count) {
  Eigen::RowVectorXd mean = Eigen::RowVectorXd::Zero(f.cols());
  for (PointIndex p : m) mean += f.row(p);
  mean /= static_cast<double>(m.size());
  std::vector<std::pair<double, std::size_t>> d;
  d.reserve(m.size());
  for (std::size_t i = 0; i < m.size(); ++i) d.emplace_back(-(f.row(m[i]) - mean).squaredNorm(), i);
  count = std::min(count, d.size());
  std::partial_sort(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(count), d.end());
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < count; ++i) out.push_back(d[i].second);
  return out;
}

// Lloyd iterations with farthest-point seeding; nullopt when fewer than k
// distinct clusters survive.
std::optional<std::vector<int>> k_means(const Eigen::MatrixXd& f, const Members& m, int k) {
  if (m.size() < static_cast<std::size_t>(k)) return std::nullopt;
  std::vector<Eigen::RowVectorXd> centers;
  centers.push_back(f.row(m[farthest_from_mean(f, m, 1).front()]));
  std::vector<double> nearest(m.size(), std::numeric_limits<double>::infinity());
  while (centers.size() < static_cast<std::size_t>(k)) {
    std::size_t arg = 0;
    double far = -1.0;
    for (std::size_t i = 0; i < m.size(); ++i) {
      nearest[i] = std::min(nearest[i], (f.row(m[i]) - centers.back()).squaredNorm());
      if (nearest[i] > far) {
        far = nearest[i];
        arg = i;
      }
    }
    if (far <= 0.0) return std::nullopt;
    centers.push_back(f.row(m[arg]));
  }
  std::vector<int> assign(m.size(), -1);
  for (int iter = 0; iter < 20; ++iter) {
    bool changed = false;
    for (std::size_t i = 0; i < m.size(); ++i) {
      int best = 0;
      double best_d = std::numeric_limits<double>::infinity();
      for (int c = 0; c < k; ++c) {
        const double d = (f.row(m[i]) - centers[c]).squaredNorm();
        if (d < best_d) {
          best_d = d;
          best = c;
        }
      }
      changed |= assign[i] != best;
      assign[i] = best;
    }
    std::vector<std::size_t> counts(k, 0);
    for (auto& c : centers) c.setZero();
    for (std::size_t i = 0; i < m.size(); ++i) {
      centers[assign[i]] += f.row(m[i]);
      ++counts[assign[i]];
    }
    for (int c = 0; c < k; ++c) {
      if (counts[c] == 0) return std::nullopt;
      centers[c] /= static_cast<double>(counts[c]);
    }
    if (!changed) break;
  }
  return assign;
}

constexpr std::size_t kExhaustiveStartLimit = 64;

// Best binary split of one superpoint over a few deterministic initializations.
std::optional<SplitProposal> propose_split(const Eigen::MatrixXd& f, const AdjacencyGraph& graph,
                                           const Members& m, double rho,
                                           std::vector<std::uint32_t>& local_of) {
  if (m.size() < 2) return std::nullopt;
  const auto [a, b] = seed_pair(f, m);
  if ((f.row(m[a]) - f.row(m[b])).squaredNorm() == 0.0) return std::nullopt;

  const LocalGraph g = local_graph(graph, m, local_of);
  const double base = data_term(f, m);

  std::vector<std::vector<char>> inits;
  inits.push_back(two_means(f, m, f.row(m[a]), f.row(m[b])));
  inits.push_back(principal_split(f, m));
  {
    Eigen::RowVectorXd c0;
    Eigen::RowVectorXd c1;
    if (centroids(f, m, inits.back(), c0, c1)) inits.push_back(two_means(f, m, c0, c1));
  }
  // The extra starts below only pay off on small superpoints; on large ones
  // they dominate the running time.
  const bool small = m.size() <= kExhaustiveStartLimit;
  // Every two-sided grouping of a 3- and 4-means clustering.
  for (int k = 3; k <= 4 && small; ++k) {
    const auto clusters = k_means(f, m, k);
    if (!clusters) continue;
    for (unsigned mask = 1; mask < (1u << (k - 1)); ++mask) {
      std::vector<char> labels(m.size());
      for (std::size_t i = 0; i < m.size(); ++i) labels[i] = (mask >> (*clusters)[i]) & 1u;
      inits.push_back(std::move(labels));
    }
  }
  // The points farthest from the mean, alone and with their graph neighbors.
  for (std::size_t outlier : farthest_from_mean(f, m, small ? 2 : 0)) {
    std::vector<char> labels(m.size(), 0);
    labels[outlier] = 1;
    inits.push_back(labels);
    for (const auto& [j, w] : g.adj[outlier]) labels[j] = 1;
    if (std::find(labels.begin(), labels.end(), 0) != labels.end()) inits.push_back(std::move(labels));
  }

  std::optional<SplitProposal> best;
  for (auto& labels : inits) {
    refine_bipartition(f, m, g, rho, labels);
    flip_refine(f, m, g, rho, labels);
    auto prop = score_labels(f, m, g, labels, rho, base);
    if (prop && (!best || prop->delta < best->delta)) best = std::move(prop);
  }
  return best;
}

// Re-draws the boundary between two adjacent superpoints.
std::optional<SplitProposal> propose_swap(const Eigen::MatrixXd& f, const AdjacencyGraph& graph,
                                          const Members& u, const Members& v, double shared_weight,
                                          double rho, std::vector<std::uint32_t>& local_of) {
  Members joined;
  joined.reserve(u.size() + v.size());
  std::merge(u.begin(), u.end(), v.begin(), v.end(), std::back_inserter(joined));
  std::vector<char> labels(joined.size());
  for (std::size_t i = 0; i < joined.size(); ++i) {
    labels[i] = std::binary_search(v.begin(), v.end(), joined[i]) ? 1 : 0;
  }
  const LocalGraph g = local_graph(graph, joined, local_of);
  const auto before = labels;
  refine_bipartition(f, joined, g, rho, labels);
  flip_refine(f, joined, g, rho, labels);
  if (labels == before) return std::nullopt;
  const double base = data_term(f, u) + data_term(f, v) + rho * shared_weight;
  return score_labels(f, joined, g, labels, rho, base);
}

struct MergeCandidate {
  double delta;
  std::uint32_t u;
  std::uint32_t v;
};

double assignment_energy(const std::vector<std::uint32_t>& assignment, const Eigen::MatrixXd& f,
                         const AdjacencyGraph& graph, double rho) {
  Partition p;
  p.assignment = assignment;
  return energy(p, f, graph, rho).total();
}

}  // namespace

Partition cut_pursuit(const Eigen::MatrixXd& features, const AdjacencyGraph& graph, double rho,
                      int max_iters, CutPursuitTrace* trace) {
  const std::size_t n = static_cast<std::size_t>(features.rows());
  if (graph.num_nodes() != n) throw Error("cut_pursuit: graph and features disagree on size");
  if (!(rho > 0.0)) throw Error("cut_pursuit: rho must be > 0");
  CutPursuitTrace local_trace;
  CutPursuitTrace& tr = trace ? *trace : local_trace;
  tr = CutPursuitTrace{};
  if (n == 0) return Partition{};

  const std::vector<std::uint32_t> components = graph.connected_components();
  std::vector<Members> superpoints;
  for (PointIndex p = 0; p < n; ++p) {
    if (components[p] >= superpoints.size()) superpoints.resize(components[p] + 1);
    superpoints[components[p]].push_back(p);
  }

  double current = 0.0;
  for (const auto& s : superpoints) current += data_term(features, s);
  tr.energies.push_back(current);
  const double tolerance = 1e-12 * std::max(1.0, current);

  std::vector<std::uint32_t> owner(n);
  auto rebuild_owner = [&] {
    for (std::uint32_t s = 0; s < superpoints.size(); ++s) {
      for (PointIndex p : superpoints[s]) owner[p] = s;
    }
  };
  const std::vector<Edge> all_edges = graph.edges();
  // Total edge weight between each pair of adjacent superpoints.
  auto boundary_weights = [&] {
    rebuild_owner();
    std::map<std::pair<std::uint32_t, std::uint32_t>, double> shared;
    for (const Edge& e : all_edges) {
      const auto u = owner[e.a];
      const auto v = owner[e.b];
      if (u != v) shared[{std::min(u, v), std::max(u, v)}] += e.weight;
    }
    return shared;
  };
  std::vector<std::uint32_t> scratch_local(n, std::numeric_limits<std::uint32_t>::max());

  for (int iter = 0; iter < max_iters; ++iter) {
    tr.iterations = iter + 1;
    bool changed = false;

    // Split phase: proposals are independent, acceptance runs in id order.
    std::vector<std::optional<SplitProposal>> proposals(superpoints.size());
    {
      const std::size_t batches = std::min<std::size_t>(worker_count(), superpoints.size());
      std::vector<std::vector<std::uint32_t>> scratch(
          batches, std::vector<std::uint32_t>(n, std::numeric_limits<std::uint32_t>::max()));
      parallel_for(batches, [&](std::size_t batch) {
        for (std::size_t s = batch; s < superpoints.size(); s += batches) {
          proposals[s] = propose_split(features, graph, superpoints[s], rho, scratch[batch]);
        }
      });
    }
    std::vector<Members> next;
    next.reserve(superpoints.size() * 2);
    for (std::size_t s = 0; s < superpoints.size(); ++s) {
      auto& prop = proposals[s];
      if (prop && prop->delta < -tolerance) {
        current += prop->delta;
        tr.energies.push_back(current);
        ++tr.accepted_splits;
        changed = true;
        for (auto& piece : prop->pieces) next.push_back(std::move(piece));
      } else {
        next.push_back(std::move(superpoints[s]));
      }
    }
    superpoints = std::move(next);

    // Swap phase: re-cut the boundary of adjacent pairs, each superpoint at most once.
    {
      const auto shared = boundary_weights();
      std::vector<char> touched(superpoints.size(), 0);
      std::vector<Members> added;
      for (const auto& [key, w] : shared) {
        const auto [u, v] = key;
        if (touched[u] || touched[v]) continue;
        auto prop = propose_swap(features, graph, superpoints[u], superpoints[v], w, rho,
                                 scratch_local);
        if (!prop || !(prop->delta < -tolerance)) continue;
        touched[u] = touched[v] = 1;
        current += prop->delta;
        tr.energies.push_back(current);
        ++tr.accepted_swaps;
        changed = true;
        for (auto& piece : prop->pieces) added.push_back(std::move(piece));
      }
      std::vector<Members> kept;
      kept.reserve(superpoints.size() + added.size());
      for (std::size_t s = 0; s < superpoints.size(); ++s) {
        if (!touched[s]) kept.push_back(std::move(superpoints[s]));
      }
      for (auto& piece : added) kept.push_back(std::move(piece));
      superpoints = std::move(kept);
    }

    // Merge phase: rounds of non-overlapping best-first merges.
    while (true) {
      auto shared = boundary_weights();
      std::vector<Eigen::RowVectorXd> means(superpoints.size());
      for (std::size_t s = 0; s < superpoints.size(); ++s) {
        means[s] = Eigen::RowVectorXd::Zero(features.cols());
        for (PointIndex p : superpoints[s]) means[s] += features.row(p);
        means[s] /= static_cast<double>(superpoints[s].size());
      }
      std::vector<MergeCandidate> candidates;
      for (const auto& [key, w] : shared) {
        const auto [u, v] = key;
        const double nu = static_cast<double>(superpoints[u].size());
        const double nv = static_cast<double>(superpoints[v].size());
        const double delta = nu * nv / (nu + nv) * (means[u] - means[v]).squaredNorm() - rho * w;
        if (delta < -tolerance) candidates.push_back({delta, u, v});
      }
      if (candidates.empty()) break;
      std::sort(candidates.begin(), candidates.end(), [](const auto& l, const auto& r) {
        if (l.delta != r.delta) return l.delta < r.delta;
        if (l.u != r.u) return l.u < r.u;
        return l.v < r.v;
      });
      std::vector<char> touched(superpoints.size(), 0);
      std::vector<char> removed(superpoints.size(), 0);
      for (const auto& c : candidates) {
        if (touched[c.u] || touched[c.v]) continue;
        touched[c.u] = touched[c.v] = 1;
        // Recompute exactly from members so the trace matches the true energy.
        Members merged = superpoints[c.u];
        merged.insert(merged.end(), superpoints[c.v].begin(), superpoints[c.v].end());
        std::sort(merged.begin(), merged.end());
        const double delta = data_term(features, merged) - data_term(features, superpoints[c.u]) -
                             data_term(features, superpoints[c.v]) -
                             rho * shared[{c.u, c.v}];
        if (!(delta < -tolerance)) continue;
        superpoints[c.u] = std::move(merged);
        superpoints[c.v].clear();
        removed[c.v] = 1;
        current += delta;
        tr.energies.push_back(current);
        ++tr.accepted_merges;
        changed = true;
      }
      std::vector<Members> kept;
      kept.reserve(superpoints.size());
      for (std::size_t s = 0; s < superpoints.size(); ++s) {
        if (!removed[s]) kept.push_back(std::move(superpoints[s]));
      }
      superpoints = std::move(kept);
    }

    // Point-move phase: exact single-point moves to an adjacent superpoint.
    {
      rebuild_owner();
      const std::size_t count_sp = superpoints.size();
      std::vector<Eigen::RowVectorXd> sum(count_sp, Eigen::RowVectorXd::Zero(features.cols()));
      std::vector<double> size(count_sp, 0.0);
      for (std::size_t s = 0; s < count_sp; ++s) {
        for (PointIndex p : superpoints[s]) sum[s] += features.row(p);
        size[s] = static_cast<double>(superpoints[s].size());
      }
      std::map<std::uint32_t, double> link;  // neighbor superpoint -> edge weight
      for (int sweep = 0; sweep < 10; ++sweep) {
        bool moved = false;
        for (PointIndex p = 0; p < n; ++p) {
          const std::uint32_t from = owner[p];
          if (size[from] <= 1.0) continue;
          link.clear();
          const auto nb = graph.neighbors(p);
          const auto w = graph.weights(p);
          for (std::size_t e = 0; e < nb.size(); ++e) link[owner[nb[e]]] += w[e];
          const auto x = features.row(p);
          const double removal =
              size[from] / (size[from] - 1.0) * (x - sum[from] / size[from]).squaredNorm();
          const double to_from = link.count(from) ? link[from] : 0.0;
          double best_delta = -tolerance;
          std::uint32_t best_to = from;
          for (const auto& [to, weight] : link) {
            if (to == from) continue;
            const double addition =
                size[to] / (size[to] + 1.0) * (x - sum[to] / size[to]).squaredNorm();
            const double delta = addition - removal + rho * (to_from - weight);
            if (delta < best_delta) {
              best_delta = delta;
              best_to = to;
            }
          }
          if (best_to == from) continue;
          owner[p] = best_to;
          sum[from] -= x;
          sum[best_to] += x;
          size[from] -= 1.0;
          size[best_to] += 1.0;
          current += best_delta;
          moved = true;
        }
        if (!moved) break;
        tr.energies.push_back(current);
        ++tr.accepted_moves;
        changed = true;
      }
      std::vector<Members> regrouped(count_sp);
      for (PointIndex p = 0; p < n; ++p) regrouped[owner[p]].push_back(p);
      std::erase_if(regrouped, [](const Members& sp) { return sp.empty(); });
      superpoints = std::move(regrouped);
    }

    if (!changed) break;
  }

  rebuild_owner();
  std::vector<std::uint32_t> best = owner;
  double best_energy = assignment_energy(best, features, graph, rho);

  // Trivial partitions: per component, and all singletons.
  const double per_component = assignment_energy(components, features, graph, rho);
  std::vector<std::uint32_t> singletons(n);
  for (std::uint32_t p = 0; p < n; ++p) singletons[p] = p;
  const double all_singletons = assignment_energy(singletons, features, graph, rho);
  if (per_component < best_energy) {
    best = components;
    best_energy = per_component;
    tr.fell_back_to_trivial = true;
  }
  if (all_singletons < best_energy) {
    best = singletons;
    best_energy = all_singletons;
    tr.fell_back_to_trivial = true;
  }
  return make_partition(best, features);
}

}  // namespace partlift
