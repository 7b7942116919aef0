#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "pais/core.hpp"

namespace pais {

// ---------------------------------------------------------------------------
// Optimal transport coupling

/// Coupling between the weighted measure sum_i wbar_i delta(y_i) (rows) and the
/// uniform measure (1/M) sum_j delta(y_j) (columns).
struct CouplingPlan {
  std::size_t size = 0;
  std::vector<double> matrix;  // row-major size x size
  std::vector<double> row_marginals;
  std::vector<double> col_marginals;
  double cost = 0.0;
  std::size_t pivots = 0;

  double operator()(std::size_t i, std::size_t j) const { return matrix[i * size + j]; }

  std::size_t positive_entries() const {
    return static_cast<std::size_t>(std::count_if(matrix.begin(), matrix.end(), [](double t) { return t > 0.0; }));
  }
};

/// Entering-cell choice. `dantzig_bland` prices by most negative reduced cost
/// and falls back to Bland's rule after a degenerate pivot until progress resumes.
enum class PivotRule { dantzig_bland, bland, dantzig };

struct TransportOptions {
  /// Northwest-corner start on rows and columns ordered by first coordinate
  /// instead of the natural index order.
  bool sorted_start = false;
  PivotRule rule = PivotRule::dantzig_bland;
  /// Total supply perturbation used against degeneracy.
  double perturbation = 1e-12;
};

namespace detail {

inline void validate_probability(std::span<const double> w, const char* who) {
  double s = 0.0;
  for (double x : w) {
    if (!(x >= 0.0) || !std::isfinite(x)) throw ParameterError(std::string(who) + ": weights must be finite and >= 0");
    s += x;
  }
  if (w.empty() || std::abs(s - 1.0) > 1e-9) throw ParameterError(std::string(who) + ": weights must sum to 1");
}

/// Transportation simplex on an m x n problem with dense cost.
class TransportSimplex {
 public:
  struct Cell {
    std::size_t i, j;
  };

  TransportSimplex(std::size_t m, std::size_t n, std::vector<double> cost) : m_(m), n_(n), cost_(std::move(cost)) {}

  /// Northwest corner over the given row and column orders.
  void northwest(std::span<const double> a, std::span<const double> b, std::span<const std::size_t> row_order,
                 std::span<const std::size_t> col_order) {
    std::vector<double> ra(a.begin(), a.end()), rb(b.begin(), b.end());
    basis_.clear();
    std::size_t r = 0, c = 0;
    for (;;) {
      const std::size_t i = row_order[r], j = col_order[c];
      basis_.push_back({i, j});
      const double x = std::min(ra[i], rb[j]);
      ra[i] -= x;
      rb[j] -= x;
      if (r == m_ - 1 && c == n_ - 1) break;
      if (r == m_ - 1)
        ++c;
      else if (c == n_ - 1)
        ++r;
      else if (ra[i] <= rb[j])
        ++r;
      else
        ++c;
    }
    build_adjacency();
    flow_ = tree_flows(a, b);
  }

  /// Pivots until no nonbasic cell has negative reduced cost.
  std::size_t optimize(PivotRule rule, double tol) {
    std::size_t pivots = 0;
    const std::size_t limit = 50 * (m_ + n_) * (m_ + n_) + 1000;
    std::vector<double> u(m_), v(n_);
    std::vector<char> basic(m_ * n_, 0);
    for (const auto& c : basis_) basic[c.i * n_ + c.j] = 1;
    bool degenerate = false;
    for (;;) {
      potentials(u, v);
      const bool first_found = rule == PivotRule::bland || (rule == PivotRule::dantzig_bland && degenerate);
      std::size_t enter = kNone;
      double best = -tol;
      for (std::size_t i = 0; i < m_ && !(first_found && enter != kNone); ++i) {
        const double* crow = &cost_[i * n_];
        for (std::size_t j = 0; j < n_; ++j) {
          const double rc = crow[j] - u[i] - v[j];
          if (rc < best && !basic[i * n_ + j]) {
            enter = i * n_ + j;
            if (first_found) break;
            best = rc;
          }
        }
      }
      if (enter == kNone) return pivots;
      if (++pivots > limit) throw Error("transport simplex exceeded its pivot limit");
      const auto [leave, theta] = pivot(enter / n_, enter % n_);
      degenerate = theta <= 0.0;
      basic[leave] = 0;
      basic[enter] = 1;
    }
  }

  /// Flows on the current basis for marginals (a, b), by leaf elimination.
  std::vector<double> tree_flows(std::span<const double> a, std::span<const double> b) const {
    const std::size_t nodes = m_ + n_;
    std::vector<double> rest(nodes);
    for (std::size_t i = 0; i < m_; ++i) rest[i] = a[i];
    for (std::size_t j = 0; j < n_; ++j) rest[m_ + j] = b[j];
    std::vector<std::size_t> degree(nodes, 0);
    for (const auto& c : basis_) {
      ++degree[c.i];
      ++degree[m_ + c.j];
    }
    std::vector<char> done(basis_.size(), 0);
    std::vector<double> flow(basis_.size(), 0.0);
    std::vector<std::size_t> stack;
    for (std::size_t k = 0; k < nodes; ++k)
      if (degree[k] == 1) stack.push_back(k);
    while (!stack.empty()) {
      const std::size_t leaf = stack.back();
      stack.pop_back();
      if (degree[leaf] != 1) continue;
      const auto& edges = leaf < m_ ? row_cells_[leaf] : col_cells_[leaf - m_];
      std::size_t e = kNone;
      for (std::size_t idx : edges)
        if (!done[idx]) {
          e = idx;
          break;
        }
      const std::size_t other = leaf < m_ ? m_ + basis_[e].j : basis_[e].i;
      flow[e] = rest[leaf];
      rest[other] -= rest[leaf];
      rest[leaf] = 0.0;
      done[e] = 1;
      degree[leaf] = 0;
      if (--degree[other] == 1) stack.push_back(other);
    }
    return flow;
  }

  const std::vector<Cell>& basis() const noexcept { return basis_; }

 private:
  static constexpr std::size_t kNone = static_cast<std::size_t>(-1);

  void build_adjacency() {
    row_cells_.assign(m_, {});
    col_cells_.assign(n_, {});
    for (std::size_t k = 0; k < basis_.size(); ++k) {
      row_cells_[basis_[k].i].push_back(k);
      col_cells_[basis_[k].j].push_back(k);
    }
  }

  /// u_i + v_j = c_ij on the basis tree, u_0 = 0.
  void potentials(std::vector<double>& u, std::vector<double>& v) const {
    std::vector<char> seen(m_ + n_, 0);
    std::vector<std::size_t> stack{0};
    u[0] = 0.0;
    seen[0] = 1;
    while (!stack.empty()) {
      const std::size_t node = stack.back();
      stack.pop_back();
      if (node < m_) {
        for (std::size_t e : row_cells_[node]) {
          const std::size_t j = basis_[e].j;
          if (seen[m_ + j]) continue;
          seen[m_ + j] = 1;
          v[j] = cost_[node * n_ + j] - u[node];
          stack.push_back(m_ + j);
        }
      } else {
        const std::size_t j = node - m_;
        for (std::size_t e : col_cells_[j]) {
          const std::size_t i = basis_[e].i;
          if (seen[i]) continue;
          seen[i] = 1;
          u[i] = cost_[i * n_ + j] - v[j];
          stack.push_back(i);
        }
      }
    }
  }

  /// Brings (p, q) into the basis; returns the flat index of the leaving cell
  /// and the amount shifted around the cycle.
  std::pair<std::size_t, double> pivot(std::size_t p, std::size_t q) {
    // Tree path from row node p to column node q.
    const std::size_t nodes = m_ + n_;
    std::vector<std::size_t> parent_edge(nodes, kNone);
    std::vector<char> seen(nodes, 0);
    std::vector<std::size_t> stack{p};
    seen[p] = 1;
    while (!stack.empty() && !seen[m_ + q]) {
      const std::size_t node = stack.back();
      stack.pop_back();
      const auto& edges = node < m_ ? row_cells_[node] : col_cells_[node - m_];
      for (std::size_t e : edges) {
        const std::size_t next = node < m_ ? m_ + basis_[e].j : basis_[e].i;
        if (seen[next]) continue;
        seen[next] = 1;
        parent_edge[next] = e;
        stack.push_back(next);
      }
    }
    // Walk back from q: edges alternate -, +, -, ... starting next to q.
    std::vector<std::size_t> path;
    for (std::size_t node = m_ + q; node != p;) {
      const std::size_t e = parent_edge[node];
      path.push_back(e);
      node = node < m_ ? m_ + basis_[e].j : basis_[e].i;
    }
    std::size_t leave_pos = kNone;
    double theta = kInf;
    std::size_t leave_flat = kNone;
    for (std::size_t k = 0; k < path.size(); k += 2) {
      const std::size_t e = path[k];
      const std::size_t flat = basis_[e].i * n_ + basis_[e].j;
      if (flow_[e] < theta || (flow_[e] == theta && flat < leave_flat)) {
        theta = flow_[e];
        leave_pos = e;
        leave_flat = flat;
      }
    }
    for (std::size_t k = 0; k < path.size(); ++k) flow_[path[k]] += (k % 2 == 0 ? -theta : theta);
    // Replace the leaving cell in place.
    auto erase = [](std::vector<std::size_t>& list, std::size_t e) {
      list.erase(std::find(list.begin(), list.end(), e));
    };
    erase(row_cells_[basis_[leave_pos].i], leave_pos);
    erase(col_cells_[basis_[leave_pos].j], leave_pos);
    basis_[leave_pos] = {p, q};
    flow_[leave_pos] = theta;
    row_cells_[p].push_back(leave_pos);
    col_cells_[q].push_back(leave_pos);
    return {leave_flat, theta};
  }

  std::size_t m_, n_;
  std::vector<double> cost_;
  std::vector<Cell> basis_;
  std::vector<double> flow_;
  std::vector<std::vector<std::size_t>> row_cells_, col_cells_;
};

}  // namespace detail

/// Exact minimizer of sum_ij T_ij |y_i - y_j|^2 with row sums wbar and column
/// sums 1/M, by the transportation simplex.
inline CouplingPlan solve_transport(std::span<const double> weights, const PointSet& points,
                                    const TransportOptions& options = {}) {
  const std::size_t m = weights.size();
  if (m != points.size()) throw ParameterError("solve_transport: weight and point counts differ");
  detail::validate_probability(weights, "solve_transport");

  CouplingPlan plan;
  plan.size = m;
  plan.row_marginals.assign(weights.begin(), weights.end());
  plan.col_marginals.assign(m, 1.0 / static_cast<double>(m));
  plan.matrix.assign(m * m, 0.0);

  std::vector<double> cost(m * m);
  double cmax = 0.0;
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < m; ++j) {
      cost[i * m + j] = squared_distance(points[i], points[j]);
      cmax = std::max(cmax, cost[i * m + j]);
    }

  // Supplies get +eps each; the last demand absorbs the total.
  const double eps = options.perturbation / static_cast<double>(m);
  std::vector<double> a(m), b(plan.col_marginals);
  double supply = 0.0, demand = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    a[i] = weights[i] + eps;
    supply += a[i];
  }
  for (std::size_t j = 0; j + 1 < m; ++j) demand += b[j];
  b[m - 1] = supply - demand;

  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), std::size_t{0});
  if (options.sorted_start && points.dim() > 0)
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t x, std::size_t y) { return points[x][0] < points[y][0]; });

  detail::TransportSimplex simplex(m, m, cost);
  simplex.northwest(a, b, order, order);
  plan.pivots = simplex.optimize(options.rule, 1e-12 * std::max(1.0, cmax));

  // Unperturbed flows on the optimal basis.
  const std::vector<double> flow = simplex.tree_flows(plan.row_marginals, plan.col_marginals);
  const auto& basis = simplex.basis();
  for (std::size_t k = 0; k < basis.size(); ++k) {
    const double f = flow[k] < 0.0 && flow[k] > -1e-10 ? 0.0 : flow[k];
    if (f < 0.0) throw Error("solve_transport: infeasible basis after removing perturbation");
    plan.matrix[basis[k].i * m + basis[k].j] += f;
  }
  for (std::size_t k = 0; k < m * m; ++k) plan.cost += plan.matrix[k] * cost[k];
  return plan;
}

/// ETPF transform. Deterministic: x_j = M sum_i T_ij y_i. Stochastic: x_j is
/// y_i with i drawn from column j of M T.
inline PointSet etpf_resample(const PointSet& proposals, std::span<const double> log_w, bool stochastic = false,
                              RandomStream* rng = nullptr, const TransportOptions& options = {}) {
  const std::vector<double> w = normalize_log_weights(log_w);
  const CouplingPlan plan = solve_transport(w, proposals, options);
  const std::size_t m = proposals.size(), d = proposals.dim();
  const double scale = static_cast<double>(m);
  PointSet out(m, d);
  if (stochastic && !rng) throw ParameterError("etpf_resample: stochastic mode needs a random stream");
  for (std::size_t j = 0; j < m; ++j) {
    if (stochastic) {
      double u = rng->uniform(), acc = 0.0;
      std::size_t pick = m;
      for (std::size_t i = 0; i < m; ++i) {
        const double t = plan(i, j) * scale;
        if (t <= 0.0) continue;
        pick = i;
        acc += t;
        if (u < acc) break;
      }
      std::copy(proposals[pick].begin(), proposals[pick].end(), out[j].begin());
      continue;
    }
    for (std::size_t i = 0; i < m; ++i) {
      const double t = plan(i, j) * scale;
      if (t == 0.0) continue;
      for (std::size_t k = 0; k < d; ++k) out[j][k] += t * proposals[i][k];
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Bootstrap

inline PointSet bootstrap_resample(const PointSet& proposals, std::span<const double> log_w, RandomStream& rng) {
  const std::vector<double> w = normalize_log_weights(log_w);
  const std::size_t m = proposals.size();
  std::vector<double> cum(m);
  std::partial_sum(w.begin(), w.end(), cum.begin());
  PointSet out(m, proposals.dim());
  for (std::size_t j = 0; j < m; ++j) {
    const double u = rng.uniform() * cum.back();
    auto it = std::upper_bound(cum.begin(), cum.end(), u);
    auto i = static_cast<std::size_t>(it - cum.begin());
    if (i >= m) i = m - 1;
    while (w[i] == 0.0 && i > 0) --i;
    std::copy(proposals[i].begin(), proposals[i].end(), out[j].begin());
  }
  return out;
}

// ---------------------------------------------------------------------------
// Approximate multinomial resampler

/// Rows p_1..p_M stored sparsely as (index, probability) pairs.
struct SubMultinomials {
  std::size_t size = 0;
  std::vector<std::vector<std::pair<std::size_t, double>>> rows;
  /// Anchor J chosen for each row.
  std::vector<std::size_t> anchors;

  std::vector<double> dense_row(std::size_t i) const {
    std::vector<double> p(size, 0.0);
    for (auto [k, v] : rows[i]) p[k] += v;
    return p;
  }

  /// (1/M) sum_i p_i.
  std::vector<double> mean() const {
    std::vector<double> s(size, 0.0);
    for (const auto& r : rows)
      for (auto [k, v] : r) s[k] += v;
    for (double& x : s) x /= static_cast<double>(size);
    return s;
  }
};

inline SubMultinomials amr_split(std::span<const double> weights, const PointSet& points) {
  const std::size_t m = weights.size();
  if (m != points.size()) throw ParameterError("amr_split: weight and point counts differ");
  detail::validate_probability(weights, "amr_split");
  SubMultinomials out;
  out.size = m;
  out.rows.resize(m);
  out.anchors.resize(m);
  std::vector<double> z(m);
  for (std::size_t k = 0; k < m; ++k) z[k] = static_cast<double>(m) * weights[k];

  for (std::size_t i = 0; i < m; ++i) {
    const auto J = static_cast<std::size_t>(std::max_element(z.begin(), z.end()) - z.begin());
    out.anchors[i] = J;
    auto& row = out.rows[i];
    double need;
    // A unit short only by rounding in M * w still counts as a whole copy.
    if (z[J] >= 1.0 - 1e-12) {
      row.emplace_back(J, 1.0);
      z[J] = std::max(0.0, z[J] - 1.0);
      continue;
    }
    row.emplace_back(J, z[J]);
    need = 1.0 - z[J];
    z[J] = 0.0;
    while (need > 0.0) {
      std::size_t K = m;
      double best = kInf;
      for (std::size_t k = 0; k < m; ++k) {
        if (!(z[k] > 0.0)) continue;
        const double dist = squared_distance(points[J], points[k]);
        if (dist < best) {
          best = dist;
          K = k;
        }
      }
      if (K == m) {
        if (need >= 1e-10) throw Error("amr_split: weight mass exhausted with a row unfilled");
        row.back().second += need;
        break;
      }
      if (z[K] < need) {
        row.emplace_back(K, z[K]);
        need -= z[K];
        z[K] = 0.0;
      } else {
        row.emplace_back(K, need);
        z[K] -= need;
        need = 0.0;
      }
    }
  }
  return out;
}

/// AMR. Deterministic: x_i = sum_k p_ik y_k. Stochastic: one draw from p_i.
inline PointSet amr_resample(const PointSet& proposals, std::span<const double> log_w, bool stochastic = false,
                             RandomStream* rng = nullptr) {
  const std::vector<double> w = normalize_log_weights(log_w);
  const SubMultinomials split = amr_split(w, proposals);
  const std::size_t m = proposals.size(), d = proposals.dim();
  if (stochastic && !rng) throw ParameterError("amr_resample: stochastic mode needs a random stream");
  PointSet out(m, d);
  for (std::size_t i = 0; i < m; ++i) {
    const auto& row = split.rows[i];
    if (stochastic) {
      const double u = rng->uniform();
      double acc = 0.0;
      std::size_t pick = row.back().first;
      for (auto [k, p] : row) {
        acc += p;
        if (u < acc) {
          pick = k;
          break;
        }
      }
      std::copy(proposals[pick].begin(), proposals[pick].end(), out[i].begin());
      continue;
    }
    for (auto [k, p] : row)
      for (std::size_t c = 0; c < d; ++c) out[i][c] += p * proposals[k][c];
  }
  return out;
}

// ---------------------------------------------------------------------------

enum class ResamplerKind { etpf, amr, bootstrap };

inline std::string_view to_string(ResamplerKind k) {
  switch (k) {
    case ResamplerKind::etpf: return "etpf";
    case ResamplerKind::amr: return "amr";
    case ResamplerKind::bootstrap: return "bootstrap";
  }
  return "?";
}

inline ResamplerKind resampler_kind_from_string(std::string_view s) {
  if (s == "etpf") return ResamplerKind::etpf;
  if (s == "amr") return ResamplerKind::amr;
  if (s == "bootstrap") return ResamplerKind::bootstrap;
  throw ParameterError("unknown resampler '" + std::string(s) + "'");
}

struct ResamplerSpec {
  ResamplerKind kind = ResamplerKind::etpf;
  /// Draw from the per-column (ETPF) or per-row (AMR) multinomials instead of taking means.
  bool stochastic = false;

  friend bool operator==(const ResamplerSpec&, const ResamplerSpec&) = default;
};

inline PointSet resample(const ResamplerSpec& spec, const PointSet& proposals, std::span<const double> log_w,
                         RandomStream& rng) {
  switch (spec.kind) {
    case ResamplerKind::etpf: return etpf_resample(proposals, log_w, spec.stochastic, &rng);
    case ResamplerKind::amr: return amr_resample(proposals, log_w, spec.stochastic, &rng);
    case ResamplerKind::bootstrap: return bootstrap_resample(proposals, log_w, rng);
  }
  throw ParameterError("unknown resampler");
}

}  // namespace pais
