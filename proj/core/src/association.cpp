#include "bevcast/association.hpp"

#include <cmath>
#include <limits>

namespace bevcast {

namespace {

// Shortest augmenting path formulation for rows <= cols; 1-based internally.
std::vector<std::optional<std::size_t>> solve_wide(const CostMatrix& a) {
  const std::size_t n = a.rows();
  const std::size_t m = a.cols();
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0);
  std::vector<double> v(m + 1, 0.0);
  std::vector<std::size_t> p(m + 1, 0);
  std::vector<std::size_t> way(m + 1, 0);
  for (std::size_t i = 1; i <= n; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::vector<double> minv(m + 1, inf);
    std::vector<bool> used(m + 1, false);
    do {
      used[j0] = true;
      const std::size_t i0 = p[j0];
      double delta = inf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= m; ++j) {
        if (used[j]) continue;
        const double cur = a(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= m; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<std::optional<std::size_t>> row_to_col(n);
  for (std::size_t j = 1; j <= m; ++j) {
    if (p[j] != 0) row_to_col[p[j] - 1] = j - 1;
  }
  return row_to_col;
}

}  // namespace

std::vector<std::optional<std::size_t>> solve_assignment(const CostMatrix& cost) {
  if (cost.rows() == 0 || cost.cols() == 0) {
    return std::vector<std::optional<std::size_t>>(cost.rows());
  }
  if (cost.rows() <= cost.cols()) return solve_wide(cost);

  CostMatrix t(cost.cols(), cost.rows());
  for (std::size_t r = 0; r < cost.rows(); ++r) {
    for (std::size_t c = 0; c < cost.cols(); ++c) t(c, r) = cost(r, c);
  }
  const auto col_to_row = solve_wide(t);
  std::vector<std::optional<std::size_t>> row_to_col(cost.rows());
  for (std::size_t c = 0; c < col_to_row.size(); ++c) {
    if (col_to_row[c]) row_to_col[*col_to_row[c]] = c;
  }
  return row_to_col;
}

AssociationResult associate(std::span<const Point2> extracted, std::span<const Anchor> anchors,
                            const AssociationOptions& options) {
  CostMatrix cost(anchors.size(), extracted.size());
  for (std::size_t i = 0; i < anchors.size(); ++i) {
    for (std::size_t j = 0; j < extracted.size(); ++j) {
      cost(i, j) = std::hypot(extracted[j].x - anchors[i].position.x,
                              extracted[j].y - anchors[i].position.y);
    }
  }
  const auto assignment = solve_assignment(cost);

  AssociationResult result;
  std::vector<bool> taken(extracted.size(), false);
  for (std::size_t i = 0; i < anchors.size(); ++i) {
    const auto& col = assignment[i];
    if (!col || (options.max_distance && cost(i, *col) > *options.max_distance)) {
      result.missed.push_back(anchors[i].id);
      continue;
    }
    taken[*col] = true;
    result.matches.push_back({anchors[i].id, extracted[*col], *col, cost(i, *col)});
    result.total_cost += cost(i, *col);
  }
  for (std::size_t j = 0; j < extracted.size(); ++j) {
    if (!taken[j]) result.unmatched_extractions.push_back(j);
  }
  return result;
}

}  // namespace bevcast
