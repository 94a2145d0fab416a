#include "smlmsim/assignment.hpp"

#include <limits>

namespace smlm {

namespace {

// rows <= cols. 1-based potentials formulation.
std::vector<long> solve_wide(const CostMatrix& m) {
  const std::size_t n = m.rows;
  const std::size_t k = m.cols;
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(k + 1, 0.0);
  std::vector<std::size_t> p(k + 1, 0), way(k + 1, 0);

  for (std::size_t i = 1; i <= n; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::vector<double> minv(k + 1, inf);
    std::vector<char> used(k + 1, 0);
    do {
      used[j0] = 1;
      const std::size_t i0 = p[j0];
      double delta = inf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= k; ++j) {
        if (used[j]) continue;
        const double cur = m(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= k; ++j) {
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

  std::vector<long> row_to_col(n, -1);
  for (std::size_t j = 1; j <= k; ++j)
    if (p[j] != 0) row_to_col[p[j] - 1] = static_cast<long>(j - 1);
  return row_to_col;
}

}  // namespace

std::vector<long> solve_assignment(const CostMatrix& m) {
  if (m.rows == 0) return {};
  if (m.rows <= m.cols) return solve_wide(m);

  CostMatrix t(m.cols, m.rows);
  for (std::size_t r = 0; r < m.rows; ++r)
    for (std::size_t c = 0; c < m.cols; ++c) t(c, r) = m(r, c);
  const auto col_to_row = solve_wide(t);
  std::vector<long> row_to_col(m.rows, -1);
  for (std::size_t c = 0; c < col_to_row.size(); ++c)
    if (col_to_row[c] >= 0) row_to_col[static_cast<std::size_t>(col_to_row[c])] = static_cast<long>(c);
  return row_to_col;
}

}  // namespace smlm
