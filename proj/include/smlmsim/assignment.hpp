// ============================================================================
// assignment.hpp -- minimum-cost assignment (Kuhn-Munkres with potentials)
// ============================================================================
#pragma once
#include <cstddef>
#include <vector>

namespace smlm {

/// Dense row-major cost matrix, rows x cols.
struct CostMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> cost;

  CostMatrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), cost(r * c, fill) {}
  double& operator()(std::size_t r, std::size_t c) { return cost[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return cost[r * cols + c]; }
};

/// Column assigned to each row in a minimum-total-cost assignment, with
/// every row matched when rows <= cols (rows > cols is handled by
/// transposition; unmatched rows get -1). O(n^3).
std::vector<long> solve_assignment(const CostMatrix& m);

}  // namespace smlm
