#pragma once

#include <limits>
#include <utility>
#include <vector>

namespace pollitrack {

/// Dense row-major cost matrix.
class CostMatrix {
 public:
  CostMatrix() = default;
  CostMatrix(int rows, int cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(static_cast<std::size_t>(rows) * cols, fill) {}
  CostMatrix(std::initializer_list<std::initializer_list<double>> rows);

  int rows() const noexcept { return rows_; }
  int cols() const noexcept { return cols_; }
  double& operator()(int r, int c) { return data_[static_cast<std::size_t>(r) * cols_ + c]; }
  double operator()(int r, int c) const {
    return data_[static_cast<std::size_t>(r) * cols_ + c];
  }

 private:
  int rows_ = 0;
  int cols_ = 0;
  std::vector<double> data_;
};

struct Assignment {
  std::vector<std::pair<int, int>> pairs;  // (row, col), sorted by row
  std::vector<int> unassigned_rows;
  std::vector<int> unassigned_cols;
  double total_cost = 0.0;
};

/// Optimal partial matching of rows to columns. Entries above `gate` are
/// forbidden. The matching maximises the number of pairs, then minimises the
/// total cost; among equal-cost optima it picks the one whose row-to-column
/// vector is lexicographically smallest (an unassigned row ranks after every
/// column). Costs must be finite and non-negative.
Assignment solve_assignment(const CostMatrix& cost,
                            double gate = std::numeric_limits<double>::infinity());

}  // namespace pollitrack
