#include "pollitrack/assignment.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace pollitrack {

CostMatrix::CostMatrix(std::initializer_list<std::initializer_list<double>> rows)
    : rows_(static_cast<int>(rows.size())),
      cols_(rows.size() == 0 ? 0 : static_cast<int>(rows.begin()->size())) {
  data_.reserve(static_cast<std::size_t>(rows_) * cols_);
  for (const auto& r : rows) {
    if (static_cast<int>(r.size()) != cols_) throw std::invalid_argument("ragged cost matrix");
    data_.insert(data_.end(), r.begin(), r.end());
  }
}

namespace {

// Shortest-augmenting-path Hungarian method with potentials for n <= m.
// Returns, for each row, the assigned column.
std::vector<int> hungarian_rows_le_cols(const std::vector<double>& a, int n, int m) {
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(m + 1, 0.0);
  std::vector<int> p(m + 1, 0), way(m + 1, 0);
  std::vector<double> minv(m + 1);
  std::vector<char> used(m + 1);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::fill(minv.begin(), minv.end(), inf);
    std::fill(used.begin(), used.end(), 0);
    do {
      used[j0] = 1;
      const int i0 = p[j0];
      double delta = inf;
      int j1 = 0;
      for (int j = 1; j <= m; ++j) {
        if (used[j]) continue;
        const double cur = a[static_cast<std::size_t>(i0 - 1) * m + (j - 1)] - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= m; ++j) {
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
      const int j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<int> row_to_col(n, -1);
  for (int j = 1; j <= m; ++j) {
    if (p[j] != 0) row_to_col[p[j] - 1] = j - 1;
  }
  return row_to_col;
}

struct Objective {
  int pairs = 0;
  double cost = 0.0;
};

class Solver {
 public:
  Solver(const CostMatrix& cost, double gate) : cost_(cost), gate_(gate) {
    double allowed_sum = 0.0;
    for (int r = 0; r < cost.rows(); ++r) {
      for (int c = 0; c < cost.cols(); ++c) {
        const double x = cost(r, c);
        if (!std::isfinite(x) || x < 0.0) {
          throw std::invalid_argument("assignment costs must be finite and non-negative");
        }
        if (allowed(r, c)) allowed_sum += x;
      }
    }
    // Any matching using one more forbidden pair costs more than every allowed pair combined.
    big_ = 2.0 * (allowed_sum + 1.0);
  }

  bool allowed(int r, int c) const { return cost_(r, c) <= gate_; }

  // Optimal assignment (row -> col or -1) restricted to the given rows and columns.
  std::vector<int> solve(const std::vector<int>& rows, const std::vector<int>& cols) const {
    std::vector<int> out(static_cast<std::size_t>(cost_.rows()), -1);
    const int n = static_cast<int>(rows.size()), m = static_cast<int>(cols.size());
    if (n == 0 || m == 0) return out;
    const bool transpose = n > m;
    const int nr = transpose ? m : n, nc = transpose ? n : m;
    std::vector<double> a(static_cast<std::size_t>(nr) * nc);
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < m; ++j) {
        const int r = rows[i], c = cols[j];
        const double x = allowed(r, c) ? cost_(r, c) : big_;
        if (transpose) {
          a[static_cast<std::size_t>(j) * nc + i] = x;
        } else {
          a[static_cast<std::size_t>(i) * nc + j] = x;
        }
      }
    }
    const auto sol = hungarian_rows_le_cols(a, nr, nc);
    for (int k = 0; k < nr; ++k) {
      const int i = transpose ? sol[k] : k;
      const int j = transpose ? k : sol[k];
      if (i < 0 || j < 0) continue;
      const int r = rows[i], c = cols[j];
      if (allowed(r, c)) out[r] = c;
    }
    return out;
  }

  Objective objective(const std::vector<int>& row_to_col) const {
    Objective o;
    for (int r = 0; r < cost_.rows(); ++r) {
      if (row_to_col[r] < 0) continue;
      ++o.pairs;
      o.cost += cost_(r, row_to_col[r]);
    }
    return o;
  }

 private:
  const CostMatrix& cost_;
  double gate_;
  double big_ = 0.0;
};

}  // namespace

Assignment solve_assignment(const CostMatrix& cost, double gate) {
  const int R = cost.rows(), C = cost.cols();
  Assignment result;
  if (R == 0 || C == 0) {
    for (int r = 0; r < R; ++r) result.unassigned_rows.push_back(r);
    for (int c = 0; c < C; ++c) result.unassigned_cols.push_back(c);
    return result;
  }
  Solver solver(cost, gate);

  std::vector<int> all_rows(R), all_cols(C);
  for (int r = 0; r < R; ++r) all_rows[r] = r;
  for (int c = 0; c < C; ++c) all_cols[c] = c;
  std::vector<int> best = solver.solve(all_rows, all_cols);
  const Objective target = solver.objective(best);
  const double eps = 1e-9 * std::max(1.0, target.cost);

  // Lexicographic refinement: walk rows in order and move each to the lowest
  // column that still admits an optimal completion of the remaining rows.
  std::vector<char> col_used(C, 0);
  for (int r = 0; r < R; ++r) {
    const int current = best[r] < 0 ? C : best[r];
    std::vector<int> rest_rows;
    for (int rr = r + 1; rr < R; ++rr) rest_rows.push_back(rr);
    for (int c = 0; c < current; ++c) {
      if (col_used[c] || !solver.allowed(r, c)) continue;
      std::vector<int> rest_cols;
      for (int cc = 0; cc < C; ++cc) {
        if (!col_used[cc] && cc != c) rest_cols.push_back(cc);
      }
      std::vector<int> candidate = solver.solve(rest_rows, rest_cols);
      for (int rr = 0; rr < r; ++rr) candidate[rr] = best[rr];
      candidate[r] = c;
      const Objective o = solver.objective(candidate);
      if (o.pairs == target.pairs && std::abs(o.cost - target.cost) <= eps) {
        best = std::move(candidate);
        break;
      }
    }
    if (best[r] >= 0) col_used[best[r]] = 1;
  }

  for (int r = 0; r < R; ++r) {
    if (best[r] < 0) {
      result.unassigned_rows.push_back(r);
    } else {
      result.pairs.emplace_back(r, best[r]);
      result.total_cost += cost(r, best[r]);
    }
  }
  for (int c = 0; c < C; ++c) {
    if (!col_used[c]) result.unassigned_cols.push_back(c);
  }
  return result;
}

}  // namespace pollitrack
