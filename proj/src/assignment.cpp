#include "roadfuse/assignment.hpp"

#include <algorithm>
#include <limits>
#include <stdexcept>

namespace roadfuse {

namespace {

// Shortest augmenting path Hungarian method with potentials; minimizes cost
// over an n x m matrix with n <= m. Returns the column chosen for each row.
std::vector<std::size_t> hungarian_min(const Eigen::MatrixXd& cost) {
  const std::size_t n = static_cast<std::size_t>(cost.rows());
  const std::size_t m = static_cast<std::size_t>(cost.cols());
  constexpr double kInf = std::numeric_limits<double>::infinity();
  // 1-based arrays; index 0 is the virtual source column.
  std::vector<double> u(n + 1, 0.0), v(m + 1, 0.0);
  std::vector<std::size_t> p(m + 1, 0), way(m + 1, 0);
  for (std::size_t i = 1; i <= n; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::vector<double> minv(m + 1, kInf);
    std::vector<char> used(m + 1, 0);
    do {
      used[j0] = 1;
      const std::size_t i0 = p[j0];
      double delta = kInf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= m; ++j) {
        if (used[j]) {
          continue;
        }
        const double cur = cost(static_cast<Eigen::Index>(i0 - 1), static_cast<Eigen::Index>(j - 1)) -
                           u[i0] - v[j];
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
  std::vector<std::size_t> row_to_col(n, 0);
  for (std::size_t j = 1; j <= m; ++j) {
    if (p[j] != 0) {
      row_to_col[p[j] - 1] = j - 1;
    }
  }
  return row_to_col;
}

}  // namespace

std::vector<Assignment> kuhn_munkres_max(const Eigen::MatrixXd& weights) {
  if (weights.size() == 0) {
    return {};
  }
  if (!weights.allFinite()) {
    throw std::invalid_argument("assignment weights must be finite");
  }
  const bool transposed = weights.rows() > weights.cols();
  const Eigen::MatrixXd w = transposed ? Eigen::MatrixXd(weights.transpose()) : weights;
  const auto cols = hungarian_min(-w);
  std::vector<Assignment> out;
  out.reserve(cols.size());
  for (std::size_t r = 0; r < cols.size(); ++r) {
    const double wt = w(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(cols[r]));
    if (transposed) {
      out.push_back({cols[r], r, wt});
    } else {
      out.push_back({r, cols[r], wt});
    }
  }
  std::sort(out.begin(), out.end(), [](const Assignment& a, const Assignment& b) { return a.row < b.row; });
  return out;
}

std::vector<Assignment> max_weight_matching(const Eigen::MatrixXd& weights) {
  auto all = kuhn_munkres_max(weights);
  std::erase_if(all, [](const Assignment& a) { return !(a.weight > 0.0); });
  return all;
}

}  // namespace roadfuse
