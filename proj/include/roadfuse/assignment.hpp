#pragma once

#include <cstddef>
#include <utility>
#include <vector>

#include <Eigen/Core>

namespace roadfuse {

struct Assignment {
  std::size_t row = 0;
  std::size_t col = 0;
  double weight = 0.0;
};

/// Kuhn-Munkres maximum-weight one-to-one assignment on a rectangular matrix.
///
/// Every row (or every column, whichever dimension is smaller) is assigned.
/// Returned pairs are sorted by row. Weights must be finite.
std::vector<Assignment> kuhn_munkres_max(const Eigen::MatrixXd& weights);

/// Same as kuhn_munkres_max but drops pairs whose weight is <= 0, which treats
/// non-positive entries as forbidden edges.
std::vector<Assignment> max_weight_matching(const Eigen::MatrixXd& weights);

}  // namespace roadfuse
