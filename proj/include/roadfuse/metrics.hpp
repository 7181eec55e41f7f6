#pragma once

/// \file
/// \brief Evaluation: pose error, average orientation similarity, BEV IOU
/// heatmaps over the field, evaluation matching and filter statistics.

#include <cstddef>
#include <optional>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "roadfuse/geometry.hpp"

namespace roadfuse {

class EmptySet : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

struct EvalPair {
  Vec2 truth_position = Vec2::Zero();
  double truth_yaw = 0.0;
  Vec2 detected_position = Vec2::Zero();
  double detected_yaw = 0.0;
  double dtheta = 0.0;  ///< normalized detected - truth
  double t = 0.0;

  static EvalPair make(const Vec2& truth_position, double truth_yaw, const Vec2& detected_position,
                       double detected_yaw, double t);
};

double pose_error(const EvalPair& pair);

/// (1 + cos 2 dtheta) / 2 for a single pair.
double aos_term(double dtheta);

/// Mean of aos_term over the set; throws EmptySet when empty.
double aos(std::span<const EvalPair> pairs);

enum class GridMetric { kPoseError, kAos, kBevIou, kCount };
const char* to_string(GridMetric m);

/// Per-cell accumulators over [0, width] x [0, length]. Pairs are binned by
/// ground-truth position; positions outside the extent fall in the edge cell.
class MetricGrid {
 public:
  MetricGrid(double width, double length, double cell);

  double width() const { return width_; }
  double length() const { return length_; }
  double cell() const { return cell_; }
  std::size_t cols() const { return cols_; }
  std::size_t rows() const { return rows_; }

  void add(const EvalPair& pair, double bev_iou);
  void accumulate(std::span<const EvalPair> pairs, std::span<const double> bev_ious);
  /// Sums accumulators; extents and cell sizes must agree.
  void merge(const MetricGrid& other);

  std::size_t count(std::size_t col, std::size_t row) const;
  std::optional<double> mean(GridMetric m, std::size_t col, std::size_t row) const;
  std::size_t total_count() const;
  std::size_t populated_cells() const;
  /// Share of populated cells whose mean passes `pred`.
  template <class Pred>
  double populated_fraction(GridMetric m, Pred pred) const {
    std::size_t hit = 0;
    std::size_t pop = 0;
    for (std::size_t r = 0; r < rows_; ++r) {
      for (std::size_t c = 0; c < cols_; ++c) {
        const auto v = mean(m, c, r);
        if (!v) continue;
        ++pop;
        if (pred(*v)) ++hit;
      }
    }
    return pop == 0 ? 0.0 : static_cast<double>(hit) / static_cast<double>(pop);
  }

  /// Header comment with extent and cell size, then one line per row (row 0 is
  /// y in [0, cell)). Empty cells are blank.
  void write_csv(std::ostream& out, GridMetric m) const;

 private:
  std::size_t index(std::size_t col, std::size_t row) const { return row * cols_ + col; }

  double width_;
  double length_;
  double cell_;
  std::size_t cols_;
  std::size_t rows_;
  std::vector<std::size_t> count_;
  std::vector<double> pose_sum_;
  std::vector<double> aos_sum_;
  std::vector<double> iou_sum_;
};

/// One-to-one nearest-neighbor matching within `gate`, shortest distance
/// first; ties go to the lower truth index, then the lower detection index.
struct EvalMatching {
  std::vector<std::pair<std::size_t, std::size_t>> pairs;  ///< (truth, detection)
  std::vector<std::size_t> missed;                         ///< unmatched truths
  std::vector<std::size_t> false_detections;               ///< unmatched detections
};

inline constexpr double kEvalGate = 0.3;

EvalMatching match_for_evaluation(std::span<const Vec2> truths, std::span<const Vec2> detections,
                                  double gate = kEvalGate);

struct FilterReport {
  double mse_raw = 0.0;
  double mse_filtered = 0.0;
  double reduction_pct = 0.0;  ///< 100 (1 - filtered / raw); 0 when raw is 0
  std::size_t samples = 0;
};

/// Squared Euclidean error means over the frames where a filtered output
/// exists; raw is scored on the same frames.
FilterReport filter_report(std::span<const Vec2> raw, std::span<const std::optional<Vec2>> filtered,
                           std::span<const Vec2> truth);

}  // namespace roadfuse
