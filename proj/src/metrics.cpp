#include "roadfuse/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <tuple>

namespace roadfuse {

EvalPair EvalPair::make(const Vec2& truth_position, double truth_yaw, const Vec2& detected_position,
                        double detected_yaw, double t) {
  return {truth_position, truth_yaw, detected_position, detected_yaw,
          normalize_angle(detected_yaw - truth_yaw), t};
}

double pose_error(const EvalPair& pair) {
  return (pair.detected_position - pair.truth_position).norm();
}

double aos_term(double dtheta) { return 0.5 * (1.0 + std::cos(2.0 * dtheta)); }

double aos(std::span<const EvalPair> pairs) {
  if (pairs.empty()) throw EmptySet("AOS over an empty set");
  double sum = 0.0;
  for (const auto& p : pairs) sum += aos_term(p.dtheta);
  return sum / static_cast<double>(pairs.size());
}

const char* to_string(GridMetric m) {
  switch (m) {
    case GridMetric::kPoseError:
      return "pose_error";
    case GridMetric::kAos:
      return "aos";
    case GridMetric::kBevIou:
      return "bev_iou";
    case GridMetric::kCount:
      return "count";
  }
  return "count";
}

MetricGrid::MetricGrid(double width, double length, double cell)
    : width_(width), length_(length), cell_(cell) {
  if (!(cell > 0.0) || !(width > 0.0) || !(length > 0.0)) {
    throw std::invalid_argument("grid extent and cell size must be positive");
  }
  cols_ = static_cast<std::size_t>(std::ceil(width / cell - 1e-9));
  rows_ = static_cast<std::size_t>(std::ceil(length / cell - 1e-9));
  const std::size_t n = cols_ * rows_;
  count_.assign(n, 0);
  pose_sum_.assign(n, 0.0);
  aos_sum_.assign(n, 0.0);
  iou_sum_.assign(n, 0.0);
}

void MetricGrid::add(const EvalPair& pair, double bev_iou) {
  const auto bin = [&](double v, std::size_t n) {
    const double k = std::floor(v / cell_);
    return static_cast<std::size_t>(std::clamp(k, 0.0, static_cast<double>(n - 1)));
  };
  const std::size_t i = index(bin(pair.truth_position.x(), cols_), bin(pair.truth_position.y(), rows_));
  count_[i] += 1;
  pose_sum_[i] += pose_error(pair);
  aos_sum_[i] += aos_term(pair.dtheta);
  iou_sum_[i] += bev_iou;
}

void MetricGrid::accumulate(std::span<const EvalPair> pairs, std::span<const double> bev_ious) {
  if (pairs.size() != bev_ious.size()) {
    throw std::invalid_argument("pairs and IOUs must have the same length");
  }
  for (std::size_t k = 0; k < pairs.size(); ++k) add(pairs[k], bev_ious[k]);
}

void MetricGrid::merge(const MetricGrid& other) {
  if (other.cols_ != cols_ || other.rows_ != rows_ || other.cell_ != cell_) {
    throw std::invalid_argument("cannot merge grids of different shape");
  }
  for (std::size_t i = 0; i < count_.size(); ++i) {
    count_[i] += other.count_[i];
    pose_sum_[i] += other.pose_sum_[i];
    aos_sum_[i] += other.aos_sum_[i];
    iou_sum_[i] += other.iou_sum_[i];
  }
}

std::size_t MetricGrid::count(std::size_t col, std::size_t row) const {
  return count_.at(index(col, row));
}

std::optional<double> MetricGrid::mean(GridMetric m, std::size_t col, std::size_t row) const {
  const std::size_t i = index(col, row);
  const std::size_t n = count_.at(i);
  if (n == 0) return std::nullopt;
  const double d = static_cast<double>(n);
  switch (m) {
    case GridMetric::kPoseError:
      return pose_sum_[i] / d;
    case GridMetric::kAos:
      return aos_sum_[i] / d;
    case GridMetric::kBevIou:
      return iou_sum_[i] / d;
    case GridMetric::kCount:
      return d;
  }
  return std::nullopt;
}

std::size_t MetricGrid::total_count() const {
  std::size_t n = 0;
  for (auto c : count_) n += c;
  return n;
}

std::size_t MetricGrid::populated_cells() const {
  return static_cast<std::size_t>(std::count_if(count_.begin(), count_.end(),
                                                [](std::size_t c) { return c > 0; }));
}

void MetricGrid::write_csv(std::ostream& out, GridMetric m) const {
  out << "# metric=" << to_string(m) << " width=" << width_ << " length=" << length_
      << " cell=" << cell_ << " cols=" << cols_ << " rows=" << rows_ << "\n";
  const auto flags = out.flags();
  const auto prec = out.precision();
  out << std::setprecision(17);
  for (std::size_t r = 0; r < rows_; ++r) {
    for (std::size_t c = 0; c < cols_; ++c) {
      if (c > 0) out << ',';
      if (const auto v = mean(m, c, r)) {
        if (m == GridMetric::kCount) {
          out << count(c, r);
        } else {
          out << *v;
        }
      }
    }
    out << "\n";
  }
  out.flags(flags);
  out.precision(prec);
}

EvalMatching match_for_evaluation(std::span<const Vec2> truths, std::span<const Vec2> detections,
                                  double gate) {
  struct Candidate {
    double d;
    std::size_t truth;
    std::size_t det;
  };
  std::vector<Candidate> cands;
  for (std::size_t i = 0; i < truths.size(); ++i) {
    for (std::size_t j = 0; j < detections.size(); ++j) {
      const double d = (truths[i] - detections[j]).norm();
      if (d <= gate) cands.push_back({d, i, j});
    }
  }
  std::sort(cands.begin(), cands.end(), [](const Candidate& a, const Candidate& b) {
    return std::tie(a.d, a.truth, a.det) < std::tie(b.d, b.truth, b.det);
  });
  std::vector<char> t_used(truths.size(), 0);
  std::vector<char> d_used(detections.size(), 0);
  EvalMatching out;
  for (const auto& c : cands) {
    if (t_used[c.truth] || d_used[c.det]) continue;
    t_used[c.truth] = d_used[c.det] = 1;
    out.pairs.emplace_back(c.truth, c.det);
  }
  std::sort(out.pairs.begin(), out.pairs.end());
  for (std::size_t i = 0; i < truths.size(); ++i) {
    if (!t_used[i]) out.missed.push_back(i);
  }
  for (std::size_t j = 0; j < detections.size(); ++j) {
    if (!d_used[j]) out.false_detections.push_back(j);
  }
  return out;
}

FilterReport filter_report(std::span<const Vec2> raw, std::span<const std::optional<Vec2>> filtered,
                           std::span<const Vec2> truth) {
  if (raw.size() != truth.size() || filtered.size() != truth.size()) {
    throw std::invalid_argument("raw, filtered and truth must be aligned");
  }
  FilterReport r;
  for (std::size_t k = 0; k < truth.size(); ++k) {
    if (!filtered[k]) continue;
    r.mse_raw += (raw[k] - truth[k]).squaredNorm();
    r.mse_filtered += (*filtered[k] - truth[k]).squaredNorm();
    ++r.samples;
  }
  if (r.samples == 0) throw EmptySet("no filtered samples to score");
  r.mse_raw /= static_cast<double>(r.samples);
  r.mse_filtered /= static_cast<double>(r.samples);
  r.reduction_pct = r.mse_raw > 0.0 ? 100.0 * (1.0 - r.mse_filtered / r.mse_raw) : 0.0;
  return r;
}

}  // namespace roadfuse
