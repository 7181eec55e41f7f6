#include "roadfuse/sync.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace roadfuse {

double default_tolerance(double slowest_rate) {
  if (!(slowest_rate > 0.0)) throw std::invalid_argument("rate must be > 0");
  return 0.5 / slowest_rate;
}

Synchronizer::Synchronizer(std::vector<std::string> stream_ids, double reference_rate,
                           double tolerance)
    : ids_(std::move(stream_ids)),
      rate_(reference_rate),
      tolerance_(tolerance),
      buffers_(ids_.size()),
      last_t_(ids_.size(), -std::numeric_limits<double>::infinity()) {
  if (!(reference_rate > 0.0)) throw std::invalid_argument("reference rate must be > 0");
  if (!(tolerance >= 0.0)) throw std::invalid_argument("tolerance must be >= 0");
}

void Synchronizer::push(FramePtr frame) {
  const auto it = std::find(ids_.begin(), ids_.end(), frame->sensor_id);
  if (it == ids_.end()) throw std::invalid_argument("unknown stream '" + frame->sensor_id + "'");
  const auto i = static_cast<std::size_t>(it - ids_.begin());
  if (frame->t <= last_t_[i]) {
    throw std::invalid_argument("non-monotonic timestamp on stream '" + frame->sensor_id + "'");
  }
  last_t_[i] = frame->t;
  buffers_[i].push_back(std::move(frame));
}

SyncedBundle Synchronizer::build(std::int64_t k) {
  const double tk = tick_time(k);
  SyncedBundle b{k, tk, std::vector<FramePtr>(ids_.size())};
  for (std::size_t i = 0; i < buffers_.size(); ++i) {
    auto& buf = buffers_[i];
    double best = std::numeric_limits<double>::infinity();
    for (const auto& f : buf) {
      const double d = std::abs(f->t - tk);
      if (d <= tolerance_ && d < best) {
        best = d;
        b.slots[i] = f;
      }
    }
    // Frames too old for the next tick can go.
    const double horizon = tick_time(k + 1) - tolerance_;
    while (!buf.empty() && buf.front()->t < horizon) buf.pop_front();
  }
  return b;
}

std::vector<SyncedBundle> Synchronizer::poll(double now) {
  std::vector<SyncedBundle> out;
  while (tick_time(next_tick_) + tolerance_ <= now) {
    out.push_back(build(next_tick_++));
  }
  return out;
}

std::vector<SyncedBundle> Synchronizer::flush(double end) {
  std::vector<SyncedBundle> out;
  while (tick_time(next_tick_) <= end) {
    out.push_back(build(next_tick_++));
  }
  return out;
}

std::vector<SyncedBundle> synchronize(const std::vector<std::vector<StampedFrame>>& streams,
                                      double reference_rate, double tolerance) {
  std::vector<std::string> ids;
  double end = 0.0;
  for (std::size_t i = 0; i < streams.size(); ++i) {
    ids.push_back(streams[i].empty() ? "stream" + std::to_string(i) : streams[i].front().sensor_id);
    for (const auto& f : streams[i]) end = std::max(end, f.t);
  }
  Synchronizer sync(ids, reference_rate, tolerance);
  // Streams are complete, so all frames can go in before any tick is built.
  for (const auto& s : streams) {
    for (const auto& f : s) sync.push(std::make_shared<const StampedFrame>(f));
  }
  return sync.flush(end);
}

}  // namespace roadfuse
