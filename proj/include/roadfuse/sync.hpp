#pragma once

/// \file
/// \brief Timestamp alignment of per-sensor frame streams onto a reference clock.

#include <cstdint>
#include <deque>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "roadfuse/sensors.hpp"

namespace roadfuse {

using FramePtr = std::shared_ptr<const StampedFrame>;

struct SyncedBundle {
  std::int64_t index = 0;
  double t = 0.0;               ///< reference tick
  std::vector<FramePtr> slots;  ///< one per stream, null when nothing was within tolerance
};

/// Streaming aligner. Frames are pushed in per-stream time order; once the
/// caller's clock has passed a tick by the tolerance, that tick's bundle is
/// final and `poll` emits it. Each slot holds the stream's frame nearest to the
/// tick (earlier frame on ties) if it lies within the tolerance.
class Synchronizer {
 public:
  Synchronizer(std::vector<std::string> stream_ids, double reference_rate, double tolerance);

  const std::vector<std::string>& stream_ids() const { return ids_; }
  double tolerance() const { return tolerance_; }

  /// Throws std::invalid_argument on an unknown stream or out-of-order frame.
  void push(FramePtr frame);
  /// Bundles for every tick t_k with t_k + tolerance <= now.
  std::vector<SyncedBundle> poll(double now);
  /// Bundles for all remaining ticks up to `end` regardless of the clock.
  std::vector<SyncedBundle> flush(double end);

 private:
  SyncedBundle build(std::int64_t k);
  double tick_time(std::int64_t k) const { return static_cast<double>(k) / rate_; }

  std::vector<std::string> ids_;
  double rate_;
  double tolerance_;
  std::vector<std::deque<FramePtr>> buffers_;
  std::vector<double> last_t_;
  std::int64_t next_tick_ = 0;
};

/// Default tolerance: half the period of the slowest rate.
double default_tolerance(double slowest_rate);

/// Batch form over complete streams; ticks run from 0 through the latest
/// timestamp in any stream.
std::vector<SyncedBundle> synchronize(const std::vector<std::vector<StampedFrame>>& streams,
                                      double reference_rate, double tolerance);

}  // namespace roadfuse
