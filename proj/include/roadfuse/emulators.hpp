#pragma once

/// \file
/// \brief Detection emulators standing in for the camera, radar and lidar
/// detectors: noisy observations of ground truth at each rig's rate.

#include <cstdint>
#include <random>
#include <span>
#include <string>

#include "roadfuse/scenario.hpp"
#include "roadfuse/sensors.hpp"
#include "roadfuse/world.hpp"

namespace roadfuse {

using Rng = std::mt19937_64;

std::uint64_t splitmix64(std::uint64_t x);

/// Independent generator for one named consumer (a sensor id, a vehicle, ...).
/// Adding consumers never shifts another consumer's sequence.
Rng make_substream(std::uint64_t master_seed, const std::string& name);

/// True when a sensor of `rate` Hz emits at world step `step` of length `tick`.
bool fires_at(double rate, double tick, std::int64_t step);

StampedFrame sense_camera(const SensorRig& rig, std::span<const VehicleState> vehicles,
                          const CameraNoise& noise, Rng& rng, double t);

StampedFrame sense_radar(const SensorRig& rig, std::span<const VehicleState> vehicles,
                         const RadarNoise& noise, Rng& rng, double t);

StampedFrame sense_lidar(const SensorRig& rig, std::span<const VehicleState> vehicles,
                         const LidarNoise& noise, Rng& rng, double t);

/// Dispatches on rig.kind.
StampedFrame sense(const SensorRig& rig, std::span<const VehicleState> vehicles,
                   const NoiseProfile& noise, Rng& rng, double t);

/// Lidar confidence before jitter: decreasing in sensor distance.
double lidar_confidence(double distance);
/// Camera confidence before jitter: decreasing in depth.
double camera_confidence(double depth);

}  // namespace roadfuse
