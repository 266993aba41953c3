#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "intent/trajectory.hpp"
#include "intent/world.hpp"

namespace intent {

struct DriveConfig {
  double duration_s = 120.0;      // per run
  double emit_dt = 0.5;           // sampling period of the output log
  double sim_dt = 0.05;           // internal integration step
  double cruise_speed_min = 0.9;  // per-run cruise speed drawn from this range
  double cruise_speed_max = 1.6;
  double max_speed = 2.0;
  double max_turn_rate = 1.0;    // rad/s
  double accel = 0.8;            // m/s^2
  double heading_noise = 0.05;   // rad added per emitted step
  double stop_prob = 0.02;       // chance per emitted step to begin a pause
  double stop_min_s = 1.0;
  double stop_max_s = 3.0;
  double junction_capture = 0.9;  // distance at which the next edge is chosen
  double turn_slow_speed = 0.5;   // speed while the heading error is large
  bool straight_policy = false;   // test hook: constant speed, no turns/noise
};

// Recorded when the driver commits to an edge at a junction: which relative
// directions were available at that moment.
struct JunctionEvent {
  int time_index = 0;  // index into the emitted trajectory
  bool opt_left = false;
  bool opt_right = false;
  bool opt_straight = false;
};

struct DriveRun {
  std::string id;
  Trajectory trajectory;
  std::vector<JunctionEvent> events;
};

struct DriveResult {
  std::vector<DriveRun> runs;
  std::vector<std::string> skipped;  // run ids that violated the mask, with reason
};

// Simulates n_runs of a waypoint-following unicycle over the street graph.
// Deterministic for a given seed; runs draw from independent derived streams.
// A run that would leave the traversable mask is skipped and reported.
DriveResult drive_scenarios(const GeneratedWorld& gen_world, int n_runs, std::uint64_t seed,
                            const DriveConfig& cfg = {});

}  // namespace intent
