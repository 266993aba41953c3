#pragma once

#include <vector>

#include "intent/geometry.hpp"

namespace intent {

inline constexpr double kTimeStep = 0.5;  // seconds between waypoints

// Time-ordered 2-D positions in the world frame, sampled every dt seconds.
struct Trajectory {
  std::vector<Vec2> positions;
  double dt = kTimeStep;

  std::size_t length() const { return positions.size(); }
  void validate() const;  // length >= 1, dt > 0, finite coordinates
};

// Consecutive displacements between waypoints. The frame is whatever the
// producer chose: world-aligned for raw logs, agent-aligned for model inputs.
struct RelativeTrajectory {
  std::vector<Vec2> displacements;
  double dt = kTimeStep;

  std::size_t length() const { return displacements.size(); }
  void validate() const;
};

// Throws if two dt values disagree by more than 1e-9 s.
void check_same_dt(double a, double b);

// Consecutive differences of a trajectory with at least two points.
RelativeTrajectory to_relative(const Trajectory& traj);

// Accumulates displacements starting one step after origin; the origin itself
// is not part of the output, so to_absolute(to_relative(t), t.positions[0])
// reproduces the tail of t.
Trajectory to_absolute(const RelativeTrajectory& rel, const Vec2& origin);

// Rotates agent-frame displacements by the agent heading and accumulates them
// from the agent position, yielding world-frame waypoints.
Trajectory transform_to_world(const RelativeTrajectory& rel_local, const Pose2D& agent);

}  // namespace intent
