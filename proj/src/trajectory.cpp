#include "intent/trajectory.hpp"

#include <cmath>
#include <stdexcept>

namespace intent {

void Trajectory::validate() const {
  if (positions.empty()) throw std::invalid_argument("Trajectory: empty");
  if (!(dt > 0.0)) throw std::invalid_argument("Trajectory: dt must be > 0");
  for (const Vec2& p : positions) {
    if (!p.finite()) throw std::invalid_argument("Trajectory: non-finite coordinate");
  }
}

void RelativeTrajectory::validate() const {
  if (displacements.empty()) throw std::invalid_argument("RelativeTrajectory: empty");
  if (!(dt > 0.0)) throw std::invalid_argument("RelativeTrajectory: dt must be > 0");
  for (const Vec2& d : displacements) {
    if (!d.finite()) throw std::invalid_argument("RelativeTrajectory: non-finite displacement");
  }
}

void check_same_dt(double a, double b) {
  if (std::fabs(a - b) > 1e-9) {
    throw std::invalid_argument("time step mismatch: " + std::to_string(a) + " vs " +
                                std::to_string(b));
  }
}

RelativeTrajectory to_relative(const Trajectory& traj) {
  if (traj.length() < 2) {
    throw std::invalid_argument("to_relative: need at least 2 positions, got " +
                                std::to_string(traj.length()));
  }
  RelativeTrajectory rel;
  rel.dt = traj.dt;
  rel.displacements.reserve(traj.length() - 1);
  for (std::size_t i = 0; i + 1 < traj.length(); ++i) {
    rel.displacements.push_back(traj.positions[i + 1] - traj.positions[i]);
  }
  return rel;
}

Trajectory to_absolute(const RelativeTrajectory& rel, const Vec2& origin) {
  if (rel.length() == 0) throw std::invalid_argument("to_absolute: empty input");
  Trajectory traj;
  traj.dt = rel.dt;
  traj.positions.reserve(rel.length());
  Vec2 p = origin;
  for (const Vec2& d : rel.displacements) {
    p += d;
    traj.positions.push_back(p);
  }
  return traj;
}

Trajectory transform_to_world(const RelativeTrajectory& rel_local, const Pose2D& agent) {
  if (rel_local.length() == 0) throw std::invalid_argument("transform_to_world: empty input");
  Trajectory traj;
  traj.dt = rel_local.dt;
  traj.positions.reserve(rel_local.length());
  const double c = std::cos(agent.heading);
  const double s = std::sin(agent.heading);
  Vec2 p = agent.position;
  for (const Vec2& d : rel_local.displacements) {
    p += Vec2{c * d.x - s * d.y, s * d.x + c * d.y};
    traj.positions.push_back(p);
  }
  return traj;
}

}  // namespace intent
