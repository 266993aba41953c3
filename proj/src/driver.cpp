#include "intent/driver.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "intent/rng.hpp"

namespace intent {

namespace {

struct UnicycleState {
  Vec2 pos;
  double heading = 0.0;
  double speed = 0.0;
};

// Classifies the turn from incoming direction to outgoing direction.
enum class Turn { kStraight, kLeft, kRight, kBack };

Turn classify_turn(const Vec2& incoming, const Vec2& outgoing) {
  const double cross = incoming.cross(outgoing);
  const double dot = incoming.dot(outgoing);
  if (dot > 0.5) return Turn::kStraight;
  if (dot < -0.5) return Turn::kBack;
  return cross > 0.0 ? Turn::kLeft : Turn::kRight;
}

Vec2 unit_dir(const Vec2& from, const Vec2& to) {
  const Vec2 d = to - from;
  const double n = d.norm();
  return n > 1e-12 ? Vec2{d.x / n, d.y / n} : Vec2{1.0, 0.0};
}

struct RunOutcome {
  bool ok = true;
  std::string reason;
};

RunOutcome simulate_run(const GeneratedWorld& gw, const DriveConfig& cfg, Rng& rng, DriveRun& out) {
  const World& world = gw.world;
  const StreetGraph& graph = gw.graph;
  if (graph.nodes.empty()) return {false, "empty street graph"};

  const int start = rng.uniform_int(static_cast<int>(graph.nodes.size()));
  if (graph.adjacency[start].empty()) return {false, "isolated start node"};
  const int first_target =
      graph.adjacency[start][rng.uniform_int(static_cast<int>(graph.adjacency[start].size()))];

  const double cruise = cfg.straight_policy
                            ? cfg.cruise_speed_min
                            : rng.uniform(cfg.cruise_speed_min, cfg.cruise_speed_max);

  UnicycleState s;
  s.pos = graph.nodes[start];
  Vec2 dir = unit_dir(graph.nodes[start], graph.nodes[first_target]);
  s.heading = std::atan2(dir.y, dir.x);
  s.speed = cfg.straight_policy ? cruise : 0.0;

  int prev_node = start;
  int target_node = first_target;
  Vec2 target = cfg.straight_policy ? s.pos + dir * 1e6 : graph.nodes[target_node];

  const int steps_per_emit = std::max(1, static_cast<int>(std::lround(cfg.emit_dt / cfg.sim_dt)));
  const int total_emits = static_cast<int>(std::lround(cfg.duration_s / cfg.emit_dt));

  out.trajectory.dt = cfg.emit_dt;
  out.trajectory.positions.push_back(s.pos);

  double stop_until_s = -1.0;
  double now_s = 0.0;
  double stuck_s = 0.0;

  for (int emit = 1; emit <= total_emits; ++emit) {
    if (!cfg.straight_policy) {
      s.heading = wrap_angle(s.heading + rng.normal() * cfg.heading_noise);
      if (stop_until_s < now_s && rng.uniform() < cfg.stop_prob) {
        stop_until_s = now_s + rng.uniform(cfg.stop_min_s, cfg.stop_max_s);
      }
    }
    for (int sub = 0; sub < steps_per_emit; ++sub) {
      // Edge hand-off when close to the target junction.
      if (!cfg.straight_policy && (s.pos - target).norm() < cfg.junction_capture) {
        const auto& nbrs = graph.adjacency[target_node];
        const Vec2 incoming = unit_dir(graph.nodes[prev_node], graph.nodes[target_node]);
        std::vector<int> options;
        JunctionEvent ev;
        ev.time_index = emit;
        for (int nb : nbrs) {
          if (nb == prev_node && nbrs.size() > 1) continue;
          options.push_back(nb);
          switch (classify_turn(incoming, unit_dir(graph.nodes[target_node], graph.nodes[nb]))) {
            case Turn::kLeft: ev.opt_left = true; break;
            case Turn::kRight: ev.opt_right = true; break;
            case Turn::kStraight: ev.opt_straight = true; break;
            case Turn::kBack: break;
          }
        }
        if (options.empty()) return {false, "dead-end junction with no exits"};
        const int next = options[rng.uniform_int(static_cast<int>(options.size()))];
        out.events.push_back(ev);
        prev_node = target_node;
        target_node = next;
        target = graph.nodes[target_node];
      }

      const Vec2 to_target = target - s.pos;
      const double desired = std::atan2(to_target.y, to_target.x);
      const double err = wrap_angle(desired - s.heading);
      if (!cfg.straight_policy) {
        const double turn = std::clamp(3.0 * err, -cfg.max_turn_rate, cfg.max_turn_rate);
        s.heading = wrap_angle(s.heading + turn * cfg.sim_dt);
      }

      double target_speed = cruise;
      if (!cfg.straight_policy) {
        if (std::fabs(err) > 0.3) target_speed = cfg.turn_slow_speed;
        if (now_s < stop_until_s) target_speed = 0.0;
      }
      target_speed = std::min(target_speed, cfg.max_speed);
      const double dv = std::clamp(target_speed - s.speed, -cfg.accel * cfg.sim_dt, cfg.accel * cfg.sim_dt);
      s.speed = cfg.straight_policy ? cruise : s.speed + dv;

      const Vec2 step{std::cos(s.heading) * s.speed * cfg.sim_dt,
                      std::sin(s.heading) * s.speed * cfg.sim_dt};
      const Vec2 candidate = s.pos + step;
      if (cfg.straight_policy || world.traversable_at(candidate)) {
        s.pos = candidate;
        stuck_s = 0.0;
      } else {
        s.speed = 0.0;  // blocked; steering will recover toward the target
        stuck_s += cfg.sim_dt;
        if (stuck_s > 5.0) return {false, "vehicle wedged against an obstacle"};
      }
      now_s += cfg.sim_dt;
    }
    if (!cfg.straight_policy && !world.traversable_at(s.pos)) {
      return {false, "emitted waypoint off the traversable mask"};
    }
    out.trajectory.positions.push_back(s.pos);
  }
  return {true, ""};
}

}  // namespace

DriveResult drive_scenarios(const GeneratedWorld& gw, int n_runs, std::uint64_t seed,
                            const DriveConfig& cfg) {
  DriveResult result;
  for (int r = 0; r < n_runs; ++r) {
    Rng rng(derive_seed(seed, 0x5200 + static_cast<std::uint64_t>(r)));
    DriveRun run;
    char buf[32];
    std::snprintf(buf, sizeof buf, "run_%03d", r);
    run.id = buf;
    const RunOutcome outcome = simulate_run(gw, cfg, rng, run);
    if (outcome.ok) {
      result.runs.push_back(std::move(run));
    } else {
      result.skipped.push_back(run.id + ": " + outcome.reason);
    }
  }
  return result;
}

}  // namespace intent
