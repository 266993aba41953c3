#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "intent/driver.hpp"
#include "intent/trajectory.hpp"

namespace intent {

inline constexpr int kPastSteps = 8;    // M
inline constexpr int kFutureSteps = 8;  // N

// One supervised example: 8 observed and 8 future displacements, both rotated
// into the agent frame at the current time step (heading along +x), plus the
// world pose that undoes the rotation.
struct TrainInstance {
  RelativeTrajectory past;    // length 8, agent frame
  RelativeTrajectory future;  // length 8, agent frame
  Pose2D agent_pose;          // world pose at the current time step
  std::string log_id;
  int window_start = 0;       // index of the first past position in the log
  std::string scene_id;       // empty when no scene was captured
  bool tjunction = false;     // future crosses a junction with left+right options

  std::string id() const { return log_id + ":" + std::to_string(window_start); }
};

// Stride-1 sliding windows over a 0.5 s log. Logs shorter than M + N + 1
// positions yield an empty list.
std::vector<TrainInstance> window_log(const Trajectory& traj, const std::string& log_id = "");

// World-frame reconstruction of an instance: 9 past positions (t-8..t) and
// the 8 future positions (t+1..t+8).
Trajectory past_world_trajectory(const TrainInstance& inst);
Trajectory future_world_trajectory(const TrainInstance& inst);

// Marks instances whose future window covers a junction decision offering
// both a left and a right branch.
void tag_tjunction_instances(std::vector<TrainInstance>& instances,
                             const std::vector<JunctionEvent>& events);

struct SplitRatios {
  int train = 4, val = 1, test = 1;
};

struct DatasetSplit {
  std::vector<TrainInstance> train, val, test;
  std::uint64_t split_seed = 0;
};

// Assigns whole logs to splits (never individual windows). Needs at least 3
// logs; every split receives at least one log.
DatasetSplit split_dataset(const std::vector<std::vector<TrainInstance>>& per_log,
                           const SplitRatios& ratios, std::uint64_t seed);

// Trajectory log CSV: header "t,x,y", 9 significant digits, '\n' endings.
void save_trajectory_csv(const Trajectory& traj, const std::string& path);
Trajectory load_trajectory_csv(const std::string& path);

struct ManifestEntry {
  std::string log_id;
  int window_start = 0;
  std::string split;     // "train" | "val" | "test"
  std::string scene_id;  // empty = no scene on disk
  bool tjunction = false;
};

// JSON-lines manifest, one instance per line.
void save_manifest(const std::vector<ManifestEntry>& entries, const std::string& path);
std::vector<ManifestEntry> load_manifest(const std::string& path);

struct Dataset {
  DatasetSplit split;
  std::string root;
  std::uint64_t manifest_hash = 0;
};

// Re-materializes instances from a generated dataset directory by windowing
// the stored logs and applying the manifest's split/scene assignments.
Dataset load_dataset(const std::string& dir);

std::uint64_t fnv1a64_file(const std::string& path);

}  // namespace intent
