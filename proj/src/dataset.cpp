#include "intent/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include <nlohmann/json.hpp>

#include "intent/errors.hpp"
#include "intent/rng.hpp"

namespace intent {

namespace {

// Heading at the current step: direction of the most recent nonzero motion.
double heading_from_displacements(const std::vector<Vec2>& world_disps) {
  for (auto it = world_disps.rbegin(); it != world_disps.rend(); ++it) {
    if (it->norm() > 1e-12) return std::atan2(it->y, it->x);
  }
  return 0.0;
}

std::string fmt_g9(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

}  // namespace

std::vector<TrainInstance> window_log(const Trajectory& traj, const std::string& log_id) {
  traj.validate();
  check_same_dt(traj.dt, kTimeStep);
  std::vector<TrainInstance> out;
  const int len = static_cast<int>(traj.length());
  const int window = kPastSteps + kFutureSteps + 1;
  if (len < window) return out;

  out.reserve(len - window + 1);
  for (int s = 0; s + window <= len; ++s) {
    const int t = s + kPastSteps;
    std::vector<Vec2> past_world(kPastSteps), future_world(kFutureSteps);
    for (int i = 0; i < kPastSteps; ++i) {
      past_world[i] = traj.positions[s + i + 1] - traj.positions[s + i];
    }
    for (int i = 0; i < kFutureSteps; ++i) {
      future_world[i] = traj.positions[t + i + 1] - traj.positions[t + i];
    }
    TrainInstance inst;
    inst.log_id = log_id;
    inst.window_start = s;
    inst.agent_pose = Pose2D(traj.positions[t], heading_from_displacements(past_world));
    inst.past.dt = inst.future.dt = traj.dt;
    inst.past.displacements.resize(kPastSteps);
    inst.future.displacements.resize(kFutureSteps);
    for (int i = 0; i < kPastSteps; ++i) {
      inst.past.displacements[i] = rotate(past_world[i], -inst.agent_pose.heading);
    }
    for (int i = 0; i < kFutureSteps; ++i) {
      inst.future.displacements[i] = rotate(future_world[i], -inst.agent_pose.heading);
    }
    out.push_back(std::move(inst));
  }
  return out;
}

Trajectory past_world_trajectory(const TrainInstance& inst) {
  Trajectory traj;
  traj.dt = inst.past.dt;
  traj.positions.assign(kPastSteps + 1, Vec2{});
  traj.positions[kPastSteps] = inst.agent_pose.position;
  for (int i = kPastSteps - 1; i >= 0; --i) {
    const Vec2 d = rotate(inst.past.displacements[i], inst.agent_pose.heading);
    traj.positions[i] = traj.positions[i + 1] - d;
  }
  return traj;
}

Trajectory future_world_trajectory(const TrainInstance& inst) {
  return transform_to_world(inst.future, inst.agent_pose);
}

void tag_tjunction_instances(std::vector<TrainInstance>& instances,
                             const std::vector<JunctionEvent>& events) {
  // The decision must land early enough in the future window for the turn to
  // develop a clear lateral endpoint: t_dec in [t+1, t+5].
  for (TrainInstance& inst : instances) {
    const int t = inst.window_start + kPastSteps;
    for (const JunctionEvent& ev : events) {
      if (ev.opt_left && ev.opt_right && ev.time_index >= t + 1 && ev.time_index <= t + 5) {
        inst.tjunction = true;
        break;
      }
    }
  }
}

DatasetSplit split_dataset(const std::vector<std::vector<TrainInstance>>& per_log,
                           const SplitRatios& ratios, std::uint64_t seed) {
  const int n = static_cast<int>(per_log.size());
  if (n < 3) {
    throw data_error("split_dataset: need at least 3 source logs, got " + std::to_string(n));
  }
  if (ratios.train < 1 || ratios.val < 1 || ratios.test < 1) {
    throw std::invalid_argument("split_dataset: ratios must be >= 1");
  }
  const int total = ratios.train + ratios.val + ratios.test;
  int counts[3] = {n * ratios.train / total, n * ratios.val / total, n * ratios.test / total};
  int assigned = counts[0] + counts[1] + counts[2];
  for (int k = 0; assigned < n; k = (k + 1) % 3) {
    ++counts[k];
    ++assigned;
  }
  // Every split gets at least one whole log.
  for (int k = 0; k < 3; ++k) {
    while (counts[k] == 0) {
      int largest = 0;
      for (int j = 1; j < 3; ++j) {
        if (counts[j] > counts[largest]) largest = j;
      }
      --counts[largest];
      ++counts[k];
    }
  }

  std::vector<int> order(n);
  for (int i = 0; i < n; ++i) order[i] = i;
  Rng rng(seed);
  for (int i = n - 1; i > 0; --i) std::swap(order[i], order[rng.uniform_int(i + 1)]);

  DatasetSplit split;
  split.split_seed = seed;
  int pos = 0;
  const auto take = [&](std::vector<TrainInstance>& dst, int count) {
    for (int k = 0; k < count; ++k, ++pos) {
      const auto& log = per_log[order[pos]];
      dst.insert(dst.end(), log.begin(), log.end());
    }
  };
  take(split.train, counts[0]);
  take(split.val, counts[1]);
  take(split.test, counts[2]);
  return split;
}

void save_trajectory_csv(const Trajectory& traj, const std::string& path) {
  traj.validate();
  std::ostringstream out;
  out << "t,x,y\n";
  for (std::size_t i = 0; i < traj.length(); ++i) {
    out << fmt_g9(static_cast<double>(i) * traj.dt) << ',' << fmt_g9(traj.positions[i].x) << ','
        << fmt_g9(traj.positions[i].y) << '\n';
  }
  std::ofstream file(path, std::ios::binary | std::ios::trunc);
  if (!file) throw data_error("cannot write trajectory csv: " + path);
  const std::string s = out.str();
  file.write(s.data(), static_cast<std::streamsize>(s.size()));
}

Trajectory load_trajectory_csv(const std::string& path) {
  std::ifstream file(path);
  if (!file) throw data_error("cannot open trajectory csv: " + path);
  std::string line;
  if (!std::getline(file, line) || line != "t,x,y") {
    throw data_error("trajectory csv: missing 't,x,y' header in " + path);
  }
  Trajectory traj;
  std::vector<double> times;
  while (std::getline(file, line)) {
    if (line.empty()) continue;
    double t, x, y;
    if (std::sscanf(line.c_str(), "%lf,%lf,%lf", &t, &x, &y) != 3) {
      throw data_error("trajectory csv: bad row '" + line + "' in " + path);
    }
    times.push_back(t);
    traj.positions.push_back({x, y});
  }
  if (traj.positions.empty()) throw data_error("trajectory csv: no rows in " + path);
  if (times.size() >= 2) {
    traj.dt = times[1] - times[0];
    for (std::size_t i = 1; i < times.size(); ++i) {
      if (std::fabs(times[i] - times[i - 1] - traj.dt) > 1e-6) {
        throw data_error("trajectory csv: non-uniform sampling in " + path);
      }
    }
  }
  traj.validate();
  return traj;
}

void save_manifest(const std::vector<ManifestEntry>& entries, const std::string& path) {
  std::ostringstream out;
  for (const ManifestEntry& e : entries) {
    nlohmann::json j{{"log", e.log_id},
                     {"start", e.window_start},
                     {"split", e.split},
                     {"tjunction", e.tjunction}};
    if (e.scene_id.empty()) {
      j["scene"] = nullptr;
    } else {
      j["scene"] = e.scene_id;
    }
    out << j.dump() << '\n';
  }
  std::ofstream file(path, std::ios::binary | std::ios::trunc);
  if (!file) throw data_error("cannot write manifest: " + path);
  const std::string s = out.str();
  file.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::vector<ManifestEntry> load_manifest(const std::string& path) {
  std::ifstream file(path);
  if (!file) throw data_error("cannot open manifest: " + path);
  std::vector<ManifestEntry> entries;
  std::string line;
  int line_no = 0;
  while (std::getline(file, line)) {
    ++line_no;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw data_error("manifest " + path + " line " + std::to_string(line_no) + ": " + e.what());
    }
    ManifestEntry e;
    e.log_id = j.at("log").get<std::string>();
    e.window_start = j.at("start").get<int>();
    e.split = j.at("split").get<std::string>();
    e.tjunction = j.value("tjunction", false);
    if (j.contains("scene") && !j.at("scene").is_null()) e.scene_id = j.at("scene").get<std::string>();
    if (e.split != "train" && e.split != "val" && e.split != "test") {
      throw data_error("manifest " + path + " line " + std::to_string(line_no) +
                       ": unknown split '" + e.split + "'");
    }
    entries.push_back(std::move(e));
  }
  return entries;
}

Dataset load_dataset(const std::string& dir) {
  namespace fs = std::filesystem;
  const std::string manifest_path = (fs::path(dir) / "manifest.jsonl").string();
  const std::vector<ManifestEntry> entries = load_manifest(manifest_path);
  if (entries.empty()) throw data_error("dataset manifest is empty: " + manifest_path);

  std::map<std::string, std::vector<TrainInstance>> windows_by_log;
  for (const ManifestEntry& e : entries) {
    if (windows_by_log.count(e.log_id)) continue;
    const std::string log_path = (fs::path(dir) / "logs" / (e.log_id + ".csv")).string();
    windows_by_log[e.log_id] = window_log(load_trajectory_csv(log_path), e.log_id);
  }

  Dataset ds;
  ds.root = dir;
  ds.manifest_hash = fnv1a64_file(manifest_path);
  ds.split.split_seed = 0;
  for (const ManifestEntry& e : entries) {
    const auto& windows = windows_by_log.at(e.log_id);
    if (e.window_start < 0 || e.window_start >= static_cast<int>(windows.size())) {
      throw data_error("manifest references window " + e.log_id + ":" +
                       std::to_string(e.window_start) + " outside the log");
    }
    TrainInstance inst = windows[e.window_start];
    inst.scene_id = e.scene_id;
    inst.tjunction = e.tjunction;
    if (e.split == "train") {
      ds.split.train.push_back(std::move(inst));
    } else if (e.split == "val") {
      ds.split.val.push_back(std::move(inst));
    } else {
      ds.split.test.push_back(std::move(inst));
    }
  }
  return ds;
}

std::uint64_t fnv1a64_file(const std::string& path) {
  std::ifstream file(path, std::ios::binary);
  if (!file) throw data_error("cannot open file for hashing: " + path);
  std::uint64_t h = 0xcbf29ce484222325ULL;
  char buf[4096];
  while (file.read(buf, sizeof buf) || file.gcount() > 0) {
    const std::streamsize n = file.gcount();
    for (std::streamsize i = 0; i < n; ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 0x100000001b3ULL;
    }
  }
  return h;
}

}  // namespace intent
