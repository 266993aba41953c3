#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "intent/gan.hpp"
#include "intent/scene.hpp"
#include "intent/trajectory.hpp"

namespace intent {

struct FusionConfig {
  int k = 20;
  int max_proposals = 2000;
  std::uint64_t seed = 0;
  double footprint_radius = 0.5;  // meters around the agent scored 1 by fiat
};

// k scene-compliant future trajectories, each accepted with probability equal
// to its traversability score.
struct PredictionSet {
  std::vector<Trajectory> accepted;  // world frame
  std::vector<double> scores;        // scene score of each accepted trajectory
  long proposals_drawn = 0;
  double acceptance_rate = 0.0;  // rejection-accepted count / proposals drawn
  bool fallback_used = false;
  std::uint64_t seed = 0;
};

// Core sampler, separated from the GAN so stub proposal distributions can
// drive it directly. draw_proposal is consumed sequentially; scores must lie
// in [0, 1]. If the proposal budget is exhausted before k acceptances, the
// remainder is filled with the highest-scoring drawn proposals (positive
// score first) and fallback_used is set.
PredictionSet rejection_sample(const std::function<Trajectory()>& draw_proposal,
                               const std::function<double(const Trajectory&)>& score, int k,
                               int max_proposals, std::uint64_t seed,
                               std::vector<Trajectory>* rejected_out = nullptr);

// Draws proposals G(z | past) from the seeded noise stream (identical to
// sample_k with the same seed), maps them to the world frame, and accepts
// each with probability trajectory_prob.
PredictionSet fuse(const GanModel& model, const RelativeTrajectory& past, const Pose2D& agent,
                   const SegMap& seg, const CameraModel& cam, const FusionConfig& cfg,
                   std::vector<Trajectory>* rejected_out = nullptr);

enum class Selection { kRandom, kMean, kMinK };

// random: one accepted sample drawn uniformly (seeded). mean: per-step mean
// across accepted samples. min_k: accepted sample with the lowest ADE against
// ground_truth (required for this strategy only).
Trajectory select(const PredictionSet& pred, Selection strategy, std::uint64_t seed = 0,
                  const Trajectory* ground_truth = nullptr);

// JSON-lines export: a meta line followed by one line per accepted trajectory
// (waypoints, score, index).
void save_prediction_set(const PredictionSet& pred, const std::string& path);
PredictionSet load_prediction_set(const std::string& path);

}  // namespace intent
