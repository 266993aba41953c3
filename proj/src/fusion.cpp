#include "intent/fusion.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include <nlohmann/json.hpp>

#include "intent/errors.hpp"
#include "intent/rng.hpp"

namespace intent {

namespace {

constexpr std::uint64_t kAcceptStreamSalt = 0xACCE97ULL;

double ade_between(const Trajectory& a, const Trajectory& b) {
  double sum = 0.0;
  for (std::size_t i = 0; i < a.length(); ++i) sum += (a.positions[i] - b.positions[i]).norm();
  return sum / static_cast<double>(a.length());
}

}  // namespace

PredictionSet rejection_sample(const std::function<Trajectory()>& draw_proposal,
                               const std::function<double(const Trajectory&)>& score, int k,
                               int max_proposals, std::uint64_t seed,
                               std::vector<Trajectory>* rejected_out) {
  if (k < 1) throw std::invalid_argument("rejection_sample: k must be >= 1");
  if (max_proposals < k) throw std::invalid_argument("rejection_sample: max_proposals must be >= k");

  // The acceptance stream is separate from the proposal stream so proposal j
  // of a fuse call matches sample j of sample_k under the same seed.
  Rng accept_rng(derive_seed(seed, kAcceptStreamSalt));

  PredictionSet out;
  out.seed = seed;

  struct Drawn {
    Trajectory traj;
    double s;
    bool accepted;
  };
  std::vector<Drawn> drawn;
  drawn.reserve(max_proposals);

  long n_accepted = 0;
  while (static_cast<int>(n_accepted) < k && out.proposals_drawn < max_proposals) {
    Trajectory traj = draw_proposal();
    ++out.proposals_drawn;
    const double s = std::clamp(score(traj), 0.0, 1.0);
    const double u = accept_rng.uniform();
    const bool accepted = u < s;
    if (accepted) {
      out.accepted.push_back(traj);
      out.scores.push_back(s);
      ++n_accepted;
    } else if (rejected_out != nullptr) {
      rejected_out->push_back(traj);
    }
    drawn.push_back({std::move(traj), s, accepted});
  }
  out.acceptance_rate = static_cast<double>(n_accepted) / static_cast<double>(out.proposals_drawn);

  if (static_cast<int>(n_accepted) < k) {
    // Budget exhausted: fill with the best-scoring unaccepted proposals,
    // positive scores first; an all-zero scene degenerates to top-k by score.
    out.fallback_used = true;
    std::vector<int> order;
    for (int i = 0; i < static_cast<int>(drawn.size()); ++i) {
      if (!drawn[i].accepted) order.push_back(i);
    }
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return drawn[a].s > drawn[b].s; });
    for (int idx : order) {
      if (static_cast<int>(out.accepted.size()) >= k) break;
      out.accepted.push_back(drawn[idx].traj);
      out.scores.push_back(drawn[idx].s);
    }
  }
  return out;
}

PredictionSet fuse(const GanModel& model, const RelativeTrajectory& past, const Pose2D& agent,
                   const SegMap& seg, const CameraModel& cam, const FusionConfig& cfg,
                   std::vector<Trajectory>* rejected_out) {
  const FootprintDisk foot{agent.position, cfg.footprint_radius};
  Rng noise_rng(cfg.seed);
  const auto draw = [&]() {
    const RelativeTrajectory rel = generate(model, past, draw_noise(noise_rng, model.cfg.noise_dim));
    return transform_to_world(rel, agent);
  };
  const auto score = [&](const Trajectory& traj) { return trajectory_prob(traj, seg, cam, foot); };
  return rejection_sample(draw, score, cfg.k, cfg.max_proposals, cfg.seed, rejected_out);
}

Trajectory select(const PredictionSet& pred, Selection strategy, std::uint64_t seed,
                  const Trajectory* ground_truth) {
  if (pred.accepted.empty()) throw std::invalid_argument("select: empty prediction set");
  switch (strategy) {
    case Selection::kRandom: {
      Rng rng(seed);
      return pred.accepted[rng.uniform_int(static_cast<int>(pred.accepted.size()))];
    }
    case Selection::kMean: {
      // All accepted trajectories share the agent origin, so the per-step mean
      // of positions equals re-accumulated mean displacements.
      const std::size_t len = pred.accepted.front().length();
      for (const Trajectory& t : pred.accepted) {
        if (t.length() != len) throw std::invalid_argument("select: ragged prediction set");
      }
      Trajectory mean;
      mean.dt = pred.accepted.front().dt;
      mean.positions.assign(len, Vec2{});
      const double inv = 1.0 / static_cast<double>(pred.accepted.size());
      for (const Trajectory& t : pred.accepted) {
        for (std::size_t i = 0; i < len; ++i) mean.positions[i] += t.positions[i] * inv;
      }
      return mean;
    }
    case Selection::kMinK: {
      if (ground_truth == nullptr) {
        throw std::invalid_argument("select: min_k strategy requires ground truth");
      }
      int best = 0;
      double best_ade = std::numeric_limits<double>::infinity();
      for (int i = 0; i < static_cast<int>(pred.accepted.size()); ++i) {
        if (pred.accepted[i].length() != ground_truth->length()) {
          throw std::invalid_argument("select: prediction/ground-truth length mismatch");
        }
        const double a = ade_between(pred.accepted[i], *ground_truth);
        if (a < best_ade) {
          best_ade = a;
          best = i;
        }
      }
      return pred.accepted[best];
    }
  }
  throw std::invalid_argument("select: unknown strategy");
}

void save_prediction_set(const PredictionSet& pred, const std::string& path) {
  std::ostringstream out;
  nlohmann::json meta{{"type", "meta"},
                      {"k", pred.accepted.size()},
                      {"proposals_drawn", pred.proposals_drawn},
                      {"acceptance_rate", pred.acceptance_rate},
                      {"fallback_used", pred.fallback_used},
                      {"seed", pred.seed}};
  out << meta.dump() << '\n';
  for (std::size_t i = 0; i < pred.accepted.size(); ++i) {
    nlohmann::json waypoints = nlohmann::json::array();
    for (const Vec2& p : pred.accepted[i].positions) waypoints.push_back({p.x, p.y});
    nlohmann::json j{{"index", i},
                     {"score", pred.scores[i]},
                     {"dt", pred.accepted[i].dt},
                     {"waypoints", waypoints}};
    out << j.dump() << '\n';
  }
  std::ofstream file(path, std::ios::binary | std::ios::trunc);
  if (!file) throw data_error("cannot write prediction set: " + path);
  const std::string s = out.str();
  file.write(s.data(), static_cast<std::streamsize>(s.size()));
}

PredictionSet load_prediction_set(const std::string& path) {
  std::ifstream file(path);
  if (!file) throw data_error("cannot open prediction set: " + path);
  PredictionSet pred;
  std::string line;
  bool have_meta = false;
  while (std::getline(file, line)) {
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw data_error("corrupt prediction set " + path + ": " + e.what());
    }
    if (j.value("type", "") == "meta") {
      pred.proposals_drawn = j.at("proposals_drawn").get<long>();
      pred.acceptance_rate = j.at("acceptance_rate").get<double>();
      pred.fallback_used = j.at("fallback_used").get<bool>();
      pred.seed = j.at("seed").get<std::uint64_t>();
      have_meta = true;
      continue;
    }
    Trajectory traj;
    traj.dt = j.at("dt").get<double>();
    for (const auto& wp : j.at("waypoints")) {
      traj.positions.push_back({wp.at(0).get<double>(), wp.at(1).get<double>()});
    }
    pred.accepted.push_back(std::move(traj));
    pred.scores.push_back(j.at("score").get<double>());
  }
  if (!have_meta) throw data_error("prediction set missing meta line: " + path);
  return pred;
}

}  // namespace intent
