#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "intent/dataset.hpp"
#include "intent/fusion.hpp"
#include "intent/gan.hpp"
#include "intent/scene.hpp"

namespace intent {

// Mean Euclidean waypoint distance over equal-length trajectories.
double ade(const Trajectory& pred, const Trajectory& truth);
// Euclidean distance between the final waypoints.
double fde(const Trajectory& pred, const Trajectory& truth);

// A test instance paired with its captured scene.
struct EvalItem {
  TrainInstance instance;
  SegMap seg;
  CameraModel cam;
};

// Loads every instance of the chosen split that has a scene on disk. Throws
// if none do.
std::vector<EvalItem> load_eval_items(const Dataset& dataset, const std::string& split);

enum class Method { kNoScene = 0, kFused = 1 };
inline constexpr std::array<const char*, 2> kMethodNames = {"no_scene", "fused"};
inline constexpr std::array<const char*, 3> kSelectionNames = {"random", "mean", "min_k"};

// All twelve Table-style cells (2 methods x 3 selections x 2 metrics) with
// per-instance values, aggregate means, and improvement percentages. Both
// methods consume the same per-instance noise stream, so fusion filters
// exactly the proposals the baseline used.
struct MetricReport {
  int k = 20;
  std::uint64_t eval_seed = 0;
  int n_instances = 0;
  // [method][selection] -> per-instance values
  std::array<std::array<std::vector<double>, 3>, 2> ade_values, fde_values;
  std::array<std::array<double, 3>, 2> ade_mean{}, fde_mean{};
  std::array<double, 3> ade_improvement_pct{}, fde_improvement_pct{};
  // Fraction of baseline proposals with at least one waypoint on a
  // sub-0.5-traversability pixel (visible, outside the footprint).
  double baseline_offroad_fraction = 0.0;
  double fallback_fraction = 0.0;  // fused calls that needed the fallback

  bool all_finite() const;
};

MetricReport table_report(const GanModel& model, const std::vector<EvalItem>& items,
                          const FusionConfig& fusion_cfg, std::uint64_t eval_seed, int threads = 0);

// Best-of-k curves for k = 1..k_max under nested sampling: entry k-1 holds the
// mean over instances of the minimum over the first k samples.
struct MinKCurve {
  std::vector<double> ade_baseline, ade_fused, fde_baseline, fde_fused;
};

MinKCurve min_k_curve(const GanModel& model, const std::vector<EvalItem>& items, int k_max,
                      int max_proposals, std::uint64_t eval_seed, int threads = 0);

// CSV mirroring the summary table layout; JSON carries the full report.
std::string render_report_csv(const MetricReport& report);
std::string render_report_json(const MetricReport& report);
MetricReport parse_report_json(const std::string& text);
std::string render_curve_csv(const MinKCurve& curve);

}  // namespace intent
