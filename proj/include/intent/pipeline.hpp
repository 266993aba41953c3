#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "intent/dataset.hpp"
#include "intent/driver.hpp"
#include "intent/fusion.hpp"
#include "intent/gan.hpp"
#include "intent/metrics.hpp"
#include "intent/scene.hpp"
#include "intent/world.hpp"

namespace intent {

// --- gen-dataset ---

struct GenDatasetConfig {
  std::string out_dir;
  std::uint64_t seed = 7;
  int n_runs = 6;
  WorldConfig world;
  DriveConfig drive;
  CameraRigConfig rig;
  double label_noise = 0.1;
  SplitRatios ratios;
  // Which splits get rendered scenes: "none", "all", or a comma list of
  // split names ("test", "val,test", ...).
  std::string scene_splits = "test";
};

struct GenDatasetResult {
  int n_train = 0, n_val = 0, n_test = 0;
  int n_runs_kept = 0;
  std::vector<std::string> skipped_runs;
  std::string manifest_path;
};

// Writes world.grid, logs/*.csv, scenes/*.{segmap,cam.json}, manifest.jsonl.
// Byte-identical output for identical configs.
GenDatasetResult run_gen_dataset(const GenDatasetConfig& cfg);

// --- train ---

struct TrainPipelineConfig {
  std::string dataset_dir;
  std::string out_dir;
  GanConfig gan;
  TrainConfig train;
  std::string resume_from;  // checkpoint prefix; empty = fresh start
};

struct TrainPipelineResult {
  std::string checkpoint_prefix;
  std::string metrics_csv_path;
  std::vector<EpochMetrics> history;
  bool aborted = false;
  std::string abort_reason;
  int epochs_completed = 0;
};

// Trains (or resumes) and writes out_dir/checkpoint.{nnp,json} after every
// epoch plus out_dir/metrics.csv. On a numerical abort the last completed
// epoch's checkpoint is left in place.
TrainPipelineResult run_train(const TrainPipelineConfig& cfg);

// --- predict ---

struct PredictPipelineConfig {
  std::string dataset_dir;
  std::string checkpoint_prefix;
  std::string instance_id;  // "<log>:<window_start>"
  std::string out_dir;
  FusionConfig fusion;
};

struct PredictPipelineResult {
  PredictionSet pred;
  std::string jsonl_path;
  std::string overlay_path;
};

// Fuses one instance and writes the prediction JSONL plus a PPM overlay
// (past, ground truth, accepted, rejected, accepted-mean).
PredictPipelineResult run_predict(const PredictPipelineConfig& cfg);

// --- evaluate ---

struct EvaluatePipelineConfig {
  std::string dataset_dir;
  std::string checkpoint_prefix;
  std::string out_dir;
  int k = 20;
  int k_max = 20;
  int max_proposals = 2000;
  double footprint_radius = 0.5;
  std::uint64_t seed = 99;
  int threads = 0;
};

struct EvaluatePipelineResult {
  MetricReport report;
  MinKCurve curve;
  std::string table_csv_path;
  std::string report_json_path;
  std::string curve_csv_path;
};

// Runs the paired no-scene/fused comparison over the test split and writes
// table.csv, report.json, and minkcurve.csv. Throws numeric_error if any
// metric is non-finite.
EvaluatePipelineResult run_evaluate(const EvaluatePipelineConfig& cfg);

// Config (de)serialization for --config files and the resolved-config echo.
nlohmann::json to_json(const GenDatasetConfig& cfg);
nlohmann::json to_json(const TrainPipelineConfig& cfg);
nlohmann::json to_json(const PredictPipelineConfig& cfg);
nlohmann::json to_json(const EvaluatePipelineConfig& cfg);
void from_json_into(const nlohmann::json& j, GenDatasetConfig& cfg);
void from_json_into(const nlohmann::json& j, TrainPipelineConfig& cfg);
void from_json_into(const nlohmann::json& j, PredictPipelineConfig& cfg);
void from_json_into(const nlohmann::json& j, EvaluatePipelineConfig& cfg);

}  // namespace intent
