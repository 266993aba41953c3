#include "intent/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "intent/errors.hpp"
#include "intent/parallel.hpp"

namespace fs = std::filesystem;

namespace intent {

namespace {

void write_text(const std::string& path, const std::string& text) {
  std::ofstream file(path, std::ios::binary | std::ios::trunc);
  if (!file) throw data_error("cannot write " + path);
  file.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!file) throw data_error("failed writing " + path);
}

std::string scene_stem(const std::string& log_id, int window_start) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "_%05d", window_start);
  return "scenes/" + log_id + buf;
}

bool split_wants_scenes(const std::string& scene_splits, const std::string& split) {
  if (scene_splits == "none" || scene_splits.empty()) return false;
  if (scene_splits == "all") return true;
  std::stringstream ss(scene_splits);
  std::string token;
  while (std::getline(ss, token, ',')) {
    if (token == split) return true;
  }
  return false;
}

std::string fmt_g9(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

}  // namespace

GenDatasetResult run_gen_dataset(const GenDatasetConfig& cfg) {
  if (cfg.out_dir.empty()) throw std::invalid_argument("gen-dataset: output directory required");
  if (cfg.label_noise < 0.0 || cfg.label_noise >= 1.0) {
    throw std::invalid_argument("gen-dataset: label_noise must lie in [0, 1)");
  }
  fs::create_directories(fs::path(cfg.out_dir) / "logs");
  fs::create_directories(fs::path(cfg.out_dir) / "scenes");

  const GeneratedWorld gw = generate_world(cfg.seed, cfg.world);
  save_world_grid(gw.world, (fs::path(cfg.out_dir) / "world.grid").string());

  const DriveResult drive = drive_scenarios(gw, cfg.n_runs, derive_seed(cfg.seed, 0xD21), cfg.drive);
  if (static_cast<int>(drive.runs.size()) < 3) {
    throw data_error("gen-dataset: only " + std::to_string(drive.runs.size()) +
                     " runs survived (need >= 3); skipped: " +
                     std::to_string(drive.skipped.size()));
  }

  // Window the stored CSVs (not the in-memory runs) so training sees exactly
  // what later loads will see.
  std::vector<std::vector<TrainInstance>> groups;
  for (const DriveRun& run : drive.runs) {
    const std::string log_path = (fs::path(cfg.out_dir) / "logs" / (run.id + ".csv")).string();
    save_trajectory_csv(run.trajectory, log_path);
    std::vector<TrainInstance> windows = window_log(load_trajectory_csv(log_path), run.id);
    tag_tjunction_instances(windows, run.events);
    groups.push_back(std::move(windows));
  }

  DatasetSplit split = split_dataset(groups, cfg.ratios, derive_seed(cfg.seed, 0x5711));

  struct SceneJob {
    TrainInstance* inst;
  };
  std::vector<SceneJob> jobs;
  const auto stage = [&](std::vector<TrainInstance>& instances, const std::string& name) {
    if (!split_wants_scenes(cfg.scene_splits, name)) return;
    for (TrainInstance& inst : instances) {
      inst.scene_id = scene_stem(inst.log_id, inst.window_start);
      jobs.push_back({&inst});
    }
  };
  stage(split.train, "train");
  stage(split.val, "val");
  stage(split.test, "test");

  parallel_for(static_cast<int>(jobs.size()), 0, [&](int i) {
    TrainInstance& inst = *jobs[i].inst;
    const CameraModel cam = make_onboard_camera(inst.agent_pose, cfg.rig);
    const SegMap seg = render_synthetic_segmap(gw.world, cam, cfg.label_noise);
    const std::string base = (fs::path(cfg.out_dir) / inst.scene_id).string();
    save_segmap(seg, base + ".segmap");
    save_camera(cam, base + ".cam.json");
  });

  std::vector<ManifestEntry> entries;
  const auto emit = [&](const std::vector<TrainInstance>& instances, const std::string& name) {
    for (const TrainInstance& inst : instances) {
      entries.push_back({inst.log_id, inst.window_start, name, inst.scene_id, inst.tjunction});
    }
  };
  emit(split.train, "train");
  emit(split.val, "val");
  emit(split.test, "test");
  std::sort(entries.begin(), entries.end(), [](const ManifestEntry& a, const ManifestEntry& b) {
    if (a.log_id != b.log_id) return a.log_id < b.log_id;
    return a.window_start < b.window_start;
  });

  GenDatasetResult result;
  result.manifest_path = (fs::path(cfg.out_dir) / "manifest.jsonl").string();
  save_manifest(entries, result.manifest_path);
  result.n_train = static_cast<int>(split.train.size());
  result.n_val = static_cast<int>(split.val.size());
  result.n_test = static_cast<int>(split.test.size());
  result.n_runs_kept = static_cast<int>(drive.runs.size());
  result.skipped_runs = drive.skipped;
  return result;
}

TrainPipelineResult run_train(const TrainPipelineConfig& cfg) {
  const Dataset ds = load_dataset(cfg.dataset_dir);
  fs::create_directories(cfg.out_dir);

  TrainPipelineResult result;
  result.checkpoint_prefix = (fs::path(cfg.out_dir) / "checkpoint").string();
  result.metrics_csv_path = (fs::path(cfg.out_dir) / "metrics.csv").string();

  GanModel model;
  nn::AdamState g_opt, d_opt;
  TrainConfig effective = cfg.train;
  int start_epoch = 0;

  if (!cfg.resume_from.empty()) {
    Checkpoint ckpt = load_checkpoint(cfg.resume_from);
    if (ckpt.manifest_hash != ds.manifest_hash) {
      throw data_error("resume checkpoint " + cfg.resume_from +
                       " was trained on a different dataset (manifest hash mismatch)");
    }
    model = std::move(ckpt.model);
    g_opt = std::move(ckpt.g_opt);
    d_opt = std::move(ckpt.d_opt);
    start_epoch = ckpt.epoch;
    effective = ckpt.train_cfg;
    effective.epochs = cfg.train.epochs;
    effective.threads = cfg.train.threads;
  } else {
    model = init_gan(cfg.gan, derive_seed(cfg.train.seed, 0x90DE1));
    const auto gp = model.generator_params();
    const auto dp = model.discriminator_params();
    g_opt = nn::AdamState::init({effective.lr_g, 0.9, 0.999, 1e-8}, {gp.begin(), gp.end()});
    d_opt = nn::AdamState::init({effective.lr_d, 0.9, 0.999, 1e-8}, {dp.begin(), dp.end()});
  }

  const EpochCallback on_epoch = [&](const GanModel& m, const nn::AdamState& g,
                                     const nn::AdamState& d, const EpochMetrics& em) {
    Checkpoint ckpt{m, g, d, em.epoch + 1, effective, ds.manifest_hash};
    save_checkpoint(result.checkpoint_prefix, ckpt);
  };

  const TrainResult tr =
      train_resume(model, g_opt, d_opt, start_epoch, ds.split, effective, on_epoch);
  result.history = tr.history;
  result.aborted = tr.aborted;
  result.abort_reason = tr.abort_reason;
  result.epochs_completed = tr.epochs_completed;

  std::ostringstream csv;
  const bool append = start_epoch > 0 && fs::exists(result.metrics_csv_path);
  if (!append) {
    csv << "epoch,d_loss,g_loss,val_min_k_ade,real_label_min,real_label_max,fake_label_min,"
           "fake_label_max\n";
  }
  for (const EpochMetrics& em : tr.history) {
    csv << em.epoch << ',' << fmt_g9(em.d_loss) << ',' << fmt_g9(em.g_loss) << ','
        << fmt_g9(em.val_min_k_ade) << ',' << fmt_g9(em.real_label_lo) << ','
        << fmt_g9(em.real_label_hi) << ',' << fmt_g9(em.fake_label_lo) << ','
        << fmt_g9(em.fake_label_hi) << '\n';
  }
  if (append) {
    std::ofstream file(result.metrics_csv_path, std::ios::binary | std::ios::app);
    if (!file) throw data_error("cannot append " + result.metrics_csv_path);
    const std::string s = csv.str();
    file.write(s.data(), static_cast<std::streamsize>(s.size()));
  } else {
    write_text(result.metrics_csv_path, csv.str());
  }
  return result;
}

namespace {

const TrainInstance* find_instance(const Dataset& ds, const std::string& id) {
  for (const auto* list : {&ds.split.train, &ds.split.val, &ds.split.test}) {
    for (const TrainInstance& inst : *list) {
      if (inst.id() == id) return &inst;
    }
  }
  return nullptr;
}

std::string sanitize_id(std::string id) {
  std::replace(id.begin(), id.end(), ':', '_');
  return id;
}

}  // namespace

PredictPipelineResult run_predict(const PredictPipelineConfig& cfg) {
  const Dataset ds = load_dataset(cfg.dataset_dir);
  const TrainInstance* inst = find_instance(ds, cfg.instance_id);
  if (inst == nullptr) {
    throw data_error("predict: instance '" + cfg.instance_id + "' not found in " +
                     cfg.dataset_dir);
  }
  if (inst->scene_id.empty()) {
    throw data_error("predict: instance '" + cfg.instance_id + "' has no captured scene");
  }
  const Checkpoint ckpt = load_checkpoint(cfg.checkpoint_prefix);

  const std::string base = (fs::path(ds.root) / inst->scene_id).string();
  const SegMap seg = load_segmap(base + ".segmap");
  const CameraModel cam = load_camera(base + ".cam.json");

  fs::create_directories(cfg.out_dir);
  PredictPipelineResult result;
  std::vector<Trajectory> rejected;
  result.pred = fuse(ckpt.model, inst->past, inst->agent_pose, seg, cam, cfg.fusion, &rejected);

  result.jsonl_path =
      (fs::path(cfg.out_dir) / ("pred_" + sanitize_id(cfg.instance_id) + ".jsonl")).string();
  save_prediction_set(result.pred, result.jsonl_path);

  const Rgb kPast{20, 20, 20};
  const Rgb kTruth{30, 200, 40};
  const Rgb kAccepted{230, 40, 40};
  const Rgb kRejected{60, 90, 230};
  std::vector<std::pair<Trajectory, TrajectoryStyle>> items;
  const std::size_t max_rejected_drawn = 50;
  for (std::size_t i = 0; i < rejected.size() && i < max_rejected_drawn; ++i) {
    items.emplace_back(rejected[i], TrajectoryStyle{kRejected, 1});
  }
  for (const Trajectory& t : result.pred.accepted) {
    items.emplace_back(t, TrajectoryStyle{kAccepted, 1});
  }
  if (!result.pred.accepted.empty()) {
    items.emplace_back(select(result.pred, Selection::kMean), TrajectoryStyle{kAccepted, 2});
  }
  items.emplace_back(future_world_trajectory(*inst), TrajectoryStyle{kTruth, 2});
  items.emplace_back(past_world_trajectory(*inst), TrajectoryStyle{kPast, 1});

  const Raster overlay = render_overlay(segmap_background(seg), cam, items);
  result.overlay_path =
      (fs::path(cfg.out_dir) / ("overlay_" + sanitize_id(cfg.instance_id) + ".ppm")).string();
  save_ppm(overlay, result.overlay_path);
  return result;
}

EvaluatePipelineResult run_evaluate(const EvaluatePipelineConfig& cfg) {
  const Dataset ds = load_dataset(cfg.dataset_dir);
  const Checkpoint ckpt = load_checkpoint(cfg.checkpoint_prefix);
  const std::vector<EvalItem> items = load_eval_items(ds, "test");

  fs::create_directories(cfg.out_dir);
  FusionConfig fusion;
  fusion.k = cfg.k;
  fusion.max_proposals = cfg.max_proposals;
  fusion.footprint_radius = cfg.footprint_radius;

  EvaluatePipelineResult result;
  result.report = table_report(ckpt.model, items, fusion, cfg.seed, cfg.threads);
  result.curve = min_k_curve(ckpt.model, items, cfg.k_max, cfg.max_proposals, cfg.seed, cfg.threads);

  result.table_csv_path = (fs::path(cfg.out_dir) / "table.csv").string();
  result.report_json_path = (fs::path(cfg.out_dir) / "report.json").string();
  result.curve_csv_path = (fs::path(cfg.out_dir) / "minkcurve.csv").string();
  write_text(result.table_csv_path, render_report_csv(result.report));
  write_text(result.report_json_path, render_report_json(result.report));
  write_text(result.curve_csv_path, render_curve_csv(result.curve));

  if (!result.report.all_finite()) {
    throw numeric_error("evaluate: non-finite metric in report (see " + result.report_json_path + ")");
  }
  return result;
}

// --- config JSON ---

namespace {

nlohmann::json world_json(const WorldConfig& w) {
  return {{"extent_x", w.extent_x},       {"extent_y", w.extent_y},
          {"resolution", w.resolution},   {"obstacle_density", w.obstacle_density},
          {"street_pitch", w.street_pitch}, {"block_jitter", w.block_jitter},
          {"street_dropout", w.street_dropout}};
}

void world_from(const nlohmann::json& j, WorldConfig& w) {
  w.extent_x = j.value("extent_x", w.extent_x);
  w.extent_y = j.value("extent_y", w.extent_y);
  w.resolution = j.value("resolution", w.resolution);
  w.obstacle_density = j.value("obstacle_density", w.obstacle_density);
  w.street_pitch = j.value("street_pitch", w.street_pitch);
  w.block_jitter = j.value("block_jitter", w.block_jitter);
  w.street_dropout = j.value("street_dropout", w.street_dropout);
}

nlohmann::json drive_json(const DriveConfig& d) {
  return {{"duration_s", d.duration_s},
          {"cruise_speed_min", d.cruise_speed_min},
          {"cruise_speed_max", d.cruise_speed_max},
          {"max_speed", d.max_speed},
          {"max_turn_rate", d.max_turn_rate},
          {"heading_noise", d.heading_noise},
          {"stop_prob", d.stop_prob}};
}

void drive_from(const nlohmann::json& j, DriveConfig& d) {
  d.duration_s = j.value("duration_s", d.duration_s);
  d.cruise_speed_min = j.value("cruise_speed_min", d.cruise_speed_min);
  d.cruise_speed_max = j.value("cruise_speed_max", d.cruise_speed_max);
  d.max_speed = j.value("max_speed", d.max_speed);
  d.max_turn_rate = j.value("max_turn_rate", d.max_turn_rate);
  d.heading_noise = j.value("heading_noise", d.heading_noise);
  d.stop_prob = j.value("stop_prob", d.stop_prob);
}

nlohmann::json rig_json(const CameraRigConfig& r) {
  return {{"image_width", r.image_width}, {"image_height", r.image_height},
          {"fx", r.fx},                   {"fy", r.fy},
          {"cx", r.cx},                   {"cy", r.cy},
          {"height", r.height},           {"pitch_down", r.pitch_down}};
}

void rig_from(const nlohmann::json& j, CameraRigConfig& r) {
  r.image_width = j.value("image_width", r.image_width);
  r.image_height = j.value("image_height", r.image_height);
  r.fx = j.value("fx", r.fx);
  r.fy = j.value("fy", r.fy);
  r.cx = j.value("cx", r.cx);
  r.cy = j.value("cy", r.cy);
  r.height = j.value("height", r.height);
  r.pitch_down = j.value("pitch_down", r.pitch_down);
}

nlohmann::json gan_json(const GanConfig& g) {
  return {{"embed_dim", g.embed_dim},
          {"encoder_hidden", g.encoder_hidden},
          {"decoder_hidden", g.decoder_hidden},
          {"disc_hidden", g.disc_hidden}};
}

void gan_from(const nlohmann::json& j, GanConfig& g) {
  g.embed_dim = j.value("embed_dim", g.embed_dim);
  g.encoder_hidden = j.value("encoder_hidden", g.encoder_hidden);
  g.decoder_hidden = j.value("decoder_hidden", g.decoder_hidden);
  g.disc_hidden = j.value("disc_hidden", g.disc_hidden);
}

nlohmann::json train_json(const TrainConfig& t) {
  return {{"epochs", t.epochs},
          {"batch_size", t.batch_size},
          {"k_variety", t.k_variety},
          {"lr_g", t.lr_g},
          {"lr_d", t.lr_d},
          {"seed", t.seed},
          {"val_k", t.val_k},
          {"threads", t.threads}};
}

void train_from(const nlohmann::json& j, TrainConfig& t) {
  t.epochs = j.value("epochs", t.epochs);
  t.batch_size = j.value("batch_size", t.batch_size);
  t.k_variety = j.value("k_variety", t.k_variety);
  t.lr_g = j.value("lr_g", t.lr_g);
  t.lr_d = j.value("lr_d", t.lr_d);
  t.seed = j.value("seed", t.seed);
  t.val_k = j.value("val_k", t.val_k);
  t.threads = j.value("threads", t.threads);
}

nlohmann::json fusion_json(const FusionConfig& f) {
  return {{"k", f.k},
          {"max_proposals", f.max_proposals},
          {"seed", f.seed},
          {"footprint_radius", f.footprint_radius}};
}

void fusion_from(const nlohmann::json& j, FusionConfig& f) {
  f.k = j.value("k", f.k);
  f.max_proposals = j.value("max_proposals", f.max_proposals);
  f.seed = j.value("seed", f.seed);
  f.footprint_radius = j.value("footprint_radius", f.footprint_radius);
}

}  // namespace

nlohmann::json to_json(const GenDatasetConfig& cfg) {
  return {{"out_dir", cfg.out_dir},     {"seed", cfg.seed},
          {"n_runs", cfg.n_runs},       {"world", world_json(cfg.world)},
          {"drive", drive_json(cfg.drive)}, {"rig", rig_json(cfg.rig)},
          {"label_noise", cfg.label_noise},
          {"ratios", {{"train", cfg.ratios.train}, {"val", cfg.ratios.val}, {"test", cfg.ratios.test}}},
          {"scene_splits", cfg.scene_splits}};
}

void from_json_into(const nlohmann::json& j, GenDatasetConfig& cfg) {
  cfg.out_dir = j.value("out_dir", cfg.out_dir);
  cfg.seed = j.value("seed", cfg.seed);
  cfg.n_runs = j.value("n_runs", cfg.n_runs);
  if (j.contains("world")) world_from(j.at("world"), cfg.world);
  if (j.contains("drive")) drive_from(j.at("drive"), cfg.drive);
  if (j.contains("rig")) rig_from(j.at("rig"), cfg.rig);
  cfg.label_noise = j.value("label_noise", cfg.label_noise);
  if (j.contains("ratios")) {
    cfg.ratios.train = j.at("ratios").value("train", cfg.ratios.train);
    cfg.ratios.val = j.at("ratios").value("val", cfg.ratios.val);
    cfg.ratios.test = j.at("ratios").value("test", cfg.ratios.test);
  }
  cfg.scene_splits = j.value("scene_splits", cfg.scene_splits);
}

nlohmann::json to_json(const TrainPipelineConfig& cfg) {
  return {{"dataset_dir", cfg.dataset_dir},
          {"out_dir", cfg.out_dir},
          {"gan", gan_json(cfg.gan)},
          {"train", train_json(cfg.train)},
          {"resume_from", cfg.resume_from}};
}

void from_json_into(const nlohmann::json& j, TrainPipelineConfig& cfg) {
  cfg.dataset_dir = j.value("dataset_dir", cfg.dataset_dir);
  cfg.out_dir = j.value("out_dir", cfg.out_dir);
  if (j.contains("gan")) gan_from(j.at("gan"), cfg.gan);
  if (j.contains("train")) train_from(j.at("train"), cfg.train);
  cfg.resume_from = j.value("resume_from", cfg.resume_from);
}

nlohmann::json to_json(const PredictPipelineConfig& cfg) {
  return {{"dataset_dir", cfg.dataset_dir},
          {"checkpoint", cfg.checkpoint_prefix},
          {"instance", cfg.instance_id},
          {"out_dir", cfg.out_dir},
          {"fusion", fusion_json(cfg.fusion)}};
}

void from_json_into(const nlohmann::json& j, PredictPipelineConfig& cfg) {
  cfg.dataset_dir = j.value("dataset_dir", cfg.dataset_dir);
  cfg.checkpoint_prefix = j.value("checkpoint", cfg.checkpoint_prefix);
  cfg.instance_id = j.value("instance", cfg.instance_id);
  cfg.out_dir = j.value("out_dir", cfg.out_dir);
  if (j.contains("fusion")) fusion_from(j.at("fusion"), cfg.fusion);
}

nlohmann::json to_json(const EvaluatePipelineConfig& cfg) {
  return {{"dataset_dir", cfg.dataset_dir},
          {"checkpoint", cfg.checkpoint_prefix},
          {"out_dir", cfg.out_dir},
          {"k", cfg.k},
          {"k_max", cfg.k_max},
          {"max_proposals", cfg.max_proposals},
          {"footprint_radius", cfg.footprint_radius},
          {"seed", cfg.seed},
          {"threads", cfg.threads}};
}

void from_json_into(const nlohmann::json& j, EvaluatePipelineConfig& cfg) {
  cfg.dataset_dir = j.value("dataset_dir", cfg.dataset_dir);
  cfg.checkpoint_prefix = j.value("checkpoint", cfg.checkpoint_prefix);
  cfg.out_dir = j.value("out_dir", cfg.out_dir);
  cfg.k = j.value("k", cfg.k);
  cfg.k_max = j.value("k_max", cfg.k_max);
  cfg.max_proposals = j.value("max_proposals", cfg.max_proposals);
  cfg.footprint_radius = j.value("footprint_radius", cfg.footprint_radius);
  cfg.seed = j.value("seed", cfg.seed);
  cfg.threads = j.value("threads", cfg.threads);
}

}  // namespace intent
