#include "intent/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <limits>
#include <sstream>

#include <nlohmann/json.hpp>

#include "intent/errors.hpp"
#include "intent/parallel.hpp"

namespace intent {

double ade(const Trajectory& pred, const Trajectory& truth) {
  pred.validate();
  truth.validate();
  if (pred.length() != truth.length()) {
    throw std::invalid_argument("ade: length mismatch (" + std::to_string(pred.length()) + " vs " +
                                std::to_string(truth.length()) + ")");
  }
  check_same_dt(pred.dt, truth.dt);
  double sum = 0.0;
  for (std::size_t i = 0; i < pred.length(); ++i) {
    sum += (pred.positions[i] - truth.positions[i]).norm();
  }
  return sum / static_cast<double>(pred.length());
}

double fde(const Trajectory& pred, const Trajectory& truth) {
  pred.validate();
  truth.validate();
  if (pred.length() != truth.length()) {
    throw std::invalid_argument("fde: length mismatch (" + std::to_string(pred.length()) + " vs " +
                                std::to_string(truth.length()) + ")");
  }
  return (pred.positions.back() - truth.positions.back()).norm();
}

std::vector<EvalItem> load_eval_items(const Dataset& dataset, const std::string& split) {
  namespace fs = std::filesystem;
  const std::vector<TrainInstance>* instances = nullptr;
  if (split == "train") {
    instances = &dataset.split.train;
  } else if (split == "val") {
    instances = &dataset.split.val;
  } else if (split == "test") {
    instances = &dataset.split.test;
  } else {
    throw std::invalid_argument("load_eval_items: unknown split '" + split + "'");
  }
  std::vector<EvalItem> items;
  for (const TrainInstance& inst : *instances) {
    if (inst.scene_id.empty()) continue;
    EvalItem item;
    item.instance = inst;
    const fs::path base = fs::path(dataset.root) / inst.scene_id;
    item.seg = load_segmap(base.string() + ".segmap");
    item.cam = load_camera(base.string() + ".cam.json");
    items.push_back(std::move(item));
  }
  if (items.empty()) {
    throw data_error("no instances with scenes in split '" + split + "' under " + dataset.root);
  }
  return items;
}

namespace {

double min_over_prefix(const std::vector<double>& values, int k) {
  double lo = std::numeric_limits<double>::infinity();
  for (int i = 0; i < k && i < static_cast<int>(values.size()); ++i) lo = std::min(lo, values[i]);
  return lo;
}

bool leaves_traversable(const Trajectory& traj, const SegMap& seg, const CameraModel& cam,
                        const FootprintDisk& foot) {
  for (const Vec2& x : traj.positions) {
    if ((x - foot.center).norm() <= foot.radius) continue;
    const auto pixel = project(cam, x);
    if (!pixel.has_value()) continue;
    const int px = static_cast<int>(std::lround(pixel->x()));
    const int py = static_cast<int>(std::lround(pixel->y()));
    if (seg.traversable_prob(px, py) < 0.5) return true;
  }
  return false;
}

std::string fmt_g9(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

}  // namespace

MetricReport table_report(const GanModel& model, const std::vector<EvalItem>& items,
                          const FusionConfig& fusion_cfg, std::uint64_t eval_seed, int threads) {
  if (items.empty()) throw std::invalid_argument("table_report: no evaluation items");
  MetricReport report;
  report.k = fusion_cfg.k;
  report.eval_seed = eval_seed;
  report.n_instances = static_cast<int>(items.size());
  for (int m = 0; m < 2; ++m) {
    for (int s = 0; s < 3; ++s) {
      report.ade_values[m][s].assign(items.size(), 0.0);
      report.fde_values[m][s].assign(items.size(), 0.0);
    }
  }
  std::vector<double> offroad(items.size(), 0.0);
  std::vector<char> fallback(items.size(), 0);

  parallel_for(static_cast<int>(items.size()), threads, [&](int i) {
    const EvalItem& item = items[i];
    const std::uint64_t seed_i = derive_seed(eval_seed, i);
    const Trajectory truth = future_world_trajectory(item.instance);
    const FootprintDisk foot{item.instance.agent_pose.position, fusion_cfg.footprint_radius};

    // Baseline: the first k raw proposals of the stream.
    std::vector<Trajectory> baseline;
    baseline.reserve(fusion_cfg.k);
    for (const RelativeTrajectory& rel :
         sample_k(model, item.instance.past, fusion_cfg.k, seed_i)) {
      baseline.push_back(transform_to_world(rel, item.instance.agent_pose));
    }

    // Fused: rejection sampling over the same stream.
    FusionConfig cfg_i = fusion_cfg;
    cfg_i.seed = seed_i;
    const PredictionSet fused = fuse(model, item.instance.past, item.instance.agent_pose, item.seg,
                                     item.cam, cfg_i);
    fallback[i] = fused.fallback_used ? 1 : 0;

    int n_off = 0;
    for (const Trajectory& t : baseline) n_off += leaves_traversable(t, item.seg, item.cam, foot);
    offroad[i] = static_cast<double>(n_off) / static_cast<double>(baseline.size());

    const std::uint64_t select_seed = derive_seed(eval_seed, 0xA5E1ULL + i);
    const auto eval_method = [&](const std::vector<Trajectory>& samples, int m) {
      PredictionSet as_set;
      as_set.accepted = samples;
      as_set.scores.assign(samples.size(), 1.0);
      const Trajectory random_pick = select(as_set, Selection::kRandom, select_seed);
      const Trajectory mean_pick = select(as_set, Selection::kMean);
      report.ade_values[m][0][i] = ade(random_pick, truth);
      report.fde_values[m][0][i] = fde(random_pick, truth);
      report.ade_values[m][1][i] = ade(mean_pick, truth);
      report.fde_values[m][1][i] = fde(mean_pick, truth);
      double best_ade = std::numeric_limits<double>::infinity();
      double best_fde = std::numeric_limits<double>::infinity();
      for (const Trajectory& t : samples) {
        best_ade = std::min(best_ade, ade(t, truth));
        best_fde = std::min(best_fde, fde(t, truth));
      }
      report.ade_values[m][2][i] = best_ade;
      report.fde_values[m][2][i] = best_fde;
    };
    eval_method(baseline, 0);
    eval_method(fused.accepted, 1);
  });

  for (int m = 0; m < 2; ++m) {
    for (int s = 0; s < 3; ++s) {
      double asum = 0.0, fsum = 0.0;
      for (int i = 0; i < report.n_instances; ++i) {
        asum += report.ade_values[m][s][i];
        fsum += report.fde_values[m][s][i];
      }
      report.ade_mean[m][s] = asum / report.n_instances;
      report.fde_mean[m][s] = fsum / report.n_instances;
    }
  }
  for (int s = 0; s < 3; ++s) {
    report.ade_improvement_pct[s] =
        (report.ade_mean[0][s] - report.ade_mean[1][s]) / report.ade_mean[0][s] * 100.0;
    report.fde_improvement_pct[s] =
        (report.fde_mean[0][s] - report.fde_mean[1][s]) / report.fde_mean[0][s] * 100.0;
  }
  double off_sum = 0.0;
  for (double v : offroad) off_sum += v;
  report.baseline_offroad_fraction = off_sum / report.n_instances;
  double fb_sum = 0.0;
  for (char f : fallback) fb_sum += f;
  report.fallback_fraction = fb_sum / report.n_instances;
  return report;
}

MinKCurve min_k_curve(const GanModel& model, const std::vector<EvalItem>& items, int k_max,
                      int max_proposals, std::uint64_t eval_seed, int threads) {
  if (k_max < 1) throw std::invalid_argument("min_k_curve: k_max must be >= 1");
  if (items.empty()) throw std::invalid_argument("min_k_curve: no evaluation items");

  struct PerInstance {
    std::vector<double> ade_base, fde_base, ade_fused, fde_fused;
  };
  std::vector<PerInstance> per(items.size());

  parallel_for(static_cast<int>(items.size()), threads, [&](int i) {
    const EvalItem& item = items[i];
    const std::uint64_t seed_i = derive_seed(eval_seed, i);
    const Trajectory truth = future_world_trajectory(item.instance);

    for (const RelativeTrajectory& rel : sample_k(model, item.instance.past, k_max, seed_i)) {
      const Trajectory t = transform_to_world(rel, item.instance.agent_pose);
      per[i].ade_base.push_back(ade(t, truth));
      per[i].fde_base.push_back(fde(t, truth));
    }
    FusionConfig cfg;
    cfg.k = k_max;
    cfg.max_proposals = max_proposals;
    cfg.seed = seed_i;
    const PredictionSet fused =
        fuse(model, item.instance.past, item.instance.agent_pose, item.seg, item.cam, cfg);
    for (const Trajectory& t : fused.accepted) {
      per[i].ade_fused.push_back(ade(t, truth));
      per[i].fde_fused.push_back(fde(t, truth));
    }
  });

  MinKCurve curve;
  for (int k = 1; k <= k_max; ++k) {
    double ab = 0.0, af = 0.0, fb = 0.0, ff = 0.0;
    for (const PerInstance& p : per) {
      ab += min_over_prefix(p.ade_base, k);
      fb += min_over_prefix(p.fde_base, k);
      af += min_over_prefix(p.ade_fused, k);
      ff += min_over_prefix(p.fde_fused, k);
    }
    const double n = static_cast<double>(per.size());
    curve.ade_baseline.push_back(ab / n);
    curve.ade_fused.push_back(af / n);
    curve.fde_baseline.push_back(fb / n);
    curve.fde_fused.push_back(ff / n);
  }
  return curve;
}

bool MetricReport::all_finite() const {
  for (int m = 0; m < 2; ++m) {
    for (int s = 0; s < 3; ++s) {
      if (!std::isfinite(ade_mean[m][s]) || !std::isfinite(fde_mean[m][s])) return false;
      for (double v : ade_values[m][s]) {
        if (!std::isfinite(v)) return false;
      }
      for (double v : fde_values[m][s]) {
        if (!std::isfinite(v)) return false;
      }
    }
  }
  for (int s = 0; s < 3; ++s) {
    if (!std::isfinite(ade_improvement_pct[s]) || !std::isfinite(fde_improvement_pct[s])) {
      return false;
    }
  }
  return true;
}

std::string render_report_csv(const MetricReport& report) {
  std::ostringstream out;
  out << "metric,selection,no_scene,fused,improvement_pct\n";
  for (int metric = 0; metric < 2; ++metric) {
    for (int s = 0; s < 3; ++s) {
      const auto& mean = metric == 0 ? report.ade_mean : report.fde_mean;
      const auto& imp = metric == 0 ? report.ade_improvement_pct : report.fde_improvement_pct;
      out << (metric == 0 ? "ade" : "fde") << ',' << kSelectionNames[s] << ','
          << fmt_g9(mean[0][s]) << ',' << fmt_g9(mean[1][s]) << ',' << fmt_g9(imp[s]) << '\n';
    }
  }
  return out.str();
}

std::string render_report_json(const MetricReport& report) {
  nlohmann::json j;
  j["k"] = report.k;
  j["eval_seed"] = report.eval_seed;
  j["n_instances"] = report.n_instances;
  j["baseline_offroad_fraction"] = report.baseline_offroad_fraction;
  j["fallback_fraction"] = report.fallback_fraction;
  for (int m = 0; m < 2; ++m) {
    nlohmann::json jm;
    for (int s = 0; s < 3; ++s) {
      jm[kSelectionNames[s]] = {{"ade_mean", report.ade_mean[m][s]},
                                {"fde_mean", report.fde_mean[m][s]},
                                {"ade", report.ade_values[m][s]},
                                {"fde", report.fde_values[m][s]}};
    }
    j[kMethodNames[m]] = jm;
  }
  nlohmann::json imp;
  for (int s = 0; s < 3; ++s) {
    imp[kSelectionNames[s]] = {{"ade_pct", report.ade_improvement_pct[s]},
                               {"fde_pct", report.fde_improvement_pct[s]}};
  }
  j["improvement"] = imp;
  return j.dump(2) + "\n";
}

MetricReport parse_report_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw data_error(std::string("corrupt metric report: ") + e.what());
  }
  MetricReport report;
  report.k = j.at("k").get<int>();
  report.eval_seed = j.at("eval_seed").get<std::uint64_t>();
  report.n_instances = j.at("n_instances").get<int>();
  report.baseline_offroad_fraction = j.at("baseline_offroad_fraction").get<double>();
  report.fallback_fraction = j.at("fallback_fraction").get<double>();
  for (int m = 0; m < 2; ++m) {
    const auto& jm = j.at(kMethodNames[m]);
    for (int s = 0; s < 3; ++s) {
      const auto& js = jm.at(kSelectionNames[s]);
      report.ade_mean[m][s] = js.at("ade_mean").get<double>();
      report.fde_mean[m][s] = js.at("fde_mean").get<double>();
      report.ade_values[m][s] = js.at("ade").get<std::vector<double>>();
      report.fde_values[m][s] = js.at("fde").get<std::vector<double>>();
    }
  }
  for (int s = 0; s < 3; ++s) {
    report.ade_improvement_pct[s] = j.at("improvement").at(kSelectionNames[s]).at("ade_pct").get<double>();
    report.fde_improvement_pct[s] = j.at("improvement").at(kSelectionNames[s]).at("fde_pct").get<double>();
  }
  return report;
}

std::string render_curve_csv(const MinKCurve& curve) {
  std::ostringstream out;
  out << "k,ade_baseline,ade_fused,fde_baseline,fde_fused\n";
  for (std::size_t i = 0; i < curve.ade_baseline.size(); ++i) {
    out << (i + 1) << ',' << fmt_g9(curve.ade_baseline[i]) << ',' << fmt_g9(curve.ade_fused[i])
        << ',' << fmt_g9(curve.fde_baseline[i]) << ',' << fmt_g9(curve.fde_fused[i]) << '\n';
  }
  return out.str();
}

}  // namespace intent
