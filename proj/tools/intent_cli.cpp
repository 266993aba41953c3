// Command-line front end: gen-dataset, train, predict, evaluate.
//
// Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "intent/errors.hpp"
#include "intent/pipeline.hpp"

namespace {

// Loads --config JSON (if any) into cfg before flags override it.
template <typename Config>
void preload_config(int argc, char** argv, Config& cfg) {
  for (int i = 1; i + 1 < argc; ++i) {
    if (std::string(argv[i]) == "--config") {
      std::ifstream file(argv[i + 1]);
      if (!file) throw intent::data_error(std::string("cannot open config file: ") + argv[i + 1]);
      nlohmann::json j;
      try {
        j = nlohmann::json::parse(file);
      } catch (const nlohmann::json::exception& e) {
        throw intent::data_error(std::string("bad config file ") + argv[i + 1] + ": " + e.what());
      }
      intent::from_json_into(j, cfg);
    }
  }
}

void echo_config(const char* command, const nlohmann::json& resolved) {
  std::cout << "config " << command << " " << resolved.dump() << "\n";
}

int run(int argc, char** argv) {
  CLI::App app{"Scene-constrained multi-modal trajectory intention prediction"};
  app.require_subcommand(1);
  std::string config_path;

  // --- gen-dataset ---
  auto* gen = app.add_subcommand("gen-dataset", "Generate a synthetic world, drive logs, and scenes");
  intent::GenDatasetConfig gen_cfg;
  preload_config(argc, argv, gen_cfg);
  gen->add_option("--config", config_path, "JSON config file (flags override it)");
  gen->add_option("--out", gen_cfg.out_dir, "Output dataset directory")->required();
  gen->add_option("--seed", gen_cfg.seed, "Master seed");
  gen->add_option("--runs", gen_cfg.n_runs, "Number of driving runs");
  gen->add_option("--duration", gen_cfg.drive.duration_s, "Run duration in seconds");
  gen->add_option("--density", gen_cfg.world.obstacle_density, "Obstacle density in [0,1)");
  double gen_extent = 0.0;
  gen->add_option("--extent", gen_extent, "World extent (square), meters");
  gen->add_option("--label-noise", gen_cfg.label_noise, "Segmentation label noise in [0,1)");
  gen->add_option("--scenes", gen_cfg.scene_splits, "Splits with rendered scenes (none|all|csv list)");

  // --- train ---
  auto* train = app.add_subcommand("train", "Train the trajectory GAN on a dataset");
  intent::TrainPipelineConfig train_cfg;
  preload_config(argc, argv, train_cfg);
  train->add_option("--config", config_path, "JSON config file (flags override it)");
  train->add_option("--dataset", train_cfg.dataset_dir, "Dataset directory")->required();
  train->add_option("--out", train_cfg.out_dir, "Output directory for checkpoint + metrics")->required();
  train->add_option("--epochs", train_cfg.train.epochs, "Training epochs");
  train->add_option("--batch", train_cfg.train.batch_size, "Batch size");
  train->add_option("--k-variety", train_cfg.train.k_variety, "Samples in the variety loss");
  train->add_option("--lr-g", train_cfg.train.lr_g, "Generator learning rate");
  train->add_option("--lr-d", train_cfg.train.lr_d, "Discriminator learning rate");
  train->add_option("--seed", train_cfg.train.seed, "Training seed");
  train->add_option("--threads", train_cfg.train.threads, "Worker threads (0 = auto)");
  train->add_option("--resume", train_cfg.resume_from, "Checkpoint prefix to resume from");

  // --- predict ---
  auto* predict = app.add_subcommand("predict", "Fuse one instance and write predictions + overlay");
  intent::PredictPipelineConfig pred_cfg;
  preload_config(argc, argv, pred_cfg);
  predict->add_option("--config", config_path, "JSON config file (flags override it)");
  predict->add_option("--dataset", pred_cfg.dataset_dir, "Dataset directory")->required();
  predict->add_option("--checkpoint", pred_cfg.checkpoint_prefix, "Checkpoint prefix")->required();
  predict->add_option("--instance", pred_cfg.instance_id, "Instance id '<log>:<start>'")->required();
  predict->add_option("--out", pred_cfg.out_dir, "Output directory")->required();
  predict->add_option("--k", pred_cfg.fusion.k, "Accepted samples to produce");
  predict->add_option("--seed", pred_cfg.fusion.seed, "Sampling seed");
  predict->add_option("--max-proposals", pred_cfg.fusion.max_proposals, "Proposal budget");

  // --- evaluate ---
  auto* evaluate = app.add_subcommand("evaluate", "Paired no-scene vs fused metric report");
  intent::EvaluatePipelineConfig eval_cfg;
  preload_config(argc, argv, eval_cfg);
  evaluate->add_option("--config", config_path, "JSON config file (flags override it)");
  evaluate->add_option("--dataset", eval_cfg.dataset_dir, "Dataset directory")->required();
  evaluate->add_option("--checkpoint", eval_cfg.checkpoint_prefix, "Checkpoint prefix")->required();
  evaluate->add_option("--out", eval_cfg.out_dir, "Output directory")->required();
  evaluate->add_option("--k", eval_cfg.k, "Samples per instance for the table");
  evaluate->add_option("--k-max", eval_cfg.k_max, "Largest k of the min-k curve");
  evaluate->add_option("--seed", eval_cfg.seed, "Evaluation seed");
  evaluate->add_option("--max-proposals", eval_cfg.max_proposals, "Proposal budget");
  evaluate->add_option("--threads", eval_cfg.threads, "Worker threads (0 = auto)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);  // prints help text or the usage error
    return code == 0 ? 0 : 1;
  }

  if (gen->parsed()) {
    if (gen->count("--extent") > 0) {
      gen_cfg.world.extent_x = gen_extent;
      gen_cfg.world.extent_y = gen_extent;
    }
    echo_config("gen-dataset", intent::to_json(gen_cfg));
    const intent::GenDatasetResult r = intent::run_gen_dataset(gen_cfg);
    std::cout << "runs kept: " << r.n_runs_kept << "\n";
    for (const std::string& s : r.skipped_runs) std::cout << "skipped " << s << "\n";
    std::cout << "instances train=" << r.n_train << " val=" << r.n_val << " test=" << r.n_test
              << "\n";
    std::cout << "manifest: " << r.manifest_path << "\n";
    return 0;
  }
  if (train->parsed()) {
    echo_config("train", intent::to_json(train_cfg));
    const intent::TrainPipelineResult r = intent::run_train(train_cfg);
    for (const intent::EpochMetrics& em : r.history) {
      std::printf("epoch %d d_loss %.4f g_loss %.4f val_min%d_ade %.4f\n", em.epoch, em.d_loss,
                  em.g_loss, train_cfg.train.val_k, em.val_min_k_ade);
    }
    std::cout << "checkpoint: " << r.checkpoint_prefix << "\n";
    std::cout << "metrics: " << r.metrics_csv_path << "\n";
    if (r.aborted) {
      std::cerr << "training aborted: " << r.abort_reason
                << " (last good checkpoint retained)\n";
      return 3;
    }
    return 0;
  }
  if (predict->parsed()) {
    echo_config("predict", intent::to_json(pred_cfg));
    const intent::PredictPipelineResult r = intent::run_predict(pred_cfg);
    std::printf("accepted %zu of %ld proposals (acceptance_rate %.4f, fallback %s)\n",
                r.pred.accepted.size(), r.pred.proposals_drawn, r.pred.acceptance_rate,
                r.pred.fallback_used ? "yes" : "no");
    std::cout << "predictions: " << r.jsonl_path << "\n";
    std::cout << "overlay: " << r.overlay_path << "\n";
    return 0;
  }
  if (evaluate->parsed()) {
    echo_config("evaluate", intent::to_json(eval_cfg));
    const intent::EvaluatePipelineResult r = intent::run_evaluate(eval_cfg);
    std::cout << render_report_csv(r.report);
    std::printf("baseline offroad fraction %.4f, fallback fraction %.4f\n",
                r.report.baseline_offroad_fraction, r.report.fallback_fraction);
    std::cout << "reports: " << r.table_csv_path << " " << r.report_json_path << " "
              << r.curve_csv_path << "\n";
    return 0;
  }
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const intent::numeric_error& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 3;
  } catch (const intent::data_error& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "invalid input: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
