#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "intent/dataset.hpp"
#include "intent/nn.hpp"
#include "intent/trajectory.hpp"

namespace intent {

struct GanConfig {
  int embed_dim = 16;
  int encoder_hidden = 32;
  int decoder_hidden = 40;
  int disc_hidden = 32;
  int noise_dim = 8;
  int past_steps = kPastSteps;
  int future_steps = kFutureSteps;
};

// Generator: LSTM encoder over embedded past displacements; the final hidden
// state is concatenated with the noise vector and mapped to the decoder's
// initial hidden state; the decoder LSTM emits one displacement per step,
// feeding each emission back through the shared input embedding.
struct Generator {
  nn::Linear embed;            // 2 -> embed_dim
  nn::LstmCellParams encoder;  // embed_dim -> encoder_hidden
  nn::Linear hidden_init;      // (encoder_hidden + noise_dim) -> decoder_hidden
  nn::LstmCellParams decoder;  // embed_dim -> decoder_hidden
  nn::Linear head;             // decoder_hidden -> 2
};

// Discriminator: one LSTM over the embedded 16-step displacement sequence
// (past followed by real or generated future); sigmoid score from the final
// hidden state.
struct Discriminator {
  nn::Linear embed;         // 2 -> embed_dim
  nn::LstmCellParams lstm;  // embed_dim -> disc_hidden
  nn::Linear head;          // disc_hidden -> 1
};

struct GanModel {
  GanConfig cfg;
  Generator gen;
  Discriminator disc;

  std::vector<std::pair<std::string, nn::Tensor2*>> named_params();
  std::vector<std::pair<std::string, const nn::Tensor2*>> named_params() const;
  std::vector<nn::Tensor2*> generator_params();
  std::vector<nn::Tensor2*> discriminator_params();
};

GanModel init_gan(const GanConfig& cfg, std::uint64_t seed);

// Draws dim i.i.d. standard normal coordinates.
std::vector<double> draw_noise(Rng& rng, int dim);

// Deterministic decode of one noise vector conditioned on the past.
RelativeTrajectory generate(const GanModel& model, const RelativeTrajectory& past,
                            const std::vector<double>& noise);

// k independent draws from one seeded noise stream; sample j consumes noise
// coordinates [8j, 8j+8), so prefixes are shared across different k.
std::vector<RelativeTrajectory> sample_k(const GanModel& model, const RelativeTrajectory& past,
                                         int k, std::uint64_t seed);

// Probability the (past, future) pair is real, in (0, 1).
double discriminate(const GanModel& model, const RelativeTrajectory& past,
                    const RelativeTrajectory& future);

// Minimum over samples of the summed squared displacement error.
double variety_from_samples(const std::vector<RelativeTrajectory>& samples,
                            const RelativeTrajectory& ground_truth);
double variety_loss(const GanModel& model, const RelativeTrajectory& past,
                    const RelativeTrajectory& ground_truth, int k, std::uint64_t seed);

// --- training ---

struct TrainConfig {
  int epochs = 200;
  int batch_size = 64;
  int k_variety = 10;
  double lr_g = 1e-3;
  double lr_d = 1e-3;
  double real_label_min = 0.7, real_label_max = 1.0;
  double fake_label_min = 0.0, fake_label_max = 0.3;
  std::uint64_t seed = 1;
  int val_k = 20;   // k of the per-epoch validation min-k ADE
  int threads = 0;  // 0 = auto
};

// One training example with all randomness pre-drawn, so batch items can be
// evaluated in parallel without touching a shared stream.
struct GanBatchItem {
  const TrainInstance* instance = nullptr;
  std::vector<double> disc_noise;               // noise for the D-step fake
  std::vector<std::vector<double>> gen_noise;   // k_variety draws for the G step
  double real_label = 1.0;
  double fake_label = 0.0;
  double gen_real_label = 1.0;
};

struct GanGrads {
  Generator gen;
  Discriminator disc;

  void zero();
  std::vector<const nn::Tensor2*> generator_grads() const;
  std::vector<const nn::Tensor2*> discriminator_grads() const;
};

GanGrads zero_grads(const GanModel& model);

struct GanWorkspace {
  std::vector<GanGrads> per_item;
};

// Mean over the batch of BCE(D(past, real), real_label) +
// BCE(D(past, G(z|past)), fake_label); fills discriminator gradients.
double discriminator_loss(const GanModel& model, std::span<const GanBatchItem> batch,
                          GanGrads* grads, int threads = 1, GanWorkspace* ws = nullptr);

// Mean over the batch of BCE(D(past, G(z_0|past)), real_label_for_G) plus the
// k-sample variety loss; fills generator gradients (discriminator frozen).
double generator_loss(const GanModel& model, std::span<const GanBatchItem> batch, GanGrads* grads,
                      int threads = 1, GanWorkspace* ws = nullptr);

struct EpochMetrics {
  int epoch = 0;
  double d_loss = 0.0;
  double g_loss = 0.0;
  double val_min_k_ade = 0.0;
  // Observed label-draw ranges, for auditing the smoothing bounds.
  double real_label_lo = 1.0, real_label_hi = 0.0;
  double fake_label_lo = 1.0, fake_label_hi = 0.0;
};

struct TrainResult {
  std::vector<EpochMetrics> history;
  bool aborted = false;
  std::string abort_reason;
  int epochs_completed = 0;
};

// Mean over instances of the best-of-k ADE of raw samples (no scene term).
double raw_min_k_ade(const GanModel& model, const std::vector<TrainInstance>& instances, int k,
                     std::uint64_t seed, int threads = 1);

using EpochCallback =
    std::function<void(const GanModel&, const nn::AdamState& g_opt, const nn::AdamState& d_opt,
                       const EpochMetrics&)>;

// Alternating single D / single G updates per batch. Deterministic for a
// given (cfg.seed, data): every draw comes from per-epoch derived streams and
// gradient reduction follows batch-index order. A non-finite loss or gradient
// aborts training and restores the last completed epoch's parameters.
TrainResult train(GanModel& model, const DatasetSplit& split, const TrainConfig& cfg,
                  const EpochCallback& on_epoch = {});
TrainResult train_resume(GanModel& model, nn::AdamState& g_opt, nn::AdamState& d_opt,
                         int start_epoch, const DatasetSplit& split, const TrainConfig& cfg,
                         const EpochCallback& on_epoch = {});

// --- persistence ---

struct Checkpoint {
  GanModel model;
  nn::AdamState g_opt, d_opt;
  int epoch = 0;  // completed epochs
  TrainConfig train_cfg;
  std::uint64_t manifest_hash = 0;
};

// Writes prefix.nnp (parameters + optimizer moments) and prefix.json
// (architecture, training config, epoch, dataset manifest hash).
void save_checkpoint(const std::string& prefix, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& prefix);

}  // namespace intent
