#include "intent/gan.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include <nlohmann/json.hpp>

#include "intent/errors.hpp"
#include "intent/parallel.hpp"
#include "intent/paramfile.hpp"

namespace intent {

namespace {

void collect(Generator& g, const std::string& prefix,
             std::vector<std::pair<std::string, nn::Tensor2*>>& out) {
  out.emplace_back(prefix + ".embed.w", &g.embed.w);
  out.emplace_back(prefix + ".embed.b", &g.embed.b);
  for (auto [tag, cell] : {std::pair{std::string("enc"), &g.encoder}, {std::string("dec"), &g.decoder}}) {
    out.emplace_back(prefix + "." + tag + ".w_i", &cell->w_i);
    out.emplace_back(prefix + "." + tag + ".w_f", &cell->w_f);
    out.emplace_back(prefix + "." + tag + ".w_g", &cell->w_g);
    out.emplace_back(prefix + "." + tag + ".w_o", &cell->w_o);
    out.emplace_back(prefix + "." + tag + ".b_i", &cell->b_i);
    out.emplace_back(prefix + "." + tag + ".b_f", &cell->b_f);
    out.emplace_back(prefix + "." + tag + ".b_g", &cell->b_g);
    out.emplace_back(prefix + "." + tag + ".b_o", &cell->b_o);
  }
  out.emplace_back(prefix + ".init.w", &g.hidden_init.w);
  out.emplace_back(prefix + ".init.b", &g.hidden_init.b);
  out.emplace_back(prefix + ".head.w", &g.head.w);
  out.emplace_back(prefix + ".head.b", &g.head.b);
}

void collect(Discriminator& d, const std::string& prefix,
             std::vector<std::pair<std::string, nn::Tensor2*>>& out) {
  out.emplace_back(prefix + ".embed.w", &d.embed.w);
  out.emplace_back(prefix + ".embed.b", &d.embed.b);
  out.emplace_back(prefix + ".lstm.w_i", &d.lstm.w_i);
  out.emplace_back(prefix + ".lstm.w_f", &d.lstm.w_f);
  out.emplace_back(prefix + ".lstm.w_g", &d.lstm.w_g);
  out.emplace_back(prefix + ".lstm.w_o", &d.lstm.w_o);
  out.emplace_back(prefix + ".lstm.b_i", &d.lstm.b_i);
  out.emplace_back(prefix + ".lstm.b_f", &d.lstm.b_f);
  out.emplace_back(prefix + ".lstm.b_g", &d.lstm.b_g);
  out.emplace_back(prefix + ".lstm.b_o", &d.lstm.b_o);
  out.emplace_back(prefix + ".head.w", &d.head.w);
  out.emplace_back(prefix + ".head.b", &d.head.b);
}

nn::Vec to_vec(const Vec2& v) { return {v.x, v.y}; }

void check_past(const GanModel& model, const RelativeTrajectory& past) {
  past.validate();
  if (static_cast<int>(past.length()) != model.cfg.past_steps) {
    throw std::invalid_argument("past trajectory length " + std::to_string(past.length()) +
                                " != expected " + std::to_string(model.cfg.past_steps));
  }
}

// Everything the generator backward pass needs from one forward decode.
struct GenTape {
  std::vector<nn::Vec> enc_in;  // raw past displacements (2-vecs)
  std::vector<nn::LstmStepCache> enc_cache;
  nn::Vec init_in;                   // [h_enc_final; noise]
  std::vector<nn::Vec> dec_in_disp;  // displacement embedded at each decoder step
  std::vector<nn::LstmStepCache> dec_cache;
  std::vector<nn::Vec> dec_h;  // head input per step
  std::vector<nn::Vec> out;    // emitted displacement per step
};

std::vector<Vec2> gen_forward(const GanModel& model, const std::vector<Vec2>& past,
                              const std::vector<double>& noise, GenTape* tape) {
  const Generator& g = model.gen;
  const GanConfig& cfg = model.cfg;

  nn::Vec h(cfg.encoder_hidden, 0.0), c(cfg.encoder_hidden, 0.0);
  for (int t = 0; t < cfg.past_steps; ++t) {
    const nn::Vec x = to_vec(past[t]);
    const nn::Vec e = nn::linear_forward(g.embed, x);
    nn::LstmStepCache* cache = nullptr;
    if (tape != nullptr) {
      tape->enc_in.push_back(x);
      tape->enc_cache.emplace_back();
      cache = &tape->enc_cache.back();
    }
    nn::LstmState s = nn::lstm_step(g.encoder, e, h, c, cache);
    h = std::move(s.h);
    c = std::move(s.c);
  }

  nn::Vec init_in = h;
  init_in.insert(init_in.end(), noise.begin(), noise.end());
  nn::Vec hd = nn::linear_forward(g.hidden_init, init_in);
  nn::Vec cd(cfg.decoder_hidden, 0.0);
  if (tape != nullptr) tape->init_in = init_in;

  std::vector<Vec2> out(cfg.future_steps);
  Vec2 prev = past.back();
  for (int t = 0; t < cfg.future_steps; ++t) {
    const nn::Vec x = to_vec(prev);
    const nn::Vec e = nn::linear_forward(g.embed, x);
    nn::LstmStepCache* cache = nullptr;
    if (tape != nullptr) {
      tape->dec_in_disp.push_back(x);
      tape->dec_cache.emplace_back();
      cache = &tape->dec_cache.back();
    }
    nn::LstmState s = nn::lstm_step(g.decoder, e, hd, cd, cache);
    hd = std::move(s.h);
    cd = std::move(s.c);
    const nn::Vec y = nn::linear_forward(g.head, hd);
    out[t] = {y[0], y[1]};
    prev = out[t];
    if (tape != nullptr) {
      tape->dec_h.push_back(hd);
      tape->out.push_back(y);
    }
  }
  return out;
}

// Backpropagates output-displacement gradients through the decoder (including
// the emission -> next-step-embedding feedback), the hidden-init map, and the
// encoder, accumulating into grads.gen.
void gen_backward(const GanModel& model, const GenTape& tape, const std::vector<nn::Vec>& dout,
                  GanGrads& grads) {
  const Generator& g = model.gen;
  const GanConfig& cfg = model.cfg;

  nn::Vec dh_next(cfg.decoder_hidden, 0.0), dc_next(cfg.decoder_hidden, 0.0);
  nn::Vec carry{0.0, 0.0};  // gradient into the previous emission via the embedding
  for (int t = cfg.future_steps - 1; t >= 0; --t) {
    nn::Vec dy = dout[t];
    dy[0] += carry[0];
    dy[1] += carry[1];
    nn::Vec dh = nn::linear_backward(g.head, tape.dec_h[t], dy, grads.gen.head);
    for (int j = 0; j < cfg.decoder_hidden; ++j) dh[j] += dh_next[j];
    nn::LstmStepGrad sg = nn::lstm_step_backward(g.decoder, tape.dec_cache[t], dh, dc_next,
                                                 grads.gen.decoder);
    carry = nn::linear_backward(g.embed, tape.dec_in_disp[t], sg.dx, grads.gen.embed);
    dh_next = std::move(sg.dh_prev);
    dc_next = std::move(sg.dc_prev);
  }
  // carry now targets past.back(), which is input data; it is dropped.

  const nn::Vec dinit = nn::linear_backward(g.hidden_init, tape.init_in, dh_next, grads.gen.hidden_init);
  nn::Vec dh(dinit.begin(), dinit.begin() + cfg.encoder_hidden);
  nn::Vec dc(cfg.encoder_hidden, 0.0);
  for (int t = cfg.past_steps - 1; t >= 0; --t) {
    nn::LstmStepGrad sg = nn::lstm_step_backward(g.encoder, tape.enc_cache[t], dh, dc,
                                                 grads.gen.encoder);
    nn::linear_backward(g.embed, tape.enc_in[t], sg.dx, grads.gen.embed);
    dh = std::move(sg.dh_prev);
    dc = std::move(sg.dc_prev);
  }
}

struct DiscTape {
  std::vector<nn::Vec> in_disp;  // 16 input displacements
  std::vector<nn::LstmStepCache> cache;
  nn::Vec final_h;
  double logit = 0.0;
  double p = 0.5;
};

double disc_forward(const GanModel& model, const std::vector<Vec2>& past,
                    const std::vector<Vec2>& future, DiscTape* tape) {
  const Discriminator& d = model.disc;
  const GanConfig& cfg = model.cfg;

  nn::Vec h(cfg.disc_hidden, 0.0), c(cfg.disc_hidden, 0.0);
  const int total = cfg.past_steps + cfg.future_steps;
  for (int t = 0; t < total; ++t) {
    const Vec2& disp = t < cfg.past_steps ? past[t] : future[t - cfg.past_steps];
    const nn::Vec x = to_vec(disp);
    const nn::Vec e = nn::linear_forward(d.embed, x);
    nn::LstmStepCache* cache = nullptr;
    if (tape != nullptr) {
      tape->in_disp.push_back(x);
      tape->cache.emplace_back();
      cache = &tape->cache.back();
    }
    nn::LstmState s = nn::lstm_step(d.lstm, e, h, c, cache);
    h = std::move(s.h);
    c = std::move(s.c);
  }
  const double logit = nn::linear_forward(d.head, h)[0];
  const double p = nn::sigmoid(logit);
  if (tape != nullptr) {
    tape->final_h = h;
    tape->logit = logit;
    tape->p = p;
  }
  return p;
}

// dlogit is dL/d(pre-sigmoid score). Discriminator parameter gradients go to
// disc_grads when given; input gradients for the future steps go to dfuture
// when given (the generator path in the G step). scratch absorbs parameter
// gradients when the discriminator is frozen.
void disc_backward(const GanModel& model, const DiscTape& tape, double dlogit,
                   Discriminator* disc_grads, std::vector<nn::Vec>* dfuture,
                   Discriminator* scratch) {
  const Discriminator& d = model.disc;
  const GanConfig& cfg = model.cfg;
  Discriminator& sink = disc_grads != nullptr ? *disc_grads : *scratch;

  nn::Vec dh = nn::linear_backward(d.head, tape.final_h, nn::Vec{dlogit}, sink.head);
  nn::Vec dc(cfg.disc_hidden, 0.0);
  const int total = cfg.past_steps + cfg.future_steps;
  if (dfuture != nullptr) dfuture->assign(cfg.future_steps, nn::Vec{0.0, 0.0});
  for (int t = total - 1; t >= 0; --t) {
    nn::LstmStepGrad sg = nn::lstm_step_backward(d.lstm, tape.cache[t], dh, dc, sink.lstm);
    const nn::Vec dx = nn::linear_backward(d.embed, tape.in_disp[t], sg.dx, sink.embed);
    if (dfuture != nullptr && t >= cfg.past_steps) (*dfuture)[t - cfg.past_steps] = dx;
    dh = std::move(sg.dh_prev);
    dc = std::move(sg.dc_prev);
  }
}

double summed_sq_error(const std::vector<Vec2>& a, const std::vector<Vec2>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const Vec2 d = a[i] - b[i];
    s += d.x * d.x + d.y * d.y;
  }
  return s;
}

Generator zeros_like(const Generator& g) {
  Generator z;
  z.embed = nn::zeros_like(g.embed);
  z.encoder = nn::zeros_like(g.encoder);
  z.hidden_init = nn::zeros_like(g.hidden_init);
  z.decoder = nn::zeros_like(g.decoder);
  z.head = nn::zeros_like(g.head);
  return z;
}

Discriminator zeros_like(const Discriminator& d) {
  Discriminator z;
  z.embed = nn::zeros_like(d.embed);
  z.lstm = nn::zeros_like(d.lstm);
  z.head = nn::zeros_like(d.head);
  return z;
}

void add_grads(GanGrads& acc, const GanGrads& item) {
  std::vector<std::pair<std::string, nn::Tensor2*>> a, b;
  collect(acc.gen, "g", a);
  collect(acc.disc, "d", a);
  collect(const_cast<GanGrads&>(item).gen, "g", b);
  collect(const_cast<GanGrads&>(item).disc, "d", b);
  for (std::size_t i = 0; i < a.size(); ++i) {
    nn::Tensor2& dst = *a[i].second;
    const nn::Tensor2& src = *b[i].second;
    for (std::size_t j = 0; j < dst.size(); ++j) dst.data[j] += src.data[j];
  }
}

}  // namespace

std::vector<std::pair<std::string, nn::Tensor2*>> GanModel::named_params() {
  std::vector<std::pair<std::string, nn::Tensor2*>> out;
  collect(gen, "gen", out);
  collect(disc, "disc", out);
  return out;
}

std::vector<std::pair<std::string, const nn::Tensor2*>> GanModel::named_params() const {
  auto list = const_cast<GanModel*>(this)->named_params();
  std::vector<std::pair<std::string, const nn::Tensor2*>> out;
  out.reserve(list.size());
  for (auto& [name, t] : list) out.emplace_back(name, t);
  return out;
}

std::vector<nn::Tensor2*> GanModel::generator_params() {
  std::vector<std::pair<std::string, nn::Tensor2*>> named;
  collect(gen, "gen", named);
  std::vector<nn::Tensor2*> out;
  out.reserve(named.size());
  for (auto& [name, t] : named) out.push_back(t);
  return out;
}

std::vector<nn::Tensor2*> GanModel::discriminator_params() {
  std::vector<std::pair<std::string, nn::Tensor2*>> named;
  collect(disc, "disc", named);
  std::vector<nn::Tensor2*> out;
  out.reserve(named.size());
  for (auto& [name, t] : named) out.push_back(t);
  return out;
}

GanModel init_gan(const GanConfig& cfg, std::uint64_t seed) {
  Rng rng(derive_seed(seed, 0x6A11));
  GanModel m;
  m.cfg = cfg;
  m.gen.embed = nn::make_linear(2, cfg.embed_dim, rng);
  m.gen.encoder = nn::make_lstm(cfg.embed_dim, cfg.encoder_hidden, rng);
  m.gen.hidden_init = nn::make_linear(cfg.encoder_hidden + cfg.noise_dim, cfg.decoder_hidden, rng);
  m.gen.decoder = nn::make_lstm(cfg.embed_dim, cfg.decoder_hidden, rng);
  m.gen.head = nn::make_linear(cfg.decoder_hidden, 2, rng);
  m.disc.embed = nn::make_linear(2, cfg.embed_dim, rng);
  m.disc.lstm = nn::make_lstm(cfg.embed_dim, cfg.disc_hidden, rng);
  m.disc.head = nn::make_linear(cfg.disc_hidden, 1, rng);
  return m;
}

std::vector<double> draw_noise(Rng& rng, int dim) {
  std::vector<double> z(dim);
  for (double& v : z) v = rng.normal();
  return z;
}

RelativeTrajectory generate(const GanModel& model, const RelativeTrajectory& past,
                            const std::vector<double>& noise) {
  check_past(model, past);
  if (static_cast<int>(noise.size()) != model.cfg.noise_dim) {
    throw std::invalid_argument("noise size " + std::to_string(noise.size()) + " != noise_dim " +
                                std::to_string(model.cfg.noise_dim));
  }
  for (double v : noise) {
    if (!std::isfinite(v)) throw std::invalid_argument("non-finite noise coordinate");
  }
  RelativeTrajectory out;
  out.dt = past.dt;
  out.displacements = gen_forward(model, past.displacements, noise, nullptr);
  return out;
}

std::vector<RelativeTrajectory> sample_k(const GanModel& model, const RelativeTrajectory& past,
                                         int k, std::uint64_t seed) {
  if (k < 1) throw std::invalid_argument("sample_k: k must be >= 1");
  check_past(model, past);
  Rng rng(seed);
  std::vector<RelativeTrajectory> out;
  out.reserve(k);
  for (int j = 0; j < k; ++j) {
    out.push_back(generate(model, past, draw_noise(rng, model.cfg.noise_dim)));
  }
  return out;
}

double discriminate(const GanModel& model, const RelativeTrajectory& past,
                    const RelativeTrajectory& future) {
  check_past(model, past);
  future.validate();
  if (static_cast<int>(future.length()) != model.cfg.future_steps) {
    throw std::invalid_argument("future trajectory length " + std::to_string(future.length()) +
                                " != expected " + std::to_string(model.cfg.future_steps));
  }
  check_same_dt(past.dt, future.dt);
  return disc_forward(model, past.displacements, future.displacements, nullptr);
}

double variety_from_samples(const std::vector<RelativeTrajectory>& samples,
                            const RelativeTrajectory& ground_truth) {
  if (samples.empty()) throw std::invalid_argument("variety_from_samples: no samples");
  double best = std::numeric_limits<double>::infinity();
  for (const RelativeTrajectory& s : samples) {
    if (s.length() != ground_truth.length()) {
      throw std::invalid_argument("variety_from_samples: sample/ground-truth length mismatch");
    }
    best = std::min(best, summed_sq_error(s.displacements, ground_truth.displacements));
  }
  return best;
}

double variety_loss(const GanModel& model, const RelativeTrajectory& past,
                    const RelativeTrajectory& ground_truth, int k, std::uint64_t seed) {
  return variety_from_samples(sample_k(model, past, k, seed), ground_truth);
}

void GanGrads::zero() {
  std::vector<std::pair<std::string, nn::Tensor2*>> all;
  collect(gen, "g", all);
  collect(disc, "d", all);
  for (auto& [name, t] : all) t->zero();
}

std::vector<const nn::Tensor2*> GanGrads::generator_grads() const {
  std::vector<std::pair<std::string, nn::Tensor2*>> named;
  collect(const_cast<GanGrads*>(this)->gen, "g", named);
  std::vector<const nn::Tensor2*> out;
  out.reserve(named.size());
  for (auto& [name, t] : named) out.push_back(t);
  return out;
}

std::vector<const nn::Tensor2*> GanGrads::discriminator_grads() const {
  std::vector<std::pair<std::string, nn::Tensor2*>> named;
  collect(const_cast<GanGrads*>(this)->disc, "d", named);
  std::vector<const nn::Tensor2*> out;
  out.reserve(named.size());
  for (auto& [name, t] : named) out.push_back(t);
  return out;
}

GanGrads zero_grads(const GanModel& model) {
  return GanGrads{zeros_like(model.gen), zeros_like(model.disc)};
}

double discriminator_loss(const GanModel& model, std::span<const GanBatchItem> batch,
                          GanGrads* grads, int threads, GanWorkspace* ws) {
  const int n = static_cast<int>(batch.size());
  if (n == 0) throw std::invalid_argument("discriminator_loss: empty batch");
  GanWorkspace local;
  GanWorkspace& work = ws != nullptr ? *ws : local;
  if (grads != nullptr) {
    while (static_cast<int>(work.per_item.size()) < n) work.per_item.push_back(zero_grads(model));
  }
  std::vector<double> losses(n, 0.0);
  const double inv_n = 1.0 / n;

  parallel_for(n, threads, [&](int i) {
    const GanBatchItem& item = batch[i];
    const std::vector<Vec2>& past = item.instance->past.displacements;
    const std::vector<Vec2> fake = gen_forward(model, past, item.disc_noise, nullptr);

    DiscTape tape_real, tape_fake;
    const double p_real = disc_forward(model, past, item.instance->future.displacements,
                                       grads != nullptr ? &tape_real : nullptr);
    const double p_fake = disc_forward(model, past, fake, grads != nullptr ? &tape_fake : nullptr);
    losses[i] = nn::bce_loss(p_real, item.real_label) + nn::bce_loss(p_fake, item.fake_label);
    if (grads != nullptr) {
      work.per_item[i].zero();
      disc_backward(model, tape_real, (p_real - item.real_label) * inv_n,
                    &work.per_item[i].disc, nullptr, nullptr);
      disc_backward(model, tape_fake, (p_fake - item.fake_label) * inv_n,
                    &work.per_item[i].disc, nullptr, nullptr);
    }
  });

  if (grads != nullptr) {
    for (int i = 0; i < n; ++i) add_grads(*grads, work.per_item[i]);
  }
  double total = 0.0;
  for (double l : losses) total += l;
  return total * inv_n;
}

double generator_loss(const GanModel& model, std::span<const GanBatchItem> batch, GanGrads* grads,
                      int threads, GanWorkspace* ws) {
  const int n = static_cast<int>(batch.size());
  if (n == 0) throw std::invalid_argument("generator_loss: empty batch");
  GanWorkspace local;
  GanWorkspace& work = ws != nullptr ? *ws : local;
  if (grads != nullptr) {
    while (static_cast<int>(work.per_item.size()) < n) work.per_item.push_back(zero_grads(model));
  }
  std::vector<double> losses(n, 0.0);
  const double inv_n = 1.0 / n;

  parallel_for(n, threads, [&](int i) {
    const GanBatchItem& item = batch[i];
    const std::vector<Vec2>& past = item.instance->past.displacements;
    const std::vector<Vec2>& truth = item.instance->future.displacements;
    const int k = static_cast<int>(item.gen_noise.size());

    // Pass 1: find the variety argmin without keeping tapes.
    int best_j = 0;
    double best_err = std::numeric_limits<double>::infinity();
    for (int j = 0; j < k; ++j) {
      const std::vector<Vec2> sample = gen_forward(model, past, item.gen_noise[j], nullptr);
      const double err = summed_sq_error(sample, truth);
      if (err < best_err) {
        best_err = err;
        best_j = j;
      }
    }

    // Pass 2: re-decode the adversarial sample (index 0) and the variety
    // argmin with tapes.
    GenTape tape0;
    const std::vector<Vec2> sample0 =
        gen_forward(model, past, item.gen_noise[0], grads != nullptr ? &tape0 : nullptr);
    DiscTape dtape;
    const double p = disc_forward(model, past, sample0, grads != nullptr ? &dtape : nullptr);
    losses[i] = nn::bce_loss(p, item.gen_real_label) + best_err;

    if (grads == nullptr) return;
    work.per_item[i].zero();

    Discriminator scratch = zeros_like(model.disc);
    std::vector<nn::Vec> dfuture;
    disc_backward(model, dtape, (p - item.gen_real_label) * inv_n, nullptr, &dfuture, &scratch);

    if (best_j == 0) {
      for (int t = 0; t < static_cast<int>(dfuture.size()); ++t) {
        dfuture[t][0] += 2.0 * (sample0[t].x - truth[t].x) * inv_n;
        dfuture[t][1] += 2.0 * (sample0[t].y - truth[t].y) * inv_n;
      }
      gen_backward(model, tape0, dfuture, work.per_item[i]);
    } else {
      gen_backward(model, tape0, dfuture, work.per_item[i]);
      GenTape tape_best;
      const std::vector<Vec2> sample_best = gen_forward(model, past, item.gen_noise[best_j], &tape_best);
      std::vector<nn::Vec> dvar(sample_best.size());
      for (int t = 0; t < static_cast<int>(sample_best.size()); ++t) {
        dvar[t] = {2.0 * (sample_best[t].x - truth[t].x) * inv_n,
                   2.0 * (sample_best[t].y - truth[t].y) * inv_n};
      }
      gen_backward(model, tape_best, dvar, work.per_item[i]);
    }
  });

  if (grads != nullptr) {
    for (int i = 0; i < n; ++i) add_grads(*grads, work.per_item[i]);
  }
  double total = 0.0;
  for (double l : losses) total += l;
  return total * inv_n;
}

double raw_min_k_ade(const GanModel& model, const std::vector<TrainInstance>& instances, int k,
                     std::uint64_t seed, int threads) {
  if (instances.empty()) return 0.0;
  std::vector<double> best(instances.size(), 0.0);
  parallel_for(static_cast<int>(instances.size()), threads, [&](int i) {
    const TrainInstance& inst = instances[i];
    const Trajectory truth = future_world_trajectory(inst);
    const auto samples = sample_k(model, inst.past, k, derive_seed(seed, i));
    double lo = std::numeric_limits<double>::infinity();
    for (const RelativeTrajectory& s : samples) {
      const Trajectory pred = transform_to_world(s, inst.agent_pose);
      double sum = 0.0;
      for (std::size_t t = 0; t < pred.length(); ++t) {
        sum += (pred.positions[t] - truth.positions[t]).norm();
      }
      lo = std::min(lo, sum / static_cast<double>(pred.length()));
    }
    best[i] = lo;
  });
  double total = 0.0;
  for (double b : best) total += b;
  return total / static_cast<double>(best.size());
}

namespace {

struct ParamSnapshot {
  std::vector<nn::Tensor2> tensors;

  static ParamSnapshot capture(GanModel& m) {
    ParamSnapshot s;
    for (auto& [name, t] : m.named_params()) s.tensors.push_back(*t);
    return s;
  }
  void restore(GanModel& m) const {
    auto params = m.named_params();
    for (std::size_t i = 0; i < params.size(); ++i) *params[i].second = tensors[i];
  }
};

}  // namespace

TrainResult train(GanModel& model, const DatasetSplit& split, const TrainConfig& cfg,
                  const EpochCallback& on_epoch) {
  const auto gp = model.generator_params();
  const auto dp = model.discriminator_params();
  nn::AdamState g_opt = nn::AdamState::init({cfg.lr_g, 0.9, 0.999, 1e-8}, {gp.begin(), gp.end()});
  nn::AdamState d_opt = nn::AdamState::init({cfg.lr_d, 0.9, 0.999, 1e-8}, {dp.begin(), dp.end()});
  return train_resume(model, g_opt, d_opt, 0, split, cfg, on_epoch);
}

TrainResult train_resume(GanModel& model, nn::AdamState& g_opt, nn::AdamState& d_opt,
                         int start_epoch, const DatasetSplit& split, const TrainConfig& cfg,
                         const EpochCallback& on_epoch) {
  if (split.train.empty()) throw std::invalid_argument("train: empty training split");
  if (cfg.k_variety < 1) throw std::invalid_argument("train: k_variety must be >= 1");
  if (cfg.lr_g <= 0.0 || cfg.lr_d <= 0.0) throw std::invalid_argument("train: learning rates must be > 0");

  TrainResult result;
  result.epochs_completed = start_epoch;
  const int n_train = static_cast<int>(split.train.size());
  std::vector<int> order(n_train);
  GanWorkspace ws;
  GanGrads grads = zero_grads(model);
  ParamSnapshot snapshot = ParamSnapshot::capture(model);

  auto gen_params = model.generator_params();
  auto disc_params = model.discriminator_params();

  for (int epoch = start_epoch; epoch < cfg.epochs; ++epoch) {
    Rng erng(derive_seed(cfg.seed, 0xE90C0000ULL + static_cast<std::uint64_t>(epoch)));
    for (int i = 0; i < n_train; ++i) order[i] = i;
    for (int i = n_train - 1; i > 0; --i) std::swap(order[i], order[erng.uniform_int(i + 1)]);

    EpochMetrics em;
    em.epoch = epoch;
    int n_batches = 0;
    bool finite = true;
    std::string reason;

    try {
      for (int begin = 0; begin < n_train && finite; begin += cfg.batch_size) {
        const int end = std::min(begin + cfg.batch_size, n_train);
        std::vector<GanBatchItem> batch(end - begin);
        for (int b = 0; b < end - begin; ++b) {
          GanBatchItem& item = batch[b];
          item.instance = &split.train[order[begin + b]];
          item.disc_noise = draw_noise(erng, model.cfg.noise_dim);
          item.gen_noise.resize(cfg.k_variety);
          for (int j = 0; j < cfg.k_variety; ++j) {
            item.gen_noise[j] = draw_noise(erng, model.cfg.noise_dim);
          }
          item.real_label = erng.uniform(cfg.real_label_min, cfg.real_label_max);
          item.fake_label = erng.uniform(cfg.fake_label_min, cfg.fake_label_max);
          item.gen_real_label = erng.uniform(cfg.real_label_min, cfg.real_label_max);
          em.real_label_lo = std::min({em.real_label_lo, item.real_label, item.gen_real_label});
          em.real_label_hi = std::max({em.real_label_hi, item.real_label, item.gen_real_label});
          em.fake_label_lo = std::min(em.fake_label_lo, item.fake_label);
          em.fake_label_hi = std::max(em.fake_label_hi, item.fake_label);
        }

        grads.zero();
        const double d_loss = discriminator_loss(model, batch, &grads, cfg.threads, &ws);
        adam_update(d_opt, disc_params, grads.discriminator_grads());

        grads.zero();
        const double g_loss = generator_loss(model, batch, &grads, cfg.threads, &ws);
        adam_update(g_opt, gen_params, grads.generator_grads());

        if (!std::isfinite(d_loss) || !std::isfinite(g_loss)) {
          finite = false;
          reason = "non-finite loss in epoch " + std::to_string(epoch);
          break;
        }
        em.d_loss += d_loss;
        em.g_loss += g_loss;
        ++n_batches;
      }
    } catch (const numeric_error& e) {
      finite = false;
      reason = e.what();
    }

    if (!finite) {
      snapshot.restore(model);
      result.aborted = true;
      result.abort_reason = reason;
      return result;
    }

    em.d_loss /= n_batches;
    em.g_loss /= n_batches;
    em.val_min_k_ade =
        raw_min_k_ade(model, split.val, cfg.val_k, derive_seed(cfg.seed, 0x7A10), cfg.threads);
    result.history.push_back(em);
    result.epochs_completed = epoch + 1;
    snapshot = ParamSnapshot::capture(model);
    if (on_epoch) on_epoch(model, g_opt, d_opt, em);
  }
  return result;
}

// --- persistence ---

namespace {

nlohmann::json gan_config_json(const GanConfig& c) {
  return {{"embed_dim", c.embed_dim},       {"encoder_hidden", c.encoder_hidden},
          {"decoder_hidden", c.decoder_hidden}, {"disc_hidden", c.disc_hidden},
          {"noise_dim", c.noise_dim},       {"past_steps", c.past_steps},
          {"future_steps", c.future_steps}};
}

GanConfig gan_config_from_json(const nlohmann::json& j) {
  GanConfig c;
  c.embed_dim = j.at("embed_dim").get<int>();
  c.encoder_hidden = j.at("encoder_hidden").get<int>();
  c.decoder_hidden = j.at("decoder_hidden").get<int>();
  c.disc_hidden = j.at("disc_hidden").get<int>();
  c.noise_dim = j.at("noise_dim").get<int>();
  c.past_steps = j.at("past_steps").get<int>();
  c.future_steps = j.at("future_steps").get<int>();
  return c;
}

nlohmann::json train_config_json(const TrainConfig& c) {
  return {{"epochs", c.epochs},
          {"batch_size", c.batch_size},
          {"k_variety", c.k_variety},
          {"lr_g", c.lr_g},
          {"lr_d", c.lr_d},
          {"real_label_min", c.real_label_min},
          {"real_label_max", c.real_label_max},
          {"fake_label_min", c.fake_label_min},
          {"fake_label_max", c.fake_label_max},
          {"seed", c.seed},
          {"val_k", c.val_k}};
}

TrainConfig train_config_from_json(const nlohmann::json& j) {
  TrainConfig c;
  c.epochs = j.at("epochs").get<int>();
  c.batch_size = j.at("batch_size").get<int>();
  c.k_variety = j.at("k_variety").get<int>();
  c.lr_g = j.at("lr_g").get<double>();
  c.lr_d = j.at("lr_d").get<double>();
  c.real_label_min = j.at("real_label_min").get<double>();
  c.real_label_max = j.at("real_label_max").get<double>();
  c.fake_label_min = j.at("fake_label_min").get<double>();
  c.fake_label_max = j.at("fake_label_max").get<double>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.val_k = j.at("val_k").get<int>();
  return c;
}

void append_opt_sections(const std::string& prefix, const nn::AdamState& opt,
                         const std::vector<std::pair<std::string, const nn::Tensor2*>>& params,
                         std::vector<std::pair<std::string, const nn::Tensor2*>>& sections) {
  for (std::size_t i = 0; i < params.size(); ++i) {
    sections.emplace_back(prefix + ".m." + params[i].first, &opt.m[i]);
    sections.emplace_back(prefix + ".v." + params[i].first, &opt.v[i]);
  }
}

}  // namespace

void save_checkpoint(const std::string& prefix, const Checkpoint& ckpt) {
  GanModel& model = const_cast<GanModel&>(ckpt.model);
  std::vector<std::pair<std::string, nn::Tensor2*>> gen_named, disc_named;
  collect(model.gen, "gen", gen_named);
  collect(model.disc, "disc", disc_named);

  std::vector<std::pair<std::string, const nn::Tensor2*>> sections;
  std::vector<std::pair<std::string, const nn::Tensor2*>> gen_const, disc_const;
  for (auto& [name, t] : gen_named) {
    sections.emplace_back(name, t);
    gen_const.emplace_back(name, t);
  }
  for (auto& [name, t] : disc_named) {
    sections.emplace_back(name, t);
    disc_const.emplace_back(name, t);
  }
  append_opt_sections("opt.g", ckpt.g_opt, gen_const, sections);
  append_opt_sections("opt.d", ckpt.d_opt, disc_const, sections);
  nn::save_params(prefix + ".nnp", sections);

  nlohmann::json j{{"gan", gan_config_json(ckpt.model.cfg)},
                   {"train", train_config_json(ckpt.train_cfg)},
                   {"epoch", ckpt.epoch},
                   {"manifest_hash", ckpt.manifest_hash},
                   {"adam", {{"g_step", ckpt.g_opt.step},
                             {"d_step", ckpt.d_opt.step},
                             {"g_alpha", ckpt.g_opt.cfg.alpha},
                             {"d_alpha", ckpt.d_opt.cfg.alpha}}}};
  std::ofstream file(prefix + ".json", std::ios::binary | std::ios::trunc);
  if (!file) throw data_error("cannot write checkpoint sidecar: " + prefix + ".json");
  const std::string s = j.dump(2) + "\n";
  file.write(s.data(), static_cast<std::streamsize>(s.size()));
}

Checkpoint load_checkpoint(const std::string& prefix) {
  std::ifstream side(prefix + ".json");
  if (!side) throw data_error("cannot open checkpoint sidecar: " + prefix + ".json");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(side);
  } catch (const nlohmann::json::exception& e) {
    throw data_error("corrupt checkpoint sidecar " + prefix + ".json: " + e.what());
  }

  Checkpoint ckpt;
  const GanConfig cfg = gan_config_from_json(j.at("gan"));
  if (cfg.noise_dim != 8 || cfg.past_steps != 8 || cfg.future_steps != 8) {
    throw data_error("checkpoint " + prefix + ": expected noise_dim = M = N = 8, got noise_dim=" +
                     std::to_string(cfg.noise_dim) + " M=" + std::to_string(cfg.past_steps) +
                     " N=" + std::to_string(cfg.future_steps));
  }
  ckpt.train_cfg = train_config_from_json(j.at("train"));
  ckpt.epoch = j.at("epoch").get<int>();
  ckpt.manifest_hash = j.at("manifest_hash").get<std::uint64_t>();

  // Shape the model, then fill tensors by section name.
  ckpt.model = init_gan(cfg, 0);
  auto g_params = ckpt.model.generator_params();
  auto d_params = ckpt.model.discriminator_params();
  ckpt.g_opt = nn::AdamState::init({j.at("adam").at("g_alpha").get<double>(), 0.9, 0.999, 1e-8},
                                   {g_params.begin(), g_params.end()});
  ckpt.d_opt = nn::AdamState::init({j.at("adam").at("d_alpha").get<double>(), 0.9, 0.999, 1e-8},
                                   {d_params.begin(), d_params.end()});
  ckpt.g_opt.step = j.at("adam").at("g_step").get<long long>();
  ckpt.d_opt.step = j.at("adam").at("d_step").get<long long>();

  auto sections = nn::load_params(prefix + ".nnp");
  const auto find_section = [&](const std::string& name) -> const nn::Tensor2* {
    for (const auto& [n, t] : sections) {
      if (n == name) return &t;
    }
    return nullptr;
  };
  const auto fill = [&](const std::string& name, nn::Tensor2& dst, bool required) {
    const nn::Tensor2* src = find_section(name);
    if (src == nullptr) {
      if (required) throw data_error("checkpoint " + prefix + ": missing section " + name);
      return;
    }
    if (!dst.same_shape(*src)) {
      throw data_error("checkpoint " + prefix + ": shape mismatch in section " + name);
    }
    dst = *src;
    if (!dst.all_finite()) {
      throw data_error("checkpoint " + prefix + ": non-finite values in section " + name);
    }
  };

  std::vector<std::pair<std::string, nn::Tensor2*>> gen_named, disc_named;
  collect(ckpt.model.gen, "gen", gen_named);
  collect(ckpt.model.disc, "disc", disc_named);
  for (auto& [name, t] : gen_named) fill(name, *t, true);
  for (auto& [name, t] : disc_named) fill(name, *t, true);
  for (std::size_t i = 0; i < gen_named.size(); ++i) {
    fill("opt.g.m." + gen_named[i].first, ckpt.g_opt.m[i], false);
    fill("opt.g.v." + gen_named[i].first, ckpt.g_opt.v[i], false);
  }
  for (std::size_t i = 0; i < disc_named.size(); ++i) {
    fill("opt.d.m." + disc_named[i].first, ckpt.d_opt.m[i], false);
    fill("opt.d.v." + disc_named[i].first, ckpt.d_opt.v[i], false);
  }
  return ckpt;
}

}  // namespace intent
