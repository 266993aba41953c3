#include "intent/nn.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "intent/errors.hpp"

namespace intent::nn {

bool Tensor2::all_finite() const {
  for (double v : data) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

void Tensor2::zero() { std::fill(data.begin(), data.end(), 0.0); }

Tensor2 zeros_like(const Tensor2& t) { return Tensor2(t.rows, t.cols); }

void fill_uniform_fan_in(Tensor2& w, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(std::max(w.cols, 1)));
  for (double& v : w.data) v = rng.uniform(-bound, bound);
}

Linear make_linear(int in, int out, Rng& rng) {
  Linear l{Tensor2(out, in), Tensor2(out, 1)};
  fill_uniform_fan_in(l.w, rng);
  return l;
}

Linear zeros_like(const Linear& l) { return Linear{zeros_like(l.w), zeros_like(l.b)}; }

Vec linear_forward(const Linear& l, const Vec& x) {
  if (static_cast<int>(x.size()) != l.in_size()) {
    throw std::invalid_argument("linear_forward: input size " + std::to_string(x.size()) +
                                " != expected " + std::to_string(l.in_size()));
  }
  Vec y(l.out_size());
  for (int r = 0; r < l.out_size(); ++r) {
    const double* wr = &l.w.data[static_cast<std::size_t>(r) * l.w.cols];
    double acc = l.b.data[r];
    for (int c = 0; c < l.in_size(); ++c) acc += wr[c] * x[c];
    y[r] = acc;
  }
  return y;
}

Vec linear_backward(const Linear& l, const Vec& x, const Vec& dy, Linear& grads) {
  Vec dx(l.in_size(), 0.0);
  for (int r = 0; r < l.out_size(); ++r) {
    const double g = dy[r];
    grads.b.data[r] += g;
    double* gw = &grads.w.data[static_cast<std::size_t>(r) * l.w.cols];
    const double* wr = &l.w.data[static_cast<std::size_t>(r) * l.w.cols];
    for (int c = 0; c < l.in_size(); ++c) {
      gw[c] += g * x[c];
      dx[c] += wr[c] * g;
    }
  }
  return dx;
}

LstmCellParams make_lstm(int input_size, int hidden_size, Rng& rng) {
  LstmCellParams p;
  p.input_size = input_size;
  p.hidden_size = hidden_size;
  const int z = input_size + hidden_size;
  for (Tensor2* w : {&p.w_i, &p.w_f, &p.w_g, &p.w_o}) {
    *w = Tensor2(hidden_size, z);
    fill_uniform_fan_in(*w, rng);
  }
  for (Tensor2* b : {&p.b_i, &p.b_f, &p.b_g, &p.b_o}) *b = Tensor2(hidden_size, 1);
  std::fill(p.b_f.data.begin(), p.b_f.data.end(), 1.0);
  return p;
}

LstmCellParams zeros_like(const LstmCellParams& p) {
  LstmCellParams z;
  z.input_size = p.input_size;
  z.hidden_size = p.hidden_size;
  z.w_i = zeros_like(p.w_i);
  z.w_f = zeros_like(p.w_f);
  z.w_g = zeros_like(p.w_g);
  z.w_o = zeros_like(p.w_o);
  z.b_i = zeros_like(p.b_i);
  z.b_f = zeros_like(p.b_f);
  z.b_g = zeros_like(p.b_g);
  z.b_o = zeros_like(p.b_o);
  return z;
}

namespace {

void check_lstm_shapes(const LstmCellParams& p, const Vec& x, const Vec& h_prev,
                       const Vec& c_prev) {
  if (static_cast<int>(x.size()) != p.input_size) {
    throw std::invalid_argument("lstm_step: input size " + std::to_string(x.size()) +
                                " != input_size " + std::to_string(p.input_size));
  }
  if (static_cast<int>(h_prev.size()) != p.hidden_size) {
    throw std::invalid_argument("lstm_step: h_prev size " + std::to_string(h_prev.size()) +
                                " != hidden_size " + std::to_string(p.hidden_size));
  }
  if (static_cast<int>(c_prev.size()) != p.hidden_size) {
    throw std::invalid_argument("lstm_step: c_prev size " + std::to_string(c_prev.size()) +
                                " != hidden_size " + std::to_string(p.hidden_size));
  }
}

// gate = act(W [x; h_prev] + b)
void gate_forward(const Tensor2& w, const Tensor2& b, const Vec& x, const Vec& h_prev, bool tanh_act,
                  Vec& out) {
  const int n = static_cast<int>(x.size());
  const int hs = static_cast<int>(h_prev.size());
  out.resize(w.rows);
  for (int r = 0; r < w.rows; ++r) {
    const double* wr = &w.data[static_cast<std::size_t>(r) * w.cols];
    double acc = b.data[r];
    for (int c = 0; c < n; ++c) acc += wr[c] * x[c];
    for (int c = 0; c < hs; ++c) acc += wr[n + c] * h_prev[c];
    out[r] = tanh_act ? std::tanh(acc) : sigmoid(acc);
  }
}

// Accumulates dW += da [x; h_prev]^T, db += da, and dz += W^T da where dz is
// split into (dx, dh_prev) by the caller.
void gate_backward(const Tensor2& w, const Vec& da, const Vec& x, const Vec& h_prev, Tensor2& gw,
                   Tensor2& gb, Vec& dx, Vec& dh_prev) {
  const int n = static_cast<int>(x.size());
  const int hs = static_cast<int>(h_prev.size());
  for (int r = 0; r < w.rows; ++r) {
    const double g = da[r];
    gb.data[r] += g;
    double* gwr = &gw.data[static_cast<std::size_t>(r) * w.cols];
    const double* wr = &w.data[static_cast<std::size_t>(r) * w.cols];
    for (int c = 0; c < n; ++c) {
      gwr[c] += g * x[c];
      dx[c] += wr[c] * g;
    }
    for (int c = 0; c < hs; ++c) {
      gwr[n + c] += g * h_prev[c];
      dh_prev[c] += wr[n + c] * g;
    }
  }
}

}  // namespace

LstmState lstm_step(const LstmCellParams& p, const Vec& x, const Vec& h_prev, const Vec& c_prev,
                    LstmStepCache* cache) {
  check_lstm_shapes(p, x, h_prev, c_prev);
  Vec i, f, g, o;
  gate_forward(p.w_i, p.b_i, x, h_prev, false, i);
  gate_forward(p.w_f, p.b_f, x, h_prev, false, f);
  gate_forward(p.w_g, p.b_g, x, h_prev, true, g);
  gate_forward(p.w_o, p.b_o, x, h_prev, false, o);

  LstmState out;
  out.c.resize(p.hidden_size);
  out.h.resize(p.hidden_size);
  for (int j = 0; j < p.hidden_size; ++j) {
    out.c[j] = f[j] * c_prev[j] + i[j] * g[j];
    out.h[j] = o[j] * std::tanh(out.c[j]);
  }
  if (cache != nullptr) {
    cache->x = x;
    cache->h_prev = h_prev;
    cache->c_prev = c_prev;
    cache->i = std::move(i);
    cache->f = std::move(f);
    cache->g = std::move(g);
    cache->o = std::move(o);
    cache->c = out.c;
  }
  return out;
}

LstmStepGrad lstm_step_backward(const LstmCellParams& p, const LstmStepCache& cache, const Vec& dh,
                                const Vec& dc, LstmCellParams& grads) {
  const int hs = p.hidden_size;
  Vec da_i(hs), da_f(hs), da_g(hs), da_o(hs);
  LstmStepGrad out;
  out.dx.assign(p.input_size, 0.0);
  out.dh_prev.assign(hs, 0.0);
  out.dc_prev.assign(hs, 0.0);

  for (int j = 0; j < hs; ++j) {
    const double tc = std::tanh(cache.c[j]);
    const double do_ = dh[j] * tc;
    const double dcj = dc[j] + dh[j] * cache.o[j] * (1.0 - tc * tc);
    const double di = dcj * cache.g[j];
    const double df = dcj * cache.c_prev[j];
    const double dg = dcj * cache.i[j];
    out.dc_prev[j] = dcj * cache.f[j];
    da_i[j] = di * cache.i[j] * (1.0 - cache.i[j]);
    da_f[j] = df * cache.f[j] * (1.0 - cache.f[j]);
    da_g[j] = dg * (1.0 - cache.g[j] * cache.g[j]);
    da_o[j] = do_ * cache.o[j] * (1.0 - cache.o[j]);
  }
  gate_backward(p.w_i, da_i, cache.x, cache.h_prev, grads.w_i, grads.b_i, out.dx, out.dh_prev);
  gate_backward(p.w_f, da_f, cache.x, cache.h_prev, grads.w_f, grads.b_f, out.dx, out.dh_prev);
  gate_backward(p.w_g, da_g, cache.x, cache.h_prev, grads.w_g, grads.b_g, out.dx, out.dh_prev);
  gate_backward(p.w_o, da_o, cache.x, cache.h_prev, grads.w_o, grads.b_o, out.dx, out.dh_prev);
  return out;
}

double bce_loss(double prediction, double label) {
  const double eps = 1e-7;
  const double p = std::clamp(prediction, eps, 1.0 - eps);
  return -(label * std::log(p) + (1.0 - label) * std::log(1.0 - p));
}

AdamState AdamState::init(const AdamConfig& cfg, const std::vector<const Tensor2*>& params) {
  AdamState s;
  s.cfg = cfg;
  s.m.reserve(params.size());
  s.v.reserve(params.size());
  for (const Tensor2* p : params) {
    s.m.push_back(zeros_like(*p));
    s.v.push_back(zeros_like(*p));
  }
  return s;
}

void adam_update(AdamState& state, const std::vector<Tensor2*>& params,
                 const std::vector<const Tensor2*>& grads) {
  if (params.size() != grads.size() || params.size() != state.m.size()) {
    throw std::invalid_argument("adam_update: parameter/gradient/state count mismatch");
  }
  state.step += 1;
  const double b1 = state.cfg.beta1;
  const double b2 = state.cfg.beta2;
  const double bc1 = 1.0 - std::pow(b1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(b2, static_cast<double>(state.step));
  for (std::size_t k = 0; k < params.size(); ++k) {
    Tensor2& p = *params[k];
    const Tensor2& g = *grads[k];
    if (!p.same_shape(g) || !p.same_shape(state.m[k])) {
      throw std::invalid_argument("adam_update: shape mismatch at parameter " + std::to_string(k));
    }
    for (std::size_t j = 0; j < p.size(); ++j) {
      const double gj = g.data[j];
      if (!std::isfinite(gj)) {
        throw numeric_error("adam_update: non-finite gradient at parameter " + std::to_string(k) +
                            " element " + std::to_string(j));
      }
      double& m = state.m[k].data[j];
      double& v = state.v[k].data[j];
      m = b1 * m + (1.0 - b1) * gj;
      v = b2 * v + (1.0 - b2) * gj * gj;
      const double mh = m / bc1;
      const double vh = v / bc2;
      p.data[j] -= state.cfg.alpha * mh / (std::sqrt(vh) + state.cfg.epsilon);
    }
  }
}

double grad_check(const std::vector<Tensor2*>& params,
                  const std::vector<const Tensor2*>& analytic_grads,
                  const std::function<double()>& loss_fn, double fd_step) {
  if (params.size() != analytic_grads.size()) {
    throw std::invalid_argument("grad_check: parameter/gradient count mismatch");
  }
  double worst = 0.0;
  for (std::size_t k = 0; k < params.size(); ++k) {
    Tensor2& p = *params[k];
    const Tensor2& g = *analytic_grads[k];
    for (std::size_t j = 0; j < p.size(); ++j) {
      const double saved = p.data[j];
      p.data[j] = saved + fd_step;
      const double lp = loss_fn();
      p.data[j] = saved - fd_step;
      const double lm = loss_fn();
      p.data[j] = saved;
      const double numeric = (lp - lm) / (2.0 * fd_step);
      const double analytic = g.data[j];
      const double denom = std::max({std::fabs(analytic), std::fabs(numeric), 1e-8});
      worst = std::max(worst, std::fabs(analytic - numeric) / denom);
    }
  }
  return worst;
}

}  // namespace intent::nn
