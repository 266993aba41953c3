#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "intent/rng.hpp"

namespace intent::nn {

using Vec = std::vector<double>;

// Dense row-major matrix of 64-bit floats. Column vectors use cols == 1.
struct Tensor2 {
  int rows = 0;
  int cols = 0;
  std::vector<double> data;

  Tensor2() = default;
  Tensor2(int r, int c) : rows(r), cols(c), data(static_cast<std::size_t>(r) * c, 0.0) {}

  double& at(int r, int c) { return data[static_cast<std::size_t>(r) * cols + c]; }
  double at(int r, int c) const { return data[static_cast<std::size_t>(r) * cols + c]; }
  std::size_t size() const { return data.size(); }
  bool same_shape(const Tensor2& o) const { return rows == o.rows && cols == o.cols; }
  bool all_finite() const;
  void zero();
};

Tensor2 zeros_like(const Tensor2& t);

// y = w x + b. The same struct holds parameters and gradient accumulators.
struct Linear {
  Tensor2 w;  // out x in
  Tensor2 b;  // out x 1

  int in_size() const { return w.cols; }
  int out_size() const { return w.rows; }
};

Linear make_linear(int in, int out, Rng& rng);
Linear zeros_like(const Linear& l);

Vec linear_forward(const Linear& l, const Vec& x);
// Accumulates dW, db into grads and returns dL/dx.
Vec linear_backward(const Linear& l, const Vec& x, const Vec& dy, Linear& grads);

// Gate parameters of one LSTM cell. Each weight is hidden x (input + hidden),
// applied to the concatenation [x; h_prev].
struct LstmCellParams {
  int input_size = 0;
  int hidden_size = 0;
  Tensor2 w_i, w_f, w_g, w_o;
  Tensor2 b_i, b_f, b_g, b_o;
};

// Uniform +-1/sqrt(fan_in) weights; forget-gate bias starts at 1.0.
LstmCellParams make_lstm(int input_size, int hidden_size, Rng& rng);
LstmCellParams zeros_like(const LstmCellParams& p);

struct LstmState {
  Vec h, c;
};

// Intermediates needed by the backward pass.
struct LstmStepCache {
  Vec x, h_prev, c_prev;
  Vec i, f, g, o, c;
};

// One cell update:
//   i = sigmoid(W_i [x;h] + b_i), f = sigmoid(...), g = tanh(...), o = sigmoid(...)
//   c = f*c_prev + i*g,  h = o*tanh(c)
LstmState lstm_step(const LstmCellParams& p, const Vec& x, const Vec& h_prev, const Vec& c_prev,
                    LstmStepCache* cache = nullptr);

struct LstmStepGrad {
  Vec dx, dh_prev, dc_prev;
};

// Backpropagates (dL/dh, dL/dc) through one cached step, accumulating
// parameter gradients into grads.
LstmStepGrad lstm_step_backward(const LstmCellParams& p, const LstmStepCache& cache, const Vec& dh,
                                const Vec& dc, LstmCellParams& grads);

// Binary cross entropy with the prediction clamped to [1e-7, 1 - 1e-7].
double bce_loss(double prediction, double label);

struct AdamConfig {
  double alpha = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  AdamConfig cfg;
  long long step = 0;
  std::vector<Tensor2> m, v;  // moment accumulators, one per parameter tensor

  static AdamState init(const AdamConfig& cfg, const std::vector<const Tensor2*>& params);
};

// Bias-corrected Adam step over a fixed parameter list. Throws numeric_error
// on non-finite gradients.
void adam_update(AdamState& state, const std::vector<Tensor2*>& params,
                 const std::vector<const Tensor2*>& grads);

// Central-difference check of analytic gradients: perturbs every parameter
// element by +-fd_step, re-evaluates loss_fn, and returns the maximum of
// |analytic - numeric| / max(|analytic|, |numeric|, 1e-8).
double grad_check(const std::vector<Tensor2*>& params,
                  const std::vector<const Tensor2*>& analytic_grads,
                  const std::function<double()>& loss_fn, double fd_step = 1e-5);

void fill_uniform_fan_in(Tensor2& w, Rng& rng);

inline double sigmoid(double a) { return 1.0 / (1.0 + std::exp(-a)); }

}  // namespace intent::nn
