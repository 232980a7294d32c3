#pragma once

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "mtf/error.hpp"
#include "mtf/random.hpp"

namespace mtf {

// Gate order used everywhere (parameters, caches, gradients).
enum Gate : int { kInputGate = 0, kCandidate = 1, kForgetGate = 2, kOutputGate = 3 };
inline constexpr int kNumGates = 4;

/// One layer of gate weights. w_in maps the layer input, w_rec the previous
/// hidden state; indexed by Gate. The input/forget/output gates use a
/// logistic sigmoid, the candidate uses tanh.
struct LstmLayerParams {
  std::array<Eigen::MatrixXd, kNumGates> w_in;   // hidden x input
  std::array<Eigen::MatrixXd, kNumGates> w_rec;  // hidden x hidden
  std::array<Eigen::VectorXd, kNumGates> bias;   // hidden

  int input_size() const { return static_cast<int>(w_in[0].cols()); }
  int hidden_size() const { return static_cast<int>(w_in[0].rows()); }
};

/// Stacked LSTM plus a linear readout (identity output activation). This is
/// the motion model whose weights all targets share.
struct LstmParams {
  std::vector<LstmLayerParams> layers;
  Eigen::MatrixXd out_weight;  // output x hidden
  Eigen::VectorXd out_bias;    // output

  int num_layers() const { return static_cast<int>(layers.size()); }
  int input_size() const { return layers.front().input_size(); }
  int hidden_size() const { return layers.back().hidden_size(); }
  int output_size() const { return static_cast<int>(out_bias.size()); }
};

/// Applies f to every parameter block of each pack, in one canonical order.
/// All packs must share shapes. Used for the Adam update, zeroing, and the
/// per-coefficient walks in the gradient tests.
template <class F, class... Packs>
void for_each_param(F&& f, LstmParams& head, Packs&... tail) {
  for (std::size_t l = 0; l < head.layers.size(); ++l) {
    for (int g = 0; g < kNumGates; ++g) {
      f(head.layers[l].w_in[g], tail.layers[l].w_in[g]...);
      f(head.layers[l].w_rec[g], tail.layers[l].w_rec[g]...);
      f(head.layers[l].bias[g], tail.layers[l].bias[g]...);
    }
  }
  f(head.out_weight, tail.out_weight...);
  f(head.out_bias, tail.out_bias...);
}

inline LstmParams zeros_like(const LstmParams& p) {
  LstmParams z;
  z.layers.resize(p.layers.size());
  for (std::size_t l = 0; l < p.layers.size(); ++l) {
    for (int g = 0; g < kNumGates; ++g) {
      z.layers[l].w_in[g] = Eigen::MatrixXd::Zero(p.layers[l].w_in[g].rows(), p.layers[l].w_in[g].cols());
      z.layers[l].w_rec[g] = Eigen::MatrixXd::Zero(p.layers[l].w_rec[g].rows(), p.layers[l].w_rec[g].cols());
      z.layers[l].bias[g] = Eigen::VectorXd::Zero(p.layers[l].bias[g].size());
    }
  }
  z.out_weight = Eigen::MatrixXd::Zero(p.out_weight.rows(), p.out_weight.cols());
  z.out_bias = Eigen::VectorXd::Zero(p.out_bias.size());
  return z;
}

/// Glorot-uniform weight init (+-sqrt(6/(fan_in+fan_out))), zero biases.
inline LstmParams make_lstm_params(int input_size, int hidden_size, int num_layers,
                                   int output_size, std::uint64_t seed) {
  if (input_size < 1 || hidden_size < 1 || num_layers < 1 || output_size < 1)
    throw std::invalid_argument("make_lstm_params: all sizes must be >= 1");
  Rng rng(seed);
  auto fill = [&rng](Eigen::MatrixXd& m, int fan_in, int fan_out) {
    const double bound = std::sqrt(6.0 / (fan_in + fan_out));
    for (Eigen::Index r = 0; r < m.rows(); ++r)
      for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = rng.uniform(-bound, bound);
  };
  LstmParams p;
  p.layers.resize(num_layers);
  for (int l = 0; l < num_layers; ++l) {
    const int in = (l == 0) ? input_size : hidden_size;
    for (int g = 0; g < kNumGates; ++g) {
      p.layers[l].w_in[g].resize(hidden_size, in);
      fill(p.layers[l].w_in[g], in, hidden_size);
      p.layers[l].w_rec[g].resize(hidden_size, hidden_size);
      fill(p.layers[l].w_rec[g], hidden_size, hidden_size);
      p.layers[l].bias[g] = Eigen::VectorXd::Zero(hidden_size);
    }
  }
  p.out_weight.resize(output_size, hidden_size);
  fill(p.out_weight, hidden_size, output_size);
  p.out_bias = Eigen::VectorXd::Zero(output_size);
  return p;
}

/// Per-layer hidden and cell vectors; zeroed at the start of every sequence.
struct LstmState {
  std::vector<Eigen::VectorXd> h;
  std::vector<Eigen::VectorXd> c;
};

inline LstmState zero_state(const LstmParams& p) {
  LstmState s;
  s.h.resize(p.layers.size());
  s.c.resize(p.layers.size());
  for (std::size_t l = 0; l < p.layers.size(); ++l) {
    s.h[l] = Eigen::VectorXd::Zero(p.layers[l].hidden_size());
    s.c[l] = Eigen::VectorXd::Zero(p.layers[l].hidden_size());
  }
  return s;
}

struct TrainConfig {
  int epochs = 50;
  double scale = 1000.0;  // normalization divisor for patch coordinates
  double lr = 1e-2;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  int hidden_size = 20;
  int num_layers = 3;

  std::vector<std::string> violations(std::string_view prefix = "train") const {
    std::vector<std::string> out;
    auto field = [&prefix](std::string_view name) { return std::string(prefix) + "." + std::string(name); };
    if (epochs < 1) out.push_back(field("epochs") + ": must be >= 1");
    if (!(scale > 0.0)) out.push_back(field("scale") + ": must be > 0");
    if (!(lr > 0.0)) out.push_back(field("lr") + ": must be > 0");
    if (!(beta1 >= 0.0 && beta1 < 1.0)) out.push_back(field("beta1") + ": must be in [0,1)");
    if (!(beta2 >= 0.0 && beta2 < 1.0)) out.push_back(field("beta2") + ": must be in [0,1)");
    if (!(epsilon > 0.0)) out.push_back(field("epsilon") + ": must be > 0");
    if (hidden_size < 1) out.push_back(field("hidden_size") + ": must be >= 1");
    if (num_layers < 1) out.push_back(field("num_layers") + ": must be >= 1");
    return out;
  }
  void validate() const {
    const auto v = violations();
    if (!v.empty()) {
      std::string msg = "invalid TrainConfig:";
      for (const auto& s : v) msg += " " + s + ";";
      throw std::invalid_argument(msg);
    }
  }
};

/// Adam accumulators shaped like the parameters they update.
struct AdamState {
  LstmParams m;
  LstmParams v;
  long long t = 0;
  double lr = 1e-2;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

inline AdamState make_adam_state(const LstmParams& like, const TrainConfig& cfg = {}) {
  AdamState a;
  a.m = zeros_like(like);
  a.v = zeros_like(like);
  a.lr = cfg.lr;
  a.beta1 = cfg.beta1;
  a.beta2 = cfg.beta2;
  a.epsilon = cfg.epsilon;
  return a;
}

namespace detail {

inline double sigmoid(double a) { return 1.0 / (1.0 + std::exp(-a)); }

/// Everything the backward pass needs from one cell evaluation.
struct CellCache {
  Eigen::VectorXd input;
  Eigen::VectorXd h_prev, c_prev;
  std::array<Eigen::VectorXd, kNumGates> gates;  // activated values
  Eigen::VectorXd cell;
  Eigen::VectorXd tanh_cell;
  Eigen::VectorXd hidden;
};

// c = c_prev (.) f + i (.) j ; h = tanh(c) (.) o
inline void cell_forward(const LstmLayerParams& lp, const Eigen::VectorXd& x,
                         const Eigen::VectorXd& h_prev, const Eigen::VectorXd& c_prev,
                         CellCache* cache, Eigen::VectorXd& h_out, Eigen::VectorXd& c_out) {
  std::array<Eigen::VectorXd, kNumGates> act;
  for (int g = 0; g < kNumGates; ++g) {
    Eigen::VectorXd pre = lp.w_in[g] * x + lp.w_rec[g] * h_prev + lp.bias[g];
    if (g == kCandidate)
      act[g] = pre.array().tanh();
    else
      act[g] = pre.unaryExpr([](double a) { return sigmoid(a); });
  }
  Eigen::VectorXd c_new =
      c_prev.cwiseProduct(act[kForgetGate]) + act[kInputGate].cwiseProduct(act[kCandidate]);
  Eigen::VectorXd tc = c_new.array().tanh();
  Eigen::VectorXd h_new = tc.cwiseProduct(act[kOutputGate]);
  if (cache) {
    cache->input = x;
    cache->h_prev = h_prev;
    cache->c_prev = c_prev;
    cache->gates = act;
    cache->cell = c_new;
    cache->tanh_cell = tc;
    cache->hidden = h_new;
  }
  c_out = std::move(c_new);
  h_out = std::move(h_new);
}

inline void check_state_shapes(const LstmParams& p, const LstmState& s) {
  if (s.h.size() != p.layers.size() || s.c.size() != p.layers.size())
    throw std::invalid_argument("lstm state layer count does not match params");
  for (std::size_t l = 0; l < p.layers.size(); ++l)
    if (s.h[l].size() != p.layers[l].hidden_size() || s.c[l].size() != p.layers[l].hidden_size())
      throw std::invalid_argument("lstm state width does not match params");
}

}  // namespace detail

/// One step through the stack: each layer feeds the next, the last hidden
/// vector goes through the linear readout. Updates `state` in place.
inline Eigen::VectorXd forward_step(const LstmParams& params, LstmState& state,
                                    const Eigen::VectorXd& x) {
  if (x.size() != params.input_size())
    throw std::invalid_argument("forward_step: input size " + std::to_string(x.size()) +
                                " does not match layer-1 input size " +
                                std::to_string(params.input_size()));
  detail::check_state_shapes(params, state);
  Eigen::VectorXd cur = x;
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    detail::cell_forward(params.layers[l], cur, state.h[l], state.c[l], nullptr, state.h[l],
                         state.c[l]);
    cur = state.h[l];
  }
  return params.out_weight * cur + params.out_bias;
}

/// Runs the rows in order through a zero-initialized state; row t's output is
/// the prediction for row t+1.
inline Eigen::MatrixXd forward_sequence(const LstmParams& params, const Eigen::MatrixXd& rows) {
  if (rows.rows() < 1) throw std::invalid_argument("forward_sequence: need at least one row");
  LstmState state = zero_state(params);
  Eigen::MatrixXd out(rows.rows(), params.output_size());
  for (Eigen::Index t = 0; t < rows.rows(); ++t)
    out.row(t) = forward_step(params, state, rows.row(t).transpose()).transpose();
  return out;
}

/// Prediction for the row following the patch: the final output of
/// forward_sequence.
inline Eigen::VectorXd predict_next(const LstmParams& params, const Eigen::MatrixXd& rows) {
  const Eigen::MatrixXd out = forward_sequence(params, rows);
  return out.row(out.rows() - 1).transpose();
}

struct BpttResult {
  double loss = 0.0;
  LstmParams grads;
};

/// MSE loss and full-sequence gradients for teacher-forced one-step-ahead
/// pairs: inputs rows[0..M-2], targets rows[1..M-1]. Loss is averaged over
/// pairs and coordinates.
inline BpttResult backprop(const LstmParams& params, const Eigen::MatrixXd& rows) {
  if (rows.rows() < 2) throw std::invalid_argument("backprop: need at least two rows");
  if (rows.cols() != params.input_size())
    throw std::invalid_argument("backprop: row width does not match input size");
  const int steps = static_cast<int>(rows.rows()) - 1;
  const int layers = params.num_layers();
  const int dim = params.output_size();

  std::vector<std::vector<detail::CellCache>> cache(layers);
  for (auto& c : cache) c.resize(steps);
  std::vector<Eigen::VectorXd> outputs(steps);

  // forward
  LstmState state = zero_state(params);
  for (int t = 0; t < steps; ++t) {
    Eigen::VectorXd cur = rows.row(t).transpose();
    for (int l = 0; l < layers; ++l) {
      detail::cell_forward(params.layers[l], cur, state.h[l], state.c[l], &cache[l][t],
                           state.h[l], state.c[l]);
      cur = state.h[l];
    }
    outputs[t] = params.out_weight * cur + params.out_bias;
  }

  BpttResult res;
  res.grads = zeros_like(params);
  const double denom = static_cast<double>(steps) * dim;
  for (int t = 0; t < steps; ++t)
    res.loss += (outputs[t] - rows.row(t + 1).transpose()).squaredNorm();
  res.loss /= denom;

  // backward through time, top layer first within each step
  std::vector<Eigen::VectorXd> dh(layers), dc(layers);
  for (int l = 0; l < layers; ++l) {
    dh[l] = Eigen::VectorXd::Zero(params.layers[l].hidden_size());
    dc[l] = Eigen::VectorXd::Zero(params.layers[l].hidden_size());
  }
  for (int t = steps - 1; t >= 0; --t) {
    const Eigen::VectorXd dy = 2.0 * (outputs[t] - rows.row(t + 1).transpose()) / denom;
    res.grads.out_weight.noalias() += dy * cache[layers - 1][t].hidden.transpose();
    res.grads.out_bias += dy;
    dh[layers - 1] += params.out_weight.transpose() * dy;

    for (int l = layers - 1; l >= 0; --l) {
      const detail::CellCache& cc = cache[l][t];
      const Eigen::VectorXd& gi = cc.gates[kInputGate];
      const Eigen::VectorXd& gj = cc.gates[kCandidate];
      const Eigen::VectorXd& gf = cc.gates[kForgetGate];
      const Eigen::VectorXd& go = cc.gates[kOutputGate];

      const Eigen::VectorXd d_out = dh[l].cwiseProduct(cc.tanh_cell);
      dc[l] += dh[l].cwiseProduct(go).cwiseProduct(
          (1.0 - cc.tanh_cell.array().square()).matrix());

      std::array<Eigen::VectorXd, kNumGates> d_pre;
      d_pre[kInputGate] =
          dc[l].cwiseProduct(gj).cwiseProduct((gi.array() * (1.0 - gi.array())).matrix());
      d_pre[kCandidate] = dc[l].cwiseProduct(gi).cwiseProduct((1.0 - gj.array().square()).matrix());
      d_pre[kForgetGate] =
          dc[l].cwiseProduct(cc.c_prev).cwiseProduct((gf.array() * (1.0 - gf.array())).matrix());
      d_pre[kOutputGate] =
          d_out.cwiseProduct((go.array() * (1.0 - go.array())).matrix());

      const Eigen::VectorXd dc_prev = dc[l].cwiseProduct(gf);
      Eigen::VectorXd dx = Eigen::VectorXd::Zero(params.layers[l].input_size());
      Eigen::VectorXd dh_prev = Eigen::VectorXd::Zero(params.layers[l].hidden_size());
      LstmLayerParams& g = res.grads.layers[l];
      for (int gate = 0; gate < kNumGates; ++gate) {
        g.w_in[gate].noalias() += d_pre[gate] * cc.input.transpose();
        g.w_rec[gate].noalias() += d_pre[gate] * cc.h_prev.transpose();
        g.bias[gate] += d_pre[gate];
        dx.noalias() += params.layers[l].w_in[gate].transpose() * d_pre[gate];
        dh_prev.noalias() += params.layers[l].w_rec[gate].transpose() * d_pre[gate];
      }
      dh[l] = dh_prev;
      dc[l] = dc_prev;
      if (l > 0) dh[l - 1] += dx;  // layer input is the hidden state below, same step
    }
  }
  return res;
}

inline void adam_update(LstmParams& params, LstmParams& grads, AdamState& adam) {
  adam.t += 1;
  const double bc1 = 1.0 - std::pow(adam.beta1, static_cast<double>(adam.t));
  const double bc2 = 1.0 - std::pow(adam.beta2, static_cast<double>(adam.t));
  for_each_param(
      [&](auto& p, auto& g, auto& m, auto& v) {
        m.array() = adam.beta1 * m.array() + (1.0 - adam.beta1) * g.array();
        v.array() = adam.beta2 * v.array() + (1.0 - adam.beta2) * g.array().square();
        p.array() -= adam.lr * (m.array() / bc1) / ((v.array() / bc2).sqrt() + adam.epsilon);
      },
      params, grads, adam.m, adam.v);
}

/// Online training session: `epochs` full-sequence BPTT passes with one Adam
/// update each. Returns the last epoch's loss, or nullopt when the patch is
/// too short to form a training pair (caller keeps params unchanged).
inline std::optional<double> train_online(LstmParams& params, AdamState& adam,
                                          const Eigen::MatrixXd& rows, const TrainConfig& cfg) {
  cfg.validate();
  if (rows.rows() < 2) return std::nullopt;
  double loss = 0.0;
  for (int e = 0; e < cfg.epochs; ++e) {
    BpttResult res = backprop(params, rows);
    loss = res.loss;
    if (!std::isfinite(loss)) throw DivergenceError("lstm training diverged: non-finite loss");
    adam_update(params, res.grads, adam);
  }
  return loss;
}

}  // namespace mtf
