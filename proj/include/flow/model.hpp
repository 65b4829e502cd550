#pragma once

// MVFNet: a DeepConvLSTM-style backbone, the MVF-layer emitting n groups of k
// logits, and a three-layer voting network, plus the baseline single-head
// classifier. Every layer implements its own backward pass; all of them are
// templated on the scalar so the same code is gradient-checked in double and
// trained in float.

#include <cstdint>
#include <filesystem>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "flow/dataset.hpp"

namespace flow::nn {

template <typename S>
using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// A learnable tensor and its gradient buffer (same shape).
template <typename S>
struct Tensor {
  std::string name;
  Mat<S> value;
  Mat<S> grad;

  Tensor() = default;
  Tensor(std::string n, int rows, int cols)
      : name(std::move(n)), value(Mat<S>::Zero(rows, cols)), grad(Mat<S>::Zero(rows, cols)) {}

  void zero_grad() { grad.setZero(); }
};

template <typename S>
using ParamList = std::vector<Tensor<S>*>;

// Sequence batch of shape (batch, steps, channels), stored as a row-major
// (batch * steps) x channels matrix. Batch-major rows are sample * steps + t;
// time-major rows are t * batch + sample.
template <typename S>
struct SeqBatch {
  int batch = 0;
  int steps = 0;
  Mat<S> data;
};

template <typename S>
SeqBatch<S> to_time_major(const SeqBatch<S>& x);
template <typename S>
SeqBatch<S> to_batch_major(const SeqBatch<S>& x);

// Packs windows into a batch-major SeqBatch.
template <typename S>
SeqBatch<S> pack_windows(std::span<const Window> windows);

// Samples U(-1/sqrt(fan_in), 1/sqrt(fan_in)) in double so float and double
// models built from one seed hold the same values up to rounding.
class Initializer {
 public:
  explicit Initializer(std::uint64_t seed) : rng_(seed) {}
  template <typename S>
  void uniform(Mat<S>& m, int fan_in);

 private:
  std::mt19937_64 rng_;
};

// Temporal convolution (valid padding, stride 1) followed by a rectifier.
template <typename S>
class Conv1d {
 public:
  Conv1d(std::string name, int in_channels, int out_channels, int kernel);
  void init(Initializer& init);

  SeqBatch<S> forward(const SeqBatch<S>& x);
  // Takes dL/d(output) and returns dL/d(input) (empty when !need_input_grad).
  Mat<S> backward(const Mat<S>& grad_out, bool need_input_grad);

  ParamList<S> params() { return {&weight_, &bias_}; }
  int out_steps(int in_steps) const { return in_steps - kernel_ + 1; }

 private:
  int in_channels_, out_channels_, kernel_;
  Tensor<S> weight_;  // (kernel * in) x out, row index k * in + c
  Tensor<S> bias_;    // 1 x out
  int batch_ = 0, in_steps_ = 0;
  Mat<S> cols_;
  Mat<S> out_;
};

// Standard four-gate LSTM (gate order i, f, g, o) over a time-major batch.
template <typename S>
class Lstm {
 public:
  Lstm(std::string name, int input, int hidden);
  void init(Initializer& init);

  // Input and output are time-major; output holds every hidden state.
  SeqBatch<S> forward(const SeqBatch<S>& x);
  Mat<S> backward(const Mat<S>& grad_hidden, bool need_input_grad);

  ParamList<S> params() { return {&w_input_, &w_hidden_, &bias_}; }
  int hidden() const { return hidden_; }

 private:
  int input_, hidden_;
  Tensor<S> w_input_;   // input x 4H
  Tensor<S> w_hidden_;  // H x 4H
  Tensor<S> bias_;      // 1 x 4H
  int batch_ = 0, steps_ = 0;
  Mat<S> x_;
  Mat<S> gates_;   // activated gates, (T * b) x 4H
  Mat<S> cell_;    // (T * b) x H
  Mat<S> hidden_out_;
};

template <typename S>
class Dense {
 public:
  Dense(std::string name, int in, int out);
  void init(Initializer& init);

  Mat<S> forward(const Mat<S>& x);
  Mat<S> backward(const Mat<S>& grad_out, bool need_input_grad);

  ParamList<S> params() { return {&weight_, &bias_}; }
  Tensor<S>& weight() { return weight_; }
  Tensor<S>& bias() { return bias_; }

 private:
  Tensor<S> weight_;  // in x out
  Tensor<S> bias_;    // 1 x out
  Mat<S> x_;
};

template <typename S>
Mat<S> relu_forward(const Mat<S>& x);
template <typename S>
Mat<S> relu_backward(const Mat<S>& grad_out, const Mat<S>& activated);

// Softmax applied independently to each of the `groups` contiguous blocks of
// every row.
template <typename S>
Mat<S> group_softmax(const Mat<S>& x, int groups);
template <typename S>
Mat<S> group_softmax_backward(const Mat<S>& grad_out, const Mat<S>& probs, int groups);

template <typename S>
struct LossAndGrad {
  S loss = 0;
  Mat<S> grad;
};

// Mean over the batch of -log softmax(logits)[label]; gradient is
// (softmax - onehot) / b. Throws InvalidInput for labels outside [0, k).
template <typename S>
LossAndGrad<S> softmax_cross_entropy(const Mat<S>& logits, std::span<const int> labels);

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// One bias-corrected Adam update of `value` in place; `step` starts at 1.
template <typename S>
void adam_step(Mat<S>& value, const Mat<S>& grad, Mat<S>& m, Mat<S>& v, const AdamConfig& cfg,
               std::int64_t step);

// Adam over a fixed parameter group with its own moment buffers.
template <typename S>
class Adam {
 public:
  Adam() = default;
  Adam(ParamList<S> params, AdamConfig cfg);

  void step();
  void zero_grad();
  std::int64_t steps() const { return steps_; }
  const AdamConfig& config() const { return cfg_; }

  // Moment buffers in parameter order, exposed for checkpointing.
  std::vector<Mat<S>>& first_moments() { return m_; }
  std::vector<Mat<S>>& second_moments() { return v_; }
  void set_steps(std::int64_t s) { steps_ = s; }

 private:
  ParamList<S> params_;
  std::vector<Mat<S>> m_, v_;
  AdamConfig cfg_;
  std::int64_t steps_ = 0;
};

struct ModelConfig {
  int steps = 64;      // t
  int channels = 22;   // c
  int classes = 4;     // k
  int views = 2;       // n
  int conv_layers = 4;
  int conv_filters = 64;
  int kernel = 5;
  int lstm_layers = 2;
  int hidden = 128;
  int voting_hidden = 128;

  // Throws Config on violated invariants.
  void validate() const;
  int backbone_steps() const { return steps - conv_layers * (kernel - 1); }
};

// Conv stack then LSTM stack; features are the last hidden state. Inputs are
// standardized per channel with fixed statistics before the first layer.
template <typename S>
class Backbone {
 public:
  explicit Backbone(const ModelConfig& cfg);
  void init(Initializer& init);

  // x is batch-major (b, t, c). Returns b x hidden.
  Mat<S> forward(const SeqBatch<S>& x);
  // Accumulates parameter gradients; returns dL/dx (batch-major) on request.
  Mat<S> backward(const Mat<S>& grad_features, bool need_input_grad);

  ParamList<S> params();
  void set_input_normalization(const std::vector<double>& mean, const std::vector<double>& scale);
  const std::vector<double>& input_mean() const { return mean_; }
  const std::vector<double>& input_scale() const { return scale_; }

  std::vector<Conv1d<S>>& convs() { return convs_; }
  std::vector<Lstm<S>>& lstms() { return lstms_; }

 private:
  ModelConfig cfg_;
  std::vector<Conv1d<S>> convs_;
  std::vector<Lstm<S>> lstms_;
  std::vector<double> mean_, scale_;
  int lstm_steps_ = 0, batch_ = 0;
};

// Per-channel mean and standard deviation over every timestep of `windows`;
// deviations below 1e-8 are replaced by 1.
void channel_statistics(std::span<const Window> windows, std::vector<double>& mean,
                        std::vector<double>& scale);

template <typename S>
struct MvfOutputs {
  Mat<S> grouped;  // b x (n * k) MVF-layer logits; group j is columns [j*k, (j+1)*k)
  Mat<S> votes;    // b x k voting logits
};

template <typename S>
class MvfNet {
 public:
  MvfNet(const ModelConfig& cfg, std::uint64_t seed);

  const ModelConfig& config() const { return cfg_; }
  std::uint64_t seed() const { return seed_; }

  Mat<S> backbone_forward(const SeqBatch<S>& x) { return backbone_.forward(x); }
  Mat<S> mvf_forward(const Mat<S>& features) { return mvf_.forward(features); }
  Mat<S> voting_forward(const Mat<S>& grouped);
  MvfOutputs<S> forward(const SeqBatch<S>& x);

  // Backward from dL/d(grouped logits) through MVF-layer and backbone.
  Mat<S> backward_mvf(const Mat<S>& grad_grouped, bool need_input_grad);
  // Backward from dL/d(votes) through the voting net only; returns
  // dL/d(grouped logits).
  Mat<S> backward_voting(const Mat<S>& grad_votes);

  Backbone<S>& backbone() { return backbone_; }
  Dense<S>& mvf_layer() { return mvf_; }
  ParamList<S> backbone_params() { return backbone_.params(); }
  ParamList<S> mvf_params() { return mvf_.params(); }
  ParamList<S> voting_params();
  ParamList<S> all_params();

 private:
  ModelConfig cfg_;
  std::uint64_t seed_;
  Backbone<S> backbone_;
  Dense<S> mvf_;
  Dense<S> vote1_, vote2_, vote3_;
  Mat<S> probs_, act1_, act2_;
};

// Plain backbone plus a single affine k-way head.
template <typename S>
class BaselineNet {
 public:
  BaselineNet(const ModelConfig& cfg, std::uint64_t seed);

  const ModelConfig& config() const { return cfg_; }
  std::uint64_t seed() const { return seed_; }

  Mat<S> forward(const SeqBatch<S>& x);
  Mat<S> backward(const Mat<S>& grad_logits, bool need_input_grad);

  Backbone<S>& backbone() { return backbone_; }
  Dense<S>& head() { return head_; }
  ParamList<S> all_params();

 private:
  ModelConfig cfg_;
  std::uint64_t seed_;
  Backbone<S> backbone_;
  Dense<S> head_;
};

// Argmax with ties resolved to the lowest index, per row.
template <typename S>
std::vector<int> argmax_rows(const Mat<S>& logits);

}  // namespace flow::nn
