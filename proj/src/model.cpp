#include "flow/model.hpp"

#include <algorithm>
#include <cmath>

#include "flow/error.hpp"

namespace flow::nn {

namespace {

template <typename S>
void sigmoid_inplace(Eigen::Block<Mat<S>> block) {
  block = (S(1) + (-block.array()).exp()).inverse().matrix();
}

template <typename S>
void check_rows(const Mat<S>& m, Eigen::Index rows, Eigen::Index cols, const char* what) {
  if (m.rows() != rows || m.cols() != cols)
    fail(ErrorKind::InvalidInput, std::string(what) + ": shape mismatch (got " + std::to_string(m.rows()) + "x" +
                                      std::to_string(m.cols()) + ", expected " + std::to_string(rows) + "x" +
                                      std::to_string(cols) + ")");
}

// (b, t, c*f) batch-major -> (b*c, t, f): one sequence per (sample, channel).
template <typename S>
SeqBatch<S> split_channels(const SeqBatch<S>& x, int channels = -1) {
  const int c = channels > 0 ? channels : static_cast<int>(x.data.cols());
  const auto f = x.data.cols() / c;
  SeqBatch<S> out{x.batch * c, x.steps, Mat<S>(x.data.rows() * c, f)};
  for (int b = 0; b < x.batch; ++b)
    for (int t = 0; t < x.steps; ++t)
      for (int ch = 0; ch < c; ++ch)
        out.data.row((static_cast<Eigen::Index>(b) * c + ch) * x.steps + t) =
            x.data.row(static_cast<Eigen::Index>(b) * x.steps + t).segment(ch * f, f);
  return out;
}

// Inverse of split_channels.
template <typename S>
SeqBatch<S> merge_channels(const SeqBatch<S>& x, int batch) {
  const int c = x.batch / batch;
  const auto f = x.data.cols();
  SeqBatch<S> out{batch, x.steps, Mat<S>(static_cast<Eigen::Index>(batch) * x.steps, c * f)};
  for (int b = 0; b < batch; ++b)
    for (int t = 0; t < x.steps; ++t)
      for (int ch = 0; ch < c; ++ch)
        out.data.row(static_cast<Eigen::Index>(b) * x.steps + t).segment(ch * f, f) =
            x.data.row((static_cast<Eigen::Index>(b) * c + ch) * x.steps + t);
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// layout helpers

template <typename S>
SeqBatch<S> to_time_major(const SeqBatch<S>& x) {
  SeqBatch<S> out{x.batch, x.steps, Mat<S>(x.data.rows(), x.data.cols())};
  for (int b = 0; b < x.batch; ++b)
    for (int t = 0; t < x.steps; ++t) out.data.row(t * x.batch + b) = x.data.row(b * x.steps + t);
  return out;
}

template <typename S>
SeqBatch<S> to_batch_major(const SeqBatch<S>& x) {
  SeqBatch<S> out{x.batch, x.steps, Mat<S>(x.data.rows(), x.data.cols())};
  for (int b = 0; b < x.batch; ++b)
    for (int t = 0; t < x.steps; ++t) out.data.row(b * x.steps + t) = x.data.row(t * x.batch + b);
  return out;
}

template <typename S>
SeqBatch<S> pack_windows(std::span<const Window> windows) {
  if (windows.empty()) fail(ErrorKind::InvalidInput, "pack_windows: empty batch");
  const int steps = windows.front().steps;
  const int channels = windows.front().channels;
  SeqBatch<S> out{static_cast<int>(windows.size()), steps,
                  Mat<S>(static_cast<Eigen::Index>(windows.size()) * steps, channels)};
  S* dst = out.data.data();
  for (const auto& w : windows) {
    if (w.steps != steps || w.channels != channels)
      fail(ErrorKind::InvalidInput, "pack_windows: windows differ in shape");
    for (double v : w.values) *dst++ = static_cast<S>(v);
  }
  return out;
}

template <typename S>
void Initializer::uniform(Mat<S>& m, int fan_in) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(std::max(1, fan_in)));
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<S>(dist(rng_));
}

// ---------------------------------------------------------------------------
// Conv1d

template <typename S>
Conv1d<S>::Conv1d(std::string name, int in_channels, int out_channels, int kernel)
    : in_channels_(in_channels),
      out_channels_(out_channels),
      kernel_(kernel),
      weight_(name + ".weight", kernel * in_channels, out_channels),
      bias_(name + ".bias", 1, out_channels) {}

template <typename S>
void Conv1d<S>::init(Initializer& init) {
  init.uniform(weight_.value, kernel_ * in_channels_);
  init.uniform(bias_.value, kernel_ * in_channels_);
}

template <typename S>
SeqBatch<S> Conv1d<S>::forward(const SeqBatch<S>& x) {
  const int tout = out_steps(x.steps);
  if (tout < 1) fail(ErrorKind::InvalidInput, "conv1d: sequence shorter than kernel");
  check_rows<S>(x.data, static_cast<Eigen::Index>(x.batch) * x.steps, in_channels_, "conv1d input");
  batch_ = x.batch;
  in_steps_ = x.steps;

  const int width = kernel_ * in_channels_;
  cols_.resize(static_cast<Eigen::Index>(batch_) * tout, width);
  // Rows t..t+kernel-1 of a sample are contiguous in the row-major input.
  for (int b = 0; b < batch_; ++b)
    for (int t = 0; t < tout; ++t) {
      const S* src = x.data.data() + (static_cast<Eigen::Index>(b) * in_steps_ + t) * in_channels_;
      std::copy(src, src + width, cols_.data() + (static_cast<Eigen::Index>(b) * tout + t) * width);
    }
  out_.noalias() = cols_ * weight_.value;
  out_.rowwise() += bias_.value.row(0);
  out_ = out_.cwiseMax(S(0));
  return {batch_, tout, out_};
}

template <typename S>
Mat<S> Conv1d<S>::backward(const Mat<S>& grad_out, bool need_input_grad) {
  check_rows<S>(grad_out, out_.rows(), out_.cols(), "conv1d grad");
  const Mat<S> g = (out_.array() > S(0)).select(grad_out, S(0));
  weight_.grad.noalias() += cols_.transpose() * g;
  bias_.grad += g.colwise().sum();
  if (!need_input_grad) return {};

  const Mat<S> dcols = g * weight_.value.transpose();
  const int tout = out_steps(in_steps_);
  const int width = kernel_ * in_channels_;
  Mat<S> dx = Mat<S>::Zero(static_cast<Eigen::Index>(batch_) * in_steps_, in_channels_);
  for (int b = 0; b < batch_; ++b)
    for (int t = 0; t < tout; ++t) {
      S* dst = dx.data() + (static_cast<Eigen::Index>(b) * in_steps_ + t) * in_channels_;
      const S* src = dcols.data() + (static_cast<Eigen::Index>(b) * tout + t) * width;
      for (int i = 0; i < width; ++i) dst[i] += src[i];
    }
  return dx;
}

// ---------------------------------------------------------------------------
// Lstm

template <typename S>
Lstm<S>::Lstm(std::string name, int input, int hidden)
    : input_(input),
      hidden_(hidden),
      w_input_(name + ".w_input", input, 4 * hidden),
      w_hidden_(name + ".w_hidden", hidden, 4 * hidden),
      bias_(name + ".bias", 1, 4 * hidden) {}

template <typename S>
void Lstm<S>::init(Initializer& init) {
  init.uniform(w_input_.value, hidden_);
  init.uniform(w_hidden_.value, hidden_);
  init.uniform(bias_.value, hidden_);
}

template <typename S>
SeqBatch<S> Lstm<S>::forward(const SeqBatch<S>& x) {
  check_rows<S>(x.data, static_cast<Eigen::Index>(x.batch) * x.steps, input_, "lstm input");
  batch_ = x.batch;
  steps_ = x.steps;
  x_ = x.data;
  const int b = batch_;
  const int h = hidden_;

  gates_.noalias() = x_ * w_input_.value;
  gates_.rowwise() += bias_.value.row(0);
  cell_.resize(gates_.rows(), h);
  hidden_out_.resize(gates_.rows(), h);

  Mat<S> pre_g(b, h);
  for (int t = 0; t < steps_; ++t) {
    auto gates = gates_.middleRows(static_cast<Eigen::Index>(t) * b, b);
    if (t > 0) gates.noalias() += hidden_out_.middleRows(static_cast<Eigen::Index>(t - 1) * b, b) * w_hidden_.value;
    pre_g = gates.middleCols(2 * h, h);
    sigmoid_inplace<S>(gates_.block(static_cast<Eigen::Index>(t) * b, 0, b, 4 * h));
    gates.middleCols(2 * h, h) = pre_g.array().tanh().matrix();

    auto c = cell_.middleRows(static_cast<Eigen::Index>(t) * b, b);
    c = gates.leftCols(h).cwiseProduct(gates.middleCols(2 * h, h));
    if (t > 0) c += gates.middleCols(h, h).cwiseProduct(cell_.middleRows(static_cast<Eigen::Index>(t - 1) * b, b));
    hidden_out_.middleRows(static_cast<Eigen::Index>(t) * b, b) =
        gates.rightCols(h).cwiseProduct(c.array().tanh().matrix());
  }
  return {batch_, steps_, hidden_out_};
}

template <typename S>
Mat<S> Lstm<S>::backward(const Mat<S>& grad_hidden, bool need_input_grad) {
  check_rows<S>(grad_hidden, hidden_out_.rows(), hidden_, "lstm grad");
  const int b = batch_;
  const int h = hidden_;
  Mat<S> d_gates(gates_.rows(), 4 * h);
  Mat<S> dh_next = Mat<S>::Zero(b, h);
  Mat<S> dc_next = Mat<S>::Zero(b, h);
  const Mat<S> w_hidden_t = w_hidden_.value.transpose();

  for (int t = steps_ - 1; t >= 0; --t) {
    const Eigen::Index row = static_cast<Eigen::Index>(t) * b;
    const auto gates = gates_.middleRows(row, b);
    const auto in_gate = gates.leftCols(h).array();
    const auto forget = gates.middleCols(h, h).array();
    const auto cand = gates.middleCols(2 * h, h).array();
    const auto out_gate = gates.rightCols(h).array();
    const Eigen::Array<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> tanh_c =
        cell_.middleRows(row, b).array().tanh();

    const Mat<S> dh = grad_hidden.middleRows(row, b) + dh_next;
    const Mat<S> dc = (dh.array() * out_gate * (S(1) - tanh_c.square()) + dc_next.array()).matrix();

    auto dg = d_gates.middleRows(row, b);
    dg.leftCols(h) = (dc.array() * cand * in_gate * (S(1) - in_gate)).matrix();
    if (t > 0)
      dg.middleCols(h, h) =
          (dc.array() * cell_.middleRows(row - b, b).array() * forget * (S(1) - forget)).matrix();
    else
      dg.middleCols(h, h).setZero();
    dg.middleCols(2 * h, h) = (dc.array() * in_gate * (S(1) - cand.square())).matrix();
    dg.rightCols(h) = (dh.array() * tanh_c * out_gate * (S(1) - out_gate)).matrix();

    dc_next = (dc.array() * forget).matrix();
    dh_next.noalias() = dg * w_hidden_t;
  }

  if (steps_ > 1) {
    const Eigen::Index n = static_cast<Eigen::Index>(steps_ - 1) * b;
    w_hidden_.grad.noalias() += hidden_out_.topRows(n).transpose() * d_gates.bottomRows(n);
  }
  w_input_.grad.noalias() += x_.transpose() * d_gates;
  bias_.grad += d_gates.colwise().sum();
  if (!need_input_grad) return {};
  return d_gates * w_input_.value.transpose();
}

// ---------------------------------------------------------------------------
// Dense and elementwise ops

template <typename S>
Dense<S>::Dense(std::string name, int in, int out)
    : weight_(name + ".weight", in, out), bias_(name + ".bias", 1, out) {}

template <typename S>
void Dense<S>::init(Initializer& init) {
  init.uniform(weight_.value, static_cast<int>(weight_.value.rows()));
  init.uniform(bias_.value, static_cast<int>(weight_.value.rows()));
}

template <typename S>
Mat<S> Dense<S>::forward(const Mat<S>& x) {
  if (x.cols() != weight_.value.rows()) fail(ErrorKind::InvalidInput, weight_.name + ": input width mismatch");
  x_ = x;
  Mat<S> y = x * weight_.value;
  y.rowwise() += bias_.value.row(0);
  return y;
}

template <typename S>
Mat<S> Dense<S>::backward(const Mat<S>& grad_out, bool need_input_grad) {
  check_rows<S>(grad_out, x_.rows(), weight_.value.cols(), "dense grad");
  weight_.grad.noalias() += x_.transpose() * grad_out;
  bias_.grad += grad_out.colwise().sum();
  if (!need_input_grad) return {};
  return grad_out * weight_.value.transpose();
}

template <typename S>
Mat<S> relu_forward(const Mat<S>& x) {
  return x.cwiseMax(S(0));
}

template <typename S>
Mat<S> relu_backward(const Mat<S>& grad_out, const Mat<S>& activated) {
  return (activated.array() > S(0)).select(grad_out, S(0));
}

template <typename S>
Mat<S> group_softmax(const Mat<S>& x, int groups) {
  if (groups < 1 || x.cols() % groups != 0)
    fail(ErrorKind::InvalidInput, "group_softmax: width is not a multiple of the group count");
  const Eigen::Index k = x.cols() / groups;
  Mat<S> out(x.rows(), x.cols());
  for (Eigen::Index r = 0; r < x.rows(); ++r)
    for (int j = 0; j < groups; ++j) {
      const auto in = x.row(r).segment(j * k, k);
      auto e = out.row(r).segment(j * k, k);
      e = (in.array() - in.maxCoeff()).exp().matrix();
      e /= e.sum();
    }
  return out;
}

template <typename S>
Mat<S> group_softmax_backward(const Mat<S>& grad_out, const Mat<S>& probs, int groups) {
  const Eigen::Index k = probs.cols() / groups;
  Mat<S> out(probs.rows(), probs.cols());
  for (Eigen::Index r = 0; r < probs.rows(); ++r)
    for (int j = 0; j < groups; ++j) {
      const auto p = probs.row(r).segment(j * k, k);
      const auto g = grad_out.row(r).segment(j * k, k);
      const S dot = p.dot(g);
      out.row(r).segment(j * k, k) = (p.array() * (g.array() - dot)).matrix();
    }
  return out;
}

template <typename S>
LossAndGrad<S> softmax_cross_entropy(const Mat<S>& logits, std::span<const int> labels) {
  const Eigen::Index b = logits.rows();
  const Eigen::Index k = logits.cols();
  if (static_cast<Eigen::Index>(labels.size()) != b || b == 0)
    fail(ErrorKind::InvalidInput, "softmax_cross_entropy: label count does not match batch");
  LossAndGrad<S> out;
  out.grad.resize(b, k);
  double total = 0.0;
  for (Eigen::Index i = 0; i < b; ++i) {
    const int y = labels[static_cast<std::size_t>(i)];
    if (y < 0 || y >= k) fail(ErrorKind::InvalidInput, "softmax_cross_entropy: label out of range");
    const auto row = logits.row(i);
    const S mx = row.maxCoeff();
    auto p = out.grad.row(i);
    p = (row.array() - mx).exp().matrix();
    const S sum = p.sum();
    total += static_cast<double>(std::log(sum) + mx - row(y));
    p /= sum;
    p(y) -= S(1);
  }
  out.grad /= static_cast<S>(b);
  out.loss = static_cast<S>(total / static_cast<double>(b));
  return out;
}

// ---------------------------------------------------------------------------
// Adam

template <typename S>
void adam_step(Mat<S>& value, const Mat<S>& grad, Mat<S>& m, Mat<S>& v, const AdamConfig& cfg,
               std::int64_t step) {
  if (step < 1) fail(ErrorKind::InvalidInput, "adam_step: step counter starts at 1");
  const S b1 = static_cast<S>(cfg.beta1);
  const S b2 = static_cast<S>(cfg.beta2);
  m = b1 * m + (S(1) - b1) * grad;
  v = b2 * v + (S(1) - b2) * grad.cwiseProduct(grad);
  const S c1 = static_cast<S>(1.0 - std::pow(cfg.beta1, static_cast<double>(step)));
  const S c2 = static_cast<S>(1.0 - std::pow(cfg.beta2, static_cast<double>(step)));
  value.array() -= static_cast<S>(cfg.lr) * (m.array() / c1) / ((v.array() / c2).sqrt() + static_cast<S>(cfg.eps));
}

template <typename S>
Adam<S>::Adam(ParamList<S> params, AdamConfig cfg) : params_(std::move(params)), cfg_(cfg) {
  for (auto* p : params_) {
    m_.push_back(Mat<S>::Zero(p->value.rows(), p->value.cols()));
    v_.push_back(Mat<S>::Zero(p->value.rows(), p->value.cols()));
  }
}

template <typename S>
void Adam<S>::step() {
  ++steps_;
  for (std::size_t i = 0; i < params_.size(); ++i) adam_step(params_[i]->value, params_[i]->grad, m_[i], v_[i], cfg_, steps_);
}

template <typename S>
void Adam<S>::zero_grad() {
  for (auto* p : params_) p->zero_grad();
}

// ---------------------------------------------------------------------------
// Networks

void ModelConfig::validate() const {
  if (steps < 1 || channels < 1) fail(ErrorKind::Config, "model: steps and channels must be >= 1");
  if (classes < 2) fail(ErrorKind::Config, "model: need at least 2 classes");
  if (views < 1) fail(ErrorKind::Config, "model: need at least 1 view");
  if (conv_layers < 0 || lstm_layers < 1) fail(ErrorKind::Config, "model: need >= 0 conv and >= 1 recurrent layers");
  if (conv_filters < 1 || kernel < 1 || hidden < 1 || voting_hidden < 1)
    fail(ErrorKind::Config, "model: all widths must be >= 1");
  if (backbone_steps() < 1)
    fail(ErrorKind::Config, "model: window of " + std::to_string(steps) + " steps is too short for the conv stack");
}

template <typename S>
Backbone<S>::Backbone(const ModelConfig& cfg) : cfg_(cfg) {
  cfg.validate();
  // Kernels span time only and are shared by every input channel; channels
  // first meet in the recurrent layer.
  int in = 1;
  for (int i = 0; i < cfg.conv_layers; ++i) {
    convs_.emplace_back("conv" + std::to_string(i), in, cfg.conv_filters, cfg.kernel);
    in = cfg.conv_filters;
  }
  if (cfg.conv_layers > 0) in = cfg.channels * cfg.conv_filters;
  else in = cfg.channels;
  for (int i = 0; i < cfg.lstm_layers; ++i) {
    lstms_.emplace_back("lstm" + std::to_string(i), in, cfg.hidden);
    in = cfg.hidden;
  }
  mean_.assign(static_cast<std::size_t>(cfg.channels), 0.0);
  scale_.assign(static_cast<std::size_t>(cfg.channels), 1.0);
}

template <typename S>
void Backbone<S>::init(Initializer& init) {
  for (auto& c : convs_) c.init(init);
  for (auto& l : lstms_) l.init(init);
}

template <typename S>
void Backbone<S>::set_input_normalization(const std::vector<double>& mean, const std::vector<double>& scale) {
  if (mean.size() != static_cast<std::size_t>(cfg_.channels) || scale.size() != mean.size())
    fail(ErrorKind::InvalidInput, "backbone: normalization statistics do not match channel count");
  for (double s : scale)
    if (!(s > 0.0)) fail(ErrorKind::InvalidInput, "backbone: normalization scale must be > 0");
  mean_ = mean;
  scale_ = scale;
}

template <typename S>
Mat<S> Backbone<S>::forward(const SeqBatch<S>& x) {
  if (x.steps != cfg_.steps || x.data.cols() != cfg_.channels ||
      x.data.rows() != static_cast<Eigen::Index>(x.batch) * x.steps || x.batch < 1)
    fail(ErrorKind::InvalidInput, "backbone: input shape does not match the model configuration");
  SeqBatch<S> h = x;
  for (int c = 0; c < cfg_.channels; ++c) {
    const auto mean = static_cast<S>(mean_[static_cast<std::size_t>(c)]);
    const auto inv = static_cast<S>(1.0 / scale_[static_cast<std::size_t>(c)]);
    h.data.col(c) = ((h.data.col(c).array() - mean) * inv).matrix();
  }
  if (!convs_.empty()) {
    h = split_channels(h);
    for (auto& conv : convs_) h = conv.forward(h);
    h = merge_channels(h, x.batch);
  }
  SeqBatch<S> seq = to_time_major(h);
  for (auto& lstm : lstms_) seq = lstm.forward(seq);
  batch_ = seq.batch;
  lstm_steps_ = seq.steps;
  return seq.data.bottomRows(batch_);
}

template <typename S>
Mat<S> Backbone<S>::backward(const Mat<S>& grad_features, bool need_input_grad) {
  check_rows<S>(grad_features, batch_, cfg_.hidden, "backbone grad");
  Mat<S> g = Mat<S>::Zero(static_cast<Eigen::Index>(lstm_steps_) * batch_, cfg_.hidden);
  g.bottomRows(batch_) = grad_features;
  for (std::size_t i = lstms_.size(); i-- > 0;) {
    const bool more = i > 0 || !convs_.empty() || need_input_grad;
    g = lstms_[i].backward(g, more);
    if (!more) return {};
  }
  g = to_batch_major(SeqBatch<S>{batch_, lstm_steps_, std::move(g)}).data;
  if (!convs_.empty()) {
    g = split_channels(SeqBatch<S>{batch_, lstm_steps_, std::move(g)}, cfg_.channels).data;
    for (std::size_t i = convs_.size(); i-- > 0;) {
      const bool more = i > 0 || need_input_grad;
      g = convs_[i].backward(g, more);
      if (!more) return {};
    }
    g = merge_channels(SeqBatch<S>{batch_ * cfg_.channels, cfg_.steps, std::move(g)}, batch_).data;
  }
  for (int c = 0; c < cfg_.channels; ++c) g.col(c) /= static_cast<S>(scale_[static_cast<std::size_t>(c)]);
  return g;
}

template <typename S>
ParamList<S> Backbone<S>::params() {
  ParamList<S> out;
  for (auto& c : convs_)
    for (auto* p : c.params()) out.push_back(p);
  for (auto& l : lstms_)
    for (auto* p : l.params()) out.push_back(p);
  return out;
}

void channel_statistics(std::span<const Window> windows, std::vector<double>& mean, std::vector<double>& scale) {
  if (windows.empty()) fail(ErrorKind::InvalidInput, "channel_statistics: no windows");
  const int c = windows.front().channels;
  std::vector<double> sum(static_cast<std::size_t>(c), 0.0), sq(static_cast<std::size_t>(c), 0.0);
  double count = 0.0;
  for (const auto& w : windows) {
    if (w.channels != c) fail(ErrorKind::InvalidInput, "channel_statistics: windows differ in width");
    for (int t = 0; t < w.steps; ++t)
      for (int j = 0; j < c; ++j) {
        const double v = w.at(t, j);
        sum[static_cast<std::size_t>(j)] += v;
        sq[static_cast<std::size_t>(j)] += v * v;
      }
    count += w.steps;
  }
  mean.resize(static_cast<std::size_t>(c));
  scale.resize(static_cast<std::size_t>(c));
  for (std::size_t j = 0; j < static_cast<std::size_t>(c); ++j) {
    mean[j] = sum[j] / count;
    const double var = std::max(0.0, sq[j] / count - mean[j] * mean[j]);
    const double sd = std::sqrt(var);
    scale[j] = sd < 1e-8 ? 1.0 : sd;
  }
}

template <typename S>
MvfNet<S>::MvfNet(const ModelConfig& cfg, std::uint64_t seed)
    : cfg_(cfg),
      seed_(seed),
      backbone_(cfg),
      mvf_("mvf", cfg.hidden, cfg.views * cfg.classes),
      vote1_("vote1", cfg.views * cfg.classes, cfg.voting_hidden),
      vote2_("vote2", cfg.voting_hidden, cfg.voting_hidden),
      vote3_("vote3", cfg.voting_hidden, cfg.classes) {
  Initializer init(seed);
  backbone_.init(init);
  mvf_.init(init);
  vote1_.init(init);
  vote2_.init(init);
  vote3_.init(init);
}

template <typename S>
Mat<S> MvfNet<S>::voting_forward(const Mat<S>& grouped) {
  if (grouped.cols() != static_cast<Eigen::Index>(cfg_.views) * cfg_.classes)
    fail(ErrorKind::InvalidInput, "voting: grouped logits do not have n * k columns");
  probs_ = group_softmax(grouped, cfg_.views);
  act1_ = relu_forward<S>(vote1_.forward(probs_));
  act2_ = relu_forward<S>(vote2_.forward(act1_));
  return vote3_.forward(act2_);
}

template <typename S>
MvfOutputs<S> MvfNet<S>::forward(const SeqBatch<S>& x) {
  MvfOutputs<S> out;
  out.grouped = mvf_.forward(backbone_.forward(x));
  out.votes = voting_forward(out.grouped);
  return out;
}

template <typename S>
Mat<S> MvfNet<S>::backward_mvf(const Mat<S>& grad_grouped, bool need_input_grad) {
  return backbone_.backward(mvf_.backward(grad_grouped, true), need_input_grad);
}

template <typename S>
Mat<S> MvfNet<S>::backward_voting(const Mat<S>& grad_votes) {
  Mat<S> g = vote3_.backward(grad_votes, true);
  g = vote2_.backward(relu_backward<S>(g, act2_), true);
  g = vote1_.backward(relu_backward<S>(g, act1_), true);
  return group_softmax_backward<S>(g, probs_, cfg_.views);
}

template <typename S>
ParamList<S> MvfNet<S>::voting_params() {
  ParamList<S> out;
  for (auto* d : {&vote1_, &vote2_, &vote3_})
    for (auto* p : d->params()) out.push_back(p);
  return out;
}

template <typename S>
ParamList<S> MvfNet<S>::all_params() {
  ParamList<S> out = backbone_params();
  for (auto* p : mvf_params()) out.push_back(p);
  for (auto* p : voting_params()) out.push_back(p);
  return out;
}

template <typename S>
BaselineNet<S>::BaselineNet(const ModelConfig& cfg, std::uint64_t seed)
    : cfg_(cfg), seed_(seed), backbone_(cfg), head_("head", cfg.hidden, cfg.classes) {
  Initializer init(seed);
  backbone_.init(init);
  head_.init(init);
}

template <typename S>
Mat<S> BaselineNet<S>::forward(const SeqBatch<S>& x) {
  return head_.forward(backbone_.forward(x));
}

template <typename S>
Mat<S> BaselineNet<S>::backward(const Mat<S>& grad_logits, bool need_input_grad) {
  return backbone_.backward(head_.backward(grad_logits, true), need_input_grad);
}

template <typename S>
ParamList<S> BaselineNet<S>::all_params() {
  ParamList<S> out = backbone_.params();
  for (auto* p : head_.params()) out.push_back(p);
  return out;
}

template <typename S>
std::vector<int> argmax_rows(const Mat<S>& logits) {
  std::vector<int> out(static_cast<std::size_t>(logits.rows()));
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    Eigen::Index best = 0;
    for (Eigen::Index c = 1; c < logits.cols(); ++c)
      if (logits(r, c) > logits(r, best)) best = c;
    out[static_cast<std::size_t>(r)] = static_cast<int>(best);
  }
  return out;
}

#define FLOW_INSTANTIATE(S)                                                                             \
  template SeqBatch<S> to_time_major(const SeqBatch<S>&);                                               \
  template SeqBatch<S> to_batch_major(const SeqBatch<S>&);                                              \
  template SeqBatch<S> pack_windows<S>(std::span<const Window>);                                        \
  template void Initializer::uniform<S>(Mat<S>&, int);                                                  \
  template class Conv1d<S>;                                                                             \
  template class Lstm<S>;                                                                               \
  template class Dense<S>;                                                                              \
  template Mat<S> relu_forward<S>(const Mat<S>&);                                                       \
  template Mat<S> relu_backward<S>(const Mat<S>&, const Mat<S>&);                                       \
  template Mat<S> group_softmax<S>(const Mat<S>&, int);                                                 \
  template Mat<S> group_softmax_backward<S>(const Mat<S>&, const Mat<S>&, int);                         \
  template LossAndGrad<S> softmax_cross_entropy<S>(const Mat<S>&, std::span<const int>);                \
  template void adam_step<S>(Mat<S>&, const Mat<S>&, Mat<S>&, Mat<S>&, const AdamConfig&, std::int64_t); \
  template class Adam<S>;                                                                               \
  template class Backbone<S>;                                                                           \
  template class MvfNet<S>;                                                                             \
  template class BaselineNet<S>;                                                                        \
  template std::vector<int> argmax_rows<S>(const Mat<S>&);

FLOW_INSTANTIATE(float)
FLOW_INSTANTIATE(double)

#undef FLOW_INSTANTIATE

}  // namespace flow::nn
