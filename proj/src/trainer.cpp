#include "flow/trainer.hpp"

#include <algorithm>
#include <numeric>
#include <sstream>

#include "flow/error.hpp"

namespace flow {

namespace {

using nn::Mat;

std::vector<int> labels_of(std::span<const Window> windows) {
  std::vector<int> out;
  out.reserve(windows.size());
  for (const auto& w : windows) out.push_back(w.label);
  return out;
}

void permute(std::vector<std::size_t>& order, std::mt19937_64& rng) {
  for (std::size_t i = order.size(); i > 1; --i) {
    const std::size_t k = rng() % i;
    std::swap(order[i - 1], order[k]);
  }
}

// Consecutive slices of `order`; a lone trailing sample joins the previous
// batch because a one-sample batch cannot be shuffled.
std::vector<std::vector<Window>> make_batches(std::span<const Window> data, const std::vector<std::size_t>& order,
                                              int batch_size) {
  std::vector<std::vector<Window>> batches;
  for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(batch_size)) {
    const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(batch_size));
    if (end - start == 1 && !batches.empty()) {
      batches.back().push_back(data[order[start]]);
      break;
    }
    std::vector<Window> batch;
    batch.reserve(end - start);
    for (std::size_t i = start; i < end; ++i) batch.push_back(data[order[i]]);
    batches.push_back(std::move(batch));
  }
  return batches;
}

double fraction_correct(const std::vector<int>& preds, std::span<const Window> windows) {
  if (windows.empty()) return 0.0;
  std::size_t hit = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) hit += preds[i] == windows[i].label;
  return static_cast<double>(hit) / static_cast<double>(windows.size());
}

template <typename Fn>
std::vector<int> batched(std::span<const Window> windows, int batch_size, Fn&& logits_of) {
  std::vector<int> out;
  out.reserve(windows.size());
  for (std::size_t start = 0; start < windows.size(); start += static_cast<std::size_t>(batch_size)) {
    const std::size_t n = std::min(windows.size() - start, static_cast<std::size_t>(batch_size));
    const auto x = nn::pack_windows<float>(windows.subspan(start, n));
    for (int p : nn::argmax_rows<float>(logits_of(x))) out.push_back(p);
  }
  return out;
}

void check_train_set(std::span<const Window> train, int classes) {
  if (train.empty()) fail(ErrorKind::InvalidInput, "fit: empty training set");
  for (const auto& w : train)
    if (w.label < 0 || w.label >= classes) fail(ErrorKind::InvalidInput, "fit: window label outside [0, classes)");
}

}  // namespace

void TrainConfig::validate() const {
  if (epochs < 1) fail(ErrorKind::Config, "train: epochs must be >= 1");
  if (batch_size < 2) fail(ErrorKind::Config, "train: batch size must be >= 2");
  if (!(lr > 0.0)) fail(ErrorKind::Config, "train: learning rate must be > 0");
  if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0 && eps > 0.0))
    fail(ErrorKind::Config, "train: invalid Adam hyperparameters");
  if (checkpoint_every < 0 || eval_every < 0) fail(ErrorKind::Config, "train: cadences must be >= 0");
}

std::string TrainLog::to_csv() const {
  std::ostringstream out;
  out.precision(9);
  out << "epoch,loss_mvf1,loss_mvf2,train_acc,test_acc";
  for (int j = 0; j < views; ++j) out << ",test_v" << j;
  out << '\n';
  for (const auto& e : epochs) {
    out << e.epoch << ',' << e.loss_mvf1 << ',';
    if (two_phase) out << e.loss_mvf2;
    out << ',' << e.train_accuracy << ',';
    if (e.test_accuracy >= 0.0) out << e.test_accuracy;
    for (int j = 0; j < views; ++j) {
      out << ',';
      if (static_cast<std::size_t>(j) < e.test_view_accuracy.size()) out << e.test_view_accuracy[static_cast<std::size_t>(j)];
    }
    out << '\n';
  }
  return out.str();
}

nn::ModelConfig model_config_for(const Window& example, int classes, int views) {
  nn::ModelConfig cfg;
  cfg.steps = example.steps;
  cfg.channels = example.channels;
  cfg.classes = classes;
  cfg.views = views;
  cfg.validate();
  return cfg;
}

template <typename S>
MvfOptimizers<S>::MvfOptimizers(nn::MvfNet<S>& model, const nn::AdamConfig& cfg)
    : backbone_mvf(
          [&] {
            auto p = model.backbone_params();
            for (auto* q : model.mvf_params()) p.push_back(q);
            return p;
          }(),
          cfg),
      voting(model.voting_params(), cfg) {}

template <typename S>
double train_phase1(nn::MvfNet<S>& model, MvfOptimizers<S>& opt, std::span<const Window> batch,
                    const ViewSchema& schema, const ShuffleMatrix& r) {
  if (batch.size() < 2) fail(ErrorKind::InvalidInput, "train_phase1: batch needs at least 2 windows");
  const int n = model.config().views;
  const int k = model.config().classes;
  if (schema.n() != n) fail(ErrorKind::InvalidInput, "train_phase1: schema view count differs from the model's");

  const ShuffledBatch shuffled = shuffle_batch(batch, schema, r);
  const auto x = nn::pack_windows<S>(shuffled.inputs);
  const int b = x.batch;

  opt.backbone_mvf.zero_grad();
  const Mat<S> grouped = model.mvf_forward(model.backbone_forward(x));
  Mat<S> grad(b, static_cast<Eigen::Index>(n) * k);
  std::vector<int> view_labels(static_cast<std::size_t>(b));
  double loss = 0.0;
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < b; ++i) view_labels[static_cast<std::size_t>(i)] = shuffled.view_label(i, j);
    const Mat<S> logits = grouped.middleCols(static_cast<Eigen::Index>(j) * k, k);
    const auto lg = nn::softmax_cross_entropy<S>(logits, view_labels);
    loss += static_cast<double>(lg.loss);
    grad.middleCols(static_cast<Eigen::Index>(j) * k, k) = lg.grad;
  }
  model.backward_mvf(grad, false);
  opt.backbone_mvf.step();
  return loss;
}

template <typename S>
double train_phase1(nn::MvfNet<S>& model, MvfOptimizers<S>& opt, std::span<const Window> batch,
                    const ViewSchema& schema, std::mt19937_64& rng) {
  if (batch.size() < 2) fail(ErrorKind::InvalidInput, "train_phase1: batch needs at least 2 windows");
  const ShuffleMatrix r = gen_shuffle_matrix(static_cast<int>(batch.size()), schema.n(), rng);
  return train_phase1(model, opt, batch, schema, r);
}

template <typename S>
double train_phase2(nn::MvfNet<S>& model, MvfOptimizers<S>& opt, std::span<const Window> batch,
                    std::vector<int>* predictions) {
  if (batch.empty()) fail(ErrorKind::InvalidInput, "train_phase2: empty batch");
  const auto x = nn::pack_windows<S>(batch);
  const auto out = model.forward(x);
  const std::vector<int> labels = labels_of(batch);
  const auto lg = nn::softmax_cross_entropy<S>(out.votes, labels);
  if (predictions) *predictions = nn::argmax_rows<S>(out.votes);
  opt.voting.zero_grad();
  model.backward_voting(lg.grad);
  opt.voting.step();
  return static_cast<double>(lg.loss);
}

FitResult fit(std::span<const Window> train, int classes, const ViewSchema& schema, const TrainConfig& config,
              std::span<const Window> test, const CheckpointHook& hook) {
  config.validate();
  check_train_set(train, classes);

  FitResult result{Model(model_config_for(train.front(), classes, schema.n()), config.seed), {}};
  Model& model = result.model;
  std::vector<double> mean, scale;
  nn::channel_statistics(train, mean, scale);
  model.backbone().set_input_normalization(mean, scale);

  MvfOptimizers<float> opt(model, config.adam());
  std::mt19937_64 rng(config.seed ^ 0x9e3779b97f4a7c15ULL);
  TrainLog& log = result.log;
  log.two_phase = true;
  log.views = schema.n();

  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<int> preds;
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    permute(order, rng);
    const auto batches = make_batches(train, order, config.batch_size);

    EpochRecord rec;
    rec.epoch = epoch;
    double seen = 0.0;
    std::size_t correct = 0, judged = 0;
    for (const auto& batch : batches) {
      const double w = static_cast<double>(batch.size());
      seen += w;
      if (config.phase1 && batch.size() >= 2) rec.loss_mvf1 += w * train_phase1(model, opt, batch, schema, rng);
      if (config.phase2) {
        std::vector<Window> fresh;
        std::span<const Window> second = batch;
        if (config.phase2_fresh_batch) {
          std::vector<std::size_t> pick(train.size());
          std::iota(pick.begin(), pick.end(), std::size_t{0});
          permute(pick, rng);
          pick.resize(std::min(pick.size(), batch.size()));
          for (std::size_t i : pick) fresh.push_back(train[i]);
          second = fresh;
        }
        rec.loss_mvf2 += w * train_phase2(model, opt, second, &preds);
        for (std::size_t i = 0; i < preds.size(); ++i) correct += preds[i] == second[i].label;
        judged += preds.size();
      }
    }
    rec.loss_mvf1 /= seen;
    rec.loss_mvf2 /= seen;
    rec.train_accuracy = judged ? static_cast<double>(correct) / static_cast<double>(judged)
                                : fraction_correct(predict(model, train), train);

    const bool eval_now = !test.empty() && config.eval_every > 0 &&
                          (epoch % config.eval_every == 0 || epoch == config.epochs);
    if (eval_now) {
      const Predictions p = predict_all(model, test);
      rec.test_accuracy = fraction_correct(p.final, test);
      for (const auto& v : p.per_view) rec.test_view_accuracy.push_back(fraction_correct(v, test));
    }
    log.epochs.push_back(std::move(rec));
    const bool save_now =
        epoch == config.epochs || (config.checkpoint_every > 0 && epoch % config.checkpoint_every == 0);
    if (hook && save_now) hook(epoch, model, opt);
  }
  return result;
}

BaselineFitResult fit_baseline(std::span<const Window> train, int classes, const TrainConfig& config,
                               std::span<const Window> test) {
  config.validate();
  check_train_set(train, classes);

  BaselineFitResult result{Baseline(model_config_for(train.front(), classes, 1), config.seed), {}};
  Baseline& model = result.model;
  std::vector<double> mean, scale;
  nn::channel_statistics(train, mean, scale);
  model.backbone().set_input_normalization(mean, scale);

  nn::Adam<float> opt(model.all_params(), config.adam());
  std::mt19937_64 rng(config.seed ^ 0x9e3779b97f4a7c15ULL);
  TrainLog& log = result.log;
  log.two_phase = false;
  log.views = 0;

  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    permute(order, rng);
    EpochRecord rec;
    rec.epoch = epoch;
    double seen = 0.0;
    std::size_t correct = 0;
    for (const auto& batch : make_batches(train, order, config.batch_size)) {
      const auto x = nn::pack_windows<float>(batch);
      const std::vector<int> labels = labels_of(batch);
      opt.zero_grad();
      const Mat<float> logits = model.forward(x);
      const auto lg = nn::softmax_cross_entropy<float>(logits, labels);
      const auto preds = nn::argmax_rows<float>(logits);
      for (std::size_t i = 0; i < preds.size(); ++i) correct += preds[i] == labels[i];
      model.backward(lg.grad, false);
      opt.step();
      rec.loss_mvf1 += static_cast<double>(lg.loss) * static_cast<double>(batch.size());
      seen += static_cast<double>(batch.size());
    }
    rec.loss_mvf1 /= seen;
    rec.train_accuracy = static_cast<double>(correct) / seen;
    if (!test.empty() && config.eval_every > 0 && (epoch % config.eval_every == 0 || epoch == config.epochs))
      rec.test_accuracy = fraction_correct(predict(model, test), test);
    log.epochs.push_back(std::move(rec));
  }
  return result;
}

std::vector<int> predict(Model& model, std::span<const Window> windows, int batch_size) {
  return batched(windows, batch_size, [&](const nn::SeqBatch<float>& x) { return model.forward(x).votes; });
}

int predict(Model& model, const Window& window) {
  return predict(model, std::span<const Window>(&window, 1)).front();
}

Predictions predict_all(Model& model, std::span<const Window> windows, int batch_size) {
  const int n = model.config().views;
  const int k = model.config().classes;
  Predictions out;
  out.per_view.resize(static_cast<std::size_t>(n));
  for (std::size_t start = 0; start < windows.size(); start += static_cast<std::size_t>(batch_size)) {
    const std::size_t count = std::min(windows.size() - start, static_cast<std::size_t>(batch_size));
    const auto o = model.forward(nn::pack_windows<float>(windows.subspan(start, count)));
    for (int p : nn::argmax_rows<float>(o.votes)) out.final.push_back(p);
    for (int j = 0; j < n; ++j) {
      const Mat<float> g = o.grouped.middleCols(static_cast<Eigen::Index>(j) * k, k);
      for (int p : nn::argmax_rows<float>(g)) out.per_view[static_cast<std::size_t>(j)].push_back(p);
    }
  }
  return out;
}

std::vector<int> predict_view(Model& model, std::span<const Window> windows, int view, int batch_size) {
  const int k = model.config().classes;
  if (view < 0 || view >= model.config().views) fail(ErrorKind::InvalidInput, "predict_view: no such view");
  return batched(windows, batch_size, [&](const nn::SeqBatch<float>& x) -> Mat<float> {
    return model.mvf_forward(model.backbone_forward(x)).middleCols(static_cast<Eigen::Index>(view) * k, k);
  });
}

std::vector<int> predict(Baseline& model, std::span<const Window> windows, int batch_size) {
  return batched(windows, batch_size, [&](const nn::SeqBatch<float>& x) { return model.forward(x); });
}

template struct MvfOptimizers<float>;
template struct MvfOptimizers<double>;
template double train_phase1<float>(nn::MvfNet<float>&, MvfOptimizers<float>&, std::span<const Window>,
                                    const ViewSchema&, const ShuffleMatrix&);
template double train_phase1<double>(nn::MvfNet<double>&, MvfOptimizers<double>&, std::span<const Window>,
                                     const ViewSchema&, const ShuffleMatrix&);
template double train_phase1<float>(nn::MvfNet<float>&, MvfOptimizers<float>&, std::span<const Window>,
                                    const ViewSchema&, std::mt19937_64&);
template double train_phase1<double>(nn::MvfNet<double>&, MvfOptimizers<double>&, std::span<const Window>,
                                     const ViewSchema&, std::mt19937_64&);
template double train_phase2<float>(nn::MvfNet<float>&, MvfOptimizers<float>&, std::span<const Window>,
                                    std::vector<int>*);
template double train_phase2<double>(nn::MvfNet<double>&, MvfOptimizers<double>&, std::span<const Window>,
                                     std::vector<int>*);

}  // namespace flow
