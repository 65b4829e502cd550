#pragma once

// Two-phase MVFNet training. For every batch, phase 1 shuffles views across
// samples and trains backbone + MVF-layer against per-view labels; phase 2
// trains the voting net on the unshuffled batch with everything else frozen.

#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "flow/model.hpp"
#include "flow/views.hpp"

namespace flow {

struct TrainConfig {
  int epochs = 300;
  int batch_size = 64;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::uint64_t seed = 1;
  Granularity granularity = Granularity::Medium;
  bool phase1 = true;
  bool phase2 = true;
  // Phase 2 draws its own batch instead of reusing phase 1's.
  bool phase2_fresh_batch = false;
  // The checkpoint hook runs every `checkpoint_every` epochs (0: only after
  // the last epoch).
  int checkpoint_every = 0;
  // Evaluate on the held-out set every `eval_every` epochs (0 disables).
  int eval_every = 1;

  void validate() const;
  nn::AdamConfig adam() const { return {lr, beta1, beta2, eps}; }
};

struct EpochRecord {
  int epoch = 0;
  double loss_mvf1 = 0.0;  // plain cross-entropy for baseline runs
  double loss_mvf2 = 0.0;
  double train_accuracy = 0.0;
  // Negative when no evaluation ran this epoch.
  double test_accuracy = -1.0;
  std::vector<double> test_view_accuracy;  // argmax of each MVF group
};

struct TrainLog {
  bool two_phase = true;
  int views = 0;
  std::vector<EpochRecord> epochs;

  // Header: epoch,loss_mvf1,loss_mvf2,train_acc,test_acc,test_v0,...,test_v{n-1}
  std::string to_csv() const;
};

using Model = nn::MvfNet<float>;
using Baseline = nn::BaselineNet<float>;

// Builds the model configuration for windows of the given shape.
nn::ModelConfig model_config_for(const Window& example, int classes, int views);

// Optimizer state for the two disjoint parameter groups.
template <typename S>
struct MvfOptimizers {
  nn::Adam<S> backbone_mvf;
  nn::Adam<S> voting;

  MvfOptimizers(nn::MvfNet<S>& model, const nn::AdamConfig& cfg);
};

// L_MVF1 on a batch shuffled with `r`: sum over views of the mean
// cross-entropy of group j against view j's donor label. One Adam step on
// backbone + MVF parameters. Requires at least 2 windows.
template <typename S>
double train_phase1(nn::MvfNet<S>& model, MvfOptimizers<S>& opt, std::span<const Window> batch,
                    const ViewSchema& schema, const ShuffleMatrix& r);

// Same, drawing R from `rng`.
template <typename S>
double train_phase1(nn::MvfNet<S>& model, MvfOptimizers<S>& opt, std::span<const Window> batch,
                    const ViewSchema& schema, std::mt19937_64& rng);

// L_MVF2: mean cross-entropy of the voting output on the unshuffled batch.
// One Adam step on the voting net only. Optionally reports the pre-update
// predictions.
template <typename S>
double train_phase2(nn::MvfNet<S>& model, MvfOptimizers<S>& opt, std::span<const Window> batch,
                    std::vector<int>* predictions = nullptr);

struct FitResult {
  Model model;
  TrainLog log;
};

using CheckpointHook = std::function<void(int epoch, Model&, MvfOptimizers<float>&)>;

// Trains MVFNet from scratch. Inputs are standardized with statistics of the
// training windows. `test` (optional) is evaluated per `eval_every`.
FitResult fit(std::span<const Window> train, int classes, const ViewSchema& schema, const TrainConfig& config,
              std::span<const Window> test = {}, const CheckpointHook& hook = {});

struct BaselineFitResult {
  Baseline model;
  TrainLog log;
};

// Plain supervised training of backbone + single head with cross-entropy.
BaselineFitResult fit_baseline(std::span<const Window> train, int classes, const TrainConfig& config,
                               std::span<const Window> test = {});

// Voting-net argmax per window (ties -> lowest class index).
std::vector<int> predict(Model& model, std::span<const Window> windows, int batch_size = 256);
int predict(Model& model, const Window& window);
struct Predictions {
  std::vector<int> final;                   // voting net
  std::vector<std::vector<int>> per_view;  // argmax of each MVF group
};
// One forward pass yielding both the final and the per-view predictions.
Predictions predict_all(Model& model, std::span<const Window> windows, int batch_size = 256);
// Argmax of MVF group `view` per window.
std::vector<int> predict_view(Model& model, std::span<const Window> windows, int view, int batch_size = 256);
std::vector<int> predict(Baseline& model, std::span<const Window> windows, int batch_size = 256);

}  // namespace flow
