#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include <unistd.h>

#include "flow/checkpoint.hpp"
#include "flow/error.hpp"
#include "support.hpp"

using namespace flow;
using namespace flow::testing;

namespace fs = std::filesystem;

namespace {

fs::path temp_file(const std::string& name) {
  return fs::temp_directory_path() / ("flow_ckpt_" + std::to_string(::getpid()) + "_" + name);
}

ViewSchema two_views() {
  ViewSchema s;
  s.views = {{0, 1}, {2, 3}};
  s.num_channels = 4;
  return s;
}

template <typename Net>
void expect_same_params(Net& a, Net& b) {
  auto pa = a.all_params(), pb = b.all_params();
  ASSERT_EQ(pa.size(), pb.size());
  for (std::size_t i = 0; i < pa.size(); ++i) {
    EXPECT_EQ(pa[i]->name, pb[i]->name);
    EXPECT_EQ(pa[i]->value, pb[i]->value) << pa[i]->name;
  }
}

}  // namespace

TEST(Checkpoint, MvfRoundTripIsBitExact) {
  const auto data = toy_separable(8, 20, 4, 1);
  TrainConfig t;
  t.epochs = 2;
  t.batch_size = 8;
  t.eval_every = 0;
  const fs::path path = temp_file("mvf.bin");
  fit(data, 2, two_views(), t, {}, [&](int epoch, Model& m, MvfOptimizers<float>& opt) {
    CheckpointInfo info;
    info.epoch = epoch;
    info.granularity = Granularity::Large;
    info.view_set = ViewSet::Global;
    save_checkpoint(path, m, info, &opt);

    CheckpointInfo back;
    Model loaded = load_mvf(path, &back);
    EXPECT_EQ(back.epoch, epoch);
    EXPECT_EQ(back.kind, ModelKind::Mvf);
    EXPECT_EQ(back.granularity, Granularity::Large);
    EXPECT_EQ(back.view_set, ViewSet::Global);
    EXPECT_EQ(back.seed, m.seed());
    EXPECT_EQ(back.config.views, 2);
    expect_same_params(m, loaded);
    EXPECT_EQ(loaded.backbone().input_mean(), m.backbone().input_mean());
    EXPECT_EQ(loaded.backbone().input_scale(), m.backbone().input_scale());

    MvfOptimizers<float> restored(loaded, t.adam());
    ASSERT_TRUE(restore_optimizers(path, restored));
    EXPECT_EQ(restored.backbone_mvf.steps(), opt.backbone_mvf.steps());
    EXPECT_EQ(restored.voting.steps(), opt.voting.steps());
    for (std::size_t i = 0; i < opt.backbone_mvf.first_moments().size(); ++i) {
      EXPECT_EQ(restored.backbone_mvf.first_moments()[i], opt.backbone_mvf.first_moments()[i]);
      EXPECT_EQ(restored.backbone_mvf.second_moments()[i], opt.backbone_mvf.second_moments()[i]);
    }
    for (std::size_t i = 0; i < opt.voting.first_moments().size(); ++i)
      EXPECT_EQ(restored.voting.second_moments()[i], opt.voting.second_moments()[i]);

    // one more identical step on both copies stays identical
    std::vector<Window> batch(data.begin(), data.begin() + 4);
    const double la = train_phase2(m, opt, batch);
    const double lb = train_phase2(loaded, restored, batch);
    EXPECT_EQ(la, lb);
    expect_same_params(m, loaded);
  });
  fs::remove(path);
}

TEST(Checkpoint, WithoutOptimizerState) {
  const auto data = toy_separable(4, 20, 4, 2);
  TrainConfig t;
  t.epochs = 1;
  t.batch_size = 8;
  FitResult r = fit(data, 2, two_views(), t);
  const fs::path path = temp_file("plain.bin");
  save_checkpoint(path, r.model, {});
  Model loaded = load_mvf(path);
  expect_same_params(r.model, loaded);
  EXPECT_EQ(predict(loaded, data), predict(r.model, data));
  MvfOptimizers<float> opt(loaded, {});
  EXPECT_FALSE(restore_optimizers(path, opt));
  fs::remove(path);
}

TEST(Checkpoint, BaselineRoundTripAndKindCheck) {
  const auto data = toy_separable(4, 20, 4, 3);
  TrainConfig t;
  t.epochs = 1;
  t.batch_size = 8;
  BaselineFitResult r = fit_baseline(data, 2, t);
  const fs::path path = temp_file("base.bin");
  save_checkpoint(path, r.model, {});
  EXPECT_EQ(read_checkpoint_info(path).kind, ModelKind::Baseline);
  Baseline loaded = load_baseline(path);
  expect_same_params(r.model, loaded);
  try {
    load_mvf(path);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::SpecMismatch);
  }
  fs::remove(path);
}

TEST(Checkpoint, MalformedFiles) {
  const fs::path path = temp_file("bad.bin");
  {
    std::ofstream out(path, std::ios::binary);
    out << "NOTACKPT";
  }
  try {
    load_mvf(path);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Parse);
  }

  // truncated copy of a valid file
  const auto data = toy_separable(4, 20, 4, 4);
  TrainConfig t;
  t.epochs = 1;
  t.batch_size = 8;
  FitResult r = fit(data, 2, two_views(), t);
  save_checkpoint(path, r.model, {});
  fs::resize_file(path, fs::file_size(path) / 2);
  try {
    load_mvf(path);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Parse);
  }
  fs::remove(path);

  try {
    load_mvf("/nonexistent/dir/model.bin");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Io);
  }
}
