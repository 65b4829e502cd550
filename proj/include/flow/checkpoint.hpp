#pragma once

// Binary model checkpoints. Layout (all integers and floats little-endian):
//
//   "FLOWCKPT"                         8 bytes
//   u32 version (1), u32 kind          0 = MVFNet, 1 = baseline
//   i32 x 10                           steps channels classes views conv_layers
//                                      conv_filters kernel lstm_layers hidden
//                                      voting_hidden
//   u64 seed
//   i32 granularity, i32 view set, i32 epoch
//   u32 c, f64[c] mean, f64[c] scale   input standardization
//   u32 tensor count, then per tensor: u32 name length, name bytes,
//                                      u32 rows, u32 cols, f32[rows*cols]
//   u32 optimizer count, then per optimizer: i64 step count, and for every
//                                      parameter of its group (in tensor
//                                      order) f32 first moment, f32 second
//                                      moment
//
// Every value is stored in its in-memory representation, so save/load
// round-trips bit-exactly.

#include <cstdint>
#include <filesystem>

#include "flow/trainer.hpp"

namespace flow {

enum class ModelKind : std::uint32_t { Mvf = 0, Baseline = 1 };

struct CheckpointInfo {
  ModelKind kind = ModelKind::Mvf;
  nn::ModelConfig config;
  std::uint64_t seed = 0;
  Granularity granularity = Granularity::Medium;
  ViewSet view_set = ViewSet::LocalGlobal;
  int epoch = 0;
};

// `info.kind`, `info.config` and `info.seed` are taken from the model.
void save_checkpoint(const std::filesystem::path& path, Model& model, CheckpointInfo info,
                     MvfOptimizers<float>* optimizers = nullptr);
void save_checkpoint(const std::filesystem::path& path, Baseline& model, CheckpointInfo info);

CheckpointInfo read_checkpoint_info(const std::filesystem::path& path);

// Throws Io when the file cannot be read, Parse on a malformed file and
// SpecMismatch when the file holds the other model kind.
Model load_mvf(const std::filesystem::path& path, CheckpointInfo* info = nullptr);
Baseline load_baseline(const std::filesystem::path& path, CheckpointInfo* info = nullptr);

// Restores Adam state saved with the model into optimizers built over it.
// Returns false when the file carries no optimizer state.
bool restore_optimizers(const std::filesystem::path& path, MvfOptimizers<float>& optimizers);

}  // namespace flow
