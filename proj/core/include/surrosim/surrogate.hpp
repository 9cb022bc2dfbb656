#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "surrosim/dataset.hpp"
#include "surrosim/nn.hpp"
#include "surrosim/sim.hpp"

namespace surrosim::surrogate {

enum class EncoderKind { kBlockOnly, kBlockPlusParams };
enum class Activation { kRelu, kTanh };

struct ModelSpec {
  EncoderKind encoder_kind = EncoderKind::kBlockOnly;
  int embed_width = 32;
  std::vector<int> hidden_widths = {32};
  Activation activation = Activation::kTanh;
  std::uint64_t init_seed = 0;

  bool operator==(const ModelSpec&) const = default;
};

void validate(const ModelSpec& spec);

// one-hot opcode (12) ++ one-hot dest (16, zeros if none) ++ summed one-hot
// sources (16) ++ position / 15 (1).
inline constexpr int kBlockFeatureDim = 45;
// opcode latency scaled to [0,1] ++ 3 port bits ++ 3 globals scaled to [0,1].
inline constexpr int kParamSliceDim = 7;

std::vector<nn::Tensor> encode_block(const isa::BasicBlock& block);
nn::Tensor encode_param_slice(const isa::Instruction& ins,
                              std::span<const double> flat_params);

// Glorot-uniform weights, zero biases, seeded by spec.init_seed.
// Entry order: embed, hidden0.., head; each layer W then b.
nn::ParamStore init_weights(const ModelSpec& spec);

struct TrainMeta {
  int epochs_run = 0;
  int selected_epoch = 0;  // 0 = the initial (warm-start) weights
  double best_val_loss = 0.0;
  double wall_seconds = 0.0;
};

struct SurrogateCheckpoint {
  ModelSpec spec;
  nn::ParamStore weights;
  TrainMeta train_meta;
};

// Tape-free forward pass: embed each instruction vector, activation,
// sum-pool, MLP, softplus head. Strictly positive output.
double predict(const SurrogateCheckpoint& ckpt, const isa::BasicBlock& block);
double predict(const SurrogateCheckpoint& ckpt, const isa::BasicBlock& block,
               std::span<const double> flat_params);

// Taped forward pass for gradients; weight_leaves align with the entry order
// of init_weights(). params_leaf is required iff the spec takes parameters.
nn::Tape::ValueId build_prediction(
    nn::Tape& tape, const ModelSpec& spec,
    std::span<const nn::Tape::ValueId> weight_leaves,
    const isa::BasicBlock& block,
    std::optional<nn::Tape::ValueId> params_leaf);

// Mean MAPE of predictions against record labels. Records must carry params
// iff the checkpoint encoder takes them.
double evaluate_mean_mape(const SurrogateCheckpoint& ckpt,
                          std::span<const isa::DatasetRecord> records);

// Mean MAPE over (block, label) pairs at a shared parameter vector, plus its
// gradient with respect to that vector. One tape over all blocks.
struct ParamObjective {
  double loss = 0.0;
  std::array<double, sim::kFlatDim> grad{};
};
ParamObjective param_objective_gradient(
    const SurrogateCheckpoint& ckpt,
    std::span<const isa::DatasetRecord> records,
    std::span<const double> flat_params);

struct TrainConfig {
  int epochs = 200;
  int batch_size = 32;
  double learning_rate = 1e-3;
  std::uint64_t seed = 0;
};

void validate(const TrainConfig& cfg);

struct EpochStats {
  double train_loss = 0.0;
  double val_loss = 0.0;
  double test_loss = 0.0;
  double cumulative_wall_seconds = 0.0;
};

struct TrainReport {
  EpochStats initial;               // losses of the starting weights (epoch 0)
  std::vector<EpochStats> epochs;   // one entry per completed epoch, 1-based
  int selected_epoch = 0;           // argmin val loss over {0} + epochs, ties earliest
};

struct TrainResult {
  SurrogateCheckpoint checkpoint;   // weights snapshot at selected_epoch
  TrainReport report;
};

// Mini-batch Adam on mean MAPE with seeded shuffling. Bitwise deterministic
// given (split, spec, cfg, warm_start). epochs == 0 with a warm start
// returns the warm-start weights unchanged.
TrainResult train(const isa::DatasetSplit& split, const ModelSpec& spec,
                  const TrainConfig& cfg,
                  const SurrogateCheckpoint* warm_start = nullptr);

// Checkpoint file: format version header, model spec, training metadata,
// named f64 weight arrays. Loading rejects unknown format versions.
void save_checkpoint(const SurrogateCheckpoint& ckpt,
                     const std::filesystem::path& path);
SurrogateCheckpoint load_checkpoint(const std::filesystem::path& path);

void write_train_report(const TrainReport& report,
                        const std::filesystem::path& path);
TrainReport read_train_report(const std::filesystem::path& path);

struct NoQualifyingWidth : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct CapacityRow {
  int width = 0;
  double best_val_mape = 0.0;
  double blocks_per_second = 0.0;
};

// Fastest row whose MAPE meets the threshold; ties keep the earliest row.
// Throws NoQualifyingWidth when nothing qualifies.
std::size_t select_fastest_under_threshold(std::span<const CapacityRow> rows,
                                           double threshold);

using SpeedFn = std::function<double(const SurrogateCheckpoint&)>;

struct CapacityResult {
  ModelSpec chosen_spec;
  std::size_t chosen_index = 0;
  std::vector<CapacityRow> rows;
  SurrogateCheckpoint chosen_checkpoint;
};

// Trains one model per candidate embedding width, measures inference speed
// with speed_fn, and picks the fastest one under the validation threshold.
CapacityResult capacity_search(const std::vector<int>& widths,
                               const isa::DatasetSplit& split,
                               const ModelSpec& base_spec,
                               const TrainConfig& cfg, double threshold,
                               const SpeedFn& speed_fn);

}  // namespace surrosim::surrogate
