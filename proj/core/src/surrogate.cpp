#include "surrosim/surrogate.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>

#include "nlohmann/json.hpp"

namespace surrosim::surrogate {

using json = nlohmann::ordered_json;

void validate(const ModelSpec& spec) {
  if (spec.embed_width < 1) {
    throw std::invalid_argument("embed_width must be >= 1");
  }
  for (int w : spec.hidden_widths) {
    if (w < 1) throw std::invalid_argument("hidden widths must be >= 1");
  }
}

void validate(const TrainConfig& cfg) {
  if (cfg.epochs < 0) throw std::invalid_argument("epochs must be >= 0");
  if (cfg.batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
  if (!(cfg.learning_rate > 0.0)) {
    throw std::invalid_argument("learning_rate must be > 0");
  }
}

std::vector<nn::Tensor> encode_block(const isa::BasicBlock& block) {
  isa::validate(block);
  std::vector<nn::Tensor> feats;
  feats.reserve(block.instructions.size());
  for (std::size_t pos = 0; pos < block.instructions.size(); ++pos) {
    const isa::Instruction& ins = block.instructions[pos];
    nn::Tensor f = nn::Tensor::zeros({kBlockFeatureDim});
    f.values[static_cast<std::size_t>(ins.opcode)] = 1.0;
    if (ins.dest) {
      f.values[isa::kNumOpcodes + *ins.dest] = 1.0;
    }
    for (std::uint8_t s : ins.srcs) {
      f.values[isa::kNumOpcodes + isa::kNumRegisters + s] += 1.0;
    }
    f.values[kBlockFeatureDim - 1] =
        static_cast<double>(pos) / (isa::kMaxBlockLen - 1);
    feats.push_back(std::move(f));
  }
  return feats;
}

namespace {

// Coordinates of the slice of the flat parameter vector that affects one
// opcode, with the affine maps that place each coordinate in [0, 1].
struct SliceSpec {
  std::vector<std::size_t> indices;
  std::vector<double> scales;
  std::vector<double> offsets;
};

SliceSpec param_slice_spec(isa::Opcode op) {
  const sim::ParamBounds& bounds = sim::param_bounds();
  SliceSpec s;
  auto push = [&](std::size_t idx) {
    const double lo = bounds.lower[idx];
    const double hi = bounds.upper[idx];
    s.indices.push_back(idx);
    s.scales.push_back(hi > lo ? 1.0 / (hi - lo) : 1.0);
    s.offsets.push_back(lo);
  };
  const auto op_idx = static_cast<std::size_t>(op);
  push(op_idx);  // latency
  for (int port = 0; port < sim::kNumPorts; ++port) {
    push(isa::kNumOpcodes + op_idx * sim::kNumPorts + static_cast<std::size_t>(port));
  }
  for (int g = 0; g < 3; ++g) {
    push(static_cast<std::size_t>(sim::kFlatDim - 3 + g));
  }
  return s;
}

}  // namespace

nn::Tensor encode_param_slice(const isa::Instruction& ins,
                              std::span<const double> flat_params) {
  if (flat_params.size() != sim::kFlatDim) {
    throw std::invalid_argument("flat params must have dimension " +
                                std::to_string(sim::kFlatDim) + ", got " +
                                std::to_string(flat_params.size()));
  }
  const SliceSpec spec = param_slice_spec(ins.opcode);
  nn::Tensor out = nn::Tensor::zeros({kParamSliceDim});
  for (std::size_t i = 0; i < spec.indices.size(); ++i) {
    out.values[i] =
        (flat_params[spec.indices[i]] - spec.offsets[i]) * spec.scales[i];
  }
  return out;
}

namespace {

struct LayerDims {
  std::size_t in = 0;
  std::size_t out = 0;
  std::string name;
};

std::vector<LayerDims> layer_dims(const ModelSpec& spec) {
  const std::size_t input_dim =
      spec.encoder_kind == EncoderKind::kBlockPlusParams
          ? kBlockFeatureDim + kParamSliceDim
          : kBlockFeatureDim;
  std::vector<LayerDims> layers;
  layers.push_back({input_dim, static_cast<std::size_t>(spec.embed_width), "embed"});
  std::size_t prev = static_cast<std::size_t>(spec.embed_width);
  for (std::size_t h = 0; h < spec.hidden_widths.size(); ++h) {
    const auto width = static_cast<std::size_t>(spec.hidden_widths[h]);
    layers.push_back({prev, width, "hidden" + std::to_string(h)});
    prev = width;
  }
  layers.push_back({prev, 1, "head"});
  return layers;
}

}  // namespace

nn::ParamStore init_weights(const ModelSpec& spec) {
  validate(spec);
  Rng rng(derive_seed(spec.init_seed, "weight-init"));
  nn::ParamStore store;
  for (const LayerDims& l : layer_dims(spec)) {
    const double limit = std::sqrt(6.0 / static_cast<double>(l.in + l.out));
    store.add(l.name + ".W", nn::uniform_init({l.out, l.in}, limit, rng));
    store.add(l.name + ".b", nn::Tensor::zeros({l.out}));
  }
  return store;
}

namespace {

double activate(Activation act, double v) {
  return act == Activation::kRelu ? (v > 0.0 ? v : 0.0) : std::tanh(v);
}

// Shared scratch-free forward used by both predict() overloads.
double forward_raw(const ModelSpec& spec, const nn::ParamStore& weights,
                   const isa::BasicBlock& block, const double* flat_params) {
  const bool with_params = spec.encoder_kind == EncoderKind::kBlockPlusParams;
  const std::vector<LayerDims> layers = layer_dims(spec);
  const std::size_t input_dim = layers[0].in;
  const auto embed_width = static_cast<std::size_t>(spec.embed_width);

  const nn::Tensor& we = weights.get("embed.W");
  const nn::Tensor& be = weights.get("embed.b");

  std::vector<double> feat(input_dim, 0.0);
  std::vector<double> pooled(embed_width, 0.0);
  for (std::size_t pos = 0; pos < block.instructions.size(); ++pos) {
    const isa::Instruction& ins = block.instructions[pos];
    std::fill(feat.begin(), feat.end(), 0.0);
    feat[static_cast<std::size_t>(ins.opcode)] = 1.0;
    if (ins.dest) feat[isa::kNumOpcodes + *ins.dest] = 1.0;
    for (std::uint8_t s : ins.srcs) {
      feat[isa::kNumOpcodes + isa::kNumRegisters + s] += 1.0;
    }
    feat[kBlockFeatureDim - 1] = static_cast<double>(pos) / (isa::kMaxBlockLen - 1);
    if (with_params) {
      const SliceSpec slice = param_slice_spec(ins.opcode);
      for (std::size_t i = 0; i < slice.indices.size(); ++i) {
        feat[kBlockFeatureDim + i] =
            (flat_params[slice.indices[i]] - slice.offsets[i]) * slice.scales[i];
      }
    }
    for (std::size_t o = 0; o < embed_width; ++o) {
      double acc = be.values[o];
      const double* row = we.values.data() + o * input_dim;
      for (std::size_t i = 0; i < input_dim; ++i) acc += row[i] * feat[i];
      pooled[o] += activate(spec.activation, acc);
    }
  }

  std::vector<double> h = std::move(pooled);
  std::vector<double> next;
  for (std::size_t li = 1; li + 1 < layers.size(); ++li) {
    const nn::Tensor& w = weights.get(layers[li].name + ".W");
    const nn::Tensor& b = weights.get(layers[li].name + ".b");
    next.assign(layers[li].out, 0.0);
    for (std::size_t o = 0; o < layers[li].out; ++o) {
      double acc = b.values[o];
      const double* row = w.values.data() + o * layers[li].in;
      for (std::size_t i = 0; i < layers[li].in; ++i) acc += row[i] * h[i];
      next[o] = activate(spec.activation, acc);
    }
    h.swap(next);
  }

  const nn::Tensor& wh = weights.get("head.W");
  const nn::Tensor& bh = weights.get("head.b");
  double out = bh.values[0];
  for (std::size_t i = 0; i < h.size(); ++i) out += wh.values[i] * h[i];
  return out > 0.0 ? out + std::log1p(std::exp(-out)) : std::log1p(std::exp(out));
}

}  // namespace

double predict(const SurrogateCheckpoint& ckpt, const isa::BasicBlock& block) {
  if (ckpt.spec.encoder_kind != EncoderKind::kBlockOnly) {
    throw std::invalid_argument("this checkpoint requires a parameter vector");
  }
  return forward_raw(ckpt.spec, ckpt.weights, block, nullptr);
}

double predict(const SurrogateCheckpoint& ckpt, const isa::BasicBlock& block,
               std::span<const double> flat_params) {
  if (ckpt.spec.encoder_kind != EncoderKind::kBlockPlusParams) {
    throw std::invalid_argument("this checkpoint does not take a parameter vector");
  }
  if (flat_params.size() != sim::kFlatDim) {
    throw std::invalid_argument("flat params must have dimension " +
                                std::to_string(sim::kFlatDim));
  }
  return forward_raw(ckpt.spec, ckpt.weights, block, flat_params.data());
}

nn::Tape::ValueId build_prediction(
    nn::Tape& tape, const ModelSpec& spec,
    std::span<const nn::Tape::ValueId> weight_leaves,
    const isa::BasicBlock& block,
    std::optional<nn::Tape::ValueId> params_leaf) {
  const bool with_params = spec.encoder_kind == EncoderKind::kBlockPlusParams;
  if (with_params != params_leaf.has_value()) {
    throw std::invalid_argument("params leaf present iff the encoder takes parameters");
  }
  const std::vector<LayerDims> layers = layer_dims(spec);
  if (weight_leaves.size() != layers.size() * 2) {
    throw std::invalid_argument("weight leaf count mismatch");
  }

  const std::vector<nn::Tensor> feats = encode_block(block);
  std::vector<nn::Tape::ValueId> embedded;
  embedded.reserve(feats.size());
  for (std::size_t pos = 0; pos < feats.size(); ++pos) {
    nn::Tape::ValueId input = tape.leaf(feats[pos]);
    if (with_params) {
      const SliceSpec slice = param_slice_spec(block.instructions[pos].opcode);
      nn::Tape::ValueId slice_id = tape.select_scale(
          *params_leaf, slice.indices, slice.scales, slice.offsets);
      const nn::Tape::ValueId pieces[] = {input, slice_id};
      input = tape.concat(pieces);
    }
    nn::Tape::ValueId z = tape.affine(input, weight_leaves[0], weight_leaves[1]);
    embedded.push_back(spec.activation == Activation::kRelu ? tape.relu(z)
                                                            : tape.tanh(z));
  }
  nn::Tape::ValueId h = tape.sum_pool(embedded);
  for (std::size_t li = 1; li + 1 < layers.size(); ++li) {
    nn::Tape::ValueId z = tape.affine(h, weight_leaves[li * 2], weight_leaves[li * 2 + 1]);
    h = spec.activation == Activation::kRelu ? tape.relu(z) : tape.tanh(z);
  }
  const std::size_t head = layers.size() - 1;
  nn::Tape::ValueId z = tape.affine(h, weight_leaves[head * 2], weight_leaves[head * 2 + 1]);
  return tape.softplus(z);
}

double evaluate_mean_mape(const SurrogateCheckpoint& ckpt,
                          std::span<const isa::DatasetRecord> records) {
  if (records.empty()) {
    throw std::invalid_argument("evaluate_mean_mape: empty input");
  }
  const bool with_params = ckpt.spec.encoder_kind == EncoderKind::kBlockPlusParams;
  double sum = 0.0;
  for (const isa::DatasetRecord& rec : records) {
    double pred;
    if (with_params) {
      if (!rec.params) {
        throw std::invalid_argument("record lacks params for a block+params model");
      }
      pred = predict(ckpt, rec.block, *rec.params);
    } else {
      pred = predict(ckpt, rec.block);
    }
    sum += nn::mape(pred, rec.label);
  }
  return sum / static_cast<double>(records.size());
}

ParamObjective param_objective_gradient(
    const SurrogateCheckpoint& ckpt,
    std::span<const isa::DatasetRecord> records,
    std::span<const double> flat_params) {
  if (ckpt.spec.encoder_kind != EncoderKind::kBlockPlusParams) {
    throw std::invalid_argument("parameter objective requires a block+params model");
  }
  if (records.empty()) {
    throw std::invalid_argument("parameter objective: empty input");
  }
  nn::Tape tape;
  std::vector<nn::Tape::ValueId> weight_leaves;
  for (const auto& [name, t] : ckpt.weights.entries()) {
    weight_leaves.push_back(tape.leaf(t));
  }
  const nn::Tape::ValueId params_leaf =
      tape.leaf(nn::Tensor::from_vector({flat_params.begin(), flat_params.end()}));
  std::vector<nn::Tape::ValueId> losses;
  losses.reserve(records.size());
  for (const isa::DatasetRecord& rec : records) {
    const nn::Tape::ValueId pred =
        build_prediction(tape, ckpt.spec, weight_leaves, rec.block, params_leaf);
    losses.push_back(tape.mape_loss(pred, rec.label));
  }
  const nn::Tape::ValueId loss = tape.mean(losses);
  tape.backward(loss);

  ParamObjective result;
  result.loss = tape.value(loss).values[0];
  const nn::Tensor& g = tape.grad(params_leaf);
  std::copy(g.values.begin(), g.values.end(), result.grad.begin());
  return result;
}

namespace {

double eval_or_zero(const SurrogateCheckpoint& ckpt,
                    std::span<const isa::DatasetRecord> records) {
  return records.empty() ? 0.0 : evaluate_mean_mape(ckpt, records);
}

}  // namespace

TrainResult train(const isa::DatasetSplit& split, const ModelSpec& spec,
                  const TrainConfig& cfg, const SurrogateCheckpoint* warm_start) {
  validate(spec);
  validate(cfg);
  if (split.train.empty() || split.validation.empty()) {
    throw std::invalid_argument("train and validation sets must be nonempty");
  }
  if (warm_start && !(warm_start->spec == spec)) {
    throw std::invalid_argument("warm start spec does not match requested spec");
  }
  const bool with_params = spec.encoder_kind == EncoderKind::kBlockPlusParams;
  for (const isa::DatasetRecord& rec : split.train) {
    if (with_params && !rec.params) {
      throw std::invalid_argument("training records lack params for a block+params model");
    }
  }

  const auto start = std::chrono::steady_clock::now();
  auto elapsed = [&] {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
        .count();
  };

  SurrogateCheckpoint current;
  current.spec = spec;
  current.weights = warm_start ? warm_start->weights : init_weights(spec);

  TrainReport report;
  report.initial.train_loss = evaluate_mean_mape(current, split.train);
  report.initial.val_loss = evaluate_mean_mape(current, split.validation);
  report.initial.test_loss = eval_or_zero(current, split.test);
  report.initial.cumulative_wall_seconds = elapsed();

  nn::ParamStore best_weights = current.weights;
  double best_val = report.initial.val_loss;
  int selected_epoch = 0;

  nn::AdamState adam(nn::AdamConfig{cfg.learning_rate, 0.9, 0.999, 1e-8});
  Rng shuffle_rng(derive_seed(cfg.seed, "batch-shuffle"));

  std::vector<std::size_t> order(split.train.size());
  std::iota(order.begin(), order.end(), 0);

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    shuffle_rng.shuffle(order);
    double epoch_loss_sum = 0.0;
    for (std::size_t batch_start = 0; batch_start < order.size();
         batch_start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t batch_end =
          std::min(order.size(), batch_start + static_cast<std::size_t>(cfg.batch_size));

      nn::Tape tape;
      std::vector<nn::Tape::ValueId> weight_leaves;
      for (const auto& [name, t] : current.weights.entries()) {
        weight_leaves.push_back(tape.leaf(t));
      }
      std::vector<nn::Tape::ValueId> losses;
      losses.reserve(batch_end - batch_start);
      for (std::size_t k = batch_start; k < batch_end; ++k) {
        const isa::DatasetRecord& rec = split.train[order[k]];
        std::optional<nn::Tape::ValueId> params_leaf;
        if (with_params) {
          params_leaf = tape.leaf(nn::Tensor::from_vector(*rec.params));
        }
        const nn::Tape::ValueId pred =
            build_prediction(tape, spec, weight_leaves, rec.block, params_leaf);
        losses.push_back(tape.mape_loss(pred, rec.label));
      }
      const nn::Tape::ValueId batch_loss = tape.mean(losses);
      tape.backward(batch_loss);
      epoch_loss_sum +=
          tape.value(batch_loss).values[0] * static_cast<double>(batch_end - batch_start);

      nn::ParamStore grads;
      for (std::size_t e = 0; e < current.weights.entries().size(); ++e) {
        grads.add(current.weights.entries()[e].first, tape.grad(weight_leaves[e]));
      }
      adam.step(current.weights, grads);
    }

    EpochStats stats;
    stats.train_loss = epoch_loss_sum / static_cast<double>(order.size());
    stats.val_loss = evaluate_mean_mape(current, split.validation);
    stats.test_loss = eval_or_zero(current, split.test);
    stats.cumulative_wall_seconds = elapsed();
    report.epochs.push_back(stats);

    if (stats.val_loss < best_val) {
      best_val = stats.val_loss;
      best_weights = current.weights;
      selected_epoch = epoch;
    }
  }

  report.selected_epoch = selected_epoch;

  TrainResult result;
  result.checkpoint.spec = spec;
  result.checkpoint.weights = std::move(best_weights);
  result.checkpoint.train_meta =
      TrainMeta{cfg.epochs, selected_epoch, best_val, elapsed()};
  result.report = std::move(report);
  return result;
}

namespace {

constexpr int kCheckpointFormatVersion = 1;

json spec_to_json(const ModelSpec& spec) {
  json j;
  j["encoder_kind"] = spec.encoder_kind == EncoderKind::kBlockPlusParams
                          ? "block_plus_params"
                          : "block_only";
  j["embed_width"] = spec.embed_width;
  j["hidden_widths"] = spec.hidden_widths;
  j["activation"] = spec.activation == Activation::kRelu ? "relu" : "tanh";
  j["init_seed"] = spec.init_seed;
  return j;
}

ModelSpec spec_from_json(const json& j) {
  ModelSpec spec;
  const std::string kind = j.at("encoder_kind").get<std::string>();
  if (kind == "block_only") {
    spec.encoder_kind = EncoderKind::kBlockOnly;
  } else if (kind == "block_plus_params") {
    spec.encoder_kind = EncoderKind::kBlockPlusParams;
  } else {
    throw std::runtime_error("unknown encoder_kind: " + kind);
  }
  spec.embed_width = j.at("embed_width").get<int>();
  spec.hidden_widths = j.at("hidden_widths").get<std::vector<int>>();
  const std::string act = j.at("activation").get<std::string>();
  if (act == "relu") {
    spec.activation = Activation::kRelu;
  } else if (act == "tanh") {
    spec.activation = Activation::kTanh;
  } else {
    throw std::runtime_error("unknown activation: " + act);
  }
  spec.init_seed = j.at("init_seed").get<std::uint64_t>();
  validate(spec);
  return spec;
}

}  // namespace

void save_checkpoint(const SurrogateCheckpoint& ckpt,
                     const std::filesystem::path& path) {
  json j;
  j["format_version"] = kCheckpointFormatVersion;
  j["spec"] = spec_to_json(ckpt.spec);
  j["train_meta"] = {{"epochs_run", ckpt.train_meta.epochs_run},
                     {"selected_epoch", ckpt.train_meta.selected_epoch},
                     {"best_val_loss", ckpt.train_meta.best_val_loss},
                     {"wall_seconds", ckpt.train_meta.wall_seconds}};
  json weights = json::object();
  for (const auto& [name, t] : ckpt.weights.entries()) {
    weights[name] = {{"shape", t.shape}, {"values", t.values}};
  }
  j["weights"] = std::move(weights);

  std::ofstream out(path);
  if (!out) {
    throw std::runtime_error("cannot open for writing: " + path.string());
  }
  out << j.dump(2) << '\n';
  if (!out) {
    throw std::runtime_error("write failed: " + path.string());
  }
}

SurrogateCheckpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("cannot open for reading: " + path.string());
  }
  json j = json::parse(in, nullptr, false);
  if (j.is_discarded()) {
    throw std::runtime_error("malformed checkpoint: " + path.string());
  }
  const int version = j.at("format_version").get<int>();
  if (version != kCheckpointFormatVersion) {
    throw std::runtime_error("unsupported checkpoint format version " +
                             std::to_string(version));
  }
  SurrogateCheckpoint ckpt;
  ckpt.spec = spec_from_json(j.at("spec"));
  const json& meta = j.at("train_meta");
  ckpt.train_meta.epochs_run = meta.at("epochs_run").get<int>();
  ckpt.train_meta.selected_epoch = meta.at("selected_epoch").get<int>();
  ckpt.train_meta.best_val_loss = meta.at("best_val_loss").get<double>();
  ckpt.train_meta.wall_seconds = meta.at("wall_seconds").get<double>();
  for (const auto& [name, entry] : j.at("weights").items()) {
    nn::Tensor t;
    t.shape = entry.at("shape").get<std::vector<std::size_t>>();
    t.values = entry.at("values").get<std::vector<double>>();
    std::size_t n = 1;
    for (std::size_t d : t.shape) n *= d;
    if (n != t.values.size()) {
      throw std::runtime_error("checkpoint weight " + name + " has inconsistent shape");
    }
    ckpt.weights.add(name, std::move(t));
  }
  return ckpt;
}

void write_train_report(const TrainReport& report,
                        const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) {
    throw std::runtime_error("cannot open for writing: " + path.string());
  }
  auto epoch_line = [](int epoch, const EpochStats& s) {
    json j;
    j["epoch"] = epoch;
    j["train_loss"] = s.train_loss;
    j["val_loss"] = s.val_loss;
    j["test_loss"] = s.test_loss;
    j["cumulative_wall_seconds"] = s.cumulative_wall_seconds;
    return j;
  };
  json header;
  header["selected_epoch"] = report.selected_epoch;
  header["epochs_run"] = report.epochs.size();
  out << header.dump() << '\n';
  out << epoch_line(0, report.initial).dump() << '\n';
  for (std::size_t e = 0; e < report.epochs.size(); ++e) {
    out << epoch_line(static_cast<int>(e) + 1, report.epochs[e]).dump() << '\n';
  }
  if (!out) {
    throw std::runtime_error("write failed: " + path.string());
  }
}

TrainReport read_train_report(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("cannot open for reading: " + path.string());
  }
  TrainReport report;
  std::string line;
  if (!std::getline(in, line)) {
    throw std::runtime_error("empty train report: " + path.string());
  }
  json header = json::parse(line);
  report.selected_epoch = header.at("selected_epoch").get<int>();
  bool first = true;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    json j = json::parse(line);
    EpochStats s;
    s.train_loss = j.at("train_loss").get<double>();
    s.val_loss = j.at("val_loss").get<double>();
    s.test_loss = j.at("test_loss").get<double>();
    s.cumulative_wall_seconds = j.at("cumulative_wall_seconds").get<double>();
    if (first) {
      report.initial = s;
      first = false;
    } else {
      report.epochs.push_back(s);
    }
  }
  return report;
}

std::size_t select_fastest_under_threshold(std::span<const CapacityRow> rows,
                                           double threshold) {
  if (rows.empty()) {
    throw std::invalid_argument("capacity table is empty");
  }
  std::optional<std::size_t> best;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].best_val_mape > threshold) continue;
    if (!best || rows[i].blocks_per_second > rows[*best].blocks_per_second) {
      best = i;
    }
  }
  if (!best) {
    throw NoQualifyingWidth("no qualifying width: every candidate exceeds " +
                            std::to_string(threshold) + " validation MAPE");
  }
  return *best;
}

CapacityResult capacity_search(const std::vector<int>& widths,
                               const isa::DatasetSplit& split,
                               const ModelSpec& base_spec,
                               const TrainConfig& cfg, double threshold,
                               const SpeedFn& speed_fn) {
  if (widths.empty()) {
    throw std::invalid_argument("capacity_search: empty width list");
  }
  if (!(threshold > 0.0)) {
    throw std::invalid_argument("capacity_search: threshold must be > 0");
  }
  CapacityResult result;
  std::vector<SurrogateCheckpoint> checkpoints;
  for (int width : widths) {
    ModelSpec spec = base_spec;
    spec.embed_width = width;
    TrainResult trained = train(split, spec, cfg);
    CapacityRow row;
    row.width = width;
    row.best_val_mape = trained.checkpoint.train_meta.best_val_loss;
    row.blocks_per_second = speed_fn(trained.checkpoint);
    result.rows.push_back(row);
    checkpoints.push_back(std::move(trained.checkpoint));
  }
  result.chosen_index = select_fastest_under_threshold(result.rows, threshold);
  result.chosen_checkpoint = std::move(checkpoints[result.chosen_index]);
  result.chosen_spec = result.chosen_checkpoint.spec;
  return result;
}

}  // namespace surrosim::surrogate
