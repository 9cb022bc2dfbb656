#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "surrosim/rng.hpp"

namespace surrosim::nn {

// Dense row-major f64 tensor.
struct Tensor {
  std::vector<std::size_t> shape;
  std::vector<double> values;

  static Tensor zeros(std::vector<std::size_t> shape);
  static Tensor scalar(double v);
  static Tensor from_vector(std::vector<double> v);

  std::size_t size() const { return values.size(); }
  bool same_shape(const Tensor& other) const { return shape == other.shape; }

  bool operator==(const Tensor&) const = default;
};

// Named weight tensors with stable insertion order.
class ParamStore {
 public:
  void add(std::string name, Tensor t);
  bool contains(std::string_view name) const;
  const Tensor& get(std::string_view name) const;
  Tensor& get_mutable(std::string_view name);

  std::size_t size() const { return entries_.size(); }
  const std::vector<std::pair<std::string, Tensor>>& entries() const {
    return entries_;
  }
  std::vector<std::pair<std::string, Tensor>>& entries_mutable() {
    return entries_;
  }

  bool operator==(const ParamStore&) const = default;

 private:
  std::vector<std::pair<std::string, Tensor>> entries_;
};

// |y_pred - y_true| / y_true. Throws std::invalid_argument on y_true <= 0.
double mape(double y_pred, double y_true);
// d mape / d y_pred = sign(y_pred - y_true) / y_true, with sign(0) = 0.
double mape_grad(double y_pred, double y_true);
double mean_mape(std::span<const double> preds, std::span<const double> trues);

// Recorded computation over tensors with reverse-mode gradients. Creation
// order is a topological order; backward visits nodes in reverse exactly
// once. A tape is single-owner; it is not shared across training steps.
class Tape {
 public:
  using ValueId = std::int32_t;

  ValueId leaf(Tensor t);

  // y = W x + b, W: [out, in], x: [in], b: [out]
  ValueId affine(ValueId x, ValueId w, ValueId b);
  ValueId relu(ValueId x);
  ValueId tanh(ValueId x);
  ValueId softplus(ValueId x);
  ValueId concat(std::span<const ValueId> xs);
  // Elementwise sum of a same-shape sequence.
  ValueId sum_pool(std::span<const ValueId> xs);
  // Row `index` of a [n, d] table.
  ValueId embedding_lookup(ValueId table, std::size_t index);
  // Elementwise mean of a same-shape sequence.
  ValueId mean(std::span<const ValueId> xs);
  // y_i = (x[indices[i]] - offsets[i]) * scales[i]; the differentiable
  // gather used to splice parameter slices out of a flat parameter vector.
  ValueId select_scale(ValueId x, std::vector<std::size_t> indices,
                       std::vector<double> scales, std::vector<double> offsets);
  // Scalar |pred - y_true| / y_true with the kink subgradient defined as 0.
  ValueId mape_loss(ValueId pred, double y_true);

  const Tensor& value(ValueId id) const;
  // Accumulates gradients for every node reachable from `root` (scalar).
  void backward(ValueId root);
  // Valid after backward().
  const Tensor& grad(ValueId id) const;

  std::size_t node_count() const { return nodes_.size(); }

 private:
  enum class Op {
    kLeaf,
    kAffine,
    kRelu,
    kTanh,
    kSoftplus,
    kConcat,
    kSumPool,
    kEmbedding,
    kMean,
    kSelectScale,
    kMapeLoss,
  };

  struct Node {
    Op op;
    Tensor value;
    Tensor grad;
    std::vector<ValueId> parents;
    std::vector<std::size_t> indices;  // select_scale / embedding_lookup
    std::vector<double> scales;
    std::vector<double> offsets;
    double y_true = 0.0;  // mape_loss
  };

  ValueId push(Node node);
  Node& at(ValueId id) { return nodes_[static_cast<std::size_t>(id)]; }
  const Node& at(ValueId id) const { return nodes_[static_cast<std::size_t>(id)]; }

  std::vector<Node> nodes_;
};

// Bias-corrected adaptive-moment update. Deterministic; moments are keyed
// to the store's entry order.
struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

class AdamState {
 public:
  explicit AdamState(AdamConfig cfg = {}) : cfg_(cfg) {}

  const AdamConfig& config() const { return cfg_; }
  std::int64_t step_count() const { return step_; }

  // grads must mirror store names and shapes. Updates store in place.
  void step(ParamStore& store, const ParamStore& grads);

 private:
  AdamConfig cfg_;
  ParamStore moment1_;
  ParamStore moment2_;
  std::int64_t step_ = 0;
};

// Seeded uniform init on [-limit, limit].
Tensor uniform_init(std::vector<std::size_t> shape, double limit, Rng& rng);

// Model under check: builds the (scalar) output from leaves the checker
// supplies for every store entry and every designated input tensor.
using ModelFn = std::function<Tape::ValueId(
    Tape&, std::span<const Tape::ValueId> store_leaves,
    std::span<const Tape::ValueId> input_leaves)>;

struct FdIssue {
  std::string where;  // store entry name or "input[k]"
  std::size_t index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  double rel_error = 0.0;
};

struct FdReport {
  double max_rel_error = 0.0;
  std::size_t coords_checked = 0;
  bool pass = false;
  std::vector<FdIssue> failures;  // entries above tolerance
};

// Central differences (step 1e-5) against reverse-mode gradients, over every
// store coordinate and every input coordinate.
FdReport finite_difference_check(const ModelFn& model, const ParamStore& store,
                                 const std::vector<Tensor>& inputs,
                                 double tolerance);

}  // namespace surrosim::nn
