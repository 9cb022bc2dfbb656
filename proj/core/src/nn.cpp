#include "surrosim/nn.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace surrosim::nn {

Tensor Tensor::zeros(std::vector<std::size_t> shape) {
  Tensor t;
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  t.shape = std::move(shape);
  t.values.assign(n, 0.0);
  return t;
}

Tensor Tensor::scalar(double v) {
  Tensor t;
  t.shape = {1};
  t.values = {v};
  return t;
}

Tensor Tensor::from_vector(std::vector<double> v) {
  Tensor t;
  t.shape = {v.size()};
  t.values = std::move(v);
  return t;
}

void ParamStore::add(std::string name, Tensor t) {
  if (contains(name)) {
    throw std::invalid_argument("duplicate parameter name: " + name);
  }
  entries_.emplace_back(std::move(name), std::move(t));
}

bool ParamStore::contains(std::string_view name) const {
  for (const auto& [n, t] : entries_) {
    if (n == name) return true;
  }
  return false;
}

const Tensor& ParamStore::get(std::string_view name) const {
  for (const auto& [n, t] : entries_) {
    if (n == name) return t;
  }
  throw std::out_of_range("no parameter named " + std::string(name));
}

Tensor& ParamStore::get_mutable(std::string_view name) {
  for (auto& [n, t] : entries_) {
    if (n == name) return t;
  }
  throw std::out_of_range("no parameter named " + std::string(name));
}

double mape(double y_pred, double y_true) {
  if (!(y_true > 0.0)) {
    throw std::invalid_argument("mape requires y_true > 0");
  }
  return std::abs(y_pred - y_true) / y_true;
}

double mape_grad(double y_pred, double y_true) {
  if (!(y_true > 0.0)) {
    throw std::invalid_argument("mape requires y_true > 0");
  }
  const double d = y_pred - y_true;
  if (d > 0.0) return 1.0 / y_true;
  if (d < 0.0) return -1.0 / y_true;
  return 0.0;
}

double mean_mape(std::span<const double> preds, std::span<const double> trues) {
  if (preds.size() != trues.size()) {
    throw std::invalid_argument("mean_mape: length mismatch");
  }
  if (preds.empty()) {
    throw std::invalid_argument("mean_mape: empty input");
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    sum += mape(preds[i], trues[i]);
  }
  return sum / static_cast<double>(preds.size());
}

Tape::ValueId Tape::push(Node node) {
  nodes_.push_back(std::move(node));
  return static_cast<ValueId>(nodes_.size() - 1);
}

Tape::ValueId Tape::leaf(Tensor t) {
  Node n;
  n.op = Op::kLeaf;
  n.value = std::move(t);
  return push(std::move(n));
}

Tape::ValueId Tape::affine(ValueId x, ValueId w, ValueId b) {
  const Tensor& xv = at(x).value;
  const Tensor& wv = at(w).value;
  const Tensor& bv = at(b).value;
  if (wv.shape.size() != 2 || xv.shape.size() != 1 || bv.shape.size() != 1 ||
      wv.shape[1] != xv.shape[0] || wv.shape[0] != bv.shape[0]) {
    throw std::invalid_argument(
        "affine: shape mismatch, W [" +
        (wv.shape.size() == 2 ? std::to_string(wv.shape[0]) + "," + std::to_string(wv.shape[1])
                              : std::string("?")) +
        "] x [" + std::to_string(xv.size()) + "] b [" + std::to_string(bv.size()) + "]");
  }
  const std::size_t out = wv.shape[0];
  const std::size_t in = wv.shape[1];
  Node n;
  n.op = Op::kAffine;
  n.parents = {x, w, b};
  n.value = Tensor::zeros({out});
  for (std::size_t o = 0; o < out; ++o) {
    double acc = bv.values[o];
    const double* row = wv.values.data() + o * in;
    for (std::size_t i = 0; i < in; ++i) acc += row[i] * xv.values[i];
    n.value.values[o] = acc;
  }
  return push(std::move(n));
}

Tape::ValueId Tape::relu(ValueId x) {
  Node n;
  n.op = Op::kRelu;
  n.parents = {x};
  n.value = at(x).value;
  for (double& v : n.value.values) v = v > 0.0 ? v : 0.0;
  return push(std::move(n));
}

Tape::ValueId Tape::tanh(ValueId x) {
  Node n;
  n.op = Op::kTanh;
  n.parents = {x};
  n.value = at(x).value;
  for (double& v : n.value.values) v = std::tanh(v);
  return push(std::move(n));
}

Tape::ValueId Tape::softplus(ValueId x) {
  Node n;
  n.op = Op::kSoftplus;
  n.parents = {x};
  n.value = at(x).value;
  for (double& v : n.value.values) {
    v = v > 0.0 ? v + std::log1p(std::exp(-v)) : std::log1p(std::exp(v));
  }
  return push(std::move(n));
}

Tape::ValueId Tape::concat(std::span<const ValueId> xs) {
  if (xs.empty()) throw std::invalid_argument("concat: empty input");
  Node n;
  n.op = Op::kConcat;
  std::size_t total = 0;
  for (ValueId id : xs) {
    n.parents.push_back(id);
    total += at(id).value.size();
  }
  n.value = Tensor::zeros({total});
  std::size_t pos = 0;
  for (ValueId id : xs) {
    const Tensor& v = at(id).value;
    std::copy(v.values.begin(), v.values.end(), n.value.values.begin() + static_cast<long>(pos));
    pos += v.size();
  }
  return push(std::move(n));
}

Tape::ValueId Tape::sum_pool(std::span<const ValueId> xs) {
  if (xs.empty()) throw std::invalid_argument("sum_pool: empty input");
  const Tensor& first = at(xs[0]).value;
  Node n;
  n.op = Op::kSumPool;
  n.value = first;
  n.parents.push_back(xs[0]);
  for (std::size_t k = 1; k < xs.size(); ++k) {
    const Tensor& v = at(xs[k]).value;
    if (!v.same_shape(first)) {
      throw std::invalid_argument("sum_pool: shape mismatch at element " +
                                  std::to_string(k));
    }
    for (std::size_t i = 0; i < v.size(); ++i) n.value.values[i] += v.values[i];
    n.parents.push_back(xs[k]);
  }
  return push(std::move(n));
}

Tape::ValueId Tape::embedding_lookup(ValueId table, std::size_t index) {
  const Tensor& tv = at(table).value;
  if (tv.shape.size() != 2) {
    throw std::invalid_argument("embedding_lookup: table must be 2-D");
  }
  if (index >= tv.shape[0]) {
    throw std::invalid_argument("embedding_lookup: row " + std::to_string(index) +
                                " out of range " + std::to_string(tv.shape[0]));
  }
  const std::size_t d = tv.shape[1];
  Node n;
  n.op = Op::kEmbedding;
  n.parents = {table};
  n.indices = {index};
  n.value = Tensor::zeros({d});
  std::copy(tv.values.begin() + static_cast<long>(index * d),
            tv.values.begin() + static_cast<long>((index + 1) * d),
            n.value.values.begin());
  return push(std::move(n));
}

Tape::ValueId Tape::mean(std::span<const ValueId> xs) {
  if (xs.empty()) throw std::invalid_argument("mean: empty input");
  const Tensor& first = at(xs[0]).value;
  Node n;
  n.op = Op::kMean;
  n.value = first;
  n.parents.push_back(xs[0]);
  for (std::size_t k = 1; k < xs.size(); ++k) {
    const Tensor& v = at(xs[k]).value;
    if (!v.same_shape(first)) {
      throw std::invalid_argument("mean: shape mismatch at element " +
                                  std::to_string(k));
    }
    for (std::size_t i = 0; i < v.size(); ++i) n.value.values[i] += v.values[i];
    n.parents.push_back(xs[k]);
  }
  const double inv = 1.0 / static_cast<double>(xs.size());
  for (double& v : n.value.values) v *= inv;
  return push(std::move(n));
}

Tape::ValueId Tape::select_scale(ValueId x, std::vector<std::size_t> indices,
                                 std::vector<double> scales,
                                 std::vector<double> offsets) {
  const Tensor& xv = at(x).value;
  if (indices.size() != scales.size() || indices.size() != offsets.size()) {
    throw std::invalid_argument("select_scale: index/scale/offset length mismatch");
  }
  for (std::size_t i : indices) {
    if (i >= xv.size()) {
      throw std::invalid_argument("select_scale: index out of range");
    }
  }
  Node n;
  n.op = Op::kSelectScale;
  n.parents = {x};
  n.value = Tensor::zeros({indices.size()});
  for (std::size_t i = 0; i < indices.size(); ++i) {
    n.value.values[i] = (xv.values[indices[i]] - offsets[i]) * scales[i];
  }
  n.indices = std::move(indices);
  n.scales = std::move(scales);
  n.offsets = std::move(offsets);
  return push(std::move(n));
}

Tape::ValueId Tape::mape_loss(ValueId pred, double y_true) {
  const Tensor& pv = at(pred).value;
  if (pv.size() != 1) {
    throw std::invalid_argument("mape_loss: prediction must be scalar");
  }
  Node n;
  n.op = Op::kMapeLoss;
  n.parents = {pred};
  n.y_true = y_true;
  n.value = Tensor::scalar(mape(pv.values[0], y_true));
  return push(std::move(n));
}

const Tensor& Tape::value(ValueId id) const { return at(id).value; }

const Tensor& Tape::grad(ValueId id) const {
  const Node& n = at(id);
  if (n.grad.values.empty()) {
    throw std::logic_error("grad unavailable; call backward() first");
  }
  return n.grad;
}

void Tape::backward(ValueId root) {
  Node& r = at(root);
  if (r.value.size() != 1) {
    throw std::invalid_argument("backward: root must be scalar");
  }
  for (std::size_t i = 0; i <= static_cast<std::size_t>(root); ++i) {
    nodes_[i].grad = Tensor::zeros(nodes_[i].value.shape);
  }
  r.grad.values[0] = 1.0;

  for (ValueId id = root; id >= 0; --id) {
    Node& n = at(id);
    const std::vector<double>& g = n.grad.values;
    switch (n.op) {
      case Op::kLeaf:
        break;
      case Op::kAffine: {
        Node& x = at(n.parents[0]);
        Node& w = at(n.parents[1]);
        Node& b = at(n.parents[2]);
        const std::size_t out = w.value.shape[0];
        const std::size_t in = w.value.shape[1];
        for (std::size_t o = 0; o < out; ++o) {
          const double go = g[o];
          if (go == 0.0) continue;
          b.grad.values[o] += go;
          const double* wrow = w.value.values.data() + o * in;
          double* gwrow = w.grad.values.data() + o * in;
          for (std::size_t i = 0; i < in; ++i) {
            gwrow[i] += go * x.value.values[i];
            x.grad.values[i] += go * wrow[i];
          }
        }
        break;
      }
      case Op::kRelu: {
        Node& x = at(n.parents[0]);
        for (std::size_t i = 0; i < g.size(); ++i) {
          if (x.value.values[i] > 0.0) x.grad.values[i] += g[i];
        }
        break;
      }
      case Op::kTanh: {
        Node& x = at(n.parents[0]);
        for (std::size_t i = 0; i < g.size(); ++i) {
          const double y = n.value.values[i];
          x.grad.values[i] += g[i] * (1.0 - y * y);
        }
        break;
      }
      case Op::kSoftplus: {
        Node& x = at(n.parents[0]);
        for (std::size_t i = 0; i < g.size(); ++i) {
          const double v = x.value.values[i];
          const double sig = 1.0 / (1.0 + std::exp(-v));
          x.grad.values[i] += g[i] * sig;
        }
        break;
      }
      case Op::kConcat: {
        std::size_t pos = 0;
        for (ValueId pid : n.parents) {
          Node& p = at(pid);
          for (std::size_t i = 0; i < p.value.size(); ++i) {
            p.grad.values[i] += g[pos + i];
          }
          pos += p.value.size();
        }
        break;
      }
      case Op::kSumPool: {
        for (ValueId pid : n.parents) {
          Node& p = at(pid);
          for (std::size_t i = 0; i < g.size(); ++i) p.grad.values[i] += g[i];
        }
        break;
      }
      case Op::kEmbedding: {
        Node& table = at(n.parents[0]);
        const std::size_t d = table.value.shape[1];
        double* dst = table.grad.values.data() + n.indices[0] * d;
        for (std::size_t i = 0; i < d; ++i) dst[i] += g[i];
        break;
      }
      case Op::kMean: {
        const double inv = 1.0 / static_cast<double>(n.parents.size());
        for (ValueId pid : n.parents) {
          Node& p = at(pid);
          for (std::size_t i = 0; i < g.size(); ++i) {
            p.grad.values[i] += g[i] * inv;
          }
        }
        break;
      }
      case Op::kSelectScale: {
        Node& x = at(n.parents[0]);
        for (std::size_t i = 0; i < n.indices.size(); ++i) {
          x.grad.values[n.indices[i]] += g[i] * n.scales[i];
        }
        break;
      }
      case Op::kMapeLoss: {
        Node& p = at(n.parents[0]);
        p.grad.values[0] += g[0] * mape_grad(p.value.values[0], n.y_true);
        break;
      }
    }
  }
}

void AdamState::step(ParamStore& store, const ParamStore& grads) {
  if (step_ == 0) {
    for (const auto& [name, t] : store.entries()) {
      moment1_.add(name, Tensor::zeros(t.shape));
      moment2_.add(name, Tensor::zeros(t.shape));
    }
  }
  ++step_;
  const double bias1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(step_));
  const double bias2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(step_));
  for (auto& [name, weights] : store.entries_mutable()) {
    const Tensor& g = grads.get(name);
    if (!g.same_shape(weights)) {
      throw std::invalid_argument("adam: gradient shape mismatch for " + name);
    }
    Tensor& m = moment1_.get_mutable(name);
    Tensor& v = moment2_.get_mutable(name);
    for (std::size_t i = 0; i < weights.size(); ++i) {
      const double gi = g.values[i];
      m.values[i] = cfg_.beta1 * m.values[i] + (1.0 - cfg_.beta1) * gi;
      v.values[i] = cfg_.beta2 * v.values[i] + (1.0 - cfg_.beta2) * gi * gi;
      const double mhat = m.values[i] / bias1;
      const double vhat = v.values[i] / bias2;
      weights.values[i] -= cfg_.learning_rate * mhat / (std::sqrt(vhat) + cfg_.epsilon);
    }
  }
}

Tensor uniform_init(std::vector<std::size_t> shape, double limit, Rng& rng) {
  Tensor t = Tensor::zeros(std::move(shape));
  for (double& v : t.values) v = rng.next_range(-limit, limit);
  return t;
}

namespace {

double forward_value(const ModelFn& model, const ParamStore& store,
                     const std::vector<Tensor>& inputs) {
  Tape tape;
  std::vector<Tape::ValueId> store_leaves;
  store_leaves.reserve(store.size());
  for (const auto& [name, t] : store.entries()) store_leaves.push_back(tape.leaf(t));
  std::vector<Tape::ValueId> input_leaves;
  input_leaves.reserve(inputs.size());
  for (const Tensor& t : inputs) input_leaves.push_back(tape.leaf(t));
  const Tape::ValueId root = model(tape, store_leaves, input_leaves);
  const Tensor& out = tape.value(root);
  if (out.size() != 1) {
    throw std::invalid_argument("finite_difference_check: model must be scalar-valued");
  }
  return out.values[0];
}

}  // namespace

FdReport finite_difference_check(const ModelFn& model, const ParamStore& store,
                                 const std::vector<Tensor>& inputs,
                                 double tolerance) {
  constexpr double kStep = 1e-5;

  // Analytic pass.
  Tape tape;
  std::vector<Tape::ValueId> store_leaves;
  for (const auto& [name, t] : store.entries()) store_leaves.push_back(tape.leaf(t));
  std::vector<Tape::ValueId> input_leaves;
  for (const Tensor& t : inputs) input_leaves.push_back(tape.leaf(t));
  const Tape::ValueId root = model(tape, store_leaves, input_leaves);
  if (tape.value(root).size() != 1) {
    throw std::invalid_argument("finite_difference_check: model must be scalar-valued");
  }
  tape.backward(root);

  FdReport report;
  ParamStore probe_store = store;
  std::vector<Tensor> probe_inputs = inputs;

  auto check_coord = [&](double analytic, double* slot, const std::string& where,
                         std::size_t index) {
    const double saved = *slot;
    *slot = saved + kStep;
    const double up = forward_value(model, probe_store, probe_inputs);
    *slot = saved - kStep;
    const double down = forward_value(model, probe_store, probe_inputs);
    *slot = saved;
    const double numeric = (up - down) / (2.0 * kStep);
    const double denom = std::max({1.0, std::abs(analytic), std::abs(numeric)});
    const double rel = std::abs(analytic - numeric) / denom;
    report.max_rel_error = std::max(report.max_rel_error, rel);
    ++report.coords_checked;
    if (rel > tolerance) {
      report.failures.push_back(FdIssue{where, index, analytic, numeric, rel});
    }
  };

  for (std::size_t e = 0; e < store.size(); ++e) {
    const std::string& name = probe_store.entries()[e].first;
    Tensor& t = probe_store.entries_mutable()[e].second;
    const Tensor& g = tape.grad(store_leaves[e]);
    for (std::size_t i = 0; i < t.size(); ++i) {
      check_coord(g.values[i], &t.values[i], name, i);
    }
  }
  for (std::size_t k = 0; k < probe_inputs.size(); ++k) {
    Tensor& t = probe_inputs[k];
    const Tensor& g = tape.grad(input_leaves[k]);
    for (std::size_t i = 0; i < t.size(); ++i) {
      check_coord(g.values[i], &t.values[i], "input[" + std::to_string(k) + "]", i);
    }
  }
  report.pass = report.failures.empty();
  return report;
}

}  // namespace surrosim::nn
