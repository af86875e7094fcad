#pragma once

#include <cstddef>
#include <deque>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "diga/tensor.hpp"

namespace diga::tk {

struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;
};

// Named, insertion-ordered collection of trainable tensors. Parameter
// addresses are stable for the lifetime of the set.
class ParameterSet {
 public:
  Parameter& add(std::string name, Tensor init);
  Parameter& get(std::string_view name);
  const Parameter& get(std::string_view name) const;
  bool contains(std::string_view name) const;

  std::vector<Parameter*> all();
  std::vector<const Parameter*> all() const;
  std::size_t size() const { return params_.size(); }
  std::size_t total_numel() const;
  void zero_grad();

 private:
  std::vector<std::unique_ptr<Parameter>> params_;
  std::unordered_map<std::string, Parameter*> by_name_;
};

class Tape;

// Handle to a value recorded on a Tape. A default-constructed Var means "none"
// (e.g. an absent bias).
class Var {
 public:
  Var() = default;

  bool valid() const { return tape_ != nullptr; }
  explicit operator bool() const { return valid(); }
  std::size_t id() const { return id_; }
  Tape* tape() const { return tape_; }
  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

// Reverse-mode recorder. Nodes are appended in evaluation order, so walking
// them backwards is a reverse topological order. Parameter leaves accumulate
// their gradient into Parameter::grad when backward() runs.
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, const Tensor& grad_out)>;

  explicit Tape(bool grad_enabled = true) : grad_enabled_(grad_enabled) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  bool grad_enabled() const { return grad_enabled_; }

  Var constant(Tensor value);
  Var param(Parameter& p);

  // Records an op output. `fn` is dropped when no input needs a gradient.
  // Throws NumericalError if `value` contains NaN or Inf.
  Var record(std::string_view op, Tensor value, std::initializer_list<Var> inputs, BackwardFn fn);

  const Tensor& value(std::size_t id) const { return nodes_[id].value; }
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }

  // Gradient buffer for node `id`, allocated as zeros on first use; nullptr if
  // the node does not require a gradient.
  Tensor* grad_target(std::size_t id);
  const Tensor* grad(Var v) const;

  void backward(Var loss);
  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    BackwardFn backward;
    Parameter* param = nullptr;
    bool requires_grad = false;
  };
  std::deque<Node> nodes_;
  bool grad_enabled_;
  bool backward_done_ = false;
};

// ---- ops ---------------------------------------------------------------

Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double s);
Var sum(Var a);
Var mean_squared_error(Var pred, const Tensor& target);

Var silu(Var x);

// x [B, In], weight [Out, In], bias [Out] (optional)
Var linear(Var x, Var weight, Var bias = {});

// Cross-correlation. x [B, Cin, L], weight [Cout, Cin, K], bias [Cout]
// (optional). Output length (L + 2*padding - K) / stride + 1.
Var conv1d(Var x, Var weight, Var bias, std::size_t stride, std::size_t padding);

// x [B, C, L]; gamma, beta [C]. groups == 1 gives layer normalisation over
// (C, L).
Var group_norm(Var x, std::size_t groups, Var gamma, Var beta, double eps = 1e-5);

// Softmax over the last axis.
Var softmax(Var x);

// Single-head scaled dot-product attention over the length axis.
// q, k, v [B, C, L] -> [B, C, L].
Var attention(Var q, Var k, Var v);

// x [B, C, L] + e [B, C] broadcast along L.
Var add_channel_bias(Var x, Var e);

Var upsample_nearest2x(Var x);
Var concat_channels(Var a, Var b);
Var slice_channels(Var x, std::size_t start, std::size_t count);
Var slice_length(Var x, std::size_t start, std::size_t count);

// Row lookup: table [R, E] -> [rows.size(), E].
Var embedding(Var table, std::span<const std::size_t> rows);

// out[b] = use_fallback[b] ? fallback : rows[b]. rows [B, E], fallback [E].
Var select_rows(Var rows, Var fallback, std::span<const char> use_fallback);

// Transformer-style sinusoidal features of diffusion steps -> [steps.size(), dim].
Tensor sinusoidal_embedding(std::span<const double> steps, std::size_t dim);

}  // namespace diga::tk
