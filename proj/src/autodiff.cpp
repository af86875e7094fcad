#include "diga/autodiff.hpp"

#include <stdexcept>

#include "diga/error.hpp"

namespace diga::tk {

Parameter& ParameterSet::add(std::string name, Tensor init) {
  if (by_name_.count(name)) {
    throw std::invalid_argument("duplicate parameter name: " + name);
  }
  auto p = std::make_unique<Parameter>();
  p->name = name;
  p->grad = Tensor::zeros(init.shape());
  p->value = std::move(init);
  Parameter* raw = p.get();
  params_.push_back(std::move(p));
  by_name_.emplace(std::move(name), raw);
  return *raw;
}

Parameter& ParameterSet::get(std::string_view name) {
  auto it = by_name_.find(std::string(name));
  if (it == by_name_.end()) {
    throw std::out_of_range("unknown parameter: " + std::string(name));
  }
  return *it->second;
}

const Parameter& ParameterSet::get(std::string_view name) const {
  return const_cast<ParameterSet*>(this)->get(name);
}

bool ParameterSet::contains(std::string_view name) const {
  return by_name_.count(std::string(name)) != 0;
}

std::vector<Parameter*> ParameterSet::all() {
  std::vector<Parameter*> out;
  out.reserve(params_.size());
  for (auto& p : params_) {
    out.push_back(p.get());
  }
  return out;
}

std::vector<const Parameter*> ParameterSet::all() const {
  std::vector<const Parameter*> out;
  out.reserve(params_.size());
  for (const auto& p : params_) {
    out.push_back(p.get());
  }
  return out;
}

std::size_t ParameterSet::total_numel() const {
  std::size_t n = 0;
  for (const auto& p : params_) {
    n += p->value.numel();
  }
  return n;
}

void ParameterSet::zero_grad() {
  for (auto& p : params_) {
    p->grad.fill(0.0);
  }
}

const Tensor& Var::value() const {
  if (!tape_) {
    throw std::logic_error("value() on empty Var");
  }
  return tape_->value(id_);
}

Var Tape::constant(Tensor value) {
  nodes_.push_back(Node{std::move(value), {}, {}, nullptr, false});
  return Var(this, nodes_.size() - 1);
}

Var Tape::param(Parameter& p) {
  nodes_.push_back(Node{p.value, {}, {}, &p, grad_enabled_});
  return Var(this, nodes_.size() - 1);
}

Var Tape::record(std::string_view op, Tensor value, std::initializer_list<Var> inputs,
                 BackwardFn fn) {
  if (!value.all_finite()) {
    throw NumericalError("non-finite value produced by " + std::string(op));
  }
  bool needs = false;
  if (grad_enabled_) {
    for (const Var& in : inputs) {
      if (!in.valid()) {
        continue;
      }
      if (in.tape() != this) {
        throw std::invalid_argument(std::string(op) + ": input recorded on another tape");
      }
      needs = needs || nodes_[in.id()].requires_grad;
    }
  }
  nodes_.push_back(Node{std::move(value), {}, needs ? std::move(fn) : BackwardFn{}, nullptr, needs});
  return Var(this, nodes_.size() - 1);
}

Tensor* Tape::grad_target(std::size_t id) {
  Node& n = nodes_[id];
  if (!n.requires_grad) {
    return nullptr;
  }
  if (n.grad.empty()) {
    n.grad = Tensor::zeros(n.value.shape());
  }
  return &n.grad;
}

const Tensor* Tape::grad(Var v) const {
  const Node& n = nodes_[v.id()];
  return n.grad.empty() ? nullptr : &n.grad;
}

void Tape::backward(Var loss) {
  if (!grad_enabled_) {
    throw std::logic_error("backward() on a tape recorded without gradients");
  }
  if (backward_done_) {
    throw std::logic_error("backward() already ran on this tape");
  }
  if (loss.tape() != this) {
    throw std::invalid_argument("loss was not recorded on this tape");
  }
  const Tensor& lv = nodes_[loss.id()].value;
  if (lv.numel() != 1) {
    throw std::invalid_argument("backward() needs a scalar loss, got " + shape_str(lv.shape()));
  }
  if (!lv.all_finite()) {
    throw NumericalError("backward() on non-finite loss");
  }
  backward_done_ = true;
  if (Tensor* seed = grad_target(loss.id())) {
    seed->fill(1.0);
  } else {
    return;
  }
  for (std::size_t i = loss.id() + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.requires_grad || n.grad.empty()) {
      continue;
    }
    if (n.param) {
      n.param->grad.accumulate(n.grad);
    } else if (n.backward) {
      n.backward(*this, n.grad);
    }
  }
}

}  // namespace diga::tk
