#include "diga/optim.hpp"

#include <cmath>
#include <stdexcept>

namespace diga::tk {

void AdamW::step(ParameterSet& params) { step(params.all()); }

void AdamW::step(std::vector<Parameter*> params) {
  if (m_.empty()) {
    for (const Parameter* p : params) {
      m_.emplace_back(p->value.shape());
      v_.emplace_back(p->value.shape());
    }
  }
  if (m_.size() != params.size()) {
    throw std::invalid_argument("AdamW: parameter count changed between steps");
  }
  ++step_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(step_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(step_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Parameter& p = *params[i];
    if (p.value.shape() != m_[i].shape() || p.grad.shape() != p.value.shape()) {
      throw std::invalid_argument("AdamW: shape mismatch for parameter " + p.name);
    }
    Tensor& m = m_[i];
    Tensor& v = v_[i];
    for (std::size_t j = 0; j < p.value.numel(); ++j) {
      const double g = p.grad[j];
      m[j] = cfg_.beta1 * m[j] + (1.0 - cfg_.beta1) * g;
      v[j] = cfg_.beta2 * v[j] + (1.0 - cfg_.beta2) * g * g;
      const double mh = m[j] / bc1;
      const double vh = v[j] / bc2;
      const double denom = std::sqrt(vh) + cfg_.eps;
      const double adapt = denom > 0.0 ? mh / denom : 0.0;
      p.value[j] -= cfg_.lr * (adapt + cfg_.weight_decay * p.value[j]);
    }
  }
}

double clip_grad_norm(ParameterSet& params, double max_norm) {
  double sq = 0.0;
  for (const Parameter* p : params.all()) {
    for (double g : p->grad.data()) sq += g * g;
  }
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) {
    const double s = max_norm / norm;
    for (Parameter* p : params.all()) {
      for (double& g : p->grad.data()) g *= s;
    }
  }
  return norm;
}

}  // namespace diga::tk
