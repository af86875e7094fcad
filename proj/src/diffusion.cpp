#include "diga/diffusion.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "diga/error.hpp"

namespace diga::ctl {

using tk::Shape;
using tk::Tensor;

DiffusionSchedule make_schedule(std::size_t n, double beta_start, double beta_end) {
  if (n == 0) {
    throw InputError("schedule needs at least one step");
  }
  if (!(beta_start > 0.0 && beta_start <= beta_end && beta_end < 1.0)) {
    throw InputError("schedule requires 0 < beta_start <= beta_end < 1");
  }
  DiffusionSchedule s;
  s.steps = n;
  s.beta_start = beta_start;
  s.beta_end = beta_end;
  s.beta.resize(n);
  s.alpha.resize(n);
  s.alpha_bar.resize(n);
  s.sigma.resize(n);
  double prod = 1.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double t = n == 1 ? 0.0 : static_cast<double>(i) / static_cast<double>(n - 1);
    s.beta[i] = beta_start + (beta_end - beta_start) * t;
    s.alpha[i] = 1.0 - s.beta[i];
    prod *= s.alpha[i];
    s.alpha_bar[i] = prod;
    s.sigma[i] = std::sqrt(s.beta[i]);
  }
  return s;
}

Tensor forward_diffuse(const DiffusionSchedule& sched, const Tensor& x0, std::size_t n,
                       const Tensor& eps) {
  if (x0.shape() != eps.shape()) {
    throw std::invalid_argument("forward_diffuse: noise shape " + tk::shape_str(eps.shape()) +
                                " does not match " + tk::shape_str(x0.shape()));
  }
  if (n < 1 || n > sched.steps) {
    throw std::invalid_argument("forward_diffuse: step out of range");
  }
  const double ab = sched.alpha_bar[n - 1];
  const double a = std::sqrt(ab), b = std::sqrt(1.0 - ab);
  Tensor out(x0.shape());
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] = a * x0[i] + b * eps[i];
  return out;
}

Tensor cfg_combine(const Tensor& eps_uncond, const Tensor& eps_cond, double s) {
  if (eps_uncond.shape() != eps_cond.shape()) {
    throw std::invalid_argument("cfg_combine: shape mismatch");
  }
  Tensor out(eps_uncond.shape());
  for (std::size_t i = 0; i < out.numel(); ++i) {
    out[i] = (1.0 - s) * eps_uncond[i] + s * eps_cond[i];
  }
  return out;
}

EpsFn guided_eps(Denoiser& model, ConditionBatch cond, double s) {
  return [&model, cond = std::move(cond), s](const Tensor& x, std::size_t n) {
    const std::size_t batch = x.dim(0);
    if (cond.size() != batch) {
      throw std::invalid_argument("guided_eps: condition batch size mismatch");
    }
    std::vector<int> steps(batch, static_cast<int>(n));
    const ConditionBatch none = ConditionBatch::none(batch);
    if (s == 0.0) {
      return model.predict(x, steps, none);
    }
    if (s == 1.0) {
      return model.predict(x, steps, cond);
    }
    // One forward over [uncond; cond].
    const std::size_t per = x.numel() / batch;
    Tensor both(Shape{2 * batch, x.dim(1), x.dim(2)});
    std::copy_n(x.ptr(), x.numel(), both.ptr());
    std::copy_n(x.ptr(), x.numel(), both.ptr() + x.numel());
    ConditionBatch c2 = none;
    c2.values.insert(c2.values.end(), cond.values.begin(), cond.values.end());
    c2.unconditional.insert(c2.unconditional.end(), cond.unconditional.begin(),
                            cond.unconditional.end());
    std::vector<int> steps2(2 * batch, static_cast<int>(n));
    const Tensor out = model.predict(both, steps2, c2);
    Tensor eu(x.shape()), ec(x.shape());
    std::copy_n(out.ptr(), batch * per, eu.ptr());
    std::copy_n(out.ptr() + batch * per, batch * per, ec.ptr());
    return cfg_combine(eu, ec, s);
  };
}

Tensor standard_normal(const Shape& shape, std::mt19937_64& rng) {
  std::normal_distribution<double> nd(0.0, 1.0);
  Tensor t(shape);
  for (auto& v : t.data()) v = nd(rng);
  return t;
}

Tensor ddpm_sample(const EpsFn& eps, const DiffusionSchedule& sched, Tensor x,
                   std::mt19937_64& rng, bool inject_noise) {
  for (std::size_t n = sched.steps; n >= 1; --n) {
    const Tensor e = eps(x, n);
    if (e.shape() != x.shape()) {
      throw std::invalid_argument("ddpm_sample: noise estimate has wrong shape");
    }
    const double a = sched.alpha[n - 1];
    const double coef = (1.0 - a) / std::sqrt(1.0 - sched.alpha_bar[n - 1]);
    const double inv_sqrt_a = 1.0 / std::sqrt(a);
    const double sigma = sched.sigma[n - 1];
    const bool noisy = inject_noise && n > 1;
    std::normal_distribution<double> nd(0.0, 1.0);
    for (std::size_t i = 0; i < x.numel(); ++i) {
      double v = (x[i] - coef * e[i]) * inv_sqrt_a;
      if (noisy) v += sigma * nd(rng);
      x[i] = v;
    }
    if (!x.all_finite()) {
      throw NumericalError("ddpm_sample: non-finite state at step " + std::to_string(n));
    }
  }
  return x;
}

std::vector<std::size_t> ddim_timesteps(std::size_t n_total, std::size_t steps) {
  if (steps == 0 || steps > n_total) {
    throw InputError("ddim steps must be in 1.." + std::to_string(n_total));
  }
  std::vector<std::size_t> ts(steps);
  for (std::size_t i = 0; i < steps; ++i) {
    // i = steps-1 maps to n_total.
    ts[i] = n_total - ((steps - 1 - i) * n_total) / steps;
  }
  for (std::size_t i = 1; i < steps; ++i) {
    if (ts[i] <= ts[i - 1]) {
      throw InputError("ddim timesteps are not strictly increasing");
    }
  }
  return ts;
}

Tensor ddim_sample(const EpsFn& eps, const DiffusionSchedule& sched, Tensor x, std::size_t steps,
                   double clamp) {
  const auto ts = ddim_timesteps(sched.steps, steps);
  for (std::size_t i = ts.size(); i-- > 0;) {
    const std::size_t n = ts[i];
    const std::size_t prev = i == 0 ? 0 : ts[i - 1];
    const Tensor e = eps(x, n);
    if (e.shape() != x.shape()) {
      throw std::invalid_argument("ddim_sample: noise estimate has wrong shape");
    }
    const double ab = sched.alpha_bar_at(n);
    const double ab_prev = sched.alpha_bar_at(prev);
    const double sa = std::sqrt(ab), sb = std::sqrt(1.0 - ab);
    const double sa_p = std::sqrt(ab_prev), sb_p = std::sqrt(1.0 - ab_prev);
    for (std::size_t j = 0; j < x.numel(); ++j) {
      double x0 = (x[j] - sb * e[j]) / sa;
      if (clamp > 0.0) x0 = std::clamp(x0, -clamp, clamp);
      x[j] = sa_p * x0 + sb_p * e[j];
    }
    if (!x.all_finite()) {
      throw NumericalError("ddim_sample: non-finite state at step " + std::to_string(n));
    }
  }
  return x;
}

namespace {
Shape sample_shape(const Denoiser& model, std::size_t batch) {
  return Shape{batch, model.config().channels, model.config().length};
}
}  // namespace

Tensor ddpm_sample(Denoiser& model, const DiffusionSchedule& sched, const ConditionBatch& cond,
                   double s, std::mt19937_64& rng) {
  Tensor x = standard_normal(sample_shape(model, cond.size()), rng);
  return ddpm_sample(guided_eps(model, cond, s), sched, std::move(x), rng, true);
}

Tensor ddim_sample(Denoiser& model, const DiffusionSchedule& sched, const ConditionBatch& cond,
                   double s, std::size_t steps, std::mt19937_64& rng, double clamp) {
  Tensor x = standard_normal(sample_shape(model, cond.size()), rng);
  return ddim_sample(guided_eps(model, cond, s), sched, std::move(x), steps, clamp);
}

Tensor gather_days(const Tensor& corpus, std::span<const std::size_t> idx) {
  const std::size_t per = corpus.numel() / corpus.dim(0);
  Tensor out(Shape{idx.size(), corpus.dim(1), corpus.dim(2)});
  for (std::size_t i = 0; i < idx.size(); ++i) {
    if (idx[i] >= corpus.dim(0)) {
      throw std::out_of_range("gather_days: index out of range");
    }
    std::copy_n(corpus.ptr() + idx[i] * per, per, out.ptr() + i * per);
  }
  return out;
}

Trainer::Trainer(Denoiser& model, const DiffusionSchedule& sched, const TrainConfig& cfg)
    : model_(model),
      sched_(sched),
      cfg_(cfg),
      opt_(tk::AdamWConfig{cfg.lr, 0.9, 0.999, 1e-8, cfg.weight_decay}),
      rng_(cfg.seed) {
  if (!(cfg.p_uncond >= 0.0 && cfg.p_uncond <= 1.0)) {
    throw InputError("p_uncond must lie in [0, 1]");
  }
  if (cfg.batch_size == 0) {
    throw InputError("batch_size must be positive");
  }
}

StepRecord Trainer::step(const Tensor& x0, std::span<const double> targets) {
  const std::size_t batch = x0.dim(0);
  if (targets.size() != batch) {
    throw std::invalid_argument("Trainer::step: targets do not match batch");
  }
  std::uniform_int_distribution<std::size_t> step_dist(1, sched_.steps);
  std::bernoulli_distribution drop(cfg_.p_uncond);
  std::normal_distribution<double> nd(0.0, 1.0);

  const std::size_t per = x0.numel() / batch;
  Tensor eps(x0.shape());
  Tensor xn(x0.shape());
  std::vector<int> steps(batch);
  ConditionBatch cond;
  cond.values.assign(targets.begin(), targets.end());
  cond.unconditional.resize(batch);
  StepRecord rec;
  for (std::size_t b = 0; b < batch; ++b) {
    const std::size_t n = step_dist(rng_);
    steps[b] = static_cast<int>(n);
    cond.unconditional[b] = drop(rng_) ? 1 : 0;
    (cond.unconditional[b] ? rec.unconditional : rec.conditional) += 1;
    const double ab = sched_.alpha_bar[n - 1];
    const double a = std::sqrt(ab), s = std::sqrt(1.0 - ab);
    for (std::size_t i = 0; i < per; ++i) {
      const double e = nd(rng_);
      eps[b * per + i] = e;
      xn[b * per + i] = a * x0[b * per + i] + s * e;
    }
  }

  auto& params = model_.params();
  params.zero_grad();
  tk::Tape tape;
  tk::Var loss = tk::mean_squared_error(model_.forward(tape, xn, steps, cond), eps);
  rec.loss = loss.value().item();
  if (!std::isfinite(rec.loss)) {
    throw NumericalError("training loss is not finite");
  }
  tape.backward(loss);
  if (cfg_.grad_clip > 0.0) {
    tk::clip_grad_norm(params, cfg_.grad_clip);
  }
  opt_.step(params);
  return rec;
}

std::vector<double> Trainer::fit(const Tensor& corpus, std::span<const double> targets,
                                 const std::function<void(std::size_t, double)>& on_step) {
  const std::size_t days = corpus.dim(0);
  if (targets.size() != days) {
    throw std::invalid_argument("Trainer::fit: one target per day required");
  }
  std::vector<double> losses;
  std::vector<std::size_t> order(days);
  std::iota(order.begin(), order.end(), 0);
  const std::size_t bs = std::min(cfg_.batch_size, days);
  for (std::size_t epoch = 0; epoch < cfg_.epochs || cfg_.max_steps > 0; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng_);
    for (std::size_t start = 0; start + bs <= days; start += bs) {
      std::span<const std::size_t> idx(order.data() + start, bs);
      std::vector<double> tb(bs);
      for (std::size_t i = 0; i < bs; ++i) tb[i] = targets[idx[i]];
      const StepRecord rec = step(gather_days(corpus, idx), tb);
      losses.push_back(rec.loss);
      if (on_step) on_step(losses.size(), rec.loss);
      if (cfg_.max_steps > 0 && losses.size() >= cfg_.max_steps) {
        return losses;
      }
    }
    if (cfg_.max_steps == 0 && epoch + 1 >= cfg_.epochs) break;
  }
  return losses;
}

}  // namespace diga::ctl
