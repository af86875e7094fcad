#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <vector>

#include "diga/denoiser.hpp"
#include "diga/optim.hpp"
#include "diga/tensor.hpp"

namespace diga::ctl {

// Arrays are indexed by n-1 for diffusion step n in 1..N.
struct DiffusionSchedule {
  std::size_t steps = 0;
  double beta_start = 0.0;
  double beta_end = 0.0;
  std::vector<double> beta;
  std::vector<double> alpha;
  std::vector<double> alpha_bar;
  std::vector<double> sigma;

  // alpha_bar at step n, with alpha_bar(0) = 1.
  double alpha_bar_at(std::size_t n) const { return n == 0 ? 1.0 : alpha_bar.at(n - 1); }
};

// Linear beta from beta_start to beta_end over n steps.
DiffusionSchedule make_schedule(std::size_t n, double beta_start, double beta_end);

// x_n = sqrt(alpha_bar_n) x0 + sqrt(1 - alpha_bar_n) eps
tk::Tensor forward_diffuse(const DiffusionSchedule& sched, const tk::Tensor& x0, std::size_t n,
                           const tk::Tensor& eps);

// (1 - s) * eps_uncond + s * eps_cond
tk::Tensor cfg_combine(const tk::Tensor& eps_uncond, const tk::Tensor& eps_cond, double s);

// Guided noise estimate for the whole batch x at step n.
using EpsFn = std::function<tk::Tensor(const tk::Tensor& x, std::size_t n)>;

// Builds an EpsFn from a denoiser, a condition batch and a guidance scale.
// s == 0 and s == 1 evaluate only the branch that the combination keeps.
EpsFn guided_eps(Denoiser& model, ConditionBatch cond, double s);

tk::Tensor standard_normal(const tk::Shape& shape, std::mt19937_64& rng);

// Ancestral DDPM sampling from x_N. Fresh z is drawn from rng at every step
// except the last; pass inject_noise = false to force z = 0.
tk::Tensor ddpm_sample(const EpsFn& eps, const DiffusionSchedule& sched, tk::Tensor x_n,
                       std::mt19937_64& rng, bool inject_noise = true);

// Evenly spaced strictly increasing subsequence of 1..N with `steps` entries,
// always ending at N.
std::vector<std::size_t> ddim_timesteps(std::size_t n_total, std::size_t steps);

// Deterministic (eta = 0) DDIM from x_N. The x0 estimate is clamped to
// [-clamp, clamp]; clamp <= 0 disables clamping.
tk::Tensor ddim_sample(const EpsFn& eps, const DiffusionSchedule& sched, tk::Tensor x_n,
                       std::size_t steps, double clamp = 5.0);

// Convenience wrappers drawing x_N ~ N(0, I) with shape [B, channels, length].
tk::Tensor ddpm_sample(Denoiser& model, const DiffusionSchedule& sched, const ConditionBatch& cond,
                       double s, std::mt19937_64& rng);
tk::Tensor ddim_sample(Denoiser& model, const DiffusionSchedule& sched, const ConditionBatch& cond,
                       double s, std::size_t steps, std::mt19937_64& rng, double clamp = 5.0);

struct TrainConfig {
  std::size_t epochs = 10;
  std::size_t batch_size = 256;
  double lr = 1e-5;
  double weight_decay = 0.0;
  double p_uncond = 0.5;
  double grad_clip = 1.0;
  // Stop after this many optimizer steps (0 = run all epochs).
  std::size_t max_steps = 0;
  std::uint64_t seed = 0;
};

struct StepRecord {
  double loss = 0.0;
  std::size_t conditional = 0;
  std::size_t unconditional = 0;
};

// One optimizer over one denoiser. Each step draws n ~ U{1..N}, eps ~ N(0, I)
// and the condition dropout mask per sample, regresses eps_hat on eps and
// applies AdamW.
class Trainer {
 public:
  Trainer(Denoiser& model, const DiffusionSchedule& sched, const TrainConfig& cfg);

  // x0 [B, channels, length] (normalised); targets[b] is a class label or a
  // normalised continuous target.
  StepRecord step(const tk::Tensor& x0, std::span<const double> targets);

  // Runs cfg.epochs passes (or cfg.max_steps steps) over the corpus with
  // shuffled mini-batches. Returns the loss of every step.
  std::vector<double> fit(const tk::Tensor& corpus, std::span<const double> targets,
                          const std::function<void(std::size_t, double)>& on_step = {});

  std::mt19937_64& rng() { return rng_; }
  const tk::AdamW& optimizer() const { return opt_; }

 private:
  Denoiser& model_;
  const DiffusionSchedule& sched_;
  TrainConfig cfg_;
  tk::AdamW opt_;
  std::mt19937_64 rng_;
};

// Gathers rows of a [D, C, L] tensor into a [idx.size(), C, L] batch.
tk::Tensor gather_days(const tk::Tensor& corpus, std::span<const std::size_t> idx);

}  // namespace diga::ctl
