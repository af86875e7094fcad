#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "diga/autodiff.hpp"

namespace diga::ctl {

enum class EncoderMode { Discrete, Continuous };
enum class NormKind { Group, Layer };

std::string to_string(EncoderMode m);
EncoderMode encoder_mode_from_string(const std::string& s);
std::string to_string(NormKind k);
NormKind norm_kind_from_string(const std::string& s);

struct DenoiserConfig {
  std::size_t channels = 2;
  std::size_t length = 236;
  std::size_t base_width = 64;
  std::vector<std::size_t> multipliers{1, 4, 16};
  std::size_t res_blocks = 2;
  std::size_t kernel = 15;
  std::size_t padding = 7;
  std::size_t embed_dim = 256;
  std::size_t cond_hidden = 64;
  std::size_t num_bins = 5;
  EncoderMode encoder = EncoderMode::Continuous;
  NormKind norm = NormKind::Group;
  std::size_t norm_groups = 8;
  bool attention = true;
  // Zero output projection so an untrained model predicts eps_hat = 0.
  bool zero_init_output = true;

  // Length after right edge-padding so every down-sampling stage halves evenly.
  std::size_t padded_length() const;
  std::size_t width(std::size_t level) const { return base_width * multipliers.at(level); }
  void validate() const;
};

// Per-sample conditioning. Discrete: values hold class labels 0..num_bins-1.
// Continuous: values hold the normalised target. unconditional[b] != 0 selects
// the learned unconditional identifier c0 and ignores values[b].
struct ConditionBatch {
  std::vector<double> values;
  std::vector<char> unconditional;

  static ConditionBatch none(std::size_t n);
  static ConditionBatch repeat(double value, std::size_t n);
  std::size_t size() const { return values.size(); }
};

// Epsilon-prediction 1-D U-Net: input conv, down stages of residual blocks +
// self-attention + stride-2 conv, a middle block, mirrored up stages with skip
// concatenation, and a norm/SiLU/conv head. The step embedding (sinusoidal ->
// MLP) plus the condition embedding is injected into every residual block.
class Denoiser {
 public:
  Denoiser(DenoiserConfig cfg, std::uint64_t seed);

  const DenoiserConfig& config() const { return cfg_; }
  tk::ParameterSet& params() { return params_; }
  const tk::ParameterSet& params() const { return params_; }

  // x [B, channels, length]; steps[b] in 1..N. Returns eps_hat [B, channels, length].
  tk::Var forward(tk::Tape& tape, const tk::Tensor& x, std::span<const int> steps,
                  const ConditionBatch& cond);

  // phi(c) -> [B, embed_dim]
  tk::Var encode_condition(tk::Tape& tape, const ConditionBatch& cond);

  // Gradient-free forward.
  tk::Tensor predict(const tk::Tensor& x, std::span<const int> steps, const ConditionBatch& cond);

 private:
  struct ResBlock {
    std::string prefix;
    std::size_t in_ch;
    std::size_t out_ch;
  };
  struct Stage {
    std::vector<ResBlock> res;
    std::string attn;
    std::string resample;
  };

  void build(std::uint64_t seed);
  void add_conv(const std::string& name, std::size_t out_ch, std::size_t in_ch, std::size_t k,
                bool zero = false);
  void add_norm(const std::string& name, std::size_t ch);
  void add_linear(const std::string& name, std::size_t out, std::size_t in, bool zero = false);

  tk::Var p(tk::Tape& tape, const std::string& name);
  tk::Var conv(tk::Tape& tape, const std::string& name, tk::Var x, std::size_t stride,
               std::size_t pad);
  tk::Var norm(tk::Tape& tape, const std::string& name, tk::Var x);
  tk::Var dense(tk::Tape& tape, const std::string& name, tk::Var x);
  tk::Var res_block(tk::Tape& tape, const ResBlock& rb, tk::Var x, tk::Var emb_act);
  tk::Var attn_block(tk::Tape& tape, const std::string& name, tk::Var x);

  DenoiserConfig cfg_;
  tk::ParameterSet params_;
  std::vector<Stage> down_;
  std::vector<ResBlock> mid_;
  std::vector<Stage> up_;
  std::mt19937_64 init_rng_;
};

}  // namespace diga::ctl
