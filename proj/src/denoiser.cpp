#include "diga/denoiser.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "diga/error.hpp"

namespace diga::ctl {

using tk::Shape;
using tk::Tape;
using tk::Tensor;
using tk::Var;

std::string to_string(EncoderMode m) {
  return m == EncoderMode::Discrete ? "discrete" : "continuous";
}

EncoderMode encoder_mode_from_string(const std::string& s) {
  if (s == "discrete") return EncoderMode::Discrete;
  if (s == "continuous") return EncoderMode::Continuous;
  throw InputError("unknown encoder mode '" + s + "' (expected discrete|continuous)");
}

std::string to_string(NormKind k) { return k == NormKind::Group ? "group" : "layer"; }

NormKind norm_kind_from_string(const std::string& s) {
  if (s == "group") return NormKind::Group;
  if (s == "layer") return NormKind::Layer;
  throw InputError("unknown norm kind '" + s + "' (expected group|layer)");
}

std::size_t DenoiserConfig::padded_length() const {
  const std::size_t unit = std::size_t{1} << multipliers.size();
  return (length + unit - 1) / unit * unit;
}

void DenoiserConfig::validate() const {
  auto fail = [](const std::string& m) { throw InputError("denoiser config: " + m); };
  if (channels == 0 || length == 0 || base_width == 0 || embed_dim == 0 || cond_hidden == 0) {
    fail("all sizes must be positive");
  }
  if (multipliers.empty()) fail("need at least one width multiplier");
  for (auto m : multipliers) {
    if (m == 0) fail("width multipliers must be positive");
  }
  if (res_blocks == 0) fail("res_blocks must be positive");
  if (kernel % 2 == 0) fail("kernel size must be odd");
  if (padding != (kernel - 1) / 2) fail("padding must be (kernel-1)/2");
  if (embed_dim % 2 != 0 || base_width % 2 != 0) fail("embed_dim and base_width must be even");
  if (num_bins < 2) fail("num_bins must be >= 2");
  if (norm_groups == 0) fail("norm_groups must be positive");
}

ConditionBatch ConditionBatch::none(std::size_t n) {
  return ConditionBatch{std::vector<double>(n, 0.0), std::vector<char>(n, 1)};
}

ConditionBatch ConditionBatch::repeat(double value, std::size_t n) {
  return ConditionBatch{std::vector<double>(n, value), std::vector<char>(n, 0)};
}

Denoiser::Denoiser(DenoiserConfig cfg, std::uint64_t seed) : cfg_(std::move(cfg)), init_rng_(seed) {
  cfg_.validate();
  build(seed);
}

void Denoiser::add_conv(const std::string& name, std::size_t out_ch, std::size_t in_ch,
                        std::size_t k, bool zero) {
  Tensor w(Shape{out_ch, in_ch, k});
  if (!zero) {
    std::normal_distribution<double> nd(0.0, 1.0 / std::sqrt(static_cast<double>(in_ch * k)));
    for (auto& v : w.data()) v = nd(init_rng_);
  }
  params_.add(name + ".w", std::move(w));
  params_.add(name + ".b", Tensor(Shape{out_ch}));
}

void Denoiser::add_linear(const std::string& name, std::size_t out, std::size_t in, bool zero) {
  Tensor w(Shape{out, in});
  if (!zero) {
    std::normal_distribution<double> nd(0.0, 1.0 / std::sqrt(static_cast<double>(in)));
    for (auto& v : w.data()) v = nd(init_rng_);
  }
  params_.add(name + ".w", std::move(w));
  params_.add(name + ".b", Tensor(Shape{out}));
}

void Denoiser::add_norm(const std::string& name, std::size_t ch) {
  params_.add(name + ".g", Tensor(Shape{ch}, 1.0));
  params_.add(name + ".b", Tensor(Shape{ch}));
}

void Denoiser::build(std::uint64_t) {
  const std::size_t k = cfg_.kernel;
  const std::size_t e = cfg_.embed_dim;
  const std::size_t levels = cfg_.multipliers.size();

  auto make_res = [&](const std::string& prefix, std::size_t in_ch, std::size_t out_ch) {
    add_norm(prefix + ".norm1", in_ch);
    add_conv(prefix + ".conv1", out_ch, in_ch, k);
    add_linear(prefix + ".emb", out_ch, e);
    add_norm(prefix + ".norm2", out_ch);
    add_conv(prefix + ".conv2", out_ch, out_ch, k);
    if (in_ch != out_ch) {
      add_conv(prefix + ".skip", out_ch, in_ch, 1);
    }
    return ResBlock{prefix, in_ch, out_ch};
  };
  auto make_attn = [&](const std::string& prefix, std::size_t ch) {
    add_norm(prefix + ".norm", ch);
    add_conv(prefix + ".qkv", 3 * ch, ch, 1);
    add_conv(prefix + ".proj", ch, ch, 1);
    return prefix;
  };

  add_conv("in", cfg_.base_width, cfg_.channels, k);
  add_linear("temb.0", e, cfg_.base_width);
  add_linear("temb.1", e, e);

  if (cfg_.encoder == EncoderMode::Discrete) {
    Tensor table(Shape{cfg_.num_bins + 1, e});
    std::normal_distribution<double> nd(0.0, 1.0);
    for (auto& v : table.data()) v = nd(init_rng_);
    params_.add("cond.table", std::move(table));
  } else {
    add_linear("cond.fc0", cfg_.cond_hidden, 1);
    add_linear("cond.fc1", e, cfg_.cond_hidden);
    Tensor null(Shape{e});
    std::normal_distribution<double> nd(0.0, 1.0);
    for (auto& v : null.data()) v = nd(init_rng_);
    params_.add("cond.null", std::move(null));
  }

  std::size_t ch = cfg_.base_width;
  std::vector<std::size_t> skip_ch;
  for (std::size_t i = 0; i < levels; ++i) {
    Stage st;
    const std::string pre = "down" + std::to_string(i);
    const std::size_t w = cfg_.width(i);
    for (std::size_t r = 0; r < cfg_.res_blocks; ++r) {
      st.res.push_back(make_res(pre + ".res" + std::to_string(r), ch, w));
      ch = w;
    }
    if (cfg_.attention) st.attn = make_attn(pre + ".attn", ch);
    skip_ch.push_back(ch);
    st.resample = pre + ".down";
    add_conv(st.resample, ch, ch, 3);
    down_.push_back(std::move(st));
  }

  mid_.push_back(make_res("mid.res0", ch, ch));
  if (cfg_.attention) make_attn("mid.attn", ch);
  mid_.push_back(make_res("mid.res1", ch, ch));

  for (std::size_t j = 0; j < levels; ++j) {
    const std::size_t i = levels - 1 - j;
    Stage st;
    const std::string pre = "up" + std::to_string(i);
    st.resample = pre + ".up";
    add_conv(st.resample, ch, ch, 3);
    const std::size_t w = cfg_.width(i);
    std::size_t in_ch = ch + skip_ch[i];
    for (std::size_t r = 0; r < cfg_.res_blocks; ++r) {
      st.res.push_back(make_res(pre + ".res" + std::to_string(r), in_ch, w));
      in_ch = w;
    }
    ch = w;
    if (cfg_.attention) st.attn = make_attn(pre + ".attn", ch);
    up_.push_back(std::move(st));
  }

  add_norm("out.norm", ch);
  add_conv("out.conv", cfg_.channels, ch, k, cfg_.zero_init_output);
}

Var Denoiser::p(Tape& tape, const std::string& name) { return tape.param(params_.get(name)); }

Var Denoiser::conv(Tape& tape, const std::string& name, Var x, std::size_t stride,
                   std::size_t pad) {
  return tk::conv1d(x, p(tape, name + ".w"), p(tape, name + ".b"), stride, pad);
}

Var Denoiser::norm(Tape& tape, const std::string& name, Var x) {
  const std::size_t ch = x.shape()[1];
  const std::size_t groups =
      cfg_.norm == NormKind::Layer ? 1 : std::gcd(cfg_.norm_groups, ch);
  return tk::group_norm(x, groups, p(tape, name + ".g"), p(tape, name + ".b"));
}

Var Denoiser::dense(Tape& tape, const std::string& name, Var x) {
  return tk::linear(x, p(tape, name + ".w"), p(tape, name + ".b"));
}

Var Denoiser::res_block(Tape& tape, const ResBlock& rb, Var x, Var emb_act) {
  const std::size_t pad = cfg_.padding;
  Var h = conv(tape, rb.prefix + ".conv1", tk::silu(norm(tape, rb.prefix + ".norm1", x)), 1, pad);
  h = tk::add_channel_bias(h, dense(tape, rb.prefix + ".emb", emb_act));
  h = conv(tape, rb.prefix + ".conv2", tk::silu(norm(tape, rb.prefix + ".norm2", h)), 1, pad);
  Var skip = rb.in_ch == rb.out_ch ? x : conv(tape, rb.prefix + ".skip", x, 1, 0);
  return tk::add(h, skip);
}

Var Denoiser::attn_block(Tape& tape, const std::string& name, Var x) {
  const std::size_t ch = x.shape()[1];
  Var qkv = conv(tape, name + ".qkv", norm(tape, name + ".norm", x), 1, 0);
  Var a = tk::attention(tk::slice_channels(qkv, 0, ch), tk::slice_channels(qkv, ch, ch),
                        tk::slice_channels(qkv, 2 * ch, ch));
  return tk::add(x, conv(tape, name + ".proj", a, 1, 0));
}

Var Denoiser::encode_condition(Tape& tape, const ConditionBatch& cond) {
  const std::size_t n = cond.size();
  if (n == 0 || cond.unconditional.size() != n) {
    throw std::invalid_argument("condition batch is empty or inconsistent");
  }
  if (cfg_.encoder == EncoderMode::Discrete) {
    std::vector<std::size_t> rows(n);
    for (std::size_t b = 0; b < n; ++b) {
      if (cond.unconditional[b]) {
        rows[b] = cfg_.num_bins;
        continue;
      }
      const double v = cond.values[b];
      if (!(v >= 0.0) || v != std::floor(v) || v >= static_cast<double>(cfg_.num_bins)) {
        throw InputError("condition label " + std::to_string(v) + " outside 0.." +
                         std::to_string(cfg_.num_bins - 1));
      }
      rows[b] = static_cast<std::size_t>(v);
    }
    return tk::embedding(p(tape, "cond.table"), rows);
  }
  Tensor in(Shape{n, 1});
  for (std::size_t b = 0; b < n; ++b) {
    const double v = cond.unconditional[b] ? 0.0 : cond.values[b];
    if (!std::isfinite(v)) {
      throw InputError("continuous condition must be finite");
    }
    in[b] = v;
  }
  Var h = dense(tape, "cond.fc1", tk::silu(dense(tape, "cond.fc0", tape.constant(std::move(in)))));
  return tk::select_rows(h, p(tape, "cond.null"), cond.unconditional);
}

Var Denoiser::forward(Tape& tape, const Tensor& x, std::span<const int> steps,
                      const ConditionBatch& cond) {
  if (x.rank() != 3 || x.dim(1) != cfg_.channels || x.dim(2) != cfg_.length) {
    throw std::invalid_argument("denoiser input must be [B," + std::to_string(cfg_.channels) +
                                "," + std::to_string(cfg_.length) + "], got " +
                                tk::shape_str(x.shape()));
  }
  const std::size_t batch = x.dim(0);
  if (steps.size() != batch || cond.size() != batch) {
    throw std::invalid_argument("denoiser: steps/conditions do not match batch size");
  }
  const std::size_t len = cfg_.length;
  const std::size_t lp = cfg_.padded_length();
  Tensor xp(Shape{batch, cfg_.channels, lp});
  for (std::size_t r = 0; r < batch * cfg_.channels; ++r) {
    for (std::size_t l = 0; l < lp; ++l) {
      xp[r * lp + l] = x[r * len + std::min(l, len - 1)];
    }
  }

  std::vector<double> sv(steps.begin(), steps.end());
  Var temb = tape.constant(tk::sinusoidal_embedding(sv, cfg_.base_width));
  temb = dense(tape, "temb.1", tk::silu(dense(tape, "temb.0", temb)));
  Var emb_act = tk::silu(tk::add(temb, encode_condition(tape, cond)));

  Var h = conv(tape, "in", tape.constant(std::move(xp)), 1, cfg_.padding);
  std::vector<Var> skips;
  for (const Stage& st : down_) {
    for (const ResBlock& rb : st.res) h = res_block(tape, rb, h, emb_act);
    if (!st.attn.empty()) h = attn_block(tape, st.attn, h);
    skips.push_back(h);
    h = conv(tape, st.resample, h, 2, 1);
  }
  h = res_block(tape, mid_[0], h, emb_act);
  if (cfg_.attention) h = attn_block(tape, "mid.attn", h);
  h = res_block(tape, mid_[1], h, emb_act);
  for (std::size_t j = 0; j < up_.size(); ++j) {
    const Stage& st = up_[j];
    h = conv(tape, st.resample, tk::upsample_nearest2x(h), 1, 1);
    h = tk::concat_channels(h, skips[skips.size() - 1 - j]);
    for (const ResBlock& rb : st.res) h = res_block(tape, rb, h, emb_act);
    if (!st.attn.empty()) h = attn_block(tape, st.attn, h);
  }
  h = conv(tape, "out.conv", tk::silu(norm(tape, "out.norm", h)), 1, cfg_.padding);
  return lp == len ? h : tk::slice_length(h, 0, len);
}

Tensor Denoiser::predict(const Tensor& x, std::span<const int> steps, const ConditionBatch& cond) {
  Tape tape(false);
  return forward(tape, x, steps, cond).value();
}

}  // namespace diga::ctl
