#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "diga/autodiff.hpp"

namespace diga::tk {
namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapR = Eigen::Map<RowMat>;
using CMapR = Eigen::Map<const RowMat>;
using CMapV = Eigen::Map<const Eigen::VectorXd>;
using MapV = Eigen::Map<Eigen::VectorXd>;

void require(bool ok, const std::string& msg) {
  if (!ok) {
    throw std::invalid_argument(msg);
  }
}

void same_shape(const char* op, Var a, Var b) {
  require(a.shape() == b.shape(), std::string(op) + ": shape mismatch " + shape_str(a.shape()) +
                                      " vs " + shape_str(b.shape()));
}

void require_rank(const char* op, Var v, std::size_t r) {
  require(v.shape().size() == r, std::string(op) + ": expected rank " + std::to_string(r) +
                                     ", got " + shape_str(v.shape()));
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// cols[(ci*K + k), lo] = x[ci, lo*stride + k - pad]
void im2col(const double* x, std::size_t cin, std::size_t len, std::size_t k, std::size_t stride,
            std::size_t pad, std::size_t lout, double* cols) {
  for (std::size_t ci = 0; ci < cin; ++ci) {
    const double* xr = x + ci * len;
    for (std::size_t kk = 0; kk < k; ++kk) {
      double* row = cols + (ci * k + kk) * lout;
      for (std::size_t lo = 0; lo < lout; ++lo) {
        const long src = static_cast<long>(lo * stride + kk) - static_cast<long>(pad);
        row[lo] = (src >= 0 && src < static_cast<long>(len)) ? xr[src] : 0.0;
      }
    }
  }
}

void col2im(const double* cols, std::size_t cin, std::size_t len, std::size_t k,
            std::size_t stride, std::size_t pad, std::size_t lout, double* dx) {
  for (std::size_t ci = 0; ci < cin; ++ci) {
    double* xr = dx + ci * len;
    for (std::size_t kk = 0; kk < k; ++kk) {
      const double* row = cols + (ci * k + kk) * lout;
      for (std::size_t lo = 0; lo < lout; ++lo) {
        const long src = static_cast<long>(lo * stride + kk) - static_cast<long>(pad);
        if (src >= 0 && src < static_cast<long>(len)) {
          xr[src] += row[lo];
        }
      }
    }
  }
}

}  // namespace

Var add(Var a, Var b) {
  same_shape("add", a, b);
  Tensor out = a.value();
  out.accumulate(b.value());
  const auto ia = a.id(), ib = b.id();
  return a.tape()->record("add", std::move(out), {a, b}, [ia, ib](Tape& t, const Tensor& g) {
    if (Tensor* ga = t.grad_target(ia)) ga->accumulate(g);
    if (Tensor* gb = t.grad_target(ib)) gb->accumulate(g);
  });
}

Var sub(Var a, Var b) {
  same_shape("sub", a, b);
  Tensor out = a.value();
  const Tensor& bv = b.value();
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] -= bv[i];
  const auto ia = a.id(), ib = b.id();
  return a.tape()->record("sub", std::move(out), {a, b}, [ia, ib](Tape& t, const Tensor& g) {
    if (Tensor* ga = t.grad_target(ia)) ga->accumulate(g);
    if (Tensor* gb = t.grad_target(ib)) {
      for (std::size_t i = 0; i < g.numel(); ++i) (*gb)[i] -= g[i];
    }
  });
}

Var mul(Var a, Var b) {
  same_shape("mul", a, b);
  Tensor out = a.value();
  const Tensor& bv = b.value();
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] *= bv[i];
  const auto ia = a.id(), ib = b.id();
  return a.tape()->record("mul", std::move(out), {a, b}, [ia, ib](Tape& t, const Tensor& g) {
    const Tensor& av = t.value(ia);
    const Tensor& bv = t.value(ib);
    if (Tensor* ga = t.grad_target(ia)) {
      for (std::size_t i = 0; i < g.numel(); ++i) (*ga)[i] += g[i] * bv[i];
    }
    if (Tensor* gb = t.grad_target(ib)) {
      for (std::size_t i = 0; i < g.numel(); ++i) (*gb)[i] += g[i] * av[i];
    }
  });
}

Var scale(Var a, double s) {
  Tensor out = a.value();
  for (auto& v : out.data()) v *= s;
  const auto ia = a.id();
  return a.tape()->record("scale", std::move(out), {a}, [ia, s](Tape& t, const Tensor& g) {
    if (Tensor* ga = t.grad_target(ia)) {
      for (std::size_t i = 0; i < g.numel(); ++i) (*ga)[i] += s * g[i];
    }
  });
}

Var sum(Var a) {
  double s = 0.0;
  for (double v : a.value().data()) s += v;
  const auto ia = a.id();
  return a.tape()->record("sum", Tensor::scalar(s), {a}, [ia](Tape& t, const Tensor& g) {
    if (Tensor* ga = t.grad_target(ia)) {
      const double gv = g[0];
      for (auto& v : ga->data()) v += gv;
    }
  });
}

Var mean_squared_error(Var pred, const Tensor& target) {
  require(pred.shape() == target.shape(), "mean_squared_error: shape mismatch " +
                                              shape_str(pred.shape()) + " vs " +
                                              shape_str(target.shape()));
  const Tensor& p = pred.value();
  const std::size_t n = p.numel();
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = p[i] - target[i];
    s += d * d;
  }
  const auto ip = pred.id();
  return pred.tape()->record(
      "mse", Tensor::scalar(s / static_cast<double>(n)), {pred},
      [ip, target, n](Tape& t, const Tensor& g) {
        if (Tensor* gp = t.grad_target(ip)) {
          const Tensor& p = t.value(ip);
          const double c = 2.0 * g[0] / static_cast<double>(n);
          for (std::size_t i = 0; i < n; ++i) (*gp)[i] += c * (p[i] - target[i]);
        }
      });
}

Var silu(Var x) {
  Tensor out = x.value();
  for (auto& v : out.data()) v = v * sigmoid(v);
  const auto ix = x.id();
  return x.tape()->record("silu", std::move(out), {x}, [ix](Tape& t, const Tensor& g) {
    if (Tensor* gx = t.grad_target(ix)) {
      const Tensor& xv = t.value(ix);
      for (std::size_t i = 0; i < g.numel(); ++i) {
        const double s = sigmoid(xv[i]);
        (*gx)[i] += g[i] * s * (1.0 + xv[i] * (1.0 - s));
      }
    }
  });
}

Var linear(Var x, Var weight, Var bias) {
  require_rank("linear", x, 2);
  require_rank("linear", weight, 2);
  const std::size_t batch = x.shape()[0], in = x.shape()[1], outd = weight.shape()[0];
  require(weight.shape()[1] == in, "linear: weight " + shape_str(weight.shape()) +
                                       " incompatible with input " + shape_str(x.shape()));
  if (bias) {
    require(bias.shape() == Shape{outd}, "linear: bias shape " + shape_str(bias.shape()));
  }
  Tensor out(Shape{batch, outd});
  {
    CMapR X(x.value().ptr(), batch, in);
    CMapR W(weight.value().ptr(), outd, in);
    MapR Y(out.ptr(), batch, outd);
    Y.noalias() = X * W.transpose();
    if (bias) {
      CMapV b(bias.value().ptr(), outd);
      Y.rowwise() += b.transpose();
    }
  }
  const auto ix = x.id(), iw = weight.id();
  const bool has_bias = bias.valid();
  const auto ib = bias.id();
  return x.tape()->record(
      "linear", std::move(out), {x, weight, bias},
      [=](Tape& t, const Tensor& g) {
        CMapR G(g.ptr(), batch, outd);
        if (Tensor* gx = t.grad_target(ix)) {
          MapR GX(gx->ptr(), batch, in);
          GX.noalias() += G * CMapR(t.value(iw).ptr(), outd, in);
        }
        if (Tensor* gw = t.grad_target(iw)) {
          MapR GW(gw->ptr(), outd, in);
          GW.noalias() += G.transpose() * CMapR(t.value(ix).ptr(), batch, in);
        }
        if (has_bias) {
          if (Tensor* gb = t.grad_target(ib)) {
            MapV(gb->ptr(), outd) += G.colwise().sum().transpose();
          }
        }
      });
}

Var conv1d(Var x, Var weight, Var bias, std::size_t stride, std::size_t padding) {
  require_rank("conv1d", x, 3);
  require_rank("conv1d", weight, 3);
  const std::size_t batch = x.shape()[0], cin = x.shape()[1], len = x.shape()[2];
  const std::size_t cout = weight.shape()[0], k = weight.shape()[2];
  require(weight.shape()[1] == cin, "conv1d: kernel " + shape_str(weight.shape()) +
                                        " incompatible with input " + shape_str(x.shape()));
  require(stride >= 1, "conv1d: stride must be >= 1");
  require(len + 2 * padding >= k, "conv1d: input too short for kernel");
  if (bias) {
    require(bias.shape() == Shape{cout}, "conv1d: bias shape " + shape_str(bias.shape()));
  }
  const std::size_t lout = (len + 2 * padding - k) / stride + 1;
  const bool direct = (k == 1 && stride == 1 && padding == 0);
  const std::size_t ck = cin * k;

  Tensor out(Shape{batch, cout, lout});
  std::vector<double> cols(direct ? 0 : ck * lout);
  CMapR W(weight.value().ptr(), cout, ck);
  for (std::size_t b = 0; b < batch; ++b) {
    const double* xb = x.value().ptr() + b * cin * len;
    const double* colp = xb;
    if (!direct) {
      im2col(xb, cin, len, k, stride, padding, lout, cols.data());
      colp = cols.data();
    }
    MapR Y(out.ptr() + b * cout * lout, cout, lout);
    Y.noalias() = W * CMapR(colp, ck, lout);
    if (bias) {
      Y.colwise() += CMapV(bias.value().ptr(), cout);
    }
  }

  const auto ix = x.id(), iw = weight.id(), ib = bias.id();
  const bool has_bias = bias.valid();
  return x.tape()->record(
      "conv1d", std::move(out), {x, weight, bias}, [=](Tape& t, const Tensor& g) {
        Tensor* gx = t.grad_target(ix);
        Tensor* gw = t.grad_target(iw);
        Tensor* gb = has_bias ? t.grad_target(ib) : nullptr;
        CMapR Wt(t.value(iw).ptr(), cout, ck);
        std::vector<double> buf(direct ? 0 : ck * lout);
        std::vector<double> dcols(ck * lout);
        for (std::size_t b = 0; b < batch; ++b) {
          CMapR G(g.ptr() + b * cout * lout, cout, lout);
          if (gw) {
            const double* xb = t.value(ix).ptr() + b * cin * len;
            const double* colp = xb;
            if (!direct) {
              im2col(xb, cin, len, k, stride, padding, lout, buf.data());
              colp = buf.data();
            }
            MapR(gw->ptr(), cout, ck).noalias() += G * CMapR(colp, ck, lout).transpose();
          }
          if (gb) {
            MapV(gb->ptr(), cout) += G.rowwise().sum();
          }
          if (gx) {
            double* dxb = gx->ptr() + b * cin * len;
            if (direct) {
              MapR(dxb, cin, len).noalias() += Wt.transpose() * G;
            } else {
              MapR(dcols.data(), ck, lout).noalias() = Wt.transpose() * G;
              col2im(dcols.data(), cin, len, k, stride, padding, lout, dxb);
            }
          }
        }
      });
}

Var group_norm(Var x, std::size_t groups, Var gamma, Var beta, double eps) {
  require_rank("group_norm", x, 3);
  const std::size_t batch = x.shape()[0], ch = x.shape()[1], len = x.shape()[2];
  require(groups >= 1 && ch % groups == 0,
          "group_norm: " + std::to_string(ch) + " channels not divisible into " +
              std::to_string(groups) + " groups");
  require(gamma.shape() == Shape{ch} && beta.shape() == Shape{ch},
          "group_norm: gamma/beta must have shape [" + std::to_string(ch) + "]");
  const std::size_t cg = ch / groups;
  const std::size_t m = cg * len;

  auto xhat = std::make_shared<Tensor>(x.shape());
  auto inv_std = std::make_shared<std::vector<double>>(batch * groups);
  Tensor out(x.shape());
  const Tensor& xv = x.value();
  const Tensor& gv = gamma.value();
  const Tensor& bv = beta.value();
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t gi = 0; gi < groups; ++gi) {
      const std::size_t off = (b * ch + gi * cg) * len;
      double mean = 0.0;
      for (std::size_t i = 0; i < m; ++i) mean += xv[off + i];
      mean /= static_cast<double>(m);
      double var = 0.0;
      for (std::size_t i = 0; i < m; ++i) {
        const double d = xv[off + i] - mean;
        var += d * d;
      }
      var /= static_cast<double>(m);
      const double is = 1.0 / std::sqrt(var + eps);
      (*inv_std)[b * groups + gi] = is;
      for (std::size_t c = 0; c < cg; ++c) {
        const std::size_t cc = gi * cg + c;
        for (std::size_t l = 0; l < len; ++l) {
          const std::size_t idx = off + c * len + l;
          const double h = (xv[idx] - mean) * is;
          (*xhat)[idx] = h;
          out[idx] = gv[cc] * h + bv[cc];
        }
      }
    }
  }

  const auto ix = x.id(), igm = gamma.id(), ibt = beta.id();
  return x.tape()->record(
      "group_norm", std::move(out), {x, gamma, beta}, [=](Tape& t, const Tensor& g) {
        const Tensor& gv = t.value(igm);
        Tensor* gx = t.grad_target(ix);
        Tensor* gg = t.grad_target(igm);
        Tensor* gbt = t.grad_target(ibt);
        std::vector<double> dh(m);
        for (std::size_t b = 0; b < batch; ++b) {
          for (std::size_t gi = 0; gi < groups; ++gi) {
            const std::size_t off = (b * ch + gi * cg) * len;
            double sum_dh = 0.0, sum_dh_h = 0.0;
            for (std::size_t c = 0; c < cg; ++c) {
              const std::size_t cc = gi * cg + c;
              double acc_g = 0.0, acc_b = 0.0;
              for (std::size_t l = 0; l < len; ++l) {
                const std::size_t idx = off + c * len + l;
                const double h = (*xhat)[idx];
                acc_g += g[idx] * h;
                acc_b += g[idx];
                const double d = g[idx] * gv[cc];
                dh[c * len + l] = d;
                sum_dh += d;
                sum_dh_h += d * h;
              }
              if (gg) (*gg)[cc] += acc_g;
              if (gbt) (*gbt)[cc] += acc_b;
            }
            if (gx) {
              const double is = (*inv_std)[b * groups + gi];
              const double md = static_cast<double>(m);
              for (std::size_t i = 0; i < m; ++i) {
                (*gx)[off + i] += is / md * (md * dh[i] - sum_dh - (*xhat)[off + i] * sum_dh_h);
              }
            }
          }
        }
      });
}

Var softmax(Var x) {
  require(!x.shape().empty(), "softmax: rank-0 input");
  const std::size_t n = x.shape().back();
  const std::size_t rows = x.value().numel() / n;
  Tensor out = x.value();
  for (std::size_t r = 0; r < rows; ++r) {
    double* row = out.ptr() + r * n;
    const double mx = *std::max_element(row, row + n);
    double z = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      row[i] = std::exp(row[i] - mx);
      z += row[i];
    }
    for (std::size_t i = 0; i < n; ++i) row[i] /= z;
  }
  auto saved = std::make_shared<Tensor>(out);
  const auto ix = x.id();
  return x.tape()->record("softmax", std::move(out), {x}, [=](Tape& t, const Tensor& g) {
    if (Tensor* gx = t.grad_target(ix)) {
      for (std::size_t r = 0; r < rows; ++r) {
        const double* y = saved->ptr() + r * n;
        const double* gy = g.ptr() + r * n;
        double dot = 0.0;
        for (std::size_t i = 0; i < n; ++i) dot += gy[i] * y[i];
        for (std::size_t i = 0; i < n; ++i) (*gx)[r * n + i] += y[i] * (gy[i] - dot);
      }
    }
  });
}

Var attention(Var q, Var k, Var v) {
  require_rank("attention", q, 3);
  same_shape("attention", q, k);
  same_shape("attention", q, v);
  const std::size_t batch = q.shape()[0], ch = q.shape()[1], len = q.shape()[2];
  const double sc = 1.0 / std::sqrt(static_cast<double>(ch));

  auto probs = std::make_shared<Tensor>(Shape{batch, len, len});
  Tensor out(q.shape());
  for (std::size_t b = 0; b < batch; ++b) {
    CMapR Q(q.value().ptr() + b * ch * len, ch, len);
    CMapR K(k.value().ptr() + b * ch * len, ch, len);
    CMapR V(v.value().ptr() + b * ch * len, ch, len);
    MapR A(probs->ptr() + b * len * len, len, len);
    A.noalias() = sc * (Q.transpose() * K);
    for (std::size_t i = 0; i < len; ++i) {
      auto row = A.row(i);
      row.array() -= row.maxCoeff();
      row = row.array().exp().matrix();
      row /= row.sum();
    }
    MapR(out.ptr() + b * ch * len, ch, len).noalias() = V * A.transpose();
  }

  const auto iq = q.id(), ik = k.id(), iv = v.id();
  return q.tape()->record("attention", std::move(out), {q, k, v}, [=](Tape& t, const Tensor& g) {
    Tensor* gq = t.grad_target(iq);
    Tensor* gk = t.grad_target(ik);
    Tensor* gv = t.grad_target(iv);
    RowMat dA(len, len), dS(len, len);
    for (std::size_t b = 0; b < batch; ++b) {
      const std::size_t off = b * ch * len;
      CMapR Q(t.value(iq).ptr() + off, ch, len);
      CMapR K(t.value(ik).ptr() + off, ch, len);
      CMapR V(t.value(iv).ptr() + off, ch, len);
      CMapR A(probs->ptr() + b * len * len, len, len);
      CMapR G(g.ptr() + off, ch, len);
      if (gv) MapR(gv->ptr() + off, ch, len).noalias() += G * A;
      if (!gq && !gk) continue;
      dA.noalias() = G.transpose() * V;
      for (std::size_t i = 0; i < len; ++i) {
        const double dot = dA.row(i).dot(A.row(i));
        dS.row(i) = A.row(i).cwiseProduct((dA.row(i).array() - dot).matrix());
      }
      if (gq) MapR(gq->ptr() + off, ch, len).noalias() += sc * (K * dS.transpose());
      if (gk) MapR(gk->ptr() + off, ch, len).noalias() += sc * (Q * dS);
    }
  });
}

Var add_channel_bias(Var x, Var e) {
  require_rank("add_channel_bias", x, 3);
  require_rank("add_channel_bias", e, 2);
  const std::size_t batch = x.shape()[0], ch = x.shape()[1], len = x.shape()[2];
  require(e.shape()[0] == batch && e.shape()[1] == ch,
          "add_channel_bias: bias " + shape_str(e.shape()) + " vs input " + shape_str(x.shape()));
  Tensor out = x.value();
  const Tensor& ev = e.value();
  for (std::size_t bc = 0; bc < batch * ch; ++bc) {
    for (std::size_t l = 0; l < len; ++l) out[bc * len + l] += ev[bc];
  }
  const auto ix = x.id(), ie = e.id();
  return x.tape()->record("add_channel_bias", std::move(out), {x, e},
                          [=](Tape& t, const Tensor& g) {
                            if (Tensor* gx = t.grad_target(ix)) gx->accumulate(g);
                            if (Tensor* ge = t.grad_target(ie)) {
                              for (std::size_t bc = 0; bc < batch * ch; ++bc) {
                                double s = 0.0;
                                for (std::size_t l = 0; l < len; ++l) s += g[bc * len + l];
                                (*ge)[bc] += s;
                              }
                            }
                          });
}

Var upsample_nearest2x(Var x) {
  require_rank("upsample_nearest2x", x, 3);
  const std::size_t rows = x.shape()[0] * x.shape()[1], len = x.shape()[2];
  Tensor out(Shape{x.shape()[0], x.shape()[1], 2 * len});
  const Tensor& xv = x.value();
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t l = 0; l < len; ++l) {
      out[r * 2 * len + 2 * l] = xv[r * len + l];
      out[r * 2 * len + 2 * l + 1] = xv[r * len + l];
    }
  }
  const auto ix = x.id();
  return x.tape()->record("upsample_nearest2x", std::move(out), {x}, [=](Tape& t, const Tensor& g) {
    if (Tensor* gx = t.grad_target(ix)) {
      for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t l = 0; l < len; ++l) {
          (*gx)[r * len + l] += g[r * 2 * len + 2 * l] + g[r * 2 * len + 2 * l + 1];
        }
      }
    }
  });
}

Var concat_channels(Var a, Var b) {
  require_rank("concat_channels", a, 3);
  require_rank("concat_channels", b, 3);
  const std::size_t batch = a.shape()[0], ca = a.shape()[1], cb = b.shape()[1],
                    len = a.shape()[2];
  require(b.shape()[0] == batch && b.shape()[2] == len,
          "concat_channels: " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  Tensor out(Shape{batch, ca + cb, len});
  for (std::size_t n = 0; n < batch; ++n) {
    std::copy_n(a.value().ptr() + n * ca * len, ca * len, out.ptr() + n * (ca + cb) * len);
    std::copy_n(b.value().ptr() + n * cb * len, cb * len,
                out.ptr() + n * (ca + cb) * len + ca * len);
  }
  const auto ia = a.id(), ib = b.id();
  return a.tape()->record("concat_channels", std::move(out), {a, b}, [=](Tape& t, const Tensor& g) {
    Tensor* ga = t.grad_target(ia);
    Tensor* gb = t.grad_target(ib);
    for (std::size_t n = 0; n < batch; ++n) {
      const double* src = g.ptr() + n * (ca + cb) * len;
      if (ga) {
        double* d = ga->ptr() + n * ca * len;
        for (std::size_t i = 0; i < ca * len; ++i) d[i] += src[i];
      }
      if (gb) {
        double* d = gb->ptr() + n * cb * len;
        for (std::size_t i = 0; i < cb * len; ++i) d[i] += src[ca * len + i];
      }
    }
  });
}

Var slice_channels(Var x, std::size_t start, std::size_t count) {
  require_rank("slice_channels", x, 3);
  const std::size_t batch = x.shape()[0], ch = x.shape()[1], len = x.shape()[2];
  require(count > 0 && start + count <= ch, "slice_channels: range out of bounds");
  Tensor out(Shape{batch, count, len});
  for (std::size_t n = 0; n < batch; ++n) {
    std::copy_n(x.value().ptr() + (n * ch + start) * len, count * len,
                out.ptr() + n * count * len);
  }
  const auto ix = x.id();
  return x.tape()->record("slice_channels", std::move(out), {x}, [=](Tape& t, const Tensor& g) {
    if (Tensor* gx = t.grad_target(ix)) {
      for (std::size_t n = 0; n < batch; ++n) {
        double* d = gx->ptr() + (n * ch + start) * len;
        const double* s = g.ptr() + n * count * len;
        for (std::size_t i = 0; i < count * len; ++i) d[i] += s[i];
      }
    }
  });
}

Var slice_length(Var x, std::size_t start, std::size_t count) {
  require_rank("slice_length", x, 3);
  const std::size_t rows = x.shape()[0] * x.shape()[1], len = x.shape()[2];
  require(count > 0 && start + count <= len, "slice_length: range out of bounds");
  Tensor out(Shape{x.shape()[0], x.shape()[1], count});
  for (std::size_t r = 0; r < rows; ++r) {
    std::copy_n(x.value().ptr() + r * len + start, count, out.ptr() + r * count);
  }
  const auto ix = x.id();
  return x.tape()->record("slice_length", std::move(out), {x}, [=](Tape& t, const Tensor& g) {
    if (Tensor* gx = t.grad_target(ix)) {
      for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t i = 0; i < count; ++i) (*gx)[r * len + start + i] += g[r * count + i];
      }
    }
  });
}

Var embedding(Var table, std::span<const std::size_t> rows) {
  require_rank("embedding", table, 2);
  const std::size_t nrows = table.shape()[0], dim = table.shape()[1];
  require(!rows.empty(), "embedding: no rows requested");
  for (auto r : rows) {
    require(r < nrows, "embedding: row " + std::to_string(r) + " out of range");
  }
  std::vector<std::size_t> idx(rows.begin(), rows.end());
  Tensor out(Shape{idx.size(), dim});
  for (std::size_t i = 0; i < idx.size(); ++i) {
    std::copy_n(table.value().ptr() + idx[i] * dim, dim, out.ptr() + i * dim);
  }
  const auto it = table.id();
  return table.tape()->record("embedding", std::move(out), {table}, [=](Tape& t, const Tensor& g) {
    if (Tensor* gt = t.grad_target(it)) {
      for (std::size_t i = 0; i < idx.size(); ++i) {
        for (std::size_t d = 0; d < dim; ++d) (*gt)[idx[i] * dim + d] += g[i * dim + d];
      }
    }
  });
}

Var select_rows(Var rows, Var fallback, std::span<const char> use_fallback) {
  require_rank("select_rows", rows, 2);
  const std::size_t batch = rows.shape()[0], dim = rows.shape()[1];
  require(fallback.shape() == Shape{dim}, "select_rows: fallback shape " +
                                              shape_str(fallback.shape()));
  require(use_fallback.size() == batch, "select_rows: mask length mismatch");
  std::vector<char> mask(use_fallback.begin(), use_fallback.end());
  Tensor out = rows.value();
  for (std::size_t b = 0; b < batch; ++b) {
    if (mask[b]) std::copy_n(fallback.value().ptr(), dim, out.ptr() + b * dim);
  }
  const auto ir = rows.id(), ifb = fallback.id();
  return rows.tape()->record("select_rows", std::move(out), {rows, fallback},
                             [=](Tape& t, const Tensor& g) {
                               Tensor* gr = t.grad_target(ir);
                               Tensor* gf = t.grad_target(ifb);
                               for (std::size_t b = 0; b < batch; ++b) {
                                 Tensor* dst = mask[b] ? gf : gr;
                                 if (!dst) continue;
                                 const std::size_t off = mask[b] ? 0 : b * dim;
                                 for (std::size_t d = 0; d < dim; ++d) {
                                   (*dst)[off + d] += g[b * dim + d];
                                 }
                               }
                             });
}

Tensor sinusoidal_embedding(std::span<const double> steps, std::size_t dim) {
  require(dim >= 2 && dim % 2 == 0, "sinusoidal_embedding: dim must be even and >= 2");
  require(!steps.empty(), "sinusoidal_embedding: no steps");
  const std::size_t half = dim / 2;
  Tensor out(Shape{steps.size(), dim});
  const double denom = half > 1 ? static_cast<double>(half - 1) : 1.0;
  for (std::size_t i = 0; i < steps.size(); ++i) {
    for (std::size_t j = 0; j < half; ++j) {
      const double freq = std::exp(-std::log(10000.0) * static_cast<double>(j) / denom);
      out[i * dim + j] = std::sin(steps[i] * freq);
      out[i * dim + half + j] = std::cos(steps[i] * freq);
    }
  }
  return out;
}

}  // namespace diga::tk
