#include "ddi/nn/graph.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "ddi/error.hpp"

namespace ddi::nn {
namespace {

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

void require(bool ok, const std::string& what) {
  if (!ok) throw ShapeError(what);
}

}  // namespace

Var Graph::push(Tensor value, std::function<void()> backward) {
  nodes_.push_back(Node{std::move(value), Tensor(), std::move(backward)});
  return Var{nodes_.size() - 1};
}

void Graph::check(Var v, const char* op) const {
  if (v.id >= nodes_.size()) throw Error(std::string(op) + ": variable does not belong to this graph");
}

Tensor& Graph::grad_of(std::size_t id) {
  Node& n = nodes_[id];
  if (n.grad.data.empty() && !n.value.data.empty()) n.grad = Tensor(n.value.shape);
  return n.grad;
}

Var Graph::constant(Tensor value) { return push(std::move(value)); }

const Tensor& Graph::value(Var v) const {
  check(v, "value");
  return nodes_[v.id].value;
}

const Tensor& Graph::grad(Var v) const {
  check(v, "grad");
  return nodes_[v.id].grad;
}

void Graph::backward(Var loss, double seed) {
  if (nodes_.empty() || loss.id >= nodes_.size()) throw Error("backward called before a forward pass was recorded");
  require(nodes_[loss.id].value.size() == 1, "backward: loss must be a scalar");
  for (auto& n : nodes_) n.grad = Tensor();
  grad_of(loss.id)[0] = seed;
  for (std::size_t i = loss.id + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (n.backward && !n.grad.data.empty()) n.backward();
  }
}

Var Graph::lookup(Param& table, std::span<const int> ids, std::size_t length) {
  require(table.value.rank() == 2, "lookup: table must be rank 2");
  const std::size_t dim = table.value.dim(1);
  const std::size_t rows = table.value.dim(0);
  std::vector<int> used(ids.begin(), ids.end());
  for (std::size_t i = 0; i < used.size(); ++i) {
    if (i >= length || used[i] <= 0) used[i] = 0;
    require(static_cast<std::size_t>(used[i]) < rows, "lookup: id " + std::to_string(used[i]) + " out of range");
  }
  Tensor out({used.size(), dim});
  for (std::size_t i = 0; i < used.size(); ++i) {
    if (used[i] == 0) continue;
    std::copy_n(table.value.row(used[i]), dim, out.row(i));
  }
  Param* tp = &table;
  Var self{nodes_.size()};
  return push(std::move(out), [this, self, tp, used = std::move(used), dim] {
    const Tensor& g = nodes_[self.id].grad;
    for (std::size_t i = 0; i < used.size(); ++i) {
      if (used[i] == 0) continue;
      double* dst = tp->grad.row(used[i]);
      const double* src = g.row(i);
      for (std::size_t k = 0; k < dim; ++k) dst[k] += src[k];
    }
  });
}

Var Graph::conv_maxpool(Var x, Param& w, Param& b, std::size_t window) {
  check(x, "conv_maxpool");
  const Tensor& in = nodes_[x.id].value;
  require(in.rank() == 2 || in.rank() == 3, "conv_maxpool: input must be rank 2 or 3, got " + shape_string(in.shape));
  require(window >= 1, "conv_maxpool: window must be positive");
  const bool batched = in.rank() == 3;
  const std::size_t B = batched ? in.dim(0) : 1;
  const std::size_t T = in.dim(batched ? 1 : 0);
  const std::size_t D = in.dim(batched ? 2 : 1);
  const std::size_t F = w.value.dim(0);
  require(w.value.rank() == 2 && w.value.dim(1) == window * D,
          "conv_maxpool: kernel " + shape_string(w.value.shape) + " does not match window " +
              std::to_string(window) + " x input width " + std::to_string(D));
  require(b.value.size() == F, "conv_maxpool: bias size mismatch");

  const std::size_t positions = std::max(T, window) - window + 1;
  Tensor out(batched ? Shape{B, F} : Shape{F});
  std::vector<std::size_t> argmax(B * F, 0);
  for (std::size_t bi = 0; bi < B; ++bi) {
    const double* base = in.data.data() + bi * T * D;
    for (std::size_t f = 0; f < F; ++f) {
      const double* kernel = w.value.row(f);
      double best = -std::numeric_limits<double>::infinity();
      std::size_t best_p = 0;
      for (std::size_t p = 0; p < positions; ++p) {
        double s = b.value[f];
        // Rows at or past T are zero padding.
        const std::size_t avail = p >= T ? 0 : std::min(window, T - p);
        const double* xr = base + p * D;
        for (std::size_t k = 0; k < avail * D; ++k) s += kernel[k] * xr[k];
        if (s > best) {
          best = s;
          best_p = p;
        }
      }
      out[bi * F + f] = best;
      argmax[bi * F + f] = best_p;
    }
  }
  Param* wp = &w;
  Param* bp = &b;
  Var self{nodes_.size()};
  return push(std::move(out), [this, self, x, wp, bp, argmax = std::move(argmax), B, T, D, F, window] {
    const Tensor& g = nodes_[self.id].grad;
    const Tensor& in = nodes_[x.id].value;
    Tensor& gin = grad_of(x.id);
    for (std::size_t bi = 0; bi < B; ++bi) {
      const double* base = in.data.data() + bi * T * D;
      double* gbase = gin.data.data() + bi * T * D;
      for (std::size_t f = 0; f < F; ++f) {
        const double go = g[bi * F + f];
        if (go == 0.0) continue;
        const std::size_t p = argmax[bi * F + f];
        const std::size_t avail = p >= T ? 0 : std::min(window, T - p);
        double* gk = wp->grad.row(f);
        const double* kernel = wp->value.row(f);
        const double* xr = base + p * D;
        double* gx = gbase + p * D;
        for (std::size_t k = 0; k < avail * D; ++k) {
          gk[k] += go * xr[k];
          gx[k] += go * kernel[k];
        }
        bp->grad[f] += go;
      }
    }
  });
}

Var Graph::lstm(Var x, Param& wx, Param& wh, Param& b, std::size_t length, bool reverse) {
  check(x, "lstm");
  const Tensor& in = nodes_[x.id].value;
  require(in.rank() == 2, "lstm: input must be [n, D], got " + shape_string(in.shape));
  const std::size_t n = in.dim(0);
  const std::size_t D = in.dim(1);
  require(wx.value.rank() == 2 && wx.value.dim(1) == D,
          "lstm: input width " + std::to_string(D) + " does not match " + shape_string(wx.value.shape));
  const std::size_t H = wx.value.dim(0) / 4;
  require(wx.value.dim(0) == 4 * H && wh.value.rank() == 2 && wh.value.dim(0) == 4 * H && wh.value.dim(1) == H &&
              b.value.size() == 4 * H,
          "lstm: inconsistent parameter shapes");
  const std::size_t L = std::min(length, n);

  // Per processed step: gates (4H), cell, tanh(cell), hidden.
  std::vector<double> gates(L * 4 * H), cells(L * H), tanh_cells(L * H), hiddens(L * H);
  Tensor out({n, H});
  std::vector<double> z(4 * H);
  for (std::size_t s = 0; s < L; ++s) {
    const std::size_t t = reverse ? L - 1 - s : s;
    const double* xt = in.row(t);
    const double* hprev = s ? hiddens.data() + (s - 1) * H : nullptr;
    const double* cprev = s ? cells.data() + (s - 1) * H : nullptr;
    for (std::size_t r = 0; r < 4 * H; ++r) {
      double acc = b.value[r];
      const double* wr = wx.value.row(r);
      for (std::size_t j = 0; j < D; ++j) acc += wr[j] * xt[j];
      if (hprev) {
        const double* ur = wh.value.row(r);
        for (std::size_t j = 0; j < H; ++j) acc += ur[j] * hprev[j];
      }
      z[r] = acc;
    }
    double* gs = gates.data() + s * 4 * H;
    for (std::size_t k = 0; k < H; ++k) {
      const double i = sigmoid(z[k]);
      const double f = sigmoid(z[H + k]);
      const double g = std::tanh(z[2 * H + k]);
      const double o = sigmoid(z[3 * H + k]);
      gs[k] = i;
      gs[H + k] = f;
      gs[2 * H + k] = g;
      gs[3 * H + k] = o;
      const double c = f * (cprev ? cprev[k] : 0.0) + i * g;
      cells[s * H + k] = c;
      tanh_cells[s * H + k] = std::tanh(c);
      hiddens[s * H + k] = o * tanh_cells[s * H + k];
      out[t * H + k] = hiddens[s * H + k];
    }
  }

  Param* wxp = &wx;
  Param* whp = &wh;
  Param* bpp = &b;
  Var self{nodes_.size()};
  return push(std::move(out), [this, self, x, wxp, whp, bpp, L, H, D, reverse, gates = std::move(gates),
                               cells = std::move(cells), tanh_cells = std::move(tanh_cells),
                               hiddens = std::move(hiddens)] {
    const Tensor& gout = nodes_[self.id].grad;
    const Tensor& in = nodes_[x.id].value;
    Tensor& gin = grad_of(x.id);
    std::vector<double> dh_next(H, 0.0), dc_next(H, 0.0), dz(4 * H);
    for (std::size_t s = L; s-- > 0;) {
      const std::size_t t = reverse ? L - 1 - s : s;
      const double* gs = gates.data() + s * 4 * H;
      const double* cprev = s ? cells.data() + (s - 1) * H : nullptr;
      const double* hprev = s ? hiddens.data() + (s - 1) * H : nullptr;
      for (std::size_t k = 0; k < H; ++k) {
        const double i = gs[k], f = gs[H + k], g = gs[2 * H + k], o = gs[3 * H + k];
        const double tc = tanh_cells[s * H + k];
        const double dh = gout[t * H + k] + dh_next[k];
        const double dc = dh * o * (1.0 - tc * tc) + dc_next[k];
        dz[k] = dc * g * i * (1.0 - i);
        dz[H + k] = dc * (cprev ? cprev[k] : 0.0) * f * (1.0 - f);
        dz[2 * H + k] = dc * i * (1.0 - g * g);
        dz[3 * H + k] = dh * tc * o * (1.0 - o);
        dc_next[k] = dc * f;
      }
      std::fill(dh_next.begin(), dh_next.end(), 0.0);
      const double* xt = in.row(t);
      double* gx = gin.row(t);
      for (std::size_t r = 0; r < 4 * H; ++r) {
        const double d = dz[r];
        if (d == 0.0) continue;
        bpp->grad[r] += d;
        double* gw = wxp->grad.row(r);
        const double* wr = wxp->value.row(r);
        for (std::size_t j = 0; j < D; ++j) {
          gw[j] += d * xt[j];
          gx[j] += d * wr[j];
        }
        if (hprev) {
          double* gu = whp->grad.row(r);
          const double* ur = whp->value.row(r);
          for (std::size_t j = 0; j < H; ++j) {
            gu[j] += d * hprev[j];
            dh_next[j] += d * ur[j];
          }
        }
      }
    }
  });
}

Var Graph::concat(std::span<const Var> parts) {
  require(!parts.empty(), "concat: no inputs");
  for (Var p : parts) check(p, "concat");
  const Tensor& first = nodes_[parts[0].id].value;
  const bool rows = first.rank() == 2;
  require(first.rank() == 1 || rows, "concat: inputs must be rank 1 or 2");
  const std::size_t n = rows ? first.dim(0) : 1;
  std::vector<std::size_t> widths;
  std::size_t total = 0;
  for (Var p : parts) {
    const Tensor& t = nodes_[p.id].value;
    require(t.rank() == first.rank() && (!rows || t.dim(0) == n),
            "concat: incompatible shapes " + shape_string(first.shape) + " and " + shape_string(t.shape));
    widths.push_back(t.shape.back());
    total += t.shape.back();
  }
  Tensor out(rows ? Shape{n, total} : Shape{total});
  std::size_t offset = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const Tensor& t = nodes_[parts[k].id].value;
    for (std::size_t r = 0; r < n; ++r) std::copy_n(t.data.data() + r * widths[k], widths[k], out.data.data() + r * total + offset);
    offset += widths[k];
  }
  std::vector<Var> ins(parts.begin(), parts.end());
  Var self{nodes_.size()};
  return push(std::move(out), [this, self, ins = std::move(ins), widths = std::move(widths), n, total] {
    const Tensor& g = nodes_[self.id].grad;
    std::size_t offset = 0;
    for (std::size_t k = 0; k < ins.size(); ++k) {
      Tensor& gi = grad_of(ins[k].id);
      for (std::size_t r = 0; r < n; ++r) {
        const double* src = g.data.data() + r * total + offset;
        double* dst = gi.data.data() + r * widths[k];
        for (std::size_t j = 0; j < widths[k]; ++j) dst[j] += src[j];
      }
      offset += widths[k];
    }
  });
}

Var Graph::reshape(Var x, Shape shape) {
  check(x, "reshape");
  Tensor out = nodes_[x.id].value;
  require(numel(shape) == out.size(), "reshape: cannot view " + shape_string(out.shape) + " as " + shape_string(shape));
  out.shape = std::move(shape);
  Var self{nodes_.size()};
  return push(std::move(out), [this, self, x] {
    const Tensor& g = nodes_[self.id].grad;
    Tensor& gi = grad_of(x.id);
    for (std::size_t i = 0; i < g.size(); ++i) gi[i] += g[i];
  });
}

Var Graph::mask_rows(Var x, std::size_t length) {
  check(x, "mask_rows");
  Tensor out = nodes_[x.id].value;
  require(out.rank() >= 1, "mask_rows: scalar input");
  const std::size_t n = out.dim(0);
  const std::size_t width = n ? out.size() / n : 0;
  for (std::size_t i = std::min(length, n) * width; i < out.size(); ++i) out[i] = 0.0;
  Var self{nodes_.size()};
  return push(std::move(out), [this, self, x, length, n, width] {
    const Tensor& g = nodes_[self.id].grad;
    Tensor& gi = grad_of(x.id);
    for (std::size_t i = 0; i < std::min(length, n) * width; ++i) gi[i] += g[i];
  });
}

Var Graph::dropout(Var x, double rate, std::mt19937_64& rng) {
  check(x, "dropout");
  if (rate < 0.0 || rate >= 1.0) throw UsageError("dropout rate must lie in [0, 1)");
  if (rate == 0.0) return x;
  const double keep_scale = 1.0 / (1.0 - rate);
  Tensor out = nodes_[x.id].value;
  std::vector<double> mask(out.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    mask[i] = uniform01(rng) < rate ? 0.0 : keep_scale;
    out[i] *= mask[i];
  }
  Var self{nodes_.size()};
  return push(std::move(out), [this, self, x, mask = std::move(mask)] {
    const Tensor& g = nodes_[self.id].grad;
    Tensor& gi = grad_of(x.id);
    for (std::size_t i = 0; i < mask.size(); ++i) gi[i] += g[i] * mask[i];
  });
}

Var Graph::scale_grad(Var x, double factor) {
  check(x, "scale_grad");
  Tensor out = nodes_[x.id].value;
  Var self{nodes_.size()};
  return push(std::move(out), [this, self, x, factor] {
    const Tensor& g = nodes_[self.id].grad;
    Tensor& gi = grad_of(x.id);
    for (std::size_t i = 0; i < g.size(); ++i) gi[i] += factor * g[i];
  });
}

Var Graph::scale(Var x, double factor) {
  check(x, "scale");
  Tensor out = nodes_[x.id].value;
  for (auto& v : out.data) v *= factor;
  Var self{nodes_.size()};
  return push(std::move(out), [this, self, x, factor] {
    const Tensor& g = nodes_[self.id].grad;
    Tensor& gi = grad_of(x.id);
    for (std::size_t i = 0; i < g.size(); ++i) gi[i] += factor * g[i];
  });
}

Var Graph::affine(Var x, Param& w, Param& b) {
  check(x, "affine");
  const Tensor& in = nodes_[x.id].value;
  require(in.rank() == 1 || in.rank() == 2, "affine: input must be rank 1 or 2");
  const std::size_t n = in.rank() == 2 ? in.dim(0) : 1;
  const std::size_t D = in.shape.back();
  require(w.value.rank() == 2 && w.value.dim(1) == D,
          "affine: weight " + shape_string(w.value.shape) + " does not match input width " + std::to_string(D));
  const std::size_t O = w.value.dim(0);
  require(b.value.size() == O, "affine: bias size mismatch");
  Tensor out(in.rank() == 2 ? Shape{n, O} : Shape{O});
  for (std::size_t r = 0; r < n; ++r) {
    const double* xr = in.data.data() + r * D;
    for (std::size_t o = 0; o < O; ++o) {
      double acc = b.value[o];
      const double* wr = w.value.row(o);
      for (std::size_t j = 0; j < D; ++j) acc += wr[j] * xr[j];
      out[r * O + o] = acc;
    }
  }
  Param* wp = &w;
  Param* bp = &b;
  Var self{nodes_.size()};
  return push(std::move(out), [this, self, x, wp, bp, n, D, O] {
    const Tensor& g = nodes_[self.id].grad;
    const Tensor& in = nodes_[x.id].value;
    Tensor& gi = grad_of(x.id);
    for (std::size_t r = 0; r < n; ++r) {
      const double* xr = in.data.data() + r * D;
      double* gx = gi.data.data() + r * D;
      for (std::size_t o = 0; o < O; ++o) {
        const double go = g[r * O + o];
        if (go == 0.0) continue;
        bp->grad[o] += go;
        double* gw = wp->grad.row(o);
        const double* wr = wp->value.row(o);
        for (std::size_t j = 0; j < D; ++j) {
          gw[j] += go * xr[j];
          gx[j] += go * wr[j];
        }
      }
    }
  });
}

Var Graph::cross_entropy(Var logits, std::span<const int> targets, std::span<const double> weights,
                         double denominator) {
  check(logits, "cross_entropy");
  const Tensor& in = nodes_[logits.id].value;
  require(in.rank() == 1 || in.rank() == 2, "cross_entropy: logits must be rank 1 or 2");
  const std::size_t n = in.rank() == 2 ? in.dim(0) : 1;
  const std::size_t C = in.shape.back();
  require(targets.size() == n && weights.size() == n, "cross_entropy: targets/weights length mismatch");
  require(denominator > 0.0, "cross_entropy: denominator must be positive");
  std::vector<double> probs(n * C, 0.0);
  double loss = 0.0;
  for (std::size_t r = 0; r < n; ++r) {
    if (weights[r] == 0.0) continue;
    if (targets[r] < 0 || static_cast<std::size_t>(targets[r]) >= C) {
      throw Error("cross_entropy: target " + std::to_string(targets[r]) + " out of range for " + std::to_string(C) +
                  " classes");
    }
    auto p = softmax(std::span<const double>(in.data.data() + r * C, C));
    std::copy(p.begin(), p.end(), probs.begin() + r * C);
    loss += weights[r] * -std::log(p[targets[r]]);
  }
  Tensor out({1});
  out[0] = loss / denominator;
  std::vector<int> t(targets.begin(), targets.end());
  std::vector<double> w(weights.begin(), weights.end());
  Var self{nodes_.size()};
  return push(std::move(out), [this, self, logits, probs = std::move(probs), t = std::move(t), w = std::move(w), n, C,
                               denominator] {
    const double g = nodes_[self.id].grad[0];
    Tensor& gi = grad_of(logits.id);
    for (std::size_t r = 0; r < n; ++r) {
      if (w[r] == 0.0) continue;
      const double scale = g * w[r] / denominator;
      for (std::size_t c = 0; c < C; ++c) {
        const double target = static_cast<int>(c) == t[r] ? 1.0 : 0.0;
        gi[r * C + c] += scale * (probs[r * C + c] - target);
      }
    }
  });
}

std::vector<double> softmax(std::span<const double> logits) {
  std::vector<double> out(logits.size());
  if (logits.empty()) return out;
  const double mx = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp(logits[i] - mx);
    sum += out[i];
  }
  for (auto& v : out) v /= sum;
  return out;
}

double cross_entropy(std::span<const double> dist, std::size_t target, double weight) {
  if (target >= dist.size()) {
    throw Error("cross_entropy: target " + std::to_string(target) + " out of range for " +
                std::to_string(dist.size()) + " classes");
  }
  return -weight * std::log(dist[target]);
}

}  // namespace ddi::nn
