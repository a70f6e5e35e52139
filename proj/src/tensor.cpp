#include "msf/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace msf {

std::string shape_str(const std::vector<std::size_t>& s) {
  std::ostringstream os;
  os << "[";
  for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "x" : "") << s[i];
  os << "]";
  return os.str();
}

std::size_t Tensor::count(const std::vector<std::size_t>& shape) {
  std::size_t n = 1;
  for (std::size_t e : shape) {
    require(e > 0, "tensor extent must be > 0");
    n *= e;
  }
  return n;
}

Tensor Tensor::zeros(std::vector<std::size_t> shape) {
  Tensor t;
  t.data.assign(count(shape), 0.0);
  t.shape = std::move(shape);
  return t;
}

Tensor Tensor::full(std::vector<std::size_t> shape, double v) {
  Tensor t = zeros(std::move(shape));
  std::fill(t.data.begin(), t.data.end(), v);
  return t;
}

Tensor Tensor::from(std::vector<std::size_t> shape, std::vector<double> v) {
  require(count(shape) == v.size(),
          "tensor data length " + std::to_string(v.size()) + " does not match shape " +
              shape_str(shape));
  Tensor t;
  t.shape = std::move(shape);
  t.data = std::move(v);
  return t;
}

Tensor Tensor::row(std::vector<double> v) {
  std::size_t n = v.size();
  return from({1, n}, std::move(v));
}

// ---- Tape ---------------------------------------------------------------

int Tape::watch(Tensor& t) {
  t.node = push(t.size());
  return t.node;
}

int Tape::push(std::size_t size) {
  nodes_.push_back(Node{std::vector<double>(size, 0.0), nullptr});
  return static_cast<int>(nodes_.size() - 1);
}

void Tape::set_back(int id, std::function<void(Tape&)> fn) {
  nodes_[static_cast<std::size_t>(id)].back = std::move(fn);
}

void Tape::backward(const Tensor& loss) {
  require(loss.node >= 0, "backward: loss is not on the tape");
  require(loss.size() == 1, "backward: loss must be scalar, got shape " + shape_str(loss.shape));
  grad(loss.node)[0] = 1.0;
  for (int i = loss.node; i >= 0; --i) {
    auto& fn = nodes_[static_cast<std::size_t>(i)].back;
    if (fn) fn(*this);
  }
}

// ---- ParamStore ---------------------------------------------------------

Tensor& ParamStore::add(const std::string& name, Tensor t, bool requires_grad) {
  require(index_.count(name) == 0, "duplicate parameter name: " + name);
  index_[name] = params_.size();
  params_.push_back(Parameter{name, std::move(t), requires_grad});
  return params_.back().tensor;
}

Tensor& ParamStore::get(const std::string& name) {
  auto it = index_.find(name);
  require(it != index_.end(), "unknown parameter: " + name);
  return params_[it->second].tensor;
}

const Tensor& ParamStore::get(const std::string& name) const {
  auto it = index_.find(name);
  require(it != index_.end(), "unknown parameter: " + name);
  return params_[it->second].tensor;
}

void ParamStore::watch_all(Tape& tape) {
  for (auto& p : params_)
    if (p.requires_grad) tape.watch(p.tensor);
}

void ParamStore::unwatch() {
  for (auto& p : params_) p.tensor.node = -1;
}

// ---- op helpers ---------------------------------------------------------

namespace {

bool tracked(const Tensor& a) { return a.node >= 0; }

void accumulate(std::vector<double>& g, const std::vector<double>& d) {
  for (std::size_t i = 0; i < g.size(); ++i) g[i] += d[i];
}

// C (n x m) += op(A) * op(B), plain left-to-right inner reduction.
void mm_acc(std::size_t n, std::size_t k, std::size_t m, const double* a, const double* b,
            double* c, bool trans_a, bool trans_b) {
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t kk = 0; kk < k; ++kk) {
      double av = trans_a ? a[kk * n + i] : a[i * k + kk];
      if (av == 0.0) continue;
      const double* brow = trans_b ? nullptr : b + kk * m;
      if (trans_b) {
        for (std::size_t j = 0; j < m; ++j) c[i * m + j] += av * b[j * k + kk];
      } else {
        for (std::size_t j = 0; j < m; ++j) c[i * m + j] += av * brow[j];
      }
    }
  }
}

void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  require(a.shape == b.shape, std::string(op) + ": shape mismatch " + shape_str(a.shape) +
                                  " vs " + shape_str(b.shape));
}

Tensor unary(Tape& t, const Tensor& x, const std::function<double(double)>& f,
             const std::function<double(double, double)>& df /* (x, y) -> dy/dx */) {
  Tensor y;
  y.shape = x.shape;
  y.data.resize(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) y.data[i] = f(x.data[i]);
  if (tracked(x)) {
    int xn = x.node;
    int id = t.push(y.size());
    std::vector<double> xd = x.data, yd = y.data;
    t.set_back(id, [id, xn, xd, yd, df](Tape& tp) {
      const auto& gy = tp.grad(id);
      auto& gx = tp.grad(xn);
      for (std::size_t i = 0; i < gy.size(); ++i) gx[i] += gy[i] * df(xd[i], yd[i]);
    });
    y.node = id;
  }
  return y;
}

}  // namespace

// ---- elementwise --------------------------------------------------------

Tensor add(Tape& t, const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "add");
  Tensor y;
  y.shape = a.shape;
  y.data.resize(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) y.data[i] = a.data[i] + b.data[i];
  if (tracked(a) || tracked(b)) {
    int an = a.node, bn = b.node;
    int id = t.push(y.size());
    t.set_back(id, [id, an, bn](Tape& tp) {
      const auto& gy = tp.grad(id);
      if (an >= 0) accumulate(tp.grad(an), gy);
      if (bn >= 0) accumulate(tp.grad(bn), gy);
    });
    y.node = id;
  }
  return y;
}

Tensor sub(Tape& t, const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "sub");
  Tensor y;
  y.shape = a.shape;
  y.data.resize(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) y.data[i] = a.data[i] - b.data[i];
  if (tracked(a) || tracked(b)) {
    int an = a.node, bn = b.node;
    int id = t.push(y.size());
    t.set_back(id, [id, an, bn](Tape& tp) {
      const auto& gy = tp.grad(id);
      if (an >= 0) accumulate(tp.grad(an), gy);
      if (bn >= 0) {
        auto& gb = tp.grad(bn);
        for (std::size_t i = 0; i < gy.size(); ++i) gb[i] -= gy[i];
      }
    });
    y.node = id;
  }
  return y;
}

Tensor mul(Tape& t, const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "mul");
  Tensor y;
  y.shape = a.shape;
  y.data.resize(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) y.data[i] = a.data[i] * b.data[i];
  if (tracked(a) || tracked(b)) {
    int an = a.node, bn = b.node;
    int id = t.push(y.size());
    std::vector<double> ad = a.data, bd = b.data;
    t.set_back(id, [id, an, bn, ad, bd](Tape& tp) {
      const auto& gy = tp.grad(id);
      if (an >= 0) {
        auto& ga = tp.grad(an);
        for (std::size_t i = 0; i < gy.size(); ++i) ga[i] += gy[i] * bd[i];
      }
      if (bn >= 0) {
        auto& gb = tp.grad(bn);
        for (std::size_t i = 0; i < gy.size(); ++i) gb[i] += gy[i] * ad[i];
      }
    });
    y.node = id;
  }
  return y;
}

Tensor scale(Tape& t, const Tensor& a, double k) {
  return unary(t, a, [k](double v) { return k * v; }, [k](double, double) { return k; });
}

Tensor relu(Tape& t, const Tensor& x) {
  return unary(t, x, [](double v) { return v > 0.0 ? v : 0.0; },
               [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

Tensor sigmoid(Tape& t, const Tensor& x) {
  auto sg = [](double v) {
    return v >= 0.0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v));
  };
  return unary(t, x, sg, [](double, double y) { return y * (1.0 - y); });
}

Tensor exp_op(Tape& t, const Tensor& x) {
  return unary(t, x, [](double v) { return std::exp(v); },
               [](double, double y) { return y; });
}

Tensor log_op(Tape& t, const Tensor& x) {
  return unary(t, x, [](double v) { return std::log(v); },
               [](double v, double) { return 1.0 / v; });
}

Tensor abs_op(Tape& t, const Tensor& x) {
  return unary(t, x, [](double v) { return std::fabs(v); },
               [](double v, double) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); });
}

Tensor pow_const(Tape& t, const Tensor& x, double p) {
  return unary(t, x, [p](double v) { return std::pow(v, p); },
               [p](double v, double) { return p * std::pow(v, p - 1.0); });
}

// ---- matmul family ------------------------------------------------------

Tensor linear(Tape& t, const Tensor& x, const Tensor& w, const Tensor& b) {
  require(x.shape.size() == 2 && w.shape.size() == 2 && b.shape.size() == 1,
          "linear: expected x rank 2, w rank 2, b rank 1");
  require(x.shape[1] == w.shape[0], "linear: inner dimensions disagree, x " +
                                        shape_str(x.shape) + " vs w " + shape_str(w.shape));
  require(w.shape[1] == b.shape[0], "linear: bias length mismatch, w " + shape_str(w.shape) +
                                        " vs b " + shape_str(b.shape));
  std::size_t n = x.shape[0], p = x.shape[1], q = w.shape[1];
  Tensor y = Tensor::zeros({n, q});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < q; ++j) y.data[i * q + j] = b.data[j];
  mm_acc(n, p, q, x.data.data(), w.data.data(), y.data.data(), false, false);
  if (tracked(x) || tracked(w) || tracked(b)) {
    int xn = x.node, wn = w.node, bn = b.node;
    int id = t.push(y.size());
    std::vector<double> xd = x.data, wd = w.data;
    t.set_back(id, [id, xn, wn, bn, xd, wd, n, p, q](Tape& tp) {
      const auto& gy = tp.grad(id);
      if (xn >= 0) mm_acc(n, q, p, gy.data(), wd.data(), tp.grad(xn).data(), false, true);
      if (wn >= 0) mm_acc(p, n, q, xd.data(), gy.data(), tp.grad(wn).data(), true, false);
      if (bn >= 0) {
        auto& gb = tp.grad(bn);
        for (std::size_t i = 0; i < n; ++i)
          for (std::size_t j = 0; j < q; ++j) gb[j] += gy[i * q + j];
      }
    });
    y.node = id;
  }
  return y;
}

Tensor matmul(Tape& t, const Tensor& a, const Tensor& b) {
  require(a.shape.size() == 2 && b.shape.size() == 2, "matmul: rank-2 operands required");
  require(a.shape[1] == b.shape[0], "matmul: inner dimensions disagree, " +
                                        shape_str(a.shape) + " vs " + shape_str(b.shape));
  std::size_t n = a.shape[0], k = a.shape[1], m = b.shape[1];
  Tensor y = Tensor::zeros({n, m});
  mm_acc(n, k, m, a.data.data(), b.data.data(), y.data.data(), false, false);
  if (tracked(a) || tracked(b)) {
    int an = a.node, bn = b.node;
    int id = t.push(y.size());
    std::vector<double> ad = a.data, bd = b.data;
    t.set_back(id, [id, an, bn, ad, bd, n, k, m](Tape& tp) {
      const auto& gy = tp.grad(id);
      if (an >= 0) mm_acc(n, m, k, gy.data(), bd.data(), tp.grad(an).data(), false, true);
      if (bn >= 0) mm_acc(k, n, m, ad.data(), gy.data(), tp.grad(bn).data(), true, false);
    });
    y.node = id;
  }
  return y;
}

Tensor matmul_nt(Tape& t, const Tensor& a, const Tensor& b) {
  require(a.shape.size() == 2 && b.shape.size() == 2, "matmul_nt: rank-2 operands required");
  require(a.shape[1] == b.shape[1], "matmul_nt: inner dimensions disagree, " +
                                        shape_str(a.shape) + " vs " + shape_str(b.shape));
  std::size_t n = a.shape[0], k = a.shape[1], m = b.shape[0];
  Tensor y = Tensor::zeros({n, m});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) {
      double s = 0.0;
      for (std::size_t kk = 0; kk < k; ++kk) s += a.data[i * k + kk] * b.data[j * k + kk];
      y.data[i * m + j] = s;
    }
  if (tracked(a) || tracked(b)) {
    int an = a.node, bn = b.node;
    int id = t.push(y.size());
    std::vector<double> ad = a.data, bd = b.data;
    t.set_back(id, [id, an, bn, ad, bd, n, k, m](Tape& tp) {
      const auto& gy = tp.grad(id);
      // dA = gY * B; dB = gY^T * A
      if (an >= 0) mm_acc(n, m, k, gy.data(), bd.data(), tp.grad(an).data(), false, false);
      if (bn >= 0) mm_acc(m, n, k, gy.data(), ad.data(), tp.grad(bn).data(), true, false);
    });
    y.node = id;
  }
  return y;
}

Tensor matmul_exact(Tape& t, const Tensor& a, const Tensor& b) {
  require(a.shape.size() == 2 && b.shape.size() == 2, "matmul_exact: rank-2 operands required");
  require(a.shape[1] == b.shape[0], "matmul_exact: inner dimensions disagree, " +
                                        shape_str(a.shape) + " vs " + shape_str(b.shape));
  std::size_t n = a.shape[0], k = a.shape[1], m = b.shape[1];
  Tensor y = Tensor::zeros({n, m});
  ExactSum acc;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) {
      acc.reset();
      for (std::size_t kk = 0; kk < k; ++kk)
        acc.add(a.data[i * k + kk] * b.data[kk * m + j]);
      y.data[i * m + j] = acc.result();
    }
  if (tracked(a) || tracked(b)) {
    int an = a.node, bn = b.node;
    int id = t.push(y.size());
    std::vector<double> ad = a.data, bd = b.data;
    t.set_back(id, [id, an, bn, ad, bd, n, k, m](Tape& tp) {
      const auto& gy = tp.grad(id);
      if (an >= 0) mm_acc(n, m, k, gy.data(), bd.data(), tp.grad(an).data(), false, true);
      if (bn >= 0) mm_acc(k, n, m, ad.data(), gy.data(), tp.grad(bn).data(), true, false);
    });
    y.node = id;
  }
  return y;
}

// ---- softmax / layer norm -----------------------------------------------

Tensor softmax(Tape& t, const Tensor& x, std::size_t axis) {
  require(axis < x.shape.size(), "softmax: axis " + std::to_string(axis) +
                                     " out of range for shape " + shape_str(x.shape));
  std::size_t len = x.shape[axis];
  std::size_t inner = 1;
  for (std::size_t a = axis + 1; a < x.shape.size(); ++a) inner *= x.shape[a];
  std::size_t outer = x.size() / (len * inner);
  Tensor y;
  y.shape = x.shape;
  y.data.resize(x.size());
  ExactSum acc;
  for (std::size_t o = 0; o < outer; ++o)
    for (std::size_t in = 0; in < inner; ++in) {
      std::size_t base = o * len * inner + in;
      double mx = x.data[base];
      for (std::size_t i = 1; i < len; ++i) mx = std::max(mx, x.data[base + i * inner]);
      acc.reset();
      for (std::size_t i = 0; i < len; ++i) {
        double e = std::exp(x.data[base + i * inner] - mx);
        y.data[base + i * inner] = e;
        acc.add(e);
      }
      double z = acc.result();
      for (std::size_t i = 0; i < len; ++i) y.data[base + i * inner] /= z;
    }
  if (tracked(x)) {
    int xn = x.node;
    int id = t.push(y.size());
    std::vector<double> yd = y.data;
    t.set_back(id, [id, xn, yd, outer, len, inner](Tape& tp) {
      const auto& gy = tp.grad(id);
      auto& gx = tp.grad(xn);
      for (std::size_t o = 0; o < outer; ++o)
        for (std::size_t in = 0; in < inner; ++in) {
          std::size_t base = o * len * inner + in;
          double dot = 0.0;
          for (std::size_t i = 0; i < len; ++i)
            dot += gy[base + i * inner] * yd[base + i * inner];
          for (std::size_t i = 0; i < len; ++i)
            gx[base + i * inner] += yd[base + i * inner] * (gy[base + i * inner] - dot);
        }
    });
    y.node = id;
  }
  return y;
}

Tensor layer_norm(Tape& t, const Tensor& x, const Tensor& gain, const Tensor& bias,
                  double eps) {
  require(x.shape.size() == 2, "layer_norm: rank-2 input required");
  require(eps > 0.0, "layer_norm: eps must be positive");
  std::size_t n = x.shape[0], d = x.shape[1];
  require(gain.shape.size() == 1 && gain.shape[0] == d, "layer_norm: gain length mismatch");
  require(bias.shape.size() == 1 && bias.shape[0] == d, "layer_norm: bias length mismatch");
  Tensor y = Tensor::zeros({n, d});
  std::vector<double> xhat(n * d), inv_std(n);
  for (std::size_t i = 0; i < n; ++i) {
    double m = 0.0;
    for (std::size_t j = 0; j < d; ++j) m += x.data[i * d + j];
    m /= static_cast<double>(d);
    double var = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      double c = x.data[i * d + j] - m;
      var += c * c;
    }
    var /= static_cast<double>(d);
    inv_std[i] = 1.0 / std::sqrt(var + eps);
    for (std::size_t j = 0; j < d; ++j) {
      xhat[i * d + j] = (x.data[i * d + j] - m) * inv_std[i];
      y.data[i * d + j] = gain.data[j] * xhat[i * d + j] + bias.data[j];
    }
  }
  if (tracked(x) || tracked(gain) || tracked(bias)) {
    int xn = x.node, gn = gain.node, bn = bias.node;
    int id = t.push(y.size());
    std::vector<double> gd = gain.data;
    t.set_back(id, [id, xn, gn, bn, xhat, inv_std, gd, n, d](Tape& tp) {
      const auto& gy = tp.grad(id);
      for (std::size_t i = 0; i < n; ++i) {
        if (xn >= 0) {
          double mean_dxhat = 0.0, mean_dxhat_xhat = 0.0;
          for (std::size_t j = 0; j < d; ++j) {
            double dxh = gy[i * d + j] * gd[j];
            mean_dxhat += dxh;
            mean_dxhat_xhat += dxh * xhat[i * d + j];
          }
          mean_dxhat /= static_cast<double>(d);
          mean_dxhat_xhat /= static_cast<double>(d);
          auto& gx = tp.grad(xn);
          for (std::size_t j = 0; j < d; ++j) {
            double dxh = gy[i * d + j] * gd[j];
            gx[i * d + j] +=
                inv_std[i] * (dxh - mean_dxhat - xhat[i * d + j] * mean_dxhat_xhat);
          }
        }
        if (gn >= 0) {
          auto& gg = tp.grad(gn);
          for (std::size_t j = 0; j < d; ++j) gg[j] += gy[i * d + j] * xhat[i * d + j];
        }
        if (bn >= 0) {
          auto& gb = tp.grad(bn);
          for (std::size_t j = 0; j < d; ++j) gb[j] += gy[i * d + j];
        }
      }
    });
    y.node = id;
  }
  return y;
}

// ---- reductions / structure ---------------------------------------------

Tensor sum_all(Tape& t, const Tensor& x) {
  Tensor y = Tensor::scalar(fsum(x.data));
  if (tracked(x)) {
    int xn = x.node;
    int id = t.push(1);
    t.set_back(id, [id, xn](Tape& tp) {
      double g = tp.grad(id)[0];
      auto& gx = tp.grad(xn);
      for (double& v : gx) v += g;
    });
    y.node = id;
  }
  return y;
}

Tensor mean_all(Tape& t, const Tensor& x) {
  double inv = 1.0 / static_cast<double>(x.size());
  Tensor s = sum_all(t, x);
  return scale(t, s, inv);
}

Tensor scale_rows(Tape& t, const Tensor& x, const Tensor& s) {
  require(x.shape.size() == 2, "scale_rows: rank-2 input required");
  std::size_t n = x.shape[0], c = x.shape[1];
  require(s.size() == n, "scale_rows: scale length mismatch");
  Tensor y = Tensor::zeros({n, c});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < c; ++j) y.data[i * c + j] = s.data[i] * x.data[i * c + j];
  if (tracked(x) || tracked(s)) {
    int xn = x.node, sn = s.node;
    int id = t.push(y.size());
    std::vector<double> xd = x.data, sd = s.data;
    t.set_back(id, [id, xn, sn, xd, sd, n, c](Tape& tp) {
      const auto& gy = tp.grad(id);
      if (xn >= 0) {
        auto& gx = tp.grad(xn);
        for (std::size_t i = 0; i < n; ++i)
          for (std::size_t j = 0; j < c; ++j) gx[i * c + j] += gy[i * c + j] * sd[i];
      }
      if (sn >= 0) {
        auto& gs = tp.grad(sn);
        for (std::size_t i = 0; i < n; ++i) {
          double acc = 0.0;
          for (std::size_t j = 0; j < c; ++j) acc += gy[i * c + j] * xd[i * c + j];
          gs[i] += acc;
        }
      }
    });
    y.node = id;
  }
  return y;
}

Tensor concat_cols(Tape& t, const std::vector<Tensor>& parts) {
  require(!parts.empty(), "concat_cols: empty input");
  std::size_t n = parts[0].shape[0], total = 0;
  for (const auto& p : parts) {
    require(p.shape.size() == 2 && p.shape[0] == n, "concat_cols: row counts differ");
    total += p.shape[1];
  }
  Tensor y = Tensor::zeros({n, total});
  std::size_t off = 0;
  bool any = false;
  std::vector<int> nodes;
  std::vector<std::size_t> widths;
  for (const auto& p : parts) {
    std::size_t c = p.shape[1];
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < c; ++j) y.data[i * total + off + j] = p.data[i * c + j];
    nodes.push_back(p.node);
    widths.push_back(c);
    any = any || tracked(p);
    off += c;
  }
  if (any) {
    int id = t.push(y.size());
    t.set_back(id, [id, nodes, widths, n, total](Tape& tp) {
      const auto& gy = tp.grad(id);
      std::size_t off = 0;
      for (std::size_t pi = 0; pi < nodes.size(); ++pi) {
        std::size_t c = widths[pi];
        if (nodes[pi] >= 0) {
          auto& gp = tp.grad(nodes[pi]);
          for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < c; ++j) gp[i * c + j] += gy[i * total + off + j];
        }
        off += c;
      }
    });
    y.node = id;
  }
  return y;
}

Tensor slice_cols(Tape& t, const Tensor& x, std::size_t start, std::size_t len) {
  require(x.shape.size() == 2, "slice_cols: rank-2 input required");
  std::size_t n = x.shape[0], c = x.shape[1];
  require(start + len <= c, "slice_cols: slice out of range");
  Tensor y = Tensor::zeros({n, len});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < len; ++j) y.data[i * len + j] = x.data[i * c + start + j];
  if (tracked(x)) {
    int xn = x.node;
    int id = t.push(y.size());
    t.set_back(id, [id, xn, start, len, n, c](Tape& tp) {
      const auto& gy = tp.grad(id);
      auto& gx = tp.grad(xn);
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < len; ++j) gx[i * c + start + j] += gy[i * len + j];
    });
    y.node = id;
  }
  return y;
}

Tensor gather_rows(Tape& t, const Tensor& x, const std::vector<std::size_t>& rows) {
  require(x.shape.size() == 2, "gather_rows: rank-2 input required");
  std::size_t n = x.shape[0], c = x.shape[1], m = rows.size();
  Tensor y = Tensor::zeros({std::max<std::size_t>(m, 1), c});
  y.shape = {m == 0 ? 1 : m, c};  // callers avoid m == 0
  require(m > 0, "gather_rows: empty row list");
  for (std::size_t i = 0; i < m; ++i) {
    require(rows[i] < n, "gather_rows: row index out of range");
    for (std::size_t j = 0; j < c; ++j) y.data[i * c + j] = x.data[rows[i] * c + j];
  }
  if (tracked(x)) {
    int xn = x.node;
    int id = t.push(y.size());
    std::vector<std::size_t> idx = rows;
    t.set_back(id, [id, xn, idx, c](Tape& tp) {
      const auto& gy = tp.grad(id);
      auto& gx = tp.grad(xn);
      for (std::size_t i = 0; i < idx.size(); ++i)
        for (std::size_t j = 0; j < c; ++j) gx[idx[i] * c + j] += gy[i * c + j];
    });
    y.node = id;
  }
  return y;
}

Tensor reshape(const Tensor& x, std::vector<std::size_t> shape) {
  require(Tensor::count(shape) == x.size(), "reshape: element count mismatch, " +
                                                shape_str(x.shape) + " -> " + shape_str(shape));
  Tensor y = x;
  y.shape = std::move(shape);
  return y;
}

Tensor affine_cols(Tape& t, const Tensor& x, const std::vector<double>& scl,
                   const std::vector<double>& offset) {
  require(x.shape.size() == 2, "affine_cols: rank-2 input required");
  std::size_t n = x.shape[0], c = x.shape[1];
  require(scl.size() == c && offset.size() == c, "affine_cols: coefficient length mismatch");
  Tensor y = Tensor::zeros({n, c});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < c; ++j)
      y.data[i * c + j] = offset[j] + scl[j] * x.data[i * c + j];
  if (tracked(x)) {
    int xn = x.node;
    int id = t.push(y.size());
    std::vector<double> sd = scl;
    t.set_back(id, [id, xn, sd, n, c](Tape& tp) {
      const auto& gy = tp.grad(id);
      auto& gx = tp.grad(xn);
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < c; ++j) gx[i * c + j] += gy[i * c + j] * sd[j];
    });
    y.node = id;
  }
  return y;
}

// ---- gradient checking --------------------------------------------------

GradCheckReport grad_check(ParamStore& params, const std::function<Tensor(Tape&)>& f,
                           double eps, std::size_t coords_per_param, Rng& rng) {
  require(eps >= 1e-7 && eps <= 1e-3, "grad_check: eps must lie in [1e-7, 1e-3]");
  GradCheckReport rep;

  std::vector<std::vector<double>> analytic;
  {
    Tape tape;
    params.watch_all(tape);
    Tensor loss = f(tape);
    require(loss.size() == 1, "grad_check: f must return a scalar");
    if (!std::isfinite(loss.data[0])) {
      params.unwatch();
      rep.finite = false;
      rep.note = "non-finite forward value at baseline";
      return rep;
    }
    tape.backward(loss);
    for (auto& p : params.items())
      analytic.push_back(p.requires_grad ? tape.grad(p.tensor.node)
                                         : std::vector<double>(p.tensor.size(), 0.0));
    params.unwatch();
  }

  auto eval = [&](void) -> double {
    Tape tape;
    Tensor loss = f(tape);
    return loss.data[0];
  };

  std::size_t pi = 0;
  for (auto& p : params.items()) {
    const auto& ga = analytic[pi++];
    if (!p.requires_grad) continue;
    std::size_t n = p.tensor.size();
    std::size_t samples = std::min(coords_per_param, n);
    for (std::size_t s = 0; s < samples; ++s) {
      std::size_t i = (samples == n) ? s : rng.index(n);
      double saved = p.tensor.data[i];
      p.tensor.data[i] = saved + eps;
      double fp = eval();
      p.tensor.data[i] = saved - eps;
      double fm = eval();
      p.tensor.data[i] = saved;
      if (!std::isfinite(fp) || !std::isfinite(fm)) {
        rep.finite = false;
        rep.note = "non-finite forward value at " + p.name + "[" + std::to_string(i) + "]";
        return rep;
      }
      double fd = (fp - fm) / (2.0 * eps);
      double err = std::fabs(ga[i] - fd) / std::max(1.0, std::fabs(ga[i]));
      if (err > rep.max_rel_err) {
        rep.max_rel_err = err;
        rep.worst_param = p.name;
        rep.worst_index = i;
      }
    }
  }
  return rep;
}

}  // namespace msf
