#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <unordered_map>
#include <vector>

#include "msf/common.hpp"

namespace msf {

// Dense row-major f64 tensor. `node` is a handle into the active Tape
// (-1 = constant, not tracked).
struct Tensor {
  std::vector<std::size_t> shape;
  std::vector<double> data;
  int node = -1;

  std::size_t size() const { return data.size(); }

  std::size_t extent(std::size_t axis) const { return shape.at(axis); }

  static std::size_t count(const std::vector<std::size_t>& shape);
  static Tensor zeros(std::vector<std::size_t> shape);
  static Tensor full(std::vector<std::size_t> shape, double v);
  static Tensor from(std::vector<std::size_t> shape, std::vector<double> v);
  static Tensor scalar(double v) { return from({1}, {v}); }
  static Tensor row(std::vector<double> v);

  double& at2(std::size_t i, std::size_t j) { return data[i * shape[1] + j]; }
  double at2(std::size_t i, std::size_t j) const { return data[i * shape[1] + j]; }
};

std::string shape_str(const std::vector<std::size_t>& s);

// Reverse-mode tape. Node ids are topologically ordered by construction;
// backward visits them in strict reverse order exactly once.
class Tape {
 public:
  // Registers a leaf; its gradient is readable after backward().
  int watch(Tensor& t);

  // Allocates a node for an op output; set_back installs the adjoint.
  int push(std::size_t size);
  void set_back(int id, std::function<void(Tape&)> fn);

  std::vector<double>& grad(int id) { return nodes_[static_cast<std::size_t>(id)].grad; }
  const std::vector<double>& grad(int id) const {
    return nodes_[static_cast<std::size_t>(id)].grad;
  }

  void backward(const Tensor& loss);

  std::size_t node_count() const { return nodes_.size(); }

 private:
  struct Node {
    std::vector<double> grad;
    std::function<void(Tape&)> back;
  };
  std::vector<Node> nodes_;
};

struct Parameter {
  std::string name;
  Tensor tensor;
  bool requires_grad = true;
};

// Named parameter set with stable insertion order (checkpoint order).
class ParamStore {
 public:
  Tensor& add(const std::string& name, Tensor t, bool requires_grad = true);
  Tensor& get(const std::string& name);
  const Tensor& get(const std::string& name) const;
  bool has(const std::string& name) const { return index_.count(name) != 0; }

  void watch_all(Tape& tape);
  void unwatch();

  std::vector<Parameter>& items() { return params_; }
  const std::vector<Parameter>& items() const { return params_; }

 private:
  std::vector<Parameter> params_;
  std::unordered_map<std::string, std::size_t> index_;
};

// ---- forward/backward ops ----------------------------------------------

Tensor add(Tape& t, const Tensor& a, const Tensor& b);
Tensor sub(Tape& t, const Tensor& a, const Tensor& b);
Tensor mul(Tape& t, const Tensor& a, const Tensor& b);
Tensor scale(Tape& t, const Tensor& a, double k);
Tensor relu(Tape& t, const Tensor& x);
Tensor sigmoid(Tape& t, const Tensor& x);
Tensor exp_op(Tape& t, const Tensor& x);
Tensor log_op(Tape& t, const Tensor& x);
Tensor abs_op(Tape& t, const Tensor& x);
Tensor pow_const(Tape& t, const Tensor& x, double p);

// y[i,j] = sum_k x[i,k] w[k,j] + b[j]
Tensor linear(Tape& t, const Tensor& x, const Tensor& w, const Tensor& b);
// Plain matmul (n x k) * (k x m).
Tensor matmul(Tape& t, const Tensor& a, const Tensor& b);
// (n x k) * (m x k)^T -> n x m; used for attention scores.
Tensor matmul_nt(Tape& t, const Tensor& a, const Tensor& b);
// matmul with exactly rounded inner reduction (order-invariant forward);
// used for the attention-weighted value combination.
Tensor matmul_exact(Tape& t, const Tensor& a, const Tensor& b);

// Max-subtracted softmax along `axis`; denominator exactly rounded.
Tensor softmax(Tape& t, const Tensor& x, std::size_t axis);
Tensor layer_norm(Tape& t, const Tensor& x, const Tensor& gain, const Tensor& bias,
                  double eps = 1e-5);

Tensor sum_all(Tape& t, const Tensor& x);
Tensor mean_all(Tape& t, const Tensor& x);
// y[i,j] = s[i] * x[i,j]
Tensor scale_rows(Tape& t, const Tensor& x, const Tensor& s);
Tensor concat_cols(Tape& t, const std::vector<Tensor>& parts);
Tensor slice_cols(Tape& t, const Tensor& x, std::size_t start, std::size_t len);
Tensor gather_rows(Tape& t, const Tensor& x, const std::vector<std::size_t>& rows);
// Same data, new shape; shares the tape node.
Tensor reshape(const Tensor& x, std::vector<std::size_t> shape);
// y[i,j] = offset[j] + scl[j] * x[i,j] with constant coefficients.
Tensor affine_cols(Tape& t, const Tensor& x, const std::vector<double>& scl,
                   const std::vector<double>& offset);

// ---- gradient checking --------------------------------------------------

struct GradCheckReport {
  double max_rel_err = 0.0;
  std::string worst_param;
  std::size_t worst_index = 0;
  bool finite = true;       // false if a forward value went non-finite
  std::string note;
};

// Central-difference check of d(f)/d(params). Samples up to
// `coords_per_param` coordinates per parameter tensor.
GradCheckReport grad_check(ParamStore& params,
                           const std::function<Tensor(Tape&)>& f, double eps,
                           std::size_t coords_per_param, Rng& rng);

}  // namespace msf
