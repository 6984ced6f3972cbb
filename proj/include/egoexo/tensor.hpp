#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "egoexo/common.hpp"

namespace egoexo {

// Dense row-major tensor with reverse-mode autodiff. Values are double:
// finite-difference verification needs the headroom, and at desk scale the
// speed difference does not matter. The graph is a dynamic tape: every op
// links the output node to its parents and stores a backward closure; the
// tape is freed when the last handle to the loss goes away.
using Scalar = double;

struct Node {
  std::vector<int> shape;
  std::vector<Scalar> data;
  std::vector<Scalar> grad;  // allocated lazily, same length as data
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void()> backward_fn;

  size_t size() const { return data.size(); }
  void ensure_grad() {
    if (grad.size() != data.size()) grad.assign(data.size(), 0.0);
  }
};

class Tensor {
 public:
  Tensor() : node_(std::make_shared<Node>()) {}
  explicit Tensor(std::shared_ptr<Node> n) : node_(std::move(n)) {}

  static Tensor zeros(const std::vector<int>& shape, bool requires_grad = false);
  static Tensor full(const std::vector<int>& shape, Scalar value, bool requires_grad = false);
  static Tensor from_data(const std::vector<int>& shape, std::vector<Scalar> data,
                          bool requires_grad = false);
  static Tensor randn(const std::vector<int>& shape, Rng& rng, Scalar stdev,
                      bool requires_grad = false);
  static Tensor scalar(Scalar v, bool requires_grad = false);

  const std::vector<int>& shape() const { return node_->shape; }
  size_t size() const { return node_->size(); }
  int dim(int i) const { return node_->shape[static_cast<size_t>(i)]; }
  // 2-d helpers; most of the model works on matrices
  int rows() const { return node_->shape.empty() ? 1 : node_->shape[0]; }
  int cols() const;

  std::vector<Scalar>& data() { return node_->data; }
  const std::vector<Scalar>& data() const { return node_->data; }
  std::vector<Scalar>& grad() { node_->ensure_grad(); return node_->grad; }
  bool has_grad() const { return !node_->grad.empty(); }

  bool requires_grad() const { return node_->requires_grad; }
  void set_requires_grad(bool v) { node_->requires_grad = v; }

  Scalar item() const;
  Scalar at(int r, int c) const { return node_->data[static_cast<size_t>(r) * cols() + c]; }

  void zero_grad() { if (!node_->grad.empty()) std::fill(node_->grad.begin(), node_->grad.end(), 0.0); }

  // Reverse-mode sweep from a scalar. Gradients accumulate; call zero_grad
  // on leaves between steps.
  void backward() const;

  std::shared_ptr<Node> node() const { return node_; }

 private:
  std::shared_ptr<Node> node_;
};

// ---- ops -------------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor add(const Tensor& a, const Tensor& b);           // same shape
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);           // elementwise
Tensor add_bias(const Tensor& x, const Tensor& b);      // [m x n] + [n] per row
Tensor scale(const Tensor& x, Scalar c);
Tensor transpose(const Tensor& x);                      // 2-d
Tensor softmax(const Tensor& x, int axis);
Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, Scalar eps);
Tensor gelu(const Tensor& x);
Tensor cross_entropy(const Tensor& logits, const std::vector<int>& targets, int ignore_index);
Tensor sum(const Tensor& x);
Tensor mean_all(const Tensor& x);
Tensor mse(const Tensor& a, const Tensor& b);
Tensor concat_rows(const std::vector<Tensor>& parts);
Tensor slice_rows(const Tensor& x, int r0, int r1);     // [r0, r1)
Tensor slice_cols(const Tensor& x, int c0, int c1);
Tensor embedding(const Tensor& table, const std::vector<int>& ids);
Tensor reshape(const Tensor& x, const std::vector<int>& shape);
Tensor mean_rows(const Tensor& x);                      // [m x n] -> [1 x n]
Tensor detach(const Tensor& x);

// raw gemm kernels, also used by backward passes
void gemm_nn(const Scalar* a, const Scalar* b, Scalar* c, int m, int k, int n, bool accumulate);
void gemm_nt(const Scalar* a, const Scalar* b, Scalar* c, int m, int k, int n, bool accumulate);
void gemm_tn(const Scalar* a, const Scalar* b, Scalar* c, int m, int k, int n, bool accumulate);

std::string shape_str(const std::vector<int>& shape);

}  // namespace egoexo
