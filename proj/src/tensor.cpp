#include "egoexo/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <unordered_set>

namespace egoexo {

namespace {

size_t shape_size(const std::vector<int>& shape) {
  size_t n = 1;
  for (int d : shape) {
    if (d <= 0) throw ConfigError("tensor dimension must be positive, got shape " + shape_str(shape));
    n *= static_cast<size_t>(d);
  }
  return n;
}

std::shared_ptr<Node> make_node(const std::vector<int>& shape) {
  auto n = std::make_shared<Node>();
  n->shape = shape;
  n->data.assign(shape_size(shape), 0.0);
  return n;
}

// Register the output node of an op: requires_grad propagates from parents,
// and the backward closure is only kept when something upstream wants it.
Tensor make_result(std::shared_ptr<Node> out, std::vector<std::shared_ptr<Node>> parents,
                   std::function<void()> backward_fn) {
  bool needs = false;
  for (const auto& p : parents)
    if (p->requires_grad) needs = true;
  if (needs) {
    out->requires_grad = true;
    out->parents = std::move(parents);
    out->backward_fn = std::move(backward_fn);
  }
  return Tensor(std::move(out));
}

}  // namespace

std::string shape_str(const std::vector<int>& shape) {
  std::ostringstream os;
  os << "[";
  for (size_t i = 0; i < shape.size(); ++i) os << (i ? "x" : "") << shape[i];
  os << "]";
  return os.str();
}

int Tensor::cols() const {
  const auto& s = node_->shape;
  if (s.empty()) return 1;
  size_t n = 1;
  for (size_t i = 1; i < s.size(); ++i) n *= static_cast<size_t>(s[i]);
  return static_cast<int>(n);
}

Tensor Tensor::zeros(const std::vector<int>& shape, bool requires_grad) {
  auto n = make_node(shape);
  n->requires_grad = requires_grad;
  return Tensor(std::move(n));
}

Tensor Tensor::full(const std::vector<int>& shape, Scalar value, bool requires_grad) {
  auto n = make_node(shape);
  std::fill(n->data.begin(), n->data.end(), value);
  n->requires_grad = requires_grad;
  return Tensor(std::move(n));
}

Tensor Tensor::from_data(const std::vector<int>& shape, std::vector<Scalar> data,
                         bool requires_grad) {
  if (shape_size(shape) != data.size())
    throw ConfigError("from_data: shape " + shape_str(shape) + " does not match data length " +
                      std::to_string(data.size()));
  auto n = std::make_shared<Node>();
  n->shape = shape;
  n->data = std::move(data);
  n->requires_grad = requires_grad;
  return Tensor(std::move(n));
}

Tensor Tensor::randn(const std::vector<int>& shape, Rng& rng, Scalar stdev, bool requires_grad) {
  auto n = make_node(shape);
  for (auto& v : n->data) v = rng.normal() * stdev;
  n->requires_grad = requires_grad;
  return Tensor(std::move(n));
}

Tensor Tensor::scalar(Scalar v, bool requires_grad) {
  return from_data({1}, {v}, requires_grad);
}

Scalar Tensor::item() const {
  if (size() != 1) throw ContractError("item() on non-scalar tensor " + shape_str(shape()));
  return node_->data[0];
}

void Tensor::backward() const {
  if (size() != 1)
    throw ContractError("backward() requires a scalar loss, got " + shape_str(shape()));
  // topo order by iterative post-order DFS over parents
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, size_t>> frames;
  frames.emplace_back(node_.get(), 0);
  visited.insert(node_.get());
  while (!frames.empty()) {
    auto& [n, idx] = frames.back();
    if (idx < n->parents.size()) {
      Node* p = n->parents[idx].get();
      ++idx;
      if (!visited.count(p) && p->requires_grad) {
        visited.insert(p);
        frames.emplace_back(p, 0);
      }
    } else {
      order.push_back(n);
      frames.pop_back();
    }
  }
  node_->ensure_grad();
  node_->grad[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    if ((*it)->backward_fn) (*it)->backward_fn();
  }
}

// ---- gemm kernels ------------------------------------------------------
// c[m x n] (+)= a[m x k] * b[k x n]; loop order keeps b accesses contiguous.

void gemm_nn(const Scalar* a, const Scalar* b, Scalar* c, int m, int k, int n, bool accumulate) {
  if (!accumulate) std::fill(c, c + static_cast<size_t>(m) * n, 0.0);
  for (int i = 0; i < m; ++i) {
    const Scalar* arow = a + static_cast<size_t>(i) * k;
    Scalar* crow = c + static_cast<size_t>(i) * n;
    for (int p = 0; p < k; ++p) {
      const Scalar av = arow[p];
      if (av == 0.0) continue;
      const Scalar* brow = b + static_cast<size_t>(p) * n;
      for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

// c[m x n] (+)= a[m x k] * b[n x k]^T
void gemm_nt(const Scalar* a, const Scalar* b, Scalar* c, int m, int k, int n, bool accumulate) {
  for (int i = 0; i < m; ++i) {
    const Scalar* arow = a + static_cast<size_t>(i) * k;
    Scalar* crow = c + static_cast<size_t>(i) * n;
    for (int j = 0; j < n; ++j) {
      const Scalar* brow = b + static_cast<size_t>(j) * k;
      Scalar acc = 0.0;
      for (int p = 0; p < k; ++p) acc += arow[p] * brow[p];
      crow[j] = accumulate ? crow[j] + acc : acc;
    }
  }
}

// c[m x n] (+)= a[k x m]^T * b[k x n]
void gemm_tn(const Scalar* a, const Scalar* b, Scalar* c, int m, int k, int n, bool accumulate) {
  if (!accumulate) std::fill(c, c + static_cast<size_t>(m) * n, 0.0);
  for (int p = 0; p < k; ++p) {
    const Scalar* arow = a + static_cast<size_t>(p) * m;
    const Scalar* brow = b + static_cast<size_t>(p) * n;
    for (int i = 0; i < m; ++i) {
      const Scalar av = arow[i];
      if (av == 0.0) continue;
      Scalar* crow = c + static_cast<size_t>(i) * n;
      for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

// ---- ops ---------------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.shape().size() != 2 || b.shape().size() != 2)
    throw ContractError("matmul expects 2-d tensors, got " + shape_str(a.shape()) + " and " +
                        shape_str(b.shape()));
  const int m = a.dim(0), k = a.dim(1), k2 = b.dim(0), n = b.dim(1);
  if (k != k2)
    throw ContractError("matmul dimension mismatch: " + shape_str(a.shape()) + " x " +
                        shape_str(b.shape()));
  auto out = make_node({m, n});
  gemm_nn(a.data().data(), b.data().data(), out->data.data(), m, k, n, false);
  auto an = a.node(), bn = b.node();
  Node* on = out.get();
  return make_result(out, {an, bn}, [an, bn, on, m, k, n]() {
    if (an->requires_grad) {
      an->ensure_grad();
      gemm_nt(on->grad.data(), bn->data.data(), an->grad.data(), m, n, k, true);
    }
    if (bn->requires_grad) {
      bn->ensure_grad();
      gemm_tn(an->data.data(), on->grad.data(), bn->grad.data(), k, m, n, true);
    }
  });
}

namespace {
void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape())
    throw ContractError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                        shape_str(b.shape()));
}
}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "add");
  auto out = make_node(a.shape());
  const size_t n = a.size();
  for (size_t i = 0; i < n; ++i) out->data[i] = a.data()[i] + b.data()[i];
  auto an = a.node(), bn = b.node();
  Node* on = out.get();
  return make_result(out, {an, bn}, [an, bn, on, n]() {
    if (an->requires_grad) {
      an->ensure_grad();
      for (size_t i = 0; i < n; ++i) an->grad[i] += on->grad[i];
    }
    if (bn->requires_grad) {
      bn->ensure_grad();
      for (size_t i = 0; i < n; ++i) bn->grad[i] += on->grad[i];
    }
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "sub");
  auto out = make_node(a.shape());
  const size_t n = a.size();
  for (size_t i = 0; i < n; ++i) out->data[i] = a.data()[i] - b.data()[i];
  auto an = a.node(), bn = b.node();
  Node* on = out.get();
  return make_result(out, {an, bn}, [an, bn, on, n]() {
    if (an->requires_grad) {
      an->ensure_grad();
      for (size_t i = 0; i < n; ++i) an->grad[i] += on->grad[i];
    }
    if (bn->requires_grad) {
      bn->ensure_grad();
      for (size_t i = 0; i < n; ++i) bn->grad[i] -= on->grad[i];
    }
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "mul");
  auto out = make_node(a.shape());
  const size_t n = a.size();
  for (size_t i = 0; i < n; ++i) out->data[i] = a.data()[i] * b.data()[i];
  auto an = a.node(), bn = b.node();
  Node* on = out.get();
  return make_result(out, {an, bn}, [an, bn, on, n]() {
    if (an->requires_grad) {
      an->ensure_grad();
      for (size_t i = 0; i < n; ++i) an->grad[i] += on->grad[i] * bn->data[i];
    }
    if (bn->requires_grad) {
      bn->ensure_grad();
      for (size_t i = 0; i < n; ++i) bn->grad[i] += on->grad[i] * an->data[i];
    }
  });
}

Tensor add_bias(const Tensor& x, const Tensor& b) {
  const int cols = x.cols();
  if (static_cast<int>(b.size()) != cols)
    throw ContractError("add_bias: bias length " + std::to_string(b.size()) +
                        " does not match row width " + std::to_string(cols));
  auto out = make_node(x.shape());
  const int rows = static_cast<int>(x.size()) / cols;
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c)
      out->data[static_cast<size_t>(r) * cols + c] =
          x.data()[static_cast<size_t>(r) * cols + c] + b.data()[c];
  auto xn = x.node(), bn = b.node();
  Node* on = out.get();
  return make_result(out, {xn, bn}, [xn, bn, on, rows, cols]() {
    if (xn->requires_grad) {
      xn->ensure_grad();
      for (size_t i = 0; i < on->grad.size(); ++i) xn->grad[i] += on->grad[i];
    }
    if (bn->requires_grad) {
      bn->ensure_grad();
      for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) bn->grad[c] += on->grad[static_cast<size_t>(r) * cols + c];
    }
  });
}

Tensor scale(const Tensor& x, Scalar c) {
  auto out = make_node(x.shape());
  const size_t n = x.size();
  for (size_t i = 0; i < n; ++i) out->data[i] = x.data()[i] * c;
  auto xn = x.node();
  Node* on = out.get();
  return make_result(out, {xn}, [xn, on, c, n]() {
    if (!xn->requires_grad) return;
    xn->ensure_grad();
    for (size_t i = 0; i < n; ++i) xn->grad[i] += on->grad[i] * c;
  });
}

Tensor transpose(const Tensor& x) {
  if (x.shape().size() != 2) throw ContractError("transpose expects 2-d tensor");
  const int m = x.dim(0), n = x.dim(1);
  auto out = make_node({n, m});
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j)
      out->data[static_cast<size_t>(j) * m + i] = x.data()[static_cast<size_t>(i) * n + j];
  auto xn = x.node();
  Node* on = out.get();
  return make_result(out, {xn}, [xn, on, m, n]() {
    if (!xn->requires_grad) return;
    xn->ensure_grad();
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < n; ++j)
        xn->grad[static_cast<size_t>(i) * n + j] += on->grad[static_cast<size_t>(j) * m + i];
  });
}

Tensor softmax(const Tensor& x, int axis) {
  const auto& shape = x.shape();
  const int rank = static_cast<int>(shape.size());
  if (axis < 0 || axis >= rank)
    throw ContractError("softmax: axis " + std::to_string(axis) + " out of range for " +
                        shape_str(shape));
  size_t outer = 1, inner = 1;
  for (int i = 0; i < axis; ++i) outer *= static_cast<size_t>(shape[i]);
  for (int i = axis + 1; i < rank; ++i) inner *= static_cast<size_t>(shape[i]);
  const size_t len = static_cast<size_t>(shape[axis]);

  auto out = make_node(shape);
  for (size_t o = 0; o < outer; ++o) {
    for (size_t in = 0; in < inner; ++in) {
      const size_t base = o * len * inner + in;
      Scalar mx = x.data()[base];
      for (size_t l = 1; l < len; ++l) mx = std::max(mx, x.data()[base + l * inner]);
      Scalar z = 0.0;
      for (size_t l = 0; l < len; ++l) {
        const Scalar e = std::exp(x.data()[base + l * inner] - mx);
        out->data[base + l * inner] = e;
        z += e;
      }
      const Scalar invz = 1.0 / z;
      for (size_t l = 0; l < len; ++l) out->data[base + l * inner] *= invz;
    }
  }
  auto xn = x.node();
  Node* on = out.get();
  return make_result(out, {xn}, [xn, on, outer, inner, len]() {
    if (!xn->requires_grad) return;
    xn->ensure_grad();
    for (size_t o = 0; o < outer; ++o) {
      for (size_t in = 0; in < inner; ++in) {
        const size_t base = o * len * inner + in;
        Scalar dot = 0.0;
        for (size_t l = 0; l < len; ++l)
          dot += on->grad[base + l * inner] * on->data[base + l * inner];
        for (size_t l = 0; l < len; ++l) {
          const size_t idx = base + l * inner;
          xn->grad[idx] += on->data[idx] * (on->grad[idx] - dot);
        }
      }
    }
  });
}

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, Scalar eps) {
  if (eps <= 0.0) throw ConfigError("layer_norm: eps must be positive");
  const int d = x.shape().back();
  if (static_cast<int>(gamma.size()) != d || static_cast<int>(beta.size()) != d)
    throw ContractError("layer_norm: gamma/beta must match last dimension " + std::to_string(d));
  const size_t rows = x.size() / static_cast<size_t>(d);
  auto out = make_node(x.shape());
  // cache per-row mean and inverse stdev for backward
  auto stats = std::make_shared<std::vector<Scalar>>(rows * 2);
  for (size_t r = 0; r < rows; ++r) {
    const Scalar* xr = x.data().data() + r * d;
    Scalar mean = 0.0;
    for (int i = 0; i < d; ++i) mean += xr[i];
    mean /= d;
    Scalar var = 0.0;
    for (int i = 0; i < d; ++i) var += (xr[i] - mean) * (xr[i] - mean);
    var /= d;
    const Scalar inv = 1.0 / std::sqrt(var + eps);
    (*stats)[r * 2] = mean;
    (*stats)[r * 2 + 1] = inv;
    Scalar* orow = out->data.data() + r * d;
    for (int i = 0; i < d; ++i)
      orow[i] = (xr[i] - mean) * inv * gamma.data()[i] + beta.data()[i];
  }
  auto xn = x.node(), gn = gamma.node(), bn = beta.node();
  Node* on = out.get();
  return make_result(out, {xn, gn, bn}, [xn, gn, bn, on, stats, rows, d]() {
    for (size_t r = 0; r < rows; ++r) {
      const Scalar mean = (*stats)[r * 2];
      const Scalar inv = (*stats)[r * 2 + 1];
      const Scalar* xr = xn->data.data() + r * d;
      const Scalar* go = on->grad.data() + r * d;
      if (gn->requires_grad) {
        gn->ensure_grad();
        for (int i = 0; i < d; ++i) gn->grad[i] += go[i] * (xr[i] - mean) * inv;
      }
      if (bn->requires_grad) {
        bn->ensure_grad();
        for (int i = 0; i < d; ++i) bn->grad[i] += go[i];
      }
      if (xn->requires_grad) {
        xn->ensure_grad();
        // d/dx of gamma * (x - mean) * inv; mean and var both depend on x
        Scalar s1 = 0.0, s2 = 0.0;
        for (int i = 0; i < d; ++i) {
          const Scalar g = go[i] * gn->data[i];
          s1 += g;
          s2 += g * (xr[i] - mean);
        }
        Scalar* gx = xn->grad.data() + r * d;
        for (int i = 0; i < d; ++i) {
          const Scalar g = go[i] * gn->data[i];
          const Scalar xc = xr[i] - mean;
          gx[i] += inv * (g - s1 / d - xc * inv * inv * s2 / d);
        }
      }
    }
  });
}

Tensor gelu(const Tensor& x) {
  auto out = make_node(x.shape());
  const size_t n = x.size();
  const Scalar inv_sqrt2 = 0.7071067811865475244;
  for (size_t i = 0; i < n; ++i) {
    const Scalar v = x.data()[i];
    out->data[i] = 0.5 * v * (1.0 + std::erf(v * inv_sqrt2));
  }
  auto xn = x.node();
  Node* on = out.get();
  return make_result(out, {xn}, [xn, on, n, inv_sqrt2]() {
    if (!xn->requires_grad) return;
    xn->ensure_grad();
    const Scalar inv_sqrt2pi = 0.3989422804014326779;
    for (size_t i = 0; i < n; ++i) {
      const Scalar v = xn->data[i];
      const Scalar cdf = 0.5 * (1.0 + std::erf(v * inv_sqrt2));
      const Scalar pdf = inv_sqrt2pi * std::exp(-0.5 * v * v);
      xn->grad[i] += on->grad[i] * (cdf + v * pdf);
    }
  });
}

Tensor cross_entropy(const Tensor& logits, const std::vector<int>& targets, int ignore_index) {
  if (logits.shape().size() != 2)
    throw ContractError("cross_entropy expects [L x V] logits, got " + shape_str(logits.shape()));
  const int L = logits.dim(0), V = logits.dim(1);
  if (static_cast<int>(targets.size()) != L)
    throw ContractError("cross_entropy: " + std::to_string(targets.size()) + " targets for " +
                        std::to_string(L) + " positions");
  int active = 0;
  for (int t : targets) {
    if (t == ignore_index) continue;
    if (t < 0 || t >= V)
      throw ContractError("cross_entropy: target " + std::to_string(t) + " outside vocab of " +
                          std::to_string(V));
    ++active;
  }
  if (active == 0) throw ContractError("cross_entropy: empty supervision, every position ignored");

  auto out = make_node({1});
  // keep per-row log-sum-exp to rebuild softmax in backward
  auto lse = std::make_shared<std::vector<Scalar>>(static_cast<size_t>(L));
  Scalar total = 0.0;
  for (int r = 0; r < L; ++r) {
    const Scalar* row = logits.data().data() + static_cast<size_t>(r) * V;
    Scalar mx = row[0];
    for (int v = 1; v < V; ++v) mx = std::max(mx, row[v]);
    Scalar z = 0.0;
    for (int v = 0; v < V; ++v) z += std::exp(row[v] - mx);
    (*lse)[r] = mx + std::log(z);
    if (targets[r] != ignore_index) total += (*lse)[r] - row[targets[r]];
  }
  out->data[0] = total / active;
  auto ln = logits.node();
  Node* on = out.get();
  auto tgt = std::make_shared<std::vector<int>>(targets);
  return make_result(out, {ln}, [ln, on, lse, tgt, L, V, ignore_index, active]() {
    if (!ln->requires_grad) return;
    ln->ensure_grad();
    const Scalar go = on->grad[0] / active;
    for (int r = 0; r < L; ++r) {
      if ((*tgt)[r] == ignore_index) continue;
      const Scalar* row = ln->data.data() + static_cast<size_t>(r) * V;
      Scalar* grow = ln->grad.data() + static_cast<size_t>(r) * V;
      for (int v = 0; v < V; ++v) {
        const Scalar p = std::exp(row[v] - (*lse)[r]);
        grow[v] += go * (p - (v == (*tgt)[r] ? 1.0 : 0.0));
      }
    }
  });
}

Tensor sum(const Tensor& x) {
  auto out = make_node({1});
  Scalar s = 0.0;
  for (Scalar v : x.data()) s += v;
  out->data[0] = s;
  auto xn = x.node();
  Node* on = out.get();
  return make_result(out, {xn}, [xn, on]() {
    if (!xn->requires_grad) return;
    xn->ensure_grad();
    for (auto& g : xn->grad) g += on->grad[0];
  });
}

Tensor mean_all(const Tensor& x) { return scale(sum(x), 1.0 / static_cast<Scalar>(x.size())); }

Tensor mse(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "mse");
  auto out = make_node({1});
  const size_t n = a.size();
  Scalar s = 0.0;
  for (size_t i = 0; i < n; ++i) {
    const Scalar d = a.data()[i] - b.data()[i];
    s += d * d;
  }
  out->data[0] = s / n;
  auto an = a.node(), bn = b.node();
  Node* on = out.get();
  return make_result(out, {an, bn}, [an, bn, on, n]() {
    const Scalar c = 2.0 * on->grad[0] / n;
    if (an->requires_grad) {
      an->ensure_grad();
      for (size_t i = 0; i < n; ++i) an->grad[i] += c * (an->data[i] - bn->data[i]);
    }
    if (bn->requires_grad) {
      bn->ensure_grad();
      for (size_t i = 0; i < n; ++i) bn->grad[i] -= c * (an->data[i] - bn->data[i]);
    }
  });
}

Tensor concat_rows(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw ContractError("concat_rows: no parts");
  const int cols = parts[0].cols();
  int rows = 0;
  for (const auto& p : parts) {
    if (p.cols() != cols)
      throw ContractError("concat_rows: column mismatch " + std::to_string(p.cols()) + " vs " +
                          std::to_string(cols));
    rows += static_cast<int>(p.size()) / cols;
  }
  auto out = make_node({rows, cols});
  size_t off = 0;
  for (const auto& p : parts) {
    std::copy(p.data().begin(), p.data().end(), out->data.begin() + off);
    off += p.size();
  }
  std::vector<std::shared_ptr<Node>> parents;
  for (const auto& p : parts) parents.push_back(p.node());
  Node* on = out.get();
  auto ps = std::make_shared<std::vector<std::shared_ptr<Node>>>(parents);
  return make_result(out, parents, [ps, on]() {
    size_t off = 0;
    for (auto& p : *ps) {
      if (p->requires_grad) {
        p->ensure_grad();
        for (size_t i = 0; i < p->data.size(); ++i) p->grad[i] += on->grad[off + i];
      }
      off += p->data.size();
    }
  });
}

Tensor slice_rows(const Tensor& x, int r0, int r1) {
  const int cols = x.cols();
  const int rows = static_cast<int>(x.size()) / cols;
  if (r0 < 0 || r1 > rows || r0 >= r1)
    throw ContractError("slice_rows: bad range [" + std::to_string(r0) + ", " + std::to_string(r1) +
                        ") for " + std::to_string(rows) + " rows");
  auto out = make_node({r1 - r0, cols});
  std::copy(x.data().begin() + static_cast<size_t>(r0) * cols,
            x.data().begin() + static_cast<size_t>(r1) * cols, out->data.begin());
  auto xn = x.node();
  Node* on = out.get();
  return make_result(out, {xn}, [xn, on, r0, cols]() {
    if (!xn->requires_grad) return;
    xn->ensure_grad();
    const size_t base = static_cast<size_t>(r0) * cols;
    for (size_t i = 0; i < on->grad.size(); ++i) xn->grad[base + i] += on->grad[i];
  });
}

Tensor slice_cols(const Tensor& x, int c0, int c1) {
  if (x.shape().size() != 2) throw ContractError("slice_cols expects 2-d tensor");
  const int rows = x.dim(0), cols = x.dim(1);
  if (c0 < 0 || c1 > cols || c0 >= c1)
    throw ContractError("slice_cols: bad range for " + shape_str(x.shape()));
  const int w = c1 - c0;
  auto out = make_node({rows, w});
  for (int r = 0; r < rows; ++r)
    std::copy(x.data().begin() + static_cast<size_t>(r) * cols + c0,
              x.data().begin() + static_cast<size_t>(r) * cols + c1,
              out->data.begin() + static_cast<size_t>(r) * w);
  auto xn = x.node();
  Node* on = out.get();
  return make_result(out, {xn}, [xn, on, rows, cols, c0, w]() {
    if (!xn->requires_grad) return;
    xn->ensure_grad();
    for (int r = 0; r < rows; ++r)
      for (int c = 0; c < w; ++c)
        xn->grad[static_cast<size_t>(r) * cols + c0 + c] +=
            on->grad[static_cast<size_t>(r) * w + c];
  });
}

Tensor embedding(const Tensor& table, const std::vector<int>& ids) {
  if (table.shape().size() != 2) throw ContractError("embedding table must be 2-d");
  const int V = table.dim(0), d = table.dim(1);
  for (int id : ids)
    if (id < 0 || id >= V)
      throw ContractError("embedding: id " + std::to_string(id) + " outside table of " +
                          std::to_string(V));
  auto out = make_node({static_cast<int>(ids.size()), d});
  for (size_t r = 0; r < ids.size(); ++r)
    std::copy(table.data().begin() + static_cast<size_t>(ids[r]) * d,
              table.data().begin() + static_cast<size_t>(ids[r]) * d + d,
              out->data.begin() + r * d);
  auto tn = table.node();
  Node* on = out.get();
  auto idv = std::make_shared<std::vector<int>>(ids);
  return make_result(out, {tn}, [tn, on, idv, d]() {
    if (!tn->requires_grad) return;
    tn->ensure_grad();
    for (size_t r = 0; r < idv->size(); ++r) {
      Scalar* dst = tn->grad.data() + static_cast<size_t>((*idv)[r]) * d;
      const Scalar* src = on->grad.data() + r * d;
      for (int i = 0; i < d; ++i) dst[i] += src[i];
    }
  });
}

Tensor reshape(const Tensor& x, const std::vector<int>& shape) {
  if (shape_size(shape) != x.size())
    throw ContractError("reshape: size mismatch " + shape_str(x.shape()) + " -> " +
                        shape_str(shape));
  auto out = std::make_shared<Node>();
  out->shape = shape;
  out->data = x.data();
  auto xn = x.node();
  Node* on = out.get();
  return make_result(out, {xn}, [xn, on]() {
    if (!xn->requires_grad) return;
    xn->ensure_grad();
    for (size_t i = 0; i < on->grad.size(); ++i) xn->grad[i] += on->grad[i];
  });
}

Tensor mean_rows(const Tensor& x) {
  const int cols = x.cols();
  const int rows = static_cast<int>(x.size()) / cols;
  auto out = make_node({1, cols});
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) out->data[c] += x.data()[static_cast<size_t>(r) * cols + c];
  for (int c = 0; c < cols; ++c) out->data[c] /= rows;
  auto xn = x.node();
  Node* on = out.get();
  return make_result(out, {xn}, [xn, on, rows, cols]() {
    if (!xn->requires_grad) return;
    xn->ensure_grad();
    for (int r = 0; r < rows; ++r)
      for (int c = 0; c < cols; ++c)
        xn->grad[static_cast<size_t>(r) * cols + c] += on->grad[c] / rows;
  });
}

Tensor detach(const Tensor& x) {
  auto out = std::make_shared<Node>();
  out->shape = x.shape();
  out->data = x.data();
  out->requires_grad = false;
  return Tensor(std::move(out));
}

}  // namespace egoexo
