#pragma once

#include <map>
#include <string>
#include <vector>

#include "egoexo/tensor.hpp"

namespace egoexo {

// Named parameter set. Iteration order is the map order (lexicographic), so
// serialization, hashing and optimizer traversal are all deterministic.
class ParamStore {
 public:
  Tensor& add(const std::string& name, Tensor t);
  Tensor& at(const std::string& name);
  const Tensor& at(const std::string& name) const;
  bool has(const std::string& name) const { return params_.count(name) > 0; }

  std::map<std::string, Tensor>& all() { return params_; }
  const std::map<std::string, Tensor>& all() const { return params_; }

  // freeze flags are realized as requires_grad on the tensors
  void freeze_all();
  void set_trainable_prefixes(const std::vector<std::string>& prefixes);
  std::vector<std::string> trainable_names() const;

  void zero_grad();
  size_t total_size() const;

  // SHA-256 over the raw bytes of every parameter in name order.
  std::string content_hash() const;

 private:
  std::map<std::string, Tensor> params_;
};

struct AdamWConfig {
  double lr = 1e-3;
  double lr_lora = 2e-3;  // separate group for lora.* parameters
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;
  double clip_norm = 1.0;  // global-norm clip; 0 disables
};

// Decoupled-weight-decay Adam over a ParamStore. Two parameter groups: names
// starting with "lora." take lr_lora, everything else lr. Frozen parameters
// (requires_grad == false) are never touched.
class AdamW {
 public:
  explicit AdamW(AdamWConfig cfg) : cfg_(cfg) {}

  void step(ParamStore& params);
  int64_t step_count() const { return t_; }
  const AdamWConfig& config() const { return cfg_; }

 private:
  AdamWConfig cfg_;
  int64_t t_ = 0;
  std::map<std::string, std::pair<std::vector<Scalar>, std::vector<Scalar>>> moments_;
};

}  // namespace egoexo
