#include "egoexo/optim.hpp"

#include <cmath>

#include "egoexo/io.hpp"

namespace egoexo {

Tensor& ParamStore::add(const std::string& name, Tensor t) {
  auto [it, fresh] = params_.emplace(name, std::move(t));
  if (!fresh) throw ConfigError("duplicate parameter name: " + name);
  return it->second;
}

Tensor& ParamStore::at(const std::string& name) {
  auto it = params_.find(name);
  if (it == params_.end()) throw ConfigError("unknown parameter: " + name);
  return it->second;
}

const Tensor& ParamStore::at(const std::string& name) const {
  auto it = params_.find(name);
  if (it == params_.end()) throw ConfigError("unknown parameter: " + name);
  return it->second;
}

void ParamStore::freeze_all() {
  for (auto& [name, t] : params_) t.set_requires_grad(false);
}

void ParamStore::set_trainable_prefixes(const std::vector<std::string>& prefixes) {
  for (auto& [name, t] : params_) {
    bool trainable = false;
    for (const auto& p : prefixes)
      if (name.rfind(p, 0) == 0) trainable = true;
    t.set_requires_grad(trainable);
  }
}

std::vector<std::string> ParamStore::trainable_names() const {
  std::vector<std::string> out;
  for (const auto& [name, t] : params_)
    if (t.requires_grad()) out.push_back(name);
  return out;
}

void ParamStore::zero_grad() {
  for (auto& [name, t] : params_) t.zero_grad();
}

size_t ParamStore::total_size() const {
  size_t n = 0;
  for (const auto& [name, t] : params_) n += t.size();
  return n;
}

std::string ParamStore::content_hash() const {
  Sha256 h;
  for (const auto& [name, t] : params_) {
    h.update(name.data(), name.size());
    h.update(t.data().data(), t.size() * sizeof(Scalar));
  }
  return h.hex();
}

void AdamW::step(ParamStore& params) {
  ++t_;
  // global-norm clip over all trainable grads
  double scale_factor = 1.0;
  if (cfg_.clip_norm > 0.0) {
    double sq = 0.0;
    for (auto& [name, t] : params.all()) {
      if (!t.requires_grad() || !t.has_grad()) continue;
      for (Scalar g : t.grad()) sq += g * g;
    }
    const double norm = std::sqrt(sq);
    if (norm > cfg_.clip_norm) scale_factor = cfg_.clip_norm / norm;
  }
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (auto& [name, t] : params.all()) {
    if (!t.requires_grad()) continue;  // frozen parameters stay bit-identical
    if (!t.has_grad()) continue;
    const double lr = name.rfind("lora.", 0) == 0 ? cfg_.lr_lora : cfg_.lr;
    auto& [m, v] = moments_[name];
    if (m.size() != t.size()) {
      m.assign(t.size(), 0.0);
      v.assign(t.size(), 0.0);
    }
    auto& data = t.data();
    auto& grad = t.grad();
    for (size_t i = 0; i < data.size(); ++i) {
      const double g = grad[i] * scale_factor;
      if (std::isnan(g))
        throw ContractError("NaN gradient in parameter " + name + " at index " +
                            std::to_string(i));
      m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * g;
      v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * g * g;
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      data[i] -= lr * (mhat / (std::sqrt(vhat) + cfg_.eps) + cfg_.weight_decay * data[i]);
    }
  }
}

}  // namespace egoexo
