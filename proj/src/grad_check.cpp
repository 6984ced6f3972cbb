#include "egoexo/grad_check.hpp"

#include <cmath>

namespace egoexo {

double grad_check(const std::function<Tensor()>& fn, const std::vector<Tensor>& inputs,
                  double eps) {
  if (eps < 1e-7 || eps > 1e-3)
    throw ConfigError("grad_check: eps must lie in [1e-7, 1e-3]");
  for (const auto& t : inputs)
    if (!t.requires_grad())
      throw ContractError("grad_check: every checked input must have requires_grad");

  Tensor loss = fn();
  if (loss.size() != 1) throw ContractError("grad_check: function must return a scalar");
  for (auto t : inputs) t.zero_grad();
  loss.backward();

  std::vector<std::vector<Scalar>> analytic;
  analytic.reserve(inputs.size());
  for (auto t : inputs) analytic.push_back(t.grad());

  double worst = 0.0;
  for (size_t ti = 0; ti < inputs.size(); ++ti) {
    Tensor t = inputs[ti];
    auto& data = t.data();
    for (size_t i = 0; i < data.size(); ++i) {
      const Scalar saved = data[i];
      data[i] = saved + eps;
      const Scalar up = fn().item();
      data[i] = saved - eps;
      const Scalar down = fn().item();
      data[i] = saved;
      const double fd = (up - down) / (2.0 * eps);
      const double ad = analytic[ti][i];
      const double err = std::abs(ad - fd) / std::max({1.0, std::abs(ad), std::abs(fd)});
      worst = std::max(worst, err);
    }
  }
  return worst;
}

}  // namespace egoexo
