#pragma once

#include <functional>
#include <vector>

#include "egoexo/tensor.hpp"

namespace egoexo {

// Central-difference gradient verification. `fn` rebuilds the forward pass
// from the current contents of `inputs` and returns a scalar; the reported
// error for each coordinate is |ad - fd| / max(1, |ad|, |fd|), and the worst
// over all coordinates comes back. The finite-difference side never touches
// the tape, so it stays an independent oracle of the reverse sweep.
double grad_check(const std::function<Tensor()>& fn, const std::vector<Tensor>& inputs,
                  double eps);

}  // namespace egoexo
