#pragma once

#include <functional>
#include <vector>

#include "vrec/tensor.hpp"

namespace vrec {

// Max over parameter tensors of ||autodiff - central difference||_2 /
// (||central difference||_2 + 1e-12). Entry-wise ratios are dominated by
// rounding noise wherever a gradient entry is close to zero. `loss` must rebuild its graph from the
// current parameter values on every call and be deterministic.
double grad_check(const std::function<Tensor()>& loss, std::vector<Tensor> params,
                  double step = 1e-5);

}  // namespace vrec
