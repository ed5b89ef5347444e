#include "vrec/autodiff_check.hpp"

#include <algorithm>
#include <cmath>

namespace vrec {

double grad_check(const std::function<Tensor()>& loss, std::vector<Tensor> params, double step) {
  for (auto& p : params) {
    p.set_requires_grad(true);
    p.zero_grad();
  }
  loss().backward();
  std::vector<std::vector<double>> analytic;
  analytic.reserve(params.size());
  for (auto& p : params) analytic.emplace_back(p.grad().begin(), p.grad().end());

  NoGradGuard no_grad;
  double worst = 0.0;
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto values = params[k].mutable_data();
    double err2 = 0.0, ref2 = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double original = values[i];
      values[i] = original + step;
      const double up = loss().item();
      values[i] = original - step;
      const double down = loss().item();
      values[i] = original;
      const double numeric = (up - down) / (2.0 * step);
      err2 += (analytic[k][i] - numeric) * (analytic[k][i] - numeric);
      ref2 += numeric * numeric;
    }
    if (err2 > 0.0) worst = std::max(worst, std::sqrt(err2) / (std::sqrt(ref2) + 1e-12));
  }
  return worst;
}

}  // namespace vrec
