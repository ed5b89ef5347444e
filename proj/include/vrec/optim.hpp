#pragma once

#include <vector>

#include "vrec/tensor.hpp"

namespace vrec {

struct AdamOptions {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double clip_norm = 0.0;  // global gradient-norm clip; 0 disables
};

class Adam {
 public:
  Adam(std::vector<Tensor> params, AdamOptions options);

  void zero_grad();
  // A parameter with no accumulated gradient is left untouched.
  void step();
  void set_lr(double lr) { options_.lr = lr; }
  const AdamOptions& options() const { return options_; }

 private:
  std::vector<Tensor> params_;
  AdamOptions options_;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
  long step_count_ = 0;
};

}  // namespace vrec
