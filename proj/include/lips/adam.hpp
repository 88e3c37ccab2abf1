#ifndef LIPS_ADAM_HPP
#define LIPS_ADAM_HPP

#include <vector>

namespace lips {

struct AdamState {
  long step = 0;
  double lr = 1e-3, beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  std::vector<double> m1, m2;
};

// Bias-corrected Adam update. Throws on non-finite or mis-sized gradients.
void adam_step(std::vector<double>& params, const std::vector<double>& grad, AdamState& st);

}  // namespace lips

#endif
