#include "lips/adam.hpp"

#include <cmath>

#include <fmt/format.h>

#include "lips/error.hpp"

namespace lips {

void adam_step(std::vector<double>& params, const std::vector<double>& grad, AdamState& st) {
  if (grad.size() != params.size())
    throw DimensionError(fmt::format("gradient has {} entries, parameters {}", grad.size(), params.size()));
  for (std::size_t k = 0; k < grad.size(); ++k)
    if (!std::isfinite(grad[k])) throw Error(fmt::format("non-finite gradient entry {}", k));
  if (st.m1.size() != params.size()) {
    st.m1.assign(params.size(), 0.0);
    st.m2.assign(params.size(), 0.0);
  }
  ++st.step;
  double c1 = 1.0 - std::pow(st.beta1, double(st.step));
  double c2 = 1.0 - std::pow(st.beta2, double(st.step));
  for (std::size_t k = 0; k < params.size(); ++k) {
    st.m1[k] = st.beta1 * st.m1[k] + (1.0 - st.beta1) * grad[k];
    st.m2[k] = st.beta2 * st.m2[k] + (1.0 - st.beta2) * grad[k] * grad[k];
    params[k] -= st.lr * (st.m1[k] / c1) / (std::sqrt(st.m2[k] / c2) + st.eps);
  }
}

}  // namespace lips
