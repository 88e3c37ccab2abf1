#ifndef LIPS_EULER_HPP
#define LIPS_EULER_HPP

#include "lips/path.hpp"
#include "lips/random.hpp"
#include "lips/rate_model.hpp"

namespace lips {

// One step of the product kernel prod_i (delta + dt r_i). Throws
// StepSizeError if dt * max exit rate > 1.
LatentState euler_kernel_sample(const RateField& rates, const LatentState& z,
                                double dt, Rng& rng);
// In-place variant; returns the number of coordinates that moved.
int euler_step_inplace(const RateField& rates, LatentState& z, double dt, Rng& rng);

double euler_kernel_log_pmf(const RateField& rates, const LatentState& z,
                            const LatentState& z_next, double dt);

// Euler simulation on a uniform grid; jumps are stamped at the step end.
PathSample euler_simulate(const RateModel& model, const Params& theta,
                          const LatentState& z0, double T, double dt, Rng& rng);

// Euler simulation on an arbitrary grid starting at 0.
PathSample euler_simulate_grid(const RateModel& model, const Params& theta,
                               const LatentState& z0, const std::vector<double>& grid, Rng& rng);

}  // namespace lips

#endif
