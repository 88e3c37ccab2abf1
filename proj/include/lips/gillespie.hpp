#ifndef LIPS_GILLESPIE_HPP
#define LIPS_GILLESPIE_HPP

#include <functional>
#include <string>

#include "lips/path.hpp"
#include "lips/random.hpp"
#include "lips/rate_model.hpp"

namespace lips {

// Exact simulation. Time-homogeneous models use the direct method;
// otherwise thinning against bound (or model.rate_bound(theta) when bound is
// 0), and a missing bound is an error.
PathSample gillespie_simulate(const RateModel& model, const Params& theta,
                              const LatentState& z0, double T, Rng& rng,
                              double bound = 0.0);

using LogPmf = std::function<double(const LatentState&)>;

// log p0(z0) + sum log r(jumps) - int lambda dt. Jumps sharing a time are
// applied one after another in node order. Inhomogeneous models use midpoint
// quadrature with steps of at most quad_dt. A jump the model cannot make
// gives -inf, and the reason is written to diag when supplied.
double path_log_density(const RateModel& model, const Params& theta,
                        const PathSample& path, const LogPmf& p0_log,
                        double quad_dt = 1e-3, std::string* diag = nullptr);

}  // namespace lips

#endif
