#pragma once

#include "resdiff/random.hpp"
#include "resdiff/schedule.hpp"
#include "resdiff/tensor.hpp"

namespace resdiff {

/// Batch state of the diffusion at time index t (0 = clean data, T = fully
/// diffused).
struct DiffusionState {
    Tensor x;
    int t = 0;
    const CoefficientSchedule* schedule = nullptr;
};

/// A training/evaluation batch: targets, conditional inputs, their
/// difference, and (when recorded) the noise used for synthesis.
struct TripletBatch {
    Tensor i0;     // target data
    Tensor i_in;   // conditional input; all-zeros for generation tasks
    Tensor i_res;  // i_in - i0
    Tensor eps;    // recorded noise, same shape, optional

    void validate() const;  // shape agreement and i_res == i_in - i0
};

/// One forward step: x_t = x_{t-1} + alpha_t * i_res + beta_t * eps with a
/// fresh draw. Errors at t = T.
DiffusionState forward_step(const DiffusionState& state, const Tensor& i_res,
                            RandomStream& stream);

/// Closed-form synthesis at time t:
///   x_t = i0 + alpha_bar_t * i_res + beta_bar_t * eps.
/// Returns the state and the drawn eps (losses need the exact draw).
std::pair<DiffusionState, Tensor> synthesize(const TripletBatch& triplet, int t,
                                             const CoefficientSchedule& schedule,
                                             RandomStream& stream);

/// Same marginal, written from the conditional input:
///   x_t = i_in + (alpha_bar_t - 1) * i_res + beta_bar_t * eps.
Tensor synthesize_from_input(const Tensor& i_in, const Tensor& i_res, int t,
                             const CoefficientSchedule& schedule, const Tensor& eps);

/// Synthesis at an arbitrary point (alpha_bar, beta_bar) of the coefficient
/// plane; the t-indexed overloads are the diagonal of this map.
Tensor synthesize_at(const Tensor& i0, const Tensor& i_res, double alpha_bar,
                     double beta_bar, const Tensor& eps);

struct MarginalParams {
    double i0_coeff;     // always 1
    double i_res_coeff;  // alpha_bar_t
    double stddev;       // beta_bar_t
};

/// Parameters of the marginal q(x_t | i0, i_res) = N(i0 + alpha_bar_t *
/// i_res, beta_bar_t^2 I).
MarginalParams marginal_params(int t, const CoefficientSchedule& schedule);

/// Forward trajectory dump: CSV rows (sample-id, t, dim-0, dim-1, ...).
void write_trajectory_csv(const std::string& path,
                          const std::vector<std::pair<int, Tensor>>& steps);

}  // namespace resdiff
