#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "resdiff/predictor.hpp"
#include "resdiff/random.hpp"
#include "resdiff/schedule.hpp"
#include "resdiff/tensor.hpp"

namespace resdiff {

enum class SamplingMethod { kResidual, kNoise, kResidualNoise };

/// Reverse-path decomposition. kSimultaneous removes residual and noise
/// increments together along the schedule diagonal; the decomposed modes
/// sweep one coefficient axis to zero first, then the other.
enum class PathMode { kSimultaneous, kResidualFirst, kNoiseFirst };

std::string to_string(SamplingMethod m);
std::string to_string(PathMode m);
SamplingMethod sampling_method_from_string(const std::string& s);
PathMode path_mode_from_string(const std::string& s);

struct SamplingPlan {
    std::vector<int> timesteps;  // strictly decreasing, first element == T
    double eta = 0.0;
    SamplingMethod method = SamplingMethod::kResidualNoise;
    PathMode path_mode = PathMode::kSimultaneous;

    void validate(const CoefficientSchedule& schedule) const;
};

/// Uniformly spaced subsequence {T, T(K-1)/K, ..., T/K} (rounded), the final
/// implicit step going to 0.
std::vector<int> uniform_timesteps(int T, int steps);

/// Mean and stddev of the reverse transfer distribution
/// q(x_{t_prev} | x_t, i0, i_res) for a (possibly gapped) step.
std::pair<Tensor, double> posterior_params(const Tensor& x, const Tensor& i0,
                                           const Tensor& i_res, int t, int t_prev,
                                           const CoefficientSchedule& schedule, double eta);

/// One reverse update
///   x' = x - (abar_t - abar_p) res - (bbar_t - sqrt(bbar_p^2 - sigma^2)) eps + sigma e,
/// where sigma follows the schedule's variance mode. `noise` supplies e for
/// shared-draw comparisons; with sigma > 0 and no source of noise this throws.
Tensor reverse_step(const Tensor& x, const Tensor& res_hat, const Tensor& eps_hat, int t,
                    int t_prev, const CoefficientSchedule& schedule, double eta,
                    RandomStream& stream);
Tensor reverse_step_with_noise(const Tensor& x, const Tensor& res_hat, const Tensor& eps_hat,
                               int t, int t_prev, const CoefficientSchedule& schedule,
                               double eta, const Tensor* noise);

/// The reference implicit-sampler update in product-form coordinates; used
/// as the equivalence oracle for noise-prediction sampling.
Tensor ddim_equivalent_step(const Tensor& x, const Tensor& eps_hat, int t, int t_prev,
                            const DdimSchedule& schedule, double sigma,
                            const Tensor* noise = nullptr);

/// Called after every reverse update with (step index, t_prev, state).
using TrajectorySink = std::function<void(int, int, const Tensor&)>;

struct SampleOptions {
    const Tensor* init_noise = nullptr;  // noise for x_T; drawn when null
    const Tensor* init_state = nullptr;  // full x_T override (e.g. a recorded
                                         // forward state); wins over init_noise
    TrajectorySink sink;
};

/// Runs the reverse process from x_T = i_in + beta_bar_T * eps down to the
/// clean estimate. Estimates the predictor does not produce are derived via
/// the algebraic conversions at the current path point.
Tensor sample(const SamplingPlan& plan, const Predictor& predictor, const Tensor& i_in,
              const CoefficientSchedule& schedule, RandomStream& stream,
              const SampleOptions& options = {});

/// Reverse trajectory CSV: rows (sample-id, step-index, t, dim values...).
void write_reverse_trajectory_csv(const std::string& path,
                                  const std::vector<std::tuple<int, int, Tensor>>& steps);

}  // namespace resdiff
