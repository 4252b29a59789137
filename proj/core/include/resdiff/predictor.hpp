#pragma once

#include <memory>

#include "resdiff/schedule.hpp"
#include "resdiff/tensor.hpp"

namespace resdiff {

/// Position on the (alpha_bar, beta_bar) coefficient plane, plus the raw
/// time index for schedule-bound conditioning. The simultaneous reverse
/// path walks the schedule diagonal; decomposed paths leave it.
struct PathPoint {
    double alpha_bar = 0.0;
    double beta_bar = 0.0;
    double t_raw = 0.0;
};

enum class PredictorOutput { kResidual, kNoise, kBoth };

/// Estimator of the residual and/or noise content of a diffused state.
class Predictor {
public:
    virtual ~Predictor() = default;

    virtual PredictorOutput output() const = 0;

    /// True when residual and noise estimates come from genuinely separate
    /// estimators (analytic oracle, paired networks) rather than one output
    /// plus an algebraic conversion.
    virtual bool independent_pair() const { return false; }

    /// Fills the requested estimates; a null pointer skips that output.
    /// Asking for an output the predictor does not produce throws.
    virtual void predict(const Tensor& x, const Tensor& i_in, const PathPoint& p,
                         Tensor* res_hat, Tensor* eps_hat) const = 0;
};

// Algebraic maps between the two estimate kinds at a path point, from the
// synthesis identity x = i_in + (alpha_bar - 1) * i_res + beta_bar * eps.
// Guards reject the singular conversions instead of clamping: a clamped
// conversion silently corrupts equivalence checks.
inline constexpr double kConversionGuard = 1e-8;

Tensor convert_noise_to_residual(const Tensor& eps_hat, const Tensor& x, const Tensor& i_in,
                                 double alpha_bar, double beta_bar);
Tensor convert_residual_to_noise(const Tensor& res_hat, const Tensor& x, const Tensor& i_in,
                                 double alpha_bar, double beta_bar);
Tensor convert_noise_to_residual(const Tensor& eps_hat, const Tensor& x, const Tensor& i_in,
                                 int t, const CoefficientSchedule& schedule);
Tensor convert_residual_to_noise(const Tensor& res_hat, const Tensor& x, const Tensor& i_in,
                                 int t, const CoefficientSchedule& schedule);

/// Replays recorded per-sample residual and noise; the exact-cancellation
/// reference predictor.
class GroundTruthPredictor : public Predictor {
public:
    GroundTruthPredictor(Tensor i_res, Tensor eps);
    PredictorOutput output() const override { return PredictorOutput::kBoth; }
    bool independent_pair() const override { return true; }
    void predict(const Tensor& x, const Tensor& i_in, const PathPoint& p,
                 Tensor* res_hat, Tensor* eps_hat) const override;

private:
    Tensor i_res_;
    Tensor eps_;
};

/// Per-dimension Gaussian prior over the generation target.
struct GaussianTaskParams {
    Tensor mu;    // prior mean per dimension
    Tensor s_sq;  // prior variance per dimension, > 0
};

/// Posterior-mean estimates for a Gaussian generation task (i_in = 0, so
/// i_res = -i0 and x = (1 - alpha_bar) * i0 + beta_bar * eps):
///   E[i0 | x] = mu + c s^2 / (c^2 s^2 + beta_bar^2) * (x - c mu),  c = 1 - alpha_bar
///   res_hat = -E[i0 | x],  eps_hat = (x - c E[i0 | x]) / beta_bar.
std::pair<Tensor, Tensor> gaussian_oracle_predict(const Tensor& x, double alpha_bar,
                                                  double beta_bar,
                                                  const GaussianTaskParams& params);

class GaussianOraclePredictor : public Predictor {
public:
    explicit GaussianOraclePredictor(GaussianTaskParams params) : params_(std::move(params)) {}
    PredictorOutput output() const override { return PredictorOutput::kBoth; }
    bool independent_pair() const override { return true; }
    void predict(const Tensor& x, const Tensor& i_in, const PathPoint& p,
                 Tensor* res_hat, Tensor* eps_hat) const override;

private:
    GaussianTaskParams params_;
};

/// Two single-output predictors presented as one independent pair.
class PairedPredictor : public Predictor {
public:
    PairedPredictor(std::shared_ptr<const Predictor> residual,
                    std::shared_ptr<const Predictor> noise);
    PredictorOutput output() const override { return PredictorOutput::kBoth; }
    bool independent_pair() const override { return true; }
    void predict(const Tensor& x, const Tensor& i_in, const PathPoint& p,
                 Tensor* res_hat, Tensor* eps_hat) const override;

private:
    std::shared_ptr<const Predictor> residual_;
    std::shared_ptr<const Predictor> noise_;
};

}  // namespace resdiff
