#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "resdiff/mlp.hpp"
#include "resdiff/random.hpp"
#include "resdiff/schedule.hpp"
#include "resdiff/tensor.hpp"

namespace resdiff {

enum class Norm { kL1, kL2 };

std::string to_string(Norm n);
Norm norm_from_string(const std::string& s);

struct LossConfig {
    int lambda_res = 1;  // in {0, 1}
    int lambda_eps = 0;  // in {0, 1}; lambda_res + lambda_eps >= 1
    Norm norm = Norm::kL2;

    void validate() const;
};

/// lambda_res * ||true_res - pred_res|| + lambda_eps * ||true_eps - pred_eps||
/// with the configured norm, means taken over batch and dimensions.
double loss(const Tensor& pred_res, const Tensor& true_res, const Tensor& pred_eps,
            const Tensor& true_eps, const LossConfig& config);

/// A synthesized training batch with per-row time context.
struct TrainingBatch {
    Tensor x;         // [n, d] diffused states
    Tensor i_in;      // [n, d]
    Tensor true_res;  // [n, d]
    Tensor true_eps;  // [n, d]
    std::vector<int> t;                       // per-row step index
    std::vector<double> alpha_bar, beta_bar;  // per-row coefficients

    std::size_t size() const { return x.rows(); }
};

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

/// First/second-moment accumulators mirroring the model parameters.
class AdamState {
public:
    AdamState() = default;
    explicit AdamState(const MlpModel& model);
    void step(MlpModel& model, MlpModel::Gradients& grads, const AdamConfig& config);
    int steps_taken() const { return step_; }

private:
    int step_ = 0;
    std::vector<Tensor> m_, v_;
};

struct ScalarAdam {
    double m = 0.0, v = 0.0;
    int step = 0;
    double update(double grad, const AdamConfig& config);
};

/// Resolution state of the automatic objective selection: a learnable gate
/// lambda in [0,1] between the residual and noise objectives that snaps to a
/// single prediction target once it leaves the [0.5-delta, 0.5+delta] band.
struct AutoSelectState {
    double lambda = 0.5;
    double delta = 0.01;
    enum class Resolved { kUndecided, kResidual, kNoise } resolved = Resolved::kUndecided;
    long iterations_elapsed = 0;
    ScalarAdam lambda_adam;

    bool undecided() const { return resolved == Resolved::kUndecided; }
    std::string resolved_name() const;
};

struct AutoLossResult {
    double value = 0.0;
    double residual_term = 0.0;  // ||true_res - mixed residual estimate||^2
    double noise_term = 0.0;     // ||true_eps - mixed noise estimate||^2
    double dlambda = 0.0;        // full derivative of value w.r.t. lambda
    Tensor dout;                 // dL/d(network output)
    Tensor mixed_res, mixed_eps;
};

/// Gated dual objective over a single network output `out`:
///   R = lambda*out + (1-lambda)*(noise->residual conversion of out)
///   E = lambda*(residual->noise conversion of out) + (1-lambda)*out
///   L = lambda*||res - R||^2 + (1-lambda)*||eps - E||^2.
/// Rows whose coefficients sit inside the conversion guards are rejected;
/// training resamples t instead (see sample_training_batch).
AutoLossResult loss_auto(const Tensor& out, const TrainingBatch& batch, double lambda);

/// Post-gradient-step bookkeeping: once |lambda - 0.5| >= delta, the gate is
/// frozen at 0 or 1, the network is reinitialized from `reinit_stream`, and
/// the optimizer moments are reset.
void aosa_update(AutoSelectState& state, MlpModel& model, AdamState& adam,
                 RandomStream reinit_stream);

/// Per-row uniform t over {1..T}, resampling any row whose coefficients fall
/// inside the conversion guards when `guard_conversions` is set.
TrainingBatch sample_training_batch(const Tensor& i0, const Tensor& i_in,
                                    const CoefficientSchedule& schedule, RandomStream& stream,
                                    bool guard_conversions);

/// One optimization step of the role-tagged loss; returns the loss value.
/// Throws with iteration context on a non-finite loss.
double backprop_and_step(MlpModel& model, const TrainingBatch& batch, const LossConfig& config,
                         PredictorRole role, TimeConditionMode cond_mode, double t_scale,
                         AdamState& adam, const AdamConfig& adam_config, long iteration);

/// One optimization step of the gated dual objective. The network follows the
/// full gradient; the gate follows the clipped loss difference
/// (residual_term - noise_term) at lr_scale times the network rate, which is
/// the stable desk-scale reading of the selection rule.
double backprop_and_step_auto(MlpModel& model, const TrainingBatch& batch,
                              AutoSelectState& aosa, TimeConditionMode cond_mode, double t_scale,
                              AdamState& adam, const AdamConfig& adam_config, long iteration,
                              double lambda_lr_scale = 0.1);

struct GradCheckResult {
    double max_rel_error = 0.0;
    double lambda_rel_error = 0.0;  // populated by the auto variant
    std::size_t checked = 0;
};

/// Central-difference verification (h = 1e-5) of the analytic gradients over
/// up to `max_params` randomly chosen parameters. Relative error uses an
/// absolute floor of 1e-4 to keep near-zero derivatives comparable.
GradCheckResult grad_check(const MlpModel& model, const TrainingBatch& batch,
                           const LossConfig& config, PredictorRole role,
                           TimeConditionMode cond_mode, double t_scale, std::size_t max_params,
                           RandomStream& pick);

/// Same, for the gated dual objective; also differences lambda itself.
GradCheckResult grad_check_auto(const MlpModel& model, const TrainingBatch& batch,
                                double lambda, TimeConditionMode cond_mode, double t_scale,
                                std::size_t max_params, RandomStream& pick);

}  // namespace resdiff
