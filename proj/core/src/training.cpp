#include "resdiff/training.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "resdiff/predictor.hpp"

namespace resdiff {

std::string to_string(Norm n) { return n == Norm::kL1 ? "l1" : "l2"; }

Norm norm_from_string(const std::string& s) {
    if (s == "l1") return Norm::kL1;
    if (s == "l2") return Norm::kL2;
    throw std::invalid_argument("unknown norm: " + s);
}

void LossConfig::validate() const {
    if ((lambda_res != 0 && lambda_res != 1) || (lambda_eps != 0 && lambda_eps != 1)) {
        throw std::invalid_argument("loss config: lambda coefficients must be 0 or 1");
    }
    if (lambda_res + lambda_eps < 1) {
        throw std::invalid_argument("loss config: at least one objective must be active");
    }
}

namespace {

double norm_term(const Tensor& pred, const Tensor& truth, Norm norm) {
    require_same_shape(pred, truth, "loss");
    const double n = static_cast<double>(pred.size());
    double acc = 0.0;
    if (norm == Norm::kL1) {
        for (std::size_t i = 0; i < pred.size(); ++i) acc += std::fabs(truth[i] - pred[i]);
    } else {
        for (std::size_t i = 0; i < pred.size(); ++i) {
            const double d = truth[i] - pred[i];
            acc += d * d;
        }
    }
    return acc / n;
}

// dL/dpred for one mean-normed term.
void norm_term_grad(const Tensor& pred, const Tensor& truth, Norm norm, double weight,
                    Tensor& grad) {
    const double n = static_cast<double>(pred.size());
    if (norm == Norm::kL1) {
        for (std::size_t i = 0; i < pred.size(); ++i) {
            const double d = pred[i] - truth[i];
            grad[i] += weight * (d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0)) / n;
        }
    } else {
        for (std::size_t i = 0; i < pred.size(); ++i) {
            grad[i] += weight * 2.0 * (pred[i] - truth[i]) / n;
        }
    }
}

}  // namespace

double loss(const Tensor& pred_res, const Tensor& true_res, const Tensor& pred_eps,
            const Tensor& true_eps, const LossConfig& config) {
    config.validate();
    double value = 0.0;
    if (config.lambda_res) value += norm_term(pred_res, true_res, config.norm);
    if (config.lambda_eps) value += norm_term(pred_eps, true_eps, config.norm);
    return value;
}

AdamState::AdamState(const MlpModel& model) {
    for (const auto& [name, tensor] : model.named_parameters()) {
        (void)name;
        m_.emplace_back(tensor->shape());
        v_.emplace_back(tensor->shape());
    }
}

void AdamState::step(MlpModel& model, MlpModel::Gradients& grads, const AdamConfig& config) {
    ++step_;
    const double bc1 = 1.0 - std::pow(config.beta1, step_);
    const double bc2 = 1.0 - std::pow(config.beta2, step_);
    auto params = model.named_parameters();
    auto gradients = MlpModel::named_gradients(grads);
    for (std::size_t p = 0; p < params.size(); ++p) {
        Tensor& theta = *params[p].second;
        const Tensor& g = *gradients[p].second;
        Tensor& m = m_[p];
        Tensor& v = v_[p];
        for (std::size_t i = 0; i < theta.size(); ++i) {
            m[i] = config.beta1 * m[i] + (1.0 - config.beta1) * g[i];
            v[i] = config.beta2 * v[i] + (1.0 - config.beta2) * g[i] * g[i];
            theta[i] -= config.lr * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + config.eps);
        }
    }
}

double ScalarAdam::update(double grad, const AdamConfig& config) {
    ++step;
    m = config.beta1 * m + (1.0 - config.beta1) * grad;
    v = config.beta2 * v + (1.0 - config.beta2) * grad * grad;
    const double mh = m / (1.0 - std::pow(config.beta1, step));
    const double vh = v / (1.0 - std::pow(config.beta2, step));
    return config.lr * mh / (std::sqrt(vh) + config.eps);
}

std::string AutoSelectState::resolved_name() const {
    switch (resolved) {
        case Resolved::kUndecided: return "undecided";
        case Resolved::kResidual: return "sm-res";
        case Resolved::kNoise: return "sm-n";
    }
    return "?";
}

AutoLossResult loss_auto(const Tensor& out, const TrainingBatch& batch, double lambda) {
    const std::size_t n = batch.size();
    const std::size_t d = batch.x.row_size();
    if (out.rows() != n || out.row_size() != d) {
        throw std::invalid_argument("loss_auto: output shape does not match batch");
    }
    AutoLossResult r;
    r.mixed_res = Tensor(out.shape());
    r.mixed_eps = Tensor(out.shape());
    Tensor conv_res(out.shape());  // noise->residual image of out
    Tensor conv_eps(out.shape());  // residual->noise image of out
    for (std::size_t row = 0; row < n; ++row) {
        const double ab = batch.alpha_bar[row];
        const double bb = batch.beta_bar[row];
        if (std::fabs(ab - 1.0) < kConversionGuard || bb < kConversionGuard) {
            throw std::domain_error("loss_auto: conversion singular at t=" +
                                    std::to_string(batch.t[row]) + "; resample the step index");
        }
        for (std::size_t c = 0; c < d; ++c) {
            const std::size_t i = row * d + c;
            conv_res[i] = (batch.x[i] - batch.i_in[i] - bb * out[i]) / (ab - 1.0);
            conv_eps[i] = (batch.x[i] - batch.i_in[i] - (ab - 1.0) * out[i]) / bb;
            r.mixed_res[i] = lambda * out[i] + (1.0 - lambda) * conv_res[i];
            r.mixed_eps[i] = lambda * conv_eps[i] + (1.0 - lambda) * out[i];
        }
    }
    const double count = static_cast<double>(out.size());
    r.dout = Tensor(out.shape());
    double a_term = 0.0, b_term = 0.0, dl_res = 0.0, dl_eps = 0.0;
    for (std::size_t row = 0; row < n; ++row) {
        const double ab = batch.alpha_bar[row];
        const double bb = batch.beta_bar[row];
        const double dres_dout = lambda + (1.0 - lambda) * (-bb / (ab - 1.0));
        const double deps_dout = (1.0 - lambda) + lambda * (-(ab - 1.0) / bb);
        for (std::size_t c = 0; c < d; ++c) {
            const std::size_t i = row * d + c;
            const double ra = r.mixed_res[i] - batch.true_res[i];
            const double eb = r.mixed_eps[i] - batch.true_eps[i];
            a_term += ra * ra;
            b_term += eb * eb;
            r.dout[i] = lambda * 2.0 * ra / count * dres_dout +
                        (1.0 - lambda) * 2.0 * eb / count * deps_dout;
            dl_res += 2.0 * ra * (out[i] - conv_res[i]);
            dl_eps += 2.0 * eb * (conv_eps[i] - out[i]);
        }
    }
    r.residual_term = a_term / count;
    r.noise_term = b_term / count;
    r.value = lambda * r.residual_term + (1.0 - lambda) * r.noise_term;
    r.dlambda = r.residual_term - r.noise_term + lambda * dl_res / count +
                (1.0 - lambda) * dl_eps / count;
    return r;
}

void aosa_update(AutoSelectState& state, MlpModel& model, AdamState& adam,
                 RandomStream reinit_stream) {
    if (!state.undecided()) return;
    if (std::fabs(state.lambda - 0.5) < state.delta) return;
    state.resolved = state.lambda > 0.5 ? AutoSelectState::Resolved::kResidual
                                        : AutoSelectState::Resolved::kNoise;
    state.lambda = state.lambda > 0.5 ? 1.0 : 0.0;
    model = MlpModel::init(model.config(), reinit_stream);
    adam = AdamState(model);  // fresh moments for fresh weights
}

TrainingBatch sample_training_batch(const Tensor& i0, const Tensor& i_in,
                                    const CoefficientSchedule& schedule, RandomStream& stream,
                                    bool guard_conversions) {
    require_same_shape(i0, i_in, "sample_training_batch");
    const std::size_t n = i0.rows();
    const std::size_t d = i0.row_size();
    TrainingBatch batch;
    batch.x = Tensor(i0.shape());
    batch.i_in = i_in;
    batch.true_res = sub(i_in, i0);
    batch.true_eps = Tensor(i0.shape());
    batch.t.resize(n);
    batch.alpha_bar.resize(n);
    batch.beta_bar.resize(n);
    for (std::size_t row = 0; row < n; ++row) {
        int t = 0;
        for (;;) {
            t = 1 + static_cast<int>(stream.next_uniform() * schedule.T);
            if (t > schedule.T) t = schedule.T;
            if (!guard_conversions) break;
            if (std::fabs(schedule.alpha_bar_at(t) - 1.0) >= kConversionGuard &&
                schedule.beta_bar_at(t) >= kConversionGuard) {
                break;
            }
        }
        const double ab = schedule.alpha_bar_at(t);
        const double bb = schedule.beta_bar_at(t);
        batch.t[row] = t;
        batch.alpha_bar[row] = ab;
        batch.beta_bar[row] = bb;
        for (std::size_t c = 0; c < d; ++c) {
            const std::size_t i = row * d + c;
            const double eps = stream.next_gaussian();
            batch.true_eps[i] = eps;
            batch.x[i] = i0[i] + ab * batch.true_res[i] + bb * eps;
        }
    }
    return batch;
}

namespace {

std::vector<double> batch_conditions(const TrainingBatch& batch, PredictorRole role,
                                     TimeConditionMode mode, double t_scale) {
    std::vector<double> cond(batch.size());
    for (std::size_t row = 0; row < batch.size(); ++row) {
        if (mode == TimeConditionMode::kRawT || role == PredictorRole::kBoth) {
            cond[row] = static_cast<double>(batch.t[row]);
        } else if (role == PredictorRole::kResidual) {
            cond[row] = batch.alpha_bar[row] * t_scale;
        } else {
            cond[row] = batch.beta_bar[row] * t_scale;
        }
    }
    return cond;
}

// Loss and dL/dout for the role-tagged objective over raw network output.
double role_loss_and_grad(const Tensor& out, const TrainingBatch& batch,
                          const LossConfig& config, PredictorRole role, Tensor* dout) {
    config.validate();
    const std::size_t n = batch.size();
    const std::size_t d = batch.x.row_size();
    if (dout) *dout = Tensor(out.shape());
    if (role == PredictorRole::kResidual || role == PredictorRole::kNoise) {
        const bool residual = role == PredictorRole::kResidual;
        if ((residual && config.lambda_res != 1) || (!residual && config.lambda_eps != 1) ||
            (residual && config.lambda_eps != 0) || (!residual && config.lambda_res != 0)) {
            throw std::invalid_argument("training: loss coefficients do not match network role");
        }
        const Tensor& truth = residual ? batch.true_res : batch.true_eps;
        if (dout) norm_term_grad(out, truth, config.norm, 1.0, *dout);
        return norm_term(out, truth, config.norm);
    }
    // Two-headed output: rows are [residual head | noise head].
    Tensor pred_res(Shape{n, d}), pred_eps(Shape{n, d});
    for (std::size_t row = 0; row < n; ++row) {
        const double* src = out.data() + row * 2 * d;
        std::copy(src, src + d, pred_res.data() + row * d);
        std::copy(src + d, src + 2 * d, pred_eps.data() + row * d);
    }
    double value = 0.0;
    Tensor gres(Shape{n, d}), geps(Shape{n, d});
    if (config.lambda_res) {
        value += norm_term(pred_res, batch.true_res, config.norm);
        norm_term_grad(pred_res, batch.true_res, config.norm, 1.0, gres);
    }
    if (config.lambda_eps) {
        value += norm_term(pred_eps, batch.true_eps, config.norm);
        norm_term_grad(pred_eps, batch.true_eps, config.norm, 1.0, geps);
    }
    if (dout) {
        for (std::size_t row = 0; row < n; ++row) {
            double* dst = dout->data() + row * 2 * d;
            std::copy(gres.data() + row * d, gres.data() + (row + 1) * d, dst);
            std::copy(geps.data() + row * d, geps.data() + (row + 1) * d, dst + d);
        }
    }
    return value;
}

}  // namespace

double backprop_and_step(MlpModel& model, const TrainingBatch& batch, const LossConfig& config,
                         PredictorRole role, TimeConditionMode cond_mode, double t_scale,
                         AdamState& adam, const AdamConfig& adam_config, long iteration) {
    const auto cond = batch_conditions(batch, role, cond_mode, t_scale);
    const Tensor input = assemble_mlp_input(model.config(), batch.x, batch.i_in, cond);
    MlpModel::Cache cache;
    const Tensor out = model.forward(input, &cache);
    Tensor dout;
    const double value = role_loss_and_grad(out, batch, config, role, &dout);
    if (!std::isfinite(value)) {
        throw std::domain_error("training: non-finite loss at iteration " +
                                std::to_string(iteration));
    }
    MlpModel::Gradients grads;
    model.backward(cache, dout, &grads);
    adam.step(model, grads, adam_config);
    return value;
}

double backprop_and_step_auto(MlpModel& model, const TrainingBatch& batch,
                              AutoSelectState& aosa, TimeConditionMode cond_mode, double t_scale,
                              AdamState& adam, const AdamConfig& adam_config, long iteration,
                              double lambda_lr_scale) {
    if (!aosa.undecided()) {
        throw std::logic_error("backprop_and_step_auto called after resolution");
    }
    const auto cond = batch_conditions(batch, PredictorRole::kBoth, cond_mode, t_scale);
    const Tensor input = assemble_mlp_input(model.config(), batch.x, batch.i_in, cond);
    MlpModel::Cache cache;
    const Tensor out = model.forward(input, &cache);
    const AutoLossResult r = loss_auto(out, batch, aosa.lambda);
    if (!std::isfinite(r.value)) {
        throw std::domain_error("training: non-finite gated loss at iteration " +
                                std::to_string(iteration));
    }
    MlpModel::Gradients grads;
    model.backward(cache, r.dout, &grads);
    adam.step(model, grads, adam_config);
    // The gate follows the clipped loss difference; the raw full-path
    // derivative is dominated by the conversion amplification at the ends of
    // the schedule and swamps the objective comparison the gate encodes.
    const double gate_grad = std::clamp(r.residual_term - r.noise_term, -1.0, 1.0);
    AdamConfig gate_cfg = adam_config;
    gate_cfg.lr = adam_config.lr * lambda_lr_scale;
    aosa.lambda -= aosa.lambda_adam.update(gate_grad, gate_cfg);
    aosa.lambda = std::clamp(aosa.lambda, 0.0, 1.0);
    ++aosa.iterations_elapsed;
    return r.value;
}

namespace {

double model_loss(const MlpModel& model, const Tensor& input, const TrainingBatch& batch,
                  const LossConfig& config, PredictorRole role) {
    const Tensor out = model.forward(input);
    return role_loss_and_grad(out, batch, config, role, nullptr);
}

double model_loss_auto(const MlpModel& model, const Tensor& input, const TrainingBatch& batch,
                       double lambda) {
    const Tensor out = model.forward(input);
    return loss_auto(out, batch, lambda).value;
}

double rel_error(double a, double b) {
    const double scale = std::max({std::fabs(a), std::fabs(b), 1e-4});
    return std::fabs(a - b) / scale;
}

constexpr double kFdStep = 1e-5;

template <typename LossFn>
GradCheckResult run_grad_check(const MlpModel& model, const MlpModel::Gradients& analytic,
                               std::size_t max_params, RandomStream& pick, LossFn&& fn) {
    GradCheckResult result;
    MlpModel probe = model;
    auto params = probe.named_parameters();
    MlpModel::Gradients grads_copy = analytic;
    auto grad_views = MlpModel::named_gradients(grads_copy);
    const std::size_t total = model.parameter_count();
    const bool exhaustive = total <= max_params;
    std::size_t budget = exhaustive ? total : max_params;
    while (budget > 0) {
        std::size_t flat = 0;
        if (exhaustive) {
            flat = total - budget;
        } else {
            flat = static_cast<std::size_t>(pick.next_uniform() * total);
            if (flat >= total) flat = total - 1;
        }
        std::size_t offset = flat;
        for (std::size_t p = 0; p < params.size(); ++p) {
            Tensor& theta = *params[p].second;
            if (offset < theta.size()) {
                const double saved = theta[offset];
                theta[offset] = saved + kFdStep;
                const double up = fn(probe);
                theta[offset] = saved - kFdStep;
                const double down = fn(probe);
                theta[offset] = saved;
                const double fd = (up - down) / (2.0 * kFdStep);
                const double an = (*grad_views[p].second)[offset];
                result.max_rel_error = std::max(result.max_rel_error, rel_error(an, fd));
                break;
            }
            offset -= theta.size();
        }
        ++result.checked;
        --budget;
    }
    return result;
}

}  // namespace

GradCheckResult grad_check(const MlpModel& model, const TrainingBatch& batch,
                           const LossConfig& config, PredictorRole role,
                           TimeConditionMode cond_mode, double t_scale, std::size_t max_params,
                           RandomStream& pick) {
    const auto cond = batch_conditions(batch, role, cond_mode, t_scale);
    const Tensor input = assemble_mlp_input(model.config(), batch.x, batch.i_in, cond);
    MlpModel::Cache cache;
    const Tensor out = model.forward(input, &cache);
    Tensor dout;
    role_loss_and_grad(out, batch, config, role, &dout);
    MlpModel::Gradients analytic;
    model.backward(cache, dout, &analytic);
    return run_grad_check(model, analytic, max_params, pick, [&](const MlpModel& m) {
        return model_loss(m, input, batch, config, role);
    });
}

GradCheckResult grad_check_auto(const MlpModel& model, const TrainingBatch& batch,
                                double lambda, TimeConditionMode cond_mode, double t_scale,
                                std::size_t max_params, RandomStream& pick) {
    const auto cond = batch_conditions(batch, PredictorRole::kBoth, cond_mode, t_scale);
    const Tensor input = assemble_mlp_input(model.config(), batch.x, batch.i_in, cond);
    MlpModel::Cache cache;
    const Tensor out = model.forward(input, &cache);
    const AutoLossResult r = loss_auto(out, batch, lambda);
    MlpModel::Gradients analytic;
    model.backward(cache, r.dout, &analytic);
    GradCheckResult result = run_grad_check(model, analytic, max_params, pick,
                                            [&](const MlpModel& m) {
                                                return model_loss_auto(m, input, batch, lambda);
                                            });
    const double up = model_loss_auto(model, input, batch, lambda + kFdStep);
    const double down = model_loss_auto(model, input, batch, lambda - kFdStep);
    result.lambda_rel_error = rel_error(r.dlambda, (up - down) / (2.0 * kFdStep));
    result.max_rel_error = std::max(result.max_rel_error, result.lambda_rel_error);
    return result;
}

}  // namespace resdiff
