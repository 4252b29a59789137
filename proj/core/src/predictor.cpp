#include "resdiff/predictor.hpp"

#include <cmath>
#include <stdexcept>

namespace resdiff {

Tensor convert_noise_to_residual(const Tensor& eps_hat, const Tensor& x, const Tensor& i_in,
                                 double alpha_bar, double beta_bar) {
    if (std::fabs(alpha_bar - 1.0) < kConversionGuard) {
        throw std::domain_error(
            "noise->residual conversion singular: |alpha_bar - 1| < 1e-8 (alpha_bar = " +
            std::to_string(alpha_bar) +
            "); predict the residual directly or avoid this step");
    }
    require_same_shape(eps_hat, x, "convert_noise_to_residual");
    require_same_shape(eps_hat, i_in, "convert_noise_to_residual");
    Tensor out = x;
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = (x[i] - i_in[i] - beta_bar * eps_hat[i]) / (alpha_bar - 1.0);
    }
    ensure_finite(out, "convert_noise_to_residual");
    return out;
}

Tensor convert_residual_to_noise(const Tensor& res_hat, const Tensor& x, const Tensor& i_in,
                                 double alpha_bar, double beta_bar) {
    if (beta_bar < kConversionGuard) {
        throw std::domain_error(
            "residual->noise conversion singular: beta_bar < 1e-8 (beta_bar = " +
            std::to_string(beta_bar) + "); predict the noise directly or avoid this step");
    }
    require_same_shape(res_hat, x, "convert_residual_to_noise");
    require_same_shape(res_hat, i_in, "convert_residual_to_noise");
    Tensor out = x;
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = (x[i] - i_in[i] - (alpha_bar - 1.0) * res_hat[i]) / beta_bar;
    }
    ensure_finite(out, "convert_residual_to_noise");
    return out;
}

Tensor convert_noise_to_residual(const Tensor& eps_hat, const Tensor& x, const Tensor& i_in,
                                 int t, const CoefficientSchedule& schedule) {
    return convert_noise_to_residual(eps_hat, x, i_in, schedule.alpha_bar_at(t),
                                     schedule.beta_bar_at(t));
}

Tensor convert_residual_to_noise(const Tensor& res_hat, const Tensor& x, const Tensor& i_in,
                                 int t, const CoefficientSchedule& schedule) {
    return convert_residual_to_noise(res_hat, x, i_in, schedule.alpha_bar_at(t),
                                     schedule.beta_bar_at(t));
}

GroundTruthPredictor::GroundTruthPredictor(Tensor i_res, Tensor eps)
    : i_res_(std::move(i_res)), eps_(std::move(eps)) {
    require_same_shape(i_res_, eps_, "GroundTruthPredictor");
}

void GroundTruthPredictor::predict(const Tensor& x, const Tensor& i_in, const PathPoint& p,
                                   Tensor* res_hat, Tensor* eps_hat) const {
    (void)x;
    (void)i_in;
    (void)p;
    if (res_hat) *res_hat = i_res_;
    if (eps_hat) *eps_hat = eps_;
}

std::pair<Tensor, Tensor> gaussian_oracle_predict(const Tensor& x, double alpha_bar,
                                                  double beta_bar,
                                                  const GaussianTaskParams& params) {
    const std::size_t dim = params.mu.size();
    if (x.size() % dim != 0) {
        throw std::invalid_argument("gaussian_oracle_predict: state size not a multiple of dim");
    }
    const double c = 1.0 - alpha_bar;
    const double bb_sq = beta_bar * beta_bar;
    Tensor res = x, eps = x;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const std::size_t d = i % dim;
        const double s_sq = params.s_sq[d];
        const double denom = c * c * s_sq + bb_sq;
        if (denom <= 0.0) {
            throw std::domain_error("gaussian_oracle_predict: degenerate posterior (c^2 s^2 + "
                                    "beta_bar^2 = 0)");
        }
        const double mean0 = params.mu[d] + (c * s_sq / denom) * (x[i] - c * params.mu[d]);
        res[i] = -mean0;
        eps[i] = beta_bar > 1e-12 ? (x[i] - c * mean0) / beta_bar : 0.0;
    }
    return {std::move(res), std::move(eps)};
}

void GaussianOraclePredictor::predict(const Tensor& x, const Tensor& i_in, const PathPoint& p,
                                      Tensor* res_hat, Tensor* eps_hat) const {
    (void)i_in;  // oracle is defined for the generation configuration only
    auto [res, eps] = gaussian_oracle_predict(x, p.alpha_bar, p.beta_bar, params_);
    if (res_hat) *res_hat = std::move(res);
    if (eps_hat) *eps_hat = std::move(eps);
}

PairedPredictor::PairedPredictor(std::shared_ptr<const Predictor> residual,
                                 std::shared_ptr<const Predictor> noise)
    : residual_(std::move(residual)), noise_(std::move(noise)) {
    if (!residual_ || !noise_) throw std::invalid_argument("PairedPredictor: null component");
    if (residual_->output() == PredictorOutput::kNoise) {
        throw std::invalid_argument("PairedPredictor: first component cannot produce residuals");
    }
    if (noise_->output() == PredictorOutput::kResidual) {
        throw std::invalid_argument("PairedPredictor: second component cannot produce noise");
    }
}

void PairedPredictor::predict(const Tensor& x, const Tensor& i_in, const PathPoint& p,
                              Tensor* res_hat, Tensor* eps_hat) const {
    if (res_hat) residual_->predict(x, i_in, p, res_hat, nullptr);
    if (eps_hat) noise_->predict(x, i_in, p, nullptr, eps_hat);
}

}  // namespace resdiff
