#include "resdiff/sampler.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

#include "resdiff/io.hpp"

namespace resdiff {

std::string to_string(SamplingMethod m) {
    switch (m) {
        case SamplingMethod::kResidual: return "sm-res";
        case SamplingMethod::kNoise: return "sm-n";
        case SamplingMethod::kResidualNoise: return "sm-res-n";
    }
    return "?";
}

std::string to_string(PathMode m) {
    switch (m) {
        case PathMode::kSimultaneous: return "simultaneous";
        case PathMode::kResidualFirst: return "residual-first";
        case PathMode::kNoiseFirst: return "noise-first";
    }
    return "?";
}

SamplingMethod sampling_method_from_string(const std::string& s) {
    if (s == "sm-res") return SamplingMethod::kResidual;
    if (s == "sm-n") return SamplingMethod::kNoise;
    if (s == "sm-res-n") return SamplingMethod::kResidualNoise;
    throw std::invalid_argument("unknown sampling method: " + s);
}

PathMode path_mode_from_string(const std::string& s) {
    if (s == "simultaneous") return PathMode::kSimultaneous;
    if (s == "residual-first") return PathMode::kResidualFirst;
    if (s == "noise-first") return PathMode::kNoiseFirst;
    throw std::invalid_argument("unknown path mode: " + s);
}

void SamplingPlan::validate(const CoefficientSchedule& schedule) const {
    if (timesteps.empty()) throw std::invalid_argument("sampling plan: no timesteps");
    if (timesteps.front() != schedule.T) {
        throw std::invalid_argument("sampling plan: must start at T=" +
                                    std::to_string(schedule.T) + ", got " +
                                    std::to_string(timesteps.front()));
    }
    for (std::size_t i = 0; i + 1 < timesteps.size(); ++i) {
        if (timesteps[i + 1] >= timesteps[i]) {
            throw std::invalid_argument("sampling plan: timesteps not strictly decreasing");
        }
    }
    if (timesteps.back() < 1) throw std::invalid_argument("sampling plan: timesteps must stay >= 1");
    if (eta < 0.0 || eta > 1.0) throw std::invalid_argument("sampling plan: eta outside [0,1]");
    if (path_mode != PathMode::kSimultaneous && eta != 0.0) {
        throw std::invalid_argument(
            "sampling plan: decomposed paths are deterministic only (eta must be 0)");
    }
}

std::vector<int> uniform_timesteps(int T, int steps) {
    if (steps < 1 || steps > T) {
        throw std::invalid_argument("uniform_timesteps: need 1 <= steps <= T");
    }
    std::vector<int> ts;
    ts.reserve(static_cast<std::size_t>(steps));
    for (int k = steps; k >= 1; --k) {
        const int t = static_cast<int>(std::lround(static_cast<double>(T) * k / steps));
        if (ts.empty() || t < ts.back()) ts.push_back(t);
    }
    return ts;
}

std::pair<Tensor, double> posterior_params(const Tensor& x, const Tensor& i0,
                                           const Tensor& i_res, int t, int t_prev,
                                           const CoefficientSchedule& schedule, double eta) {
    if (t_prev >= t) throw std::invalid_argument("posterior_params: t_prev must be < t");
    const double bb_t = schedule.beta_bar_at(t);
    if (bb_t <= 0.0) throw std::domain_error("posterior_params: beta_bar[t] = 0");
    const double bb_p = schedule.beta_bar_at(t_prev);
    const double sigma = gap_sigma(schedule, t, t_prev, eta);
    const double remaining_sq = bb_p * bb_p - sigma * sigma;
    if (remaining_sq < -1e-15) {
        throw std::domain_error("posterior_params: sigma exceeds the remaining noise level");
    }
    const double shrink = std::sqrt(std::max(0.0, remaining_sq)) / bb_t;
    const double ab_t = schedule.alpha_bar_at(t);
    const double ab_p = schedule.alpha_bar_at(t_prev);
    Tensor mean = x;
    for (std::size_t i = 0; i < mean.size(); ++i) {
        const double centered = x[i] - i0[i] - ab_t * i_res[i];
        mean[i] = i0[i] + ab_p * i_res[i] + shrink * centered;
    }
    return {std::move(mean), sigma};
}

Tensor reverse_step_with_noise(const Tensor& x, const Tensor& res_hat, const Tensor& eps_hat,
                               int t, int t_prev, const CoefficientSchedule& schedule,
                               double eta, const Tensor* noise) {
    require_same_shape(x, res_hat, "reverse_step");
    require_same_shape(x, eps_hat, "reverse_step");
    const double sigma = gap_sigma(schedule, t, t_prev, eta);
    const double bb_t = schedule.beta_bar_at(t);
    const double bb_p = schedule.beta_bar_at(t_prev);
    const double remaining_sq = bb_p * bb_p - sigma * sigma;
    if (remaining_sq < -1e-15) {
        throw std::domain_error("reverse_step: sigma exceeds the remaining noise level");
    }
    const double res_coeff = schedule.alpha_bar_at(t) - schedule.alpha_bar_at(t_prev);
    const double eps_coeff = bb_t - std::sqrt(std::max(0.0, remaining_sq));
    Tensor out = x;
    add_scaled(out, res_hat, -res_coeff);
    add_scaled(out, eps_hat, -eps_coeff);
    if (sigma > 0.0) {
        if (!noise) throw std::invalid_argument("reverse_step: sigma > 0 but no noise supplied");
        require_same_shape(x, *noise, "reverse_step noise");
        add_scaled(out, *noise, sigma);
    }
    ensure_finite(out, "reverse_step");
    return out;
}

Tensor reverse_step(const Tensor& x, const Tensor& res_hat, const Tensor& eps_hat, int t,
                    int t_prev, const CoefficientSchedule& schedule, double eta,
                    RandomStream& stream) {
    const double sigma = gap_sigma(schedule, t, t_prev, eta);
    if (sigma > 0.0) {
        Tensor noise = gaussian(stream, x.shape());
        return reverse_step_with_noise(x, res_hat, eps_hat, t, t_prev, schedule, eta, &noise);
    }
    return reverse_step_with_noise(x, res_hat, eps_hat, t, t_prev, schedule, eta, nullptr);
}

Tensor ddim_equivalent_step(const Tensor& x, const Tensor& eps_hat, int t, int t_prev,
                            const DdimSchedule& schedule, double sigma, const Tensor* noise) {
    require_same_shape(x, eps_hat, "ddim_equivalent_step");
    const double ad_t = schedule.at(t);
    const double ad_p = schedule.at(t_prev);
    if (ad_t <= 0.0) throw std::domain_error("ddim_equivalent_step: cumulative alpha is 0 at t");
    const double dir_sq = 1.0 - ad_p - sigma * sigma;
    if (dir_sq < -1e-15) {
        throw std::domain_error("ddim_equivalent_step: sigma exceeds the remaining noise level");
    }
    const double pred_scale = std::sqrt(ad_p) / std::sqrt(ad_t);
    const double eps_scale = std::sqrt(std::max(0.0, dir_sq)) -
                             pred_scale * std::sqrt(1.0 - ad_t);
    Tensor out = scale(x, pred_scale);
    add_scaled(out, eps_hat, eps_scale);
    if (sigma > 0.0) {
        if (!noise) throw std::invalid_argument("ddim_equivalent_step: sigma > 0 but no noise");
        add_scaled(out, *noise, sigma);
    }
    ensure_finite(out, "ddim_equivalent_step");
    return out;
}

namespace {

// Residual estimate at an arbitrary path point, honoring the sampling method.
Tensor residual_estimate(const SamplingMethod method, const Predictor& predictor,
                         const Tensor& x, const Tensor& i_in, const PathPoint& p) {
    Tensor res;
    switch (method) {
        case SamplingMethod::kResidual:
        case SamplingMethod::kResidualNoise:
            predictor.predict(x, i_in, p, &res, nullptr);
            break;
        case SamplingMethod::kNoise: {
            Tensor eps;
            predictor.predict(x, i_in, p, nullptr, &eps);
            res = convert_noise_to_residual(eps, x, i_in, p.alpha_bar, p.beta_bar);
            break;
        }
    }
    return res;
}

Tensor noise_estimate(const SamplingMethod method, const Predictor& predictor, const Tensor& x,
                      const Tensor& i_in, const PathPoint& p) {
    Tensor eps;
    switch (method) {
        case SamplingMethod::kNoise:
        case SamplingMethod::kResidualNoise:
            predictor.predict(x, i_in, p, nullptr, &eps);
            break;
        case SamplingMethod::kResidual: {
            Tensor res;
            predictor.predict(x, i_in, p, &res, nullptr);
            eps = convert_residual_to_noise(res, x, i_in, p.alpha_bar, p.beta_bar);
            break;
        }
    }
    return eps;
}

void check_method_supported(const SamplingPlan& plan, const Predictor& predictor) {
    const PredictorOutput out = predictor.output();
    auto has_res = out == PredictorOutput::kResidual || out == PredictorOutput::kBoth;
    auto has_eps = out == PredictorOutput::kNoise || out == PredictorOutput::kBoth;
    switch (plan.method) {
        case SamplingMethod::kResidual:
            if (!has_res) throw std::invalid_argument("sample: sm-res needs a residual estimate");
            break;
        case SamplingMethod::kNoise:
            if (!has_eps) throw std::invalid_argument("sample: sm-n needs a noise estimate");
            break;
        case SamplingMethod::kResidualNoise:
            if (!has_res || !has_eps) {
                throw std::invalid_argument("sample: sm-res-n needs both estimates");
            }
            break;
    }
}

}  // namespace

Tensor sample(const SamplingPlan& plan, const Predictor& predictor, const Tensor& i_in,
              const CoefficientSchedule& schedule, RandomStream& stream,
              const SampleOptions& options) {
    plan.validate(schedule);
    check_method_supported(plan, predictor);
    const int T = schedule.T;
    const double bbar_T = schedule.beta_bar_at(T);

    Tensor x;
    if (options.init_state) {
        require_same_shape(i_in, *options.init_state, "sample init state");
        x = *options.init_state;
    } else {
        x = i_in;
        if (options.init_noise) {
            require_same_shape(i_in, *options.init_noise, "sample init noise");
            add_scaled(x, *options.init_noise, bbar_T);
        } else {
            Tensor eps = gaussian(stream, i_in.shape());
            add_scaled(x, eps, bbar_T);
        }
    }

    const auto& ts = plan.timesteps;
    const std::size_t K = ts.size();
    auto prev_of = [&](std::size_t k) { return k + 1 < K ? ts[k + 1] : 0; };
    int step_index = 0;
    auto emit = [&](int t_prev) {
        if (options.sink) options.sink(step_index, t_prev, x);
        ++step_index;
    };

    auto step_context = [&](int t, const char* phase, const std::exception& e) -> std::string {
        return "sample: " + std::string(phase) + " step at t=" + std::to_string(t) + ": " +
               e.what();
    };

    if (plan.path_mode == PathMode::kSimultaneous) {
        for (std::size_t k = 0; k < K; ++k) {
            const int t = ts[k], tp = prev_of(k);
            const PathPoint p{schedule.alpha_bar_at(t), schedule.beta_bar_at(t),
                              static_cast<double>(t)};
            try {
                Tensor res = residual_estimate(plan.method, predictor, x, i_in, p);
                Tensor eps = noise_estimate(plan.method, predictor, x, i_in, p);
                x = reverse_step(x, res, eps, t, tp, schedule, plan.eta, stream);
            } catch (const std::domain_error& e) {
                throw std::domain_error(step_context(t, "simultaneous", e));
            }
            emit(tp);
        }
        return x;
    }

    // Decomposed paths: one coefficient axis is swept to zero, then the other.
    // The predictor is re-evaluated at every step along the path.
    const bool residual_first = plan.path_mode == PathMode::kResidualFirst;
    for (int phase = 0; phase < 2; ++phase) {
        const bool residual_phase = (phase == 0) == residual_first;
        for (std::size_t k = 0; k < K; ++k) {
            const int t = ts[k], tp = prev_of(k);
            PathPoint p;
            if (residual_phase) {
                // alpha sweeps; beta stays at its phase level.
                p = PathPoint{schedule.alpha_bar_at(t), residual_first ? bbar_T : 0.0,
                              static_cast<double>(t)};
            } else {
                p = PathPoint{residual_first ? 0.0 : schedule.alpha_bar_at(T),
                              schedule.beta_bar_at(t), static_cast<double>(t)};
            }
            try {
                if (residual_phase) {
                    Tensor res = residual_estimate(plan.method, predictor, x, i_in, p);
                    add_scaled(x, res, -(schedule.alpha_bar_at(t) - schedule.alpha_bar_at(tp)));
                } else {
                    Tensor eps = noise_estimate(plan.method, predictor, x, i_in, p);
                    add_scaled(x, eps, -(schedule.beta_bar_at(t) - schedule.beta_bar_at(tp)));
                }
                ensure_finite(x, "sample");
            } catch (const std::domain_error& e) {
                throw std::domain_error(
                    step_context(t, residual_phase ? "residual-phase" : "noise-phase", e));
            }
            emit(tp);
        }
    }
    return x;
}

void write_reverse_trajectory_csv(const std::string& path,
                                  const std::vector<std::tuple<int, int, Tensor>>& steps) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot open for writing: " + path);
    if (steps.empty()) throw std::invalid_argument("write_reverse_trajectory_csv: no steps");
    const std::size_t w = std::get<2>(steps.front()).row_size();
    os << "id,step,t";
    for (std::size_t d = 0; d < w; ++d) os << ",dim" << d;
    os << '\n';
    for (const auto& [step, t, batch] : steps) {
        for (std::size_t r = 0; r < batch.rows(); ++r) {
            os << r << ',' << step << ',' << t;
            const double* p = batch.data() + r * w;
            for (std::size_t d = 0; d < w; ++d) os << ',' << format_g17(p[d]);
            os << '\n';
        }
    }
}

}  // namespace resdiff
