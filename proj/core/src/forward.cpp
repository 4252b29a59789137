#include "resdiff/forward.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

#include "resdiff/io.hpp"

namespace resdiff {

void TripletBatch::validate() const {
    require_same_shape(i0, i_in, "triplet");
    require_same_shape(i0, i_res, "triplet");
    if (!eps.empty()) require_same_shape(i0, eps, "triplet");
    for (std::size_t i = 0; i < i0.size(); ++i) {
        if (std::fabs(i_res[i] - (i_in[i] - i0[i])) > 1e-12) {
            throw std::invalid_argument("triplet: i_res != i_in - i0 at index " +
                                        std::to_string(i));
        }
    }
}

DiffusionState forward_step(const DiffusionState& state, const Tensor& i_res,
                            RandomStream& stream) {
    const CoefficientSchedule& s = *state.schedule;
    if (state.t >= s.T) {
        throw std::invalid_argument("forward_step: already at terminal index t=" +
                                    std::to_string(state.t));
    }
    require_same_shape(state.x, i_res, "forward_step");
    const int t = state.t + 1;
    const double a = s.alpha[t];
    const double b = std::sqrt(s.beta_sq[t]);
    Tensor x = state.x;
    add_scaled(x, i_res, a);
    if (b > 0.0) {
        Tensor eps = gaussian(stream, x.shape());
        add_scaled(x, eps, b);
    }
    ensure_finite(x, "forward_step");
    return DiffusionState{std::move(x), t, state.schedule};
}

Tensor synthesize_at(const Tensor& i0, const Tensor& i_res, double alpha_bar,
                     double beta_bar, const Tensor& eps) {
    require_same_shape(i0, i_res, "synthesize");
    require_same_shape(i0, eps, "synthesize");
    Tensor x = i0;
    add_scaled(x, i_res, alpha_bar);
    add_scaled(x, eps, beta_bar);
    ensure_finite(x, "synthesize");
    return x;
}

std::pair<DiffusionState, Tensor> synthesize(const TripletBatch& triplet, int t,
                                             const CoefficientSchedule& schedule,
                                             RandomStream& stream) {
    if (t < 1 || t > schedule.T) {
        throw std::invalid_argument("synthesize: t=" + std::to_string(t) +
                                    " outside {1.." + std::to_string(schedule.T) + "}");
    }
    Tensor eps = gaussian(stream, triplet.i0.shape());
    Tensor x = synthesize_at(triplet.i0, triplet.i_res, schedule.alpha_bar[t],
                             schedule.beta_bar[t], eps);
    return {DiffusionState{std::move(x), t, &schedule}, std::move(eps)};
}

Tensor synthesize_from_input(const Tensor& i_in, const Tensor& i_res, int t,
                             const CoefficientSchedule& schedule, const Tensor& eps) {
    if (t < 1 || t > schedule.T) {
        throw std::invalid_argument("synthesize_from_input: t=" + std::to_string(t) +
                                    " outside {1.." + std::to_string(schedule.T) + "}");
    }
    require_same_shape(i_in, i_res, "synthesize_from_input");
    require_same_shape(i_in, eps, "synthesize_from_input");
    Tensor x = i_in;
    add_scaled(x, i_res, schedule.alpha_bar[t] - 1.0);
    add_scaled(x, eps, schedule.beta_bar[t]);
    ensure_finite(x, "synthesize_from_input");
    return x;
}

MarginalParams marginal_params(int t, const CoefficientSchedule& schedule) {
    if (t < 1 || t > schedule.T) {
        throw std::invalid_argument("marginal_params: t=" + std::to_string(t) +
                                    " outside {1.." + std::to_string(schedule.T) + "}");
    }
    return MarginalParams{1.0, schedule.alpha_bar[t], schedule.beta_bar[t]};
}

void write_trajectory_csv(const std::string& path,
                          const std::vector<std::pair<int, Tensor>>& steps) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot open for writing: " + path);
    if (steps.empty()) throw std::invalid_argument("write_trajectory_csv: no steps");
    const std::size_t w = steps.front().second.row_size();
    os << "id,t";
    for (std::size_t d = 0; d < w; ++d) os << ",dim" << d;
    os << '\n';
    for (const auto& [t, batch] : steps) {
        for (std::size_t r = 0; r < batch.rows(); ++r) {
            os << r << ',' << t;
            const double* p = batch.data() + r * w;
            for (std::size_t d = 0; d < w; ++d) os << ',' << format_g17(p[d]);
            os << '\n';
        }
    }
}

}  // namespace resdiff
