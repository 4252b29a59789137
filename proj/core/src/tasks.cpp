#include "resdiff/tasks.hpp"

#include <stdexcept>

namespace resdiff {

namespace {

constexpr std::size_t kImageSide = 8;
constexpr double kShadeAmplitude = 0.6;

Tensor gaussian2d_sampler(RandomStream& stream, std::size_t n) {
    const double mu[2] = {1.0, -0.5};
    const double sd[2] = {0.8, 1.2};
    Tensor out(Shape{n, 2});
    for (std::size_t i = 0; i < n; ++i) {
        RandomStream row = stream.derive(i);
        for (std::size_t d = 0; d < 2; ++d) {
            out[i * 2 + d] = mu[d] + sd[d] * row.next_gaussian();
        }
    }
    return out;
}

Tensor mixture2d_sampler(RandomStream& stream, std::size_t n) {
    const double centers[2][2] = {{-1.5, -0.5}, {1.5, 0.5}};
    const double sd = 0.5;
    Tensor out(Shape{n, 2});
    for (std::size_t i = 0; i < n; ++i) {
        RandomStream row = stream.derive(i);
        const std::size_t comp = row.next_uniform() < 0.5 ? 0 : 1;
        for (std::size_t d = 0; d < 2; ++d) {
            out[i * 2 + d] = centers[comp][d] + sd * row.next_gaussian();
        }
    }
    return out;
}

// Random linear-gradient images: i0[r,c] = gr*u(r) + gc*u(c) + b with
// u mapping {0..7} onto [-1, 1]; coefficients keep values inside [-0.7, 0.7].
Tensor gradient_image_sampler(RandomStream& stream, std::size_t n) {
    const std::size_t dim = kImageSide * kImageSide;
    Tensor out(Shape{n, dim});
    for (std::size_t i = 0; i < n; ++i) {
        RandomStream row = stream.derive(i);
        const double gr = -0.3 + 0.6 * row.next_uniform();
        const double gc = -0.3 + 0.6 * row.next_uniform();
        const double b = -0.1 + 0.2 * row.next_uniform();
        for (std::size_t r = 0; r < kImageSide; ++r) {
            for (std::size_t c = 0; c < kImageSide; ++c) {
                const double ur = 2.0 * static_cast<double>(r) / (kImageSide - 1) - 1.0;
                const double uc = 2.0 * static_cast<double>(c) / (kImageSide - 1) - 1.0;
                out[i * dim + r * kImageSide + c] = gr * ur + gc * uc + b;
            }
        }
    }
    return out;
}

}  // namespace

Tensor shade_mask() {
    const std::size_t dim = kImageSide * kImageSide;
    Tensor mask(Shape{dim});
    for (std::size_t r = 0; r < kImageSide; ++r) {
        for (std::size_t c = kImageSide / 2; c < kImageSide; ++c) {
            mask[r * kImageSide + c] = 1.0;
        }
    }
    return mask;
}

TaskSpec make_task(const std::string& preset) {
    TaskSpec spec;
    spec.name = preset;
    if (preset == "gaussian-2d") {
        spec.mode = TaskMode::kGeneration;
        spec.data_dim = 2;
        spec.beta_bar_T_sq = 1.0;
        spec.target_sampler = gaussian2d_sampler;
        spec.oracle_params.mu = Tensor::from_vector({1.0, -0.5});
        spec.oracle_params.s_sq = Tensor::from_vector({0.64, 1.44});
        return spec;
    }
    if (preset == "mixture-2d") {
        spec.mode = TaskMode::kGeneration;
        spec.data_dim = 2;
        spec.beta_bar_T_sq = 1.0;
        spec.target_sampler = mixture2d_sampler;
        return spec;
    }
    if (preset == "shade-restore") {
        spec.mode = TaskMode::kRestoration;
        spec.data_dim = kImageSide * kImageSide;
        spec.beta_bar_T_sq = 0.01;
        spec.target_sampler = gradient_image_sampler;
        spec.degradation = [](const Tensor& i0) {
            const Tensor mask = shade_mask();
            Tensor i_in = i0;
            const std::size_t dim = mask.size();
            for (std::size_t r = 0; r < i0.rows(); ++r) {
                for (std::size_t c = 0; c < dim; ++c) {
                    i_in[r * dim + c] -= kShadeAmplitude * mask[c];
                }
            }
            return i_in;
        };
        return spec;
    }
    throw std::invalid_argument("unknown task preset: " + preset);
}

TripletBatch make_dataset(const TaskSpec& spec, std::size_t n, RandomStream& stream) {
    if (n == 0) throw std::invalid_argument("make_dataset: n must be >= 1");
    TripletBatch batch;
    batch.i0 = spec.target_sampler(stream, n);
    if (spec.mode == TaskMode::kGeneration) {
        batch.i_in = Tensor(batch.i0.shape());
    } else {
        if (!spec.degradation) throw std::logic_error("restoration task without degradation");
        batch.i_in = spec.degradation(batch.i0);
    }
    batch.i_res = sub(batch.i_in, batch.i0);
    return batch;
}

}  // namespace resdiff
