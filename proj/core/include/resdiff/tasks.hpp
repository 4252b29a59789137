#pragma once

#include <functional>
#include <string>

#include "resdiff/forward.hpp"
#include "resdiff/predictor.hpp"
#include "resdiff/random.hpp"
#include "resdiff/tensor.hpp"

namespace resdiff {

enum class TaskMode { kGeneration, kRestoration };

/// Synthetic task definition: where targets come from, how inputs are
/// produced, and how strong the terminal noise is.
struct TaskSpec {
    std::string name;
    TaskMode mode = TaskMode::kGeneration;
    std::size_t data_dim = 0;
    double beta_bar_T_sq = 1.0;
    // Draws [n, data_dim] targets; row i uses stream.derive(i) so sample
    // order never changes the data.
    std::function<Tensor(RandomStream&, std::size_t)> target_sampler;
    // Restoration only: maps a target batch to the degraded input batch.
    std::function<Tensor(const Tensor&)> degradation;
    // Populated for the Gaussian preset; empty tensors otherwise.
    GaussianTaskParams oracle_params;

    bool has_oracle() const { return !oracle_params.mu.empty(); }
};

// Shipped presets:
//   gaussian-2d   N((1.0, -0.5), diag(0.64, 1.44)) generation target
//   mixture-2d    equal mixture of N((-1.5,-0.5), 0.25 I) and N((1.5,0.5), 0.25 I)
//   shade-restore 8x8 random linear-gradient images; input adds a fixed
//                 half-plane shade of amplitude 0.6; beta_bar_T^2 = 0.01
TaskSpec make_task(const std::string& preset);

/// Draws n triplets (targets, inputs, residuals); eps is left empty until
/// synthesis records it.
TripletBatch make_dataset(const TaskSpec& spec, std::size_t n, RandomStream& stream);

/// The half-plane mask used by shade-restore (1 on the shaded columns).
Tensor shade_mask();

}  // namespace resdiff
