#pragma once

#include "resdiff/tensor.hpp"

namespace resdiff {

/// Euclidean distance between sample means plus Frobenius distance between
/// sample covariance matrices. Both inputs are [n, d] batches, n >= 2.
double moment_distance(const Tensor& samples_a, const Tensor& samples_b);

/// Energy distance 2 E||a-b|| - E||a-a'|| - E||b-b'|| over all pairs
/// (within-set diagonals excluded). Nonnegative up to estimator noise and
/// sensitive to shape differences that matched moments miss.
double energy_distance(const Tensor& samples_a, const Tensor& samples_b);

struct MsePsnr {
    double mse = 0.0;
    double psnr = 0.0;  // +infinity when mse == 0; peak = 2 for [-1,1] data
};

MsePsnr mse_psnr(const Tensor& pred, const Tensor& target);

}  // namespace resdiff
