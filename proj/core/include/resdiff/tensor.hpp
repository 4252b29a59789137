#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace resdiff {

using Shape = std::vector<std::size_t>;

std::string shape_to_string(const Shape& shape);

/// Dense row-major tensor of 64-bit floats. All numerical state in the
/// library (images, samples, network parameters) lives in one of these.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(Shape shape, double fill = 0.0);
    Tensor(Shape shape, std::vector<double> data);

    static Tensor scalar(double value);
    static Tensor from_vector(std::vector<double> data);

    const Shape& shape() const { return shape_; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    std::vector<double>& values() { return data_; }
    const std::vector<double>& values() const { return data_; }

    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }

    bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

    /// Rows of a batch tensor: leading dimension is the batch.
    std::size_t rows() const;
    std::size_t row_size() const;
    Tensor row(std::size_t r) const;
    void set_row(std::size_t r, const Tensor& values);

private:
    Shape shape_;
    std::vector<double> data_;
};

// Elementwise arithmetic. Shapes must match exactly; mismatches throw with
// both shapes in the message. No implicit reshape or broadcast beyond the
// scalar overloads.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double c);

Tensor operator+(const Tensor& a, const Tensor& b);
Tensor operator-(const Tensor& a, const Tensor& b);
Tensor operator*(const Tensor& a, const Tensor& b);
Tensor operator*(double c, const Tensor& a);

/// a += c * b, without a temporary.
void add_scaled(Tensor& a, const Tensor& b, double c);

double reduce_mean(const Tensor& a);
double reduce_var(const Tensor& a);   // unbiased (n-1 denominator)
double dot(const Tensor& a, const Tensor& b);
double max_abs_diff(const Tensor& a, const Tensor& b);

/// Throws if any element is NaN or infinite; context names the operation.
void ensure_finite(const Tensor& a, const char* context);

void require_same_shape(const Tensor& a, const Tensor& b, const char* context);

}  // namespace resdiff
