#include "resdiff/tensor.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>

namespace resdiff {

namespace {

std::size_t shape_product(const Shape& shape) {
    std::size_t n = 1;
    for (std::size_t d : shape) n *= d;
    return n;
}

}  // namespace

std::string shape_to_string(const Shape& shape) {
    std::string out = "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i > 0) out += ",";
        out += std::to_string(shape[i]);
    }
    out += "]";
    return out;
}

Tensor::Tensor(Shape shape, double fill)
    : shape_(std::move(shape)), data_(shape_product(shape_), fill) {
    for (std::size_t d : shape_) {
        if (d == 0) {
            throw std::invalid_argument("tensor shape has a zero dimension: " +
                                        shape_to_string(shape_));
        }
    }
}

Tensor::Tensor(Shape shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
    if (shape_product(shape_) != data_.size()) {
        throw std::invalid_argument("tensor data length " + std::to_string(data_.size()) +
                                    " does not match shape " + shape_to_string(shape_));
    }
}

Tensor Tensor::scalar(double value) { return Tensor(Shape{1}, std::vector<double>{value}); }

Tensor Tensor::from_vector(std::vector<double> data) {
    Shape shape{data.size()};
    return Tensor(std::move(shape), std::move(data));
}

std::size_t Tensor::rows() const { return shape_.empty() ? 0 : shape_[0]; }

std::size_t Tensor::row_size() const {
    if (shape_.empty()) return 0;
    return size() / shape_[0];
}

Tensor Tensor::row(std::size_t r) const {
    if (r >= rows()) {
        throw std::out_of_range("row " + std::to_string(r) + " out of range for shape " +
                                shape_to_string(shape_));
    }
    const std::size_t w = row_size();
    Shape s(shape_.begin() + 1, shape_.end());
    if (s.empty()) s = {1};
    std::vector<double> d(data_.begin() + r * w, data_.begin() + (r + 1) * w);
    return Tensor(std::move(s), std::move(d));
}

void Tensor::set_row(std::size_t r, const Tensor& values) {
    const std::size_t w = row_size();
    if (r >= rows() || values.size() != w) {
        throw std::invalid_argument("set_row: row " + std::to_string(r) + " size " +
                                    std::to_string(values.size()) + " vs row width " +
                                    std::to_string(w));
    }
    std::copy(values.data(), values.data() + w, data_.begin() + r * w);
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* context) {
    if (!a.same_shape(b)) {
        throw std::invalid_argument(std::string(context) + ": shape mismatch " +
                                    shape_to_string(a.shape()) + " vs " +
                                    shape_to_string(b.shape()));
    }
}

Tensor add(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "add");
    Tensor out = a;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += b[i];
    return out;
}

Tensor sub(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "sub");
    Tensor out = a;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] -= b[i];
    return out;
}

Tensor mul(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "mul");
    Tensor out = a;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] *= b[i];
    return out;
}

Tensor scale(const Tensor& a, double c) {
    Tensor out = a;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] *= c;
    return out;
}

Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }
Tensor operator*(double c, const Tensor& a) { return scale(a, c); }

void add_scaled(Tensor& a, const Tensor& b, double c) {
    require_same_shape(a, b, "add_scaled");
    for (std::size_t i = 0; i < a.size(); ++i) a[i] += c * b[i];
}

double reduce_mean(const Tensor& a) {
    if (a.empty()) throw std::invalid_argument("reduce_mean: empty tensor");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i];
    return s / static_cast<double>(a.size());
}

double reduce_var(const Tensor& a) {
    if (a.size() < 2) throw std::invalid_argument("reduce_var: needs at least 2 elements");
    const double m = reduce_mean(a);
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - m;
        s += d * d;
    }
    return s / static_cast<double>(a.size() - 1);
}

double dot(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "dot");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "max_abs_diff");
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        m = std::max(m, std::fabs(a[i] - b[i]));
    }
    return m;
}

void ensure_finite(const Tensor& a, const char* context) {
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (!std::isfinite(a[i])) {
            throw std::domain_error(std::string(context) + ": non-finite value at index " +
                                    std::to_string(i));
        }
    }
}

}  // namespace resdiff
