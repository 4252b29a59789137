#pragma once

#include <string>
#include <vector>

#include "resdiff/predictor.hpp"
#include "resdiff/random.hpp"
#include "resdiff/tensor.hpp"

namespace resdiff {

/// Sinusoidal embedding of a scalar condition: dim/2 sine channels followed
/// by dim/2 cosine channels, frequencies log-spaced from 1 down to 1/10^4.
std::vector<double> sinusoidal_time_embedding(double value, std::size_t dim);

struct MlpConfig {
    std::size_t data_dim = 0;
    std::size_t cond_dim = 0;    // conditional-input channels, concatenated
    std::size_t embed_dim = 32;
    std::size_t hidden = 128;
    std::size_t heads = 1;       // 2 = stacked residual+noise heads

    std::size_t input_dim() const { return data_dim + cond_dim + embed_dim; }
    std::size_t output_dim() const { return heads * data_dim; }
};

/// Two-hidden-layer tanh perceptron over (state, condition, time-embedding)
/// rows, with hand-written reverse-mode gradients.
class MlpModel {
public:
    struct Cache {
        Tensor input;  // [n, in]
        Tensor h1;     // [n, hidden], post-tanh
        Tensor h2;     // [n, hidden], post-tanh
    };

    struct Gradients {
        Tensor w1, b1, w2, b2, w3, b3;
    };

    MlpModel() = default;

    /// Glorot-uniform weights (+- sqrt(6/(fan_in+fan_out))), zero biases.
    static MlpModel init(const MlpConfig& config, RandomStream& stream);

    const MlpConfig& config() const { return config_; }
    std::size_t parameter_count() const;

    /// Batch forward: input [n, input_dim] -> output [n, output_dim].
    Tensor forward(const Tensor& input) const;
    Tensor forward(const Tensor& input, Cache* cache) const;

    /// Reverse mode from dL/doutput; accumulates nothing (grads overwritten).
    void backward(const Cache& cache, const Tensor& dout, Gradients* grads) const;

    Gradients zero_gradients() const;

    std::vector<std::pair<std::string, Tensor*>> named_parameters();
    std::vector<std::pair<std::string, const Tensor*>> named_parameters() const;
    static std::vector<std::pair<std::string, Tensor*>> named_gradients(Gradients& g);

    /// Versioned text checkpoint with a shape manifest; exact round-trip.
    void save(const std::string& path) const;
    static MlpModel load(const std::string& path);

private:
    MlpConfig config_;
    Tensor w1_, b1_, w2_, b2_, w3_, b3_;  // w: [out, in] row-major
};

enum class PredictorRole { kResidual, kNoise, kBoth };

/// Time-condition fed to the network: either the reparameterized coefficient
/// position (alpha_bar*T for residual estimators, beta_bar*T for noise
/// estimators) or the raw step index for product-form-parity runs.
enum class TimeConditionMode { kReparameterized, kRawT };

std::string to_string(PredictorRole role);
PredictorRole predictor_role_from_string(const std::string& s);

/// Assembles [x | i_in | embed(condition)] rows for the network.
Tensor assemble_mlp_input(const MlpConfig& config, const Tensor& x, const Tensor& i_in,
                          const std::vector<double>& conditions);

class MlpPredictor : public Predictor {
public:
    MlpPredictor(MlpModel model, PredictorRole role, TimeConditionMode mode, double t_scale);

    PredictorOutput output() const override;
    void predict(const Tensor& x, const Tensor& i_in, const PathPoint& p,
                 Tensor* res_hat, Tensor* eps_hat) const override;

    const MlpModel& model() const { return model_; }
    double condition_value(const PathPoint& p, PredictorRole head) const;

private:
    MlpModel model_;
    PredictorRole role_;
    TimeConditionMode mode_;
    double t_scale_;  // the schedule length used to scale coefficient conditions
};

}  // namespace resdiff
