#include "resdiff/mlp.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "resdiff/io.hpp"

namespace resdiff {

std::vector<double> sinusoidal_time_embedding(double value, std::size_t dim) {
    if (dim < 2 || dim % 2 != 0) {
        throw std::invalid_argument("sinusoidal_time_embedding: dim must be even and >= 2");
    }
    const std::size_t half = dim / 2;
    std::vector<double> out(dim);
    for (std::size_t i = 0; i < half; ++i) {
        const double exponent = half > 1 ? static_cast<double>(i) / (half - 1) : 0.0;
        const double freq = std::exp(-std::log(1e4) * exponent);
        out[i] = std::sin(value * freq);
        out[half + i] = std::cos(value * freq);
    }
    return out;
}

namespace {

// y[n, out] = x[n, in] * W^T + b
void linear_forward(const Tensor& x, const Tensor& w, const Tensor& b, Tensor& y) {
    const std::size_t n = x.rows();
    const std::size_t in = x.row_size();
    const std::size_t out = b.size();
    for (std::size_t r = 0; r < n; ++r) {
        const double* xr = x.data() + r * in;
        double* yr = y.data() + r * out;
        for (std::size_t o = 0; o < out; ++o) {
            const double* wr = w.data() + o * in;
            double acc = b[o];
            for (std::size_t i = 0; i < in; ++i) acc += wr[i] * xr[i];
            yr[o] = acc;
        }
    }
}

// Given dL/dy, accumulate dW, db and produce dL/dx.
void linear_backward(const Tensor& x, const Tensor& w, const Tensor& dy, Tensor& dw, Tensor& db,
                     Tensor* dx) {
    const std::size_t n = x.rows();
    const std::size_t in = x.row_size();
    const std::size_t out = dy.row_size();
    for (std::size_t r = 0; r < n; ++r) {
        const double* xr = x.data() + r * in;
        const double* dyr = dy.data() + r * out;
        for (std::size_t o = 0; o < out; ++o) {
            const double g = dyr[o];
            db[o] += g;
            double* dwr = dw.data() + o * in;
            for (std::size_t i = 0; i < in; ++i) dwr[i] += g * xr[i];
        }
        if (dx) {
            double* dxr = dx->data() + r * in;
            for (std::size_t o = 0; o < out; ++o) {
                const double g = dyr[o];
                const double* wr = w.data() + o * in;
                for (std::size_t i = 0; i < in; ++i) dxr[i] += g * wr[i];
            }
        }
    }
}

void tanh_inplace(Tensor& x) {
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = std::tanh(x[i]);
}

Tensor glorot(std::size_t out, std::size_t in, RandomStream& stream) {
    const double bound = std::sqrt(6.0 / static_cast<double>(in + out));
    return uniform(stream, Shape{out, in}, -bound, bound);
}

}  // namespace

MlpModel MlpModel::init(const MlpConfig& config, RandomStream& stream) {
    if (config.data_dim == 0 || config.hidden == 0 || config.heads == 0 || config.heads > 2) {
        throw std::invalid_argument("MlpModel::init: malformed config");
    }
    MlpModel m;
    m.config_ = config;
    m.w1_ = glorot(config.hidden, config.input_dim(), stream);
    m.b1_ = Tensor(Shape{config.hidden});
    m.w2_ = glorot(config.hidden, config.hidden, stream);
    m.b2_ = Tensor(Shape{config.hidden});
    m.w3_ = glorot(config.output_dim(), config.hidden, stream);
    m.b3_ = Tensor(Shape{config.output_dim()});
    return m;
}

std::size_t MlpModel::parameter_count() const {
    return w1_.size() + b1_.size() + w2_.size() + b2_.size() + w3_.size() + b3_.size();
}

Tensor MlpModel::forward(const Tensor& input) const { return forward(input, nullptr); }

Tensor MlpModel::forward(const Tensor& input, Cache* cache) const {
    if (input.row_size() != config_.input_dim()) {
        throw std::invalid_argument("MlpModel::forward: input width " +
                                    std::to_string(input.row_size()) + " != " +
                                    std::to_string(config_.input_dim()));
    }
    const std::size_t n = input.rows();
    Tensor h1(Shape{n, config_.hidden});
    linear_forward(input, w1_, b1_, h1);
    tanh_inplace(h1);
    Tensor h2(Shape{n, config_.hidden});
    linear_forward(h1, w2_, b2_, h2);
    tanh_inplace(h2);
    Tensor out(Shape{n, config_.output_dim()});
    linear_forward(h2, w3_, b3_, out);
    if (cache) {
        cache->input = input;
        cache->h1 = h1;
        cache->h2 = h2;
    }
    return out;
}

void MlpModel::backward(const Cache& cache, const Tensor& dout, Gradients* grads) const {
    *grads = zero_gradients();
    const std::size_t n = cache.input.rows();
    Tensor dh2(Shape{n, config_.hidden});
    linear_backward(cache.h2, w3_, dout, grads->w3, grads->b3, &dh2);
    for (std::size_t i = 0; i < dh2.size(); ++i) dh2[i] *= 1.0 - cache.h2[i] * cache.h2[i];
    Tensor dh1(Shape{n, config_.hidden});
    linear_backward(cache.h1, w2_, dh2, grads->w2, grads->b2, &dh1);
    for (std::size_t i = 0; i < dh1.size(); ++i) dh1[i] *= 1.0 - cache.h1[i] * cache.h1[i];
    linear_backward(cache.input, w1_, dh1, grads->w1, grads->b1, nullptr);
}

MlpModel::Gradients MlpModel::zero_gradients() const {
    Gradients g;
    g.w1 = Tensor(w1_.shape());
    g.b1 = Tensor(b1_.shape());
    g.w2 = Tensor(w2_.shape());
    g.b2 = Tensor(b2_.shape());
    g.w3 = Tensor(w3_.shape());
    g.b3 = Tensor(b3_.shape());
    return g;
}

std::vector<std::pair<std::string, Tensor*>> MlpModel::named_parameters() {
    return {{"w1", &w1_}, {"b1", &b1_}, {"w2", &w2_}, {"b2", &b2_}, {"w3", &w3_}, {"b3", &b3_}};
}

std::vector<std::pair<std::string, const Tensor*>> MlpModel::named_parameters() const {
    return {{"w1", &w1_}, {"b1", &b1_}, {"w2", &w2_}, {"b2", &b2_}, {"w3", &w3_}, {"b3", &b3_}};
}

std::vector<std::pair<std::string, Tensor*>> MlpModel::named_gradients(Gradients& g) {
    return {{"w1", &g.w1}, {"b1", &g.b1}, {"w2", &g.w2}, {"b2", &g.b2}, {"w3", &g.w3}, {"b3", &g.b3}};
}

void MlpModel::save(const std::string& path) const {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot open for writing: " + path);
    os << "# mlp-checkpoint v1\n";
    os << "data_dim," << config_.data_dim << "\ncond_dim," << config_.cond_dim << "\nembed_dim,"
       << config_.embed_dim << "\nhidden," << config_.hidden << "\nheads," << config_.heads
       << "\n";
    for (const auto& [name, tensor] : named_parameters()) {
        os << "tensor," << name;
        for (std::size_t d : tensor->shape()) os << ',' << d;
        os << '\n';
        for (std::size_t i = 0; i < tensor->size(); ++i) {
            os << format_g17((*tensor)[i]) << (i + 1 == tensor->size() ? '\n' : ' ');
        }
    }
}

MlpModel MlpModel::load(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open for reading: " + path);
    std::string line;
    if (!std::getline(is, line) || line != "# mlp-checkpoint v1") {
        throw std::runtime_error("checkpoint: unknown format/version in " + path);
    }
    MlpConfig cfg;
    for (auto* field : {&cfg.data_dim, &cfg.cond_dim, &cfg.embed_dim, &cfg.hidden, &cfg.heads}) {
        if (!std::getline(is, line)) throw std::runtime_error("checkpoint: truncated header");
        const auto pos = line.find(',');
        *field = static_cast<std::size_t>(std::stoul(line.substr(pos + 1)));
    }
    RandomStream dummy(0);
    MlpModel m = MlpModel::init(cfg, dummy);
    for (auto& [name, tensor] : m.named_parameters()) {
        if (!std::getline(is, line) || line.rfind("tensor," + name, 0) != 0) {
            throw std::runtime_error("checkpoint: expected tensor " + name);
        }
        if (!std::getline(is, line)) throw std::runtime_error("checkpoint: missing data for " + name);
        std::istringstream ls(line);
        for (std::size_t i = 0; i < tensor->size(); ++i) {
            if (!(ls >> (*tensor)[i])) throw std::runtime_error("checkpoint: short data for " + name);
        }
    }
    return m;
}

std::string to_string(PredictorRole role) {
    switch (role) {
        case PredictorRole::kResidual: return "residual";
        case PredictorRole::kNoise: return "noise";
        case PredictorRole::kBoth: return "both";
    }
    return "?";
}

PredictorRole predictor_role_from_string(const std::string& s) {
    if (s == "residual") return PredictorRole::kResidual;
    if (s == "noise") return PredictorRole::kNoise;
    if (s == "both") return PredictorRole::kBoth;
    throw std::invalid_argument("unknown predictor role: " + s);
}

Tensor assemble_mlp_input(const MlpConfig& config, const Tensor& x, const Tensor& i_in,
                          const std::vector<double>& conditions) {
    const std::size_t n = x.rows();
    if (x.row_size() != config.data_dim || i_in.row_size() != config.cond_dim ||
        conditions.size() != n || i_in.rows() != n) {
        throw std::invalid_argument("assemble_mlp_input: row shapes do not match config");
    }
    Tensor input(Shape{n, config.input_dim()});
    for (std::size_t r = 0; r < n; ++r) {
        double* dst = input.data() + r * config.input_dim();
        const double* xr = x.data() + r * config.data_dim;
        std::copy(xr, xr + config.data_dim, dst);
        const double* cr = i_in.data() + r * config.cond_dim;
        std::copy(cr, cr + config.cond_dim, dst + config.data_dim);
        const auto emb = sinusoidal_time_embedding(conditions[r], config.embed_dim);
        std::copy(emb.begin(), emb.end(), dst + config.data_dim + config.cond_dim);
    }
    return input;
}

MlpPredictor::MlpPredictor(MlpModel model, PredictorRole role, TimeConditionMode mode,
                           double t_scale)
    : model_(std::move(model)), role_(role), mode_(mode), t_scale_(t_scale) {
    const std::size_t heads = role == PredictorRole::kBoth ? 2 : 1;
    if (model_.config().heads != heads) {
        throw std::invalid_argument("MlpPredictor: model has " +
                                    std::to_string(model_.config().heads) + " heads, role " +
                                    to_string(role) + " needs " + std::to_string(heads));
    }
}

PredictorOutput MlpPredictor::output() const {
    switch (role_) {
        case PredictorRole::kResidual: return PredictorOutput::kResidual;
        case PredictorRole::kNoise: return PredictorOutput::kNoise;
        case PredictorRole::kBoth: return PredictorOutput::kBoth;
    }
    return PredictorOutput::kBoth;
}

double MlpPredictor::condition_value(const PathPoint& p, PredictorRole head) const {
    if (mode_ == TimeConditionMode::kRawT) return p.t_raw;
    // Coefficient-position conditions: residual estimators see the residual
    // progress, noise estimators the noise level. A two-headed network has no
    // single natural coefficient axis and uses the raw index.
    switch (head) {
        case PredictorRole::kResidual: return p.alpha_bar * t_scale_;
        case PredictorRole::kNoise: return p.beta_bar * t_scale_;
        case PredictorRole::kBoth: return p.t_raw;
    }
    return p.t_raw;
}

void MlpPredictor::predict(const Tensor& x, const Tensor& i_in, const PathPoint& p,
                           Tensor* res_hat, Tensor* eps_hat) const {
    if (role_ == PredictorRole::kResidual && eps_hat) {
        throw std::logic_error("MlpPredictor: residual-only network asked for a noise estimate");
    }
    if (role_ == PredictorRole::kNoise && res_hat) {
        throw std::logic_error("MlpPredictor: noise-only network asked for a residual estimate");
    }
    const std::size_t n = x.rows();
    const double cond = condition_value(p, role_);
    const Tensor input =
        assemble_mlp_input(model_.config(), x, i_in, std::vector<double>(n, cond));
    const Tensor out = model_.forward(input);
    const std::size_t d = model_.config().data_dim;
    if (role_ == PredictorRole::kBoth) {
        if (res_hat) {
            *res_hat = Tensor(x.shape());
            for (std::size_t r = 0; r < n; ++r) {
                std::copy(out.data() + r * 2 * d, out.data() + r * 2 * d + d,
                          res_hat->data() + r * d);
            }
        }
        if (eps_hat) {
            *eps_hat = Tensor(x.shape());
            for (std::size_t r = 0; r < n; ++r) {
                std::copy(out.data() + r * 2 * d + d, out.data() + (r + 1) * 2 * d,
                          eps_hat->data() + r * d);
            }
        }
        return;
    }
    Tensor shaped(x.shape(), out.values());
    if (role_ == PredictorRole::kResidual && res_hat) *res_hat = std::move(shaped);
    if (role_ == PredictorRole::kNoise && eps_hat) *eps_hat = std::move(shaped);
}

}  // namespace resdiff
