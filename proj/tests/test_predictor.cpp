#include <doctest.h>

#include <cmath>
#include <memory>

#include "resdiff/predictor.hpp"
#include "resdiff/sampler.hpp"
#include "resdiff/tasks.hpp"

using namespace resdiff;

TEST_CASE("noise-to-residual conversion arithmetic") {
    const Tensor x(Shape{1}, 1.0), i_in(Shape{1}, 0.0), eps(Shape{1}, 1.0);
    const Tensor res = convert_noise_to_residual(eps, x, i_in, 0.5, 0.5);
    CHECK(res[0] == doctest::Approx(-1.0).epsilon(1e-15));
}

TEST_CASE("conversions invert the synthesis identity exactly") {
    RandomStream stream(17);
    const Tensor i0 = gaussian(stream, Shape{5, 3});
    const Tensor i_in = gaussian(stream, Shape{5, 3});
    const Tensor i_res = sub(i_in, i0);
    const Tensor eps = gaussian(stream, Shape{5, 3});
    for (auto [ab, bb] : {std::pair{0.3, 0.2}, {0.7, 0.9}, {0.95, 0.05}}) {
        Tensor x = i_in;
        add_scaled(x, i_res, ab - 1.0);
        add_scaled(x, eps, bb);
        const Tensor res_rec = convert_noise_to_residual(eps, x, i_in, ab, bb);
        CHECK(max_abs_diff(res_rec, i_res) < 1e-12);
        const Tensor eps_rec = convert_residual_to_noise(i_res, x, i_in, ab, bb);
        CHECK(max_abs_diff(eps_rec, eps) < 1e-12);
    }
}

TEST_CASE("singular conversions raise with a remedy in the message") {
    const Tensor x(Shape{1}), i_in(Shape{1}), v(Shape{1});
    try {
        convert_noise_to_residual(v, x, i_in, 1.0, 0.5);
        FAIL("expected singular guard");
    } catch (const std::domain_error& e) {
        CHECK(std::string(e.what()).find("singular") != std::string::npos);
    }
    CHECK_THROWS_AS(convert_noise_to_residual(v, x, i_in, 1.0 - 1e-9, 0.5), std::domain_error);
    CHECK_THROWS_AS(convert_residual_to_noise(v, x, i_in, 0.5, 1e-9), std::domain_error);
    // just outside the guard both directions are defined
    CHECK_NOTHROW(convert_noise_to_residual(v, x, i_in, 1.0 - 1e-7, 0.5));
    CHECK_NOTHROW(convert_residual_to_noise(v, x, i_in, 0.5, 1e-7));
}

TEST_CASE("round trip is the identity away from the guards") {
    RandomStream stream(23);
    for (auto [ab, bb] : {std::pair{0.1, 0.9}, {0.5, 0.5}, {0.9, 0.1}}) {
        const Tensor x = gaussian(stream, Shape{8});
        const Tensor i_in = gaussian(stream, Shape{8});
        const Tensor eps = gaussian(stream, Shape{8});
        const Tensor res = convert_noise_to_residual(eps, x, i_in, ab, bb);
        const Tensor eps_back = convert_residual_to_noise(res, x, i_in, ab, bb);
        CHECK(max_abs_diff(eps_back, eps) < 1e-12);
    }
}

namespace {

// Quadrature reference for the conditional mean: integrates the scalar
// posterior density p(i0 | x) ~ N(i0; mu, s^2) * N(x; c*i0, bb^2) on a fine
// grid (Simpson rule), independent of the closed form under test.
double posterior_mean_quadrature(double x, double mu, double s_sq, double c, double bb) {
    const double lo = mu - 12.0, hi = mu + 12.0;
    const int n = 4000;  // even
    const double h = (hi - lo) / n;
    auto density = [&](double v) {
        const double pr = (v - mu) * (v - mu) / s_sq;
        const double li = (x - c * v) * (x - c * v) / (bb * bb);
        return std::exp(-0.5 * (pr + li));
    };
    double num = 0.0, den = 0.0;
    for (int i = 0; i <= n; ++i) {
        const double v = lo + i * h;
        const double w = (i == 0 || i == n) ? 1.0 : (i % 2 == 1 ? 4.0 : 2.0);
        num += w * v * density(v);
        den += w * density(v);
    }
    return num / den;
}

}  // namespace

TEST_CASE("gaussian posterior mean: worked example and quadrature cross-check") {
    GaussianTaskParams params;
    params.mu = Tensor::from_vector({0.0});
    params.s_sq = Tensor::from_vector({1.0});
    // c = 0.5 corresponds to alpha_bar = 0.5
    auto [res, eps] = gaussian_oracle_predict(Tensor(Shape{1}, 1.0), 0.5, 0.5, params);
    CHECK(res[0] == doctest::Approx(-1.0).epsilon(1e-12));
    CHECK(eps[0] == doctest::Approx((1.0 - 0.5 * 1.0) / 0.5).epsilon(1e-12));

    for (auto [x, mu, s_sq, c, bb] :
         {std::tuple{1.0, 0.0, 1.0, 0.5, 0.5}, {0.3, 1.0, 0.64, 0.2, 0.8},
          {-2.0, -0.5, 1.44, 0.9, 0.3}}) {
        GaussianTaskParams p;
        p.mu = Tensor::from_vector({mu});
        p.s_sq = Tensor::from_vector({s_sq});
        auto [r, e] = gaussian_oracle_predict(Tensor(Shape{1}, x), 1.0 - c, bb, p);
        const double reference = posterior_mean_quadrature(x, mu, s_sq, c, bb);
        CHECK(-r[0] == doctest::Approx(reference).epsilon(1e-8));
    }
}

TEST_CASE("noiseless limit inverts the shrink factor") {
    GaussianTaskParams params;
    params.mu = Tensor::from_vector({0.4});
    params.s_sq = Tensor::from_vector({2.0});
    auto [res, eps] = gaussian_oracle_predict(Tensor(Shape{1}, 0.9), 0.25, 1e-9, params);
    CHECK(-res[0] == doctest::Approx(0.9 / 0.75).epsilon(1e-6));
}

TEST_CASE("posterior mean beats perturbed linear estimates") {
    const TaskSpec task = make_task("gaussian-2d");
    const CoefficientSchedule s = make_power_schedule(1000, 1.0, 1.0, 1.0, 0.0);
    RandomStream stream(41);
    const std::size_t n = 20000;
    const TripletBatch data = make_dataset(task, n, stream);
    RandomStream draw = stream.derive(1);
    const Tensor eps = gaussian(draw, data.i0.shape());
    const int t = 500;
    const Tensor x = synthesize_at(data.i0, data.i_res, s.alpha_bar_at(t), s.beta_bar_at(t), eps);
    auto [res_hat, eps_hat] =
        gaussian_oracle_predict(x, s.alpha_bar_at(t), s.beta_bar_at(t), task.oracle_params);
    auto mse = [&](const Tensor& pred) {
        double acc = 0.0;
        for (std::size_t i = 0; i < pred.size(); ++i) {
            const double d = pred[i] - data.i_res[i];
            acc += d * d;
        }
        return acc / static_cast<double>(pred.size());
    };
    const double base = mse(res_hat);
    RandomStream perturb(99);
    for (int k = 0; k < 20; ++k) {
        const double gain = 1.0 + (perturb.next_uniform() < 0.5 ? -1.0 : 1.0) *
                                      (0.05 + 0.1 * perturb.next_uniform());
        const double shift = 0.1 * (perturb.next_uniform() - 0.5);
        Tensor alt = res_hat;
        for (std::size_t i = 0; i < alt.size(); ++i) alt[i] = gain * alt[i] + shift;
        CHECK(mse(alt) > base);
    }
}

namespace {

// A noise view of a residual estimator, algebraically consistent with it.
class ConvertedNoiseView : public Predictor {
public:
    explicit ConvertedNoiseView(std::shared_ptr<const Predictor> inner)
        : inner_(std::move(inner)) {}
    PredictorOutput output() const override { return PredictorOutput::kNoise; }
    void predict(const Tensor& x, const Tensor& i_in, const PathPoint& p, Tensor* res_hat,
                 Tensor* eps_hat) const override {
        Tensor res;
        inner_->predict(x, i_in, p, &res, nullptr);
        if (eps_hat) *eps_hat = convert_residual_to_noise(res, x, i_in, p.alpha_bar, p.beta_bar);
        if (res_hat) *res_hat = std::move(res);
    }

private:
    std::shared_ptr<const Predictor> inner_;
};

}  // namespace

TEST_CASE("residual and noise sampling agree when the estimates are consistent") {
    // Deriving the other quantity through the synthesis identity makes the
    // two single-prediction methods trace identical trajectories.
    const TaskSpec task = make_task("gaussian-2d");
    const DdimSchedule d = make_ddim_schedule(400, DdimFamily::kLinear);
    const CoefficientSchedule sched = schedule_from_ddim(d, 0.0, VarianceMode::kSumConstrained);
    auto oracle = std::make_shared<GaussianOraclePredictor>(task.oracle_params);
    const ConvertedNoiseView as_noise(oracle);

    const Tensor i_in(Shape{16, 2});
    RandomStream init(7);
    const Tensor noise = gaussian(init, Shape{16, 2});
    SampleOptions opts;
    opts.init_noise = &noise;

    SamplingPlan res_plan{uniform_timesteps(400, 20), 0.0, SamplingMethod::kResidual,
                          PathMode::kSimultaneous};
    SamplingPlan eps_plan = res_plan;
    eps_plan.method = SamplingMethod::kNoise;

    RandomStream r1(1), r2(1);
    const Tensor via_res = sample(res_plan, *oracle, i_in, sched, r1, opts);
    const Tensor via_eps = sample(eps_plan, as_noise, i_in, sched, r2, opts);
    CHECK(max_abs_diff(via_res, via_eps) < 1e-10);
}

TEST_CASE("paired predictor validates its components") {
    const TaskSpec task = make_task("gaussian-2d");
    auto oracle = std::make_shared<GaussianOraclePredictor>(task.oracle_params);
    const PairedPredictor pair(oracle, oracle);
    CHECK(pair.independent_pair());
    CHECK(pair.output() == PredictorOutput::kBoth);
    auto noise_only = std::make_shared<ConvertedNoiseView>(oracle);
    CHECK_THROWS(PairedPredictor(noise_only, oracle));
}
