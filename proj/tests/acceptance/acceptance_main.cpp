// End-to-end acceptance suite. Each criterion prints one PASS/FAIL line with
// the measured statistic and its pinned bound; the process exits with the
// number of failing criteria.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "resdiff/forward.hpp"
#include "resdiff/metrics.hpp"
#include "resdiff/mlp.hpp"
#include "resdiff/predictor.hpp"
#include "resdiff/sampler.hpp"
#include "resdiff/schedule.hpp"
#include "resdiff/tasks.hpp"
#include "resdiff/training.hpp"

using namespace resdiff;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

std::string fmt(const char* pattern, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, pattern, args...);
    return buf;
}

// --- 1. Noise-prediction sampling equals the product-form reference ---------

Outcome criterion_ddim_equivalence() {
    const auto start = std::chrono::steady_clock::now();
    const int T = 1000;
    const DdimSchedule ddim = make_ddim_schedule(T, DdimFamily::kLinear);
    const std::size_t dim = 8;
    MlpConfig mcfg{dim, dim, 32, 24, 1};
    RandomStream init(2001);
    const MlpModel net = MlpModel::init(mcfg, init);  // the shared fixed noise estimator
    const Tensor i_in(Shape{4, dim});

    double worst = 0.0;
    for (const int steps : {10, 20, 100}) {
        for (const double eta : {0.0, 1.0}) {
            const CoefficientSchedule coeff = schedule_from_ddim(ddim, eta, VarianceMode::kDdim);
            const auto ts = uniform_timesteps(T, steps);
            RandomStream noise_base(5000 + static_cast<std::uint64_t>(steps));
            Tensor x_coeff = gaussian(noise_base, Shape{4, dim});
            Tensor x_ref = x_coeff;
            for (std::size_t k = 0; k < ts.size(); ++k) {
                const int t = ts[k], tp = k + 1 < ts.size() ? ts[k + 1] : 0;
                const double sigma = gap_sigma(coeff, t, tp, eta);
                Tensor shared;
                const Tensor* noise = nullptr;
                if (sigma > 0.0) {
                    RandomStream ns = noise_base.derive(static_cast<std::uint64_t>(t));
                    shared = gaussian(ns, x_coeff.shape());
                    noise = &shared;
                }
                auto predict = [&](const Tensor& x) {
                    const Tensor input = assemble_mlp_input(
                        mcfg, x, i_in, std::vector<double>(x.rows(), static_cast<double>(t)));
                    return Tensor(x.shape(), net.forward(input).values());
                };
                const Tensor eps_a = predict(x_coeff);
                const Tensor res_a = convert_noise_to_residual(
                    eps_a, x_coeff, i_in, coeff.alpha_bar_at(t), coeff.beta_bar_at(t));
                x_coeff = reverse_step_with_noise(x_coeff, res_a, eps_a, t, tp, coeff, eta, noise);
                const Tensor eps_b = predict(x_ref);
                x_ref = ddim_equivalent_step(x_ref, eps_b, t, tp, ddim, sigma, noise);
                worst = std::max(worst, max_abs_diff(x_coeff, x_ref));
            }
        }
    }
    const double elapsed = seconds_since(start);
    return {worst <= 1e-9 && elapsed < 10.0,
            fmt("max step deviation %.3g (bound 1e-9), %.1fs (cap 10s)", worst, elapsed)};
}

// --- 2. Reverse transfer preserves the forward marginal ---------------------

Outcome criterion_marginal_preservation() {
    const auto start = std::chrono::steady_clock::now();
    const std::size_t n = 100000;
    const int T = 1000;
    const DdimSchedule lin = make_ddim_schedule(T, DdimFamily::kLinear);
    const DdimSchedule sl = make_ddim_schedule(T, DdimFamily::kScaledLinear);
    const DdimSchedule sc = make_ddim_schedule(T, DdimFamily::kSquaredCosine);
    const std::vector<std::pair<std::string, CoefficientSchedule>> families = {
        {"power-a1", make_power_schedule(T, 1, 1, 1.0, 1.0)},
        {"power-a0", make_power_schedule(T, 0, 0, 1.0, 1.0)},
        {"linear", schedule_from_ddim(lin, 1.0, VarianceMode::kSumConstrained)},
        {"scaled-linear", schedule_from_ddim(sl, 1.0, VarianceMode::kSumConstrained)},
        {"squared-cosine", schedule_from_ddim(sc, 1.0, VarianceMode::kSumConstrained)},
    };
    const std::pair<int, int> pairs[5] = {{1000, 500}, {500, 250}, {800, 300}, {100, 1}, {50, 49}};
    RandomStream stream(77001);
    double worst_ratio = 0.0;
    std::string worst_at = "-";
    const double i0v = 0.4, iresv = -1.1;
    for (const auto& [name, sched] : families) {
        for (const auto& [t, tp] : pairs) {
            Tensor x(Shape{n});
            const double ab = sched.alpha_bar_at(t), bb = sched.beta_bar_at(t);
            for (std::size_t i = 0; i < n; ++i) x[i] = i0v + ab * iresv + bb * stream.next_gaussian();
            auto [mean, sigma] =
                posterior_params(x, Tensor(Shape{n}, i0v), Tensor(Shape{n}, iresv), t, tp, sched,
                                 1.0);
            Tensor xp = mean;
            if (sigma > 0.0) {
                for (std::size_t i = 0; i < n; ++i) xp[i] += sigma * stream.next_gaussian();
            }
            const double bb_p = sched.beta_bar_at(tp);
            const double mean_err = std::fabs(reduce_mean(xp) - (i0v + sched.alpha_bar_at(tp) * iresv));
            const double mean_bound = 4.0 * bb_p / std::sqrt(static_cast<double>(n));
            const double var_err = std::fabs(reduce_var(xp) / (bb_p * bb_p) - 1.0);
            const double ratio = std::max(mean_err / mean_bound, var_err / 0.02);
            if (ratio > worst_ratio) {
                worst_ratio = ratio;
                worst_at = name + fmt(" (t=%d,t'=%d)", t, tp);
            }
        }
    }
    const double elapsed = seconds_since(start);
    return {worst_ratio <= 1.0 && elapsed < 30.0,
            fmt("worst bound ratio %.3f at %s, %.1fs (cap 30s)", worst_ratio, worst_at.c_str(),
                elapsed)};
}

// --- 3. Stepwise forward matches the closed form -----------------------------

Outcome criterion_forward_telescoping() {
    const int T = 50;
    const CoefficientSchedule sched = make_power_schedule(T, 1, 1, 1.0, 1.0);
    const std::size_t n = 100000;
    TripletBatch triplet;
    triplet.i0 = Tensor(Shape{n, 1}, 0.3);
    triplet.i_in = Tensor(Shape{n, 1}, 1.1);
    triplet.i_res = sub(triplet.i_in, triplet.i0);
    RandomStream stream(31001);
    DiffusionState state{triplet.i0, 0, &sched};
    Tensor mid;
    for (int t = 1; t <= T; ++t) {
        state = forward_step(state, triplet.i_res, stream);
        if (t == T / 2) mid = state.x;
    }
    RandomStream closed_stream(31002);
    double worst_ratio = 0.0;
    for (const int t : {T / 2, T}) {
        RandomStream draw = closed_stream.derive(static_cast<std::uint64_t>(t));
        auto [closed, eps] = synthesize(triplet, t, sched, draw);
        const Tensor& step_x = t == T ? state.x : mid;
        const double bb = sched.beta_bar_at(t);
        const double want_mean = 0.3 + sched.alpha_bar_at(t) * 0.8;
        const double mean_bound = 4.0 * bb / std::sqrt(static_cast<double>(n));
        const Tensor* views[2] = {&step_x, &closed.x};
        for (const Tensor* x : views) {
            worst_ratio = std::max(worst_ratio,
                                   std::fabs(reduce_mean(*x) - want_mean) / mean_bound);
            worst_ratio = std::max(worst_ratio,
                                   std::fabs(reduce_var(*x) / (bb * bb) - 1.0) / 0.02);
        }
    }
    return {worst_ratio <= 1.0, fmt("worst bound ratio %.3f over t in {25, 50}", worst_ratio)};
}

// --- 4. Per-step reverse variances respect the terminal budget ---------------

Outcome criterion_sum_constrained() {
    const int T = 1000;
    const DdimSchedule lin = make_ddim_schedule(T, DdimFamily::kLinear);
    const DdimSchedule sl = make_ddim_schedule(T, DdimFamily::kScaledLinear);
    const DdimSchedule sc = make_ddim_schedule(T, DdimFamily::kSquaredCosine);
    double worst_excess = -1.0;
    for (const double eta : {0.25, 0.5, 1.0}) {
        std::vector<CoefficientSchedule> shipped = {
            make_power_schedule(T, 1, 1, 1.0, eta),
            make_power_schedule(T, 0, 0, 1.0, eta),
            make_power_schedule(T, 2, 2, 1.0, eta),
            make_power_schedule(T, 1, 1, 0.01, eta),
            schedule_from_ddim(lin, eta, VarianceMode::kSumConstrained),
            schedule_from_ddim(sl, eta, VarianceMode::kSumConstrained),
            schedule_from_ddim(sc, eta, VarianceMode::kSumConstrained),
        };
        for (const auto& s : shipped) {
            double total = 0.0;
            for (int t = 1; t <= T; ++t) total += s.sigma[t] * s.sigma[t];
            worst_excess = std::max(worst_excess,
                                    total - s.beta_bar_at(T) * s.beta_bar_at(T));
        }
    }
    double worst_dominance = 0.0;
    for (const DdimSchedule* d : {&lin, &sl, &sc}) {
        const CoefficientSchedule a = schedule_from_ddim(*d, 1.0, VarianceMode::kSumConstrained);
        const CoefficientSchedule b = schedule_from_ddim(*d, 1.0, VarianceMode::kDdim);
        for (int t = 1; t <= T; ++t) {
            worst_dominance = std::max(worst_dominance,
                                       a.sigma[t] * a.sigma[t] - b.sigma[t] * b.sigma[t]);
        }
    }
    return {worst_excess <= 1e-12 && worst_dominance <= 1e-9,
            fmt("budget excess %.3g (bound 1e-12), dominance excess %.3g (bound 1e-9)",
                worst_excess, worst_dominance)};
}

// --- 5. Ground-truth replay reverses exactly --------------------------------

Outcome criterion_reversibility() {
    const int T = 1000;
    const DdimSchedule d = make_ddim_schedule(T, DdimFamily::kLinear);
    const CoefficientSchedule converted = schedule_from_ddim(d, 0.0, VarianceMode::kSumConstrained);
    const CoefficientSchedule power = make_power_schedule(T, 1, 1, 1.0, 0.0);
    const TaskSpec task = make_task("gaussian-2d");
    RandomStream stream(88001);
    const TripletBatch data = make_dataset(task, 8, stream);
    const Tensor eps = gaussian(stream, data.i0.shape());
    const GroundTruthPredictor truth(data.i_res, eps);
    double worst = 0.0;
    std::size_t combos = 0;
    auto run_matrix = [&](const CoefficientSchedule& sched, SamplingMethod method) {
        const Tensor x_T = synthesize_at(data.i0, data.i_res, sched.alpha_bar_at(T),
                                         sched.beta_bar_at(T), eps);
        for (const auto path : {PathMode::kSimultaneous, PathMode::kResidualFirst,
                                PathMode::kNoiseFirst}) {
            for (const int steps : {2, 5, 10, T}) {
                SamplingPlan plan{uniform_timesteps(T, steps), 0.0, method, path};
                SampleOptions opts;
                opts.init_state = &x_T;
                RandomStream run(1);
                const Tensor out = sample(plan, truth, data.i_in, sched, run, opts);
                worst = std::max(worst, max_abs_diff(out, data.i0));
                ++combos;
            }
        }
    };
    for (const auto method :
         {SamplingMethod::kResidual, SamplingMethod::kNoise, SamplingMethod::kResidualNoise}) {
        run_matrix(converted, method);
    }
    run_matrix(power, SamplingMethod::kResidual);
    run_matrix(power, SamplingMethod::kResidualNoise);
    return {worst <= 1e-10,
            fmt("max |out - target| %.3g over %zu combinations (bound 1e-10)", worst, combos)};
}

// --- 6. Analytic-estimator generation hits the target moments ----------------

Outcome criterion_oracle_generation() {
    const auto start = std::chrono::steady_clock::now();
    const TaskSpec task = make_task("gaussian-2d");
    const CoefficientSchedule sched = make_power_schedule(1000, 1, 1, 1.0, 0.0);
    const GaussianOraclePredictor oracle(task.oracle_params);
    SamplingPlan plan{uniform_timesteps(1000, 100), 0.0, SamplingMethod::kResidualNoise,
                      PathMode::kSimultaneous};
    const std::size_t n = 10000;
    RandomStream stream(42001);
    const Tensor out = sample(plan, oracle, Tensor(Shape{n, 2}), sched, stream);

    const double mu[2] = {1.0, -0.5};
    const double var[2] = {0.64, 1.44};
    double mean_hat[2] = {0.0, 0.0};
    for (std::size_t i = 0; i < n; ++i) {
        mean_hat[0] += out[i * 2];
        mean_hat[1] += out[i * 2 + 1];
    }
    mean_hat[0] /= n;
    mean_hat[1] /= n;
    double cov[3] = {0.0, 0.0, 0.0};  // xx, yy, xy
    for (std::size_t i = 0; i < n; ++i) {
        const double dx = out[i * 2] - mean_hat[0];
        const double dy = out[i * 2 + 1] - mean_hat[1];
        cov[0] += dx * dx;
        cov[1] += dy * dy;
        cov[2] += dx * dy;
    }
    for (double& c : cov) c /= static_cast<double>(n - 1);

    const double mean_err = std::hypot(mean_hat[0] - mu[0], mean_hat[1] - mu[1]);
    const double mean_bound = 0.03 * std::hypot(mu[0], mu[1]) + 0.05;
    const double cov_err = std::sqrt((cov[0] - var[0]) * (cov[0] - var[0]) +
                                     (cov[1] - var[1]) * (cov[1] - var[1]) + 2.0 * cov[2] * cov[2]);
    const double cov_norm = std::sqrt(var[0] * var[0] + var[1] * var[1]);
    const double elapsed = seconds_since(start);
    return {mean_err <= mean_bound && cov_err <= 0.05 * cov_norm && elapsed < 60.0,
            fmt("mean err %.4f (bound %.4f), cov err %.3f%% (bound 5%%), %.1fs (cap 60s)",
                mean_err, mean_bound, 100.0 * cov_err / cov_norm, elapsed)};
}

// --- 7. Trained restoration beats the degraded input -------------------------

Outcome criterion_restoration() {
    const auto start = std::chrono::steady_clock::now();
    const TaskSpec task = make_task("shade-restore");
    const CoefficientSchedule sched = make_power_schedule(1000, 1, 1, 0.01, 0.0);
    MlpConfig mcfg{64, 64, 32, 128, 1};
    RandomStream root(2024001);
    RandomStream init = root.derive(0);
    MlpModel model = MlpModel::init(mcfg, init);
    AdamState adam(model);
    AdamConfig acfg;
    acfg.lr = 2e-3;
    const LossConfig l1{1, 0, Norm::kL1};
    for (long it = 1; it <= 5000; ++it) {  // batch size 1, absolute loss
        RandomStream ds = root.derive(1000000 + static_cast<std::uint64_t>(it));
        const TripletBatch data = make_dataset(task, 1, ds);
        RandomStream ts = root.derive(2000000 + static_cast<std::uint64_t>(it));
        const TrainingBatch batch = sample_training_batch(data.i0, data.i_in, sched, ts, false);
        (void)backprop_and_step(model, batch, l1, PredictorRole::kResidual,
                                TimeConditionMode::kReparameterized, 1000.0, adam, acfg, it);
    }

    RandomStream test_stream = root.derive(7777);
    const TripletBatch test = make_dataset(task, 256, test_stream);
    const MsePsnr degraded = mse_psnr(test.i_in, test.i0);

    const MlpPredictor as_residual(model, PredictorRole::kResidual,
                                   TimeConditionMode::kReparameterized, 1000.0);
    SamplingPlan res_plan{uniform_timesteps(1000, 5), 0.0, SamplingMethod::kResidual,
                          PathMode::kSimultaneous};
    RandomStream run1 = root.derive(8881);
    const Tensor restored = sample(res_plan, as_residual, test.i_in, sched, run1);
    const MsePsnr via_res = mse_psnr(restored, test.i0);

    // The same checkpoint serving the noise role, on the beta-retargeted
    // converted schedule (residual progress < 1 at T keeps the noise-side
    // conversion defined). Direction only: residual prediction must win.
    const DdimSchedule d = make_ddim_schedule(1000, DdimFamily::kLinear);
    const CoefficientSchedule comparison = adjust_schedule(
        schedule_from_ddim(d, 0.0, VarianceMode::kSumConstrained), AdjustMode::kBeta, 1.0, 0.01);
    const MlpPredictor as_noise(model, PredictorRole::kNoise,
                                TimeConditionMode::kReparameterized, 1000.0);
    SamplingPlan eps_plan{uniform_timesteps(1000, 5), 0.0, SamplingMethod::kNoise,
                          PathMode::kSimultaneous};
    RandomStream run2 = root.derive(8882);
    const Tensor via_noise_x = sample(eps_plan, as_noise, test.i_in, comparison, run2);
    const MsePsnr via_noise = mse_psnr(via_noise_x, test.i0);
    SamplingPlan res_plan_cmp = res_plan;
    res_plan_cmp.method = SamplingMethod::kResidual;
    RandomStream run3 = root.derive(8883);
    const Tensor via_res_cmp_x = sample(res_plan_cmp, as_residual, test.i_in, comparison, run3);
    const MsePsnr via_res_cmp = mse_psnr(via_res_cmp_x, test.i0);

    const double elapsed = seconds_since(start);
    const bool pass = via_res.mse <= 0.1 * degraded.mse && via_res_cmp.psnr > via_noise.psnr &&
                      elapsed < 300.0;
    return {pass,
            fmt("mse %.5f vs degraded %.5f (bound 0.1x), psnr res %.1f > noise-role %.1f, "
                "%.0fs (cap 300s)",
                via_res.mse, degraded.mse, via_res_cmp.psnr, via_noise.psnr, elapsed)};
}

// --- 8. Objective selection resolves in the right direction ------------------

Outcome criterion_objective_selection() {
#ifndef RESDIFF_CLI_PATH
    return {false, "CLI binary path not configured"};
#else
    const std::string cli = RESDIFF_CLI_PATH;
    std::string detail;
    bool pass = true;
    for (const auto& [preset, extra, want] :
         {std::tuple{"mixture-2d", " --set loss=l2", "sm-n"},
          std::tuple{"shade-restore", " --set loss=l1", "sm-res"}}) {
        for (const int seed : {1, 2, 3}) {
            const std::string out = "/tmp/resdiff_acceptance_aosa_" + std::string(preset) + "_" +
                                    std::to_string(seed);
            const std::string log = out + "/stdout.txt";
            if (std::system(("mkdir -p " + out).c_str()) != 0) {
                return {false, "could not create " + out};
            }
            const std::string cmd = cli + " aosa --out " + out + " --set task=" + preset + extra +
                                    " --set iterations=5000 --set seed=" + std::to_string(seed) +
                                    " > " + log + " 2>&1";
            const int status = std::system(cmd.c_str());
            std::ifstream is(log);
            std::string text((std::istreambuf_iterator<char>(is)),
                             std::istreambuf_iterator<char>());
            const auto pos = text.find("resolved=");
            std::string resolved = "missing", iteration = "?";
            if (pos != std::string::npos) {
                std::istringstream line(text.substr(pos));
                std::string tok;
                line >> tok;
                resolved = tok.substr(9);
                if (line >> tok && tok.rfind("iteration=", 0) == 0) iteration = tok.substr(10);
            }
            const bool ok = WEXITSTATUS(status) == 0 && resolved == want;
            pass = pass && ok;
            detail += fmt("%s/seed%d->%s@%s ", preset, seed, resolved.c_str(), iteration.c_str());
        }
    }
    return {pass, detail};
#endif
}

// --- 9. Analytic gradients match central differences -------------------------

Outcome criterion_gradients() {
    const TaskSpec task = make_task("gaussian-2d");
    const CoefficientSchedule sched = make_power_schedule(500, 1, 1, 1.0, 0.0);
    RandomStream stream(90001);
    const TripletBatch data = make_dataset(task, 12, stream);
    RandomStream ts = stream.derive(1);
    TrainingBatch batch = sample_training_batch(data.i0, data.i_in, sched, ts, true);
    MlpConfig mcfg{2, 2, 8, 12, 1};
    RandomStream init = stream.derive(2);
    const MlpModel model = MlpModel::init(mcfg, init);
    RandomStream pick = stream.derive(3);

    const auto l2 = grad_check(model, batch, LossConfig{1, 0, Norm::kL2},
                               PredictorRole::kResidual, TimeConditionMode::kReparameterized,
                               500.0, 400, pick);
    // absolute-loss check away from subgradient kinks: fresh-init predictions
    // sit O(1) from the targets, far beyond the differencing step
    const auto l1 = grad_check(model, batch, LossConfig{1, 0, Norm::kL1},
                               PredictorRole::kResidual, TimeConditionMode::kReparameterized,
                               500.0, 400, pick);
    const auto gated = grad_check_auto(model, batch, 0.43, TimeConditionMode::kRawT, 500.0, 400,
                                       pick);
    const double worst = std::max({l2.max_rel_error, l1.max_rel_error, gated.max_rel_error});
    return {worst < 1e-5,
            fmt("max rel err: squared %.2g, absolute %.2g, gated %.2g (gate %.2g), bound 1e-5",
                l2.max_rel_error, l1.max_rel_error, gated.max_rel_error,
                gated.lambda_rel_error)};
}

// --- 10. Conversion and schedule round trips ---------------------------------

Outcome criterion_round_trips() {
    RandomStream stream(91001);
    double worst = 0.0;
    // estimate conversions
    for (const auto& [ab, bb] : {std::pair{0.2, 0.8}, {0.5, 0.5}, {0.9, 0.1}}) {
        const Tensor x = gaussian(stream, Shape{6});
        const Tensor i_in = gaussian(stream, Shape{6});
        const Tensor eps = gaussian(stream, Shape{6});
        const Tensor res = convert_noise_to_residual(eps, x, i_in, ab, bb);
        const Tensor eps_back = convert_residual_to_noise(res, x, i_in, ab, bb);
        worst = std::max(worst, max_abs_diff(eps_back, eps));
    }
    // schedule transformation
    const DdimSchedule d = make_ddim_schedule(1000, DdimFamily::kLinear);
    const DdimSchedule back =
        schedule_to_ddim(schedule_from_ddim(d, 0.5, VarianceMode::kSumConstrained));
    for (int t = 1; t <= 1000; ++t) {
        worst = std::max(worst, std::fabs(back.at(t) - d.at(t)));
    }
    // declared singular guards raise
    int raised = 0;
    const Tensor v(Shape{1}), x(Shape{1}), i_in(Shape{1});
    try {
        (void)convert_noise_to_residual(v, x, i_in, 1.0, 0.5);
    } catch (const std::domain_error&) {
        ++raised;
    }
    try {
        (void)convert_residual_to_noise(v, x, i_in, 0.5, 0.0);
    } catch (const std::domain_error&) {
        ++raised;
    }
    try {
        CoefficientSchedule off = make_power_schedule(4, 1, 1, 1.0, 0.0);
        off.beta_bar = {0.0, 0.5, 0.5, 0.5, 0.5};
        (void)schedule_to_ddim(off);
    } catch (const std::domain_error&) {
        ++raised;
    }
    try {
        const CoefficientSchedule power = make_power_schedule(50, 1, 1, 1.0, 0.0);
        const TaskSpec task = make_task("gaussian-2d");
        RandomStream ds(1);
        const TripletBatch data = make_dataset(task, 2, ds);
        const Tensor eps = gaussian(ds, data.i0.shape());
        const GroundTruthPredictor truth(data.i_res, eps);
        SamplingPlan plan{uniform_timesteps(50, 5), 0.0, SamplingMethod::kNoise,
                          PathMode::kSimultaneous};
        RandomStream run(2);
        (void)sample(plan, truth, data.i_in, power, run);
    } catch (const std::domain_error&) {
        ++raised;
    }
    return {worst <= 1e-12 && raised == 4,
            fmt("max round-trip deviation %.3g (bound 1e-12), %d/4 singular guards raised",
                worst, raised)};
}

}  // namespace

int main() {
    const std::pair<const char*, std::function<Outcome()>> criteria[] = {
        {"ddim-equivalence", criterion_ddim_equivalence},
        {"marginal-preservation", criterion_marginal_preservation},
        {"forward-telescoping", criterion_forward_telescoping},
        {"sum-constrained-variance", criterion_sum_constrained},
        {"ground-truth-reversibility", criterion_reversibility},
        {"oracle-generation", criterion_oracle_generation},
        {"restoration-beats-degradation", criterion_restoration},
        {"objective-selection-direction", criterion_objective_selection},
        {"gradient-correctness", criterion_gradients},
        {"conversion-round-trips", criterion_round_trips},
    };
    int failures = 0;
    int index = 0;
    for (const auto& [name, fn] : criteria) {
        ++index;
        Outcome outcome;
        try {
            outcome = fn();
        } catch (const std::exception& e) {
            outcome = {false, std::string("exception: ") + e.what()};
        }
        if (!outcome.pass) ++failures;
        std::printf("[%s] %2d %-30s %s\n", outcome.pass ? "PASS" : "FAIL", index, name,
                    outcome.detail.c_str());
        std::fflush(stdout);
    }
    std::printf("%d/10 criteria passed\n", 10 - failures);
    return failures;
}
