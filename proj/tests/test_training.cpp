#include <doctest.h>

#include <cmath>

#include "resdiff/tasks.hpp"
#include "resdiff/training.hpp"

using namespace resdiff;

namespace {

TrainingBatch demo_batch(const TaskSpec& task, const CoefficientSchedule& sched, std::size_t n,
                         std::uint64_t seed, bool guard) {
    RandomStream stream(seed);
    const TripletBatch data = make_dataset(task, n, stream);
    RandomStream t_stream = stream.derive(1);
    return sample_training_batch(data.i0, data.i_in, sched, t_stream, guard);
}

}  // namespace

TEST_CASE("loss values") {
    const Tensor truth(Shape{2, 3}, 1.0);
    SUBCASE("perfect predictions give zero") {
        CHECK(loss(truth, truth, truth, truth, LossConfig{1, 1, Norm::kL2}) == 0.0);
        CHECK(loss(truth, truth, truth, truth, LossConfig{1, 1, Norm::kL1}) == 0.0);
    }
    SUBCASE("constant error of two under the squared norm") {
        const Tensor pred(Shape{2, 3}, 3.0);
        CHECK(loss(pred, truth, Tensor(), Tensor(), LossConfig{1, 0, Norm::kL2}) ==
              doctest::Approx(4.0).epsilon(1e-15));
        CHECK(loss(pred, truth, Tensor(), Tensor(), LossConfig{1, 0, Norm::kL1}) ==
              doctest::Approx(2.0).epsilon(1e-15));
    }
    SUBCASE("joint loss is the sum of the single-term losses") {
        const Tensor pr(Shape{2, 3}, 0.5), pe(Shape{2, 3}, 2.5);
        const double joint = loss(pr, truth, pe, truth, LossConfig{1, 1, Norm::kL2});
        const double a = loss(pr, truth, Tensor(), Tensor(), LossConfig{1, 0, Norm::kL2});
        const double b = loss(Tensor(), Tensor(), pe, truth, LossConfig{0, 1, Norm::kL2});
        CHECK(joint == doctest::Approx(a + b).epsilon(1e-15));
    }
    SUBCASE("config validation") {
        CHECK_THROWS(loss(truth, truth, truth, truth, LossConfig{0, 0, Norm::kL2}));
        CHECK_THROWS(loss(truth, truth, truth, truth, LossConfig{2, 0, Norm::kL2}));
    }
}

TEST_CASE("gated loss endpoints match the plain losses") {
    const TaskSpec task = make_task("gaussian-2d");
    const CoefficientSchedule sched = make_power_schedule(500, 1.0, 1.0, 1.0, 0.0);
    const TrainingBatch batch = demo_batch(task, sched, 16, 7, true);
    RandomStream s(11);
    const Tensor out = gaussian(s, batch.x.shape());

    const AutoLossResult at_one = loss_auto(out, batch, 1.0);
    CHECK(at_one.value ==
          doctest::Approx(loss(out, batch.true_res, Tensor(), Tensor(), LossConfig{1, 0, Norm::kL2}))
              .epsilon(1e-12));
    const AutoLossResult at_zero = loss_auto(out, batch, 0.0);
    CHECK(at_zero.value ==
          doctest::Approx(loss(Tensor(), Tensor(), out, batch.true_eps, LossConfig{0, 1, Norm::kL2}))
              .epsilon(1e-12));
    // exact output at the residual endpoint
    const AutoLossResult exact = loss_auto(batch.true_res, batch, 1.0);
    CHECK(exact.value == doctest::Approx(0.0).epsilon(1e-18));
}

TEST_CASE("gated loss rejects rows inside the conversion guards") {
    const TaskSpec task = make_task("gaussian-2d");
    const CoefficientSchedule sched = make_power_schedule(50, 1.0, 1.0, 1.0, 0.0);
    TrainingBatch batch = demo_batch(task, sched, 4, 3, true);
    batch.alpha_bar[2] = 1.0;  // force a singular row
    RandomStream s(5);
    const Tensor out = gaussian(s, batch.x.shape());
    CHECK_THROWS_AS(loss_auto(out, batch, 0.5), std::domain_error);
}

TEST_CASE("guarded batch sampling avoids singular steps") {
    const TaskSpec task = make_task("shade-restore");
    const CoefficientSchedule sched = make_power_schedule(1000, 1.0, 1.0, 0.01, 0.0);
    const TrainingBatch batch = demo_batch(task, sched, 64, 13, true);
    for (std::size_t i = 0; i < batch.size(); ++i) {
        CHECK(std::fabs(batch.alpha_bar[i] - 1.0) >= 1e-8);
        CHECK(batch.beta_bar[i] >= 1e-8);
    }
}

TEST_CASE("scalar optimizer converges on a quadratic") {
    ScalarAdam adam;
    AdamConfig cfg;
    cfg.lr = 0.1;
    double x = 0.0;
    for (int i = 0; i < 1000; ++i) x -= adam.update(2.0 * (x - 3.0), cfg);
    CHECK(x == doctest::Approx(3.0).epsilon(1e-4));
}

TEST_CASE("zero learning rate leaves parameters untouched") {
    const TaskSpec task = make_task("gaussian-2d");
    const CoefficientSchedule sched = make_power_schedule(500, 1.0, 1.0, 1.0, 0.0);
    const TrainingBatch batch = demo_batch(task, sched, 8, 17, false);
    MlpConfig mcfg{2, 2, 8, 8, 1};
    RandomStream init(23);
    MlpModel model = MlpModel::init(mcfg, init);
    const MlpModel before = model;
    AdamState adam(model);
    AdamConfig acfg;
    acfg.lr = 0.0;
    (void)backprop_and_step(model, batch, LossConfig{1, 0, Norm::kL2}, PredictorRole::kResidual,
                            TimeConditionMode::kReparameterized, 500.0, adam, acfg, 1);
    auto pa = before.named_parameters();
    auto pb = model.named_parameters();
    for (std::size_t p = 0; p < pa.size(); ++p) {
        CHECK(max_abs_diff(*pa[p].second, *pb[p].second) == 0.0);
    }
}

TEST_CASE("analytic gradients match central differences") {
    const TaskSpec task = make_task("gaussian-2d");
    const CoefficientSchedule sched = make_power_schedule(500, 1.0, 1.0, 1.0, 0.0);
    const TrainingBatch batch = demo_batch(task, sched, 8, 29, true);
    MlpConfig mcfg{2, 2, 8, 8, 1};
    RandomStream init(31);
    const MlpModel model = MlpModel::init(mcfg, init);
    RandomStream pick(37);

    SUBCASE("squared loss") {
        const auto r = grad_check(model, batch, LossConfig{1, 0, Norm::kL2},
                                  PredictorRole::kResidual, TimeConditionMode::kReparameterized,
                                  500.0, 1000000, pick);
        CHECK(r.checked == model.parameter_count());
        CHECK(r.max_rel_error < 1e-5);
    }
    SUBCASE("absolute loss away from its kinks") {
        const auto r = grad_check(model, batch, LossConfig{1, 0, Norm::kL1},
                                  PredictorRole::kResidual, TimeConditionMode::kReparameterized,
                                  500.0, 200, pick);
        CHECK(r.max_rel_error < 1e-5);
    }
    SUBCASE("two-headed joint loss") {
        MlpConfig cfg2{2, 2, 8, 8, 2};
        RandomStream init2(41);
        const MlpModel two = MlpModel::init(cfg2, init2);
        const auto r = grad_check(two, batch, LossConfig{1, 1, Norm::kL2}, PredictorRole::kBoth,
                                  TimeConditionMode::kRawT, 500.0, 200, pick);
        CHECK(r.max_rel_error < 1e-5);
    }
    SUBCASE("gated loss including the gate derivative") {
        const auto r = grad_check_auto(model, batch, 0.41, TimeConditionMode::kRawT, 500.0, 200,
                                       pick);
        CHECK(r.max_rel_error < 1e-5);
        CHECK(r.lambda_rel_error < 1e-5);
    }
}

TEST_CASE("a corrupted gradient is detected") {
    // Recompute one analytic gradient, scale it, and compare against the
    // central difference the checker would use.
    const TaskSpec task = make_task("gaussian-2d");
    const CoefficientSchedule sched = make_power_schedule(500, 1.0, 1.0, 1.0, 0.0);
    const TrainingBatch batch = demo_batch(task, sched, 8, 43, false);
    MlpConfig mcfg{2, 2, 8, 8, 1};
    RandomStream init(47);
    MlpModel model = MlpModel::init(mcfg, init);
    const LossConfig cfg{1, 0, Norm::kL2};

    auto loss_of = [&](const MlpModel& m) {
        std::vector<double> cond(batch.size());
        for (std::size_t i = 0; i < batch.size(); ++i) cond[i] = batch.alpha_bar[i] * 500.0;
        const Tensor input = assemble_mlp_input(m.config(), batch.x, batch.i_in, cond);
        const Tensor out = m.forward(input);
        return loss(out, batch.true_res, Tensor(), Tensor(), cfg);
    };
    // central difference for one output-layer weight
    auto params = model.named_parameters();
    Tensor& w3 = *params[4].second;
    const double h = 1e-5;
    const double saved = w3[0];
    w3[0] = saved + h;
    const double up = loss_of(model);
    w3[0] = saved - h;
    const double down = loss_of(model);
    w3[0] = saved;
    const double fd = (up - down) / (2.0 * h);
    const double corrupted = fd * 1.25;  // injected 25% scaling fault
    const double rel = std::fabs(corrupted - fd) / std::max({std::fabs(corrupted), std::fabs(fd),
                                                             1e-4});
    CHECK(rel > 1e-2);
}

TEST_CASE("gate resolution freezes, reinitializes, and resets the optimizer") {
    MlpConfig mcfg{2, 2, 8, 8, 1};
    RandomStream init(53);
    MlpModel model = MlpModel::init(mcfg, init);
    AdamState adam(model);
    {
        // drive one optimizer step so the reset is observable
        const TaskSpec task = make_task("gaussian-2d");
        const CoefficientSchedule sched = make_power_schedule(500, 1.0, 1.0, 1.0, 0.0);
        const TrainingBatch batch = demo_batch(task, sched, 4, 3, false);
        AdamConfig acfg;
        (void)backprop_and_step(model, batch, LossConfig{1, 0, Norm::kL2},
                                PredictorRole::kResidual, TimeConditionMode::kReparameterized,
                                500.0, adam, acfg, 1);
        CHECK(adam.steps_taken() == 1);
    }
    const MlpModel before = model;

    AutoSelectState undecided;
    undecided.lambda = 0.5;
    aosa_update(undecided, model, adam, RandomStream(1));
    CHECK(undecided.undecided());
    CHECK(adam.steps_taken() == 1);  // nothing happened

    AutoSelectState leaning;
    leaning.lambda = 0.52;
    aosa_update(leaning, model, adam, RandomStream(2));
    CHECK(leaning.resolved == AutoSelectState::Resolved::kResidual);
    CHECK(leaning.lambda == 1.0);
    CHECK(adam.steps_taken() == 0);  // fresh moments
    double delta = 0.0;
    auto pa = before.named_parameters();
    auto pb = model.named_parameters();
    for (std::size_t p = 0; p < pa.size(); ++p) {
        delta = std::max(delta, max_abs_diff(*pa[p].second, *pb[p].second));
    }
    CHECK(delta > 0.0);  // reinitialized weights

    AutoSelectState low;
    low.lambda = 0.42;
    aosa_update(low, model, adam, RandomStream(3));
    CHECK(low.resolved == AutoSelectState::Resolved::kNoise);
    CHECK(low.lambda == 0.0);

    // the gated objective is never revisited after resolution
    const TaskSpec task = make_task("gaussian-2d");
    const CoefficientSchedule sched = make_power_schedule(500, 1.0, 1.0, 1.0, 0.0);
    const TrainingBatch batch = demo_batch(task, sched, 4, 5, true);
    AdamConfig acfg;
    CHECK_THROWS_AS(backprop_and_step_auto(model, batch, low, TimeConditionMode::kRawT, 500.0,
                                           adam, acfg, 1),
                    std::logic_error);
}

TEST_CASE("training on an oracle-solvable task halves the loss") {
    const TaskSpec task = make_task("gaussian-2d");
    const CoefficientSchedule sched = make_power_schedule(500, 1.0, 1.0, 1.0, 0.0);
    MlpConfig mcfg{2, 2, 32, 64, 1};
    RandomStream root(71);
    RandomStream init = root.derive(0);
    MlpModel model = MlpModel::init(mcfg, init);
    AdamState adam(model);
    AdamConfig acfg;
    acfg.lr = 2e-3;
    double first = 0.0, last = 0.0;
    for (long it = 1; it <= 2000; ++it) {
        RandomStream ds = root.derive(1000 + static_cast<std::uint64_t>(it));
        const TripletBatch data = make_dataset(task, 16, ds);
        RandomStream ts = root.derive(90000 + static_cast<std::uint64_t>(it));
        const TrainingBatch batch = sample_training_batch(data.i0, data.i_in, sched, ts, false);
        const double v = backprop_and_step(model, batch, LossConfig{1, 0, Norm::kL2},
                                           PredictorRole::kResidual,
                                           TimeConditionMode::kReparameterized, 500.0, adam, acfg,
                                           it);
        if (it == 1) first = v;
        if (it > 1980) last += v / 20.0;
    }
    CHECK(last < 0.5 * first);
}

TEST_CASE("non-finite loss reports the iteration") {
    const TaskSpec task = make_task("gaussian-2d");
    const CoefficientSchedule sched = make_power_schedule(500, 1.0, 1.0, 1.0, 0.0);
    TrainingBatch batch = demo_batch(task, sched, 4, 5, false);
    batch.true_res[0] = std::numeric_limits<double>::infinity();
    MlpConfig mcfg{2, 2, 8, 8, 1};
    RandomStream init(3);
    MlpModel model = MlpModel::init(mcfg, init);
    AdamState adam(model);
    AdamConfig acfg;
    try {
        (void)backprop_and_step(model, batch, LossConfig{1, 0, Norm::kL2},
                                PredictorRole::kResidual, TimeConditionMode::kReparameterized,
                                500.0, adam, acfg, 1234);
        FAIL("expected a non-finite loss error");
    } catch (const std::domain_error& e) {
        CHECK(std::string(e.what()).find("1234") != std::string::npos);
    }
}
