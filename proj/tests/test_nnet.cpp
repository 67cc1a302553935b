#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <functional>
#include <random>

#include "finlib/layers.hpp"
#include "finlib/losses.hpp"
#include "finlib/network.hpp"
#include "finlib/optimizer.hpp"
#include "finlib/train.hpp"

using namespace finlib;
using Catch::Approx;

namespace {

bool rel_close(double a, double b, double rel = 1e-4, double abs_floor = 1e-7) {
    return std::abs(a - b) <= std::max(abs_floor, rel * std::max(std::abs(a), std::abs(b)));
}

Tensor random_tensor(std::vector<std::size_t> shape, std::mt19937_64& rng, double lo = -1.0,
                     double hi = 1.0) {
    Tensor t(std::move(shape));
    std::uniform_real_distribution<double> dist(lo, hi);
    for (auto& v : t.values()) v = dist(rng);
    return t;
}

// Finite-difference check of every parameter gradient of `net` against the
// recorded backward pass, for loss(net(x), target).
void gradient_check(Network& net, const Tensor& x, const Tensor& target, LossKind kind,
                    double step = 1e-5, double rel = 1e-4) {
    std::mt19937_64 dummy(0);
    net.zero_grad();
    const Tensor pred = net.forward(x, /*train=*/false, dummy);
    net.backward(loss_grad(kind, pred, target));

    for (ParamGroup* p : net.param_groups()) {
        for (std::size_t i = 0; i < p->value.size(); ++i) {
            const double orig = p->value[i];
            p->value[i] = orig + step;
            const double up = loss_value(kind, net.forward(x, false, dummy), target);
            p->value[i] = orig - step;
            const double down = loss_value(kind, net.forward(x, false, dummy), target);
            p->value[i] = orig;
            const double fd = (up - down) / (2.0 * step);
            INFO(p->name << "[" << i << "] analytic=" << p->grad[i] << " fd=" << fd);
            REQUIRE(rel_close(p->grad[i], fd, rel));
        }
    }

    // input gradient too
    net.zero_grad();
    const Tensor pred2 = net.forward(x, false, dummy);
    const Tensor gin = net.backward(loss_grad(kind, pred2, target));
    Tensor xx = x;
    for (std::size_t i = 0; i < xx.size(); ++i) {
        const double orig = xx[i];
        xx[i] = orig + step;
        const double up = loss_value(kind, net.forward(xx, false, dummy), target);
        xx[i] = orig - step;
        const double down = loss_value(kind, net.forward(xx, false, dummy), target);
        xx[i] = orig;
        REQUIRE(rel_close(gin[i], (up - down) / (2.0 * step), rel));
    }
}

}  // namespace

TEST_CASE("dense forward fixtures") {
    std::mt19937_64 rng(1);
    DenseLayer d(2, 2, Activation::identity, rng);
    d.weights().value = Tensor({2, 2}, {1, 2, 3, 4});
    d.bias().value = Tensor({2}, {0, 0});
    const Tensor y = d.forward(Tensor::vector({1, 1}), false, rng);
    CHECK(y[0] == Approx(3.0));
    CHECK(y[1] == Approx(7.0));

    DenseLayer r(2, 2, Activation::relu, rng);
    r.weights().value = Tensor({2, 2}, {1, 0, 0, 1});
    r.bias().value = Tensor({2}, {-2, 0});
    const Tensor yr = r.forward(Tensor::vector({1, 2}), false, rng);
    CHECK(yr[0] == Approx(0.0));  // pre-activation -1
    CHECK(yr[1] == Approx(2.0));

    DenseLayer id(3, 3, Activation::identity, rng);
    id.weights().value = Tensor({3, 3}, {1, 0, 0, 0, 1, 0, 0, 0, 1});
    id.bias().value = Tensor({3});
    const Tensor x = Tensor::vector({0.3, -0.4, 2.0});
    const Tensor yi = id.forward(x, false, rng);
    for (std::size_t i = 0; i < 3; ++i) CHECK(yi[i] == Approx(x[i]));

    CHECK_THROWS_AS(d.forward(Tensor::vector({1, 2, 3}), false, rng), std::invalid_argument);
}

TEST_CASE("loss fixtures") {
    CHECK(l1_loss(Tensor::vector({0.5}), Tensor::vector({0.3})) == Approx(0.2));
    CHECK(l1_loss(Tensor::vector({1, 2}), Tensor::vector({1, 2})) == Approx(0.0));
    CHECK(l1_loss(Tensor::vector({1, -1}), Tensor::vector({0, 0})) == Approx(1.0));
    CHECK(mse_loss(Tensor::vector({3, 4}), Tensor::vector({0, 0})) == Approx(12.5));
    CHECK(mse_loss(Tensor::vector({2}), Tensor::vector({0})) == Approx(4.0));
    CHECK(mse_loss(Tensor::vector({1, 2}), Tensor::vector({1, 2})) == Approx(0.0));
    CHECK_THROWS_AS(l1_loss(Tensor::vector({1}), Tensor::vector({1, 2})), std::invalid_argument);
    CHECK_THROWS_AS(mse_loss(Tensor::vector({1}), Tensor::vector({1, 2})), std::invalid_argument);

    // L1 subgradient at zero is zero
    const Tensor g = l1_loss_grad(Tensor::vector({1.0, 2.0}), Tensor::vector({1.0, 0.0}));
    CHECK(g[0] == 0.0);
    CHECK(g[1] == Approx(0.5));
}

TEST_CASE("single dense layer analytic gradient") {
    // identity activation, MSE on one sample: dL/dW = 2 (pred - target) x^T
    std::mt19937_64 rng(3);
    Network net;
    net.add(std::make_unique<DenseLayer>(3, 1, Activation::identity, rng));
    const Tensor x = Tensor::vector({0.5, -1.0, 2.0});
    const Tensor target = Tensor::vector({0.7});

    net.zero_grad();
    const Tensor pred = net.forward(x, false, rng);
    net.backward(loss_grad(LossKind::mse, pred, target));
    const double resid = 2.0 * (pred[0] - target[0]);
    auto groups = net.param_groups();
    for (std::size_t i = 0; i < 3; ++i) CHECK(groups[0]->grad[i] == Approx(resid * x[i]));
    CHECK(groups[1]->grad[0] == Approx(resid));
}

TEST_CASE("zero loss gradient gives zero parameter gradients") {
    std::mt19937_64 rng(4);
    Network net;
    net.add(std::make_unique<DenseLayer>(4, 3, Activation::relu, rng));
    net.add(std::make_unique<DenseLayer>(3, 2, Activation::identity, rng));
    net.zero_grad();
    net.forward(random_tensor({4}, rng), false, rng);
    net.backward(Tensor({2}));
    for (ParamGroup* p : net.param_groups()) {
        for (double g : p->grad.values()) CHECK(g == 0.0);
    }
}

TEST_CASE("backward before forward is a state error") {
    Network net;
    std::mt19937_64 rng(5);
    net.add(std::make_unique<DenseLayer>(2, 1, Activation::identity, rng));
    CHECK_THROWS_AS(net.backward(Tensor({1})), std::logic_error);
}

TEST_CASE("gradient check: dense stacks with each activation") {
    std::mt19937_64 rng(6);
    for (Activation act : {Activation::identity, Activation::relu, Activation::sigmoid}) {
        Network net;
        net.add(std::make_unique<DenseLayer>(5, 4, act, rng));
        net.add(std::make_unique<DenseLayer>(4, 3, act, rng));
        net.add(std::make_unique<DenseLayer>(3, 2, Activation::identity, rng));
        gradient_check(net, random_tensor({5}, rng), random_tensor({2}, rng), LossKind::mse);
    }
    // softmax output head
    Network net;
    net.add(std::make_unique<DenseLayer>(4, 5, Activation::relu, rng));
    net.add(std::make_unique<DenseLayer>(5, 3, Activation::softmax, rng));
    Tensor onehot({3});
    onehot[1] = 1.0;
    gradient_check(net, random_tensor({4}, rng), onehot, LossKind::mse);
}

TEST_CASE("gradient check: attention layers") {
    std::mt19937_64 rng(7);
    {
        Network net;
        net.add(std::make_unique<TemporalAttentionLayer>(3, rng));
        net.add(std::make_unique<DenseLayer>(3, 2, Activation::identity, rng));
        gradient_check(net, random_tensor({5, 3}, rng), random_tensor({2}, rng), LossKind::mse);
    }
    {
        Network net;
        net.add(std::make_unique<FeatureAttentionLayer>(4, rng));
        net.add(std::make_unique<DenseLayer>(4, 2, Activation::identity, rng));
        gradient_check(net, random_tensor({4}, rng), random_tensor({2}, rng), LossKind::mse);
    }
}

TEST_CASE("gradient check: dropout in eval mode") {
    std::mt19937_64 rng(8);
    Network net;
    net.add(std::make_unique<DenseLayer>(4, 4, Activation::relu, rng));
    net.add(std::make_unique<DropoutLayer>(0.5));
    net.add(std::make_unique<DenseLayer>(4, 1, Activation::identity, rng));
    gradient_check(net, random_tensor({4}, rng), random_tensor({1}, rng), LossKind::mse);
}

TEST_CASE("temporal attention fixtures") {
    std::mt19937_64 rng(9);
    TemporalAttentionLayer attn(2, rng);
    attn.param_groups()[0]->value.fill(0.0);
    attn.param_groups()[1]->value.fill(0.0);
    const Tensor x({3, 2}, {1, 10, 2, 20, 3, 30});
    const Tensor y = attn.forward(x, false, rng);
    CHECK(y[0] == Approx(2.0));
    CHECK(y[1] == Approx(20.0));

    // T=1 degenerate window
    const Tensor one({1, 2}, {4.0, 5.0});
    const Tensor y1 = attn.forward(one, false, rng);
    CHECK(y1[0] == Approx(4.0));
    CHECK(y1[1] == Approx(5.0));
    CHECK(attn.last_alpha()[0] == Approx(1.0));

    // saturated softmax picks the argmax row
    TemporalAttentionLayer sat(1, rng);
    sat.param_groups()[0]->value = Tensor({1}, {100.0});
    sat.param_groups()[1]->value.fill(0.0);
    const Tensor xs({2, 1}, {0.0, 1.0});
    const Tensor ys = sat.forward(xs, false, rng);
    CHECK(std::abs(ys[0] - 1.0) < 1e-12);

    // attention weights always sum to 1
    double s = 0.0;
    for (double a : sat.last_alpha()) s += a;
    CHECK(std::abs(s - 1.0) < 1e-12);
}

TEST_CASE("dropout semantics") {
    std::mt19937_64 rng(10);
    const Tensor x = random_tensor({64}, rng);
    DropoutLayer none(0.0);
    Tensor y = none.forward(x, true, rng);
    for (std::size_t i = 0; i < x.size(); ++i) CHECK(y[i] == x[i]);

    DropoutLayer half(0.5);
    y = half.forward(x, false, rng);
    for (std::size_t i = 0; i < x.size(); ++i) CHECK(y[i] == x[i]);

    CHECK_THROWS_AS(DropoutLayer(1.0), std::invalid_argument);
    CHECK_THROWS_AS(DropoutLayer(-0.1), std::invalid_argument);

    // inverted dropout is unbiased: mean over trials within 3 sigma
    const Tensor ones({4}, {1.0, 1.0, 1.0, 1.0});
    const int trials = 100000;
    std::vector<double> acc(4, 0.0);
    for (int t = 0; t < trials; ++t) {
        const Tensor out = half.forward(ones, true, rng);
        for (std::size_t i = 0; i < 4; ++i) acc[i] += out[i];
    }
    // each element is 0 or 2 with p=1/2 -> variance 1, sigma of mean = 1/sqrt(trials)
    const double sigma = 1.0 / std::sqrt(static_cast<double>(trials));
    for (double a : acc) CHECK(std::abs(a / trials - 1.0) < 3.0 * sigma);
}

TEST_CASE("sgd step fixtures") {
    std::mt19937_64 rng(11);
    Network net;
    net.add(std::make_unique<DenseLayer>(1, 1, Activation::identity, rng));
    auto groups = net.param_groups();
    groups[0]->value[0] = 1.0;
    groups[0]->grad[0] = 0.5;
    groups[1]->grad[0] = 0.0;
    net.sgd_step(0.1);
    CHECK(groups[0]->value[0] == Approx(0.95));
    CHECK(groups[1]->value[0] == 0.0);

    // two steps with constant g equal one step with 2g (no momentum)
    groups[0]->value[0] = 1.0;
    groups[0]->grad[0] = 0.3;
    net.sgd_step(0.1);
    net.sgd_step(0.1);
    const double two_small = groups[0]->value[0];
    groups[0]->value[0] = 1.0;
    groups[0]->grad[0] = 0.6;
    net.sgd_step(0.1);
    CHECK(groups[0]->value[0] == Approx(two_small));

    // frozen groups do not move
    groups[0]->trainable = false;
    groups[0]->value[0] = 1.0;
    groups[0]->grad[0] = 1.0;
    net.sgd_step(0.1);
    CHECK(groups[0]->value[0] == 1.0);
}

TEST_CASE("plateau scheduler semantics") {
    PlateauScheduler s{0.5, 2, 1e-4};
    double lr = 0.1;
    lr = s.step(1.0, lr);
    CHECK(lr == Approx(0.1));
    lr = s.step(1.0, lr);
    CHECK(lr == Approx(0.1));
    lr = s.step(1.0, lr);
    CHECK(lr == Approx(0.05));

    PlateauScheduler s2{0.5, 2, 1e-4};
    lr = 0.1;
    for (double loss : {1.0, 0.8, 0.6, 0.4}) lr = s2.step(loss, lr);
    CHECK(lr == Approx(0.1));

    PlateauScheduler s3{0.5, 2, 1e-4};
    lr = 0.1;
    for (double loss : {1.0, 0.9, 0.9}) lr = s3.step(loss, lr);
    CHECK(lr == Approx(0.1));
    lr = s3.step(0.9, lr);
    CHECK(lr == Approx(0.05));
}

TEST_CASE("early stopping semantics") {
    EarlyStopping e{3, 1e-4};
    CHECK_FALSE(e.step(1.0));
    CHECK_FALSE(e.step(1.1));
    CHECK_FALSE(e.step(1.1));
    CHECK(e.step(1.1));

    EarlyStopping mono{3, 1e-4};
    bool stopped = false;
    double loss = 1.0;
    for (int i = 0; i < 50; ++i) {
        stopped = mono.step(loss);
        loss *= 0.9;
    }
    CHECK_FALSE(stopped);

    // improvement of exactly min_delta counts as no improvement
    EarlyStopping tie{1, 0.1};
    CHECK_FALSE(tie.step(1.0));
    CHECK(tie.step(0.9));
}

TEST_CASE("training reduces loss on a separable toy problem") {
    std::mt19937_64 data_rng(12);
    std::vector<Tensor> xs, ys;
    for (int i = 0; i < 200; ++i) {
        Tensor x = random_tensor({2}, data_rng, -1.0, 1.0);
        ys.push_back(Tensor::vector({x[0] + x[1] > 0.0 ? 1.0 : 0.0}));
        xs.push_back(std::move(x));
    }
    std::vector<std::size_t> train_idx, val_idx;
    for (std::size_t i = 0; i < 160; ++i) train_idx.push_back(i);
    for (std::size_t i = 160; i < 200; ++i) val_idx.push_back(i);

    std::mt19937_64 rng(13);
    Network net;
    net.add(std::make_unique<DenseLayer>(2, 8, Activation::relu, rng));
    net.add(std::make_unique<DenseLayer>(8, 1, Activation::sigmoid, rng));

    TrainConfig cfg;
    cfg.learning_rate = 0.5;
    cfg.max_epochs = 100;
    cfg.early_stop.patience = 100;
    const double before = evaluate_loss(net, xs, ys, train_idx, LossKind::mse);
    const TrainResult tr = train_network(net, xs, ys, train_idx, val_idx, cfg, rng);
    const double after = evaluate_loss(net, xs, ys, train_idx, LossKind::mse);
    CHECK(after < before);
    CHECK(tr.epochs_run > 0);

    // lr sequence non-increasing
    for (std::size_t i = 1; i < tr.history.size(); ++i) {
        CHECK(tr.history[i].lr <= tr.history[i - 1].lr);
    }
    // early stop restores the minimum-validation snapshot
    double min_val = std::numeric_limits<double>::infinity();
    for (const auto& e : tr.history) min_val = std::min(min_val, e.val_loss);
    CHECK(tr.best_val_loss == Approx(min_val));
    CHECK(evaluate_loss(net, xs, ys, val_idx, LossKind::mse) == Approx(min_val).margin(1e-12));
}

TEST_CASE("max_epochs = 0 leaves the network at initialization") {
    std::mt19937_64 rng(14);
    Network net;
    net.add(std::make_unique<DenseLayer>(2, 2, Activation::identity, rng));
    const auto before = net.snapshot();
    TrainConfig cfg;
    cfg.max_epochs = 0;
    std::vector<Tensor> xs{Tensor::vector({1, 2})}, ys{Tensor::vector({0, 0})};
    const TrainResult tr = train_network(net, xs, ys, {0}, {0}, cfg, rng);
    CHECK(tr.epochs_run == 0);
    CHECK(net.snapshot() == before);
}

TEST_CASE("determinism: same spec, seed and data give identical parameters") {
    std::mt19937_64 data_rng(15);
    std::vector<Tensor> xs, ys;
    for (int i = 0; i < 64; ++i) {
        xs.push_back(random_tensor({3}, data_rng));
        ys.push_back(random_tensor({1}, data_rng));
    }
    std::vector<std::size_t> train_idx, val_idx;
    for (std::size_t i = 0; i < 48; ++i) train_idx.push_back(i);
    for (std::size_t i = 48; i < 64; ++i) val_idx.push_back(i);

    auto run = [&]() {
        std::mt19937_64 rng(77);
        Network net;
        net.add(std::make_unique<DenseLayer>(3, 6, Activation::relu, rng));
        net.add(std::make_unique<DropoutLayer>(0.2));
        net.add(std::make_unique<DenseLayer>(6, 1, Activation::identity, rng));
        TrainConfig cfg;
        cfg.max_epochs = 20;
        train_network(net, xs, ys, train_idx, val_idx, cfg, rng);
        return net.snapshot();
    };
    CHECK(run() == run());
}
