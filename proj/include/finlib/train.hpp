#pragma once

#include <algorithm>
#include <random>
#include <stdexcept>
#include <vector>

#include "finlib/losses.hpp"
#include "finlib/network.hpp"
#include "finlib/optimizer.hpp"

namespace finlib {

struct TrainConfig {
    double learning_rate = 0.01;
    std::size_t batch_size = 32;  // 0 = full batch
    std::size_t max_epochs = 100;
    PlateauScheduler scheduler;
    EarlyStopping early_stop;
    LossKind loss = LossKind::mse;
    double divergence_factor = 10.0;

    void validate() const {
        if (!(learning_rate > 0.0)) throw std::invalid_argument("learning rate must be positive");
        scheduler.validate();
        early_stop.validate();
    }
};

struct EpochRecord {
    double train_loss = 0.0;
    double val_loss = 0.0;
    double lr = 0.0;
};

struct TrainResult {
    std::vector<EpochRecord> history;
    double best_val_loss = 0.0;
    std::size_t epochs_run = 0;
    bool stopped_early = false;
    bool diverged = false;
};

// Keeps trainable q outside the Shannon band and tau positive after an
// update step. Groups are matched by the naming convention of the FIN layer.
inline void clamp_fin_params(Network& net) {
    for (ParamGroup* p : net.param_groups()) {
        if (!p->trainable) continue;
        if (p->name == "fin.tau") {
            p->value[0] = std::max(p->value[0], 1e-3);
        } else if (p->name == "fin.q") {
            double& q = p->value[0];
            if (q > 1.0 - 1e-3 && q < 1.0 + 1e-3) {
                q = q >= 1.0 ? 1.0 + 1e-3 : 1.0 - 1e-3;
            }
        }
    }
}

inline double evaluate_loss(Network& net, const std::vector<Tensor>& inputs,
                            const std::vector<Tensor>& targets,
                            const std::vector<std::size_t>& idx, LossKind kind) {
    if (idx.empty()) throw std::invalid_argument("cannot evaluate on an empty index set");
    std::mt19937_64 dummy(0);
    double sum = 0.0;
    for (std::size_t i : idx) {
        const Tensor pred = net.forward(inputs[i], /*train=*/false, dummy);
        sum += loss_value(kind, pred, targets[i]);
    }
    return sum / static_cast<double>(idx.size());
}

// Mini-batch gradient descent with plateau LR reduction and early stopping.
// Restores the best-validation snapshot before returning. Deterministic for
// a fixed rng state and index order.
inline TrainResult train_network(Network& net, const std::vector<Tensor>& inputs,
                                 const std::vector<Tensor>& targets,
                                 std::vector<std::size_t> train_idx,
                                 const std::vector<std::size_t>& val_idx,
                                 TrainConfig cfg, std::mt19937_64& rng) {
    cfg.validate();
    if (inputs.size() != targets.size()) throw std::invalid_argument("inputs/targets size mismatch");
    TrainResult result;
    if (cfg.max_epochs == 0) return result;
    if (train_idx.empty() || val_idx.empty()) throw std::invalid_argument("empty train or validation split");

    double lr = cfg.learning_rate;
    PlateauScheduler sched = cfg.scheduler;
    EarlyStopping stopper = cfg.early_stop;
    const std::size_t batch = cfg.batch_size == 0 ? train_idx.size() : cfg.batch_size;

    double best_val = std::numeric_limits<double>::infinity();
    double initial_val = -1.0;
    std::vector<double> best_snapshot = net.snapshot();

    for (std::size_t epoch = 0; epoch < cfg.max_epochs; ++epoch) {
        std::shuffle(train_idx.begin(), train_idx.end(), rng);
        double train_loss_sum = 0.0;
        for (std::size_t start = 0; start < train_idx.size(); start += batch) {
            const std::size_t end = std::min(start + batch, train_idx.size());
            net.zero_grad();
            for (std::size_t k = start; k < end; ++k) {
                const std::size_t i = train_idx[k];
                const Tensor pred = net.forward(inputs[i], /*train=*/true, rng);
                train_loss_sum += loss_value(cfg.loss, pred, targets[i]);
                net.backward(loss_grad(cfg.loss, pred, targets[i]));
            }
            net.sgd_step(lr / static_cast<double>(end - start));
            clamp_fin_params(net);
        }
        const double train_loss = train_loss_sum / static_cast<double>(train_idx.size());
        const double val_loss = evaluate_loss(net, inputs, targets, val_idx, cfg.loss);
        result.history.push_back({train_loss, val_loss, lr});
        result.epochs_run = epoch + 1;

        if (epoch == 0) initial_val = val_loss;
        if (val_loss < best_val) {
            best_val = val_loss;
            best_snapshot = net.snapshot();
        }
        if (cfg.divergence_factor > 0.0 && val_loss > cfg.divergence_factor * initial_val &&
            epoch > 0) {
            result.diverged = true;
            break;
        }
        if (stopper.step(val_loss)) {
            result.stopped_early = true;
            break;
        }
        lr = sched.step(val_loss, lr);
    }

    net.restore(best_snapshot);
    result.best_val_loss = best_val;
    return result;
}

}  // namespace finlib
