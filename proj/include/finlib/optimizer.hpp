#pragma once

#include <limits>
#include <stdexcept>

namespace finlib {

// ReduceLROnPlateau: halt-free learning-rate decay driven by validation loss.
// The rate is reduced by `factor` after `patience` consecutive epochs without
// an improvement of more than `min_delta` over the best loss seen so far.
struct PlateauScheduler {
    double factor = 0.5;
    int patience = 5;
    double min_delta = 1e-4;
    double min_lr = 0.0;

    double best_loss = std::numeric_limits<double>::infinity();
    int wait_count = 0;

    void validate() const {
        if (!(factor > 0.0 && factor < 1.0)) throw std::invalid_argument("plateau factor must be in (0,1)");
        if (patience < 1) throw std::invalid_argument("plateau patience must be >= 1");
        if (min_delta < 0.0) throw std::invalid_argument("plateau min_delta must be >= 0");
    }

    // Returns the (possibly reduced) learning rate.
    double step(double val_loss, double lr) {
        if (val_loss < best_loss - min_delta) {
            best_loss = val_loss;
            wait_count = 0;
            return lr;
        }
        if (++wait_count >= patience) {
            wait_count = 0;
            lr *= factor;
            if (lr < min_lr) lr = min_lr;
        }
        return lr;
    }
};

// Early stopping with strict improvement: a delta of exactly min_delta does
// not count as an improvement.
struct EarlyStopping {
    int patience = 15;
    double min_delta = 1e-4;

    double best_loss = std::numeric_limits<double>::infinity();
    int wait_count = 0;

    void validate() const {
        if (patience < 1) throw std::invalid_argument("early-stop patience must be >= 1");
        if (min_delta < 0.0) throw std::invalid_argument("early-stop min_delta must be >= 0");
    }

    // True when training should stop. Callers snapshot the model whenever
    // `improved()` reported true for the same epoch.
    bool step(double val_loss) {
        if (val_loss < best_loss - min_delta) {
            best_loss = val_loss;
            wait_count = 0;
            return false;
        }
        return ++wait_count >= patience;
    }
};

struct OptimizerState {
    double learning_rate = 0.01;
    PlateauScheduler scheduler;
    EarlyStopping early_stop;

    void validate() const {
        if (!(learning_rate > 0.0)) throw std::invalid_argument("learning rate must be positive");
        scheduler.validate();
        early_stop.validate();
    }
};

}  // namespace finlib
