#pragma once

#include <cmath>
#include <stdexcept>

#include "finlib/tensor.hpp"

namespace finlib {

// Mean absolute error. Subgradient at zero residual is 0.
inline double l1_loss(const Tensor& pred, const Tensor& target) {
    if (!pred.same_shape(target)) throw std::invalid_argument("l1_loss shape mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) s += std::abs(pred[i] - target[i]);
    return s / static_cast<double>(pred.size());
}

inline Tensor l1_loss_grad(const Tensor& pred, const Tensor& target) {
    if (!pred.same_shape(target)) throw std::invalid_argument("l1_loss shape mismatch");
    Tensor g(pred.shape());
    const double inv_n = 1.0 / static_cast<double>(pred.size());
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double d = pred[i] - target[i];
        g[i] = d > 0.0 ? inv_n : (d < 0.0 ? -inv_n : 0.0);
    }
    return g;
}

// Mean squared error.
inline double mse_loss(const Tensor& pred, const Tensor& target) {
    if (!pred.same_shape(target)) throw std::invalid_argument("mse_loss shape mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double d = pred[i] - target[i];
        s += d * d;
    }
    return s / static_cast<double>(pred.size());
}

inline Tensor mse_loss_grad(const Tensor& pred, const Tensor& target) {
    if (!pred.same_shape(target)) throw std::invalid_argument("mse_loss shape mismatch");
    Tensor g(pred.shape());
    const double scale = 2.0 / static_cast<double>(pred.size());
    for (std::size_t i = 0; i < pred.size(); ++i) g[i] = scale * (pred[i] - target[i]);
    return g;
}

enum class LossKind { l1, mse };

inline double loss_value(LossKind kind, const Tensor& pred, const Tensor& target) {
    return kind == LossKind::l1 ? l1_loss(pred, target) : mse_loss(pred, target);
}

inline Tensor loss_grad(LossKind kind, const Tensor& pred, const Tensor& target) {
    return kind == LossKind::l1 ? l1_loss_grad(pred, target) : mse_loss_grad(pred, target);
}

}  // namespace finlib
