#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

namespace finlib {

// Entropic index q and softmax temperature tau. Both may later be exposed
// as trainable parameters by the embedding layer; here they are plain values.
struct TsallisParams {
    double q = 1.5;
    double tau = 1.0;
};

// |q - 1| below this switches tsallis_entropy to the Shannon limit formula.
inline constexpr double kShannonBand = 1e-6;

// Floor applied before ln(p) so that exact zeros from extreme temperatures
// do not produce NaN.
inline constexpr double kProbFloor = 1e-300;

namespace detail {

inline void require_finite(std::span<const double> u) {
    for (double x : u) {
        if (!std::isfinite(x)) {
            throw std::invalid_argument("input vector contains NaN or Inf");
        }
    }
}

inline double pow_q(double p, double q) {
    // p^q as exp(q ln p), with p floored away from zero.
    return std::exp(q * std::log(std::max(p, kProbFloor)));
}

}  // namespace detail

// softmax(u / tau), max-subtracted for stability. Output sums to 1.
inline std::vector<double> softmax_temperature(std::span<const double> u, double tau) {
    if (!(tau > 0.0)) {
        throw std::invalid_argument("softmax temperature must be positive");
    }
    if (u.empty()) {
        throw std::invalid_argument("softmax input must be non-empty");
    }
    detail::require_finite(u);

    const double m = *std::max_element(u.begin(), u.end());
    std::vector<double> p(u.size());
    double z = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) {
        p[i] = std::exp((u[i] - m) / tau);
        z += p[i];
    }
    for (double& pi : p) pi /= z;
    return p;
}

// Shannon entropy in nats; 0 ln 0 taken as 0.
inline double shannon_entropy(std::span<const double> p) {
    if (p.empty()) {
        throw std::invalid_argument("probability vector must be non-empty");
    }
    double sum = 0.0;
    for (double pi : p) {
        if (!(pi >= 0.0 && pi <= 1.0 + 1e-12)) {
            throw std::invalid_argument("probability components must lie in [0, 1]");
        }
        sum += pi;
    }
    if (std::abs(sum - 1.0) > 1e-12) {
        throw std::invalid_argument("probability vector must sum to 1");
    }
    double h = 0.0;
    for (double pi : p) {
        if (pi > 0.0) h -= pi * std::log(pi);
    }
    return h;
}

// Temperature-scaled Tsallis entropy of the unscaled inputs u:
//   H_q(tau) = (1 - sum_i softmax(u_i/tau)^q) / (q - 1),
// with the Shannon entropy of softmax(u/tau) at q -> 1.
inline double tsallis_entropy(std::span<const double> u, const TsallisParams& params) {
    const std::vector<double> p = softmax_temperature(u, params.tau);
    if (std::abs(params.q - 1.0) < kShannonBand) {
        double h = 0.0;
        for (double pi : p) h -= pi * std::log(std::max(pi, kProbFloor));
        return h;
    }
    double s = 0.0;
    for (double pi : p) s += detail::pow_q(pi, params.q);
    return (1.0 - s) / (params.q - 1.0);
}

// Closed-form maximum of H_q over distributions of size n (attained at uniform).
inline double tsallis_entropy_uniform(std::size_t n, double q) {
    if (n == 0) throw std::invalid_argument("n must be positive");
    if (std::abs(q - 1.0) < kShannonBand) {
        return std::log(static_cast<double>(n));
    }
    return (1.0 - std::pow(static_cast<double>(n), 1.0 - q)) / (q - 1.0);
}

struct TsallisGradients {
    std::vector<double> grad_u;
    double grad_q = 0.0;
    double grad_tau = 0.0;
};

// Analytic first derivatives of tsallis_entropy with respect to u, q and tau.
// Inside the Shannon band grad_q uses the series expansion of H around q = 1:
//   H(q) = -sum p ln p - (q-1)/2 sum p (ln p)^2 - (q-1)^2/6 sum p (ln p)^3 - ...
inline TsallisGradients tsallis_gradients(std::span<const double> u,
                                          const TsallisParams& params) {
    const double q = params.q;
    const double tau = params.tau;
    const std::vector<double> p = softmax_temperature(u, tau);
    const std::size_t n = p.size();

    std::vector<double> logp(n);
    for (std::size_t i = 0; i < n; ++i) logp[i] = std::log(std::max(p[i], kProbFloor));

    TsallisGradients out;
    out.grad_u.assign(n, 0.0);

    // dH/dp_i
    std::vector<double> dhdp(n);
    const bool shannon = std::abs(q - 1.0) < kShannonBand;
    if (shannon) {
        for (std::size_t i = 0; i < n; ++i) dhdp[i] = -(logp[i] + 1.0);
        double s2 = 0.0, s3 = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            s2 += p[i] * logp[i] * logp[i];
            s3 += p[i] * logp[i] * logp[i] * logp[i];
        }
        out.grad_q = -0.5 * s2 - (q - 1.0) / 3.0 * s3;
    } else {
        double s = 0.0, s_q = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double piq = detail::pow_q(p[i], q);
            s += piq;
            s_q += piq * logp[i];
            dhdp[i] = -q * detail::pow_q(p[i], q - 1.0) / (q - 1.0);
        }
        out.grad_q = (-(q - 1.0) * s_q - (1.0 - s)) / ((q - 1.0) * (q - 1.0));
    }

    // Chain rule through the softmax: with z = u/tau,
    // dH/dz_i = p_i (dH/dp_i - <dH/dp, p>).
    double mean_g = 0.0;
    for (std::size_t i = 0; i < n; ++i) mean_g += dhdp[i] * p[i];
    for (std::size_t i = 0; i < n; ++i) {
        const double dhdz = p[i] * (dhdp[i] - mean_g);
        out.grad_u[i] = dhdz / tau;
        out.grad_tau -= dhdz * u[i] / (tau * tau);
    }
    return out;
}

// Affine min-max rescaling to [0, 1]; a constant signal maps to all 0.5.
inline std::vector<double> normalize_input(std::span<const double> signal) {
    if (signal.size() < 2) {
        throw std::invalid_argument("signal must have at least two samples");
    }
    detail::require_finite(signal);
    const auto [lo_it, hi_it] = std::minmax_element(signal.begin(), signal.end());
    const double lo = *lo_it, hi = *hi_it;
    std::vector<double> out(signal.size());
    if (hi == lo) {
        std::fill(out.begin(), out.end(), 0.5);
        return out;
    }
    const double range = hi - lo;
    for (std::size_t i = 0; i < signal.size(); ++i) {
        out[i] = (signal[i] - lo) / range;
    }
    return out;
}

// Jacobian-vector product of normalize_input: given upstream gradient g on the
// normalized output, returns the gradient on the raw signal. Uses the first
// occurrences of the min and max as the subgradient choice; zero for constant
// signals.
inline std::vector<double> normalize_input_backward(std::span<const double> signal,
                                                    std::span<const double> grad_out) {
    if (signal.size() != grad_out.size()) {
        throw std::invalid_argument("gradient size must match signal size");
    }
    const auto lo_it = std::min_element(signal.begin(), signal.end());
    const auto hi_it = std::max_element(signal.begin(), signal.end());
    std::vector<double> g(signal.size(), 0.0);
    const double lo = *lo_it, hi = *hi_it;
    if (hi == lo) return g;
    const double r = hi - lo;
    const auto jmin = static_cast<std::size_t>(lo_it - signal.begin());
    const auto jmax = static_cast<std::size_t>(hi_it - signal.begin());
    double sum_g = 0.0, sum_gy = 0.0;
    for (std::size_t i = 0; i < signal.size(); ++i) {
        sum_g += grad_out[i];
        sum_gy += grad_out[i] * (signal[i] - lo) / r;
    }
    for (std::size_t i = 0; i < signal.size(); ++i) g[i] = grad_out[i] / r;
    g[jmin] -= (sum_g - sum_gy) / r;
    g[jmax] -= sum_gy / r;
    return g;
}

}  // namespace finlib
