#pragma once

#include <cmath>
#include <memory>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "finlib/entropy.hpp"
#include "finlib/tensor.hpp"

namespace finlib {

enum class Activation { identity, relu, sigmoid, softmax };

inline const char* activation_name(Activation a) {
    switch (a) {
        case Activation::identity: return "identity";
        case Activation::relu: return "relu";
        case Activation::sigmoid: return "sigmoid";
        case Activation::softmax: return "softmax";
    }
    return "?";
}

inline Activation activation_from_name(const std::string& s) {
    if (s == "identity") return Activation::identity;
    if (s == "relu") return Activation::relu;
    if (s == "sigmoid") return Activation::sigmoid;
    if (s == "softmax") return Activation::softmax;
    throw std::invalid_argument("unknown activation: " + s);
}

// A named parameter tensor together with its gradient accumulator.
struct ParamGroup {
    std::string name;
    Tensor value;
    Tensor grad;
    bool trainable = true;

    ParamGroup() = default;
    ParamGroup(std::string n, Tensor v, bool t = true)
        : name(std::move(n)), value(std::move(v)), grad(value.shape()), trainable(t) {}

    void zero_grad() { grad.fill(0.0); }
};

class Layer {
public:
    virtual ~Layer() = default;
    virtual Tensor forward(const Tensor& x, bool train, std::mt19937_64& rng) = 0;
    virtual Tensor backward(const Tensor& grad_out) = 0;
    virtual std::vector<ParamGroup*> param_groups() { return {}; }
    virtual std::unique_ptr<Layer> clone() const = 0;
    virtual std::string describe() const = 0;
};

// Xavier/Glorot uniform in +-sqrt(6/(fan_in+fan_out)).
inline double glorot_limit(std::size_t fan_in, std::size_t fan_out) {
    return std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
}

// y = act(W x + b)
class DenseLayer final : public Layer {
public:
    DenseLayer(std::size_t in_dim, std::size_t out_dim, Activation act,
               std::mt19937_64& rng, const std::string& name = "dense")
        : in_(in_dim), out_(out_dim), act_(act),
          weights_(name + ".W", Tensor({out_dim, in_dim})),
          bias_(name + ".b", Tensor({out_dim})) {
        const double lim = glorot_limit(in_dim, out_dim);
        std::uniform_real_distribution<double> dist(-lim, lim);
        for (auto& w : weights_.value.values()) w = dist(rng);
    }

    // Uninitialized weights; used when loading from a snapshot/file.
    DenseLayer(std::size_t in_dim, std::size_t out_dim, Activation act,
               const std::string& name = "dense")
        : in_(in_dim), out_(out_dim), act_(act),
          weights_(name + ".W", Tensor({out_dim, in_dim})),
          bias_(name + ".b", Tensor({out_dim})) {}

    std::size_t in_dim() const { return in_; }
    std::size_t out_dim() const { return out_; }
    Activation activation() const { return act_; }
    ParamGroup& weights() { return weights_; }
    ParamGroup& bias() { return bias_; }
    const ParamGroup& weights() const { return weights_; }
    const ParamGroup& bias() const { return bias_; }

    Tensor forward(const Tensor& x, bool, std::mt19937_64&) override {
        if (x.rank() != 1 || x.dim(0) != in_) {
            throw std::invalid_argument("dense layer input shape mismatch");
        }
        x_ = x;
        Tensor y({out_});
        const double* W = weights_.value.data();
        for (std::size_t o = 0; o < out_; ++o) {
            double acc = bias_.value[o];
            const double* row = W + o * in_;
            for (std::size_t i = 0; i < in_; ++i) acc += row[i] * x[i];
            y[o] = acc;
        }
        apply_activation(y);
        y_ = y;
        return y;
    }

    Tensor backward(const Tensor& grad_out) override {
        if (x_.size() != in_) throw std::logic_error("backward called before forward");
        if (grad_out.size() != out_) throw std::invalid_argument("dense backward shape mismatch");

        Tensor gz = activation_backward(grad_out);
        double* gW = weights_.grad.data();
        for (std::size_t o = 0; o < out_; ++o) {
            const double g = gz[o];
            double* row = gW + o * in_;
            for (std::size_t i = 0; i < in_; ++i) row[i] += g * x_[i];
            bias_.grad[o] += g;
        }
        Tensor gx({in_});
        const double* W = weights_.value.data();
        for (std::size_t o = 0; o < out_; ++o) {
            const double g = gz[o];
            const double* row = W + o * in_;
            for (std::size_t i = 0; i < in_; ++i) gx[i] += g * row[i];
        }
        return gx;
    }

    std::vector<ParamGroup*> param_groups() override { return {&weights_, &bias_}; }

    std::unique_ptr<Layer> clone() const override { return std::make_unique<DenseLayer>(*this); }

    std::string describe() const override {
        return "dense(" + std::to_string(in_) + "->" + std::to_string(out_) + "," +
               activation_name(act_) + ")";
    }

private:
    void apply_activation(Tensor& y) const {
        switch (act_) {
            case Activation::identity:
                break;
            case Activation::relu:
                for (auto& v : y.values()) v = v > 0.0 ? v : 0.0;
                break;
            case Activation::sigmoid:
                for (auto& v : y.values()) v = 1.0 / (1.0 + std::exp(-v));
                break;
            case Activation::softmax: {
                double m = y[0];
                for (double v : y.values()) m = std::max(m, v);
                double z = 0.0;
                for (auto& v : y.values()) {
                    v = std::exp(v - m);
                    z += v;
                }
                for (auto& v : y.values()) v /= z;
                break;
            }
        }
    }

    Tensor activation_backward(const Tensor& grad_out) const {
        Tensor gz({out_});
        switch (act_) {
            case Activation::identity:
                gz = grad_out;
                break;
            case Activation::relu:
                for (std::size_t i = 0; i < out_; ++i) gz[i] = y_[i] > 0.0 ? grad_out[i] : 0.0;
                break;
            case Activation::sigmoid:
                for (std::size_t i = 0; i < out_; ++i) gz[i] = grad_out[i] * y_[i] * (1.0 - y_[i]);
                break;
            case Activation::softmax: {
                double dot = 0.0;
                for (std::size_t i = 0; i < out_; ++i) dot += grad_out[i] * y_[i];
                for (std::size_t i = 0; i < out_; ++i) gz[i] = y_[i] * (grad_out[i] - dot);
                break;
            }
        }
        return gz;
    }

    std::size_t in_;
    std::size_t out_;
    Activation act_;
    ParamGroup weights_;
    ParamGroup bias_;
    Tensor x_;
    Tensor y_;
};

// Inverted dropout: eval mode is the identity.
class DropoutLayer final : public Layer {
public:
    explicit DropoutLayer(double rate) : rate_(rate) {
        if (!(rate >= 0.0 && rate < 1.0)) {
            throw std::invalid_argument("dropout rate must lie in [0,1)");
        }
    }

    Tensor forward(const Tensor& x, bool train, std::mt19937_64& rng) override {
        if (!train || rate_ == 0.0) {
            mask_.assign(x.size(), 1.0);
            return x;
        }
        std::uniform_real_distribution<double> dist(0.0, 1.0);
        const double keep = 1.0 - rate_;
        mask_.resize(x.size());
        Tensor y(x.shape());
        for (std::size_t i = 0; i < x.size(); ++i) {
            mask_[i] = dist(rng) < rate_ ? 0.0 : 1.0 / keep;
            y[i] = x[i] * mask_[i];
        }
        return y;
    }

    Tensor backward(const Tensor& grad_out) override {
        if (grad_out.size() != mask_.size()) throw std::logic_error("dropout backward before forward");
        Tensor gx(grad_out.shape());
        for (std::size_t i = 0; i < grad_out.size(); ++i) gx[i] = grad_out[i] * mask_[i];
        return gx;
    }

    std::unique_ptr<Layer> clone() const override { return std::make_unique<DropoutLayer>(*this); }
    std::string describe() const override { return "dropout(" + std::to_string(rate_) + ")"; }

    double rate() const { return rate_; }

private:
    double rate_;
    std::vector<double> mask_;
};

// Temporal attention over a [T x F] window: one learned score per timestep,
// softmax over time, output is the attention-weighted sum of rows.
class TemporalAttentionLayer final : public Layer {
public:
    TemporalAttentionLayer(std::size_t feature_dim, std::mt19937_64& rng,
                           const std::string& name = "tattn")
        : f_(feature_dim),
          score_w_(name + ".w", Tensor({feature_dim})),
          score_b_(name + ".b", Tensor({std::size_t{1}})) {
        const double lim = glorot_limit(feature_dim, 1);
        std::uniform_real_distribution<double> dist(-lim, lim);
        for (auto& w : score_w_.value.values()) w = dist(rng);
    }

    Tensor forward(const Tensor& x, bool, std::mt19937_64&) override {
        if (x.rank() != 2 || x.dim(1) != f_) {
            throw std::invalid_argument("temporal attention expects a [T x F] input");
        }
        x_ = x;
        const std::size_t t = x.dim(0);
        std::vector<double> scores(t);
        for (std::size_t r = 0; r < t; ++r) {
            double s = score_b_.value[0];
            for (std::size_t c = 0; c < f_; ++c) s += score_w_.value[c] * x.at(r, c);
            scores[r] = s;
        }
        alpha_ = softmax_temperature(scores, 1.0);
        Tensor out({f_});
        for (std::size_t r = 0; r < t; ++r) {
            for (std::size_t c = 0; c < f_; ++c) out[c] += alpha_[r] * x.at(r, c);
        }
        return out;
    }

    Tensor backward(const Tensor& grad_out) override {
        const std::size_t t = x_.dim(0);
        if (grad_out.size() != f_) throw std::invalid_argument("temporal attention backward shape");

        // dL/dalpha_r = <G, x_r>; chain through the softmax over time.
        std::vector<double> dalpha(t), ds(t);
        double mix = 0.0;
        for (std::size_t r = 0; r < t; ++r) {
            double c = 0.0;
            for (std::size_t f = 0; f < f_; ++f) c += grad_out[f] * x_.at(r, f);
            dalpha[r] = c;
            mix += alpha_[r] * c;
        }
        for (std::size_t r = 0; r < t; ++r) ds[r] = alpha_[r] * (dalpha[r] - mix);

        Tensor gx(x_.shape());
        for (std::size_t r = 0; r < t; ++r) {
            for (std::size_t f = 0; f < f_; ++f) {
                gx.at(r, f) = alpha_[r] * grad_out[f] + ds[r] * score_w_.value[f];
            }
        }
        for (std::size_t r = 0; r < t; ++r) {
            for (std::size_t f = 0; f < f_; ++f) score_w_.grad[f] += ds[r] * x_.at(r, f);
            score_b_.grad[0] += ds[r];
        }
        return gx;
    }

    std::vector<ParamGroup*> param_groups() override { return {&score_w_, &score_b_}; }
    std::unique_ptr<Layer> clone() const override {
        return std::make_unique<TemporalAttentionLayer>(*this);
    }
    std::string describe() const override { return "temporal_attention(F=" + std::to_string(f_) + ")"; }

    const std::vector<double>& last_alpha() const { return alpha_; }

private:
    std::size_t f_;
    ParamGroup score_w_;
    ParamGroup score_b_;
    Tensor x_;
    std::vector<double> alpha_;
};

// Feature-level gating: alpha = softmax(W v + b), output alpha (.) v.
class FeatureAttentionLayer final : public Layer {
public:
    FeatureAttentionLayer(std::size_t dim, std::mt19937_64& rng,
                          const std::string& name = "fattn")
        : d_(dim),
          score_w_(name + ".W", Tensor({dim, dim})),
          score_b_(name + ".b", Tensor({dim})) {
        const double lim = glorot_limit(dim, dim);
        std::uniform_real_distribution<double> dist(-lim, lim);
        for (auto& w : score_w_.value.values()) w = dist(rng);
    }

    Tensor forward(const Tensor& x, bool, std::mt19937_64&) override {
        if (x.rank() != 1 || x.dim(0) != d_) {
            throw std::invalid_argument("feature attention expects a flat vector");
        }
        x_ = x;
        std::vector<double> scores(d_);
        for (std::size_t o = 0; o < d_; ++o) {
            double s = score_b_.value[o];
            for (std::size_t i = 0; i < d_; ++i) s += score_w_.value[o * d_ + i] * x[i];
            scores[o] = s;
        }
        alpha_ = softmax_temperature(scores, 1.0);
        Tensor out({d_});
        for (std::size_t i = 0; i < d_; ++i) out[i] = alpha_[i] * x[i];
        return out;
    }

    Tensor backward(const Tensor& grad_out) override {
        if (grad_out.size() != d_) throw std::invalid_argument("feature attention backward shape");
        std::vector<double> dalpha(d_), ds(d_);
        double mix = 0.0;
        for (std::size_t i = 0; i < d_; ++i) {
            dalpha[i] = grad_out[i] * x_[i];
            mix += alpha_[i] * dalpha[i];
        }
        for (std::size_t i = 0; i < d_; ++i) ds[i] = alpha_[i] * (dalpha[i] - mix);

        Tensor gx({d_});
        for (std::size_t i = 0; i < d_; ++i) gx[i] = grad_out[i] * alpha_[i];
        for (std::size_t o = 0; o < d_; ++o) {
            for (std::size_t i = 0; i < d_; ++i) {
                score_w_.grad[o * d_ + i] += ds[o] * x_[i];
                gx[i] += score_w_.value[o * d_ + i] * ds[o];
            }
            score_b_.grad[o] += ds[o];
        }
        return gx;
    }

    std::vector<ParamGroup*> param_groups() override { return {&score_w_, &score_b_}; }
    std::unique_ptr<Layer> clone() const override {
        return std::make_unique<FeatureAttentionLayer>(*this);
    }
    std::string describe() const override { return "feature_attention(d=" + std::to_string(d_) + ")"; }

    const std::vector<double>& last_alpha() const { return alpha_; }

private:
    std::size_t d_;
    ParamGroup score_w_;
    ParamGroup score_b_;
    Tensor x_;
    std::vector<double> alpha_;
};

}  // namespace finlib
