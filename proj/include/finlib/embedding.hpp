#pragma once

#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "finlib/entropy.hpp"
#include "finlib/fin.hpp"
#include "finlib/network.hpp"
#include "finlib/train.hpp"

namespace finlib {

// The differentiable entropy scalar behind both embedding modes.
//
// imitation: runs the trained FIN stack on the normalized input; q and tau
//            are carried along but do not enter the computation (they were
//            baked into the training labels), so their gradients are zero.
// exact:     evaluates the closed form directly; q and tau get analytic
//            gradients and may be fine-tuned.
class FinScalarCore {
public:
    FinScalarCore(const FinModel& fin, FinMode mode, bool trainable_weights,
                  bool trainable_q, bool trainable_tau)
        : mode_(mode),
          len_(fin.input_length),
          q_("fin.q", Tensor({std::size_t{1}}, {fin.params.q}), trainable_q),
          tau_("fin.tau", Tensor({std::size_t{1}}, {fin.params.tau}), trainable_tau) {
        if (mode_ == FinMode::imitation) {
            net_ = fin.network;
            for (ParamGroup* p : net_.param_groups()) p->trainable = trainable_weights;
            // q/tau are inert in imitation mode; never step them.
            q_.trainable = false;
            tau_.trainable = false;
        }
    }

    std::size_t input_length() const { return len_; }
    FinMode mode() const { return mode_; }
    double q() const { return q_.value[0]; }
    double tau() const { return tau_.value[0]; }

    double forward(std::span<const double> x) {
        if (x.size() != len_) throw std::invalid_argument("FIN layer input width mismatch");
        x_raw_.assign(x.begin(), x.end());
        x_norm_ = normalize_input(x_raw_);
        if (mode_ == FinMode::imitation) {
            // canonical imitation input: sorted normalized values (stable order
            // recorded so gradients scatter back to their source positions)
            order_.resize(len_);
            std::iota(order_.begin(), order_.end(), std::size_t{0});
            std::stable_sort(order_.begin(), order_.end(), [&](std::size_t a, std::size_t b) {
                return x_norm_[a] < x_norm_[b];
            });
            Tensor sorted({len_});
            for (std::size_t i = 0; i < len_; ++i) sorted[i] = x_norm_[order_[i]];
            std::mt19937_64 dummy(0);
            return net_.forward(sorted, /*train=*/false, dummy)[0];
        }
        return tsallis_entropy(x_norm_, {q_.value[0], tau_.value[0]});
    }

    // Gradient of (g * scalar) w.r.t. the raw input; accumulates parameter grads.
    std::vector<double> backward(double g) {
        if (x_raw_.empty()) throw std::logic_error("FIN layer backward before forward");
        std::vector<double> grad_norm;
        if (mode_ == FinMode::imitation) {
            const Tensor gx = net_.backward(Tensor({1}, {g}));
            grad_norm.assign(len_, 0.0);
            for (std::size_t i = 0; i < len_; ++i) grad_norm[order_[i]] = gx[i];
        } else {
            const TsallisGradients tg = tsallis_gradients(x_norm_, {q_.value[0], tau_.value[0]});
            grad_norm.resize(len_);
            for (std::size_t i = 0; i < len_; ++i) grad_norm[i] = g * tg.grad_u[i];
            q_.grad[0] += g * tg.grad_q;
            tau_.grad[0] += g * tg.grad_tau;
        }
        return normalize_input_backward(x_raw_, grad_norm);
    }

    std::vector<ParamGroup*> param_groups() {
        std::vector<ParamGroup*> out;
        if (mode_ == FinMode::imitation) out = net_.param_groups();
        out.push_back(&q_);
        out.push_back(&tau_);
        return out;
    }

private:
    FinMode mode_;
    std::size_t len_;
    Network net_;
    ParamGroup q_;
    ParamGroup tau_;
    std::vector<double> x_raw_;
    std::vector<double> x_norm_;
    std::vector<std::size_t> order_;
};

// Latent-level embedding: output = [x, fin(x)], width d+1.
class FinConcatLayer final : public Layer {
public:
    FinConcatLayer(const FinModel& fin, FinMode mode, bool trainable_weights,
                   bool trainable_q, bool trainable_tau)
        : core_(fin, mode, trainable_weights, trainable_q, trainable_tau) {}

    Tensor forward(const Tensor& x, bool, std::mt19937_64&) override {
        if (x.rank() != 1 || x.dim(0) != core_.input_length()) {
            throw std::invalid_argument("fin_concat input width mismatch");
        }
        Tensor y({x.size() + 1});
        for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i];
        y[x.size()] = core_.forward(x.values());
        return y;
    }

    Tensor backward(const Tensor& grad_out) override {
        const std::size_t d = core_.input_length();
        if (grad_out.size() != d + 1) throw std::invalid_argument("fin_concat backward shape");
        const std::vector<double> gfin = core_.backward(grad_out[d]);
        Tensor gx({d});
        for (std::size_t i = 0; i < d; ++i) gx[i] = grad_out[i] + gfin[i];
        return gx;
    }

    std::vector<ParamGroup*> param_groups() override { return core_.param_groups(); }
    std::unique_ptr<Layer> clone() const override { return std::make_unique<FinConcatLayer>(*this); }
    std::string describe() const override {
        return std::string("fin_concat(") +
               (core_.mode() == FinMode::exact ? "exact" : "imitation") + ")";
    }

    FinScalarCore& core() { return core_; }

private:
    FinScalarCore core_;
};

// Input-level embedding for windowed inputs: temporal attention context plus
// one entropy scalar per feature column, output width 2F.
class WindowAttentionFinLayer final : public Layer {
public:
    WindowAttentionFinLayer(std::size_t feature_dim, std::mt19937_64& rng, const FinModel& fin,
                            FinMode mode, bool trainable_weights, bool trainable_q,
                            bool trainable_tau)
        : f_(feature_dim),
          attn_(feature_dim, rng),
          core_(fin, mode, trainable_weights, trainable_q, trainable_tau) {}

    Tensor forward(const Tensor& x, bool train, std::mt19937_64& rng) override {
        if (x.rank() != 2 || x.dim(1) != f_) {
            throw std::invalid_argument("window FIN layer expects a [T x F] input");
        }
        if (x.dim(0) != core_.input_length()) {
            throw std::invalid_argument("window length does not match FIN input length");
        }
        x_ = x;
        const Tensor ctx = attn_.forward(x, train, rng);
        Tensor y({2 * f_});
        for (std::size_t c = 0; c < f_; ++c) y[c] = ctx[c];
        std::vector<double> col(x.dim(0));
        for (std::size_t c = 0; c < f_; ++c) {
            for (std::size_t r = 0; r < x.dim(0); ++r) col[r] = x.at(r, c);
            y[f_ + c] = core_.forward(col);
        }
        return y;
    }

    Tensor backward(const Tensor& grad_out) override {
        if (grad_out.size() != 2 * f_) throw std::invalid_argument("window FIN backward shape");
        Tensor g_ctx({f_});
        for (std::size_t c = 0; c < f_; ++c) g_ctx[c] = grad_out[c];
        Tensor gx = attn_.backward(g_ctx);

        // The shared core caches only one column at a time; re-run the
        // forward for each column before backpropagating through it.
        const std::size_t t = x_.dim(0);
        std::vector<double> col(t);
        for (std::size_t c = 0; c < f_; ++c) {
            for (std::size_t r = 0; r < t; ++r) col[r] = x_.at(r, c);
            core_.forward(col);
            const std::vector<double> gcol = core_.backward(grad_out[f_ + c]);
            for (std::size_t r = 0; r < t; ++r) gx.at(r, c) += gcol[r];
        }
        return gx;
    }

    std::vector<ParamGroup*> param_groups() override {
        auto out = attn_.param_groups();
        for (ParamGroup* p : core_.param_groups()) out.push_back(p);
        return out;
    }
    std::unique_ptr<Layer> clone() const override {
        return std::make_unique<WindowAttentionFinLayer>(*this);
    }
    std::string describe() const override {
        return "window_attention_fin(F=" + std::to_string(f_) + ")";
    }

    FinScalarCore& core() { return core_; }

private:
    std::size_t f_;
    TemporalAttentionLayer attn_;
    FinScalarCore core_;
    Tensor x_;
};

// Inserts the FIN into a host spec. latent_concat places a fin_concat layer
// at host_attach_index; input_level routes each feature's window through the
// FIN next to the temporal attention context.
inline NetworkSpec attach_fin(const NetworkSpec& host, const FinModel& fin,
                              const FinAttachment& attachment) {
    if (host.fin.has_value() || host.input_level_fin) {
        throw std::invalid_argument("host network already has a FIN attachment");
    }
    NetworkSpec out = host;
    out.fin = attachment;
    if (attachment.mode == FinAttachment::Mode::latent_concat) {
        if (attachment.host_attach_index > out.layers.size()) {
            throw std::invalid_argument("FIN attach index out of range");
        }
        out.layers.insert(out.layers.begin() + static_cast<std::ptrdiff_t>(attachment.host_attach_index),
                          LayerSpec::make_fin_concat());
    } else {
        if (out.window_rows == 0) {
            throw std::invalid_argument("input-level FIN requires a windowed input");
        }
        if (out.window_rows != fin.input_length) {
            throw std::invalid_argument("window length does not match FIN input length");
        }
        out.input_level_fin = true;
    }
    out.validate(fin.input_length);
    return out;
}

// Materializes a NetworkSpec. `fin` may be null only when the spec has no
// FIN attachment.
inline Network build_network(const NetworkSpec& spec, const FinModel* fin = nullptr) {
    const bool needs_fin = spec.input_level_fin ||
        std::any_of(spec.layers.begin(), spec.layers.end(), [](const LayerSpec& l) {
            return l.kind == LayerSpec::Kind::fin_concat;
        });
    if (needs_fin && !fin) throw std::invalid_argument("spec has a FIN attachment but no FIN model given");
    spec.validate(fin ? fin->input_length : 0);

    const FinAttachment att = spec.fin.value_or(FinAttachment{});
    std::mt19937_64 rng(spec.seed);
    Network net;
    std::size_t width = spec.input_dim;
    bool windowed = spec.window_rows > 0;
    std::size_t idx = 0;
    for (const auto& l : spec.layers) {
        const std::string name = "L" + std::to_string(idx++);
        switch (l.kind) {
            case LayerSpec::Kind::dense:
                net.add(std::make_unique<DenseLayer>(width, l.units, l.activation, rng, name));
                width = l.units;
                break;
            case LayerSpec::Kind::dropout:
                net.add(std::make_unique<DropoutLayer>(l.rate));
                break;
            case LayerSpec::Kind::temporal_attention:
                if (spec.input_level_fin) {
                    net.add(std::make_unique<WindowAttentionFinLayer>(
                        spec.input_dim, rng, *fin, att.layer_mode, att.trainable_weights,
                        att.trainable_q, att.trainable_tau));
                    width = 2 * spec.input_dim;
                } else {
                    net.add(std::make_unique<TemporalAttentionLayer>(spec.input_dim, rng, name));
                    width = spec.input_dim;
                }
                windowed = false;
                break;
            case LayerSpec::Kind::feature_attention:
                net.add(std::make_unique<FeatureAttentionLayer>(width, rng, name));
                break;
            case LayerSpec::Kind::fin_concat:
                net.add(std::make_unique<FinConcatLayer>(*fin, att.layer_mode,
                                                         att.trainable_weights, att.trainable_q,
                                                         att.trainable_tau));
                width += 1;
                break;
        }
    }
    (void)windowed;
    return net;
}

// Trained-FIN forward on a raw signal (normalizes internally).
inline double fin_forward(const FinModel& fin, std::span<const double> x) {
    return fin.forward(x);
}

inline std::optional<TsallisParams> fin_params_of(Network& net) {
    std::optional<double> q, tau;
    for (ParamGroup* p : net.param_groups()) {
        if (p->name == "fin.q") q = p->value[0];
        if (p->name == "fin.tau") tau = p->value[0];
    }
    if (q && tau) return TsallisParams{*q, *tau};
    return std::nullopt;
}

struct FinetuneResult {
    TrainResult train;
    TsallisParams final_params;
};

// Joint gradient descent over host weights and whichever FIN parameter
// groups were flagged trainable at attachment time. tau stays clamped at
// >= 1e-3 and q outside the Shannon band (see clamp_fin_params).
inline FinetuneResult finetune_params(Network& net, const std::vector<Tensor>& inputs,
                                      const std::vector<Tensor>& targets,
                                      const std::vector<std::size_t>& train_idx,
                                      const std::vector<std::size_t>& val_idx,
                                      const TrainConfig& cfg, std::mt19937_64& rng) {
    FinetuneResult out;
    out.train = train_network(net, inputs, targets, train_idx, val_idx, cfg, rng);
    const auto params = fin_params_of(net);
    if (!params) throw std::invalid_argument("network has no FIN attachment to fine-tune");
    out.final_params = *params;
    return out;
}

}  // namespace finlib
