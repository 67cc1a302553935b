#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "finlib/layers.hpp"
#include "finlib/tensor.hpp"

namespace finlib {

// Ordered layer stack with reverse-mode backward through cached activations.
class Network {
public:
    Network() = default;
    Network(const Network& other) { *this = other; }
    Network& operator=(const Network& other) {
        layers_.clear();
        layers_.reserve(other.layers_.size());
        for (const auto& l : other.layers_) layers_.push_back(l->clone());
        forward_done_ = other.forward_done_;
        return *this;
    }
    Network(Network&&) = default;
    Network& operator=(Network&&) = default;

    void add(std::unique_ptr<Layer> layer) { layers_.push_back(std::move(layer)); }

    std::size_t layer_count() const { return layers_.size(); }
    Layer& layer(std::size_t i) { return *layers_.at(i); }
    const Layer& layer(std::size_t i) const { return *layers_.at(i); }

    Tensor forward(const Tensor& x, bool train, std::mt19937_64& rng) {
        Tensor h = x;
        for (auto& l : layers_) h = l->forward(h, train, rng);
        if (!h.all_finite()) throw std::runtime_error("non-finite value in forward pass");
        forward_done_ = true;
        return h;
    }

    // Eval-mode forward for a frozen network; pure.
    Tensor predict(const Tensor& x) const {
        std::mt19937_64 dummy(0);
        Tensor h = x;
        for (const auto& l : layers_) {
            // forward() caches are irrelevant in eval mode but require mutability.
            h = const_cast<Layer&>(*l).forward(h, false, dummy);
        }
        return h;
    }

    // Accumulates parameter gradients; returns the gradient w.r.t. the input.
    Tensor backward(const Tensor& loss_grad) {
        if (!forward_done_) throw std::logic_error("backward called without a recorded forward pass");
        Tensor g = loss_grad;
        for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) g = (*it)->backward(g);
        return g;
    }

    std::vector<ParamGroup*> param_groups() {
        std::vector<ParamGroup*> out;
        for (auto& l : layers_) {
            for (ParamGroup* p : l->param_groups()) out.push_back(p);
        }
        return out;
    }

    std::vector<const ParamGroup*> param_groups() const {
        std::vector<const ParamGroup*> out;
        for (const auto& l : layers_) {
            for (ParamGroup* p : const_cast<Layer&>(*l).param_groups()) out.push_back(p);
        }
        return out;
    }

    void zero_grad() {
        for (ParamGroup* p : param_groups()) p->zero_grad();
    }

    std::size_t param_count(bool trainable_only = false) const {
        std::size_t n = 0;
        for (const ParamGroup* p : param_groups()) {
            if (!trainable_only || p->trainable) n += p->value.size();
        }
        return n;
    }

    // p <- p - lr * g for every trainable group.
    void sgd_step(double lr) {
        for (ParamGroup* p : param_groups()) {
            if (!p->trainable) continue;
            for (std::size_t i = 0; i < p->value.size(); ++i) p->value[i] -= lr * p->grad[i];
        }
    }

    std::vector<double> snapshot() const {
        std::vector<double> out;
        for (const ParamGroup* p : param_groups()) {
            out.insert(out.end(), p->value.values().begin(), p->value.values().end());
        }
        return out;
    }

    void restore(const std::vector<double>& snap) {
        std::size_t k = 0;
        for (ParamGroup* p : param_groups()) {
            for (auto& v : p->value.values()) {
                if (k >= snap.size()) throw std::invalid_argument("snapshot too short");
                v = snap[k++];
            }
        }
        if (k != snap.size()) throw std::invalid_argument("snapshot size mismatch");
    }

    std::string describe() const {
        std::string s;
        for (const auto& l : layers_) {
            if (!s.empty()) s += " -> ";
            s += l->describe();
        }
        return s;
    }

private:
    std::vector<std::unique_ptr<Layer>> layers_;
    bool forward_done_ = false;
};

// How a trained FIN is wired into a host network.
enum class FinMode { imitation, exact };

struct FinAttachment {
    enum class Mode { input_level, latent_concat };
    Mode mode = Mode::latent_concat;
    FinMode layer_mode = FinMode::imitation;
    bool trainable_weights = false;
    bool trainable_q = false;
    bool trainable_tau = false;
    std::size_t host_attach_index = 0;  // layer position for latent_concat
};

// Declarative topology. Dense widths are output units; input widths are
// derived by chaining, so inserting a concat layer shifts them automatically.
struct LayerSpec {
    enum class Kind { dense, dropout, temporal_attention, feature_attention, fin_concat } kind;
    std::size_t units = 0;                           // dense
    Activation activation = Activation::identity;    // dense
    double rate = 0.0;                               // dropout

    static LayerSpec make_dense(std::size_t units, Activation act) {
        return {Kind::dense, units, act, 0.0};
    }
    static LayerSpec make_dropout(double rate) {
        return {Kind::dropout, 0, Activation::identity, rate};
    }
    static LayerSpec make_temporal_attention() {
        return {Kind::temporal_attention, 0, Activation::identity, 0.0};
    }
    static LayerSpec make_feature_attention() {
        return {Kind::feature_attention, 0, Activation::identity, 0.0};
    }
    static LayerSpec make_fin_concat() {
        return {Kind::fin_concat, 0, Activation::identity, 0.0};
    }
};

struct NetworkSpec {
    std::vector<LayerSpec> layers;
    std::size_t input_dim = 0;          // feature count F
    std::size_t window_rows = 0;        // T > 0 means the input is a [T x F] window
    std::size_t output_dim = 0;
    std::uint64_t seed = 0;
    std::optional<FinAttachment> fin;   // set by attach_fin
    bool input_level_fin = false;       // append per-feature window entropies

    // Walks the layer chain and returns the final width; throws on
    // inconsistent dimensions, dropout range or double FIN attachment.
    std::size_t validate(std::size_t fin_input_length = 0) const {
        std::size_t width = input_dim;
        bool windowed = window_rows > 0;
        int fin_layers = input_level_fin ? 1 : 0;
        for (const auto& l : layers) {
            switch (l.kind) {
                case LayerSpec::Kind::dense:
                    if (windowed) throw std::invalid_argument("dense layer cannot consume a window; add temporal attention first");
                    if (l.units == 0) throw std::invalid_argument("dense layer needs units > 0");
                    width = l.units;
                    break;
                case LayerSpec::Kind::dropout:
                    if (!(l.rate >= 0.0 && l.rate < 1.0)) throw std::invalid_argument("dropout rate must lie in [0,1)");
                    break;
                case LayerSpec::Kind::temporal_attention:
                    if (!windowed) throw std::invalid_argument("temporal attention requires a windowed input");
                    windowed = false;
                    if (input_level_fin) width = 2 * input_dim;  // ctx + per-feature entropies
                    break;
                case LayerSpec::Kind::feature_attention:
                    if (windowed) throw std::invalid_argument("feature attention requires a flat vector");
                    break;
                case LayerSpec::Kind::fin_concat:
                    if (windowed) throw std::invalid_argument("fin_concat requires a flat vector");
                    if (++fin_layers > 1) throw std::invalid_argument("at most one FIN attachment per network");
                    if (fin_input_length != 0 && width != fin_input_length) {
                        throw std::invalid_argument("latent width does not match FIN input length");
                    }
                    width += 1;
                    break;
            }
        }
        if (windowed) throw std::invalid_argument("windowed input was never reduced; add temporal attention");
        if (output_dim != 0 && width != output_dim) {
            throw std::invalid_argument("network output width does not match output_dim");
        }
        return width;
    }
};

}  // namespace finlib
