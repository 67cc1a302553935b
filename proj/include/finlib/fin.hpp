#pragma once

#include <algorithm>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "finlib/entropy.hpp"
#include "finlib/network.hpp"
#include "finlib/train.hpp"

namespace finlib {

// FNV-1a, used to fingerprint resolved configurations.
inline std::uint64_t fnv1a(std::string_view s, std::uint64_t h = 1469598103934665603ull) {
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

struct SyntheticDatasetSpec {
    std::size_t n_samples = 50000;
    std::size_t signal_length = 32;
    std::uint64_t seed = 0;
    // distribution is fixed: i.i.d. uniform[0,1)

    void validate() const {
        if (n_samples < 1) throw std::invalid_argument("n_samples must be >= 1");
        if (signal_length < 2) throw std::invalid_argument("signal_length must be >= 2");
    }
};

inline std::vector<std::vector<double>> generate_synthetic(const SyntheticDatasetSpec& spec) {
    spec.validate();
    std::mt19937_64 rng(spec.seed);
    std::uniform_real_distribution<double> dist(0.0, 1.0);
    std::vector<std::vector<double>> out(spec.n_samples, std::vector<double>(spec.signal_length));
    for (auto& signal : out) {
        for (auto& v : signal) v = dist(rng);
    }
    return out;
}

// Canonical imitation input: min-max normalized, then sorted ascending.
// Entropy is permutation-invariant, and sorting collapses the input domain
// onto the order-statistics manifold, where each coordinate concentrates in
// a narrow band that a small dense stack fits far more accurately.
inline std::vector<double> canonicalize_input(std::span<const double> signal) {
    std::vector<double> x = normalize_input(signal);
    std::sort(x.begin(), x.end());
    return x;
}

// target[i] = H_q(tau) of the min-max normalized signal.
inline std::vector<double> label_with_oracle(const std::vector<std::vector<double>>& signals,
                                             const TsallisParams& params) {
    std::vector<double> targets;
    targets.reserve(signals.size());
    for (const auto& s : signals) {
        targets.push_back(tsallis_entropy(normalize_input(s), params));
    }
    return targets;
}

struct FinTrainConfig {
    std::vector<std::size_t> hidden = {64, 64};
    double learning_rate = 0.05;
    std::size_t batch_size = 32;
    std::size_t max_epochs = 200;
    PlateauScheduler scheduler;
    EarlyStopping early_stop;
    double val_fraction = 0.15;
    std::uint64_t seed = 0;

    void validate() const {
        if (!(val_fraction > 0.0 && val_fraction < 1.0)) {
            throw std::invalid_argument("validation fraction must lie in (0,1)");
        }
        if (!(learning_rate > 0.0)) throw std::invalid_argument("learning rate must be positive");
        scheduler.validate();
        early_stop.validate();
    }

    std::string canonical_string() const {
        std::string s = "fin:lr=" + std::to_string(learning_rate) +
                        ";batch=" + std::to_string(batch_size) +
                        ";epochs=" + std::to_string(max_epochs) +
                        ";val=" + std::to_string(val_fraction) +
                        ";seed=" + std::to_string(seed) + ";hidden=";
        for (std::size_t h : hidden) s += std::to_string(h) + ",";
        return s;
    }
};

struct FinProvenance {
    std::uint64_t config_hash = 0;
    std::uint64_t seed = 0;
    double final_train_mae = 0.0;
    double final_val_mae = 0.0;
    std::uint64_t epochs_run = 0;
    double max_abs_err = 0.0;
    double target_std = 0.0;
};

// A trained entropy imitator: dense stack + the (frozen) label parameters.
struct FinModel {
    Network network;
    TsallisParams params;
    std::size_t input_length = 0;
    FinProvenance provenance;

    // Canonicalizes the raw signal (normalize + sort) and runs the imitator.
    double forward(std::span<const double> signal) const {
        if (signal.size() != input_length) {
            throw std::invalid_argument("FIN input length mismatch");
        }
        const Tensor x = Tensor::vector(canonicalize_input(signal));
        const Tensor y = network.predict(x);
        return y[0];
    }
};

inline Network build_fin_network(std::size_t input_length,
                                 const std::vector<std::size_t>& hidden,
                                 std::mt19937_64& rng) {
    Network net;
    std::size_t width = input_length;
    std::size_t idx = 0;
    for (std::size_t h : hidden) {
        net.add(std::make_unique<DenseLayer>(width, h, Activation::relu, rng,
                                             "fin.h" + std::to_string(idx++)));
        width = h;
    }
    net.add(std::make_unique<DenseLayer>(width, 1, Activation::identity, rng, "fin.out"));
    return net;
}

struct FinTrainOutcome {
    FinModel model;
    TrainResult train;
    std::vector<std::size_t> train_idx;
    std::vector<std::size_t> val_idx;
};

// Trains the imitator on oracle-labeled uniform signals with L1 loss,
// ReduceLROnPlateau and early stopping. q and tau stay frozen here; they
// only become trainable when the FIN is embedded downstream.
inline FinTrainOutcome train_fin(const FinTrainConfig& config, const SyntheticDatasetSpec& spec,
                                 const TsallisParams& params) {
    config.validate();
    spec.validate();

    const auto signals = generate_synthetic(spec);
    const auto raw_targets = label_with_oracle(signals, params);

    std::vector<Tensor> inputs;
    inputs.reserve(signals.size());
    for (const auto& s : signals) inputs.push_back(Tensor::vector(canonicalize_input(s)));

    std::mt19937_64 rng(config.seed);
    FinTrainOutcome out;
    out.model.network = build_fin_network(spec.signal_length, config.hidden, rng);
    out.model.params = params;
    out.model.input_length = spec.signal_length;

    std::vector<std::size_t> idx(signals.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::shuffle(idx.begin(), idx.end(), rng);
    std::size_t n_val = static_cast<std::size_t>(config.val_fraction * static_cast<double>(idx.size()));
    n_val = std::max<std::size_t>(1, std::min(n_val, idx.size() - 1));
    out.val_idx.assign(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_val));
    out.train_idx.assign(idx.begin() + static_cast<std::ptrdiff_t>(n_val), idx.end());

    // The entropy of uniform noise concentrates hard around its mean, so the
    // raw targets sit orders of magnitude away from the Glorot output scale.
    // Train against standardized targets (statistics from the training split)
    // and fold the affine map back into the identity output layer afterwards;
    // under L1 this rescales losses exactly.
    double t_mean = 0.0;
    for (std::size_t i : out.train_idx) t_mean += raw_targets[i];
    t_mean /= static_cast<double>(out.train_idx.size());
    double t_var = 0.0;
    for (std::size_t i : out.train_idx) {
        t_var += (raw_targets[i] - t_mean) * (raw_targets[i] - t_mean);
    }
    double t_std = std::sqrt(t_var / static_cast<double>(out.train_idx.size()));
    if (!(t_std > 0.0)) t_std = 1.0;

    std::vector<Tensor> targets;
    targets.reserve(signals.size());
    for (double t : raw_targets) targets.push_back(Tensor({1}, {(t - t_mean) / t_std}));

    TrainConfig tc;
    tc.learning_rate = config.learning_rate;
    tc.batch_size = config.batch_size;
    tc.max_epochs = config.max_epochs;
    tc.scheduler = config.scheduler;
    tc.early_stop = config.early_stop;
    tc.loss = LossKind::l1;
    out.train = train_network(out.model.network, inputs, targets, out.train_idx, out.val_idx, tc, rng);

    auto& out_layer = dynamic_cast<DenseLayer&>(out.model.network.layer(
        out.model.network.layer_count() - 1));
    for (auto& w : out_layer.weights().value.values()) w *= t_std;
    out_layer.bias().value[0] = t_std * out_layer.bias().value[0] + t_mean;
    for (auto& e : out.train.history) {
        e.train_loss *= t_std;
        e.val_loss *= t_std;
    }
    out.train.best_val_loss *= t_std;

    FinProvenance& prov = out.model.provenance;
    prov.config_hash = fnv1a(config.canonical_string() + "|n=" + std::to_string(spec.n_samples) +
                             ";len=" + std::to_string(spec.signal_length) +
                             ";dseed=" + std::to_string(spec.seed) +
                             ";q=" + std::to_string(params.q) + ";tau=" + std::to_string(params.tau));
    prov.seed = config.seed;
    prov.epochs_run = out.train.epochs_run;
    if (!out.train.history.empty()) {
        prov.final_train_mae = out.train.history.back().train_loss;
        prov.final_val_mae = out.train.best_val_loss;
    }

    // Residual statistics on the validation split of the restored best model.
    double mean = 0.0;
    for (double t : raw_targets) mean += t;
    mean /= static_cast<double>(raw_targets.size());
    double var = 0.0;
    for (double t : raw_targets) var += (t - mean) * (t - mean);
    prov.target_std = std::sqrt(var / static_cast<double>(raw_targets.size()));
    double max_err = 0.0;
    for (std::size_t i : out.val_idx) {
        const Tensor pred = out.model.network.predict(inputs[i]);
        max_err = std::max(max_err, std::abs(pred[0] - raw_targets[i]));
    }
    prov.max_abs_err = max_err;
    return out;
}

struct FinEvalResult {
    double mae = 0.0;
    double max_abs_err = 0.0;
    double target_std = 0.0;
};

inline FinEvalResult evaluate_fin(const FinModel& model,
                                  const std::vector<std::vector<double>>& signals) {
    if (signals.empty()) throw std::invalid_argument("empty evaluation set");
    FinEvalResult r;
    std::vector<double> targets = label_with_oracle(signals, model.params);
    double sum_abs = 0.0, mean = 0.0;
    for (std::size_t i = 0; i < signals.size(); ++i) {
        if (signals[i].size() != model.input_length) {
            throw std::invalid_argument("signal length does not match FIN input length");
        }
        const double err = std::abs(model.forward(signals[i]) - targets[i]);
        sum_abs += err;
        r.max_abs_err = std::max(r.max_abs_err, err);
        mean += targets[i];
    }
    r.mae = sum_abs / static_cast<double>(signals.size());
    mean /= static_cast<double>(signals.size());
    double var = 0.0;
    for (double t : targets) var += (t - mean) * (t - mean);
    r.target_std = std::sqrt(var / static_cast<double>(targets.size()));
    return r;
}

// ---- serialization ----------------------------------------------------
//
// FIN model file, version 1 (little-endian, IEEE-754 doubles):
//   bytes 0-7   magic "FINMODEL"
//   u32         format version (1)
//   u64         input_length
//   f64 q, f64 tau
//   u64 config_hash, u64 seed, f64 final_train_mae, f64 final_val_mae,
//   u64 epochs_run, f64 max_abs_err, f64 target_std
//   u32         layer count
//   per layer:  u64 in_dim, u64 out_dim, u8 activation code,
//               out*in f64 weights (row-major), out f64 biases

inline constexpr char kFinMagic[8] = {'F', 'I', 'N', 'M', 'O', 'D', 'E', 'L'};
inline constexpr std::uint32_t kFinFormatVersion = 1;

namespace detail {

template <typename T>
void write_raw(std::ostream& os, const T& v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_raw(std::istream& is) {
    T v{};
    is.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!is) throw std::runtime_error("FIN model file truncated or unreadable");
    return v;
}

}  // namespace detail

inline void save_fin(const FinModel& model, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open for writing: " + path);
    os.write(kFinMagic, sizeof(kFinMagic));
    detail::write_raw(os, kFinFormatVersion);
    detail::write_raw<std::uint64_t>(os, model.input_length);
    detail::write_raw(os, model.params.q);
    detail::write_raw(os, model.params.tau);
    detail::write_raw(os, model.provenance.config_hash);
    detail::write_raw(os, model.provenance.seed);
    detail::write_raw(os, model.provenance.final_train_mae);
    detail::write_raw(os, model.provenance.final_val_mae);
    detail::write_raw(os, model.provenance.epochs_run);
    detail::write_raw(os, model.provenance.max_abs_err);
    detail::write_raw(os, model.provenance.target_std);

    const auto& net = model.network;
    detail::write_raw<std::uint32_t>(os, static_cast<std::uint32_t>(net.layer_count()));
    for (std::size_t i = 0; i < net.layer_count(); ++i) {
        const auto* dense = dynamic_cast<const DenseLayer*>(&net.layer(i));
        if (!dense) throw std::runtime_error("FIN model must be a pure dense stack");
        detail::write_raw<std::uint64_t>(os, dense->in_dim());
        detail::write_raw<std::uint64_t>(os, dense->out_dim());
        detail::write_raw<std::uint8_t>(os, static_cast<std::uint8_t>(dense->activation()));
        const auto& w = dense->weights().value.values();
        const auto& b = dense->bias().value.values();
        os.write(reinterpret_cast<const char*>(w.data()),
                 static_cast<std::streamsize>(w.size() * sizeof(double)));
        os.write(reinterpret_cast<const char*>(b.data()),
                 static_cast<std::streamsize>(b.size() * sizeof(double)));
    }
    if (!os) throw std::runtime_error("write failed: " + path);
}

inline FinModel load_fin(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open FIN model file: " + path);
    char magic[8];
    is.read(magic, sizeof(magic));
    if (!is || std::memcmp(magic, kFinMagic, sizeof(magic)) != 0) {
        throw std::runtime_error("not a FIN model file: " + path);
    }
    const auto version = detail::read_raw<std::uint32_t>(is);
    if (version != kFinFormatVersion) {
        throw std::runtime_error("unsupported FIN model format version " + std::to_string(version));
    }
    FinModel model;
    model.input_length = detail::read_raw<std::uint64_t>(is);
    model.params.q = detail::read_raw<double>(is);
    model.params.tau = detail::read_raw<double>(is);
    model.provenance.config_hash = detail::read_raw<std::uint64_t>(is);
    model.provenance.seed = detail::read_raw<std::uint64_t>(is);
    model.provenance.final_train_mae = detail::read_raw<double>(is);
    model.provenance.final_val_mae = detail::read_raw<double>(is);
    model.provenance.epochs_run = detail::read_raw<std::uint64_t>(is);
    model.provenance.max_abs_err = detail::read_raw<double>(is);
    model.provenance.target_std = detail::read_raw<double>(is);

    const auto n_layers = detail::read_raw<std::uint32_t>(is);
    std::size_t expected_in = model.input_length;
    for (std::uint32_t i = 0; i < n_layers; ++i) {
        const auto in_dim = detail::read_raw<std::uint64_t>(is);
        const auto out_dim = detail::read_raw<std::uint64_t>(is);
        const auto act_code = detail::read_raw<std::uint8_t>(is);
        if (in_dim != expected_in) throw std::runtime_error("FIN model layer dimensions do not chain");
        if (act_code > static_cast<std::uint8_t>(Activation::softmax)) {
            throw std::runtime_error("FIN model has an unknown activation code");
        }
        if (in_dim == 0 || out_dim == 0 || in_dim > (1u << 20) || out_dim > (1u << 20)) {
            throw std::runtime_error("FIN model has implausible layer dimensions");
        }
        const std::string name =
            (i + 1 == n_layers) ? std::string("fin.out") : "fin.h" + std::to_string(i);
        auto layer = std::make_unique<DenseLayer>(in_dim, out_dim,
                                                  static_cast<Activation>(act_code), name);
        auto& w = layer->weights().value.values();
        auto& b = layer->bias().value.values();
        is.read(reinterpret_cast<char*>(w.data()),
                static_cast<std::streamsize>(w.size() * sizeof(double)));
        is.read(reinterpret_cast<char*>(b.data()),
                static_cast<std::streamsize>(b.size() * sizeof(double)));
        if (!is) throw std::runtime_error("FIN model file truncated");
        expected_in = out_dim;
        model.network.add(std::move(layer));
    }
    if (n_layers == 0 || expected_in != 1) {
        throw std::runtime_error("FIN model must end in a scalar output");
    }
    return model;
}

}  // namespace finlib
