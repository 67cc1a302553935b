#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "finlib/data.hpp"
#include "finlib/embedding.hpp"
#include "finlib/entropy.hpp"
#include "finlib/fin.hpp"
#include "finlib/metrics.hpp"
#include "finlib/network.hpp"
#include "finlib/train.hpp"

namespace finlib {

using json = nlohmann::json;

inline constexpr int kReportSchemaVersion = 1;

// Parameters of the host network that are not part of the FIN itself;
// the capacity-fairness comparison uses this count.
inline std::size_t non_fin_param_count(Network& net) {
    std::size_t n = 0;
    for (ParamGroup* p : net.param_groups()) {
        if (p->name.rfind("fin.", 0) == 0) continue;
        n += p->value.size();
    }
    return n;
}

// A FinModel carrier for exact-mode embeddings: no trained stack, just the
// closed form's parameters and expected input width.
inline FinModel make_exact_fin(std::size_t input_length, const TsallisParams& params) {
    FinModel m;
    m.input_length = input_length;
    m.params = params;
    return m;
}

// ---- baseline topology search ------------------------------------------

struct BaselineCandidate {
    NetworkSpec spec;
    std::optional<Network> network;  // pre-built override (otherwise built from spec)
};

struct BaselineSearchResult {
    std::size_t best_index = 0;
    Network best;
    double best_val_loss = 0.0;
    json report;  // per-candidate parameter counts and scores
};

// Trains every candidate identically and picks the best validation loss.
// Ties break toward the lower parameter count, then the earlier index.
// Candidates below `min_params` are a configuration error.
inline BaselineSearchResult baseline_search(std::vector<BaselineCandidate> candidates,
                                            const std::vector<Tensor>& inputs,
                                            const std::vector<Tensor>& targets,
                                            const std::vector<std::size_t>& train_idx,
                                            const std::vector<std::size_t>& val_idx,
                                            const TrainConfig& cfg, std::size_t min_params) {
    if (candidates.empty()) throw std::invalid_argument("baseline search needs candidates");
    if (candidates.size() > 10) throw std::invalid_argument("at most ten baseline variations");

    std::vector<Network> nets;
    nets.reserve(candidates.size());
    for (auto& c : candidates) {
        Network net = c.network ? std::move(*c.network) : build_network(c.spec);
        if (net.param_count() < min_params) {
            throw std::invalid_argument("baseline candidate has fewer parameters than the FIN network");
        }
        nets.push_back(std::move(net));
    }

    BaselineSearchResult result;
    result.report = json::array();
    bool have_best = false;
    std::size_t best_params = 0;
    for (std::size_t i = 0; i < nets.size(); ++i) {
        std::mt19937_64 rng(candidates[i].spec.seed);
        const TrainResult tr = train_network(nets[i], inputs, targets, train_idx, val_idx, cfg, rng);
        const std::size_t params = nets[i].param_count();
        result.report.push_back({{"index", i},
                                 {"param_count", params},
                                 {"val_loss", tr.best_val_loss},
                                 {"epochs_run", tr.epochs_run},
                                 {"topology", nets[i].describe()}});
        const bool better = !have_best || tr.best_val_loss < result.best_val_loss ||
                            (tr.best_val_loss == result.best_val_loss && params < best_params);
        if (better) {
            have_best = true;
            result.best_index = i;
            result.best_val_loss = tr.best_val_loss;
            best_params = params;
            result.best = nets[i];
        }
    }
    return result;
}

// ---- synthetic fixtures ---------------------------------------------------

// Feature columns follow reflected random walks in [0,1]; the target at row t
// is a fixed affine function of the mean per-feature Tsallis entropy over the
// preceding `window` rows, so the next value is a deterministic function of
// the window entropies.
inline TimeSeriesTable make_entropy_regression_table(std::size_t n_rows, std::size_t n_features,
                                                     std::size_t window,
                                                     const TsallisParams& params,
                                                     std::uint64_t seed) {
    if (n_rows <= window + 1) throw std::invalid_argument("need more rows than the window");
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> step(0.0, 0.15);
    std::uniform_real_distribution<double> start(0.0, 1.0);

    TimeSeriesTable table;
    for (std::size_t c = 0; c < n_features; ++c) table.feature_names.push_back("f" + std::to_string(c));
    std::vector<double> state(n_features);
    for (auto& s : state) s = start(rng);
    table.features.resize(n_rows, std::vector<double>(n_features));
    table.target.resize(n_rows, 0.0);
    table.time_index.resize(n_rows);
    for (std::size_t t = 0; t < n_rows; ++t) {
        for (std::size_t c = 0; c < n_features; ++c) {
            table.features[t][c] = state[c];
            double next = state[c] + step(rng);
            while (next < 0.0 || next > 1.0) next = next < 0.0 ? -next : 2.0 - next;
            state[c] = next;
        }
        char buf[16];
        std::snprintf(buf, sizeof(buf), "%06zu", t);
        table.time_index[t] = buf;
    }
    std::vector<double> col(window);
    for (std::size_t t = window; t < n_rows; ++t) {
        double h = 0.0;
        for (std::size_t c = 0; c < n_features; ++c) {
            for (std::size_t r = 0; r < window; ++r) col[r] = table.features[t - window + r][c];
            h += tsallis_entropy(normalize_input(col), params);
        }
        table.target[t] = 50.0 + 100.0 * h / static_cast<double>(n_features);
    }
    table.rows_read = n_rows;
    return table;
}

struct ClassDataset {
    std::vector<Tensor> inputs;
    std::vector<int> labels;
    int n_classes = 2;
};

// Uniform signals; class = [entropy of the signal above the median entropy].
inline ClassDataset make_entropy_classification(std::size_t n_samples, std::size_t signal_length,
                                                const TsallisParams& params, std::uint64_t seed) {
    SyntheticDatasetSpec spec{n_samples, signal_length, seed};
    const auto signals = generate_synthetic(spec);
    std::vector<double> h(n_samples);
    for (std::size_t i = 0; i < n_samples; ++i) {
        h[i] = tsallis_entropy(normalize_input(signals[i]), params);
    }
    std::vector<double> sorted = h;
    std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(n_samples / 2),
                     sorted.end());
    const double median = sorted[n_samples / 2];

    ClassDataset out;
    out.inputs.reserve(n_samples);
    for (std::size_t i = 0; i < n_samples; ++i) {
        // The class depends only on the order statistics of the signal
        // (entropy is permutation-invariant), so each sample is presented in
        // canonical form: min-max normalized and sorted ascending. Ordering
        // is a nuisance factor the classifiers are not meant to model.
        out.inputs.push_back(Tensor::vector(canonicalize_input(signals[i])));
        out.labels.push_back(h[i] > median ? 1 : 0);
    }
    return out;
}

// ---- experiment configuration --------------------------------------------

struct ExperimentConfig {
    int version = 1;
    std::string kind = "regression";  // or "classification"

    // dataset
    std::string dataset_kind = "synthetic";  // "csv" or "synthetic"
    std::string dataset_path;
    TableSchema schema;
    std::size_t synth_rows = 600;      // regression fixture
    std::size_t synth_features = 3;    // regression fixture
    std::size_t synth_samples = 2400;  // classification fixture
    std::size_t signal_length = 32;    // classification fixture
    std::uint64_t data_seed = 7;

    // model
    std::size_t window = 7;
    double train_fraction = 0.85;
    double val_fraction = 0.15;
    std::vector<std::size_t> hidden = {32, 16};  // regression dense stack
    std::string arch = "exp3";                   // classification: "exp2" or "exp3"
    int n_classes = 2;

    // FIN
    std::string fin_mode = "exact";  // "exact" or "imitation"
    std::string fin_model_path;      // required for imitation mode
    bool trainable_weights = false;
    bool trainable_q = true;
    bool trainable_tau = true;
    double q = 1.5;
    double tau = 1.0;

    TrainConfig optimizer;
    std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5};
    std::size_t baseline_variations = 3;  // auto-generated capacity-matched candidates
    json cited = json::array();

    static ExperimentConfig from_json(const json& j);
    json to_json() const;

    FinMode mode_enum() const {
        if (fin_mode == "exact") return FinMode::exact;
        if (fin_mode == "imitation") return FinMode::imitation;
        throw std::invalid_argument("fin mode must be 'exact' or 'imitation'");
    }
};

namespace detail {

template <typename T>
void get_if(const json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

inline void parse_optimizer(const json& j, TrainConfig& cfg) {
    get_if(j, "learning_rate", cfg.learning_rate);
    get_if(j, "batch_size", cfg.batch_size);
    get_if(j, "max_epochs", cfg.max_epochs);
    if (j.contains("plateau")) {
        const json& p = j.at("plateau");
        get_if(p, "factor", cfg.scheduler.factor);
        get_if(p, "patience", cfg.scheduler.patience);
        get_if(p, "min_delta", cfg.scheduler.min_delta);
    }
    if (j.contains("early_stop")) {
        const json& p = j.at("early_stop");
        get_if(p, "patience", cfg.early_stop.patience);
        get_if(p, "min_delta", cfg.early_stop.min_delta);
    }
}

}  // namespace detail

inline ExperimentConfig ExperimentConfig::from_json(const json& j) {
    ExperimentConfig c;
    detail::get_if(j, "version", c.version);
    if (c.version != 1) throw std::invalid_argument("unsupported experiment config version");
    detail::get_if(j, "kind", c.kind);
    if (c.kind != "regression" && c.kind != "classification") {
        throw std::invalid_argument("experiment kind must be 'regression' or 'classification'");
    }
    if (j.contains("dataset")) {
        const json& d = j.at("dataset");
        detail::get_if(d, "kind", c.dataset_kind);
        detail::get_if(d, "path", c.dataset_path);
        detail::get_if(d, "time_column", c.schema.time_column);
        detail::get_if(d, "features", c.schema.feature_columns);
        detail::get_if(d, "target", c.schema.target_column);
        detail::get_if(d, "label", c.schema.target_column);
        detail::get_if(d, "rows", c.synth_rows);
        detail::get_if(d, "n_features", c.synth_features);
        detail::get_if(d, "n_samples", c.synth_samples);
        detail::get_if(d, "signal_length", c.signal_length);
        detail::get_if(d, "seed", c.data_seed);
    }
    detail::get_if(j, "window", c.window);
    detail::get_if(j, "train_fraction", c.train_fraction);
    detail::get_if(j, "val_fraction", c.val_fraction);
    detail::get_if(j, "hidden", c.hidden);
    detail::get_if(j, "arch", c.arch);
    detail::get_if(j, "n_classes", c.n_classes);
    if (j.contains("fin")) {
        const json& f = j.at("fin");
        detail::get_if(f, "mode", c.fin_mode);
        detail::get_if(f, "model_path", c.fin_model_path);
        detail::get_if(f, "trainable_weights", c.trainable_weights);
        detail::get_if(f, "trainable_q", c.trainable_q);
        detail::get_if(f, "trainable_tau", c.trainable_tau);
        detail::get_if(f, "q", c.q);
        detail::get_if(f, "tau", c.tau);
    }
    if (j.contains("optimizer")) detail::parse_optimizer(j.at("optimizer"), c.optimizer);
    detail::get_if(j, "seeds", c.seeds);
    detail::get_if(j, "baseline_variations", c.baseline_variations);
    if (j.contains("cited")) c.cited = j.at("cited");
    if (c.seeds.empty()) throw std::invalid_argument("experiment needs at least one seed");
    if (c.baseline_variations < 1 || c.baseline_variations > 10) {
        throw std::invalid_argument("baseline_variations must lie in [1,10]");
    }
    c.optimizer.validate();
    return c;
}

inline json ExperimentConfig::to_json() const {
    json d{{"kind", dataset_kind}, {"seed", data_seed}};
    if (dataset_kind == "csv") {
        d["path"] = dataset_path;
        d["time_column"] = schema.time_column;
        d["features"] = schema.feature_columns;
        d["target"] = schema.target_column;
    } else if (kind == "regression") {
        d["rows"] = synth_rows;
        d["n_features"] = synth_features;
    } else {
        d["n_samples"] = synth_samples;
        d["signal_length"] = signal_length;
    }
    json opt{{"learning_rate", optimizer.learning_rate},
             {"batch_size", optimizer.batch_size},
             {"max_epochs", optimizer.max_epochs},
             {"plateau",
              {{"factor", optimizer.scheduler.factor},
               {"patience", optimizer.scheduler.patience},
               {"min_delta", optimizer.scheduler.min_delta}}},
             {"early_stop",
              {{"patience", optimizer.early_stop.patience},
               {"min_delta", optimizer.early_stop.min_delta}}}};
    json out{{"version", version},
             {"kind", kind},
             {"dataset", d},
             {"window", window},
             {"train_fraction", train_fraction},
             {"val_fraction", val_fraction},
             {"hidden", hidden},
             {"arch", arch},
             {"n_classes", n_classes},
             {"fin",
              {{"mode", fin_mode},
               {"model_path", fin_model_path},
               {"trainable_weights", trainable_weights},
               {"trainable_q", trainable_q},
               {"trainable_tau", trainable_tau},
               {"q", q},
               {"tau", tau}}},
             {"optimizer", opt},
             {"seeds", seeds},
             {"baseline_variations", baseline_variations},
             {"cited", cited}};
    return out;
}

inline std::uint64_t config_hash(const ExperimentConfig& c) {
    return fnv1a(c.to_json().dump());
}

// ---- shared helpers --------------------------------------------------------

inline double median_of(std::vector<double> v) {
    if (v.empty()) throw std::invalid_argument("median of empty vector");
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

inline FinModel resolve_fin(const ExperimentConfig& cfg, std::size_t input_length) {
    if (cfg.mode_enum() == FinMode::exact) {
        return make_exact_fin(input_length, {cfg.q, cfg.tau});
    }
    if (cfg.fin_model_path.empty()) {
        throw std::invalid_argument("imitation mode requires fin.model_path");
    }
    FinModel fin = load_fin(cfg.fin_model_path);
    if (fin.input_length != input_length) {
        throw std::invalid_argument("FIN input length does not match the attachment point");
    }
    return fin;
}

// Capacity-matched baseline candidates: widen the first hidden layer until
// the parameter count reaches min_params, then step the width upward.
inline std::vector<BaselineCandidate> make_baseline_candidates(const NetworkSpec& base,
                                                               std::size_t min_params,
                                                               std::size_t n_variations) {
    auto first_dense = std::find_if(base.layers.begin(), base.layers.end(), [](const LayerSpec& l) {
        return l.kind == LayerSpec::Kind::dense;
    });
    if (first_dense == base.layers.end()) throw std::invalid_argument("baseline needs a dense layer");
    const std::size_t slot = static_cast<std::size_t>(first_dense - base.layers.begin());

    auto params_with_width = [&](std::size_t w) {
        NetworkSpec s = base;
        s.layers[slot].units = w;
        s.output_dim = 0;  // widths downstream shift; only the chain matters here
        // keep the chain valid: the layer after the widened one adapts automatically
        Network net = build_network(s);
        return net.param_count();
    };

    std::size_t width = base.layers[slot].units;
    while (params_with_width(width) < min_params) ++width;

    std::vector<BaselineCandidate> out;
    for (std::size_t k = 0; k < n_variations; ++k) {
        NetworkSpec s = base;
        s.layers[slot].units = width + 2 * k;
        s.output_dim = 0;
        out.push_back({std::move(s), std::nullopt});
    }
    return out;
}

// ---- regression experiment (Exp-I shape) -----------------------------------

inline json run_regression_experiment(const ExperimentConfig& cfg) {
    TimeSeriesTable table;
    if (cfg.dataset_kind == "csv") {
        table = load_table(cfg.dataset_path, cfg.schema);
    } else {
        table = make_entropy_regression_table(cfg.synth_rows, cfg.synth_features, cfg.window,
                                              {cfg.q, cfg.tau}, cfg.data_seed);
    }
    const auto samples = make_windows(table, cfg.window);
    auto [train_samples, test_samples] = chrono_split(samples, cfg.train_fraction);

    const std::size_t f = table.feature_count();
    const std::size_t t_rows = cfg.window;

    // Standardization statistics from the training split only.
    std::vector<double> feat_mean(f, 0.0), feat_std(f, 1.0);
    double tgt_mean = 0.0, tgt_std = 1.0;
    {
        std::vector<double> sum(f, 0.0), sum2(f, 0.0);
        double tsum = 0.0, tsum2 = 0.0;
        std::size_t count = 0;
        for (const auto& s : train_samples) {
            for (std::size_t r = 0; r < t_rows; ++r) {
                for (std::size_t c = 0; c < f; ++c) {
                    sum[c] += s.window.at(r, c);
                    sum2[c] += s.window.at(r, c) * s.window.at(r, c);
                }
            }
            count += t_rows;
            tsum += s.target;
            tsum2 += s.target * s.target;
        }
        for (std::size_t c = 0; c < f; ++c) {
            feat_mean[c] = sum[c] / static_cast<double>(count);
            const double var = sum2[c] / static_cast<double>(count) - feat_mean[c] * feat_mean[c];
            feat_std[c] = var > 1e-12 ? std::sqrt(var) : 1.0;
        }
        tgt_mean = tsum / static_cast<double>(train_samples.size());
        const double var =
            tsum2 / static_cast<double>(train_samples.size()) - tgt_mean * tgt_mean;
        tgt_std = var > 1e-12 ? std::sqrt(var) : 1.0;
    }

    auto standardize = [&](const std::vector<WindowedSample>& src, std::vector<Tensor>& xs,
                           std::vector<Tensor>& ys) {
        for (const auto& s : src) {
            Tensor w = s.window;
            for (std::size_t r = 0; r < t_rows; ++r) {
                for (std::size_t c = 0; c < f; ++c) {
                    w.at(r, c) = (w.at(r, c) - feat_mean[c]) / feat_std[c];
                }
            }
            xs.push_back(std::move(w));
            ys.push_back(Tensor({1}, {(s.target - tgt_mean) / tgt_std}));
        }
    };
    std::vector<Tensor> inputs, targets;
    standardize(train_samples, inputs, targets);
    standardize(test_samples, inputs, targets);

    // Validation: chronological tail of the training split.
    const std::size_t n_train_all = train_samples.size();
    const std::size_t n_val =
        std::max<std::size_t>(1, static_cast<std::size_t>(cfg.val_fraction *
                                                          static_cast<double>(n_train_all)));
    std::vector<std::size_t> train_idx, val_idx, test_idx;
    for (std::size_t i = 0; i < n_train_all - n_val; ++i) train_idx.push_back(i);
    for (std::size_t i = n_train_all - n_val; i < n_train_all; ++i) val_idx.push_back(i);
    for (std::size_t i = n_train_all; i < inputs.size(); ++i) test_idx.push_back(i);

    // Host topology: temporal attention -> feature attention -> dense stack.
    NetworkSpec host;
    host.input_dim = f;
    host.window_rows = t_rows;
    host.output_dim = 1;
    host.layers.push_back(LayerSpec::make_temporal_attention());
    host.layers.push_back(LayerSpec::make_feature_attention());
    for (std::size_t h : cfg.hidden) host.layers.push_back(LayerSpec::make_dense(h, Activation::relu));
    host.layers.push_back(LayerSpec::make_dense(1, Activation::identity));

    FinModel fin = resolve_fin(cfg, t_rows);
    FinAttachment att;
    att.mode = FinAttachment::Mode::input_level;
    att.layer_mode = cfg.mode_enum();
    att.trainable_weights = cfg.trainable_weights;
    att.trainable_q = cfg.trainable_q;
    att.trainable_tau = cfg.trainable_tau;
    const NetworkSpec fin_spec_base = attach_fin(host, fin, att);

    TrainConfig tc = cfg.optimizer;
    tc.loss = LossKind::mse;

    auto predict_metrics = [&](Network& net, json& row) {
        std::vector<double> preds, actual;
        for (std::size_t i : test_idx) {
            const Tensor y = net.predict(inputs[i]);
            preds.push_back(y[0] * tgt_std + tgt_mean);
            actual.push_back(test_samples[i - n_train_all].target);
        }
        row["rmse"] = rmse(preds, actual);
        row["mape"] = mape(preds, actual);
    };

    json runs = json::array();
    std::vector<double> base_rmses, fin_rmses, base_mapes, fin_mapes;
    for (std::uint64_t seed : cfg.seeds) {
        json run{{"seed", seed}};

        // FIN-ENN first: its non-FIN parameter count sets the capacity floor.
        NetworkSpec fin_spec = fin_spec_base;
        fin_spec.seed = seed;
        Network fin_net = build_network(fin_spec, &fin);
        const std::size_t capacity_floor = non_fin_param_count(fin_net);

        std::mt19937_64 rng(seed);
        const TrainResult fr = train_network(fin_net, inputs, targets, train_idx, val_idx, tc, rng);
        json fin_row{{"epochs_run", fr.epochs_run},
                     {"val_loss", fr.best_val_loss},
                     {"diverged", fr.diverged}};
        predict_metrics(fin_net, fin_row);
        if (const auto p = fin_params_of(fin_net)) {
            fin_row["q"] = p->q;
            fin_row["tau"] = p->tau;
        }

        NetworkSpec base_spec = host;
        base_spec.seed = seed;
        auto candidates = make_baseline_candidates(base_spec, capacity_floor,
                                                   cfg.baseline_variations);
        for (auto& c : candidates) c.spec.seed = seed;
        BaselineSearchResult bs = baseline_search(std::move(candidates), inputs, targets,
                                                  train_idx, val_idx, tc, capacity_floor);
        json base_row{{"val_loss", bs.best_val_loss},
                      {"candidate_index", bs.best_index},
                      {"search", bs.report}};
        predict_metrics(bs.best, base_row);

        const std::size_t base_params = bs.best.param_count();
        if (base_params < capacity_floor) throw std::logic_error("capacity fairness violated");
        run["capacity"] = {{"baseline_params", base_params},
                           {"fin_enn_host_params", capacity_floor},
                           {"fin_enn_total_params", fin_net.param_count()}};
        run["baseline"] = base_row;
        run["fin_enn"] = fin_row;
        runs.push_back(run);

        base_rmses.push_back(base_row["rmse"].get<double>());
        base_mapes.push_back(base_row["mape"].get<double>());
        fin_rmses.push_back(fin_row["rmse"].get<double>());
        fin_mapes.push_back(fin_row["mape"].get<double>());
    }

    json report{{"schema_version", kReportSchemaVersion},
                {"kind", "regression"},
                {"config", cfg.to_json()},
                {"config_hash", config_hash(cfg)},
                {"fin_mode", cfg.fin_mode},
                {"ingestion", {{"rows_read", table.rows_read}, {"rows_dropped", table.rows_dropped}}},
                {"runs", runs},
                {"median",
                 {{"baseline", {{"rmse", median_of(base_rmses)}, {"mape", median_of(base_mapes)}}},
                  {"fin_enn", {{"rmse", median_of(fin_rmses)}, {"mape", median_of(fin_mapes)}}}}},
                {"cited", cfg.cited}};
    return report;
}

// ---- classification experiment (Exp-II / Exp-III shapes) --------------------

inline ClassDataset load_class_table(const std::string& path, const TableSchema& schema) {
    const TimeSeriesTable t = load_table(path, schema);
    ClassDataset out;
    int max_label = 0;
    for (std::size_t i = 0; i < t.rows(); ++i) {
        out.inputs.push_back(Tensor::vector(t.features[i]));
        const int label = static_cast<int>(std::lround(t.target[i]));
        if (label < 0) throw std::runtime_error("negative class label in dataset");
        out.labels.push_back(label);
        max_label = std::max(max_label, label);
    }
    out.n_classes = max_label + 1;
    return out;
}

// Stratified disjoint split of label indices.
inline void stratified_split(const std::vector<int>& labels, double train_frac,
                             double val_frac, std::mt19937_64& rng,
                             std::vector<std::size_t>& train_idx, std::vector<std::size_t>& val_idx,
                             std::vector<std::size_t>& test_idx) {
    std::map<int, std::vector<std::size_t>> by_class;
    for (std::size_t i = 0; i < labels.size(); ++i) by_class[labels[i]].push_back(i);
    for (auto& [label, idx] : by_class) {
        std::shuffle(idx.begin(), idx.end(), rng);
        const std::size_t n = idx.size();
        const std::size_t n_train_all = static_cast<std::size_t>(train_frac * static_cast<double>(n));
        const std::size_t n_val = std::max<std::size_t>(
            1, static_cast<std::size_t>(val_frac * static_cast<double>(n_train_all)));
        if (n_train_all <= n_val || n_train_all >= n) {
            throw std::invalid_argument("class too small for a stratified split");
        }
        for (std::size_t k = 0; k < n_train_all - n_val; ++k) train_idx.push_back(idx[k]);
        for (std::size_t k = n_train_all - n_val; k < n_train_all; ++k) val_idx.push_back(idx[k]);
        for (std::size_t k = n_train_all; k < n; ++k) test_idx.push_back(idx[k]);
    }
    std::sort(train_idx.begin(), train_idx.end());
    std::sort(val_idx.begin(), val_idx.end());
    std::sort(test_idx.begin(), test_idx.end());
}

inline json run_classification_experiment(const ExperimentConfig& cfg) {
    ClassDataset data;
    if (cfg.dataset_kind == "csv") {
        data = load_class_table(cfg.dataset_path, cfg.schema);
    } else {
        data = make_entropy_classification(cfg.synth_samples, cfg.signal_length, {cfg.q, cfg.tau},
                                           cfg.data_seed);
    }
    const int n_classes = std::max(cfg.n_classes, data.n_classes);
    const bool binary = n_classes == 2;
    const std::size_t in_dim = data.inputs.front().size();

    // Targets: sigmoid scalar for binary, one-hot softmax otherwise.
    std::vector<Tensor> targets;
    for (int label : data.labels) {
        if (binary) {
            targets.push_back(Tensor({1}, {static_cast<double>(label)}));
        } else {
            Tensor t({static_cast<std::size_t>(n_classes)});
            t[static_cast<std::size_t>(label)] = 1.0;
            targets.push_back(std::move(t));
        }
    }

    NetworkSpec host;
    host.input_dim = in_dim;
    host.output_dim = static_cast<std::size_t>(binary ? 1 : n_classes);
    std::size_t latent = 0;
    if (cfg.arch == "exp2") {
        for (std::size_t h : {512, 256, 128, 64, 32}) {
            host.layers.push_back(LayerSpec::make_dense(h, Activation::relu));
            host.layers.push_back(LayerSpec::make_dropout(0.5));
        }
        latent = 32;
    } else if (cfg.arch == "exp3") {
        host.layers.push_back(LayerSpec::make_dense(256, Activation::relu));
        host.layers.push_back(LayerSpec::make_dense(32, Activation::relu));
        latent = 32;
    } else {
        throw std::invalid_argument("classification arch must be 'exp2' or 'exp3'");
    }
    const std::size_t attach_index = host.layers.size();
    host.layers.push_back(LayerSpec::make_dense(host.output_dim,
                                                binary ? Activation::sigmoid : Activation::softmax));

    FinModel fin = resolve_fin(cfg, latent);
    FinAttachment att;
    att.mode = FinAttachment::Mode::latent_concat;
    att.layer_mode = cfg.mode_enum();
    att.trainable_weights = cfg.trainable_weights;
    att.trainable_q = cfg.trainable_q;
    att.trainable_tau = cfg.trainable_tau;
    att.host_attach_index = attach_index;
    const NetworkSpec fin_spec_base = attach_fin(host, fin, att);

    TrainConfig tc = cfg.optimizer;
    tc.loss = LossKind::mse;

    auto metrics_json = [&](const ClassMetrics& m) {
        json j{{"accuracy", m.accuracy}};
        if (m.specificity) j["specificity"] = *m.specificity; else j["specificity"] = "undefined";
        if (m.sensitivity) j["sensitivity"] = *m.sensitivity; else j["sensitivity"] = "undefined";
        return j;
    };

    auto evaluate = [&](Network& net, const std::vector<std::size_t>& idx) {
        std::vector<int> preds, truth;
        for (std::size_t i : idx) {
            const Tensor y = net.predict(data.inputs[i]);
            int p;
            if (binary) {
                p = y[0] > 0.5 ? 1 : 0;
            } else {
                p = static_cast<int>(std::max_element(y.values().begin(), y.values().end()) -
                                     y.values().begin());
            }
            preds.push_back(p);
            truth.push_back(data.labels[i]);
        }
        return binary ? class_metrics(preds, truth) : multiclass_metrics(preds, truth, n_classes);
    };

    json runs = json::array();
    std::vector<double> base_accs, fin_accs;
    for (std::uint64_t seed : cfg.seeds) {
        std::vector<std::size_t> train_idx, val_idx, test_idx;
        std::mt19937_64 split_rng(seed ^ 0x9e3779b97f4a7c15ull);
        stratified_split(data.labels, cfg.train_fraction, cfg.val_fraction, split_rng, train_idx,
                         val_idx, test_idx);

        NetworkSpec fin_spec = fin_spec_base;
        fin_spec.seed = seed;
        Network fin_net = build_network(fin_spec, &fin);
        const std::size_t capacity_floor = non_fin_param_count(fin_net);

        std::mt19937_64 rng(seed);
        const TrainResult fr =
            train_network(fin_net, data.inputs, targets, train_idx, val_idx, tc, rng);
        const ClassMetrics fm = evaluate(fin_net, test_idx);
        json fin_row = metrics_json(fm);
        fin_row["epochs_run"] = fr.epochs_run;
        fin_row["val_loss"] = fr.best_val_loss;
        if (const auto p = fin_params_of(fin_net)) {
            fin_row["q"] = p->q;
            fin_row["tau"] = p->tau;
        }

        NetworkSpec base_spec = host;
        base_spec.seed = seed;
        auto candidates =
            make_baseline_candidates(base_spec, capacity_floor, cfg.baseline_variations);
        for (auto& c : candidates) c.spec.seed = seed;
        BaselineSearchResult bs = baseline_search(std::move(candidates), data.inputs, targets,
                                                  train_idx, val_idx, tc, capacity_floor);
        const ClassMetrics bm = evaluate(bs.best, test_idx);
        json base_row = metrics_json(bm);
        base_row["val_loss"] = bs.best_val_loss;
        base_row["candidate_index"] = bs.best_index;
        base_row["search"] = bs.report;

        const std::size_t base_params = bs.best.param_count();
        if (base_params < capacity_floor) throw std::logic_error("capacity fairness violated");

        json run{{"seed", seed},
                 {"capacity",
                  {{"baseline_params", base_params},
                   {"fin_enn_host_params", capacity_floor},
                   {"fin_enn_total_params", fin_net.param_count()}}},
                 {"baseline", base_row},
                 {"fin_enn", fin_row}};
        runs.push_back(run);
        base_accs.push_back(bm.accuracy);
        fin_accs.push_back(fm.accuracy);
    }

    json report{{"schema_version", kReportSchemaVersion},
                {"kind", "classification"},
                {"arch", cfg.arch},
                {"config", cfg.to_json()},
                {"config_hash", config_hash(cfg)},
                {"fin_mode", cfg.fin_mode},
                {"runs", runs},
                {"median",
                 {{"baseline", {{"accuracy", median_of(base_accs)}}},
                  {"fin_enn", {{"accuracy", median_of(fin_accs)}}}}},
                {"cited", cfg.cited}};
    return report;
}

inline json run_experiment(const ExperimentConfig& cfg) {
    return cfg.kind == "regression" ? run_regression_experiment(cfg)
                                    : run_classification_experiment(cfg);
}

}  // namespace finlib
