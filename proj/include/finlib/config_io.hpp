#pragma once

#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "finlib/fin.hpp"
#include "finlib/harness.hpp"

namespace finlib {

inline json read_json_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open config file: " + path);
    json j;
    try {
        is >> j;
    } catch (const json::parse_error& e) {
        throw std::runtime_error("invalid JSON in " + path + ": " + e.what());
    }
    return j;
}

inline void write_json_file(const json& j, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot write file: " + path);
    os << j.dump(2) << "\n";
}

// Applies "dotted.path=value" to a JSON document. Values parse as JSON when
// possible, otherwise as strings. CLI overrides take precedence over the file.
inline void apply_override(json& doc, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0) {
        throw std::invalid_argument("override must look like key.path=value: " + assignment);
    }
    const std::string path = assignment.substr(0, eq);
    const std::string raw = assignment.substr(eq + 1);
    json value;
    try {
        value = json::parse(raw);
    } catch (const json::parse_error&) {
        value = raw;
    }

    json* node = &doc;
    std::stringstream ss(path);
    std::string key, next;
    std::getline(ss, key, '.');
    while (std::getline(ss, next, '.')) {
        if (!node->contains(key) || !(*node)[key].is_object()) (*node)[key] = json::object();
        node = &(*node)[key];
        key = next;
    }
    (*node)[key] = value;
}

// Rejects keys that are not in the allowed schema skeleton. The skeleton maps
// object keys to nested skeletons; a null value means "any".
inline void check_known_keys(const json& doc, const json& skeleton, const std::string& prefix = "") {
    if (!doc.is_object() || !skeleton.is_object()) return;
    for (const auto& [key, value] : doc.items()) {
        if (!skeleton.contains(key)) {
            throw std::invalid_argument("unknown config key: " + prefix + key);
        }
        check_known_keys(value, skeleton.at(key), prefix + key + ".");
    }
}

inline const json& experiment_config_skeleton() {
    static const json skel{
        {"version", nullptr},
        {"kind", nullptr},
        {"dataset",
         {{"kind", nullptr}, {"path", nullptr}, {"time_column", nullptr}, {"features", nullptr},
          {"target", nullptr}, {"label", nullptr}, {"rows", nullptr}, {"n_features", nullptr},
          {"n_samples", nullptr}, {"signal_length", nullptr}, {"seed", nullptr}}},
        {"window", nullptr},
        {"train_fraction", nullptr},
        {"val_fraction", nullptr},
        {"hidden", nullptr},
        {"arch", nullptr},
        {"n_classes", nullptr},
        {"fin",
         {{"mode", nullptr}, {"model_path", nullptr}, {"trainable_weights", nullptr},
          {"trainable_q", nullptr}, {"trainable_tau", nullptr}, {"q", nullptr}, {"tau", nullptr}}},
        {"optimizer",
         {{"learning_rate", nullptr}, {"batch_size", nullptr}, {"max_epochs", nullptr},
          {"plateau", {{"factor", nullptr}, {"patience", nullptr}, {"min_delta", nullptr}}},
          {"early_stop", {{"patience", nullptr}, {"min_delta", nullptr}}}}},
        {"seeds", nullptr},
        {"baseline_variations", nullptr},
        {"cited", nullptr}};
    return skel;
}

inline const json& fin_train_config_skeleton() {
    static const json skel{
        {"version", nullptr},
        {"dataset", {{"n_samples", nullptr}, {"signal_length", nullptr}, {"seed", nullptr}}},
        {"params", {{"q", nullptr}, {"tau", nullptr}}},
        {"fin",
         {{"hidden", nullptr}, {"learning_rate", nullptr}, {"batch_size", nullptr},
          {"max_epochs", nullptr}, {"val_fraction", nullptr}, {"seed", nullptr},
          {"plateau", {{"factor", nullptr}, {"patience", nullptr}, {"min_delta", nullptr}}},
          {"early_stop", {{"patience", nullptr}, {"min_delta", nullptr}}}}}};
    return skel;
}

struct FinTrainSetup {
    SyntheticDatasetSpec dataset;
    TsallisParams params;
    FinTrainConfig config;
};

inline FinTrainSetup fin_train_setup_from_json(const json& j) {
    check_known_keys(j, fin_train_config_skeleton());
    FinTrainSetup s;
    int version = 1;
    detail::get_if(j, "version", version);
    if (version != 1) throw std::invalid_argument("unsupported FIN train config version");
    if (j.contains("dataset")) {
        const json& d = j.at("dataset");
        detail::get_if(d, "n_samples", s.dataset.n_samples);
        detail::get_if(d, "signal_length", s.dataset.signal_length);
        detail::get_if(d, "seed", s.dataset.seed);
    }
    if (j.contains("params")) {
        const json& p = j.at("params");
        detail::get_if(p, "q", s.params.q);
        detail::get_if(p, "tau", s.params.tau);
    }
    if (j.contains("fin")) {
        const json& f = j.at("fin");
        detail::get_if(f, "hidden", s.config.hidden);
        detail::get_if(f, "learning_rate", s.config.learning_rate);
        detail::get_if(f, "batch_size", s.config.batch_size);
        detail::get_if(f, "max_epochs", s.config.max_epochs);
        detail::get_if(f, "val_fraction", s.config.val_fraction);
        detail::get_if(f, "seed", s.config.seed);
        if (f.contains("plateau")) {
            const json& p = f.at("plateau");
            detail::get_if(p, "factor", s.config.scheduler.factor);
            detail::get_if(p, "patience", s.config.scheduler.patience);
            detail::get_if(p, "min_delta", s.config.scheduler.min_delta);
        }
        if (f.contains("early_stop")) {
            const json& p = f.at("early_stop");
            detail::get_if(p, "patience", s.config.early_stop.patience);
            detail::get_if(p, "min_delta", s.config.early_stop.min_delta);
        }
    }
    if (!(s.params.tau > 0.0)) throw std::invalid_argument("tau must be positive");
    s.config.validate();
    s.dataset.validate();
    return s;
}

inline json fin_train_setup_to_json(const FinTrainSetup& s) {
    return json{{"version", 1},
                {"dataset",
                 {{"n_samples", s.dataset.n_samples},
                  {"signal_length", s.dataset.signal_length},
                  {"seed", s.dataset.seed}}},
                {"params", {{"q", s.params.q}, {"tau", s.params.tau}}},
                {"fin",
                 {{"hidden", s.config.hidden},
                  {"learning_rate", s.config.learning_rate},
                  {"batch_size", s.config.batch_size},
                  {"max_epochs", s.config.max_epochs},
                  {"val_fraction", s.config.val_fraction},
                  {"seed", s.config.seed},
                  {"plateau",
                   {{"factor", s.config.scheduler.factor},
                    {"patience", s.config.scheduler.patience},
                    {"min_delta", s.config.scheduler.min_delta}}},
                  {"early_stop",
                   {{"patience", s.config.early_stop.patience},
                    {"min_delta", s.config.early_stop.min_delta}}}}}};
}

}  // namespace finlib
