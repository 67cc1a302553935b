#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

namespace finlib {

inline double rmse(std::span<const double> pred, std::span<const double> actual) {
    if (pred.size() != actual.size() || pred.empty()) {
        throw std::invalid_argument("rmse needs equal non-empty vectors");
    }
    double s = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double d = pred[i] - actual[i];
        s += d * d;
    }
    return std::sqrt(s / static_cast<double>(pred.size()));
}

// Mean absolute percentage error, in percent.
inline double mape(std::span<const double> pred, std::span<const double> actual) {
    if (pred.size() != actual.size() || pred.empty()) {
        throw std::invalid_argument("mape needs equal non-empty vectors");
    }
    double s = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        if (actual[i] == 0.0) throw std::invalid_argument("mape undefined for zero actual value");
        s += std::abs(pred[i] - actual[i]) / std::abs(actual[i]);
    }
    return 100.0 * s / static_cast<double>(pred.size());
}

struct ConfusionCounts {
    std::size_t tp = 0, fn = 0, tn = 0, fp = 0;
};

// Percentages; sensitivity/specificity are empty when their denominator is
// zero (undefined, never reported as 0).
struct ClassMetrics {
    double accuracy = 0.0;
    std::optional<double> specificity;
    std::optional<double> sensitivity;
    ConfusionCounts counts;
};

inline ClassMetrics class_metrics_from_counts(const ConfusionCounts& c) {
    const std::size_t total = c.tp + c.fn + c.tn + c.fp;
    if (total == 0) throw std::invalid_argument("empty confusion counts");
    ClassMetrics m;
    m.counts = c;
    m.accuracy = 100.0 * static_cast<double>(c.tp + c.tn) / static_cast<double>(total);
    if (c.tp + c.fn > 0) {
        m.sensitivity = 100.0 * static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
    }
    if (c.tn + c.fp > 0) {
        m.specificity = 100.0 * static_cast<double>(c.tn) / static_cast<double>(c.tn + c.fp);
    }
    return m;
}

// Binary labels: 1 = positive, 0 = negative.
inline ClassMetrics class_metrics(std::span<const int> preds, std::span<const int> truth) {
    if (preds.size() != truth.size() || preds.empty()) {
        throw std::invalid_argument("class_metrics needs equal non-empty label vectors");
    }
    ConfusionCounts c;
    for (std::size_t i = 0; i < preds.size(); ++i) {
        if ((preds[i] != 0 && preds[i] != 1) || (truth[i] != 0 && truth[i] != 1)) {
            throw std::invalid_argument("class_metrics expects binary 0/1 labels");
        }
        if (truth[i] == 1) {
            preds[i] == 1 ? ++c.tp : ++c.fn;
        } else {
            preds[i] == 0 ? ++c.tn : ++c.fp;
        }
    }
    return class_metrics_from_counts(c);
}

// Multiclass accuracy plus macro-averaged one-vs-rest sensitivity/specificity.
inline ClassMetrics multiclass_metrics(std::span<const int> preds, std::span<const int> truth,
                                       int n_classes) {
    if (preds.size() != truth.size() || preds.empty()) {
        throw std::invalid_argument("multiclass_metrics needs equal non-empty label vectors");
    }
    if (n_classes < 2) throw std::invalid_argument("need at least two classes");
    std::size_t correct = 0;
    for (std::size_t i = 0; i < preds.size(); ++i) {
        if (preds[i] == truth[i]) ++correct;
    }
    ClassMetrics m;
    m.accuracy = 100.0 * static_cast<double>(correct) / static_cast<double>(preds.size());

    double sens_sum = 0.0, spec_sum = 0.0;
    int sens_n = 0, spec_n = 0;
    for (int k = 0; k < n_classes; ++k) {
        ConfusionCounts c;
        for (std::size_t i = 0; i < preds.size(); ++i) {
            const bool t = truth[i] == k, p = preds[i] == k;
            if (t && p) ++c.tp;
            else if (t) ++c.fn;
            else if (p) ++c.fp;
            else ++c.tn;
        }
        if (c.tp + c.fn > 0) {
            sens_sum += static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
            ++sens_n;
        }
        if (c.tn + c.fp > 0) {
            spec_sum += static_cast<double>(c.tn) / static_cast<double>(c.tn + c.fp);
            ++spec_n;
        }
    }
    if (sens_n > 0) m.sensitivity = 100.0 * sens_sum / sens_n;
    if (spec_n > 0) m.specificity = 100.0 * spec_sum / spec_n;
    return m;
}

}  // namespace finlib
