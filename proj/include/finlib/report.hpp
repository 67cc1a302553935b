#pragma once

#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

namespace finlib {

namespace detail {

inline std::string fmt2(double v) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(2) << v;
    return os.str();
}

inline std::string metric_cell(const nlohmann::json& row, const char* key) {
    if (!row.contains(key)) return "-";
    if (row.at(key).is_string()) return row.at(key).get<std::string>();
    return fmt2(row.at(key).get<double>());
}

inline void render_rows(std::ostringstream& os,
                        const std::vector<std::vector<std::string>>& rows) {
    std::vector<std::size_t> widths;
    for (const auto& r : rows) {
        if (widths.size() < r.size()) widths.resize(r.size(), 0);
        for (std::size_t c = 0; c < r.size(); ++c) widths[c] = std::max(widths[c], r[c].size());
    }
    for (std::size_t ri = 0; ri < rows.size(); ++ri) {
        for (std::size_t c = 0; c < rows[ri].size(); ++c) {
            os << std::left << std::setw(static_cast<int>(widths[c]) + 2) << rows[ri][c];
        }
        os << "\n";
        if (ri == 0) {
            std::size_t total = 0;
            for (std::size_t w : widths) total += w + 2;
            os << std::string(total, '-') << "\n";
        }
    }
}

}  // namespace detail

// Renders one or more experiment reports as a comparison table. Cited
// external baselines carry a "[cited]" tag.
inline std::string render_reports(const std::vector<nlohmann::json>& reports) {
    if (reports.empty()) throw std::invalid_argument("no reports to render");
    std::ostringstream os;
    for (const auto& rep : reports) {
        const std::string kind = rep.value("kind", "?");
        os << "Experiment: " << kind;
        if (rep.contains("arch")) os << " (" << rep.at("arch").get<std::string>() << ")";
        os << "  config_hash=" << rep.value("config_hash", 0ull) << "\n";

        std::vector<std::vector<std::string>> rows;
        if (kind == "regression") {
            rows.push_back({"Model", "RMSE", "MAPE"});
            for (const auto& c : rep.value("cited", nlohmann::json::array())) {
                rows.push_back({c.value("model", "?") + " [cited]",
                                detail::metric_cell(c, "rmse"), detail::metric_cell(c, "mape")});
            }
            const auto& med = rep.at("median");
            rows.push_back({"NN-Baseline", detail::metric_cell(med.at("baseline"), "rmse"),
                            detail::metric_cell(med.at("baseline"), "mape")});
            rows.push_back({"FIN-ENN", detail::metric_cell(med.at("fin_enn"), "rmse"),
                            detail::metric_cell(med.at("fin_enn"), "mape")});
        } else {
            rows.push_back({"Model", "Accuracy", "Specificity", "Sensitivity"});
            for (const auto& c : rep.value("cited", nlohmann::json::array())) {
                rows.push_back({c.value("model", "?") + " [cited]",
                                detail::metric_cell(c, "accuracy"),
                                detail::metric_cell(c, "specificity"),
                                detail::metric_cell(c, "sensitivity")});
            }
            // median accuracy across runs; spec/sens from the median-accuracy run
            const auto& med = rep.at("median");
            auto row_for = [&](const char* which) {
                std::vector<std::string> row{which[0] == 'b' ? "NN-Baseline" : "FIN-ENN"};
                row.push_back(detail::metric_cell(med.at(which), "accuracy"));
                // pull spec/sens of the run whose accuracy matches the median, if any
                std::string spec = "-", sens = "-";
                const double target = med.at(which).at("accuracy").get<double>();
                for (const auto& run : rep.at("runs")) {
                    const auto& r = run.at(which);
                    if (r.contains("accuracy") && r.at("accuracy").get<double>() == target) {
                        spec = detail::metric_cell(r, "specificity");
                        sens = detail::metric_cell(r, "sensitivity");
                        break;
                    }
                }
                row.push_back(spec);
                row.push_back(sens);
                return row;
            };
            rows.push_back(row_for("baseline"));
            rows.push_back(row_for("fin_enn"));
        }
        detail::render_rows(os, rows);
        os << "\n";
    }
    return os.str();
}

}  // namespace finlib
