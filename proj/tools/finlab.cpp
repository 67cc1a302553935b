// finlab: train/evaluate Tsallis-entropy FINs and run FIN-vs-baseline
// experiments from JSON configs.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "finlib/config_io.hpp"
#include "finlib/embedding.hpp"
#include "finlib/fin.hpp"
#include "finlib/harness.hpp"
#include "finlib/report.hpp"

namespace fs = std::filesystem;
using finlib::json;

namespace {

struct CommonArgs {
    std::string config_path;
    std::string out_dir;
    std::vector<std::string> overrides;
    long long seed = -1;
};

json load_config(const CommonArgs& a) {
    json cfg = finlib::read_json_file(a.config_path);
    for (const auto& ov : a.overrides) finlib::apply_override(cfg, ov);
    return cfg;
}

void ensure_out_dir(const std::string& dir) {
    if (dir.empty()) throw std::runtime_error("--out directory is required");
    fs::create_directories(dir);
}

int cmd_fin_train(const CommonArgs& a) {
    json cfg = load_config(a);
    if (a.seed >= 0) finlib::apply_override(cfg, "fin.seed=" + std::to_string(a.seed));
    const finlib::FinTrainSetup setup = finlib::fin_train_setup_from_json(cfg);
    ensure_out_dir(a.out_dir);

    const finlib::FinTrainOutcome outcome =
        finlib::train_fin(setup.config, setup.dataset, setup.params);

    finlib::write_json_file(finlib::fin_train_setup_to_json(setup),
                            (fs::path(a.out_dir) / "resolved_config.json").string());

    json history = json::array();
    for (const auto& e : outcome.train.history) {
        history.push_back({{"train_mae", e.train_loss}, {"val_mae", e.val_loss}, {"lr", e.lr}});
    }
    const auto& prov = outcome.model.provenance;
    json summary{{"epochs_run", outcome.train.epochs_run},
                 {"stopped_early", outcome.train.stopped_early},
                 {"diverged", outcome.train.diverged},
                 {"final_train_mae", prov.final_train_mae},
                 {"final_val_mae", prov.final_val_mae},
                 {"max_abs_err", prov.max_abs_err},
                 {"target_std", prov.target_std},
                 {"config_hash", prov.config_hash},
                 {"seed", prov.seed},
                 {"history", history}};
    finlib::write_json_file(summary, (fs::path(a.out_dir) / "history.json").string());

    if (outcome.train.diverged) {
        std::cerr << "training diverged (validation MAE exceeded 10x its initial value); "
                     "model not saved\n";
        return 2;
    }
    const std::string model_path = (fs::path(a.out_dir) / "fin_model.bin").string();
    finlib::save_fin(outcome.model, model_path);
    std::cout << "fin train: val MAE " << prov.final_val_mae << " (target std " << prov.target_std
              << ") after " << outcome.train.epochs_run << " epochs -> " << model_path << "\n";
    return 0;
}

int cmd_fin_eval(const std::string& model_path, const std::string& out_dir, std::size_t n,
                 std::uint64_t seed) {
    const finlib::FinModel model = finlib::load_fin(model_path);
    const finlib::SyntheticDatasetSpec spec{n, model.input_length, seed};
    const auto signals = finlib::generate_synthetic(spec);
    const finlib::FinEvalResult r = finlib::evaluate_fin(model, signals);

    json out{{"model", model_path},
             {"n_samples", n},
             {"seed", seed},
             {"mae", r.mae},
             {"max_abs_err", r.max_abs_err},
             {"target_std", r.target_std},
             {"provenance",
              {{"final_val_mae", model.provenance.final_val_mae},
               {"config_hash", model.provenance.config_hash},
               {"seed", model.provenance.seed}}}};
    if (!out_dir.empty()) {
        ensure_out_dir(out_dir);
        finlib::write_json_file(out, (fs::path(out_dir) / "eval.json").string());
    }
    std::cout << "fin eval: mae " << r.mae << "  max_abs_err " << r.max_abs_err << "  target_std "
              << r.target_std << "\n";
    return 0;
}

int cmd_experiment(const CommonArgs& a) {
    json cfg_json = load_config(a);
    if (a.seed >= 0) cfg_json["seeds"] = json::array({a.seed});
    finlib::check_known_keys(cfg_json, finlib::experiment_config_skeleton());
    const finlib::ExperimentConfig cfg = finlib::ExperimentConfig::from_json(cfg_json);
    ensure_out_dir(a.out_dir);

    const json report = finlib::run_experiment(cfg);
    finlib::write_json_file(cfg.to_json(),
                            (fs::path(a.out_dir) / "resolved_config.json").string());
    finlib::write_json_file(report, (fs::path(a.out_dir) / "report.json").string());
    std::cout << finlib::render_reports({report});
    return 0;
}

int cmd_report(const std::vector<std::string>& inputs, const std::string& out_dir) {
    if (inputs.empty()) throw std::runtime_error("report needs at least one report.json file");
    std::vector<json> reports;
    for (const auto& p : inputs) reports.push_back(finlib::read_json_file(p));
    const std::string table = finlib::render_reports(reports);
    std::cout << table;
    if (!out_dir.empty()) {
        ensure_out_dir(out_dir);
        std::ofstream os(fs::path(out_dir) / "report.txt");
        os << table;
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Tsallis-entropy feature-imitating networks"};
    app.require_subcommand(1);

    CommonArgs train_args, exp_args;
    std::string eval_model, eval_out;
    std::size_t eval_n = 10000;
    std::uint64_t eval_seed = 1;
    std::vector<std::string> report_inputs;
    std::string report_out;

    auto* fin = app.add_subcommand("fin", "train or evaluate a FIN");
    auto* fin_train = fin->add_subcommand("train", "train an entropy imitator");
    fin_train->add_option("--config", train_args.config_path, "JSON config")->required();
    fin_train->add_option("--out", train_args.out_dir, "output directory")->required();
    fin_train->add_option("--seed", train_args.seed, "override training seed");
    fin_train->add_option("--set", train_args.overrides, "dotted-path override key=value");

    auto* fin_eval = fin->add_subcommand("eval", "evaluate a saved FIN on fresh oracle data");
    fin_eval->add_option("--model", eval_model, "FIN model file")->required();
    fin_eval->add_option("--out", eval_out, "output directory");
    fin_eval->add_option("--n", eval_n, "number of fresh signals");
    fin_eval->add_option("--seed", eval_seed, "data seed");

    auto* exp = app.add_subcommand("exp", "run experiments");
    auto* exp_run = exp->add_subcommand("run", "run a regression or classification experiment");
    exp_run->add_option("--config", exp_args.config_path, "JSON config")->required();
    exp_run->add_option("--out", exp_args.out_dir, "output directory")->required();
    exp_run->add_option("--seed", exp_args.seed, "run a single seed");
    exp_run->add_option("--set", exp_args.overrides, "dotted-path override key=value");

    auto* rep = app.add_subcommand("report", "render reports as a comparison table");
    rep->add_option("inputs", report_inputs, "report.json files");
    rep->add_option("--out", report_out, "output directory");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*fin_train) return cmd_fin_train(train_args);
        if (*fin_eval) return cmd_fin_eval(eval_model, eval_out, eval_n, eval_seed);
        if (*exp_run) return cmd_experiment(exp_args);
        if (*rep) return cmd_report(report_inputs, report_out);
        std::cerr << "missing subcommand\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
