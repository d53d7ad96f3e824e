// ccl: predict / train / sweep / bounds / dataset.
// Exit codes: 0 success, 2 config or usage error, 3 numerical failure.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "ccl/config.hpp"
#include "ccl/error.hpp"
#include "ccl/report.hpp"
#include "ccl/synth.hpp"
#include "ccl/theory.hpp"
#include "ccl/trainer.hpp"

namespace fs = std::filesystem;
using namespace ccl;

namespace {

constexpr int kOk = 0;
constexpr int kUsage = 2;
constexpr int kNumerical = 3;

struct Options {
    std::string config;
    std::string out;
    std::optional<std::uint64_t> seed;
    std::size_t jobs = 1;
    std::string axis;
    std::string values;
    std::size_t repeats = 1;
    std::size_t n_samples = 100000;
    double epsilon = 0.1;
    double confidence = 0.05;
    double eta_max = 0.0;
};

void setup_logging() {
    auto logger = spdlog::stderr_color_mt("ccl");
    spdlog::set_default_logger(logger);
    spdlog::set_pattern("[%l] %v");
    spdlog::set_level(spdlog::level::warn);
    if (const char* env = std::getenv("CCL_LOG")) spdlog::set_level(spdlog::level::from_str(env));
}

config::ExperimentConfig load(const Options& opt) {
    auto cfg = config::load(opt.config);
    if (opt.seed) config::apply_seed(cfg, *opt.seed);
    if (!opt.out.empty()) cfg.out = opt.out;
    return cfg;
}

std::vector<double> parse_values(const std::string& text) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        std::size_t used = 0;
        double v = 0.0;
        try {
            v = std::stod(item, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used == 0 || item.find_first_not_of(" \t", used) != std::string::npos) {
            throw ConfigError(fmt::format("--values: '{}' is not a number", item));
        }
        out.push_back(v);
    }
    if (out.empty()) throw ConfigError("--values: needs at least one value");
    return out;
}

std::string fmt6(double v) { return fmt::format("{:.6g}", v); }

int cmd_predict(const Options& opt) {
    const auto cfg = load(opt);
    const auto space = config::make_feature_space(cfg);
    const std::size_t n = cfg.candidate_count();
    const theory::ScaledTargetConfig scfg{cfg.predict.delta, cfg.predict.gamma};
    if (const auto feas = theory::feasibility_check(scfg); !feas.feasible) {
        throw ConfigError("[predict] " + feas.failed.front());
    }
    const auto prediction = theory::predict_target(space, n);
    const auto scaled = theory::predict_scaled_target(space, n, scfg);

    std::ostringstream csv;
    report::write_prediction_csv(prediction, csv);
    report::write_file(cfg.out / "predicted.csv", csv.str());
    report::write_file(cfg.out / "predicted.json",
                       report::prediction_json(space, prediction, scaled, scfg).dump(2) + "\n");
    std::ostringstream tpm;
    space.tpm().write_csv(tpm);
    report::write_file(cfg.out / "tpm.csv", tpm.str());

    fmt::print("predicted target (n = {})\n", n);
    for (std::size_t i = 0; i < space.size(); ++i) {
        for (std::size_t j = 0; j < space.size(); ++j) fmt::print("{:>12}", fmt6(prediction.target(i, j)));
        fmt::print("\n");
    }
    for (const auto& w : scaled.warnings) spdlog::warn("{}", w);
    spdlog::info("wrote {}", (cfg.out / "predicted.csv").string());
    return kOk;
}

void print_run(const trainer::RunResult& run) {
    const auto fin = trainer::final_metrics(run);
    const auto order = metrics::ordering_check(fin.class_sim, run.reference_target);
    fmt::print("{}: {} checkpoints, mae {}, ordering {}, rank correlation {}, mean similarity {}\n", run.run_id,
               run.records.size(), fmt6(fin.mae), order.matches ? "match" : "mismatch",
               fmt6(order.rank_correlation), fmt6(fin.similarity.mean));
}

int cmd_train(const Options& opt) {
    const auto cfg = load(opt);
    const auto space = config::make_feature_space(cfg);
    try {
        trainer::validate(cfg.train);
        synth::validate(cfg.dataset);
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
    const auto data = synth::generate(cfg.dataset);
    try {
        const auto run = trainer::train(cfg.train, data, space, fmt::format("seed{}", cfg.seed));
        report::write_run(run, space, cfg.out);
        spdlog::info("{} finished in {:.1f} s", run.run_id, run.seconds);
        print_run(run);
    } catch (const NumericalError& e) {
        report::write_failure(cfg.out, e.what());
        throw;
    }
    return kOk;
}

int cmd_sweep(const Options& opt) {
    const auto cfg = load(opt);
    const auto space = config::make_feature_space(cfg);
    const auto axis = trainer::parse_axis(opt.axis);
    const auto values = parse_values(opt.values);
    if (opt.repeats < 1) throw ConfigError("repeats must be >= 1");
    try {
        trainer::validate(cfg.train);
        synth::validate(cfg.dataset);
        for (double v : values) trainer::validate(trainer::with_axis_value(cfg.train, axis, v));
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
    std::vector<trainer::SweepPoint> points;
    try {
        points = trainer::sweep(cfg.train, cfg.dataset, space, axis, values, opt.repeats, opt.jobs);
    } catch (const NumericalError& e) {
        report::write_failure(cfg.out, e.what());
        throw;
    }
    std::ostringstream summary;
    summary << report::summary_header() << '\n';
    for (const auto& p : points) {
        report::write_run(p.result, space, cfg.out / p.result.run_id);
        report::write_summary_row(p, axis, summary);
        print_run(p.result);
    }
    report::write_file(cfg.out / "summary.csv", summary.str());
    return kOk;
}

int cmd_bounds(const Options& opt) {
    const auto cfg = load(opt);
    const auto space = config::make_feature_space(cfg);
    if (!(opt.confidence > 0.0 && opt.confidence < 1.0)) throw ConfigError("--confidence must lie in (0, 1)");
    if (opt.n_samples < 3) throw ConfigError("--n-samples must be >= 3");
    if (!(opt.epsilon > 0.0)) throw ConfigError("--epsilon must be > 0");
    if (!(opt.eta_max >= 0.0)) throw ConfigError("--eta-max must be >= 0");
    const auto r =
        theory::error_bounds(space, opt.n_samples, opt.confidence, opt.eta_max, opt.epsilon, cfg.candidate_count());
    const auto j = report::bounds_json(r, space.size(), opt.n_samples, opt.confidence, opt.epsilon);
    report::write_file(cfg.out / "bounds.json", j.dump(2) + "\n");
    fmt::print("s_min {}  eps_p {}  target error bound {}  sample complexity {}  eta bound {}  feasible {}\n",
               fmt6(r.s_min), fmt6(r.eps_p), fmt6(r.target_error_bound), fmt6(r.sample_complexity),
               fmt6(r.eta_bound), r.feasible ? "yes" : "no");
    return kOk;
}

int cmd_dataset(const Options& opt) {
    const auto cfg = load(opt);
    config::make_feature_space(cfg);
    try {
        synth::validate(cfg.dataset);
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
    const auto data = synth::generate(cfg.dataset);
    std::ostringstream csv;
    synth::write_csv(data, csv);
    report::write_file(cfg.out / "dataset.csv", csv.str());
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    setup_logging();
    CLI::App app{"Contrastive convergence lab"};
    app.require_subcommand(1);
    Options opt;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", opt.config, "Experiment config file")->required()->check(CLI::ExistingFile);
        sub->add_option("--out", opt.out, "Output directory (overrides [run] out)");
        sub->add_option("--seed", opt.seed, "Run seed (overrides [run] seed)");
    };
    auto* predict = app.add_subcommand("predict", "Closed-form convergence targets");
    add_common(predict);
    auto* train = app.add_subcommand("train", "Train one run and write metrics");
    add_common(train);
    auto* sweep = app.add_subcommand("sweep", "Train one run per (value, repeat)");
    add_common(sweep);
    sweep->add_option("--axis", opt.axis, "delta, gamma, tau, batch_size or lr")->required();
    sweep->add_option("--values", opt.values, "Comma-separated values")->required();
    sweep->add_option("--repeats", opt.repeats, "Runs per value");
    sweep->add_option("--jobs", opt.jobs, "Concurrent runs");
    auto* bounds = app.add_subcommand("bounds", "Error and sample-complexity bounds");
    add_common(bounds);
    bounds->add_option("--n-samples", opt.n_samples, "Transition samples");
    bounds->add_option("--epsilon", opt.epsilon, "Target accuracy");
    bounds->add_option("--confidence", opt.confidence, "Failure probability delta");
    bounds->add_option("--eta-max", opt.eta_max, "Max row-wise TPM error");
    auto* dataset = app.add_subcommand("dataset", "Export the synthetic dataset as CSV");
    add_common(dataset);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kUsage;
    }

    try {
        if (*predict) return cmd_predict(opt);
        if (*train) return cmd_train(opt);
        if (*sweep) return cmd_sweep(opt);
        if (*bounds) return cmd_bounds(opt);
        if (*dataset) return cmd_dataset(opt);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kUsage;
    } catch (const NumericalError& e) {
        std::cerr << "numerical failure: " << e.what() << '\n';
        return kNumerical;
    } catch (const std::invalid_argument& e) {
        std::cerr << "invalid argument: " << e.what() << '\n';
        return kUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return kUsage;
}
