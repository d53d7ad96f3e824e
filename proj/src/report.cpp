#include "ccl/report.hpp"

#include <fstream>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include <fmt/format.h>

#include "ccl/metrics.hpp"

namespace ccl::report {

std::string num(double v) { return fmt::format("{:.17g}", v); }

Json to_json(const Matrix& m) {
    Json rows = Json::array();
    for (std::size_t i = 0; i < m.rows(); ++i) {
        Json row = Json::array();
        for (double v : m.row(i)) row.push_back(v);
        rows.push_back(std::move(row));
    }
    return rows;
}

Json to_json(const trainer::TrainConfig& cfg) {
    Json j;
    j["loss"] = {{"kind", losses::to_string(cfg.loss.kind)},
                 {"tau", cfg.loss.tau},
                 {"lambda", cfg.loss.lambda},
                 {"delta", cfg.loss.delta},
                 {"gamma", cfg.loss.gamma},
                 {"alpha", losses::to_string(cfg.loss.alpha_mode)}};
    j["batch_size"] = cfg.batch_size;
    j["epochs"] = cfg.epochs;
    j["checkpoint_every"] = cfg.checkpoint_every;
    j["optimizer"] = {{"kind", cfg.optimizer.kind == encoder::OptimizerKind::adam ? "adam" : "sgd"},
                      {"lr", cfg.optimizer.lr},
                      {"beta1", cfg.optimizer.beta1},
                      {"beta2", cfg.optimizer.beta2},
                      {"eps", cfg.optimizer.eps}};
    j["encoder"] = {{"kind", cfg.encoder.kind == encoder::EncoderKind::mlp ? "mlp" : "table"},
                    {"hidden", cfg.encoder.hidden},
                    {"dim", cfg.encoder.dim}};
    j["seed"] = cfg.seed;
    return j;
}

void write_prediction_csv(const theory::ConvergencePrediction& p, std::ostream& out) {
    out << "i,j,c1,c2,target\n";
    for (std::size_t i = 0; i < p.target.rows(); ++i)
        for (std::size_t j = 0; j < p.target.cols(); ++j)
            out << i << ',' << j << ',' << num(p.c1(i, j)) << ',' << num(p.c2(i, j)) << ',' << num(p.target(i, j))
                << '\n';
}

namespace {

std::string_view flag_name(theory::EntryFlag f) {
    switch (f) {
        case theory::EntryFlag::ok: return "ok";
        case theory::EntryFlag::out_of_range: return "out_of_range";
        case theory::EntryFlag::undefined: return "undefined";
    }
    return "?";
}

Json pair_list(const std::vector<std::pair<std::size_t, std::size_t>>& pairs) {
    Json out = Json::array();
    for (const auto& [i, j] : pairs) out.push_back({i, j});
    return out;
}

Json ordering_json(const metrics::OrderingReport& r) {
    return {{"matches", r.matches},
            {"rank_correlation", r.rank_correlation},
            {"strict_pairs", r.strict_pairs},
            {"violations", r.violations},
            {"predicted_order", pair_list(r.predicted_order)},
            {"measured_order", pair_list(r.measured_order)},
            {"note", r.note}};
}

}  // namespace

Json prediction_json(const FeatureSpace& space, const theory::ConvergencePrediction& p,
                     const theory::ScaledTarget& scaled, const theory::ScaledTargetConfig& scfg) {
    Json j;
    j["tpm_hash"] = fmt::format("{:016x}", space.tpm().hash());
    j["n"] = p.n;
    j["delta"] = scfg.delta;
    j["gamma"] = scfg.gamma;
    j["labels"] = space.tpm().labels();
    j["prior"] = std::vector<double>(space.prior().weights().begin(), space.prior().weights().end());
    j["marginal"] = marginal(space.tpm(), space.prior());
    j["c1"] = to_json(p.c1);
    j["c2"] = to_json(p.c2);
    j["target"] = to_json(p.target);
    // JSON has no infinity; undefined entries are null and flagged.
    j["scaled_target"] = to_json(scaled.value);
    Json flags = Json::array();
    for (std::size_t i = 0; i < scaled.value.rows(); ++i) {
        Json row = Json::array();
        for (std::size_t k = 0; k < scaled.value.cols(); ++k) row.push_back(flag_name(scaled.flag(i, k)));
        flags.push_back(std::move(row));
    }
    j["scaled_flags"] = std::move(flags);
    j["warnings"] = scaled.warnings;
    return j;
}

std::string metrics_header(std::size_t m) {
    std::string h = "run_id,epoch,loss";
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < m; ++j) h += fmt::format(",p_{}_{}", i, j);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < m; ++j) h += fmt::format(",m_{}_{}", i, j);
    h += ",mae,mean_similarity,intra_similarity,inter_similarity";
    return h;
}

void write_metrics_rows(const trainer::RunResult& run, std::ostream& out) {
    for (const auto& rec : run.records) {
        out << run.run_id << ',' << rec.epoch << ',' << num(rec.loss);
        for (double v : rec.measured_p.mean.flat()) out << ',' << num(v);
        for (double v : rec.class_sim.flat()) out << ',' << num(v);
        out << ',' << num(rec.mae) << ',' << num(rec.similarity.mean) << ',' << num(rec.similarity.intra) << ','
            << num(rec.similarity.inter) << '\n';
    }
}

Json run_report(const trainer::RunResult& run, const FeatureSpace& space) {
    const auto fin = trainer::final_metrics(run);
    const auto& last = run.records.back();
    const auto prediction = theory::predict_target(space, run.config.batch_size);

    Json j;
    j["status"] = "ok";
    j["run_id"] = run.run_id;
    j["tpm_hash"] = fmt::format("{:016x}", space.tpm().hash());
    j["loss_kind"] = losses::to_string(run.config.loss.kind);
    j["n"] = run.config.batch_size;
    j["predicted"] = to_json(prediction.target);
    j["reference_target"] = to_json(run.reference_target);
    j["measured"] = to_json(fin.measured_p);
    j["measured_raw_last"] = to_json(last.measured_p.mean);
    j["measured_sd_last"] = to_json(last.measured_p.sd);
    j["asymmetry_last"] = last.measured_p.asymmetry;
    j["tail_checkpoints"] = fin.checkpoints;
    j["mae"] = fin.mae;
    j["row_mae"] = fin.row_mae;
    j["class_similarity"] = to_json(fin.class_sim);
    j["similarity"] = {{"mean", fin.similarity.mean}, {"intra", fin.similarity.intra}, {"inter", fin.similarity.inter}};
    j["ordering"] = ordering_json(metrics::ordering_check(fin.class_sim, run.reference_target));
    j["ordering_p"] = ordering_json(metrics::ordering_check(fin.measured_p, run.reference_target));
    j["spectrum"] = {{"eigenvalues", last.spectrum.eigenvalues}, {"trace", last.spectrum.trace}};
    if (run.records.size() >= 2) j["checkpoint_variance"] = trainer::checkpoint_variance(run);
    j["checkpoints"] = run.records.size();
    return j;
}

void write_file(const std::filesystem::path& path, const std::string& text) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << text;
}

void write_run(const trainer::RunResult& run, const FeatureSpace& space, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    std::ostringstream csv;
    csv << metrics_header(space.size()) << '\n';
    write_metrics_rows(run, csv);
    write_file(dir / "metrics.csv", csv.str());
    write_file(dir / "report.json", run_report(run, space).dump(2) + "\n");

    Json manifest;
    manifest["run_id"] = run.run_id;
    manifest["config"] = to_json(run.config);
    manifest["tpm_hash"] = fmt::format("{:016x}", space.tpm().hash());
    manifest["metrics"] = "metrics.csv";
    manifest["report"] = "report.json";
    manifest["params"] = "params.json";
    write_file(dir / "run.json", manifest.dump(2) + "\n");
    encoder::save_snapshot(run.final_params, dir / "params");
}

void write_failure(const std::filesystem::path& dir, const std::string& diagnostic) {
    Json j;
    j["status"] = "numerical_failure";
    j["diagnostic"] = diagnostic;
    write_file(dir / "report.json", j.dump(2) + "\n");
}

std::string summary_header() {
    return "axis,value,repeat,run_id,seed,mae,ordering_matches,rank_correlation,mean_similarity,"
           "intra_similarity,inter_similarity,checkpoint_variance";
}

void write_summary_row(const trainer::SweepPoint& point, trainer::SweepAxis axis, std::ostream& out) {
    const auto& run = point.result;
    const auto fin = trainer::final_metrics(run);
    const auto order = metrics::ordering_check(fin.class_sim, run.reference_target);
    const double var = run.records.size() >= 2 ? trainer::checkpoint_variance(run) : 0.0;
    out << trainer::to_string(axis) << ',' << num(point.value) << ',' << point.repeat << ',' << run.run_id << ','
        << run.config.seed << ',' << num(fin.mae) << ',' << (order.matches ? 1 : 0) << ','
        << num(order.rank_correlation) << ',' << num(fin.similarity.mean) << ',' << num(fin.similarity.intra) << ','
        << num(fin.similarity.inter) << ',' << num(var) << '\n';
}

Json bounds_json(const theory::ErrorBoundReport& r, std::size_t m, std::size_t n_samples, double confidence_delta,
                 double epsilon) {
    Json j;
    j["m"] = m;
    j["n_samples"] = n_samples;
    j["confidence_delta"] = confidence_delta;
    j["epsilon"] = epsilon;
    j["s_min"] = r.s_min;
    j["eta_max"] = r.eta_max;
    j["eps_p"] = r.eps_p;
    j["target_error_bound"] = r.target_error_bound;
    j["target_error_bound_exact"] = r.target_error_bound_exact;
    j["c1_exact"] = r.c1_exact;
    j["c2_exact"] = r.c2_exact;
    j["sample_complexity"] = r.sample_complexity;
    j["eta_bound"] = r.eta_bound;
    j["denominator_margin"] = r.denominator_margin;
    j["sample_condition"] = r.sample_condition;
    j["eta_condition"] = r.eta_condition;
    j["feasible"] = r.feasible;
    return j;
}

}  // namespace ccl::report
