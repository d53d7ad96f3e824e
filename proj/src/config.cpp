#include "ccl/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string_view>

#include <fmt/format.h>

#include "ccl/error.hpp"

namespace ccl::config {

namespace {

std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

std::vector<std::string_view> split_list(std::string_view s) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const auto comma = s.find(',', start);
        out.push_back(trim(s.substr(start, comma == std::string_view::npos ? s.npos : comma - start)));
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return out;
}

double to_double(std::string_view text, std::size_t line, std::string_view key) {
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc() || ptr != text.data() + text.size() || !std::isfinite(v)) {
        throw ConfigError(fmt::format("{}: '{}' is not a finite number", key, text), line);
    }
    return v;
}

std::uint64_t to_unsigned(std::string_view text, std::size_t line, std::string_view key) {
    std::uint64_t v = 0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc() || ptr != text.data() + text.size()) {
        throw ConfigError(fmt::format("{}: '{}' is not a non-negative integer", key, text), line);
    }
    return v;
}

std::size_t to_size(std::string_view text, std::size_t line, std::string_view key) {
    return static_cast<std::size_t>(to_unsigned(text, line, key));
}

double positive(double v, std::size_t line, std::string_view key) {
    if (!(v > 0.0)) throw ConfigError(fmt::format("{} must be > 0", key), line);
    return v;
}

using Setter = std::function<void(ExperimentConfig&, std::string_view value, std::size_t line)>;
using Section = std::map<std::string, Setter, std::less<>>;

std::map<std::string, Section, std::less<>> schema() {
    std::map<std::string, Section, std::less<>> s;

    s["feature_space"] = {
        {"labels",
         [](ExperimentConfig& c, std::string_view v, std::size_t) {
             c.feature_space.labels.clear();
             for (auto item : split_list(v)) c.feature_space.labels.emplace_back(item);
         }},
        {"prior",
         [](ExperimentConfig& c, std::string_view v, std::size_t line) {
             c.feature_space.prior.clear();
             c.feature_space.prior_line = line;
             if (v == "uniform") return;
             for (auto item : split_list(v)) c.feature_space.prior.push_back(to_double(item, line, "prior"));
         }},
    };

    s["dataset"] = {
        {"n_classes", [](ExperimentConfig& c, std::string_view v, std::size_t l) {
             c.dataset.n_classes = to_size(v, l, "n_classes");
         }},
        {"n_items", [](ExperimentConfig& c, std::string_view v, std::size_t l) {
             c.dataset.n_items = to_size(v, l, "n_items");
         }},
        {"noise_sigma", [](ExperimentConfig& c, std::string_view v, std::size_t l) {
             c.dataset.noise_sigma = to_double(v, l, "noise_sigma");
         }},
        {"feature_dim", [](ExperimentConfig& c, std::string_view v, std::size_t l) {
             c.dataset.feature_dim = to_size(v, l, "feature_dim");
         }},
        {"train_fraction", [](ExperimentConfig& c, std::string_view v, std::size_t l) {
             c.dataset.train_fraction = to_double(v, l, "train_fraction");
         }},
        {"generator", [](ExperimentConfig& c, std::string_view v, std::size_t l) {
             if (v == "vector") c.dataset.generator = synth::Generator::vector;
             else if (v == "graph") c.dataset.generator = synth::Generator::graph;
             else throw ConfigError(fmt::format("generator: '{}' is not vector or graph", v), l);
         }},
        {"graph_nodes", [](ExperimentConfig& c, std::string_view v, std::size_t l) {
             c.dataset.graph.nodes = to_size(v, l, "graph_nodes");
         }},
        {"graph_edges", [](ExperimentConfig& c, std::string_view v, std::size_t l) {
             c.dataset.graph.edges = to_size(v, l, "graph_edges");
         }},
        {"graph_rewire", [](ExperimentConfig& c, std::string_view v, std::size_t l) {
             c.dataset.graph.rewire = to_double(v, l, "graph_rewire");
         }},
        {"degree_bins", [](ExperimentConfig& c, std::string_view v, std::size_t l) {
             c.dataset.graph.degree_bins = to_size(v, l, "degree_bins");
         }},
    };

    s["train"] = {
        {"batch_size", [](ExperimentConfig& c, std::string_view v, std::size_t l) {
             c.train.batch_size = to_size(v, l, "batch_size");
             if (c.train.batch_size < 2) throw ConfigError("batch_size must be >= 2", l);
         }},
        {"epochs", [](ExperimentConfig& c, std::string_view v, std::size_t l) {
             c.train.epochs = to_size(v, l, "epochs");
             if (c.train.epochs < 1) throw ConfigError("epochs must be >= 1", l);
         }},
        {"checkpoint_every", [](ExperimentConfig& c, std::string_view v, std::size_t l) {
             c.train.checkpoint_every = to_size(v, l, "checkpoint_every");
             if (c.train.checkpoint_every < 1) throw ConfigError("checkpoint_every must be >= 1", l);
         }},
        {"optimizer", [](ExperimentConfig& c, std::string_view v, std::size_t l) {
             if (v == "adam") c.train.optimizer.kind = encoder::OptimizerKind::adam;
             else if (v == "sgd") c.train.optimizer.kind = encoder::OptimizerKind::sgd;
             else throw ConfigError(fmt::format("optimizer: '{}' is not adam or sgd", v), l);
         }},
        {"lr", [](ExperimentConfig& c, std::string_view v, std::size_t l) {
             c.train.optimizer.lr = to_double(v, l, "lr");
             if (c.train.optimizer.lr < 0.0) throw ConfigError("lr must be >= 0", l);
         }},
        {"encoder", [](ExperimentConfig& c, std::string_view v, std::size_t l) {
             if (v == "mlp") c.train.encoder.kind = encoder::EncoderKind::mlp;
             else if (v == "table") c.train.encoder.kind = encoder::EncoderKind::table;
             else throw ConfigError(fmt::format("encoder: '{}' is not mlp or table", v), l);
         }},
        {"hidden", [](ExperimentConfig& c, std::string_view v, std::size_t l) {
             c.train.encoder.hidden = to_size(v, l, "hidden");
         }},
        {"dim", [](ExperimentConfig& c, std::string_view v, std::size_t l) {
             c.train.encoder.dim = to_size(v, l, "dim");
             if (c.train.encoder.dim < 2) throw ConfigError("dim must be >= 2", l);
         }},
    };

    s["loss"] = {
        {"kind", [](ExperimentConfig& c, std::string_view v, std::size_t l) {
             const auto kind = losses::parse_loss_kind(v);
             if (!kind) throw ConfigError(fmt::format("kind: '{}' is not scl, infonce, dcl or sc_infonce", v), l);
             c.train.loss.kind = *kind;
         }},
        {"tau", [](ExperimentConfig& c, std::string_view v, std::size_t l) {
             c.train.loss.tau = positive(to_double(v, l, "tau"), l, "tau");
         }},
        {"lambda", [](ExperimentConfig& c, std::string_view v, std::size_t l) {
             c.train.loss.lambda = to_double(v, l, "lambda");
         }},
        {"delta", [](ExperimentConfig& c, std::string_view v, std::size_t l) {
             c.train.loss.delta = to_double(v, l, "delta");
         }},
        {"gamma", [](ExperimentConfig& c, std::string_view v, std::size_t l) {
             c.train.loss.gamma = to_double(v, l, "gamma");
         }},
        {"alpha", [](ExperimentConfig& c, std::string_view v, std::size_t l) {
             const auto mode = losses::parse_alpha_mode(v);
             if (!mode) throw ConfigError(fmt::format("alpha: '{}' is not dynamic or fixed", v), l);
             c.train.loss.alpha_mode = *mode;
         }},
    };

    s["predict"] = {
        {"n", [](ExperimentConfig& c, std::string_view v, std::size_t l) {
             c.predict.n = to_size(v, l, "n");
             if (*c.predict.n < 2) throw ConfigError("n must be >= 2", l);
         }},
        {"delta", [](ExperimentConfig& c, std::string_view v, std::size_t l) {
             c.predict.delta = to_double(v, l, "delta");
         }},
        {"gamma", [](ExperimentConfig& c, std::string_view v, std::size_t l) {
             c.predict.gamma = to_double(v, l, "gamma");
         }},
    };

    s["run"] = {
        {"seed", [](ExperimentConfig& c, std::string_view v, std::size_t l) {
             apply_seed(c, to_unsigned(v, l, "seed"));
         }},
        {"out", [](ExperimentConfig& c, std::string_view v, std::size_t) { c.out = std::string(v); }},
    };
    return s;
}

}  // namespace

void apply_seed(ExperimentConfig& cfg, std::uint64_t seed) {
    cfg.seed = seed;
    cfg.dataset.seed = seed;
    cfg.train.seed = seed;
}

ExperimentConfig parse(std::istream& in) {
    static const auto sections = schema();
    ExperimentConfig cfg;
    std::vector<std::vector<double>> rows;
    bool saw_n_classes = false;

    const Section* current = nullptr;
    std::string current_name;
    std::set<std::string> seen;
    std::string raw;
    std::size_t line = 0;
    while (std::getline(in, raw)) {
        ++line;
        std::string_view text = raw;
        if (const auto hash = text.find('#'); hash != std::string_view::npos) text = text.substr(0, hash);
        text = trim(text);
        if (text.empty()) continue;

        if (text.front() == '[') {
            if (text.back() != ']') throw ConfigError(fmt::format("malformed section header '{}'", text), line);
            const auto name = trim(text.substr(1, text.size() - 2));
            const auto it = sections.find(name);
            if (it == sections.end()) throw ConfigError(fmt::format("unknown section [{}]", name), line);
            current = &it->second;
            current_name = std::string(name);
            continue;
        }

        const auto eq = text.find('=');
        if (eq == std::string_view::npos) throw ConfigError(fmt::format("expected 'key = value', got '{}'", text), line);
        const auto key = trim(text.substr(0, eq));
        const auto value = trim(text.substr(eq + 1));
        if (current == nullptr) throw ConfigError(fmt::format("key '{}' outside of any section", key), line);
        if (value.empty()) throw ConfigError(fmt::format("{}: missing value", key), line);

        if (current_name == "feature_space" && key == "row") {
            std::vector<double> row;
            for (auto item : split_list(value)) row.push_back(to_double(item, line, "row"));
            rows.push_back(std::move(row));
            cfg.feature_space.row_lines.push_back(line);
            continue;
        }
        const auto it = current->find(key);
        if (it == current->end()) {
            throw ConfigError(fmt::format("unknown key '{}' in [{}]", key, current_name), line);
        }
        const std::string qualified = current_name + "." + std::string(key);
        if (!seen.insert(qualified).second) throw ConfigError(fmt::format("duplicate key '{}'", qualified), line);
        if (qualified == "dataset.n_classes") saw_n_classes = true;
        it->second(cfg, value, line);
    }

    if (rows.empty()) throw ConfigError("[feature_space] needs at least one 'row = ...' line");
    const std::size_t m = rows.size();
    for (std::size_t r = 0; r < m; ++r) {
        if (rows[r].size() != m) {
            throw ConfigError(fmt::format("row {} has {} entries, expected {}", r, rows[r].size(), m),
                              cfg.feature_space.row_lines[r]);
        }
    }
    cfg.feature_space.rows = Matrix::from_rows(rows);
    if (!cfg.feature_space.labels.empty() && cfg.feature_space.labels.size() != m) {
        throw ConfigError(fmt::format("{} labels for a {}-feature TPM", cfg.feature_space.labels.size(), m));
    }
    if (!cfg.feature_space.prior.empty() && cfg.feature_space.prior.size() != m) {
        throw ConfigError(fmt::format("prior has {} entries, expected {}", cfg.feature_space.prior.size(), m),
                          cfg.feature_space.prior_line);
    }
    if (!saw_n_classes) cfg.dataset.n_classes = m;
    if (cfg.dataset.n_classes != m) {
        throw ConfigError(fmt::format("dataset.n_classes = {} but the TPM has {} rows", cfg.dataset.n_classes, m));
    }
    return cfg;
}

ExperimentConfig load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError(fmt::format("cannot open config '{}'", path.string()));
    return parse(in);
}

FeatureSpace make_feature_space(const ExperimentConfig& cfg) {
    const auto& fs = cfg.feature_space;
    TransitionMatrix tpm(fs.rows, fs.labels);
    if (const auto report = validate(tpm); !report.empty()) {
        const auto& v = report.front();
        const std::size_t line = v.rule == "unique-labels" || v.row >= fs.row_lines.size() ? 0 : fs.row_lines[v.row];
        throw ConfigError(v.message, line);
    }
    const Prior prior = fs.prior.empty() ? Prior::uniform(tpm.size()) : Prior(fs.prior);
    if (const auto report = validate(prior); !report.empty()) {
        throw ConfigError("prior: " + report.front().message, fs.prior_line);
    }
    return FeatureSpace(std::move(tpm), prior);
}

}  // namespace ccl::config
