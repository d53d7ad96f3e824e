#include "ccl/encoder.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <fmt/format.h>
#include <json.hpp>

namespace ccl::encoder {

namespace {

Matrix uniform_matrix(std::size_t rows, std::size_t cols, double bound, Rng& rng) {
    std::uniform_real_distribution<double> dist(-bound, bound);
    Matrix m(rows, cols);
    for (double& v : m.flat()) v = dist(rng);
    return m;
}

}  // namespace

EmbeddingTable::EmbeddingTable(std::size_t instances, std::size_t dim, Rng& rng) {
    if (dim < 2) throw std::invalid_argument("EmbeddingTable: dim must be >= 2");
    params_.push_back({"table", uniform_matrix(instances, dim, 0.1, rng)});
}

Matrix EmbeddingTable::forward(std::span<const std::size_t> indices) const {
    const Matrix& table = params_[0].value;
    Matrix out(indices.size(), dim());
    for (std::size_t r = 0; r < indices.size(); ++r) {
        if (indices[r] >= instances()) {
            throw std::invalid_argument(
                fmt::format("EmbeddingTable: index {} out of range ({} rows)", indices[r], instances()));
        }
        const auto src = table.row(indices[r]);
        std::copy(src.begin(), src.end(), out.row(r).begin());
    }
    return out;
}

Gradients EmbeddingTable::backward(std::span<const std::size_t> indices, const Matrix& upstream) const {
    Matrix grad(instances(), dim());
    for (std::size_t r = 0; r < indices.size(); ++r) {
        auto dst = grad.row(indices[r]);
        const auto src = upstream.row(r);
        for (std::size_t k = 0; k < dim(); ++k) dst[k] += src[k];
    }
    return {std::move(grad)};
}

Mlp::Mlp(std::size_t input_dim, std::size_t hidden_dim, std::size_t output_dim, Rng& rng) {
    if (input_dim == 0 || hidden_dim == 0 || output_dim < 2) {
        throw std::invalid_argument("Mlp: dimensions must be positive and output_dim >= 2");
    }
    params_.push_back({"W1", uniform_matrix(input_dim, hidden_dim, 1.0 / std::sqrt(double(input_dim)), rng)});
    params_.push_back({"b1", Matrix(1, hidden_dim)});
    params_.push_back({"W2", uniform_matrix(hidden_dim, output_dim, 1.0 / std::sqrt(double(hidden_dim)), rng)});
    params_.push_back({"b2", Matrix(1, output_dim)});
}

Matrix Mlp::forward(const Matrix& x, MlpCache* cache) const {
    if (x.cols() != input_dim()) {
        throw std::invalid_argument(
            fmt::format("Mlp::forward: input has {} columns, expected {}", x.cols(), input_dim()));
    }
    const std::size_t n = x.rows();
    const std::size_t h = hidden_dim();
    const std::size_t d = output_dim();
    Matrix pre(n, h);
    Matrix act(n, h);
    for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t j = 0; j < h; ++j) {
            double acc = b1()(0, j);
            for (std::size_t k = 0; k < x.cols(); ++k) acc += x(r, k) * w1()(k, j);
            pre(r, j) = acc;
            act(r, j) = acc > 0.0 ? acc : 0.0;
        }
    }
    Matrix out(n, d);
    for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t j = 0; j < d; ++j) {
            double acc = b2()(0, j);
            for (std::size_t k = 0; k < h; ++k) acc += act(r, k) * w2()(k, j);
            out(r, j) = acc;
        }
    }
    if (cache != nullptr) {
        cache->input = x;
        cache->hidden_pre = std::move(pre);
        cache->hidden = std::move(act);
    }
    return out;
}

Gradients Mlp::backward(const MlpCache& cache, const Matrix& upstream) const {
    const std::size_t n = upstream.rows();
    const std::size_t h = hidden_dim();
    const std::size_t d = output_dim();
    const std::size_t in = input_dim();
    if (upstream.cols() != d || cache.hidden.rows() != n) {
        throw std::invalid_argument("Mlp::backward: upstream gradient does not match the cached forward pass");
    }

    Matrix gw2(h, d);
    Matrix gb2(1, d);
    Matrix grad_hidden(n, h);
    for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t j = 0; j < d; ++j) {
            const double g = upstream(r, j);
            gb2(0, j) += g;
            for (std::size_t k = 0; k < h; ++k) gw2(k, j) += cache.hidden(r, k) * g;
        }
        for (std::size_t k = 0; k < h; ++k) {
            if (cache.hidden_pre(r, k) <= 0.0) continue;
            double acc = 0.0;
            for (std::size_t j = 0; j < d; ++j) acc += upstream(r, j) * w2()(k, j);
            grad_hidden(r, k) = acc;
        }
    }
    Matrix gw1(in, h);
    Matrix gb1(1, h);
    for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t k = 0; k < h; ++k) {
            const double g = grad_hidden(r, k);
            if (g == 0.0) continue;
            gb1(0, k) += g;
            for (std::size_t i = 0; i < in; ++i) gw1(i, k) += cache.input(r, i) * g;
        }
    }
    return {std::move(gw1), std::move(gb1), std::move(gw2), std::move(gb2)};
}

std::size_t Encoder::output_dim() const noexcept {
    return std::visit(
        [](const auto& e) -> std::size_t {
            if constexpr (std::is_same_v<std::decay_t<decltype(e)>, EmbeddingTable>)
                return e.dim();
            else
                return e.output_dim();
        },
        impl_);
}

Matrix Encoder::forward(const Matrix& features, std::span<const std::size_t> indices, Cache& cache) const {
    if (const auto* table = std::get_if<EmbeddingTable>(&impl_)) {
        cache.indices.assign(indices.begin(), indices.end());
        return table->forward(indices);
    }
    return std::get<Mlp>(impl_).forward(features, &cache.mlp);
}

Gradients Encoder::backward(const Cache& cache, const Matrix& upstream) const {
    if (const auto* table = std::get_if<EmbeddingTable>(&impl_)) return table->backward(cache.indices, upstream);
    return std::get<Mlp>(impl_).backward(cache.mlp, upstream);
}

std::vector<Parameter>& Encoder::params() noexcept {
    return std::visit([](auto& e) -> std::vector<Parameter>& { return e.params(); }, impl_);
}

const std::vector<Parameter>& Encoder::params() const noexcept {
    return std::visit([](const auto& e) -> const std::vector<Parameter>& { return e.params(); }, impl_);
}

void accumulate(Gradients& acc, const Gradients& other) {
    if (acc.empty()) {
        acc = other;
        return;
    }
    if (acc.size() != other.size()) throw std::invalid_argument("accumulate: gradient count mismatch");
    for (std::size_t p = 0; p < acc.size(); ++p) {
        if (!acc[p].same_shape(other[p])) throw std::invalid_argument("accumulate: gradient shape mismatch");
        for (std::size_t i = 0; i < acc[p].size(); ++i) acc[p].data()[i] += other[p].data()[i];
    }
}

void Optimizer::step(std::vector<Parameter>& params, const Gradients& grads) {
    if (params.size() != grads.size()) {
        throw std::invalid_argument(fmt::format("Optimizer::step: {} parameters but {} gradients",
                                                params.size(), grads.size()));
    }
    for (std::size_t p = 0; p < params.size(); ++p) {
        if (!params[p].value.same_shape(grads[p])) {
            throw std::invalid_argument(fmt::format("Optimizer::step: gradient shape mismatch for '{}'",
                                                    params[p].name));
        }
        for (double g : grads[p].flat()) {
            if (!std::isfinite(g)) {
                throw std::invalid_argument(
                    fmt::format("Optimizer::step: non-finite gradient for parameter '{}'", params[p].name));
            }
        }
    }
    ++steps_;
    if (spec_.kind == OptimizerKind::sgd) {
        for (std::size_t p = 0; p < params.size(); ++p) {
            auto w = params[p].value.flat();
            const auto g = grads[p].flat();
            for (std::size_t i = 0; i < w.size(); ++i) w[i] -= spec_.lr * g[i];
        }
        return;
    }
    if (m_.empty()) {
        for (const auto& prm : params) {
            m_.emplace_back(prm.value.rows(), prm.value.cols());
            v_.emplace_back(prm.value.rows(), prm.value.cols());
        }
    }
    const double t = static_cast<double>(steps_);
    const double bc1 = 1.0 - std::pow(spec_.beta1, t);
    const double bc2 = 1.0 - std::pow(spec_.beta2, t);
    for (std::size_t p = 0; p < params.size(); ++p) {
        auto w = params[p].value.flat();
        const auto g = grads[p].flat();
        auto m = m_[p].flat();
        auto v = v_[p].flat();
        for (std::size_t i = 0; i < w.size(); ++i) {
            m[i] = spec_.beta1 * m[i] + (1.0 - spec_.beta1) * g[i];
            v[i] = spec_.beta2 * v[i] + (1.0 - spec_.beta2) * g[i] * g[i];
            const double m_hat = m[i] / bc1;
            const double v_hat = v[i] / bc2;
            w[i] -= spec_.lr * m_hat / (std::sqrt(v_hat) + spec_.eps);
        }
    }
}

void save_snapshot(const std::vector<Parameter>& params, const std::filesystem::path& stem) {
    nlohmann::ordered_json header;
    header["format"] = "ccl-params-v1";
    header["values"] = stem.filename().string() + ".csv";
    auto& list = header["params"] = nlohmann::ordered_json::array();
    std::size_t offset = 0;
    for (const auto& p : params) {
        list.push_back({{"name", p.name}, {"rows", p.value.rows()}, {"cols", p.value.cols()}, {"offset", offset}});
        offset += p.value.size();
    }
    header["total"] = offset;

    auto json_path = stem;
    json_path += ".json";
    std::ofstream(json_path) << header.dump(2) << '\n';

    auto csv_path = stem;
    csv_path += ".csv";
    std::ofstream csv(csv_path);
    csv << "param,index,value\n";
    for (const auto& p : params)
        for (std::size_t i = 0; i < p.value.size(); ++i)
            csv << p.name << ',' << i << ',' << fmt::format("{:.17g}", p.value.data()[i]) << '\n';
}

std::vector<Parameter> load_snapshot(const std::filesystem::path& stem) {
    auto json_path = stem;
    json_path += ".json";
    std::ifstream jin(json_path);
    if (!jin) throw std::runtime_error("load_snapshot: cannot open " + json_path.string());
    const auto header = nlohmann::json::parse(jin);

    std::vector<Parameter> params;
    for (const auto& p : header.at("params")) {
        params.push_back({p.at("name").get<std::string>(),
                          Matrix(p.at("rows").get<std::size_t>(), p.at("cols").get<std::size_t>())});
    }
    auto csv_path = stem;
    csv_path += ".csv";
    std::ifstream cin(csv_path);
    if (!cin) throw std::runtime_error("load_snapshot: cannot open " + csv_path.string());
    std::string line;
    std::getline(cin, line);  // header
    std::size_t param = 0;
    std::size_t filled = 0;
    while (std::getline(cin, line)) {
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string name, index, value;
        std::getline(ls, name, ',');
        std::getline(ls, index, ',');
        std::getline(ls, value, ',');
        while (param < params.size() && filled == params[param].value.size()) {
            ++param;
            filled = 0;
        }
        if (param >= params.size() || params[param].name != name || std::stoul(index) != filled) {
            throw std::runtime_error("load_snapshot: values do not match header at '" + line + "'");
        }
        params[param].value.data()[filled++] = std::stod(value);
    }
    return params;
}

}  // namespace ccl::encoder
