#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "ccl/matrix.hpp"
#include "ccl/rng.hpp"

namespace ccl::encoder {

struct Parameter {
    std::string name;
    Matrix value;
};

/// One gradient matrix per parameter, in parameter order.
using Gradients = std::vector<Matrix>;

/// Learnable vector per instance; forward is a row lookup.
class EmbeddingTable {
public:
    /// Entries ~ U(-0.1, 0.1).
    EmbeddingTable(std::size_t instances, std::size_t dim, Rng& rng);

    std::size_t instances() const noexcept { return params_[0].value.rows(); }
    std::size_t dim() const noexcept { return params_[0].value.cols(); }

    Matrix forward(std::span<const std::size_t> indices) const;
    Gradients backward(std::span<const std::size_t> indices, const Matrix& upstream) const;

    std::vector<Parameter>& params() noexcept { return params_; }
    const std::vector<Parameter>& params() const noexcept { return params_; }

private:
    std::vector<Parameter> params_;
};

/// Activations kept from the forward pass for backward.
struct MlpCache {
    Matrix input;
    Matrix hidden_pre;
    Matrix hidden;
};

/// z = relu(x W1 + b1) W2 + b2.
class Mlp {
public:
    /// Weights ~ U(±1/sqrt(fan_in)), biases zero.
    Mlp(std::size_t input_dim, std::size_t hidden_dim, std::size_t output_dim, Rng& rng);

    std::size_t input_dim() const noexcept { return w1().rows(); }
    std::size_t hidden_dim() const noexcept { return w1().cols(); }
    std::size_t output_dim() const noexcept { return w2().cols(); }

    const Matrix& w1() const noexcept { return params_[0].value; }
    const Matrix& b1() const noexcept { return params_[1].value; }
    const Matrix& w2() const noexcept { return params_[2].value; }
    const Matrix& b2() const noexcept { return params_[3].value; }

    Matrix forward(const Matrix& x, MlpCache* cache = nullptr) const;
    Gradients backward(const MlpCache& cache, const Matrix& upstream) const;

    std::vector<Parameter>& params() noexcept { return params_; }
    const std::vector<Parameter>& params() const noexcept { return params_; }

private:
    std::vector<Parameter> params_;  // W1, b1, W2, b2
};

enum class EncoderKind { table, mlp };

/**
 * Either encoder behind one interface. The table consumes instance indices,
 * the MLP consumes feature rows; callers pass both and each takes what it needs.
 */
class Encoder {
public:
    struct Cache {
        MlpCache mlp;
        std::vector<std::size_t> indices;
    };

    explicit Encoder(EmbeddingTable table) : impl_(std::move(table)) {}
    explicit Encoder(Mlp mlp) : impl_(std::move(mlp)) {}

    EncoderKind kind() const noexcept {
        return std::holds_alternative<EmbeddingTable>(impl_) ? EncoderKind::table : EncoderKind::mlp;
    }
    std::size_t output_dim() const noexcept;

    Matrix forward(const Matrix& features, std::span<const std::size_t> indices, Cache& cache) const;
    Gradients backward(const Cache& cache, const Matrix& upstream) const;

    std::vector<Parameter>& params() noexcept;
    const std::vector<Parameter>& params() const noexcept;

private:
    std::variant<EmbeddingTable, Mlp> impl_;
};

/// Adds `other` into `acc` parameter by parameter.
void accumulate(Gradients& acc, const Gradients& other);

enum class OptimizerKind { sgd, adam };

struct OptimizerSpec {
    OptimizerKind kind = OptimizerKind::adam;
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

/// Optimizer with per-parameter Adam moments.
class Optimizer {
public:
    explicit Optimizer(OptimizerSpec spec) : spec_(spec) {}

    /// Applies one update. Throws std::invalid_argument naming the parameter on a
    /// shape mismatch or a non-finite gradient; parameters are left untouched then.
    void step(std::vector<Parameter>& params, const Gradients& grads);

    const OptimizerSpec& spec() const noexcept { return spec_; }
    std::size_t step_count() const noexcept { return steps_; }
    const std::vector<Matrix>& first_moments() const noexcept { return m_; }
    const std::vector<Matrix>& second_moments() const noexcept { return v_; }

private:
    OptimizerSpec spec_;
    std::size_t steps_ = 0;
    std::vector<Matrix> m_;
    std::vector<Matrix> v_;
};

/// Writes `<stem>.json` (shape metadata) and `<stem>.csv` (`param,index,value`).
void save_snapshot(const std::vector<Parameter>& params, const std::filesystem::path& stem);
std::vector<Parameter> load_snapshot(const std::filesystem::path& stem);

}  // namespace ccl::encoder
