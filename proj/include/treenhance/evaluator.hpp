#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "treenhance/image.hpp"

namespace trenh {

class Catalog;

struct EvaluatorOutput {
    std::vector<float> policy;
    float value = 0.5f;
};

/// Anything that maps an image to (policy, value). Implementations must be
/// safe to call concurrently from several search trees.
class Evaluator {
public:
    virtual ~Evaluator() = default;
    virtual std::size_t num_actions() const = 0;
    virtual EvaluatorOutput evaluate(const Image& img) const = 0;
};

/// Pure-search fallback: uniform priors and a constant 0.5 value.
class UniformEvaluator final : public Evaluator {
public:
    explicit UniformEvaluator(std::size_t num_actions) : num_actions_(num_actions) {}
    std::size_t num_actions() const override { return num_actions_; }
    EvaluatorOutput evaluate(const Image& img) const override;

private:
    std::size_t num_actions_;
};

/// Shape of the reference network: four stride-2 3x3 conv blocks with
/// ReLU6, global average pooling, then policy and value heads of two fully
/// connected layers each, dropout after the first.
struct Architecture {
    std::string catalog = "lol";
    std::size_t num_actions = 37;
    std::size_t input_size = 256;
    std::vector<std::size_t> widths = {16, 32, 64, 64};
    std::size_t hidden = 128;
    float dropout_p = 0.6f;

    nlohmann::json to_json() const;
    static Architecture from_json(const nlohmann::json& j);
    friend bool operator==(const Architecture&, const Architecture&) = default;
};

struct Tensor {
    std::string name;
    std::vector<std::size_t> shape;
    std::vector<float> values;

    std::size_t numel() const noexcept { return values.size(); }
    friend bool operator==(const Tensor&, const Tensor&) = default;
};

struct EvaluatorParams {
    Architecture arch;
    std::vector<Tensor> tensors;

    const Tensor& tensor(std::string_view name) const;
    std::size_t parameter_count() const noexcept;
    friend bool operator==(const EvaluatorParams&, const EvaluatorParams&) = default;
};

/// Names and shapes the architecture prescribes, in storage order.
std::vector<Tensor> expected_tensors(const Architecture& arch);

/// Fan-in scaled uniform initialization U(-1/sqrt(fan_in), 1/sqrt(fan_in)).
EvaluatorParams init_params(const Architecture& arch, std::uint64_t seed);

/// Throws ShapeMismatch when tensors disagree with the descriptor.
void validate(const EvaluatorParams& params);

/// Throws CatalogMismatch when the model was built for a different action set.
void check_catalog(const EvaluatorParams& params, const Catalog& cat);

/// Per-unit multipliers for the first layer of each head; 0 or 1/(1-p).
/// Empty vectors disable dropout.
struct DropoutMasks {
    std::vector<double> policy;
    std::vector<double> value;

    static DropoutMasks sample(const Architecture& arch, std::mt19937_64& rng);
};

/// Forward pass. With training=true dropout masks are drawn from `rng`
/// (which must then be non-null).
EvaluatorOutput forward(const EvaluatorParams& params, const Image& img, bool training = false,
                        std::mt19937_64* rng = nullptr);

/// lambda (r - v)^2 - sum_a rho(a) log(pi(a) + 1e-12)
double loss(const EvaluatorOutput& out, double target_r, std::span<const float> target_rho,
            double lambda);

/// Gradients laid out parallel to EvaluatorParams::tensors.
using Gradients = std::vector<std::vector<double>>;

/// Loss of one example and, when `grad` is non-null, its gradient added into
/// `grad`. `masks` may be null (no dropout).
double loss_and_gradient(const EvaluatorParams& params, const Image& img, double target_r,
                         std::span<const float> target_rho, double lambda,
                         const DropoutMasks* masks, Gradients* grad);

Gradients zero_gradients(const EvaluatorParams& params);

/// Training example: an image visited as a search root, the return the
/// episode achieved, and the root visit distribution.
struct Triplet {
    Image image;
    float ret = 0.0f;
    std::vector<float> rho;
};

struct TrainConfig {
    double lambda = 1.0;
    double learning_rate = 1e-3;
    double weight_decay = 1e-2;
    std::size_t steps_per_round = 160;
    std::size_t batch_size = 32;
    std::uint64_t seed = 0;
};

/// AdamW (beta1 0.9, beta2 0.999, eps 1e-8, decoupled weight decay) over
/// the mean loss of a batch. Owns the optimizer moments; `params` must
/// outlive it and must not be read by other threads during step().
class Trainer {
public:
    Trainer(EvaluatorParams& params, TrainConfig cfg);

    /// One optimizer step; returns the mean batch loss before the update.
    double step(std::span<const Triplet* const> batch);

    /// Mean loss over `batch` with dropout off, no update.
    double evaluate_loss(std::span<const Triplet* const> batch) const;

    const TrainConfig& config() const noexcept { return cfg_; }
    std::mt19937_64& rng() noexcept { return rng_; }

private:
    EvaluatorParams& params_;
    TrainConfig cfg_;
    std::mt19937_64 rng_;
    Gradients m_;
    Gradients v_;
    std::uint64_t t_ = 0;
};

/// Deterministic network-backed evaluator (dropout off).
class NetworkEvaluator final : public Evaluator {
public:
    explicit NetworkEvaluator(std::shared_ptr<const EvaluatorParams> params)
        : params_(std::move(params)) {}
    std::size_t num_actions() const override { return params_->arch.num_actions; }
    EvaluatorOutput evaluate(const Image& img) const override { return forward(*params_, img); }
    const EvaluatorParams& params() const noexcept { return *params_; }

private:
    std::shared_ptr<const EvaluatorParams> params_;
};

inline constexpr char kModelMagic[4] = {'T', 'R', 'N', 'H'};
inline constexpr std::uint32_t kModelVersion = 1;

void save_params(const EvaluatorParams& params, const std::filesystem::path& path);
EvaluatorParams load_params(const std::filesystem::path& path);

}  // namespace trenh
