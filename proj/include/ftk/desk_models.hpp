#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ftk/domain_features.hpp"
#include "ftk/rng.hpp"

namespace ftk {

enum class ModelKind { Linear, Mlp };

std::string model_kind_name(ModelKind kind);
ModelKind model_kind_from_name(const std::string& name);

struct ModelSpec {
    ModelKind kind = ModelKind::Linear;
    int input_dim = 0;
    int hidden = 0;       // mlp only
    int classes = 0;
    bool normalized = false;  // mlp only: weight-normalized hidden layer

    void validate() const;
};

// One named contiguous block of the flat parameter vector.
struct ParamSlice {
    std::string name;
    std::size_t offset = 0;
    std::size_t size = 0;
    bool shared = false;  // body (shared) vs. freshly initialized head (novel)
};

struct ParamLayout {
    std::vector<ParamSlice> slices;
    std::size_t total = 0;

    const ParamSlice& slice(const std::string& name) const;
    bool has_slice(const std::string& name) const;
    // Per-parameter mask: true for body coordinates, false for head.
    std::vector<bool> shared_mask() const;
};

struct ParamVector {
    std::vector<double> values;
    ParamLayout layout;
};

// Row-major sample matrix with integer class labels.
struct Dataset {
    int dim = 0;
    std::vector<double> x;  // size() * dim entries
    std::vector<int> y;

    std::size_t size() const { return y.size(); }
    std::span<const double> row(std::size_t i) const;
    void validate(int classes) const;
};

struct SyntheticTask {
    Dataset train;
    Dataset val;
    std::vector<std::vector<double>> means;  // classes x dim
    double delta = 0.0;
    std::uint64_t seed = 0;
    int n_per_class = 0;
    double sigma = 1.0;
    int classes = 0;
    int dim = 0;
};

ParamLayout make_layout(const ModelSpec& model);

// Body weights ~ N(0, 1/fan_in), biases zero, gains one.
ParamVector init_params(const ModelSpec& model, Rng& rng);

// Replaces every head (novel) coordinate with a draw from N(0, 0.01^2).
void reinit_head(ParamVector& params, Rng& rng);

// Mean softmax cross-entropy over the indexed rows of `data`. When
// `logits_out` is given it receives the n*classes logit matrix. The
// weight-normalized hidden layer computes h = gain .* (W x) / ||W||_F + b,
// which makes the loss exactly invariant to scaling of the W block.
double forward_loss(const ModelSpec& model, std::span<const double> theta,
                    const Dataset& data, std::span<const std::size_t> idx,
                    std::vector<double>* logits_out = nullptr);

// Analytic gradient of forward_loss with respect to theta.
std::vector<double> backward(const ModelSpec& model, std::span<const double> theta,
                             const Dataset& data, std::span<const std::size_t> idx);

// Max relative disagreement between backward() and central finite differences.
double gradcheck(const ModelSpec& model, std::span<const double> theta,
                 const Dataset& data, std::span<const std::size_t> idx, double eps);

// Fraction of misclassified samples over the whole dataset (argmax prediction,
// lowest index wins ties).
double error_rate(const ModelSpec& model, std::span<const double> theta,
                  const Dataset& data);

// Builds a source/target task pair with controllable shift: source class
// means ~ N(0, I); target means are the source means displaced by delta along
// per-class random unit directions; samples ~ N(mean, sigma^2 I). The draw
// order fixes the source task (and the target noise) independently of delta,
// so sweeping delta at a fixed seed varies only the shift.
std::pair<SyntheticTask, SyntheticTask> make_task_pair(std::uint64_t seed, int classes,
                                                       int input_dim, double delta,
                                                       int n_per_class, double sigma);

// Rows of the training split labeled by class, suitable for building a
// domain profile with the raw inputs acting as features.
RawFeatures task_features(const SyntheticTask& task);

// label,f0..f{D-1},split rows for both splits.
void write_task_csv(const SyntheticTask& task, const std::string& path);

}  // namespace ftk
