#include "ftk/desk_models.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include "ftk/errors.hpp"
#include "numfmt.hpp"

namespace ftk {

namespace {

struct Blocks {
    // Offsets into the flat vector; kNone when the model lacks the block.
    static constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();
    std::size_t w1 = kNone;
    std::size_t b1 = kNone;
    std::size_t gain = kNone;
    std::size_t w2 = kNone;  // head weights (the only weights for linear)
    std::size_t b2 = kNone;  // head bias
};

Blocks block_offsets(const ModelSpec& model, const ParamLayout& layout) {
    Blocks blocks;
    if (model.kind == ModelKind::Linear) {
        blocks.w2 = layout.slice("head_w").offset;
        blocks.b2 = layout.slice("head_b").offset;
        return blocks;
    }
    blocks.w1 = layout.slice("body_w").offset;
    blocks.b1 = layout.slice("body_b").offset;
    if (model.normalized) blocks.gain = layout.slice("body_gain").offset;
    blocks.w2 = layout.slice("head_w").offset;
    blocks.b2 = layout.slice("head_b").offset;
    return blocks;
}

void check_inputs(const ModelSpec& model, std::span<const double> theta,
                  const Dataset& data, std::span<const std::size_t> idx) {
    model.validate();
    const ParamLayout layout = make_layout(model);
    if (theta.size() != layout.total) {
        throw DimensionError("parameter vector has " + std::to_string(theta.size()) +
                             " entries, model needs " + std::to_string(layout.total));
    }
    if (data.dim != model.input_dim) {
        throw DimensionError("dataset dim " + std::to_string(data.dim) +
                             " does not match model input_dim " +
                             std::to_string(model.input_dim));
    }
    if (idx.empty()) {
        throw EmptyInputError("batch is empty");
    }
    for (std::size_t i : idx) {
        if (i >= data.size()) {
            throw InvalidInput("batch index " + std::to_string(i) + " out of range");
        }
        if (data.y[i] < 0 || data.y[i] >= model.classes) {
            throw DataError("label " + std::to_string(data.y[i]) + " outside [0, " +
                            std::to_string(model.classes) + ")");
        }
    }
}

// Per-batch activations kept for the backward pass.
struct Forward {
    std::vector<double> hidden_pre;   // n x H, pre-activation (mlp)
    std::vector<double> hidden;       // n x H, tanh output (mlp)
    std::vector<double> z1;           // n x H, W1 x (normalized mlp)
    double w1_norm = 0.0;             // ||W1||_F (normalized mlp)
    std::vector<double> logits;       // n x K
    std::vector<double> probs;        // n x K
    double loss = 0.0;
};

Forward run_forward(const ModelSpec& model, std::span<const double> theta,
                    const Dataset& data, std::span<const std::size_t> idx,
                    bool need_probs) {
    const ParamLayout layout = make_layout(model);
    const Blocks blk = block_offsets(model, layout);
    const std::size_t n = idx.size();
    const std::size_t d = static_cast<std::size_t>(model.input_dim);
    const std::size_t k = static_cast<std::size_t>(model.classes);
    const std::size_t h = model.kind == ModelKind::Mlp
                              ? static_cast<std::size_t>(model.hidden)
                              : 0;

    Forward fw;
    fw.logits.assign(n * k, 0.0);

    if (model.kind == ModelKind::Mlp) {
        fw.hidden_pre.assign(n * h, 0.0);
        fw.hidden.assign(n * h, 0.0);
        if (model.normalized) {
            fw.z1.assign(n * h, 0.0);
            double ss = 0.0;
            for (std::size_t j = 0; j < h * d; ++j) {
                const double w = theta[blk.w1 + j];
                ss += w * w;
            }
            fw.w1_norm = std::sqrt(ss);
            if (!(fw.w1_norm > 0.0) || !std::isfinite(fw.w1_norm)) {
                throw NumericError("hidden weight norm is zero or non-finite");
            }
        }
        for (std::size_t b = 0; b < n; ++b) {
            const std::span<const double> x = data.row(idx[b]);
            for (std::size_t j = 0; j < h; ++j) {
                double z = 0.0;
                const std::size_t wrow = blk.w1 + j * d;
                for (std::size_t c = 0; c < d; ++c) {
                    z += theta[wrow + c] * x[c];
                }
                double pre;
                if (model.normalized) {
                    fw.z1[b * h + j] = z;
                    pre = theta[blk.gain + j] * (z / fw.w1_norm) + theta[blk.b1 + j];
                } else {
                    pre = z + theta[blk.b1 + j];
                }
                fw.hidden_pre[b * h + j] = pre;
                fw.hidden[b * h + j] = std::tanh(pre);
            }
            for (std::size_t c = 0; c < k; ++c) {
                double z = theta[blk.b2 + c];
                const std::size_t wrow = blk.w2 + c * h;
                for (std::size_t j = 0; j < h; ++j) {
                    z += theta[wrow + j] * fw.hidden[b * h + j];
                }
                fw.logits[b * k + c] = z;
            }
        }
    } else {
        for (std::size_t b = 0; b < n; ++b) {
            const std::span<const double> x = data.row(idx[b]);
            for (std::size_t c = 0; c < k; ++c) {
                double z = theta[blk.b2 + c];
                const std::size_t wrow = blk.w2 + c * d;
                for (std::size_t j = 0; j < d; ++j) {
                    z += theta[wrow + j] * x[j];
                }
                fw.logits[b * k + c] = z;
            }
        }
    }

    if (need_probs) fw.probs.assign(n * k, 0.0);
    double loss_sum = 0.0;
    for (std::size_t b = 0; b < n; ++b) {
        double zmax = -std::numeric_limits<double>::infinity();
        for (std::size_t c = 0; c < k; ++c) {
            const double z = fw.logits[b * k + c];
            if (!std::isfinite(z)) {
                throw NumericError("non-finite logit for batch row " + std::to_string(b));
            }
            zmax = std::max(zmax, z);
        }
        double denom = 0.0;
        for (std::size_t c = 0; c < k; ++c) {
            denom += std::exp(fw.logits[b * k + c] - zmax);
        }
        const double lse = zmax + std::log(denom);
        loss_sum += lse - fw.logits[b * k + static_cast<std::size_t>(data.y[idx[b]])];
        if (need_probs) {
            for (std::size_t c = 0; c < k; ++c) {
                fw.probs[b * k + c] = std::exp(fw.logits[b * k + c] - zmax) / denom;
            }
        }
    }
    fw.loss = loss_sum / static_cast<double>(n);
    if (!std::isfinite(fw.loss)) {
        throw NumericError("non-finite loss");
    }
    return fw;
}

}  // namespace

std::string model_kind_name(ModelKind kind) {
    switch (kind) {
        case ModelKind::Linear: return "linear";
        case ModelKind::Mlp: return "mlp";
    }
    throw InvalidInput("unknown model kind");
}

ModelKind model_kind_from_name(const std::string& name) {
    if (name == "linear") return ModelKind::Linear;
    if (name == "mlp") return ModelKind::Mlp;
    throw InvalidInput("unknown model kind '" + name + "'");
}

void ModelSpec::validate() const {
    if (input_dim <= 0) throw InvalidInput("input_dim must be positive");
    if (classes < 2) throw InvalidInput("classes must be at least 2");
    if (kind == ModelKind::Mlp && hidden <= 0) {
        throw InvalidInput("mlp hidden size must be positive");
    }
    if (normalized && kind != ModelKind::Mlp) {
        throw InvalidInput("normalized layer requires an mlp model");
    }
}

const ParamSlice& ParamLayout::slice(const std::string& name) const {
    for (const ParamSlice& s : slices) {
        if (s.name == name) return s;
    }
    throw LookupError("no parameter slice named '" + name + "'");
}

bool ParamLayout::has_slice(const std::string& name) const {
    for (const ParamSlice& s : slices) {
        if (s.name == name) return true;
    }
    return false;
}

std::vector<bool> ParamLayout::shared_mask() const {
    std::vector<bool> mask(total, false);
    for (const ParamSlice& s : slices) {
        if (!s.shared) continue;
        for (std::size_t i = 0; i < s.size; ++i) mask[s.offset + i] = true;
    }
    return mask;
}

std::span<const double> Dataset::row(std::size_t i) const {
    return std::span<const double>(x).subspan(i * static_cast<std::size_t>(dim),
                                              static_cast<std::size_t>(dim));
}

void Dataset::validate(int classes) const {
    if (dim <= 0) throw InvalidInput("dataset dim must be positive");
    if (x.size() != y.size() * static_cast<std::size_t>(dim)) {
        throw DimensionError("dataset holds " + std::to_string(x.size()) +
                             " values for " + std::to_string(y.size()) + " rows of dim " +
                             std::to_string(dim));
    }
    for (int label : y) {
        if (label < 0 || label >= classes) {
            throw DataError("label " + std::to_string(label) + " outside [0, " +
                            std::to_string(classes) + ")");
        }
    }
}

ParamLayout make_layout(const ModelSpec& model) {
    model.validate();
    const std::size_t d = static_cast<std::size_t>(model.input_dim);
    const std::size_t k = static_cast<std::size_t>(model.classes);
    ParamLayout layout;
    auto add = [&layout](const std::string& name, std::size_t size, bool shared) {
        layout.slices.push_back({name, layout.total, size, shared});
        layout.total += size;
    };
    if (model.kind == ModelKind::Linear) {
        // No pretrained body: the whole linear map is a fresh head.
        add("head_w", k * d, false);
        add("head_b", k, false);
        return layout;
    }
    const std::size_t h = static_cast<std::size_t>(model.hidden);
    add("body_w", h * d, true);
    add("body_b", h, true);
    if (model.normalized) add("body_gain", h, true);
    add("head_w", k * h, false);
    add("head_b", k, false);
    return layout;
}

ParamVector init_params(const ModelSpec& model, Rng& rng) {
    ParamVector params;
    params.layout = make_layout(model);
    params.values.assign(params.layout.total, 0.0);
    const std::size_t d = static_cast<std::size_t>(model.input_dim);
    for (const ParamSlice& s : params.layout.slices) {
        if (s.name == "body_w") {
            const double stddev = 1.0 / std::sqrt(static_cast<double>(d));
            for (std::size_t i = 0; i < s.size; ++i) {
                params.values[s.offset + i] = rng.normal(0.0, stddev);
            }
        } else if (s.name == "head_w") {
            const std::size_t fan_in = model.kind == ModelKind::Linear
                                           ? d
                                           : static_cast<std::size_t>(model.hidden);
            const double stddev = 1.0 / std::sqrt(static_cast<double>(fan_in));
            for (std::size_t i = 0; i < s.size; ++i) {
                params.values[s.offset + i] = rng.normal(0.0, stddev);
            }
        } else if (s.name == "body_gain") {
            for (std::size_t i = 0; i < s.size; ++i) {
                params.values[s.offset + i] = 1.0;
            }
        }
        // biases stay zero
    }
    return params;
}

void reinit_head(ParamVector& params, Rng& rng) {
    for (const ParamSlice& s : params.layout.slices) {
        if (s.shared) continue;
        for (std::size_t i = 0; i < s.size; ++i) {
            params.values[s.offset + i] = rng.normal(0.0, 0.01);
        }
    }
}

double forward_loss(const ModelSpec& model, std::span<const double> theta,
                    const Dataset& data, std::span<const std::size_t> idx,
                    std::vector<double>* logits_out) {
    check_inputs(model, theta, data, idx);
    Forward fw = run_forward(model, theta, data, idx, false);
    if (logits_out != nullptr) *logits_out = std::move(fw.logits);
    return fw.loss;
}

std::vector<double> backward(const ModelSpec& model, std::span<const double> theta,
                             const Dataset& data, std::span<const std::size_t> idx) {
    check_inputs(model, theta, data, idx);
    const ParamLayout layout = make_layout(model);
    const Blocks blk = block_offsets(model, layout);
    const Forward fw = run_forward(model, theta, data, idx, true);

    const std::size_t n = idx.size();
    const std::size_t d = static_cast<std::size_t>(model.input_dim);
    const std::size_t k = static_cast<std::size_t>(model.classes);
    std::vector<double> grad(layout.total, 0.0);
    const double inv_n = 1.0 / static_cast<double>(n);

    if (model.kind == ModelKind::Linear) {
        for (std::size_t b = 0; b < n; ++b) {
            const std::span<const double> x = data.row(idx[b]);
            const int label = data.y[idx[b]];
            for (std::size_t c = 0; c < k; ++c) {
                double dz = fw.probs[b * k + c];
                if (static_cast<std::size_t>(label) == c) dz -= 1.0;
                dz *= inv_n;
                grad[blk.b2 + c] += dz;
                const std::size_t wrow = blk.w2 + c * d;
                for (std::size_t j = 0; j < d; ++j) {
                    grad[wrow + j] += dz * x[j];
                }
            }
        }
        return grad;
    }

    const std::size_t h = static_cast<std::size_t>(model.hidden);
    std::vector<double> dpre(h);
    // For the normalized layer: d loss / d ||W1||_F, accumulated over the batch.
    double dnorm = 0.0;
    for (std::size_t b = 0; b < n; ++b) {
        const std::span<const double> x = data.row(idx[b]);
        const int label = data.y[idx[b]];
        std::fill(dpre.begin(), dpre.end(), 0.0);
        for (std::size_t c = 0; c < k; ++c) {
            double dz = fw.probs[b * k + c];
            if (static_cast<std::size_t>(label) == c) dz -= 1.0;
            dz *= inv_n;
            grad[blk.b2 + c] += dz;
            const std::size_t wrow = blk.w2 + c * h;
            for (std::size_t j = 0; j < h; ++j) {
                grad[wrow + j] += dz * fw.hidden[b * h + j];
                dpre[j] += dz * theta[wrow + j];
            }
        }
        for (std::size_t j = 0; j < h; ++j) {
            const double a = fw.hidden[b * h + j];
            dpre[j] *= 1.0 - a * a;  // tanh'
            grad[blk.b1 + j] += dpre[j];
            if (model.normalized) {
                const double z = fw.z1[b * h + j];
                const double u = z / fw.w1_norm;
                grad[blk.gain + j] += dpre[j] * u;
                const double dz1 = dpre[j] * theta[blk.gain + j] / fw.w1_norm;
                const std::size_t wrow = blk.w1 + j * d;
                for (std::size_t c = 0; c < d; ++c) {
                    grad[wrow + c] += dz1 * x[c];
                }
                dnorm -= dpre[j] * theta[blk.gain + j] * z / (fw.w1_norm * fw.w1_norm);
            } else {
                const std::size_t wrow = blk.w1 + j * d;
                for (std::size_t c = 0; c < d; ++c) {
                    grad[wrow + c] += dpre[j] * x[c];
                }
            }
        }
    }
    if (model.normalized) {
        // d||W||_F/dW = W/||W||_F
        const double scale = dnorm / fw.w1_norm;
        for (std::size_t j = 0; j < h * d; ++j) {
            grad[blk.w1 + j] += scale * theta[blk.w1 + j];
        }
    }
    return grad;
}

double gradcheck(const ModelSpec& model, std::span<const double> theta,
                 const Dataset& data, std::span<const std::size_t> idx, double eps) {
    if (!(eps >= 1e-7 && eps <= 1e-3)) {
        throw InvalidInput("gradcheck eps must lie in [1e-7, 1e-3]");
    }
    const std::vector<double> analytic = backward(model, theta, data, idx);
    std::vector<double> probe(theta.begin(), theta.end());
    double worst = 0.0;
    for (std::size_t i = 0; i < probe.size(); ++i) {
        const double saved = probe[i];
        probe[i] = saved + eps;
        const double up = forward_loss(model, probe, data, idx);
        probe[i] = saved - eps;
        const double down = forward_loss(model, probe, data, idx);
        probe[i] = saved;
        const double numeric = (up - down) / (2.0 * eps);
        const double denom = std::max(1e-12, std::abs(analytic[i]) + std::abs(numeric));
        worst = std::max(worst, std::abs(analytic[i] - numeric) / denom);
    }
    return worst;
}

double error_rate(const ModelSpec& model, std::span<const double> theta,
                  const Dataset& data) {
    std::vector<std::size_t> idx(data.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    check_inputs(model, theta, data, idx);
    const Forward fw = run_forward(model, theta, data, idx, false);
    const std::size_t k = static_cast<std::size_t>(model.classes);
    std::size_t wrong = 0;
    for (std::size_t b = 0; b < idx.size(); ++b) {
        std::size_t best = 0;
        for (std::size_t c = 1; c < k; ++c) {
            if (fw.logits[b * k + c] > fw.logits[b * k + best]) best = c;
        }
        if (best != static_cast<std::size_t>(data.y[b])) ++wrong;
    }
    return static_cast<double>(wrong) / static_cast<double>(data.size());
}

std::pair<SyntheticTask, SyntheticTask> make_task_pair(std::uint64_t seed, int classes,
                                                       int input_dim, double delta,
                                                       int n_per_class, double sigma) {
    if (classes < 2) throw InvalidInput("classes must be at least 2");
    if (input_dim < 2) throw InvalidInput("input_dim must be at least 2");
    if (!std::isfinite(delta) || delta < 0.0) {
        throw InvalidInput("delta must be non-negative and finite");
    }
    if (n_per_class < 1) throw InvalidInput("n_per_class must be positive");
    if (!std::isfinite(sigma) || sigma <= 0.0) {
        throw InvalidInput("sigma must be positive and finite");
    }

    const std::size_t k = static_cast<std::size_t>(classes);
    const std::size_t d = static_cast<std::size_t>(input_dim);
    Rng rng(seed);

    std::vector<std::vector<double>> source_means(k, std::vector<double>(d));
    for (auto& mean : source_means) {
        for (double& v : mean) v = rng.normal();
    }
    // Per-class unit shift directions; delta itself consumes no draws, so the
    // stream position (and hence all sample noise) is identical across deltas.
    std::vector<std::vector<double>> target_means(k, std::vector<double>(d));
    for (std::size_t c = 0; c < k; ++c) {
        std::vector<double> dir(d);
        double norm = 0.0;
        for (double& v : dir) {
            v = rng.normal();
            norm += v * v;
        }
        norm = std::sqrt(norm);
        if (norm < 1e-12) {
            dir.assign(d, 0.0);
            dir[0] = 1.0;
            norm = 1.0;
        }
        for (std::size_t j = 0; j < d; ++j) {
            target_means[c][j] = source_means[c][j] + delta * dir[j] / norm;
        }
    }

    const int n_val = std::max(1, n_per_class / 5);
    auto sample = [&](const std::vector<std::vector<double>>& means, int per_class,
                      Dataset& out) {
        out.dim = input_dim;
        out.x.reserve(k * static_cast<std::size_t>(per_class) * d);
        out.y.reserve(k * static_cast<std::size_t>(per_class));
        for (std::size_t c = 0; c < k; ++c) {
            for (int i = 0; i < per_class; ++i) {
                for (std::size_t j = 0; j < d; ++j) {
                    out.x.push_back(means[c][j] + sigma * rng.normal());
                }
                out.y.push_back(static_cast<int>(c));
            }
        }
    };

    SyntheticTask source;
    source.means = source_means;
    source.delta = 0.0;
    SyntheticTask target;
    target.means = target_means;
    target.delta = delta;
    for (SyntheticTask* task : {&source, &target}) {
        task->seed = seed;
        task->n_per_class = n_per_class;
        task->sigma = sigma;
        task->classes = classes;
        task->dim = input_dim;
    }
    sample(source_means, n_per_class, source.train);
    sample(source_means, n_val, source.val);
    sample(target_means, n_per_class, target.train);
    sample(target_means, n_val, target.val);
    return {std::move(source), std::move(target)};
}

RawFeatures task_features(const SyntheticTask& task) {
    RawFeatures raw;
    raw.dim = static_cast<std::size_t>(task.dim);
    raw.rows.reserve(task.train.size());
    for (std::size_t i = 0; i < task.train.size(); ++i) {
        FeatureRow row;
        row.label = std::to_string(task.train.y[i]);
        const auto x = task.train.row(i);
        row.values.assign(x.begin(), x.end());
        raw.rows.push_back(std::move(row));
    }
    raw.validate();
    return raw;
}

void write_task_csv(const SyntheticTask& task, const std::string& path) {
    std::ofstream out(path);
    if (!out) {
        throw IoError("cannot open '" + path + "' for writing");
    }
    out << "label";
    for (int j = 0; j < task.dim; ++j) out << ",f" << j;
    out << ",split\n";
    auto dump = [&](const Dataset& data, const char* split) {
        for (std::size_t i = 0; i < data.size(); ++i) {
            out << data.y[i];
            const auto x = data.row(i);
            for (double v : x) out << ',' << detail::format_double(v);
            out << ',' << split << '\n';
        }
    };
    dump(task.train, "train");
    dump(task.val, "val");
    if (!out) {
        throw IoError("failed writing '" + path + "'");
    }
}

}  // namespace ftk
