#include "ftk/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>

#include "ftk/errors.hpp"

namespace ftk {

namespace {

std::vector<std::size_t> shared_offsets(const ParamLayout& layout) {
    std::vector<std::size_t> offsets;
    for (const ParamSlice& s : layout.slices) {
        if (!s.shared) continue;
        for (std::size_t i = 0; i < s.size; ++i) offsets.push_back(s.offset + i);
    }
    return offsets;
}

struct EpochRunner {
    const ModelSpec& model;
    const Dataset& train;
    const RegularizerSpec& reg;
    bool use_penalty;
    HyperParams hp;  // weight_decay holds the decoupled coefficient

    void run(OptimState& state, double eta_t, std::vector<std::size_t>& indices,
             Rng& rng) const {
        rng.shuffle(indices);
        const std::size_t n = indices.size();
        const std::size_t batch = std::min<std::size_t>(
            static_cast<std::size_t>(hp.batch_size), n);
        for (std::size_t start = 0; start < n; start += batch) {
            const std::size_t count = std::min(batch, n - start);
            const std::span<const std::size_t> chunk(indices.data() + start, count);
            const std::vector<double> look = lookahead_point(state, hp.momentum);
            std::vector<double> grad = backward(model, look, train, chunk);
            if (use_penalty) {
                add_penalty_gradient(reg, look, grad);
            }
            state = nag_step(state, grad, hp, eta_t);
        }
    }
};

}  // namespace

std::string init_mode_name(InitMode mode) {
    return mode == InitMode::Finetune ? "finetune" : "scratch";
}

InitMode init_mode_from_name(const std::string& name) {
    if (name == "finetune") return InitMode::Finetune;
    if (name == "scratch") return InitMode::Scratch;
    throw InvalidInput("unknown init mode '" + name + "'");
}

std::string l2_mode_name(L2Mode mode) {
    return mode == L2Mode::Decoupled ? "decoupled" : "penalty";
}

L2Mode l2_mode_from_name(const std::string& name) {
    if (name == "decoupled") return L2Mode::Decoupled;
    if (name == "penalty") return L2Mode::Penalty;
    throw InvalidInput("unknown l2 mode '" + name + "'");
}

bool result_payload_equal(const TrialResult& a, const TrialResult& b) {
    return a.hyper.eta == b.hyper.eta && a.hyper.momentum == b.hyper.momentum &&
           a.hyper.weight_decay == b.hyper.weight_decay &&
           a.hyper.batch_size == b.hyper.batch_size &&
           a.hyper.schedule.base_eta == b.hyper.schedule.base_eta &&
           a.hyper.schedule.milestones == b.hyper.schedule.milestones &&
           a.hyper.schedule.factor == b.hyper.schedule.factor &&
           a.hyper.schedule.total_epochs == b.hyper.schedule.total_epochs &&
           a.elr == b.elr && a.effective_wd == b.effective_wd &&
           a.reg_kind == b.reg_kind && a.lambda1 == b.lambda1 &&
           a.lambda2 == b.lambda2 && a.l2_mode == b.l2_mode && a.init == b.init &&
           a.seed == b.seed && a.train_error == b.train_error &&
           a.val_error == b.val_error && a.final_val_error == b.final_val_error &&
           a.min_val_error == b.min_val_error && a.norm_l2 == b.norm_l2 &&
           a.norm_l2sp == b.norm_l2sp && a.diverged == b.diverged;
}

ParamVector pretrain(const ModelSpec& model, const SyntheticTask& source,
                     const PretrainOptions& opts) {
    model.validate();
    source.train.validate(model.classes);
    source.val.validate(model.classes);
    if (source.train.size() == 0 || source.val.size() == 0) {
        throw EmptyInputError("source task needs non-empty train and val splits");
    }
    if (opts.max_epochs <= 0 || opts.patience <= 0) {
        throw InvalidInput("pre-training epochs and patience must be positive");
    }

    HyperParams hp;
    hp.eta = opts.eta;
    hp.momentum = opts.momentum;
    hp.weight_decay = opts.weight_decay;
    hp.batch_size = opts.batch_size;
    hp.schedule = ScheduleSpec{opts.eta, {}, 0.1, opts.max_epochs};
    hp.validate();

    Rng rng(opts.seed);
    ParamVector params = init_params(model, rng);
    OptimState state;
    state.theta = params.values;
    state.velocity.assign(params.values.size(), 0.0);

    const RegularizerSpec no_reg = RegularizerSpec::none();
    const EpochRunner runner{model, source.train, no_reg, false, hp};
    std::vector<std::size_t> indices(source.train.size());
    std::iota(indices.begin(), indices.end(), std::size_t{0});

    double best = std::numeric_limits<double>::infinity();
    int since_best = 0;
    for (int epoch = 0; epoch < opts.max_epochs; ++epoch) {
        runner.run(state, opts.eta, indices, rng);
        const double val = error_rate(model, state.theta, source.val);
        if (val < best) {
            best = val;
            since_best = 0;
        } else if (++since_best >= opts.patience) {
            break;
        }
    }
    params.values = std::move(state.theta);
    return params;
}

TrialResult run_trial(const TrialConfig& cfg, const SyntheticTask& task,
                      const ParamVector* pretrained) {
    const auto t0 = std::chrono::steady_clock::now();
    cfg.model.validate();
    cfg.hyper.validate();
    task.train.validate(cfg.model.classes);
    task.val.validate(cfg.model.classes);
    if (task.train.size() == 0 || task.val.size() == 0) {
        throw EmptyInputError("task needs non-empty train and val splits");
    }

    Rng rng(cfg.seed);
    ParamVector params;
    if (cfg.init == InitMode::Finetune) {
        if (pretrained == nullptr) {
            throw InvalidInput("fine-tuning trial needs a pre-trained starting point");
        }
        params = *pretrained;
        if (params.layout.total != make_layout(cfg.model).total) {
            throw DimensionError("pre-trained parameters do not fit the model");
        }
        reinit_head(params, rng);
    } else {
        params = init_params(cfg.model, rng);
    }
    const std::vector<double> theta_start = params.values;

    // lambda1 is the trial's weight-decay knob; how it enters the update
    // depends on the regularizer kind.
    RegularizerSpec reg = RegularizerSpec::none();
    bool use_penalty = false;
    double decoupled_wd = cfg.hyper.weight_decay;
    switch (cfg.reg.kind) {
        case RegKind::None:
            break;
        case RegKind::L2:
            reg = RegularizerSpec::l2(cfg.hyper.weight_decay);
            if (cfg.reg.l2_mode == L2Mode::Penalty) {
                use_penalty = true;
                decoupled_wd = 0.0;
            }
            break;
        case RegKind::L2Sp: {
            const std::vector<bool> mask = params.layout.shared_mask();
            std::vector<double> reference;
            for (std::size_t off : shared_offsets(params.layout)) {
                reference.push_back(theta_start[off]);
            }
            reg = RegularizerSpec::l2sp(cfg.hyper.weight_decay, cfg.reg.lambda2,
                                        std::move(reference), mask);
            use_penalty = true;
            decoupled_wd = 0.0;
            break;
        }
    }
    reg.validate(theta_start.size());

    HyperParams hp_step = cfg.hyper;
    hp_step.weight_decay = decoupled_wd;

    // The recorded hyperparams describe the update actually applied: for
    // penalty-form trials the decoupled decay is zero and the swept value
    // lives in lambda1.
    TrialResult result;
    result.hyper = hp_step;
    result.elr = cfg.nominal_elr > 0.0 ? cfg.nominal_elr : elr(cfg.hyper);
    result.effective_wd = effective_wd(hp_step);
    result.reg_kind = reg_kind_name(cfg.reg.kind);
    result.lambda1 = cfg.reg.kind == RegKind::None ? 0.0 : cfg.hyper.weight_decay;
    result.lambda2 = cfg.reg.kind == RegKind::L2Sp ? cfg.reg.lambda2 : 0.0;
    result.l2_mode = use_penalty ? "penalty" : "decoupled";
    result.init = init_mode_name(cfg.init);
    result.seed = cfg.seed;

    OptimState state;
    state.theta = params.values;
    state.velocity.assign(params.values.size(), 0.0);

    const EpochRunner runner{cfg.model, task.train, reg, use_penalty, hp_step};
    std::vector<std::size_t> indices(task.train.size());
    std::iota(indices.begin(), indices.end(), std::size_t{0});

    const int epochs = cfg.hyper.schedule.total_epochs;
    for (int epoch = 0; epoch < epochs && !result.diverged; ++epoch) {
        try {
            const double eta_t = schedule_eta(cfg.hyper.schedule, epoch);
            runner.run(state, eta_t, indices, rng);
            const double train_err = error_rate(cfg.model, state.theta, task.train);
            const double val_err = error_rate(cfg.model, state.theta, task.val);
            const double nl2 = normalized_l2(state.theta, theta_start);
            double nsp = 0.0;
            if (cfg.reg.kind == RegKind::L2Sp) {
                nsp = normalized_l2sp(state.theta, theta_start, reg);
            }
            // The loss can stay finite for a while after the weights overflow
            // the squared norm; count that as divergence too.
            if (!std::isfinite(nl2) || !std::isfinite(nsp)) {
                throw NumericError("non-finite weight norm at epoch " +
                                   std::to_string(epoch));
            }
            result.train_error.push_back(train_err);
            result.val_error.push_back(val_err);
            result.norm_l2.push_back(nl2);
            if (cfg.reg.kind == RegKind::L2Sp) {
                result.norm_l2sp.push_back(nsp);
            }
        } catch (const NumericError&) {
            result.diverged = true;
        }
    }

    const std::size_t n_epochs = static_cast<std::size_t>(epochs);
    if (result.diverged) {
        result.train_error.resize(n_epochs, 1.0);
        result.val_error.resize(n_epochs, 1.0);
        result.norm_l2.resize(n_epochs, result.norm_l2.empty() ? 1.0 : result.norm_l2.back());
        if (cfg.reg.kind == RegKind::L2Sp) {
            result.norm_l2sp.resize(n_epochs,
                                    result.norm_l2sp.empty() ? 1.0 : result.norm_l2sp.back());
        }
        result.final_val_error = 1.0;
        result.min_val_error = 1.0;
        for (double v : result.val_error) result.min_val_error = std::min(result.min_val_error, v);
    } else {
        result.final_val_error = result.val_error.back();
        result.min_val_error = *std::min_element(result.val_error.begin(),
                                                 result.val_error.end());
    }
    result.wall_time_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return result;
}

}  // namespace ftk
