#include "ftk/optim.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "ftk/errors.hpp"

namespace ftk {

void ScheduleSpec::validate() const {
    if (!std::isfinite(base_eta) || base_eta <= 0.0) {
        throw InvalidInput("schedule base_eta must be positive and finite");
    }
    if (!std::isfinite(factor) || factor <= 0.0 || factor > 1.0) {
        throw InvalidInput("schedule factor must be in (0, 1]");
    }
    if (total_epochs <= 0) {
        throw InvalidInput("schedule total_epochs must be positive");
    }
    int prev = -1;
    for (int ms : milestones) {
        if (ms <= prev) {
            throw InvalidInput("schedule milestones must be strictly increasing");
        }
        if (ms < 0 || ms >= total_epochs) {
            throw InvalidInput("schedule milestone " + std::to_string(ms) +
                               " outside [0, " + std::to_string(total_epochs) + ")");
        }
        prev = ms;
    }
}

void HyperParams::validate() const {
    if (!std::isfinite(eta) || eta <= 0.0) {
        throw InvalidInput("eta must be positive and finite");
    }
    if (!std::isfinite(momentum) || momentum < 0.0 || momentum >= 1.0) {
        throw InvalidInput("momentum must be in [0, 1)");
    }
    if (!std::isfinite(weight_decay) || weight_decay < 0.0) {
        throw InvalidInput("weight_decay must be non-negative and finite");
    }
    if (batch_size <= 0) {
        throw InvalidInput("batch_size must be positive");
    }
    schedule.validate();
}

double elr(double eta, double momentum) {
    if (!std::isfinite(eta) || eta <= 0.0) {
        throw InvalidInput("eta must be positive and finite");
    }
    if (!std::isfinite(momentum) || momentum < 0.0 || momentum >= 1.0) {
        throw InvalidInput("momentum must be in [0, 1)");
    }
    return eta / (1.0 - momentum);
}

double elr(const HyperParams& hp) { return elr(hp.eta, hp.momentum); }

double eta_for_elr(double target_elr, double momentum) {
    if (!std::isfinite(target_elr) || target_elr <= 0.0) {
        throw InvalidInput("target effective learning rate must be positive");
    }
    if (!std::isfinite(momentum) || momentum < 0.0 || momentum >= 1.0) {
        throw InvalidInput("momentum must be in [0, 1)");
    }
    return target_elr * (1.0 - momentum);
}

double effective_wd(const HyperParams& hp) {
    if (!std::isfinite(hp.eta) || hp.eta <= 0.0) {
        throw InvalidInput("eta must be positive to form effective weight decay");
    }
    if (!std::isfinite(hp.weight_decay) || hp.weight_decay < 0.0) {
        throw InvalidInput("weight_decay must be non-negative and finite");
    }
    return hp.weight_decay / hp.eta;
}

double schedule_eta(const ScheduleSpec& spec, int epoch) {
    spec.validate();
    if (epoch < 0 || epoch >= spec.total_epochs) {
        throw InvalidInput("epoch " + std::to_string(epoch) + " outside schedule range [0, " +
                           std::to_string(spec.total_epochs) + ")");
    }
    double eta = spec.base_eta;
    for (int ms : spec.milestones) {
        if (epoch >= ms) eta *= spec.factor;
    }
    return eta;
}

OptimState nag_step(const OptimState& state, std::span<const double> grad,
                    const HyperParams& hp, double eta_t) {
    const std::size_t p = state.theta.size();
    if (state.velocity.size() != p) {
        throw DimensionError("optimizer state has " + std::to_string(state.theta.size()) +
                             " parameters but " + std::to_string(state.velocity.size()) +
                             " velocity entries");
    }
    if (grad.size() != p) {
        throw DimensionError("gradient has " + std::to_string(grad.size()) +
                             " entries, expected " + std::to_string(p));
    }
    if (!std::isfinite(eta_t) || eta_t <= 0.0) {
        throw InvalidInput("step learning rate must be positive and finite");
    }
    for (std::size_t i = 0; i < p; ++i) {
        if (!std::isfinite(grad[i])) {
            throw NumericError("non-finite gradient component " + std::to_string(i) +
                               " at step " + std::to_string(state.step));
        }
    }
    OptimState next;
    next.theta.resize(p);
    next.velocity.resize(p);
    next.step = state.step + 1;
    const double m = hp.momentum;
    const double decay = eta_t * hp.weight_decay;
    for (std::size_t i = 0; i < p; ++i) {
        const double v = m * state.velocity[i] - eta_t * grad[i];
        next.velocity[i] = v;
        next.theta[i] = state.theta[i] + v - decay * state.theta[i];
    }
    return next;
}

std::vector<double> lookahead_point(const OptimState& state, double momentum) {
    if (state.velocity.size() != state.theta.size()) {
        throw DimensionError("optimizer state has mismatched theta/velocity sizes");
    }
    std::vector<double> point(state.theta.size());
    for (std::size_t i = 0; i < point.size(); ++i) {
        point[i] = state.theta[i] + momentum * state.velocity[i];
    }
    return point;
}

double bn_momentum_heuristic(int steps_per_epoch) {
    if (steps_per_epoch <= 0) {
        throw InvalidInput("steps_per_epoch must be positive");
    }
    return std::max(1.0 - 10.0 / static_cast<double>(steps_per_epoch), 0.9);
}

}  // namespace ftk
