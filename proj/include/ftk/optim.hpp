#pragma once

#include <span>
#include <vector>

namespace ftk {

// Piecewise-constant step decay: the learning rate starts at base_eta and is
// multiplied by `factor` at each milestone epoch.
struct ScheduleSpec {
    double base_eta = 0.0;
    std::vector<int> milestones;  // strictly increasing epoch indices
    double factor = 0.1;
    int total_epochs = 0;

    void validate() const;
};

struct HyperParams {
    double eta = 0.0;          // base learning rate
    double momentum = 0.0;     // in [0, 1)
    double weight_decay = 0.0; // decoupled decay coefficient, >= 0
    int batch_size = 0;
    ScheduleSpec schedule;

    void validate() const;
};

// Optimizer state for one parameter vector. Steps are pure: nag_step returns
// the successor state without mutating its input.
struct OptimState {
    std::vector<double> theta;
    std::vector<double> velocity;
    long step = 0;
};

// Effective learning rate eta' = eta / (1 - momentum).
double elr(double eta, double momentum);
double elr(const HyperParams& hp);

// Inverse map: the base eta that yields `target_elr` at the given momentum.
double eta_for_elr(double target_elr, double momentum);

// Effective weight decay lambda' = lambda / eta.
double effective_wd(const HyperParams& hp);

// Scheduled learning rate for an epoch in [0, total_epochs).
double schedule_eta(const ScheduleSpec& spec, int epoch);

// One Nesterov step with decoupled weight decay. `grad` must be the gradient
// evaluated at the lookahead point theta + momentum * velocity, and eta_t the
// scheduled rate for the current step:
//   v'     = momentum * v - eta_t * grad
//   theta' = theta + v' - eta_t * weight_decay * theta
OptimState nag_step(const OptimState& state, std::span<const double> grad,
                    const HyperParams& hp, double eta_t);

// Lookahead point theta + momentum * velocity (where gradients are taken).
std::vector<double> lookahead_point(const OptimState& state, double momentum);

// Running-stat momentum for normalization layers as a function of the number
// of optimizer steps per epoch: max(1 - 10/steps, 0.9).
double bn_momentum_heuristic(int steps_per_epoch);

}  // namespace ftk
