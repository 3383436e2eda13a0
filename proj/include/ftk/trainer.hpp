#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ftk/desk_models.hpp"
#include "ftk/optim.hpp"
#include "ftk/regularizers.hpp"

namespace ftk {

enum class InitMode { Finetune, Scratch };
enum class L2Mode { Decoupled, Penalty };

std::string init_mode_name(InitMode mode);
InitMode init_mode_from_name(const std::string& name);
std::string l2_mode_name(L2Mode mode);
L2Mode l2_mode_from_name(const std::string& name);

// Regularization choice for a trial. lambda1 always comes from the trial's
// weight_decay knob so that sweeping "weight decay" sweeps the penalty
// strength regardless of kind; lambda2 only matters for l2sp.
struct RegConfig {
    RegKind kind = RegKind::None;
    double lambda2 = 0.01;
    // How an l2 penalty enters the update: as decoupled decay in the
    // optimizer step, or as a gradient term added to the loss.
    L2Mode l2_mode = L2Mode::Decoupled;
};

struct TrialConfig {
    ModelSpec model;
    HyperParams hyper;
    RegConfig reg;
    InitMode init = InitMode::Finetune;
    std::uint64_t seed = 0;
    // When positive, recorded as the cell's effective learning rate instead
    // of the value recomputed from eta/momentum (the grid sweeps nominal
    // values; recomputation differs only in the last bit).
    double nominal_elr = 0.0;
};

struct TrialResult {
    HyperParams hyper;
    double elr = 0.0;          // nominal effective learning rate of the cell
    double effective_wd = 0.0;
    std::string reg_kind = "none";
    double lambda1 = 0.0;
    double lambda2 = 0.0;
    std::string l2_mode = "decoupled";
    std::string init = "finetune";
    std::uint64_t seed = 0;
    std::vector<double> train_error;  // one entry per epoch
    std::vector<double> val_error;
    double final_val_error = 1.0;
    double min_val_error = 1.0;
    std::vector<double> norm_l2;      // ||theta_t||^2 / ||theta_start||^2
    std::vector<double> norm_l2sp;    // l2sp trials only, empty otherwise
    bool diverged = false;
    double wall_time_s = 0.0;  // measured, intentionally not persisted
};

bool result_payload_equal(const TrialResult& a, const TrialResult& b);

struct PretrainOptions {
    int max_epochs = 200;
    int patience = 10;  // epochs without val improvement before stopping
    double eta = 0.05;
    double momentum = 0.9;
    double weight_decay = 1e-4;
    int batch_size = 32;
    std::uint64_t seed = 1;
};

// Trains the model on the source task from a seeded random initialization
// until validation error stops improving; the result serves as the
// pre-trained starting point for fine-tuning trials.
ParamVector pretrain(const ModelSpec& model, const SyntheticTask& source,
                     const PretrainOptions& opts);

// Runs one training trial on `task`. Fine-tuning trials start from
// `pretrained` with a freshly initialized head; scratch trials ignore it.
// Divergence (non-finite loss or parameters) sets the flag and pads the
// per-epoch records instead of throwing.
TrialResult run_trial(const TrialConfig& cfg, const SyntheticTask& task,
                      const ParamVector* pretrained);

}  // namespace ftk
