#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "ftk/desk_models.hpp"
#include "ftk/trainer.hpp"

namespace ftk {

enum class GridMode { FixElr, FixEta };

std::string grid_mode_name(GridMode mode);
GridMode grid_mode_from_name(const std::string& name);

// Synthetic source/target pair description; see make_task_pair.
struct TaskSpec {
    std::uint64_t seed = 0;
    int classes = 5;
    int dim = 20;
    double delta = 1.0;
    int n_per_class = 100;
    double sigma = 1.0;
};

std::pair<SyntheticTask, SyntheticTask> make_tasks(const TaskSpec& spec);

// A full hyperparameter sweep. In fix_elr mode each cell derives
// eta = elr * (1 - momentum) so the effective learning rate stays constant
// across momentum values; fix_eta sweeps eta directly. model.input_dim and
// model.classes may be left zero to take the task's dimensions.
struct GridSpec {
    GridMode mode = GridMode::FixElr;
    std::vector<double> elr_values;   // fix_elr mode
    std::vector<double> eta_values;   // fix_eta mode
    std::vector<double> momentum_values;
    std::vector<double> wd_values;
    int epochs = 60;
    std::vector<int> milestones = {30, 50};
    double lr_factor = 0.1;
    int batch_size = 32;
    std::vector<std::uint64_t> seeds;
    RegConfig reg;
    InitMode init = InitMode::Finetune;
    ModelSpec model;
    TaskSpec task;
    PretrainOptions pretrain;

    void validate() const;
    ModelSpec resolved_model() const;
    std::size_t trial_count() const;
};

// Runs every (cell x seed) trial. Results come back in cell-major order and
// are identical whatever the parallelism; trials never share mutable state.
std::vector<TrialResult> run_grid(const GridSpec& grid, int parallelism);

enum class GroupKey { Elr, EffectiveWd, Momentum };

GroupKey group_key_from_name(const std::string& name);
std::string group_key_name(GroupKey key);

// Minimum final validation error per distinct group value, ascending.
std::vector<std::pair<double, double>> best_per_group(
    const std::vector<TrialResult>& results, GroupKey key);

nlohmann::json result_to_json(const TrialResult& result);
TrialResult result_from_json(const nlohmann::json& j);

// One JSON object per line; append extends an existing file.
void persist_results(const std::vector<TrialResult>& results, const std::string& path,
                     bool append = false);
std::vector<TrialResult> load_results(const std::string& path);

// Builds a GridSpec from a run-config document. An optional "preset" key
// ("default-sweep" or "l2sp-protocol") selects the baseline; all other keys
// override it. Unknown keys are rejected.
GridSpec grid_from_json(const nlohmann::json& config);

namespace presets {

// Fine-tuning sweep: fixed-ELR grid crossed with momentum and weight decay.
GridSpec default_sweep();

// Penalty-based transfer protocol: eta sweep at momentum 0.9 with an l2sp
// penalty, lambda2 = 0.01.
GridSpec l2sp_protocol();

GridSpec by_name(const std::string& name);

}  // namespace presets

}  // namespace ftk
