#include "ftk/harness.hpp"

#include <atomic>
#include <cmath>
#include <exception>
#include <fstream>
#include <map>
#include <mutex>
#include <thread>

#include "ftk/errors.hpp"
#include "ftk/optim.hpp"

namespace ftk {

namespace {

void check_positive_values(const std::vector<double>& values, const char* what) {
    if (values.empty()) {
        throw InvalidInput(std::string(what) + " list must not be empty");
    }
    for (double v : values) {
        if (!std::isfinite(v) || v <= 0.0) {
            throw InvalidInput(std::string(what) + " values must be positive and finite");
        }
    }
}

std::vector<TrialConfig> enumerate_trials(const GridSpec& grid) {
    const ModelSpec model = grid.resolved_model();
    const std::vector<double>& rate_values =
        grid.mode == GridMode::FixElr ? grid.elr_values : grid.eta_values;
    std::vector<TrialConfig> trials;
    trials.reserve(grid.trial_count());
    for (double rate : rate_values) {
        for (double m : grid.momentum_values) {
            for (double wd : grid.wd_values) {
                HyperParams hp;
                hp.eta = grid.mode == GridMode::FixElr ? eta_for_elr(rate, m) : rate;
                hp.momentum = m;
                hp.weight_decay = wd;
                hp.batch_size = grid.batch_size;
                hp.schedule =
                    ScheduleSpec{hp.eta, grid.milestones, grid.lr_factor, grid.epochs};
                for (std::uint64_t seed : grid.seeds) {
                    TrialConfig cfg;
                    cfg.model = model;
                    cfg.hyper = hp;
                    cfg.reg = grid.reg;
                    cfg.init = grid.init;
                    cfg.seed = seed;
                    cfg.nominal_elr = grid.mode == GridMode::FixElr ? rate : 0.0;
                    trials.push_back(std::move(cfg));
                }
            }
        }
    }
    return trials;
}

// Strict field-name checking for config documents, so typos fail loudly
// instead of silently keeping a default.
void reject_unknown_keys(const nlohmann::json& obj,
                         std::initializer_list<const char*> allowed,
                         const std::string& where) {
    for (const auto& item : obj.items()) {
        bool known = false;
        for (const char* key : allowed) {
            if (item.key() == key) {
                known = true;
                break;
            }
        }
        if (!known) {
            throw InvalidInput("unknown key '" + item.key() + "' in " + where);
        }
    }
}

}  // namespace

std::string grid_mode_name(GridMode mode) {
    return mode == GridMode::FixElr ? "fix_elr" : "fix_eta";
}

GridMode grid_mode_from_name(const std::string& name) {
    if (name == "fix_elr") return GridMode::FixElr;
    if (name == "fix_eta") return GridMode::FixEta;
    throw InvalidInput("unknown grid mode '" + name + "'");
}

std::pair<SyntheticTask, SyntheticTask> make_tasks(const TaskSpec& spec) {
    return make_task_pair(spec.seed, spec.classes, spec.dim, spec.delta,
                          spec.n_per_class, spec.sigma);
}

ModelSpec GridSpec::resolved_model() const {
    ModelSpec m = model;
    if (m.input_dim == 0) m.input_dim = task.dim;
    if (m.classes == 0) m.classes = task.classes;
    return m;
}

std::size_t GridSpec::trial_count() const {
    const std::size_t rates =
        mode == GridMode::FixElr ? elr_values.size() : eta_values.size();
    return rates * momentum_values.size() * wd_values.size() * seeds.size();
}

void GridSpec::validate() const {
    if (mode == GridMode::FixElr) {
        check_positive_values(elr_values, "elr");
    } else {
        check_positive_values(eta_values, "eta");
    }
    if (momentum_values.empty()) {
        throw InvalidInput("momentum list must not be empty");
    }
    for (double m : momentum_values) {
        if (!std::isfinite(m) || m < 0.0 || m >= 1.0) {
            throw InvalidInput("momentum values must lie in [0, 1)");
        }
    }
    if (wd_values.empty()) {
        throw InvalidInput("weight decay list must not be empty");
    }
    for (double wd : wd_values) {
        if (!std::isfinite(wd) || wd < 0.0) {
            throw InvalidInput("weight decay values must be non-negative and finite");
        }
    }
    if (seeds.empty()) {
        throw InvalidInput("seed list must not be empty");
    }
    if (batch_size <= 0) {
        throw InvalidInput("batch_size must be positive");
    }
    // Exercises the epoch/milestone/factor invariants.
    ScheduleSpec{1.0, milestones, lr_factor, epochs}.validate();
    if (reg.kind == RegKind::L2Sp &&
        (!std::isfinite(reg.lambda2) || reg.lambda2 <= 0.0)) {
        throw InvalidInput("l2sp lambda2 must be positive");
    }
    if (task.classes < 2 || task.dim < 2 || task.n_per_class < 1) {
        throw InvalidInput("task needs classes >= 2, dim >= 2, n_per_class >= 1");
    }
    if (!std::isfinite(task.sigma) || task.sigma <= 0.0) {
        throw InvalidInput("task sigma must be positive");
    }
    if (!std::isfinite(task.delta) || task.delta < 0.0) {
        throw InvalidInput("task delta must be non-negative");
    }
    resolved_model().validate();
}

std::vector<TrialResult> run_grid(const GridSpec& grid, int parallelism) {
    grid.validate();
    auto [source, target] = make_tasks(grid.task);
    const ModelSpec model = grid.resolved_model();

    ParamVector theta0;
    const bool finetune = grid.init == InitMode::Finetune;
    if (finetune) {
        theta0 = pretrain(model, source, grid.pretrain);
    }
    const ParamVector* start = finetune ? &theta0 : nullptr;

    const std::vector<TrialConfig> trials = enumerate_trials(grid);
    std::vector<TrialResult> results(trials.size());
    if (trials.empty()) return results;

    const int workers =
        std::max(1, std::min<int>(parallelism, static_cast<int>(trials.size())));
    if (workers == 1) {
        for (std::size_t i = 0; i < trials.size(); ++i) {
            results[i] = run_trial(trials[i], target, start);
        }
        return results;
    }

    std::atomic<std::size_t> next{0};
    std::atomic<bool> stop{false};
    std::mutex error_mutex;
    std::exception_ptr first_error;
    auto worker = [&] {
        while (!stop.load(std::memory_order_relaxed)) {
            const std::size_t i = next.fetch_add(1, std::memory_order_relaxed);
            if (i >= trials.size()) break;
            try {
                results[i] = run_trial(trials[i], target, start);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!first_error) first_error = std::current_exception();
                stop.store(true, std::memory_order_relaxed);
            }
        }
    };
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (std::thread& t : pool) t.join();
    if (first_error) std::rethrow_exception(first_error);
    return results;
}

GroupKey group_key_from_name(const std::string& name) {
    if (name == "elr") return GroupKey::Elr;
    if (name == "effective_wd") return GroupKey::EffectiveWd;
    if (name == "momentum") return GroupKey::Momentum;
    throw InvalidInput("unknown group key '" + name + "'");
}

std::string group_key_name(GroupKey key) {
    switch (key) {
        case GroupKey::Elr: return "elr";
        case GroupKey::EffectiveWd: return "effective_wd";
        case GroupKey::Momentum: return "momentum";
    }
    throw InvalidInput("unknown group key");
}

std::vector<std::pair<double, double>> best_per_group(
    const std::vector<TrialResult>& results, GroupKey key) {
    if (results.empty()) {
        throw EmptyInputError("no results to group");
    }
    std::map<double, double> best;
    for (const TrialResult& r : results) {
        double value = 0.0;
        switch (key) {
            case GroupKey::Elr: value = r.elr; break;
            case GroupKey::EffectiveWd: value = r.effective_wd; break;
            case GroupKey::Momentum: value = r.hyper.momentum; break;
        }
        auto [it, inserted] = best.emplace(value, r.final_val_error);
        if (!inserted && r.final_val_error < it->second) {
            it->second = r.final_val_error;
        }
    }
    return {best.begin(), best.end()};
}

nlohmann::json result_to_json(const TrialResult& r) {
    nlohmann::json j;
    j["eta"] = r.hyper.eta;
    j["momentum"] = r.hyper.momentum;
    j["weight_decay"] = r.hyper.weight_decay;
    j["batch_size"] = r.hyper.batch_size;
    j["epochs"] = r.hyper.schedule.total_epochs;
    j["milestones"] = r.hyper.schedule.milestones;
    j["lr_factor"] = r.hyper.schedule.factor;
    j["elr"] = r.elr;
    j["effective_wd"] = r.effective_wd;
    j["reg"] = r.reg_kind;
    j["lambda1"] = r.lambda1;
    j["lambda2"] = r.lambda2;
    j["l2_mode"] = r.l2_mode;
    j["init"] = r.init;
    j["seed"] = r.seed;
    j["train_error"] = r.train_error;
    j["val_error"] = r.val_error;
    j["final_val_error"] = r.final_val_error;
    j["min_val_error"] = r.min_val_error;
    j["norm_l2"] = r.norm_l2;
    if (r.reg_kind == "l2sp") {
        j["norm_l2sp"] = r.norm_l2sp;
    }
    j["diverged"] = r.diverged;
    return j;
}

TrialResult result_from_json(const nlohmann::json& j) {
    TrialResult r;
    r.hyper.eta = j.at("eta").get<double>();
    r.hyper.momentum = j.at("momentum").get<double>();
    r.hyper.weight_decay = j.at("weight_decay").get<double>();
    r.hyper.batch_size = j.at("batch_size").get<int>();
    r.hyper.schedule.base_eta = r.hyper.eta;
    r.hyper.schedule.total_epochs = j.at("epochs").get<int>();
    r.hyper.schedule.milestones = j.at("milestones").get<std::vector<int>>();
    r.hyper.schedule.factor = j.at("lr_factor").get<double>();
    r.elr = j.at("elr").get<double>();
    r.effective_wd = j.at("effective_wd").get<double>();
    r.reg_kind = j.at("reg").get<std::string>();
    r.lambda1 = j.at("lambda1").get<double>();
    r.lambda2 = j.at("lambda2").get<double>();
    r.l2_mode = j.at("l2_mode").get<std::string>();
    r.init = j.at("init").get<std::string>();
    r.seed = j.at("seed").get<std::uint64_t>();
    r.train_error = j.at("train_error").get<std::vector<double>>();
    r.val_error = j.at("val_error").get<std::vector<double>>();
    r.final_val_error = j.at("final_val_error").get<double>();
    r.min_val_error = j.at("min_val_error").get<double>();
    r.norm_l2 = j.at("norm_l2").get<std::vector<double>>();
    if (j.contains("norm_l2sp")) {
        r.norm_l2sp = j.at("norm_l2sp").get<std::vector<double>>();
    }
    r.diverged = j.at("diverged").get<bool>();
    return r;
}

void persist_results(const std::vector<TrialResult>& results, const std::string& path,
                     bool append) {
    std::ofstream out(path, append ? std::ios::app : std::ios::trunc);
    if (!out) {
        throw IoError("cannot open '" + path + "' for writing");
    }
    for (const TrialResult& r : results) {
        out << result_to_json(r).dump() << '\n';
    }
    if (!out) {
        throw IoError("failed writing '" + path + "'");
    }
}

std::vector<TrialResult> load_results(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot open results file '" + path + "'");
    }
    std::vector<TrialResult> results;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        bool blank = true;
        for (char c : line) {
            if (c != ' ' && c != '\t' && c != '\r') {
                blank = false;
                break;
            }
        }
        if (blank) continue;
        try {
            results.push_back(result_from_json(nlohmann::json::parse(line)));
        } catch (const nlohmann::json::exception& e) {
            throw ParseError(path, line_no, e.what());
        }
    }
    return results;
}

GridSpec grid_from_json(const nlohmann::json& config) {
    if (!config.is_object()) {
        throw InvalidInput("run config must be a JSON object");
    }
    GridSpec grid =
        config.contains("preset")
            ? presets::by_name(config.at("preset").get<std::string>())
            : presets::default_sweep();
    try {
        reject_unknown_keys(config,
                            {"preset", "mode", "elr_values", "eta_values",
                             "momentum_values", "wd_values", "epochs", "milestones",
                             "lr_factor", "batch_size", "seeds", "init", "reg", "model",
                             "task", "pretrain"},
                            "run config");
        if (config.contains("mode")) {
            grid.mode = grid_mode_from_name(config.at("mode").get<std::string>());
        }
        if (config.contains("elr_values")) {
            grid.elr_values = config.at("elr_values").get<std::vector<double>>();
        }
        if (config.contains("eta_values")) {
            grid.eta_values = config.at("eta_values").get<std::vector<double>>();
        }
        if (config.contains("momentum_values")) {
            grid.momentum_values = config.at("momentum_values").get<std::vector<double>>();
        }
        if (config.contains("wd_values")) {
            grid.wd_values = config.at("wd_values").get<std::vector<double>>();
        }
        if (config.contains("epochs")) grid.epochs = config.at("epochs").get<int>();
        if (config.contains("milestones")) {
            grid.milestones = config.at("milestones").get<std::vector<int>>();
        }
        if (config.contains("lr_factor")) {
            grid.lr_factor = config.at("lr_factor").get<double>();
        }
        if (config.contains("batch_size")) {
            grid.batch_size = config.at("batch_size").get<int>();
        }
        if (config.contains("seeds")) {
            grid.seeds = config.at("seeds").get<std::vector<std::uint64_t>>();
        }
        if (config.contains("init")) {
            grid.init = init_mode_from_name(config.at("init").get<std::string>());
        }
        if (config.contains("reg")) {
            const nlohmann::json& reg = config.at("reg");
            reject_unknown_keys(reg, {"kind", "lambda2", "l2_mode"}, "reg config");
            if (reg.contains("kind")) {
                grid.reg.kind = reg_kind_from_name(reg.at("kind").get<std::string>());
            }
            if (reg.contains("lambda2")) {
                grid.reg.lambda2 = reg.at("lambda2").get<double>();
            }
            if (reg.contains("l2_mode")) {
                grid.reg.l2_mode = l2_mode_from_name(reg.at("l2_mode").get<std::string>());
            }
        }
        if (config.contains("model")) {
            const nlohmann::json& model = config.at("model");
            reject_unknown_keys(model, {"kind", "hidden", "normalized", "input_dim", "classes"},
                                "model config");
            if (model.contains("kind")) {
                grid.model.kind = model_kind_from_name(model.at("kind").get<std::string>());
            }
            if (model.contains("hidden")) grid.model.hidden = model.at("hidden").get<int>();
            if (model.contains("normalized")) {
                grid.model.normalized = model.at("normalized").get<bool>();
            }
            if (model.contains("input_dim")) {
                grid.model.input_dim = model.at("input_dim").get<int>();
            }
            if (model.contains("classes")) {
                grid.model.classes = model.at("classes").get<int>();
            }
        }
        if (config.contains("task")) {
            const nlohmann::json& task = config.at("task");
            reject_unknown_keys(task, {"seed", "classes", "dim", "delta", "n_per_class", "sigma"},
                                "task config");
            if (task.contains("seed")) grid.task.seed = task.at("seed").get<std::uint64_t>();
            if (task.contains("classes")) grid.task.classes = task.at("classes").get<int>();
            if (task.contains("dim")) grid.task.dim = task.at("dim").get<int>();
            if (task.contains("delta")) grid.task.delta = task.at("delta").get<double>();
            if (task.contains("n_per_class")) {
                grid.task.n_per_class = task.at("n_per_class").get<int>();
            }
            if (task.contains("sigma")) grid.task.sigma = task.at("sigma").get<double>();
        }
        if (config.contains("pretrain")) {
            const nlohmann::json& pre = config.at("pretrain");
            reject_unknown_keys(pre,
                                {"max_epochs", "patience", "eta", "momentum",
                                 "weight_decay", "batch_size", "seed"},
                                "pretrain config");
            if (pre.contains("max_epochs")) {
                grid.pretrain.max_epochs = pre.at("max_epochs").get<int>();
            }
            if (pre.contains("patience")) {
                grid.pretrain.patience = pre.at("patience").get<int>();
            }
            if (pre.contains("eta")) grid.pretrain.eta = pre.at("eta").get<double>();
            if (pre.contains("momentum")) {
                grid.pretrain.momentum = pre.at("momentum").get<double>();
            }
            if (pre.contains("weight_decay")) {
                grid.pretrain.weight_decay = pre.at("weight_decay").get<double>();
            }
            if (pre.contains("batch_size")) {
                grid.pretrain.batch_size = pre.at("batch_size").get<int>();
            }
            if (pre.contains("seed")) {
                grid.pretrain.seed = pre.at("seed").get<std::uint64_t>();
            }
        }
    } catch (const nlohmann::json::exception& e) {
        throw InvalidInput(std::string("bad run config: ") + e.what());
    }
    grid.validate();
    return grid;
}

namespace presets {

GridSpec default_sweep() {
    GridSpec grid;
    grid.mode = GridMode::FixElr;
    grid.elr_values = {1.0, 0.5, 0.1, 0.05, 0.01, 0.001};
    grid.momentum_values = {0.99, 0.95, 0.9, 0.8, 0.0};
    grid.wd_values = {0.0, 1e-4, 5e-4, 1e-3};
    grid.epochs = 60;
    grid.milestones = {30, 50};
    grid.lr_factor = 0.1;
    grid.batch_size = 32;
    grid.seeds = {0, 1, 2};
    grid.reg = RegConfig{};  // decoupled decay only
    grid.init = InitMode::Finetune;
    grid.model.kind = ModelKind::Mlp;
    grid.model.hidden = 16;
    grid.model.normalized = true;
    grid.task = TaskSpec{};
    return grid;
}

GridSpec l2sp_protocol() {
    GridSpec grid = default_sweep();
    grid.mode = GridMode::FixEta;
    grid.eta_values = {0.02, 0.01, 0.005, 0.001, 0.0001};
    grid.elr_values.clear();
    grid.momentum_values = {0.9};
    grid.wd_values = {0.1, 0.01, 0.001, 0.0001};  // lambda1 sweep
    grid.batch_size = 64;
    grid.milestones = {40};
    grid.reg.kind = RegKind::L2Sp;
    grid.reg.lambda2 = 0.01;
    grid.reg.l2_mode = L2Mode::Penalty;
    return grid;
}

GridSpec by_name(const std::string& name) {
    if (name == "default-sweep") return default_sweep();
    if (name == "l2sp-protocol") return l2sp_protocol();
    throw InvalidInput("unknown preset '" + name + "'");
}

}  // namespace presets

}  // namespace ftk
