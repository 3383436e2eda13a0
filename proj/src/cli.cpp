#include "ftk/cli.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <ostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"

#include "ftk/domain_features.hpp"
#include "ftk/errors.hpp"
#include "ftk/harness.hpp"
#include "ftk/recommender.hpp"
#include "ftk/transport.hpp"
#include "ftk/verify.hpp"
#include "numfmt.hpp"

namespace ftk::cli {

namespace {

enum LogLevel { kError = 0, kWarn = 1, kInfo = 2, kDebug = 3 };

LogLevel log_level_from_name(const std::string& name) {
    if (name == "error") return kError;
    if (name == "warn") return kWarn;
    if (name == "info") return kInfo;
    if (name == "debug") return kDebug;
    throw UsageError("unknown log level '" + name + "'");
}

struct Logger {
    LogLevel level = kWarn;
    std::ostream* err = nullptr;

    void info(const std::string& msg) const {
        if (level >= kInfo) *err << "[info] " << msg << '\n';
    }
};

FeatureFormat format_from_name(const std::string& name) {
    if (name == "csv") return FeatureFormat::Csv;
    if (name == "centroid-csv") return FeatureFormat::CentroidCsv;
    throw UsageError("unknown feature format '" + name + "'");
}

nlohmann::json read_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot open config '" + path + "'");
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    try {
        return nlohmann::json::parse(buf.str());
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(path + ": " + e.what());
    }
}

nlohmann::json recommendation_json(const Recommendation& rec, double sim_score) {
    nlohmann::json j;
    j["bucket"] = {rec.bucket.lo, rec.bucket.hi};
    j["elr"] = rec.elr;
    j["nearest"] = {{"extractor", rec.nearest.extractor},
                    {"optimal_elr", rec.nearest.optimal_elr},
                    {"sim", rec.nearest.sim},
                    {"source_model", rec.nearest.source_model},
                    {"target", rec.nearest.target_name}};
    j["sim_gap"] = rec.sim_gap;
    j["sim_score"] = sim_score;
    j["strategy"] = rec.strategy;
    if (!rec.warning.empty()) j["warning"] = rec.warning;
    return j;
}

}  // namespace

int dispatch(std::vector<std::string> args, std::ostream& out, std::ostream& err) {
    CLI::App app{"fine-tuning hyperparameter toolkit"};
    app.name("ftk");
    app.require_subcommand(1);

    std::uint64_t seed = 0;
    std::string log_level = "warn";
    bool json = false;
    app.add_option("--seed", seed, "override the task seed from run configs")
        ->capture_default_str();
    app.add_option("--log-level", log_level, "stderr verbosity")
        ->check(CLI::IsMember({"error", "warn", "info", "debug"}))
        ->capture_default_str();
    app.add_flag("--json", json, "machine-readable stdout");

    // sim
    auto* sim_cmd = app.add_subcommand("sim", "domain similarity between feature tables");
    std::string sim_source, sim_target, sim_format = "csv", sim_extractor;
    double sim_gamma = 0.01;
    sim_cmd->fallthrough();
    sim_cmd->add_option("--source", sim_source, "source feature file")->required();
    sim_cmd->add_option("--target", sim_target, "target feature file")->required();
    sim_cmd->add_option("--format", sim_format, "feature file format")
        ->check(CLI::IsMember({"csv", "centroid-csv"}))
        ->capture_default_str();
    sim_cmd->add_option("--gamma", sim_gamma, "similarity scale in exp(-gamma d)")
        ->capture_default_str();
    sim_cmd->add_option("--extractor", sim_extractor, "feature extractor id (metadata)");
    std::string sim_flow_out;
    sim_cmd->add_option("--flow-out", sim_flow_out, "write the transport plan as CSV");

    // recommend
    auto* rec_cmd = app.add_subcommand("recommend",
                                       "effective learning rate from domain similarity");
    std::string rec_model, rec_source, rec_target, rec_db;
    std::string rec_format = "csv", rec_extractor;
    double rec_sim = 0.0, rec_gamma = 0.01;
    rec_cmd->fallthrough();
    rec_cmd->add_option("--source-model", rec_model, "reference source model id")->required();
    auto* rec_sim_opt = rec_cmd->add_option("--sim", rec_sim, "similarity score");
    auto* rec_source_opt = rec_cmd->add_option("--source", rec_source, "source feature file");
    auto* rec_target_opt = rec_cmd->add_option("--target", rec_target, "target feature file");
    rec_sim_opt->excludes(rec_source_opt)->excludes(rec_target_opt);
    rec_cmd->add_option("--db", rec_db, "reference database CSV");
    rec_cmd->add_option("--format", rec_format, "feature file format")
        ->check(CLI::IsMember({"csv", "centroid-csv"}))
        ->capture_default_str();
    rec_cmd->add_option("--gamma", rec_gamma, "similarity scale in exp(-gamma d)")
        ->capture_default_str();
    rec_cmd->add_option("--extractor", rec_extractor, "extractor id of the query features");

    // train
    auto* train_cmd = app.add_subcommand("train", "run one training trial");
    std::string train_config, train_out;
    train_cmd->fallthrough();
    train_cmd->add_option("--config", train_config, "run config JSON")->required();
    train_cmd->add_option("--out", train_out, "also persist the result here");

    // grid
    auto* grid_cmd = app.add_subcommand("grid", "run a hyperparameter grid");
    std::string grid_config, grid_out;
    int grid_jobs = 1;
    bool grid_append = false;
    grid_cmd->fallthrough();
    grid_cmd->add_option("--config", grid_config, "run config JSON")->required();
    grid_cmd->add_option("--out", grid_out, "results file (JSON lines)");
    grid_cmd->add_option("--jobs", grid_jobs, "worker threads")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    grid_cmd->add_flag("--append", grid_append, "append to the results file");

    // report
    auto* report_cmd = app.add_subcommand("report", "best error per hyperparameter group");
    std::string report_in, report_group;
    report_cmd->fallthrough();
    report_cmd->add_option("--in", report_in, "results file (JSON lines)")->required();
    report_cmd->add_option("--group", report_group, "group key")
        ->check(CLI::IsMember({"elr", "effective_wd", "momentum"}))
        ->required();

    // verify
    auto* verify_cmd = app.add_subcommand("verify", "run module self-checks");
    verify_cmd->fallthrough();

    try {
        std::reverse(args.begin(), args.end());
        app.parse(args);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::ParseError& e) {
        app.exit(e, out, err);
        return 2;
    }

    Logger log{log_level_from_name(log_level), &err};

    try {
        if (sim_cmd->parsed()) {
            const FeatureFormat format = format_from_name(sim_format);
            const DomainProfile source =
                load_profile(sim_source, format, "source", sim_extractor);
            const DomainProfile target =
                load_profile(sim_target, format, "target", sim_extractor);
            EmdSolution plan;
            const SimilarityScore score =
                domain_similarity(source, target, sim_gamma,
                                  sim_flow_out.empty() ? nullptr : &plan);
            if (!sim_flow_out.empty()) {
                std::ofstream flow(sim_flow_out);
                if (!flow) {
                    throw IoError("cannot open '" + sim_flow_out + "' for writing");
                }
                flow << "label";
                for (const std::string& t : target.labels) flow << ',' << t;
                flow << '\n';
                for (std::size_t i = 0; i < source.labels.size(); ++i) {
                    flow << source.labels[i];
                    for (double f : plan.flow[i]) {
                        flow << ',' << detail::format_double(f);
                    }
                    flow << '\n';
                }
                if (!flow) {
                    throw IoError("failed writing '" + sim_flow_out + "'");
                }
            }
            if (json) {
                nlohmann::json j;
                j["distance"] = score.distance;
                j["gamma"] = score.gamma;
                j["similarity"] = score.value;
                out << j.dump() << '\n';
            } else {
                out << "distance=" << detail::format_double(score.distance)
                    << " similarity=" << detail::format_double(score.value) << '\n';
            }
            return 0;
        }

        if (rec_cmd->parsed()) {
            const bool has_features =
                rec_source_opt->count() > 0 && rec_target_opt->count() > 0;
            if (rec_sim_opt->count() == 0 && !has_features) {
                throw UsageError("recommend needs --sim or both --source and --target");
            }
            double sim_score = rec_sim;
            if (rec_sim_opt->count() == 0) {
                const FeatureFormat format = format_from_name(rec_format);
                const DomainProfile source =
                    load_profile(rec_source, format, "source", rec_extractor);
                const DomainProfile target =
                    load_profile(rec_target, format, "target", rec_extractor);
                sim_score = domain_similarity(source, target, rec_gamma).value;
            }
            const std::vector<ReferenceEntry> db =
                rec_db.empty() ? default_reference_db() : load_reference_db(rec_db);
            log.info("reference db holds " + std::to_string(db.size()) + " entries");
            const Recommendation rec =
                recommend_elr(db, rec_model, sim_score, rec_extractor);
            out << recommendation_json(rec, sim_score).dump() << '\n';
            return 0;
        }

        if (train_cmd->parsed() || grid_cmd->parsed()) {
            const bool is_train = train_cmd->parsed();
            const std::string& config_path = is_train ? train_config : grid_config;
            nlohmann::json config = read_config(config_path);
            GridSpec grid = grid_from_json(config);
            if (app.count("--seed") > 0 &&
                !(config.contains("task") && config.at("task").contains("seed"))) {
                grid.task.seed = seed;
            }
            if (is_train && grid.trial_count() != 1) {
                throw InvalidInput("config describes " +
                                   std::to_string(grid.trial_count()) +
                                   " trials; train runs exactly one (use grid)");
            }
            const int jobs = is_train ? 1 : grid_jobs;
            log.info("running " + std::to_string(grid.trial_count()) + " trial(s) with " +
                     std::to_string(jobs) + " job(s)");
            const auto t0 = std::chrono::steady_clock::now();
            const std::vector<TrialResult> results = run_grid(grid, jobs);
            const double elapsed =
                std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
                    .count();
            log.info("finished in " + std::to_string(elapsed) + "s");
            const std::string& out_path = is_train ? train_out : grid_out;
            if (out_path.empty()) {
                for (const TrialResult& r : results) {
                    out << result_to_json(r).dump() << '\n';
                }
            } else {
                persist_results(results, out_path, !is_train && grid_append);
                if (json) {
                    nlohmann::json j;
                    j["out"] = out_path;
                    j["results"] = results.size();
                    out << j.dump() << '\n';
                } else {
                    out << "wrote " << results.size() << " result(s) to " << out_path
                        << '\n';
                }
            }
            return 0;
        }

        if (report_cmd->parsed()) {
            const std::vector<TrialResult> results = load_results(report_in);
            const auto table = best_per_group(results, group_key_from_name(report_group));
            if (json) {
                nlohmann::json rows = nlohmann::json::array();
                for (const auto& [value, best] : table) {
                    rows.push_back({{"best_error", best}, {"group_value", value}});
                }
                out << rows.dump() << '\n';
            } else {
                out << "group_value,best_error\n";
                for (const auto& [value, best] : table) {
                    out << detail::format_double(value) << ','
                        << detail::format_double(best) << '\n';
                }
            }
            return 0;
        }

        if (verify_cmd->parsed()) {
            const int failures = run_verify_suites(out, json);
            return failures == 0 ? 0 : 1;
        }

        throw UsageError("no command given");
    } catch (const UsageError& e) {
        err << "error: " << e.what() << '\n';
        return 2;
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    }
}

}  // namespace ftk::cli
