// Acceptance gate: ten end-to-end checks over the library, one PASS/FAIL
// line each. Exit code is the number of failed checks.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "ftk/desk_models.hpp"
#include "ftk/domain_features.hpp"
#include "ftk/harness.hpp"
#include "ftk/optim.hpp"
#include "ftk/recommender.hpp"
#include "ftk/rng.hpp"
#include "ftk/transport.hpp"
#include "support/brute_force_transport.hpp"
#include "support/temp_file.hpp"

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

double now_seconds(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

std::string fmt(const char* pattern, ...) {
    char buf[512];
    va_list args;
    va_start(args, pattern);
    std::vsnprintf(buf, sizeof(buf), pattern, args);
    va_end(args);
    return std::string(buf);
}

// --- 1: exact transport distance vs. exhaustive integer-flow enumeration ---

Outcome check_transport_oracle() {
    const auto start = std::chrono::steady_clock::now();
    ftk::Rng rng(20260822);
    const int instances = 200;
    for (int t = 0; t < instances; ++t) {
        const int m = 1 + static_cast<int>(rng.index(3));
        const int n = 1 + static_cast<int>(rng.index(3));
        const int lo = std::max(m, n);
        const int q = lo + static_cast<int>(rng.index(static_cast<std::size_t>(6 - lo + 1)));

        std::vector<int> supplies(m, 1);
        for (int k = 0; k < q - m; ++k) supplies[rng.index(m)] += 1;
        std::vector<int> demands(n, 1);
        for (int k = 0; k < q - n; ++k) demands[rng.index(n)] += 1;

        std::vector<std::vector<double>> cost(m, std::vector<double>(n));
        for (auto& row : cost) {
            for (double& c : row) c = rng.uniform(0.0, 10.0);
        }

        std::vector<double> ws(m), wd(n);
        for (int i = 0; i < m; ++i) ws[i] = static_cast<double>(supplies[i]) / q;
        for (int j = 0; j < n; ++j) wd[j] = static_cast<double>(demands[j]) / q;

        const double solved = ftk::solve_transport(ws, wd, cost).distance;
        const double oracle = ftk_test::brute_force_distance(supplies, demands, cost);
        if (std::abs(solved - oracle) > 1e-9) {
            return {false, fmt("instance %d: solver %.12f vs enumeration %.12f", t, solved, oracle)};
        }
    }
    const double elapsed = now_seconds(start);
    if (elapsed >= 5.0) return {false, fmt("took %.2f s, budget 5 s", elapsed)};
    return {true, fmt("%d/%d instances agree within 1e-9, %.2f s", instances, instances, elapsed)};
}

// --- 2: similarity identity and single-centroid closed form ---

Outcome check_similarity_closed_form() {
    ftk::RawFeatures mixed;
    mixed.dim = 2;
    mixed.rows = {{"a", {0.5, 1.25}}, {"a", {1.5, 0.75}}, {"b", {3.0, 4.0}}, {"c", {-2.0, 0.0}}};
    const auto prof = ftk::build_domain_profile(mixed, "self", "raw");
    const double self_sim = ftk::domain_similarity(prof, prof).value;
    if (std::abs(self_sim - 1.0) > 1e-12) {
        return {false, fmt("self similarity %.15f differs from 1 by more than 1e-12", self_sim)};
    }

    ftk::RawFeatures origin, offset;
    origin.dim = 2;
    origin.rows = {{"c", {0.0, 0.0}}};
    offset.dim = 2;
    offset.rows = {{"c", {3.0, 4.0}}};
    const auto sp = ftk::build_domain_profile(origin, "s", "raw");
    const auto tp = ftk::build_domain_profile(offset, "t", "raw");
    const auto score = ftk::domain_similarity(sp, tp);
    if (std::abs(score.distance - 5.0) > 1e-12) {
        return {false, fmt("distance %.15f, expected 5", score.distance)};
    }
    if (std::abs(score.value - std::exp(-0.05)) > 1e-12) {
        return {false, fmt("similarity %.15f, expected exp(-0.05)", score.value)};
    }
    return {true, "self sim = 1 and 3-4-5 centroid pair gives exp(-0.05), both within 1e-12"};
}

// --- 3: two Nesterov steps on a scalar quadratic against the hand recurrence ---

Outcome check_momentum_trace() {
    ftk::HyperParams hp;
    hp.eta = 0.1;
    hp.momentum = 0.9;
    hp.weight_decay = 0.0;
    hp.batch_size = 1;
    hp.schedule.base_eta = 0.1;
    hp.schedule.total_epochs = 1;

    ftk::OptimState state;
    state.theta = {1.0};
    state.velocity = {0.0};
    for (int step = 0; step < 2; ++step) {
        const auto look = ftk::lookahead_point(state, hp.momentum);
        const std::vector<double> grad = {look[0]}; // f(x) = x^2/2
        state = ftk::nag_step(state, grad, hp, hp.eta);
    }
    if (std::abs(state.theta[0] - 0.729) > 1e-12) {
        return {false, fmt("theta after two steps %.15f, expected 0.729", state.theta[0])};
    }
    return {true, "theta trace 1.0 -> 0.9 -> 0.729 reproduced within 1e-12"};
}

// --- shared grid scaffolding for the training-based checks ---

ftk::GridSpec training_grid(double sigma, int epochs) {
    ftk::GridSpec g;
    g.mode = ftk::GridMode::FixElr;
    g.momentum_values = {0.9};
    g.wd_values = {0.0};
    g.epochs = epochs;
    g.milestones = {epochs / 2, (5 * epochs) / 6};
    g.batch_size = 32;
    g.init = ftk::InitMode::Finetune;
    g.model.kind = ftk::ModelKind::Mlp;
    g.model.hidden = 16;
    g.model.normalized = true;
    g.task = {0, 5, 20, 1.0, 200, sigma};
    return g;
}

// --- 4: momentum 0 vs 0.9 at a fixed effective learning rate ---

Outcome check_fixed_elr_equivalence() {
    const auto start = std::chrono::steady_clock::now();
    ftk::GridSpec g = training_grid(1.5, 16);
    g.elr_values = {0.005, 0.05, 0.5};
    g.momentum_values = {0.0, 0.9};
    g.seeds = {0, 1, 2};
    const auto results = ftk::run_grid(g, 1);

    std::map<std::pair<double, double>, double> best; // (elr, momentum) -> best final error
    for (const auto& r : results) {
        const auto key = std::make_pair(r.elr, r.hyper.momentum);
        const auto [it, fresh] = best.emplace(key, r.final_val_error);
        if (!fresh && r.final_val_error < it->second) it->second = r.final_val_error;
    }

    double spread_lo = 1.0, spread_hi = 0.0, worst_gap = 0.0;
    for (const double e : g.elr_values) {
        const double plain = best.at({e, 0.0});
        const double heavy = best.at({e, 0.9});
        worst_gap = std::max(worst_gap, std::abs(heavy - plain));
        const double cell = std::min(plain, heavy);
        spread_lo = std::min(spread_lo, cell);
        spread_hi = std::max(spread_hi, cell);
    }
    const double spread = spread_hi - spread_lo;
    const double elapsed = now_seconds(start);

    if (worst_gap > 0.015) {
        return {false, fmt("momentum changes best error by %.1f pp at fixed effective LR", 100 * worst_gap)};
    }
    if (spread < 0.05) {
        return {false, fmt("effective LR only moves best error by %.1f pp, need >= 5", 100 * spread)};
    }
    if (elapsed >= 300.0) return {false, fmt("took %.1f s, budget 300 s", elapsed)};
    return {true, fmt("max momentum gap %.2f pp, effective-LR spread %.1f pp, %.1f s",
                      100 * worst_gap, 100 * spread, elapsed)};
}

// --- 5: similarity vs optimal effective LR across shift magnitudes ---

std::vector<double> average_ranks(const std::vector<double>& v) {
    const std::size_t n = v.size();
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    std::vector<double> ranks(n);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && v[order[j + 1]] == v[order[i]]) ++j;
        const double shared = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = shared;
        i = j + 1;
    }
    return ranks;
}

double spearman(const std::vector<double>& a, const std::vector<double>& b) {
    const auto ra = average_ranks(a);
    const auto rb = average_ranks(b);
    const double n = static_cast<double>(a.size());
    double ma = 0.0, mb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        ma += ra[i];
        mb += rb[i];
    }
    ma /= n;
    mb /= n;
    double num = 0.0, da = 0.0, db = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        num += (ra[i] - ma) * (rb[i] - mb);
        da += (ra[i] - ma) * (ra[i] - ma);
        db += (rb[i] - mb) * (rb[i] - mb);
    }
    if (da == 0.0 || db == 0.0) return 0.0;
    return num / std::sqrt(da * db);
}

Outcome check_similarity_elr_trend() {
    const auto start = std::chrono::steady_clock::now();
    const std::vector<double> deltas = {0.25, 0.5, 1.0, 2.0, 4.0};
    int negative = 0;
    std::string rhos;
    for (std::uint64_t seed = 0; seed < 3; ++seed) {
        std::vector<double> sims, log_opt;
        for (const double delta : deltas) {
            ftk::GridSpec g = training_grid(2.0, 16);
            g.elr_values = {0.003, 0.01, 0.03, 0.1, 0.3, 1.0};
            g.seeds = {seed};
            g.task.seed = seed;
            g.task.delta = delta;

            const auto [source, target] = ftk::make_tasks(g.task);
            const auto sp = ftk::build_domain_profile(ftk::task_features(source), "s", "raw");
            const auto tp = ftk::build_domain_profile(ftk::task_features(target), "t", "raw");
            sims.push_back(ftk::domain_similarity(sp, tp).value);

            const auto results = ftk::run_grid(g, 1);
            double best_err = 2.0, best_elr = 0.0;
            for (const auto& r : results) {
                if (r.final_val_error < best_err) {
                    best_err = r.final_val_error;
                    best_elr = r.elr;
                }
            }
            log_opt.push_back(std::log10(best_elr));
        }
        const double rho = spearman(sims, log_opt);
        rhos += fmt("%s%.2f", rhos.empty() ? "" : "/", rho);
        if (rho < 0.0) ++negative;
    }
    const double elapsed = now_seconds(start);
    if (negative < 2) {
        return {false, fmt("similarity vs log optimal effective LR negative in only %d/3 seeds (rho %s)",
                           negative, rhos.c_str())};
    }
    if (elapsed >= 900.0) return {false, fmt("took %.1f s, budget 900 s", elapsed)};
    return {true, fmt("rank correlation negative in %d/3 seeds (rho %s), %.1f s",
                      negative, rhos.c_str(), elapsed)};
}

// --- 6: weight-norm trajectory, plain L2 vs reference-anchored penalty ---

Outcome check_norm_contrast() {
    int ok = 0;
    std::string detail;
    for (std::uint64_t seed = 0; seed < 3; ++seed) {
        ftk::GridSpec g = training_grid(1.0, 120);
        g.elr_values = {0.05};
        g.momentum_values = {0.0};
        g.wd_values = {1e-3};
        g.seeds = {seed};
        g.task.seed = seed;

        g.reg.kind = ftk::RegKind::L2;
        g.reg.l2_mode = ftk::L2Mode::Decoupled;
        const auto plain = ftk::run_grid(g, 1);

        g.reg.kind = ftk::RegKind::L2Sp;
        g.reg.lambda2 = 1e-3;
        const auto anchored = ftk::run_grid(g, 1);

        const double norm_l2 = plain.at(0).norm_l2.back();
        const double norm_sp = anchored.at(0).norm_l2.back();
        if (norm_l2 < norm_sp) ++ok;
        detail += fmt("%s%.3f<%.3f", detail.empty() ? "" : ", ", norm_l2, norm_sp);
    }
    if (ok != 3) {
        return {false, fmt("L2 final norm smaller in only %d/3 seeds (%s)", ok, detail.c_str())};
    }
    return {true, fmt("L2 ends below the anchored penalty in 3/3 seeds (%s)", detail.c_str())};
}

// --- 7: analytic gradients against central finite differences ---

Outcome check_gradients() {
    ftk::Rng rng(7);
    ftk::Dataset data;
    data.dim = 6;
    const int samples = 40, classes = 3;
    for (int i = 0; i < samples; ++i) {
        for (int d = 0; d < data.dim; ++d) data.x.push_back(rng.normal());
        data.y.push_back(static_cast<int>(rng.index(classes)));
    }

    std::vector<ftk::ModelSpec> models(3);
    models[0].kind = ftk::ModelKind::Linear;
    models[0].input_dim = data.dim;
    models[0].classes = classes;
    models[1].kind = ftk::ModelKind::Mlp;
    models[1].input_dim = data.dim;
    models[1].hidden = 5;
    models[1].classes = classes;
    models[2] = models[1];
    models[2].normalized = true;

    double worst = 0.0;
    for (const auto& model : models) {
        for (int trial = 0; trial < 10; ++trial) {
            auto params = ftk::init_params(model, rng);
            for (double& v : params.values) v += 0.1 * rng.normal();

            std::vector<std::size_t> all(samples);
            for (int i = 0; i < samples; ++i) all[i] = static_cast<std::size_t>(i);
            rng.shuffle(all);
            all.resize(8);

            const double err = ftk::gradcheck(model, params.values, data, all, 1e-5);
            worst = std::max(worst, err);
            if (err >= 1e-6) {
                return {false, fmt("%s model trial %d: finite-difference disagreement %.3g",
                                   ftk::model_kind_name(model.kind).c_str(), trial, err)};
            }
        }
    }
    return {true, fmt("30 random batches across 3 model kinds, max relative error %.2g", worst)};
}

// --- 8: loss invariance and 1/alpha gradient scaling of the normalized block ---

Outcome check_scale_invariance() {
    ftk::Rng rng(11);
    ftk::Dataset data;
    data.dim = 8;
    const int samples = 30, classes = 4;
    for (int i = 0; i < samples; ++i) {
        for (int d = 0; d < data.dim; ++d) data.x.push_back(rng.normal());
        data.y.push_back(static_cast<int>(rng.index(classes)));
    }

    ftk::ModelSpec model;
    model.kind = ftk::ModelKind::Mlp;
    model.input_dim = data.dim;
    model.hidden = 6;
    model.classes = classes;
    model.normalized = true;

    auto params = ftk::init_params(model, rng);
    for (double& v : params.values) v += 0.1 * rng.normal();
    const auto& block = params.layout.slice("body_w");

    std::vector<std::size_t> idx(samples);
    for (int i = 0; i < samples; ++i) idx[i] = static_cast<std::size_t>(i);

    const double base_loss = ftk::forward_loss(model, params.values, data, idx);
    const auto base_grad = ftk::backward(model, params.values, data, idx);
    double base_norm = 0.0;
    for (std::size_t k = block.offset; k < block.offset + block.size; ++k) {
        base_norm += base_grad[k] * base_grad[k];
    }
    base_norm = std::sqrt(base_norm);

    double worst_loss = 0.0, worst_grad = 0.0;
    for (const double alpha : {0.5, 2.0, 10.0}) {
        auto scaled = params.values;
        for (std::size_t k = block.offset; k < block.offset + block.size; ++k) scaled[k] *= alpha;

        const double loss = ftk::forward_loss(model, scaled, data, idx);
        worst_loss = std::max(worst_loss, std::abs(loss - base_loss) / std::abs(base_loss));

        const auto grad = ftk::backward(model, scaled, data, idx);
        double norm = 0.0;
        for (std::size_t k = block.offset; k < block.offset + block.size; ++k) {
            norm += grad[k] * grad[k];
        }
        norm = std::sqrt(norm);
        worst_grad = std::max(worst_grad, std::abs(norm * alpha - base_norm) / base_norm);
    }
    if (worst_loss > 1e-9) {
        return {false, fmt("loss drifts by %.3g relative under weight scaling", worst_loss)};
    }
    if (worst_grad > 1e-8) {
        return {false, fmt("gradient norm deviates from 1/alpha scaling by %.3g relative", worst_grad)};
    }
    return {true, fmt("loss drift %.2g, gradient 1/alpha deviation %.2g over alpha in {0.5, 2, 10}",
                      worst_loss, worst_grad)};
}

// --- 9: reference-table self-queries and decade buckets ---

Outcome check_recommender_fidelity() {
    const auto db = ftk::default_reference_db();
    for (const auto& entry : db) {
        const auto rec = ftk::recommend_elr(db, entry.source_model, entry.sim);
        if (rec.elr != entry.optimal_elr) {
            return {false, fmt("%s/%s self-query returned %g, expected %g",
                               entry.source_model.c_str(), entry.target_name.c_str(),
                               rec.elr, entry.optimal_elr)};
        }
    }

    const struct {
        double elr, lo, hi;
    } cases[] = {{0.001, 0.001, 0.01}, {0.05, 0.01, 0.1}, {1.0, 0.1, 1.0}};
    for (const auto& c : cases) {
        const auto b = ftk::elr_bucket(c.elr);
        if (std::abs(b.lo - c.lo) > 1e-12 * c.lo || std::abs(b.hi - c.hi) > 1e-12 * c.hi) {
            return {false, fmt("bucket for %g is [%g, %g], expected [%g, %g]",
                               c.elr, b.lo, b.hi, c.lo, c.hi)};
        }
    }
    return {true, fmt("%zu reference rows self-query exactly; decade buckets at 0.001/0.05/1.0 correct",
                      db.size())};
}

// --- 10: byte-identical persisted results across reruns and worker counts ---

Outcome check_determinism() {
    const nlohmann::json config = {
        {"mode", "fix_elr"},
        {"elr_values", {0.01, 0.1}},
        {"momentum_values", {0.0, 0.9}},
        {"wd_values", {0.0, 1e-4}},
        {"seeds", {0, 1}},
        {"epochs", 6},
        {"milestones", {3, 5}},
        {"batch_size", 16},
        {"init", "finetune"},
        {"reg", {{"kind", "l2sp"}, {"lambda2", 0.01}}},
        {"model", {{"kind", "mlp"}, {"hidden", 8}, {"normalized", true}}},
        {"task", {{"seed", 7}, {"classes", 4}, {"dim", 10}, {"delta", 1.0},
                  {"n_per_class", 40}, {"sigma", 1.5}}},
    };
    const ftk::GridSpec grid = ftk::grid_from_json(config);

    ftk_test::TempFile serial, eight, eight_again;
    ftk::persist_results(ftk::run_grid(grid, 1), serial.path());
    ftk::persist_results(ftk::run_grid(grid, 8), eight.path());
    ftk::persist_results(ftk::run_grid(grid, 8), eight_again.path());

    const std::string a = ftk_test::slurp(serial.path());
    const std::string b = ftk_test::slurp(eight.path());
    const std::string c = ftk_test::slurp(eight_again.path());
    if (a.empty()) return {false, "no results persisted"};
    if (a != b) return {false, "results differ between 1 and 8 workers"};
    if (b != c) return {false, "results differ between reruns at 8 workers"};
    const auto trials = ftk::load_results(serial.path()).size();
    return {true, fmt("%zu trials, %zu bytes, identical across 1/8 workers and reruns",
                      trials, a.size())};
}

} // namespace

int main() {
    const struct {
        const char* name;
        Outcome (*run)();
    } checks[] = {
        {"transport distance matches exhaustive enumeration", check_transport_oracle},
        {"similarity identity and closed form", check_similarity_closed_form},
        {"momentum trace follows the hand recurrence", check_momentum_trace},
        {"momentum is interchangeable at fixed effective LR", check_fixed_elr_equivalence},
        {"lower similarity pushes the optimal effective LR up", check_similarity_elr_trend},
        {"L2 shrinks weights harder than the anchored penalty", check_norm_contrast},
        {"analytic gradients match finite differences", check_gradients},
        {"normalized block is scale invariant", check_scale_invariance},
        {"reference table self-queries and decade buckets", check_recommender_fidelity},
        {"grid results are byte-identical across workers", check_determinism},
    };

    int failures = 0;
    int id = 0;
    for (const auto& check : checks) {
        ++id;
        Outcome outcome;
        try {
            outcome = check.run();
        } catch (const std::exception& e) {
            outcome = {false, fmt("unexpected error: %s", e.what())};
        }
        if (!outcome.pass) ++failures;
        std::printf("%s %2d: %s (%s)\n", outcome.pass ? "PASS" : "FAIL", id, check.name,
                    outcome.detail.c_str());
        std::fflush(stdout);
    }
    std::printf("%d/10 checks passed\n", 10 - failures);
    return failures;
}
