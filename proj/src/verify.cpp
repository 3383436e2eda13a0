#include "ftk/verify.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "ftk/desk_models.hpp"
#include "ftk/domain_features.hpp"
#include "ftk/errors.hpp"
#include "ftk/harness.hpp"
#include "ftk/optim.hpp"
#include "ftk/recommender.hpp"
#include "ftk/regularizers.hpp"
#include "ftk/rng.hpp"
#include "ftk/transport.hpp"

namespace ftk {

namespace {

// Each check throws on failure; the message becomes the FAIL detail.
void require(bool ok, const std::string& what) {
    if (!ok) throw Error(what);
}

void require_close(double actual, double expected, double tol, const std::string& what) {
    if (!(std::abs(actual - expected) <= tol)) {
        std::ostringstream msg;
        msg << what << ": got " << actual << ", want " << expected << " (tol " << tol << ")";
        throw Error(msg.str());
    }
}

DomainProfile tiny_profile(double shift) {
    RawFeatures raw;
    raw.dim = 2;
    raw.rows = {{"a", {0.0 + shift, 0.0}},
                {"a", {2.0 + shift, 2.0}},
                {"b", {4.0 + shift, 4.0}}};
    return build_domain_profile(raw, "tiny", "test");
}

void check_domain_features() {
    const DomainProfile p = tiny_profile(0.0);
    require(p.labels == std::vector<std::string>{"a", "b"}, "labels sorted");
    require_close(p.centroids[0][0], 1.0, 1e-15, "centroid mean");
    require_close(p.weights[0], 2.0 / 3.0, 1e-15, "count fraction weight");
    double sum = 0.0;
    for (double w : p.weights) sum += w;
    require_close(sum, 1.0, 1e-12, "weights sum to one");

    DomainProfile bad = p;
    bad.weights = {0.3, 0.3};
    bool threw = false;
    try {
        bad.validate();
    } catch (const Error&) {
        threw = true;
    }
    require(threw, "unnormalized weights rejected");
}

void check_transport() {
    const DomainProfile p = tiny_profile(0.0);
    const SimilarityScore self = domain_similarity(p, p);
    require_close(self.distance, 0.0, 1e-12, "self distance");
    require_close(self.value, 1.0, 1e-12, "self similarity");

    // Two suppliers, two consumers, crossing is costly: optimal plan moves
    // 0.4 + 0.1 to the first consumer for total cost 0.1.
    const EmdSolution sol = solve_transport({0.4, 0.6}, {0.5, 0.5},
                                            {{0.0, 1.0}, {1.0, 0.0}});
    require_close(sol.distance, 0.1, 1e-12, "hand-solved plan cost");

    Rng rng(7);
    const std::size_t m = 4, n = 3;
    std::vector<double> supplies(m), demands(n);
    double s_total = 0.0, d_total = 0.0;
    for (double& v : supplies) {
        v = rng.uniform(0.1, 1.0);
        s_total += v;
    }
    for (double& v : demands) {
        v = rng.uniform(0.1, 1.0);
        d_total += v;
    }
    std::vector<std::vector<double>> cost(m, std::vector<double>(n));
    for (auto& row : cost) {
        for (double& c : row) c = rng.uniform(0.0, 5.0);
    }
    const EmdSolution rand_sol = solve_transport(supplies, demands, cost);
    for (std::size_t i = 0; i < m; ++i) {
        double row = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            require(rand_sol.flow[i][j] >= -1e-12, "non-negative flow");
            row += rand_sol.flow[i][j];
        }
        require_close(row, supplies[i] / s_total, 1e-9, "supply marginal");
    }
    for (std::size_t j = 0; j < n; ++j) {
        double col = 0.0;
        for (std::size_t i = 0; i < m; ++i) col += rand_sol.flow[i][j];
        require_close(col, demands[j] / d_total, 1e-9, "demand marginal");
    }
}

void check_optim() {
    // Scalar quadratic f = theta^2/2, eta 0.1, momentum 0.9: two lookahead
    // steps land exactly on 0.729.
    HyperParams hp;
    hp.eta = 0.1;
    hp.momentum = 0.9;
    hp.weight_decay = 0.0;
    hp.batch_size = 1;
    hp.schedule = ScheduleSpec{0.1, {}, 0.1, 10};
    OptimState state;
    state.theta = {1.0};
    state.velocity = {0.0};
    for (int t = 0; t < 2; ++t) {
        const std::vector<double> look = lookahead_point(state, hp.momentum);
        const std::vector<double> grad = {look[0]};
        state = nag_step(state, grad, hp, 0.1);
    }
    require_close(state.theta[0], 0.729, 1e-12, "two-step quadratic trace");

    require_close(eta_for_elr(elr(0.01, 0.9), 0.9), 0.01, 1e-15, "elr round trip");
    const ScheduleSpec sched{0.01, {150, 250}, 0.1, 300};
    require_close(schedule_eta(sched, 0), 0.01, 0.0, "schedule before decay");
    require_close(schedule_eta(sched, 150), 0.001, 1e-18, "schedule after one decay");
    require_close(schedule_eta(sched, 299), 0.0001, 1e-18, "schedule after two decays");
    require_close(bn_momentum_heuristic(5), 0.9, 0.0, "bn momentum clamp");
    require_close(bn_momentum_heuristic(1000), 0.99, 1e-15, "bn momentum formula");
}

void check_regularizers() {
    Rng rng(11);
    std::vector<double> theta(13);
    for (double& v : theta) v = rng.normal();

    const RegularizerSpec plain = RegularizerSpec::l2(0.37);
    const RegularizerSpec anchored = RegularizerSpec::l2sp(
        0.37, 0.37, std::vector<double>(theta.size(), 0.0),
        std::vector<bool>(theta.size(), true));
    require(penalty(plain, theta) == penalty(anchored, theta),
            "l2sp at zero reference equals l2");
    require(penalty_gradient(plain, theta) == penalty_gradient(anchored, theta),
            "matching gradients for the reduction");

    std::vector<bool> mask(theta.size(), false);
    for (std::size_t i = 0; i < 7; ++i) mask[i] = true;
    std::vector<double> reference(7);
    for (double& v : reference) v = rng.normal();
    const RegularizerSpec spec = RegularizerSpec::l2sp(0.2, 0.05, reference, mask);
    const std::vector<double> analytic = penalty_gradient(spec, theta);
    const double eps = 1e-5;
    double worst = 0.0;
    for (std::size_t i = 0; i < theta.size(); ++i) {
        const double saved = theta[i];
        theta[i] = saved + eps;
        const double up = penalty(spec, theta);
        theta[i] = saved - eps;
        const double down = penalty(spec, theta);
        theta[i] = saved;
        const double numeric = (up - down) / (2.0 * eps);
        const double denom = std::max(1e-12, std::abs(analytic[i]) + std::abs(numeric));
        worst = std::max(worst, std::abs(analytic[i] - numeric) / denom);
    }
    require(worst < 1e-6, "finite differences agree with analytic gradient");
    require_close(normalized_l2(theta, theta), 1.0, 0.0, "normalized norm at start");
}

void check_desk_models() {
    const auto [source, target] = make_task_pair(3, 3, 6, 1.0, 20, 1.0);
    const auto [source2, target2] = make_task_pair(3, 3, 6, 1.0, 20, 1.0);
    require(source.train.x == source2.train.x && target.val.x == target2.val.x,
            "task generation is deterministic");

    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < 12; ++i) idx.push_back(i);

    for (int variant = 0; variant < 3; ++variant) {
        ModelSpec model;
        model.input_dim = 6;
        model.classes = 3;
        if (variant > 0) {
            model.kind = ModelKind::Mlp;
            model.hidden = 5;
            model.normalized = variant == 2;
        }
        Rng rng(17 + static_cast<std::uint64_t>(variant));
        const ParamVector params = init_params(model, rng);
        const double err = gradcheck(model, params.values, source.train, idx, 1e-5);
        require(err < 1e-6, "gradcheck under 1e-6 for " + model_kind_name(model.kind) +
                                (model.normalized ? "+normalized" : ""));
        if (model.normalized) {
            const ParamSlice& w1 = params.layout.slice("body_w");
            std::vector<double> scaled = params.values;
            for (std::size_t i = 0; i < w1.size; ++i) scaled[w1.offset + i] *= 10.0;
            const double base = forward_loss(model, params.values, source.train, idx);
            const double moved = forward_loss(model, scaled, source.train, idx);
            require(std::abs(moved - base) <= 1e-9 * std::abs(base),
                    "loss invariant to hidden weight scale");
        }
    }
}

void check_recommender() {
    const std::vector<ReferenceEntry> db = default_reference_db();
    for (const ReferenceEntry& entry : db) {
        const Recommendation rec = recommend_elr(db, entry.source_model, entry.sim);
        require(rec.nearest.target_name == entry.target_name,
                "self query returns own row for " + entry.target_name + "@" +
                    entry.source_model);
        require(rec.elr >= rec.bucket.lo && rec.elr <= rec.bucket.hi,
                "elr inside its bucket");
    }
    const ElrBucket low = elr_bucket(0.001);
    require(low.lo == 0.001 && low.hi == 0.01, "bucket at an exact power of ten");
    const ElrBucket mid = elr_bucket(0.05);
    require(mid.lo == 0.01 && mid.hi == 0.1, "interior bucket");
    const ElrBucket top = elr_bucket(1.0);
    require(top.lo == 0.1 && top.hi == 1.0, "top bucket closed above");
    const Recommendation cars = recommend_elr(db, "imagenet/resnet101", 0.850);
    require(cars.nearest.target_name == "Cars", "nearest neighbor at sim 0.850");
}

void check_harness() {
    GridSpec grid = presets::default_sweep();
    grid.elr_values = {0.1};
    grid.momentum_values = {0.9};
    grid.wd_values = {1e-4};
    grid.seeds = {0};
    grid.epochs = 3;
    grid.milestones = {2};
    grid.task = TaskSpec{0, 2, 4, 0.5, 10, 1.0};
    grid.model.hidden = 4;
    grid.pretrain.max_epochs = 5;
    grid.pretrain.patience = 2;

    const std::vector<TrialResult> first = run_grid(grid, 1);
    const std::vector<TrialResult> second = run_grid(grid, 1);
    require(first.size() == 1 && second.size() == 1, "one trial per cell and seed");
    require(result_payload_equal(first[0], second[0]), "rerun is bit-identical");
    require(std::abs(first[0].elr - elr(first[0].hyper)) <=
                1e-15 * std::max(1.0, first[0].elr),
            "recorded elr matches hyperparameters");
    require(result_payload_equal(result_from_json(result_to_json(first[0])), first[0]),
            "result JSON round-trip");

    std::vector<TrialResult> pile;
    for (double e : {0.3, 0.2, 0.4}) {
        TrialResult r = first[0];
        r.final_val_error = e;
        pile.push_back(r);
    }
    const auto forward_table = best_per_group(pile, GroupKey::Elr);
    std::reverse(pile.begin(), pile.end());
    const auto backward_table = best_per_group(pile, GroupKey::Elr);
    require(forward_table == backward_table && forward_table.size() == 1 &&
                forward_table[0].second == 0.2,
            "best_per_group is order-insensitive");
}

struct Suite {
    const char* name;
    std::function<void()> run;
};

}  // namespace

int run_verify_suites(std::ostream& out, bool json_lines) {
    const std::vector<Suite> suites = {
        {"domain-features", check_domain_features},
        {"transport", check_transport},
        {"optim", check_optim},
        {"regularizers", check_regularizers},
        {"desk-models", check_desk_models},
        {"recommender", check_recommender},
        {"harness", check_harness},
    };
    int failures = 0;
    for (const Suite& suite : suites) {
        std::string detail;
        try {
            suite.run();
        } catch (const std::exception& e) {
            detail = e.what();
            ++failures;
        }
        if (json_lines) {
            nlohmann::json j;
            j["suite"] = suite.name;
            j["status"] = detail.empty() ? "pass" : "fail";
            if (!detail.empty()) j["detail"] = detail;
            out << j.dump() << '\n';
        } else if (detail.empty()) {
            out << "PASS " << suite.name << '\n';
        } else {
            out << "FAIL " << suite.name << ": " << detail << '\n';
        }
    }
    return failures;
}

}  // namespace ftk
