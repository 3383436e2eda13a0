#include "doctest.h"

#include <cmath>
#include <vector>

#include "ftk/domain_features.hpp"
#include "ftk/errors.hpp"
#include "ftk/rng.hpp"
#include "ftk/transport.hpp"
#include "support/brute_force_transport.hpp"

using namespace ftk;

namespace {

DomainProfile profile_of(std::vector<std::vector<double>> centroids,
                         std::vector<double> weights) {
    DomainProfile p;
    p.name = "test";
    p.centroids = std::move(centroids);
    p.weights = std::move(weights);
    for (std::size_t i = 0; i < p.weights.size(); ++i) {
        p.labels.push_back("c" + std::to_string(i));
    }
    double sum = 0.0;
    for (double w : p.weights) sum += w;
    for (double& w : p.weights) w /= sum;
    p.validate();
    return p;
}

DomainProfile random_profile(Rng& rng, std::size_t classes, std::size_t dim) {
    std::vector<std::vector<double>> centroids(classes, std::vector<double>(dim));
    std::vector<double> weights(classes);
    for (auto& c : centroids) {
        for (double& v : c) v = rng.normal();
    }
    for (double& w : weights) w = rng.uniform(0.2, 1.0);
    return profile_of(std::move(centroids), std::move(weights));
}

}  // namespace

TEST_CASE("distance matrix basics") {
    const DomainProfile s1 = profile_of({{0.0, 0.0}}, {1.0});
    const DomainProfile t1 = profile_of({{3.0, 4.0}}, {1.0});
    const auto d1 = distance_matrix(s1, t1);
    CHECK(d1.size() == 1);
    CHECK(d1[0][0] == doctest::Approx(5.0).epsilon(1e-12));

    const DomainProfile s2 = profile_of({{0.0, 0.0}, {1.0, 0.0}}, {0.5, 0.5});
    const auto d_self = distance_matrix(s2, s2);
    CHECK(d_self[0][0] == 0.0);
    CHECK(d_self[1][1] == 0.0);

    const DomainProfile s3 = profile_of({{0.0}, {1.0}}, {0.5, 0.5});
    const DomainProfile t3 = profile_of({{0.0}, {2.0}}, {0.5, 0.5});
    const auto d3 = distance_matrix(s3, t3);
    CHECK(d3[0][0] == doctest::Approx(0.0));
    CHECK(d3[0][1] == doctest::Approx(2.0));
    CHECK(d3[1][0] == doctest::Approx(1.0));
    CHECK(d3[1][1] == doctest::Approx(1.0));

    const DomainProfile wide = profile_of({{0.0, 0.0, 0.0}}, {1.0});
    CHECK_THROWS_AS(distance_matrix(s1, wide), DimensionError);
}

TEST_CASE("forced transport plans") {
    const EmdSolution one = solve_transport({1.0}, {1.0}, {{5.0}});
    CHECK(one.flow[0][0] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(one.distance == doctest::Approx(5.0).epsilon(1e-12));
    CHECK(one.total_flow == doctest::Approx(1.0).epsilon(1e-12));

    const EmdSolution match =
        solve_transport({0.5, 0.5}, {0.5, 0.5}, {{0.0, 1.0}, {1.0, 0.0}});
    CHECK(match.distance == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(match.flow[0][0] == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(match.flow[1][1] == doctest::Approx(0.5).epsilon(1e-12));

    // Both diagonal plans cost 1 per unit; any off-diagonal mass costs more.
    const EmdSolution diag =
        solve_transport({0.5, 0.5}, {0.5, 0.5}, {{1.0, 2.0}, {3.0, 1.0}});
    CHECK(diag.distance == doctest::Approx(1.0).epsilon(1e-12));
    const double oracle = ftk_test::brute_force_distance({1, 1}, {1, 1},
                                                         {{1.0, 2.0}, {3.0, 1.0}});
    CHECK(diag.distance == doctest::Approx(oracle).epsilon(1e-9));
}

TEST_CASE("solver matches exhaustive enumeration on small integer instances") {
    Rng rng(101);
    int checked = 0;
    for (int trial = 0; trial < 80; ++trial) {
        const std::size_t m = 2 + rng.index(2);  // 2..3
        const std::size_t n = 2 + rng.index(2);
        std::vector<int> supplies(m), demands(n);
        int total = 0;
        for (int& s : supplies) {
            s = 1 + static_cast<int>(rng.index(2));
            total += s;
        }
        if (total > 6) continue;  // keep enumeration exact per the bound Q <= 6
        // Random composition of `total` into n positive parts.
        demands.assign(n, 1);
        for (int left = total - static_cast<int>(n); left > 0; --left) {
            demands[rng.index(n)] += 1;
        }
        if (static_cast<int>(n) > total) continue;
        std::vector<std::vector<double>> cost(m, std::vector<double>(n));
        for (auto& row : cost) {
            for (double& c : row) c = rng.uniform(0.0, 5.0);
        }
        std::vector<double> fs(supplies.begin(), supplies.end());
        std::vector<double> fd(demands.begin(), demands.end());
        const EmdSolution sol = solve_transport(fs, fd, cost);
        const double oracle = ftk_test::brute_force_distance(supplies, demands, cost);
        CHECK(sol.distance == doctest::Approx(oracle).epsilon(1e-9));
        ++checked;
    }
    CHECK(checked >= 40);
}

TEST_CASE("feasibility on random real-valued instances") {
    Rng rng(202);
    for (int trial = 0; trial < 25; ++trial) {
        const std::size_t m = 2 + rng.index(5);
        const std::size_t n = 2 + rng.index(4);
        std::vector<double> supplies(m), demands(n);
        double s_total = 0.0, d_total = 0.0;
        for (double& v : supplies) {
            v = rng.uniform(0.05, 1.0);
            s_total += v;
        }
        for (double& v : demands) {
            v = rng.uniform(0.05, 1.0);
            d_total += v;
        }
        std::vector<std::vector<double>> cost(m, std::vector<double>(n));
        for (auto& row : cost) {
            for (double& c : row) c = rng.uniform(0.0, 9.0);
        }
        const EmdSolution sol = solve_transport(supplies, demands, cost);
        double mass = 0.0;
        double work = 0.0;
        for (std::size_t i = 0; i < m; ++i) {
            double row_sum = 0.0;
            for (std::size_t j = 0; j < n; ++j) {
                CHECK(sol.flow[i][j] >= -1e-12);
                row_sum += sol.flow[i][j];
                mass += sol.flow[i][j];
                work += sol.flow[i][j] * cost[i][j];
            }
            CHECK(row_sum == doctest::Approx(supplies[i] / s_total).epsilon(1e-9));
        }
        for (std::size_t j = 0; j < n; ++j) {
            double col_sum = 0.0;
            for (std::size_t i = 0; i < m; ++i) col_sum += sol.flow[i][j];
            CHECK(col_sum == doctest::Approx(demands[j] / d_total).epsilon(1e-9));
        }
        CHECK(sol.total_flow == doctest::Approx(1.0).epsilon(1e-9));
        CHECK(sol.distance == doctest::Approx(work / mass).epsilon(1e-9));
    }
}

TEST_CASE("degenerate marginals stay deterministic and feasible") {
    // Equal supply/demand chunks force zero-flow basis cells.
    const std::vector<double> supplies{0.25, 0.25, 0.5};
    const std::vector<double> demands{0.5, 0.25, 0.25};
    const std::vector<std::vector<double>> cost{
        {1.0, 1.0, 4.0}, {2.0, 1.0, 1.0}, {3.0, 2.0, 1.0}};
    const EmdSolution a = solve_transport(supplies, demands, cost);
    const EmdSolution b = solve_transport(supplies, demands, cost);
    CHECK(a.flow == b.flow);
    const double oracle =
        ftk_test::brute_force_distance({1, 1, 2}, {2, 1, 1}, cost);
    CHECK(a.distance == doctest::Approx(oracle).epsilon(1e-9));
}

TEST_CASE("similarity identity and closed form") {
    Rng rng(7);
    const DomainProfile p = random_profile(rng, 4, 3);
    const SimilarityScore self = domain_similarity(p, p);
    CHECK(self.distance == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(self.value == doctest::Approx(1.0).epsilon(1e-12));

    const DomainProfile s = profile_of({{0.0, 0.0}}, {1.0});
    const DomainProfile t = profile_of({{3.0, 4.0}}, {1.0});
    const SimilarityScore score = domain_similarity(s, t);
    CHECK(score.distance == doctest::Approx(5.0).epsilon(1e-12));
    CHECK(score.value == doctest::Approx(std::exp(-0.05)).epsilon(1e-12));
    CHECK(score.value == doctest::Approx(0.951229).epsilon(1e-6));
    CHECK(score.gamma == 0.01);
}

TEST_CASE("similarity is symmetric") {
    Rng rng(33);
    for (int trial = 0; trial < 10; ++trial) {
        const DomainProfile s = random_profile(rng, 2 + rng.index(3), 4);
        const DomainProfile t = random_profile(rng, 2 + rng.index(3), 4);
        const SimilarityScore st = domain_similarity(s, t);
        const SimilarityScore ts = domain_similarity(t, s);
        CHECK(st.value == doctest::Approx(ts.value).epsilon(1e-9));
    }
}

TEST_CASE("scaling all centroids scales the distance") {
    Rng rng(44);
    const DomainProfile s = random_profile(rng, 3, 4);
    const DomainProfile t = random_profile(rng, 4, 4);
    const SimilarityScore base = domain_similarity(s, t);
    for (double c : {0.5, 2.0, 3.0}) {
        DomainProfile s_scaled = s;
        DomainProfile t_scaled = t;
        for (auto& row : s_scaled.centroids) {
            for (double& v : row) v *= c;
        }
        for (auto& row : t_scaled.centroids) {
            for (double& v : row) v *= c;
        }
        const SimilarityScore scaled = domain_similarity(s_scaled, t_scaled);
        CHECK(scaled.distance == doctest::Approx(base.distance * c).epsilon(1e-9));
        CHECK(scaled.value ==
              doctest::Approx(std::pow(base.value, c)).epsilon(1e-9));
    }
}

TEST_CASE("distance is stable under tiny weight perturbations") {
    Rng rng(55);
    const DomainProfile s = random_profile(rng, 3, 3);
    const DomainProfile t = random_profile(rng, 3, 3);
    const double base = domain_similarity(s, t).distance;
    DomainProfile s2 = s;
    for (double& w : s2.weights) w += rng.uniform(0.0, 1e-6);
    double sum = 0.0;
    for (double w : s2.weights) sum += w;
    for (double& w : s2.weights) w /= sum;
    const double moved = domain_similarity(s2, t).distance;
    CHECK(std::abs(moved - base) <= 1e-3);
}

TEST_CASE("transport input validation") {
    CHECK_THROWS_AS(solve_transport({0.0, 1.0}, {1.0}, {{1.0}, {1.0}}), InvalidInput);
    CHECK_THROWS_AS(solve_transport({1.0}, {-1.0}, {{1.0}}), InvalidInput);
    CHECK_THROWS_AS(solve_transport({1.0}, {1.0}, {{-2.0}}), InvalidInput);
    const double nan = std::nan("");
    CHECK_THROWS_AS(solve_transport({1.0}, {1.0}, {{nan}}), InvalidInput);
    CHECK_THROWS_AS(solve_transport({1.0, 1.0}, {1.0}, {{1.0}}), DimensionError);

    const DomainProfile s = profile_of({{0.0}}, {1.0});
    CHECK_THROWS_AS(domain_similarity(s, s, 0.0), InvalidInput);
    CHECK_THROWS_AS(domain_similarity(s, s, -1.0), InvalidInput);
}
