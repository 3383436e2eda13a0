#include "ftk/transport.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "ftk/errors.hpp"

namespace ftk {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// The basis is kept as a set of cells forming a spanning tree over the
// bipartite node set (rows 0..m-1, then columns m..m+n-1).
struct Simplex {
    std::size_t m, n;
    const std::vector<std::vector<double>>& cost;
    std::vector<std::vector<double>> flow;
    std::vector<std::vector<char>> basic;
    std::size_t basis_size = 0;

    Simplex(std::size_t m_, std::size_t n_, const std::vector<std::vector<double>>& cost_)
        : m(m_), n(n_), cost(cost_),
          flow(m_, std::vector<double>(n_, 0.0)),
          basic(m_, std::vector<char>(n_, 0)) {}

    void add_basic(std::size_t i, std::size_t j, double q) {
        basic[i][j] = 1;
        flow[i][j] = q;
        ++basis_size;
    }

    // Vogel approximation: repeatedly allocate in the row or column with the
    // largest penalty (gap between its two cheapest open cells). Exhausting a
    // row and a column at once closes only the row, leaving a zero-demand
    // column open so the basis stays at m+n-1 cells.
    void vogel_init(std::vector<double> supply, std::vector<double> demand) {
        std::vector<char> row_open(m, 1), col_open(n, 1);
        std::size_t rows_left = m, cols_left = n;

        while (rows_left > 0 && cols_left > 0) {
            double best_penalty = -1.0;
            bool best_is_row = true;
            std::size_t best_line = 0;

            auto consider = [&](bool is_row, std::size_t idx, double penalty) {
                if (penalty > best_penalty) {
                    best_penalty = penalty;
                    best_is_row = is_row;
                    best_line = idx;
                }
            };

            for (std::size_t i = 0; i < m; ++i) {
                if (!row_open[i]) continue;
                double c1 = kInf, c2 = kInf;
                for (std::size_t j = 0; j < n; ++j) {
                    if (!col_open[j]) continue;
                    const double c = cost[i][j];
                    if (c < c1) { c2 = c1; c1 = c; }
                    else if (c < c2) { c2 = c; }
                }
                consider(true, i, c2 == kInf ? c1 : c2 - c1);
            }
            for (std::size_t j = 0; j < n; ++j) {
                if (!col_open[j]) continue;
                double c1 = kInf, c2 = kInf;
                for (std::size_t i = 0; i < m; ++i) {
                    if (!row_open[i]) continue;
                    const double c = cost[i][j];
                    if (c < c1) { c2 = c1; c1 = c; }
                    else if (c < c2) { c2 = c; }
                }
                consider(false, j, c2 == kInf ? c1 : c2 - c1);
            }

            // Cheapest open cell on the chosen line, lowest index on ties.
            std::size_t bi = 0, bj = 0;
            double bc = kInf;
            if (best_is_row) {
                bi = best_line;
                for (std::size_t j = 0; j < n; ++j) {
                    if (col_open[j] && cost[bi][j] < bc) { bc = cost[bi][j]; bj = j; }
                }
            } else {
                bj = best_line;
                for (std::size_t i = 0; i < m; ++i) {
                    if (row_open[i] && cost[i][bj] < bc) { bc = cost[i][bj]; bi = i; }
                }
            }

            const double q = std::min(supply[bi], demand[bj]);
            add_basic(bi, bj, q);
            supply[bi] -= q;
            demand[bj] -= q;

            const bool row_done = supply[bi] <= 1e-15;
            const bool col_done = demand[bj] <= 1e-15;
            if (row_done && col_done) {
                if (rows_left == 1 && cols_left == 1) {
                    row_open[bi] = 0; col_open[bj] = 0;
                    --rows_left; --cols_left;
                } else {
                    supply[bi] = 0.0;
                    demand[bj] = 0.0;
                    row_open[bi] = 0;
                    --rows_left;
                }
            } else if (row_done) {
                supply[bi] = 0.0;
                row_open[bi] = 0;
                --rows_left;
            } else {
                demand[bj] = 0.0;
                col_open[bj] = 0;
                --cols_left;
            }
        }
        repair_basis();
    }

    // Ensure the basis is a spanning tree: if fewer than m+n-1 cells were
    // allocated, add zero-flow cells that join distinct components.
    void repair_basis() {
        if (basis_size >= m + n - 1) return;
        std::vector<std::size_t> parent(m + n);
        std::iota(parent.begin(), parent.end(), std::size_t{0});
        auto find = [&](std::size_t x) {
            while (parent[x] != x) x = parent[x] = parent[parent[x]];
            return x;
        };
        for (std::size_t i = 0; i < m; ++i) {
            for (std::size_t j = 0; j < n; ++j) {
                if (basic[i][j]) parent[find(i)] = find(m + j);
            }
        }
        for (std::size_t i = 0; i < m && basis_size < m + n - 1; ++i) {
            for (std::size_t j = 0; j < n && basis_size < m + n - 1; ++j) {
                if (basic[i][j]) continue;
                const std::size_t a = find(i), b = find(m + j);
                if (a != b) {
                    parent[a] = b;
                    add_basic(i, j, 0.0);
                }
            }
        }
    }

    // Duals from the basis tree: u_i + v_j = c_ij on basic cells, u_0 = 0.
    void compute_duals(std::vector<double>& u, std::vector<double>& v,
                       const std::vector<std::vector<std::size_t>>& row_adj,
                       const std::vector<std::vector<std::size_t>>& col_adj) const {
        u.assign(m, kInf);
        v.assign(n, kInf);
        std::vector<std::size_t> stack;
        u[0] = 0.0;
        stack.push_back(0); // node ids: rows 0..m-1, cols m..m+n-1
        while (!stack.empty()) {
            const std::size_t node = stack.back();
            stack.pop_back();
            if (node < m) {
                for (std::size_t j : row_adj[node]) {
                    if (v[j] == kInf) {
                        v[j] = cost[node][j] - u[node];
                        stack.push_back(m + j);
                    }
                }
            } else {
                const std::size_t j = node - m;
                for (std::size_t i : col_adj[j]) {
                    if (u[i] == kInf) {
                        u[i] = cost[i][j] - v[j];
                        stack.push_back(i);
                    }
                }
            }
        }
        for (std::size_t i = 0; i < m; ++i) {
            if (u[i] == kInf) throw NumericError("transport basis is not connected");
        }
        for (std::size_t j = 0; j < n; ++j) {
            if (v[j] == kInf) throw NumericError("transport basis is not connected");
        }
    }

    // Unique tree path from row `si` to column `tj`, as alternating node ids.
    std::vector<std::size_t> tree_path(std::size_t si, std::size_t tj,
                                       const std::vector<std::vector<std::size_t>>& row_adj,
                                       const std::vector<std::vector<std::size_t>>& col_adj) const {
        const std::size_t nodes = m + n;
        std::vector<std::size_t> prev(nodes, nodes);
        std::vector<char> seen(nodes, 0);
        std::vector<std::size_t> queue{si};
        seen[si] = 1;
        for (std::size_t q = 0; q < queue.size(); ++q) {
            const std::size_t node = queue[q];
            if (node == m + tj) break;
            if (node < m) {
                for (std::size_t j : row_adj[node]) {
                    if (!seen[m + j]) { seen[m + j] = 1; prev[m + j] = node; queue.push_back(m + j); }
                }
            } else {
                for (std::size_t i : col_adj[node - m]) {
                    if (!seen[i]) { seen[i] = 1; prev[i] = node; queue.push_back(i); }
                }
            }
        }
        if (!seen[m + tj]) throw NumericError("transport basis lost connectivity");
        std::vector<std::size_t> path;
        for (std::size_t node = m + tj; node != si; node = prev[node]) path.push_back(node);
        path.push_back(si);
        std::reverse(path.begin(), path.end());
        return path;
    }

    void solve() {
        const std::size_t max_pivots = 1000 + 200 * m * n;
        std::vector<double> u, v;
        double cmax = 0.0;
        for (std::size_t i = 0; i < m; ++i) {
            for (std::size_t j = 0; j < n; ++j) cmax = std::max(cmax, cost[i][j]);
        }
        const double tol = 1e-12 * (1.0 + cmax);

        for (std::size_t pivot = 0;; ++pivot) {
            if (pivot > max_pivots) throw NumericError("transport solver exceeded pivot limit");

            std::vector<std::vector<std::size_t>> row_adj(m), col_adj(n);
            for (std::size_t i = 0; i < m; ++i) {
                for (std::size_t j = 0; j < n; ++j) {
                    if (basic[i][j]) { row_adj[i].push_back(j); col_adj[j].push_back(i); }
                }
            }
            compute_duals(u, v, row_adj, col_adj);

            // Bland-style entering rule: first improving cell in row-major order.
            std::size_t ei = m, ej = n;
            for (std::size_t i = 0; i < m && ei == m; ++i) {
                for (std::size_t j = 0; j < n; ++j) {
                    if (!basic[i][j] && cost[i][j] - u[i] - v[j] < -tol) {
                        ei = i; ej = j;
                        break;
                    }
                }
            }
            if (ei == m) return; // optimal

            // Cycle = entering cell + tree path col(ej) -> row(ei). Walking the
            // path from row ei, edges alternate: odd edges gain flow, even lose.
            const auto path = tree_path(ei, ej, row_adj, col_adj);
            std::vector<std::pair<std::size_t, std::size_t>> minus_cells, plus_cells;
            plus_cells.emplace_back(ei, ej);
            for (std::size_t k = 0; k + 1 < path.size(); ++k) {
                const std::size_t a = path[k], b = path[k + 1];
                const std::size_t i = a < m ? a : b;
                const std::size_t j = a < m ? b - m : a - m;
                if (k % 2 == 0) minus_cells.emplace_back(i, j);
                else plus_cells.emplace_back(i, j);
            }

            double theta = kInf;
            for (const auto& cell : minus_cells) {
                theta = std::min(theta, flow[cell.first][cell.second]);
            }
            // Lowest row-then-column index among the cells attaining the minimum.
            std::pair<std::size_t, std::size_t> leaving{m, n};
            for (const auto& cell : minus_cells) {
                if (flow[cell.first][cell.second] <= theta + 1e-18 && cell < leaving) {
                    leaving = cell;
                }
            }

            for (const auto& [i, j] : plus_cells) flow[i][j] += theta;
            for (const auto& [i, j] : minus_cells) flow[i][j] -= theta;
            basic[ei][ej] = 1;
            basic[leaving.first][leaving.second] = 0;
            flow[leaving.first][leaving.second] = 0.0;
        }
    }
};

} // namespace

std::vector<std::vector<double>> distance_matrix(const DomainProfile& source,
                                                 const DomainProfile& target) {
    source.validate();
    target.validate();
    if (source.dim() != target.dim()) {
        throw DimensionError("profile dimensions disagree: " + std::to_string(source.dim()) +
                             " vs " + std::to_string(target.dim()));
    }
    const std::size_t m = source.classes(), n = target.classes(), d = source.dim();
    std::vector<std::vector<double>> out(m, std::vector<double>(n, 0.0));
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            double s = 0.0;
            for (std::size_t k = 0; k < d; ++k) {
                const double diff = source.centroids[i][k] - target.centroids[j][k];
                s += diff * diff;
            }
            out[i][j] = std::sqrt(s);
        }
    }
    return out;
}

EmdSolution solve_transport(std::vector<double> supplies, std::vector<double> demands,
                            const std::vector<std::vector<double>>& cost) {
    const std::size_t m = supplies.size(), n = demands.size();
    if (m == 0 || n == 0) throw EmptyInputError("empty marginals");
    if (cost.size() != m) throw DimensionError("cost row count does not match supplies");
    for (const auto& row : cost) {
        if (row.size() != n) throw DimensionError("cost column count does not match demands");
        for (double c : row) {
            if (!std::isfinite(c)) throw InvalidInput("non-finite cost entry");
            if (c < 0.0) throw InvalidInput("negative cost entry");
        }
    }
    double supply_sum = 0.0, demand_sum = 0.0;
    for (double s : supplies) {
        if (!std::isfinite(s) || s <= 0.0) throw InvalidInput("supplies must be positive and finite");
        supply_sum += s;
    }
    for (double d : demands) {
        if (!std::isfinite(d) || d <= 0.0) throw InvalidInput("demands must be positive and finite");
        demand_sum += d;
    }
    for (double& s : supplies) s /= supply_sum;
    for (double& d : demands) d /= demand_sum;

    Simplex simplex(m, n, cost);
    simplex.vogel_init(supplies, demands);
    simplex.solve();

    EmdSolution sol;
    sol.flow = std::move(simplex.flow);
    double work = 0.0, mass = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            work += sol.flow[i][j] * cost[i][j];
            mass += sol.flow[i][j];
        }
    }
    sol.total_flow = mass;
    sol.distance = work / mass;
    return sol;
}

SimilarityScore domain_similarity(const DomainProfile& source, const DomainProfile& target,
                                  double gamma, EmdSolution* flow_out) {
    if (!(gamma > 0.0) || !std::isfinite(gamma)) throw InvalidInput("gamma must be positive");
    const auto cost = distance_matrix(source, target);
    EmdSolution sol = solve_transport(source.weights, target.weights, cost);
    SimilarityScore score;
    score.gamma = gamma;
    score.distance = sol.distance;
    score.value = std::exp(-gamma * sol.distance);
    if (flow_out != nullptr) *flow_out = std::move(sol);
    return score;
}

} // namespace ftk
