#ifndef FTK_TRANSPORT_HPP_
#define FTK_TRANSPORT_HPP_

#include <vector>

#include "ftk/domain_features.hpp"

namespace ftk {

// Optimal solution of the normalized transportation problem. Flows are in
// normalized mass units (marginals are rescaled to sum 1 before solving),
// and distance is the transport cost per unit of mass moved.
struct EmdSolution {
    std::vector<std::vector<double>> flow; // m x n
    double distance = 0.0;
    double total_flow = 0.0;
};

struct SimilarityScore {
    double value = 1.0;  // exp(-gamma * distance), in (0, 1]
    double gamma = 0.01;
    double distance = 0.0;
};

// Pairwise Euclidean distances between class centroids.
std::vector<std::vector<double>> distance_matrix(const DomainProfile& source,
                                                 const DomainProfile& target);

// Exact transportation simplex: Vogel-approximation initial basis, u-v
// (MODI) improvement loop, Bland-style entering rule; degenerate pivots are
// broken by lowest row-then-column index.
EmdSolution solve_transport(std::vector<double> supplies, std::vector<double> demands,
                            const std::vector<std::vector<double>>& cost);

// When flow_out is given it receives the optimal transport plan between the
// two profiles' classes.
SimilarityScore domain_similarity(const DomainProfile& source, const DomainProfile& target,
                                  double gamma = 0.01, EmdSolution* flow_out = nullptr);

} // namespace ftk

#endif // FTK_TRANSPORT_HPP_
