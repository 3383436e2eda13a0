#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace ftk {

enum class RegKind { None, L2, L2Sp };

std::string reg_kind_name(RegKind kind);
RegKind reg_kind_from_name(const std::string& name);

// Penalty specification. For l2sp the parameter vector is partitioned by
// shared_mask into a shared part (pulled toward the reference point) and a
// novel part (pulled toward the origin with lambda2).
struct RegularizerSpec {
    RegKind kind = RegKind::None;
    double lambda1 = 0.0;
    double lambda2 = 0.0;
    std::vector<double> reference;  // one entry per shared coordinate, l2sp only
    std::vector<bool> shared_mask;  // one entry per parameter, l2sp only

    static RegularizerSpec none();
    static RegularizerSpec l2(double lambda1);
    static RegularizerSpec l2sp(double lambda1, double lambda2,
                                std::vector<double> reference,
                                std::vector<bool> shared_mask);

    // Checks internal consistency against a parameter count.
    void validate(std::size_t param_count) const;
};

double penalty(const RegularizerSpec& spec, std::span<const double> theta);

std::vector<double> penalty_gradient(const RegularizerSpec& spec,
                                     std::span<const double> theta);

// Adds the penalty gradient into an existing gradient accumulator.
void add_penalty_gradient(const RegularizerSpec& spec, std::span<const double> theta,
                          std::vector<double>& grad);

// ||theta_t||^2 / ||theta_0||^2.
double normalized_l2(std::span<const double> theta_t, std::span<const double> theta_0);

// (lambda1*||theta'_t - ref||^2 + lambda2*||theta''_t||^2) / (lambda2*||theta''_0||^2)
// where ' and '' select the shared and novel coordinates of an l2sp spec.
double normalized_l2sp(std::span<const double> theta_t, std::span<const double> theta_0,
                       const RegularizerSpec& spec);

}  // namespace ftk
