#include "ftk/regularizers.hpp"

#include <algorithm>
#include <cmath>

#include "ftk/errors.hpp"

namespace ftk {

namespace {

std::size_t count_shared(const std::vector<bool>& mask) {
    return static_cast<std::size_t>(std::count(mask.begin(), mask.end(), true));
}

void check_lambda(double value, const char* name) {
    if (!std::isfinite(value) || value < 0.0) {
        throw InvalidInput(std::string(name) + " must be non-negative and finite");
    }
}

}  // namespace

std::string reg_kind_name(RegKind kind) {
    switch (kind) {
        case RegKind::None: return "none";
        case RegKind::L2: return "l2";
        case RegKind::L2Sp: return "l2sp";
    }
    throw InvalidInput("unknown regularizer kind");
}

RegKind reg_kind_from_name(const std::string& name) {
    if (name == "none") return RegKind::None;
    if (name == "l2") return RegKind::L2;
    if (name == "l2sp") return RegKind::L2Sp;
    throw InvalidInput("unknown regularizer kind '" + name + "'");
}

RegularizerSpec RegularizerSpec::none() { return RegularizerSpec{}; }

RegularizerSpec RegularizerSpec::l2(double lambda1) {
    RegularizerSpec spec;
    spec.kind = RegKind::L2;
    spec.lambda1 = lambda1;
    return spec;
}

RegularizerSpec RegularizerSpec::l2sp(double lambda1, double lambda2,
                                      std::vector<double> reference,
                                      std::vector<bool> shared_mask) {
    RegularizerSpec spec;
    spec.kind = RegKind::L2Sp;
    spec.lambda1 = lambda1;
    spec.lambda2 = lambda2;
    spec.reference = std::move(reference);
    spec.shared_mask = std::move(shared_mask);
    return spec;
}

void RegularizerSpec::validate(std::size_t param_count) const {
    check_lambda(lambda1, "lambda1");
    check_lambda(lambda2, "lambda2");
    if (kind == RegKind::L2Sp) {
        if (shared_mask.size() != param_count) {
            throw DimensionError("shared_mask has " + std::to_string(shared_mask.size()) +
                                 " entries for " + std::to_string(param_count) + " parameters");
        }
        if (reference.size() != count_shared(shared_mask)) {
            throw DimensionError("reference has " + std::to_string(reference.size()) +
                                 " entries but the mask marks " +
                                 std::to_string(count_shared(shared_mask)) +
                                 " shared parameters");
        }
    } else if (!shared_mask.empty() && shared_mask.size() != param_count) {
        throw DimensionError("shared_mask has " + std::to_string(shared_mask.size()) +
                             " entries for " + std::to_string(param_count) + " parameters");
    }
}

double penalty(const RegularizerSpec& spec, std::span<const double> theta) {
    spec.validate(theta.size());
    switch (spec.kind) {
        case RegKind::None:
            return 0.0;
        case RegKind::L2: {
            double ss = 0.0;
            for (double x : theta) ss += x * x;
            return 0.5 * spec.lambda1 * ss;
        }
        case RegKind::L2Sp: {
            double shared_ss = 0.0;
            double novel_ss = 0.0;
            std::size_t r = 0;
            for (std::size_t i = 0; i < theta.size(); ++i) {
                if (spec.shared_mask[i]) {
                    const double d = theta[i] - spec.reference[r++];
                    shared_ss += d * d;
                } else {
                    novel_ss += theta[i] * theta[i];
                }
            }
            return 0.5 * spec.lambda1 * shared_ss + 0.5 * spec.lambda2 * novel_ss;
        }
    }
    throw InvalidInput("unknown regularizer kind");
}

void add_penalty_gradient(const RegularizerSpec& spec, std::span<const double> theta,
                          std::vector<double>& grad) {
    spec.validate(theta.size());
    if (grad.size() != theta.size()) {
        throw DimensionError("gradient accumulator has " + std::to_string(grad.size()) +
                             " entries, expected " + std::to_string(theta.size()));
    }
    switch (spec.kind) {
        case RegKind::None:
            return;
        case RegKind::L2:
            for (std::size_t i = 0; i < theta.size(); ++i) {
                grad[i] += spec.lambda1 * theta[i];
            }
            return;
        case RegKind::L2Sp: {
            std::size_t r = 0;
            for (std::size_t i = 0; i < theta.size(); ++i) {
                if (spec.shared_mask[i]) {
                    grad[i] += spec.lambda1 * (theta[i] - spec.reference[r++]);
                } else {
                    grad[i] += spec.lambda2 * theta[i];
                }
            }
            return;
        }
    }
    throw InvalidInput("unknown regularizer kind");
}

std::vector<double> penalty_gradient(const RegularizerSpec& spec,
                                     std::span<const double> theta) {
    std::vector<double> grad(theta.size(), 0.0);
    add_penalty_gradient(spec, theta, grad);
    return grad;
}

double normalized_l2(std::span<const double> theta_t, std::span<const double> theta_0) {
    if (theta_t.size() != theta_0.size()) {
        throw DimensionError("parameter vectors of sizes " + std::to_string(theta_t.size()) +
                             " and " + std::to_string(theta_0.size()) + " cannot be compared");
    }
    double num = 0.0;
    double den = 0.0;
    for (std::size_t i = 0; i < theta_t.size(); ++i) {
        num += theta_t[i] * theta_t[i];
        den += theta_0[i] * theta_0[i];
    }
    if (den <= 0.0) {
        throw NumericError("initial parameter norm is zero");
    }
    return num / den;
}

double normalized_l2sp(std::span<const double> theta_t, std::span<const double> theta_0,
                       const RegularizerSpec& spec) {
    if (spec.kind != RegKind::L2Sp) {
        throw InvalidInput("normalized_l2sp requires an l2sp spec");
    }
    if (theta_t.size() != theta_0.size()) {
        throw DimensionError("parameter vectors of sizes " + std::to_string(theta_t.size()) +
                             " and " + std::to_string(theta_0.size()) + " cannot be compared");
    }
    spec.validate(theta_t.size());
    double shared_ss = 0.0;
    double novel_ss = 0.0;
    double novel0_ss = 0.0;
    std::size_t r = 0;
    for (std::size_t i = 0; i < theta_t.size(); ++i) {
        if (spec.shared_mask[i]) {
            const double d = theta_t[i] - spec.reference[r++];
            shared_ss += d * d;
        } else {
            novel_ss += theta_t[i] * theta_t[i];
            novel0_ss += theta_0[i] * theta_0[i];
        }
    }
    const double den = spec.lambda2 * novel0_ss;
    if (den <= 0.0) {
        throw NumericError("normalization denominator is zero (no novel mass at start)");
    }
    return (spec.lambda1 * shared_ss + spec.lambda2 * novel_ss) / den;
}

}  // namespace ftk
