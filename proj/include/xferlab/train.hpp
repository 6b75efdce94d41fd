#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <string>
#include <string_view>

#include "xferlab/datagen.hpp"
#include "xferlab/error.hpp"

namespace xferlab {

enum class EstimatorKind { standard, adv_l2, adv_linf };

inline std::string_view to_string(EstimatorKind k) {
    switch (k) {
        case EstimatorKind::standard: return "standard";
        case EstimatorKind::adv_l2: return "adv_l2";
        case EstimatorKind::adv_linf: return "adv_linf";
    }
    return "unknown";
}

inline EstimatorKind estimator_kind_from_string(std::string_view s) {
    if (s == "standard") return EstimatorKind::standard;
    if (s == "adv_l2") return EstimatorKind::adv_l2;
    if (s == "adv_linf") return EstimatorKind::adv_linf;
    throw ConfigError("unknown estimator kind '" + std::string(s) + "'");
}

/// Which per-task trainer to run, and its attack budget.
struct EstimatorConfig {
    EstimatorKind kind = EstimatorKind::standard;
    double epsilon = 0.0;

    void validate() const {
        if (!(epsilon >= 0.0)) throw ConfigError("epsilon must be nonnegative");
        if (kind == EstimatorKind::standard && epsilon != 0.0) {
            throw ConfigError("standard estimator requires epsilon = 0");
        }
        if (kind != EstimatorKind::standard && !(epsilon > 0.0)) {
            throw ConfigError("adversarial estimator requires epsilon > 0");
        }
    }

    bool adversarial() const noexcept { return kind != EstimatorKind::standard; }
};

struct FitResult {
    Vector beta;
    double objective = 0.0;
    bool suppressed = false;
};

/// mu_hat = (1/n) sum_i y_i x_i
inline Vector empirical_mean_direction(const LabeledDataset& ds) {
    if (ds.size() < 1) throw ContractError("empirical mean needs a nonempty dataset");
    return ds.inputs.transpose() * ds.labels / static_cast<double>(ds.size());
}

namespace detail {

inline FitResult suppressed_fit(Eigen::Index p) { return FitResult{Vector::Zero(p), 0.0, true}; }

}  // namespace detail

// The fits below depend on the data only through mu_hat; the dataset
// overloads are thin wrappers.

inline FitResult fit_standard(const Vector& mean) {
    const double norm = mean.norm();
    if (norm == 0.0) return detail::suppressed_fit(mean.size());
    return FitResult{mean / norm, -norm, false};
}

/// argmin_{|b|<=1} -<b, mu> + eps |b|_2
inline FitResult fit_adv_l2(const Vector& mean, double eps) {
    if (!(eps > 0.0)) throw ConfigError("fit_adv_l2 needs eps > 0");
    const double norm = mean.norm();
    if (norm >= eps && norm > 0.0) return FitResult{mean / norm, -norm + eps, false};
    return detail::suppressed_fit(mean.size());
}

/// Coordinatewise sgn(v_j) max(|v_j| - eps, 0).
inline Vector hard_threshold(const Vector& v, double eps) {
    return v.unaryExpr([eps](double x) {
        const double mag = std::abs(x) - eps;
        return mag > 0.0 ? std::copysign(mag, x) : 0.0;
    });
}

/// argmin_{|b|<=1} -<b, mu> + eps |b|_1
inline FitResult fit_adv_linf(const Vector& mean, double eps) {
    if (!(eps > 0.0)) throw ConfigError("fit_adv_linf needs eps > 0");
    const Vector shrunk = hard_threshold(mean, eps);
    const double norm = shrunk.norm();
    if (norm == 0.0) return detail::suppressed_fit(mean.size());
    Vector beta = shrunk / norm;
    const double objective = -beta.dot(mean) + eps * beta.lpNorm<1>();
    return FitResult{std::move(beta), objective, false};
}

inline FitResult fit(const Vector& mean, const EstimatorConfig& cfg) {
    switch (cfg.kind) {
        case EstimatorKind::standard: return fit_standard(mean);
        case EstimatorKind::adv_l2: return fit_adv_l2(mean, cfg.epsilon);
        case EstimatorKind::adv_linf: return fit_adv_linf(mean, cfg.epsilon);
    }
    throw ConfigError("unknown estimator kind");
}

inline FitResult fit_standard(const LabeledDataset& ds) {
    return fit_standard(empirical_mean_direction(ds));
}
inline FitResult fit_adv_l2(const LabeledDataset& ds, double eps) {
    return fit_adv_l2(empirical_mean_direction(ds), eps);
}
inline FitResult fit_adv_linf(const LabeledDataset& ds, double eps) {
    return fit_adv_linf(empirical_mean_direction(ds), eps);
}

/// Value of -<b, mu> + eps * pen(b) for the estimator's penalty.
inline double adversarial_objective(const Vector& beta, const Vector& mean,
                                    const EstimatorConfig& cfg) {
    double pen = 0.0;
    if (cfg.kind == EstimatorKind::adv_l2) pen = beta.norm();
    if (cfg.kind == EstimatorKind::adv_linf) pen = beta.lpNorm<1>();
    return -beta.dot(mean) + cfg.epsilon * pen;
}

struct OracleOptions {
    int iterations = 50000;
};

inline constexpr Eigen::Index kOracleMaxDim = 16;
inline constexpr Eigen::Index kOracleMaxSamples = 64;

/// Projected subgradient descent on the unit ball, keeping the best iterate.
/// Steps are c / sqrt(k) for the first half of the budget, then decay as
/// c / (sqrt(K/2) (k - K/2)) so that coordinates pinned at an l1 kink stop
/// oscillating; c = |mu| + eps + 1. Independent of the closed forms above and
/// used only to audit them.
inline FitResult oracle_minimize(const Vector& mean, const EstimatorConfig& cfg,
                                 OracleOptions opts = {}) {
    cfg.validate();
    if (opts.iterations < 2) throw ContractError("oracle needs at least 2 iterations");
    const Eigen::Index p = mean.size();
    const double c = mean.norm() + cfg.epsilon + 1.0;
    const int half = opts.iterations / 2;

    Vector beta = Vector::Zero(p);
    Vector best = beta;
    double best_obj = adversarial_objective(beta, mean, cfg);
    Vector grad(p);
    for (int k = 1; k <= opts.iterations; ++k) {
        grad = -mean;
        if (cfg.kind == EstimatorKind::adv_l2) {
            const double norm = beta.norm();
            if (norm > 0.0) grad += cfg.epsilon * beta / norm;
        } else if (cfg.kind == EstimatorKind::adv_linf) {
            for (Eigen::Index j = 0; j < p; ++j) {
                if (beta(j) > 0.0) grad(j) += cfg.epsilon;
                else if (beta(j) < 0.0) grad(j) -= cfg.epsilon;
            }
        }
        const double step = k <= half ? c / std::sqrt(static_cast<double>(k))
                                       : c / std::sqrt(static_cast<double>(half)) /
                                             static_cast<double>(k - half);
        beta -= step * grad;
        const double norm = beta.norm();
        if (norm > 1.0) beta /= norm;
        const double obj = adversarial_objective(beta, mean, cfg);
        if (obj < best_obj) {
            best_obj = obj;
            best = beta;
        }
    }
    const bool zero = best.norm() == 0.0;
    return FitResult{std::move(best), best_obj, zero};
}

inline FitResult oracle_fit(const LabeledDataset& ds, const EstimatorConfig& cfg,
                            OracleOptions opts = {}) {
    if (ds.dim() > kOracleMaxDim || ds.size() > kOracleMaxSamples) {
        throw ContractError("oracle_fit is limited to p <= 16 and n <= 64");
    }
    return oracle_minimize(empirical_mean_direction(ds), cfg, opts);
}

/// sign(<w, x_i>) per row, with sign(0) := +1.
inline Vector pseudo_label(const Vector& w_init, const Matrix& inputs) {
    if (!(w_init.norm() > 0.0)) {
        throw DegenerateClassifierError("pseudo_label needs a nonzero initial classifier");
    }
    if (inputs.cols() != w_init.size()) throw DimensionError("pseudo_label dimension mismatch");
    const Vector scores = inputs * w_init;
    return scores.unaryExpr([](double s) { return s >= 0.0 ? 1.0 : -1.0; });
}

/// Target head: normalized projection of the target mean onto span(W1).
inline Vector fit_target(const Vector& target_mean, const Representation& w1) {
    if (target_mean.size() != w1.ambient_dim()) throw DimensionError("fit_target dimension mismatch");
    Vector proj = w1.basis().transpose() * target_mean;
    const double norm = proj.norm();
    if (norm == 0.0) return Vector::Zero(w1.rank());
    return proj / norm;
}

inline Vector fit_target(const LabeledDataset& target, const Representation& w1) {
    return fit_target(empirical_mean_direction(target), w1);
}

}  // namespace xferlab
