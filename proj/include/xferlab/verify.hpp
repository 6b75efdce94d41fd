#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <random>
#include <vector>

#include "xferlab/datagen.hpp"
#include "xferlab/random.hpp"
#include "xferlab/train.hpp"

namespace xferlab {

/// Random small instances on which every closed-form fit is audited against
/// the projected-subgradient oracle.
struct VerifyPlan {
    std::size_t instances = 100;
    Eigen::Index p_min = 2;
    Eigen::Index p_max = 8;
    Eigen::Index n_max = 16;
    double eps_lo = 0.05;
    double eps_hi = 2.0;
    double mean_norm_max = 2.5;
    double noise_rho = 0.5;
    std::uint64_t seed = 0x5eed0001ULL;
};

inline constexpr double kVerifyGapTol = 1e-3;
inline constexpr double kVerifyDirectionTol = 1e-2;
inline constexpr double kVerifyMargin = 0.05;

struct VerifyInstance {
    LabeledDataset data;
    double epsilon = 0.0;
};

inline std::vector<VerifyInstance> make_verify_instances(const VerifyPlan& plan) {
    Rng rng = make_rng(plan.seed);
    std::uniform_int_distribution<Eigen::Index> pick_p(plan.p_min, plan.p_max);
    std::uniform_int_distribution<Eigen::Index> pick_n(1, plan.n_max);
    std::uniform_real_distribution<double> pick_eps(plan.eps_lo, plan.eps_hi);
    std::uniform_real_distribution<double> pick_norm(0.0, plan.mean_norm_max);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::bernoulli_distribution coin(0.5);

    std::vector<VerifyInstance> out;
    out.reserve(plan.instances);
    for (std::size_t k = 0; k < plan.instances; ++k) {
        const Eigen::Index p = pick_p(rng);
        const Eigen::Index n = pick_n(rng);
        const double eps = pick_eps(rng);
        Vector mu(p);
        for (Eigen::Index j = 0; j < p; ++j) mu(j) = normal(rng);
        mu *= pick_norm(rng) / mu.norm();
        VerifyInstance inst;
        inst.epsilon = eps;
        inst.data.inputs.resize(n, p);
        inst.data.labels.resize(n);
        for (Eigen::Index i = 0; i < n; ++i) {
            const double y = coin(rng) ? 1.0 : -1.0;
            inst.data.labels(i) = y;
            for (Eigen::Index j = 0; j < p; ++j) {
                inst.data.inputs(i, j) = y * mu(j) + plan.noise_rho * normal(rng);
            }
        }
        out.push_back(std::move(inst));
    }
    return out;
}

/// Closed-form fits under audit. Replaceable so a deliberately broken
/// variant can be checked to fail the audit.
struct ClosedFormFitters {
    std::function<FitResult(const Vector&)> standard = [](const Vector& m) { return fit_standard(m); };
    std::function<FitResult(const Vector&, double)> adv_l2 = [](const Vector& m, double e) {
        return fit_adv_l2(m, e);
    };
    std::function<FitResult(const Vector&, double)> adv_linf = [](const Vector& m, double e) {
        return fit_adv_linf(m, e);
    };
};

struct VerifyCheck {
    double closed_objective = 0.0;
    double oracle_objective = 0.0;
    double gap = 0.0;              // |closed - oracle|
    double direction_error = 0.0;  // |beta_closed - beta_oracle|
    bool direction_checked = false;
};

struct VerifyRow {
    std::size_t instance = 0;
    Eigen::Index p = 0;
    Eigen::Index n = 0;
    double epsilon = 0.0;
    double mean_norm = 0.0;
    double mean_max_abs = 0.0;
    std::array<VerifyCheck, 3> checks;  // standard, adv_l2, adv_linf
};

struct VerifySummary {
    std::vector<VerifyRow> rows;
    double max_gap = 0.0;
    double max_direction_error = 0.0;  // over checked rows only
    std::size_t direction_checks = 0;

    bool gaps_ok() const { return max_gap <= kVerifyGapTol; }
    bool directions_ok() const { return max_direction_error <= kVerifyDirectionTol; }
};

namespace detail {

// Direction comparisons only where the closed form is well separated from
// its threshold branch.
inline bool l2_direction_applies(const Vector& mean, double eps) {
    return std::abs(mean.norm() - eps) >= kVerifyMargin;
}

inline bool linf_direction_applies(const Vector& mean, double eps) {
    double min_surviving = std::numeric_limits<double>::infinity();
    for (Eigen::Index j = 0; j < mean.size(); ++j) {
        const double a = std::abs(mean(j));
        if (a > eps) min_surviving = std::min(min_surviving, a);
    }
    // All coordinates thresholded away: both sides must sit at zero.
    if (!std::isfinite(min_surviving)) return true;
    return min_surviving - eps >= kVerifyMargin;
}

inline VerifyCheck compare(const FitResult& closed, const FitResult& oracle, bool check_direction) {
    VerifyCheck c;
    c.closed_objective = closed.objective;
    c.oracle_objective = oracle.objective;
    c.gap = std::abs(closed.objective - oracle.objective);
    c.direction_error = (closed.beta - oracle.beta).norm();
    c.direction_checked = check_direction;
    return c;
}

}  // namespace detail

inline VerifySummary run_verify(const VerifyPlan& plan, const ClosedFormFitters& fitters = {},
                                OracleOptions oracle = {}) {
    VerifySummary summary;
    const auto instances = make_verify_instances(plan);
    for (std::size_t k = 0; k < instances.size(); ++k) {
        const auto& inst = instances[k];
        const Vector mean = empirical_mean_direction(inst.data);
        VerifyRow row;
        row.instance = k;
        row.p = inst.data.dim();
        row.n = inst.data.size();
        row.epsilon = inst.epsilon;
        row.mean_norm = mean.norm();
        row.mean_max_abs = mean.cwiseAbs().maxCoeff();

        const EstimatorConfig std_cfg{EstimatorKind::standard, 0.0};
        const EstimatorConfig l2_cfg{EstimatorKind::adv_l2, inst.epsilon};
        const EstimatorConfig linf_cfg{EstimatorKind::adv_linf, inst.epsilon};

        row.checks[0] = detail::compare(fitters.standard(mean), oracle_fit(inst.data, std_cfg, oracle),
                                        mean.norm() > 0.0);
        row.checks[1] = detail::compare(fitters.adv_l2(mean, inst.epsilon),
                                        oracle_fit(inst.data, l2_cfg, oracle),
                                        detail::l2_direction_applies(mean, inst.epsilon));
        row.checks[2] = detail::compare(fitters.adv_linf(mean, inst.epsilon),
                                        oracle_fit(inst.data, linf_cfg, oracle),
                                        detail::linf_direction_applies(mean, inst.epsilon));
        for (const auto& c : row.checks) {
            summary.max_gap = std::max(summary.max_gap, c.gap);
            if (c.direction_checked) {
                ++summary.direction_checks;
                summary.max_direction_error = std::max(summary.max_direction_error, c.direction_error);
            }
        }
        summary.rows.push_back(std::move(row));
    }
    return summary;
}

}  // namespace xferlab
