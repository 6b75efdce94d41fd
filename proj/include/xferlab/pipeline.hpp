#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "xferlab/datagen.hpp"
#include "xferlab/error.hpp"
#include "xferlab/subspace.hpp"
#include "xferlab/train.hpp"

namespace xferlab {

struct TransferOutput {
    Representation W1;
    Vector w2;
    std::vector<FitResult> per_task_fits;
    Vector singular_values;

    std::size_t suppressed_count() const {
        return static_cast<std::size_t>(std::count_if(per_task_fits.begin(), per_task_fits.end(),
                                                      [](const FitResult& f) { return f.suppressed; }));
    }

    /// The composed predictor W1 * w2 in R^p.
    Vector predictor() const { return W1.basis() * w2; }
};

/// Steps 1-3 of the representation-transfer procedure, starting from the
/// per-task empirical means (column t of `source_means` is mu_hat_t). Both
/// the plain and the adversarial algorithms route through here.
inline TransferOutput transfer_from_means(const Matrix& source_means, const Vector& target_mean,
                                          Eigen::Index r, const EstimatorConfig& cfg) {
    cfg.validate();
    const Eigen::Index T = source_means.cols();
    if (T < r) throw DimensionError("need at least r source tasks");

    std::vector<FitResult> fits;
    fits.reserve(static_cast<std::size_t>(T));
    Matrix stacked(source_means.rows(), T);
    std::size_t alive = 0;
    for (Eigen::Index t = 0; t < T; ++t) {
        fits.push_back(fit(source_means.col(t), cfg));
        stacked.col(t) = fits.back().beta;
        if (!fits.back().suppressed) ++alive;
    }
    if (cfg.adversarial() && alive < static_cast<std::size_t>(r)) {
        throw AllSuppressedError(cfg.epsilon, alive, static_cast<std::size_t>(r));
    }

    auto svd = truncated_svd(stacked, r);
    Vector w2 = fit_target(target_mean, svd.left);
    return TransferOutput{std::move(svd.left), std::move(w2), std::move(fits),
                          std::move(svd.singular_values)};
}

namespace detail {

inline Matrix stack_means(std::span<const LabeledDataset> sources) {
    if (sources.empty()) throw ContractError("need at least one source task");
    Matrix means(sources.front().dim(), static_cast<Eigen::Index>(sources.size()));
    for (std::size_t t = 0; t < sources.size(); ++t) {
        if (sources[t].dim() != means.rows()) throw DimensionError("source dimension mismatch");
        means.col(static_cast<Eigen::Index>(t)) = empirical_mean_direction(sources[t]);
    }
    return means;
}

}  // namespace detail

/// Standard per-task fits, top-r SVD, target head.
inline TransferOutput algorithm1(std::span<const LabeledDataset> sources,
                                 const LabeledDataset& target, Eigen::Index r) {
    return transfer_from_means(detail::stack_means(sources), empirical_mean_direction(target), r,
                               EstimatorConfig{});
}

/// As algorithm1, with the per-task fits replaced by the adversarial ones.
/// Suppressed tasks enter the SVD as zero columns.
inline TransferOutput algorithm2(std::span<const LabeledDataset> sources,
                                 const LabeledDataset& target, Eigen::Index r,
                                 const EstimatorConfig& cfg) {
    if (!cfg.adversarial()) throw ConfigError("algorithm2 requires an adversarial estimator");
    return transfer_from_means(detail::stack_means(sources), empirical_mean_direction(target), r,
                               cfg);
}

/// Labeled data of one task concatenated with its pseudo-labeled pool.
inline LabeledDataset augment_with_pseudo_labels(const LabeledDataset& labeled,
                                                 const Matrix& unlabeled) {
    if (unlabeled.rows() == 0) return labeled;
    if (unlabeled.cols() != labeled.dim()) throw DimensionError("unlabeled pool dimension mismatch");
    const FitResult init = fit_standard(labeled);
    const Vector pseudo = pseudo_label(init.beta, unlabeled);
    LabeledDataset aug;
    aug.inputs.resize(labeled.size() + unlabeled.rows(), labeled.dim());
    aug.inputs << labeled.inputs, unlabeled;
    aug.labels.resize(aug.inputs.rows());
    aug.labels << labeled.labels, pseudo;
    return aug;
}

struct PseudoLabelOutput {
    TransferOutput standard;
    std::optional<TransferOutput> adversarial;
};

/// Pseudo-label each unlabeled pool with the task's standard fit, then run
/// algorithm1 (and algorithm2 when `cfg` is adversarial) on the augmented
/// sources. Augmented sets are materialized one task at a time.
inline PseudoLabelOutput algorithm3(std::span<const LabeledDataset> labeled,
                                    std::span<const Matrix> unlabeled,
                                    const LabeledDataset& target, Eigen::Index r,
                                    const EstimatorConfig& cfg = {}) {
    if (labeled.size() != unlabeled.size()) {
        throw DimensionError("need one unlabeled pool per labeled source");
    }
    if (labeled.empty()) throw ContractError("need at least one source task");
    Matrix means(labeled.front().dim(), static_cast<Eigen::Index>(labeled.size()));
    for (std::size_t t = 0; t < labeled.size(); ++t) {
        means.col(static_cast<Eigen::Index>(t)) =
            empirical_mean_direction(augment_with_pseudo_labels(labeled[t], unlabeled[t]));
    }
    const Vector target_mean = empirical_mean_direction(target);
    PseudoLabelOutput out{transfer_from_means(means, target_mean, r, EstimatorConfig{}),
                          std::nullopt};
    if (cfg.adversarial()) out.adversarial = transfer_from_means(means, target_mean, r, cfg);
    return out;
}

struct EpsilonBand {
    double lo = 0.0;
    double hi = 0.0;
    double mid = 0.0;
};

/// [max weak-group |a_t|, min strong-group |a_t|] and its midpoint.
inline EpsilonBand epsilon_band(const TaskEnsemble& ens) {
    if (ens.snr_kind != SnrKind::two_group) {
        throw UnsupportedError("epsilon_band applies only to two_group ensembles");
    }
    double lo = 0.0;
    double hi = std::numeric_limits<double>::infinity();
    for (std::size_t t = 0; t < ens.source_count(); ++t) {
        const double norm = ens.task_vectors.col(static_cast<Eigen::Index>(t)).norm();
        if (ens.strong[t]) hi = std::min(hi, norm);
        else lo = std::max(lo, norm);
    }
    return EpsilonBand{lo, hi, 0.5 * (lo + hi)};
}

}  // namespace xferlab
