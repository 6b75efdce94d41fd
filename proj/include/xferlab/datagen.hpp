#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "xferlab/error.hpp"
#include "xferlab/random.hpp"
#include "xferlab/subspace.hpp"

namespace xferlab {

enum class SnrKind { uniform, two_group };
enum class SparsityKind { dense, row_sparse };
enum class NoiseKind { gaussian, bounded_uniform };

/// Task-norm profile. With `two_group`, the last floor(frac_strong * T)
/// source tasks form the strong group with norm alpha * base_norm.
struct SnrProfile {
    SnrKind kind = SnrKind::uniform;
    double base_norm = 1.0;
    double alpha = 1.0;
    double frac_strong = 0.5;
};

struct SparsitySpec {
    SparsityKind kind = SparsityKind::dense;
    std::size_t support_size = 0;  // only read for row_sparse
};

struct EnsembleSpec {
    std::size_t p = 0;
    std::size_t r = 0;
    std::size_t T = 0;
    SnrProfile snr;
    SparsitySpec sparsity;
    double noise_rho = 1.0;
    NoiseKind noise_kind = NoiseKind::gaussian;
    double target_norm = 1.0;

    std::size_t strong_count() const {
        return snr.kind == SnrKind::two_group
                   ? static_cast<std::size_t>(std::floor(snr.frac_strong * static_cast<double>(T)))
                   : 0;
    }

    void validate() const {
        if (p < 1 || r < 1 || T < 1) throw ConfigError("ensemble needs p, r, T >= 1");
        if (2 * r > std::min(p, T)) {
            throw ConfigError("ensemble needs 2r <= min(p, T), got p=" + std::to_string(p) +
                              " r=" + std::to_string(r) + " T=" + std::to_string(T));
        }
        if (!(snr.base_norm > 0.0)) throw ConfigError("snr.base_norm must be positive");
        if (snr.kind == SnrKind::two_group) {
            if (!(snr.alpha > 1.0)) throw ConfigError("two_group snr needs alpha > 1");
            if (!(snr.frac_strong > 0.0 && snr.frac_strong < 1.0)) {
                throw ConfigError("snr.frac_strong must lie in (0, 1)");
            }
            const auto k = strong_count();
            if (k < 1 || k > T - 1) {
                throw ConfigError("two_group snr needs 1 <= floor(frac_strong * T) <= T - 1");
            }
        }
        if (sparsity.kind == SparsityKind::row_sparse &&
            (sparsity.support_size < r || sparsity.support_size > p)) {
            throw ConfigError("row_sparse needs r <= support_size <= p");
        }
        if (!(noise_rho > 0.0)) throw ConfigError("noise rho must be positive");
        if (!(target_norm > 0.0)) throw ConfigError("target_norm must be positive");
    }
};

/// Ground-truth generative model. Column t of `task_vectors` is a_t; the
/// last column (index T) is the target task.
struct TaskEnsemble {
    Representation B;
    Matrix task_vectors;  // r x (T + 1)
    std::vector<bool> strong;  // size T; all false for uniform profiles
    SnrKind snr_kind = SnrKind::uniform;
    double noise_rho = 1.0;
    NoiseKind noise_kind = NoiseKind::gaussian;

    std::size_t source_count() const { return static_cast<std::size_t>(task_vectors.cols()) - 1; }
    std::size_t target_index() const { return source_count(); }
    Eigen::Index p() const { return B.ambient_dim(); }
    Eigen::Index r() const { return B.rank(); }

    /// mu_t = B a_t
    Vector mean(std::size_t t) const {
        if (t > source_count()) throw IndexError("task index " + std::to_string(t) + " out of range");
        return B.basis() * task_vectors.col(static_cast<Eigen::Index>(t));
    }
};

struct LabeledDataset {
    Matrix inputs;  // n x p
    Vector labels;  // n, entries exactly +-1

    Eigen::Index size() const noexcept { return inputs.rows(); }
    Eigen::Index dim() const noexcept { return inputs.cols(); }
};

inline constexpr int kDiversityRetries = 100;

/// sigma_r(M^T M / T) for M the r x T matrix of normalized source directions.
inline double task_diversity(const TaskEnsemble& ens) {
    const auto t = static_cast<Eigen::Index>(ens.source_count());
    const auto r = ens.r();
    if (t < r) throw DimensionError("task_diversity needs T >= r");
    Matrix m = ens.task_vectors.leftCols(t);
    for (Eigen::Index j = 0; j < t; ++j) m.col(j).normalize();
    // The nonzero spectrum of M^T M equals that of M M^T (r x r).
    const Matrix gram = (m * m.transpose()) / static_cast<double>(t);
    Eigen::SelfAdjointEigenSolver<Matrix> eig(gram, Eigen::EigenvaluesOnly);
    return std::max(0.0, eig.eigenvalues()(0));
}

namespace detail {

inline Vector sphere_direction(Eigen::Index r, Rng& rng) {
    std::normal_distribution<double> normal(0.0, 1.0);
    Vector v(r);
    do {
        for (Eigen::Index i = 0; i < r; ++i) v(i) = normal(rng);
    } while (v.norm() == 0.0);
    return v.normalized();
}

inline void fill_noise(Eigen::Ref<Matrix> out, double rho, NoiseKind kind, Rng& rng) {
    if (kind == NoiseKind::gaussian) {
        std::normal_distribution<double> normal(0.0, rho);
        for (Eigen::Index j = 0; j < out.cols(); ++j)
            for (Eigen::Index i = 0; i < out.rows(); ++i) out(i, j) = normal(rng);
    } else {
        const double half = rho * std::sqrt(3.0);
        std::uniform_real_distribution<double> unif(-half, half);
        for (Eigen::Index j = 0; j < out.cols(); ++j)
            for (Eigen::Index i = 0; i < out.rows(); ++i) out(i, j) = unif(rng);
    }
}

// Draws labels and inputs for task t; inputs are row-per-sample.
inline void draw_task(const TaskEnsemble& ens, std::size_t t, Eigen::Index n, Rng& rng,
                      Matrix& inputs, Vector& labels) {
    const Vector mu = ens.mean(t);
    std::bernoulli_distribution coin(0.5);
    labels.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) labels(i) = coin(rng) ? 1.0 : -1.0;
    inputs.resize(n, ens.p());
    fill_noise(inputs, ens.noise_rho, ens.noise_kind, rng);
    inputs.noalias() += labels * mu.transpose();
}

}  // namespace detail

inline TaskEnsemble make_ensemble(const EnsembleSpec& spec, Rng& rng) {
    spec.validate();
    const auto p = static_cast<Eigen::Index>(spec.p);
    const auto r = static_cast<Eigen::Index>(spec.r);
    const auto T = static_cast<Eigen::Index>(spec.T);

    Matrix basis = Matrix::Zero(p, r);
    if (spec.sparsity.kind == SparsityKind::dense) {
        basis = random_orthonormal(p, r, rng).basis();
    } else {
        std::vector<Eigen::Index> rows(spec.p);
        std::iota(rows.begin(), rows.end(), Eigen::Index{0});
        std::shuffle(rows.begin(), rows.end(), rng);
        rows.resize(spec.sparsity.support_size);
        std::sort(rows.begin(), rows.end());
        const auto s = static_cast<Eigen::Index>(rows.size());
        const Matrix local = random_orthonormal(s, r, rng).basis();
        for (Eigen::Index k = 0; k < s; ++k) basis.row(rows[k]) = local.row(k);
    }

    const std::size_t strong_count = spec.strong_count();
    std::vector<bool> strong(spec.T, false);
    for (std::size_t t = spec.T - strong_count; t < spec.T; ++t) strong[t] = true;

    TaskEnsemble ens{Representation(std::move(basis)), Matrix(r, T + 1), std::move(strong),
                     spec.snr.kind, spec.noise_rho, spec.noise_kind};

    const double floor = 0.5 / static_cast<double>(spec.r);
    double best = -1.0;
    Matrix best_vectors;
    for (int attempt = 0; attempt < kDiversityRetries; ++attempt) {
        for (Eigen::Index t = 0; t < T; ++t) {
            const double norm = ens.strong[static_cast<std::size_t>(t)]
                                    ? spec.snr.alpha * spec.snr.base_norm
                                    : spec.snr.base_norm;
            ens.task_vectors.col(t) = norm * detail::sphere_direction(r, rng);
        }
        const double div = task_diversity(ens);
        if (div >= floor) {
            ens.task_vectors.col(T) = spec.target_norm * detail::sphere_direction(r, rng);
            return ens;
        }
        if (div > best) best = div;
    }
    throw DiversityError(best, floor);
}

inline LabeledDataset sample_dataset(const TaskEnsemble& ens, std::size_t t, Eigen::Index n,
                                     Rng& rng) {
    if (t > ens.source_count()) {
        throw IndexError("task index " + std::to_string(t) + " out of range [0, " +
                         std::to_string(ens.source_count()) + "]");
    }
    if (n < 1) throw ContractError("sample_dataset needs n >= 1");
    LabeledDataset ds;
    detail::draw_task(ens, t, n, rng, ds.inputs, ds.labels);
    return ds;
}

/// Inputs drawn from the task mixture; labels are drawn and discarded.
inline Matrix sample_unlabeled(const TaskEnsemble& ens, std::size_t t, Eigen::Index n_u, Rng& rng) {
    if (t > ens.source_count()) {
        throw IndexError("task index " + std::to_string(t) + " out of range [0, " +
                         std::to_string(ens.source_count()) + "]");
    }
    if (n_u < 0) throw ContractError("sample_unlabeled needs n_u >= 0");
    Matrix inputs;
    Vector labels;
    detail::draw_task(ens, t, n_u, rng, inputs, labels);
    return inputs;
}

}  // namespace xferlab
