#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <random>
#include <span>
#include <string>

#include "xferlab/error.hpp"
#include "xferlab/random.hpp"

namespace xferlab {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

inline constexpr double kOrthonormalTol = 1e-8;
inline constexpr double kDegenerateSingular = 1e-12;

/// A p x r matrix with orthonormal columns. Construction validates the Gram
/// matrix against the identity, so every live instance satisfies the invariant.
class Representation {
public:
    explicit Representation(Matrix basis) : basis_(std::move(basis)) {
        const auto p = basis_.rows();
        const auto r = basis_.cols();
        if (r < 1 || r > p) {
            throw DimensionError("representation needs 1 <= r <= p, got p=" + std::to_string(p) +
                                 " r=" + std::to_string(r));
        }
        const Matrix gram = basis_.transpose() * basis_;
        const double dev = (gram - Matrix::Identity(r, r)).cwiseAbs().maxCoeff();
        if (!(dev <= kOrthonormalTol)) {
            throw ContractError("columns are not orthonormal (max Gram deviation " +
                                std::to_string(dev) + ")");
        }
    }

    const Matrix& basis() const noexcept { return basis_; }
    Eigen::Index ambient_dim() const noexcept { return basis_.rows(); }
    Eigen::Index rank() const noexcept { return basis_.cols(); }

private:
    Matrix basis_;
};

namespace detail {

// Flip each column so its largest-magnitude entry is positive.
inline void canonicalize_signs(Matrix& u) {
    for (Eigen::Index j = 0; j < u.cols(); ++j) {
        Eigen::Index idx = 0;
        u.col(j).cwiseAbs().maxCoeff(&idx);
        if (u(idx, j) < 0.0) u.col(j) *= -1.0;
    }
}

}  // namespace detail

/// Haar-distributed orthonormal p x r frame: QR of a Gaussian matrix with
/// the signs of R's diagonal folded into Q.
inline Representation random_orthonormal(Eigen::Index p, Eigen::Index r, Rng& rng) {
    if (p < 1 || r < 1 || r > p) {
        throw DimensionError("random_orthonormal needs 1 <= r <= p, got p=" + std::to_string(p) +
                             " r=" + std::to_string(r));
    }
    std::normal_distribution<double> normal(0.0, 1.0);
    Matrix g(p, r);
    for (Eigen::Index j = 0; j < r; ++j)
        for (Eigen::Index i = 0; i < p; ++i) g(i, j) = normal(rng);

    Eigen::HouseholderQR<Matrix> qr(g);
    Matrix q = qr.householderQ() * Matrix::Identity(p, r);
    const Matrix& packed = qr.matrixQR();
    for (Eigen::Index j = 0; j < r; ++j) {
        if (packed(j, j) < 0.0) q.col(j) *= -1.0;
    }
    return Representation(std::move(q));
}

struct TruncatedSvd {
    Representation left;
    Vector singular_values;  // all min(p, T) values, nonincreasing
};

/// Top-r left singular vectors of `m` (p x T), together with the full
/// singular spectrum. Columns are sign-canonicalized.
inline TruncatedSvd truncated_svd(const Matrix& m, Eigen::Index r) {
    const auto p = m.rows();
    const auto t = m.cols();
    if (r < 1 || r > std::min(p, t)) {
        throw DimensionError("top-r SVD needs 1 <= r <= min(p, T), got r=" + std::to_string(r) +
                             " p=" + std::to_string(p) + " T=" + std::to_string(t));
    }
    Eigen::JacobiSVD<Matrix> svd(m, Eigen::ComputeThinU);
    const Vector& sv = svd.singularValues();
    if (!(sv(r - 1) >= kDegenerateSingular)) {
        const auto observed = static_cast<std::size_t>((sv.array() >= kDegenerateSingular).count());
        throw DegenerateRankError(static_cast<std::size_t>(r), observed);
    }
    Matrix u = svd.matrixU().leftCols(r);
    detail::canonicalize_signs(u);
    return TruncatedSvd{Representation(std::move(u)), sv};
}

inline Representation top_r_left_singular(const Matrix& m, Eigen::Index r) {
    return truncated_svd(m, r).left;
}

/// Frobenius norm of sin(Theta) between the column spans of `e` and `f`.
inline double sin_theta_dist(const Representation& e, const Representation& f) {
    if (e.ambient_dim() != f.ambient_dim() || e.rank() != f.rank()) {
        throw DimensionError("sin_theta_dist needs matching shapes");
    }
    // Residual form; r - ||E^T F||^2 loses everything below sqrt(machine eps).
    const Matrix residual = f.basis() - e.basis() * (e.basis().transpose() * f.basis());
    return residual.norm();
}

/// Principal angles in radians, ascending. Pairs cosines with sines of the
/// residual so that small angles keep full precision.
inline Vector principal_angles(const Representation& e, const Representation& f) {
    if (e.ambient_dim() != f.ambient_dim() || e.rank() != f.rank()) {
        throw DimensionError("principal_angles needs matching shapes");
    }
    const Matrix cross = e.basis().transpose() * f.basis();
    const Vector cosines = Eigen::JacobiSVD<Matrix>(cross).singularValues();
    const Vector sines = Eigen::JacobiSVD<Matrix>(f.basis() - e.basis() * cross).singularValues();
    const Eigen::Index r = cosines.size();
    Vector out(r);
    for (Eigen::Index i = 0; i < r; ++i) out(i) = std::atan2(sines(r - 1 - i), cosines(i));
    return out;
}

/// Number of singular values strictly above `tau`.
inline std::size_t rank_estimate(std::span<const double> singular_values, double tau) {
    for (std::size_t i = 1; i < singular_values.size(); ++i) {
        if (singular_values[i] > singular_values[i - 1]) {
            throw ContractError("singular values must be sorted nonincreasing");
        }
    }
    if (!singular_values.empty() && singular_values.back() < 0.0) {
        throw ContractError("singular values must be nonnegative");
    }
    return static_cast<std::size_t>(
        std::count_if(singular_values.begin(), singular_values.end(),
                      [tau](double s) { return s > tau; }));
}

}  // namespace xferlab
