#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <stdexcept>
#include <vector>

#include "cra/matrix.hpp"

namespace cra {

// Orthonormalizes the given vectors in order by modified Gram-Schmidt with a
// second re-orthogonalization pass per vector. A vector whose residual after
// projection onto the earlier basis has norm <= tol is dropped, so the input
// order decides which of two dependent vectors survives.
inline OrthonormalBasis qr_orthonormalize(const Matrix& vectors, double tol) {
    if (tol <= 0.0)
        throw std::invalid_argument("qr_orthonormalize: tol must be positive");
    if (vectors.cols() == 0)
        return OrthonormalBasis{Matrix(vectors.rows(), 0)};
    require_finite(vectors, "qr_orthonormalize");

    Matrix basis(vectors.rows(), vectors.cols());
    Eigen::Index kept = 0;
    for (Eigen::Index j = 0; j < vectors.cols(); ++j) {
        Vector v = vectors.col(j);
        for (int pass = 0; pass < 2; ++pass)
            for (Eigen::Index i = 0; i < kept; ++i)
                v -= basis.col(i).dot(v) * basis.col(i);
        double nrm = v.norm();
        if (nrm <= tol)
            continue;
        basis.col(kept++) = v / nrm;
    }
    return OrthonormalBasis{basis.leftCols(kept)};
}

inline OrthonormalBasis qr_orthonormalize(const Matrix& vectors) {
    double max_col = 0.0;
    for (Eigen::Index j = 0; j < vectors.cols(); ++j)
        max_col = std::max(max_col, vectors.col(j).norm());
    return qr_orthonormalize(vectors, 1e-10 * std::max(max_col, 1.0));
}

// Column-wise projection onto the orthogonal complement of span(B).
inline Matrix project_complement(const Matrix& m, const OrthonormalBasis& b) {
    if (b.empty())
        return m;
    if (b.ambient_dim() != m.rows())
        throw std::invalid_argument("project_complement: ambient dimension mismatch");
    require_finite(m, "project_complement");
    return m - b.vectors * (b.vectors.transpose() * m);
}

inline Vector project_complement(const Vector& v, const OrthonormalBasis& b) {
    if (b.empty())
        return v;
    if (b.ambient_dim() != v.size())
        throw std::invalid_argument("project_complement: ambient dimension mismatch");
    require_finite(v, "project_complement");
    return v - b.vectors * (b.vectors.transpose() * v);
}

// Singular values, nonincreasing. Always computed from M itself, never from
// the Gram matrix: squaring floors small values at sqrt(machine epsilon)
// relative, and rank deficiency must register well below that.
inline SpectralSummary singular_values(const Matrix& m) {
    require_finite(m, "singular_values");
    const Eigen::Index mindim = std::min(m.rows(), m.cols());
    Eigen::BDCSVD<Matrix> svd(m);
    const Vector& vals = svd.singularValues();
    std::vector<double> sv(static_cast<std::size_t>(mindim));
    for (Eigen::Index i = 0; i < mindim; ++i)
        sv[static_cast<std::size_t>(i)] = vals(i);
    return SpectralSummary{std::move(sv)};
}

// Minimum-norm least-squares solution of M x ~= y.
inline Vector pseudo_inverse_solve(const Matrix& m, const Vector& y) {
    if (m.rows() != y.size())
        throw std::invalid_argument("pseudo_inverse_solve: row count != rhs length");
    require_finite(m, "pseudo_inverse_solve");
    require_finite(y, "pseudo_inverse_solve");
    Eigen::CompleteOrthogonalDecomposition<Matrix> cod(m);
    return cod.solve(y);
}

}  // namespace cra
