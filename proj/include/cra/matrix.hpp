#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <string>
#include <vector>

namespace cra {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Orthonormal set stored column-wise. Columns satisfy |<v_i,v_j>| <= 1e-10
// for i != j and | ||v_i|| - 1 | <= 1e-10 when produced by qr_orthonormalize.
struct OrthonormalBasis {
    Matrix vectors;  // ambient_dim x count; zero columns never stored

    Eigen::Index ambient_dim() const { return vectors.rows(); }
    Eigen::Index count() const { return vectors.cols(); }
    bool empty() const { return vectors.cols() == 0; }
};

struct SpectralSummary {
    std::vector<double> singular_values;  // nonincreasing, nonnegative
};

inline void require_finite(const Matrix& m, const std::string& what) {
    if (!m.allFinite())
        throw std::invalid_argument(what + ": non-finite entries");
}

inline void require_finite(const Vector& v, const std::string& what) {
    if (!v.allFinite())
        throw std::invalid_argument(what + ": non-finite entries");
}

// Scales every column to unit Euclidean norm.
inline Matrix unit_normalize_columns(const Matrix& m) {
    require_finite(m, "unit_normalize_columns");
    Matrix out = m;
    for (Eigen::Index j = 0; j < out.cols(); ++j) {
        double nrm = out.col(j).norm();
        if (nrm == 0.0)
            throw std::invalid_argument("unit_normalize_columns: zero column " + std::to_string(j));
        out.col(j) /= nrm;
    }
    return out;
}

}  // namespace cra
