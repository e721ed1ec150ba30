#pragma once

#include <cmath>
#include <stdexcept>
#include <utility>
#include <vector>

#include "cra/clustering.hpp"
#include "cra/linalg.hpp"
#include "cra/matrix.hpp"
#include "cra/rng.hpp"
#include "cra/solvers.hpp"

namespace cra {

enum class ClusteringMethod { kmeans, top_subspace };

struct CraTransform {
    OrthonormalBasis subspace;
    Matrix x_tilde;                 // n x p; dropped columns are zero
    std::vector<double> normalizers;  // ||P X_i||_2 for retained i, 0 for dropped
    std::vector<Eigen::Index> dropped_columns;

    bool is_dropped(Eigen::Index i) const {
        for (Eigen::Index d : dropped_columns)
            if (d == i)
                return true;
        return false;
    }
};

struct CraEstimate {
    Vector gamma_hat;
    Vector beta_hat;
    CraTransform transform;
    RecoveryResult solver_result;
};

struct CraOptions {
    ClusteringMethod clustering = ClusteringMethod::kmeans;
    int kmeans_restarts = 10;
    int kmeans_max_iter = 100;
    std::uint64_t cluster_seed = 0x636c7573;
    double drop_tol = -1.0;  // negative: per-column default 1e-8 * ||X_i||
    SolverOptions solver;
};

// Project every column onto the orthogonal complement of the centroid
// subspace and normalize. Columns whose projection nearly vanishes carry no
// usable direction; they are dropped from the solve and estimated as zero.
inline CraTransform build_transform(const Matrix& x, const ClusterModel& cluster,
                                    double drop_tol = -1.0) {
    if (cluster.subspace.count() >= x.rows())
        throw std::invalid_argument("build_transform: subspace dimension must be below n");
    require_finite(x, "build_transform");

    CraTransform t;
    t.subspace = cluster.subspace;
    t.x_tilde = project_complement(x, cluster.subspace);
    t.normalizers.assign(static_cast<std::size_t>(x.cols()), 0.0);
    for (Eigen::Index i = 0; i < x.cols(); ++i) {
        const double norm = t.x_tilde.col(i).norm();
        const double tol = (drop_tol >= 0.0) ? drop_tol : 1e-8 * x.col(i).norm();
        if (norm <= tol) {
            t.dropped_columns.push_back(i);
            t.x_tilde.col(i).setZero();
        } else {
            t.normalizers[static_cast<std::size_t>(i)] = norm;
            t.x_tilde.col(i) /= norm;
        }
    }
    if (static_cast<Eigen::Index>(t.dropped_columns.size()) == x.cols())
        throw std::runtime_error("design entirely inside centroid subspace");
    return t;
}

namespace detail {

// Retained-column compaction for the solver, plus scatter of the solution
// back to full length.
inline RecoveryResult solve_on_retained(const CraTransform& t, const Vector& y_proj,
                                        double eta, const SolverOptions& opts,
                                        Vector* gamma_full) {
    const Eigen::Index p = t.x_tilde.cols();
    std::vector<Eigen::Index> retained;
    retained.reserve(static_cast<std::size_t>(p));
    for (Eigen::Index i = 0; i < p; ++i)
        if (t.normalizers[static_cast<std::size_t>(i)] > 0.0)
            retained.push_back(i);
    Matrix sub(t.x_tilde.rows(), static_cast<Eigen::Index>(retained.size()));
    for (std::size_t k = 0; k < retained.size(); ++k)
        sub.col(static_cast<Eigen::Index>(k)) = t.x_tilde.col(retained[k]);
    RecoveryResult res = bpdn(sub, y_proj, eta, opts);
    *gamma_full = Vector::Zero(p);
    for (std::size_t k = 0; k < retained.size(); ++k)
        (*gamma_full)(retained[k]) = res.coefficients(static_cast<Eigen::Index>(k));
    return res;
}

}  // namespace detail

// Solve the decorrelated problem for a prebuilt transform and undo the
// normalization entrywise.
inline CraEstimate run_cra_with_transform(const CraTransform& transform, const Vector& y,
                                          double eta, const SolverOptions& opts = {}) {
    if (y.size() != transform.x_tilde.rows())
        throw std::invalid_argument("run_cra: observation length mismatch");
    if (eta < 0.0)
        throw std::invalid_argument("run_cra: eta must be nonnegative");

    CraEstimate est;
    est.transform = transform;
    const Vector y_proj = project_complement(y, transform.subspace);
    est.solver_result = detail::solve_on_retained(transform, y_proj, eta, opts, &est.gamma_hat);
    est.beta_hat = Vector::Zero(est.gamma_hat.size());
    for (Eigen::Index i = 0; i < est.gamma_hat.size(); ++i) {
        const double n_i = transform.normalizers[static_cast<std::size_t>(i)];
        if (n_i > 0.0)
            est.beta_hat(i) = est.gamma_hat(i) / n_i;
    }
    return est;
}

inline CraEstimate run_cra_with_model(const Matrix& x, const Vector& y,
                                      const ClusterModel& cluster, double eta,
                                      const CraOptions& opts = {}) {
    return run_cra_with_transform(build_transform(x, cluster, opts.drop_tol), y, eta,
                                  opts.solver);
}

// The full pipeline: cluster the columns, remove the centroid subspace,
// solve the normalized complement problem, map back. q = 0 skips the
// removal entirely and reduces to a plain solve on (x, y).
inline CraEstimate run_cra(const Matrix& x, const Vector& y, int q, double eta,
                           const CraOptions& opts = {}) {
    if (q < 0 || q >= x.rows())
        throw std::invalid_argument("run_cra: need 0 <= q < n");
    ClusterModel cluster;
    if (q == 0) {
        cluster.q = 0;
        cluster.labels.assign(static_cast<std::size_t>(x.cols()), 0);
        cluster.centroids = Matrix(x.rows(), 0);
        cluster.subspace.vectors = Matrix(x.rows(), 0);
    } else if (opts.clustering == ClusteringMethod::kmeans) {
        Rng rng(opts.cluster_seed);
        cluster = kmeans_columns(x, q, opts.kmeans_restarts, opts.kmeans_max_iter, rng);
    } else {
        cluster = top_subspace(x, q);
    }
    return run_cra_with_model(x, y, cluster, eta, opts);
}

// Worst-case reconstruction inflation: small complement projections amplify
// solver error when the normalization is undone.
inline double error_inflation_factor(const CraTransform& transform) {
    double worst = 0.0;
    bool any = false;
    for (double n_i : transform.normalizers) {
        if (n_i > 0.0) {
            any = true;
            worst = std::max(worst, 1.0 / n_i);
        }
    }
    if (!any)
        throw std::invalid_argument("error_inflation_factor: no retained columns");
    return worst;
}

}  // namespace cra
