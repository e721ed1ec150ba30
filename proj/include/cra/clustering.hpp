#pragma once

#include <Eigen/Dense>
#include <iostream>
#include <limits>
#include <stdexcept>
#include <vector>

#include "cra/linalg.hpp"
#include "cra/matrix.hpp"
#include "cra/rng.hpp"

namespace cra {

// Column partition plus the centroid subspace used by the removal step.
// centroids is n x q; subspace spans range(centroids) and may have fewer
// than q vectors when centroids are dependent.
struct ClusterModel {
    int q = 0;
    std::vector<int> labels;   // labels[j] in [0, q)
    Matrix centroids;
    OrthonormalBasis subspace;
};

// Mean of member columns per label. Every label in [0, q) must occur.
inline Matrix estimate_centroids(const Matrix& x, const std::vector<int>& labels, int q) {
    if (static_cast<Eigen::Index>(labels.size()) != x.cols())
        throw std::invalid_argument("estimate_centroids: labels do not cover all columns");
    Matrix centroids = Matrix::Zero(x.rows(), q);
    std::vector<int> counts(static_cast<std::size_t>(q), 0);
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
        int c = labels[static_cast<std::size_t>(j)];
        if (c < 0 || c >= q)
            throw std::invalid_argument("estimate_centroids: label out of range");
        centroids.col(c) += x.col(j);
        ++counts[static_cast<std::size_t>(c)];
    }
    for (int c = 0; c < q; ++c) {
        if (counts[static_cast<std::size_t>(c)] == 0)
            throw std::invalid_argument("estimate_centroids: empty cluster " + std::to_string(c));
        centroids.col(c) /= static_cast<double>(counts[static_cast<std::size_t>(c)]);
    }
    return centroids;
}

namespace detail {

inline double squared_distance(const Matrix& x, Eigen::Index j, const Matrix& centers, int c) {
    return (x.col(j) - centers.col(c)).squaredNorm();
}

// k-means++ seeding: first center uniform, later centers with probability
// proportional to squared distance from the nearest chosen center.
inline Matrix kmeanspp_seed(const Matrix& x, int q, Rng& rng) {
    const Eigen::Index p = x.cols();
    Matrix centers(x.rows(), q);
    Eigen::Index first = static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(p)));
    centers.col(0) = x.col(first);
    Vector d2(p);
    for (Eigen::Index j = 0; j < p; ++j)
        d2(j) = (x.col(j) - centers.col(0)).squaredNorm();
    for (int c = 1; c < q; ++c) {
        double total = d2.sum();
        Eigen::Index pick = 0;
        if (total > 0.0) {
            double u = rng.uniform01() * total;
            double acc = 0.0;
            pick = p - 1;
            for (Eigen::Index j = 0; j < p; ++j) {
                acc += d2(j);
                if (u < acc) { pick = j; break; }
            }
        } else {
            pick = static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(p)));
        }
        centers.col(c) = x.col(pick);
        for (Eigen::Index j = 0; j < p; ++j)
            d2(j) = std::min(d2(j), (x.col(j) - centers.col(c)).squaredNorm());
    }
    return centers;
}

struct KmeansRun {
    std::vector<int> labels;
    Matrix centers;
    double objective = std::numeric_limits<double>::infinity();
};

inline KmeansRun kmeans_single(const Matrix& x, int q, int max_iter, Rng& rng) {
    const Eigen::Index p = x.cols();
    Matrix centers = kmeanspp_seed(x, q, rng);
    std::vector<int> labels(static_cast<std::size_t>(p), -1);
    for (int iter = 0; iter < max_iter; ++iter) {
        bool changed = false;
        for (Eigen::Index j = 0; j < p; ++j) {
            int best = 0;
            double best_d = squared_distance(x, j, centers, 0);
            for (int c = 1; c < q; ++c) {
                double d = squared_distance(x, j, centers, c);
                if (d < best_d) { best_d = d; best = c; }
            }
            if (labels[static_cast<std::size_t>(j)] != best) {
                labels[static_cast<std::size_t>(j)] = best;
                changed = true;
            }
        }
        // Recompute means; an emptied cluster is reseeded from the column
        // farthest from its current center.
        Matrix sums = Matrix::Zero(x.rows(), q);
        std::vector<int> counts(static_cast<std::size_t>(q), 0);
        for (Eigen::Index j = 0; j < p; ++j) {
            sums.col(labels[static_cast<std::size_t>(j)]) += x.col(j);
            ++counts[static_cast<std::size_t>(labels[static_cast<std::size_t>(j)])];
        }
        for (int c = 0; c < q; ++c) {
            if (counts[static_cast<std::size_t>(c)] > 0) {
                centers.col(c) = sums.col(c) / static_cast<double>(counts[static_cast<std::size_t>(c)]);
            } else {
                Eigen::Index far = 0;
                double far_d = -1.0;
                for (Eigen::Index j = 0; j < p; ++j) {
                    int cj = labels[static_cast<std::size_t>(j)];
                    double d = squared_distance(x, j, centers, cj);
                    if (d > far_d) { far_d = d; far = j; }
                }
                centers.col(c) = x.col(far);
                changed = true;
            }
        }
        if (!changed)
            break;
    }
    double obj = 0.0;
    for (Eigen::Index j = 0; j < p; ++j)
        obj += squared_distance(x, j, centers, labels[static_cast<std::size_t>(j)]);
    return KmeansRun{std::move(labels), std::move(centers), obj};
}

}  // namespace detail

// Lloyd iterations with k-means++ seeding over `restarts` independent runs;
// keeps the run with the lowest within-cluster sum of squares (ties go to
// the earliest restart). Final centroids are raw member means.
inline ClusterModel kmeans_columns(const Matrix& x, int q, int restarts, int max_iter, Rng& rng) {
    if (q < 1 || q > x.cols())
        throw std::invalid_argument("kmeans_columns: need 1 <= q <= column count");
    if (restarts < 1 || max_iter < 1)
        throw std::invalid_argument("kmeans_columns: restarts and max_iter must be positive");
    require_finite(x, "kmeans_columns");
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
        if (std::abs(x.col(j).norm() - 1.0) > 1e-6) {
            std::cerr << "kmeans_columns: warning: column " << j
                      << " is not unit norm; proceeding\n";
            break;
        }
    }

    detail::KmeansRun best;
    for (int r = 0; r < restarts; ++r) {
        Rng run_rng = rng.derive({0x6b6du, static_cast<std::uint64_t>(r)});
        detail::KmeansRun run = detail::kmeans_single(x, q, max_iter, run_rng);
        if (run.objective < best.objective)
            best = std::move(run);
    }

    ClusterModel model;
    model.q = q;
    model.labels = std::move(best.labels);
    model.centroids = estimate_centroids(x, model.labels, q);
    model.subspace = qr_orthonormalize(model.centroids);
    return model;
}

inline ClusterModel kmeans_columns(const Matrix& x, int q, Rng& rng) {
    return kmeans_columns(x, q, 10, 100, rng);
}

// Subspace of the top-q left singular vectors. Labels are a nearest-centroid
// assignment against the scaled singular vectors and are informational only;
// downstream consumers use the subspace.
inline ClusterModel top_subspace(const Matrix& x, int q) {
    if (q < 1 || q > std::min(x.rows(), x.cols()))
        throw std::invalid_argument("top_subspace: need 1 <= q <= min(n, p)");
    require_finite(x, "top_subspace");

    Eigen::BDCSVD<Matrix> svd(x, Eigen::ComputeThinU);
    Matrix u = svd.matrixU().leftCols(q);
    Vector sv = svd.singularValues().head(q);

    ClusterModel model;
    model.q = q;
    model.centroids = u * sv.asDiagonal();
    model.subspace = OrthonormalBasis{u};
    model.labels.assign(static_cast<std::size_t>(x.cols()), 0);
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
        int best = 0;
        double best_d = std::numeric_limits<double>::infinity();
        for (int c = 0; c < q; ++c) {
            double d = (x.col(j) - model.centroids.col(c)).squaredNorm();
            if (d < best_d) { best_d = d; best = c; }
        }
        model.labels[static_cast<std::size_t>(j)] = best;
    }
    return model;
}

// Scree diagnostic for choosing q by hand: within-cluster sum of squares for
// each candidate q. Never applied automatically.
inline std::vector<double> wcss_curve(const Matrix& x, const std::vector<int>& qs,
                                      int restarts, int max_iter, Rng& rng) {
    std::vector<double> out;
    out.reserve(qs.size());
    for (std::size_t i = 0; i < qs.size(); ++i) {
        Rng q_rng = rng.derive({0x77u, static_cast<std::uint64_t>(i)});
        ClusterModel m = kmeans_columns(x, qs[i], restarts, max_iter, q_rng);
        double obj = 0.0;
        for (Eigen::Index j = 0; j < x.cols(); ++j)
            obj += (x.col(j) - m.centroids.col(m.labels[static_cast<std::size_t>(j)])).squaredNorm();
        out.push_back(obj);
    }
    return out;
}

}  // namespace cra
