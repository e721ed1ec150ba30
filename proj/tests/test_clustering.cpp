#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <set>
#include <vector>

#include "cra/clustering.hpp"
#include "cra/ensembles.hpp"
#include "cra/linalg.hpp"
#include "cra/rng.hpp"

namespace {

double wcss_of(const cra::Matrix& x, const cra::ClusterModel& model) {
    double obj = 0.0;
    for (Eigen::Index j = 0; j < x.cols(); ++j)
        obj += (x.col(j) - model.centroids.col(model.labels[static_cast<std::size_t>(j)]))
                   .squaredNorm();
    return obj;
}

// Best 2-cluster label agreement up to relabeling.
int agreement_two(const std::vector<int>& got, const std::vector<int>& truth) {
    int same = 0, flipped = 0;
    for (std::size_t j = 0; j < got.size(); ++j) {
        same += (got[j] == truth[j]);
        flipped += (got[j] == 1 - truth[j]);
    }
    return std::max(same, flipped);
}

cra::Matrix projector(const cra::OrthonormalBasis& b) {
    return b.vectors * b.vectors.transpose();
}

std::vector<double> principal_angles(const cra::Matrix& qa, const cra::Matrix& qb) {
    Eigen::JacobiSVD<cra::Matrix> svd(qa.transpose() * qb);
    std::vector<double> angles;
    for (Eigen::Index i = 0; i < svd.singularValues().size(); ++i) {
        double c = std::clamp(svd.singularValues()(i), 0.0, 1.0);
        angles.push_back(std::acos(c));
    }
    return angles;
}

}  // namespace

TEST_CASE("kmeans separates tight antipodal caps over 20 seeds") {
    const int n = 6, p = 40;
    cra::Vector center = cra::Vector::Zero(n);
    center(0) = 1.0;
    cra::CapEnsembleSpec spec;
    spec.caps.push_back({center, 0.9});
    spec.caps.push_back({-center, 0.9});
    spec.assignment = cra::round_robin_assignment(2, p);

    int agree = 0, total = 0;
    for (int seed = 0; seed < 20; ++seed) {
        auto [x, truth] = cra::generate_cap_matrix(spec, cra::Rng(1000 + seed));
        cra::Rng fit_rng(2000 + seed);
        cra::ClusterModel model = cra::kmeans_columns(x, 2, fit_rng);
        agree += agreement_two(model.labels, truth.labels);
        total += p;
    }
    CHECK(agree >= static_cast<int>(0.99 * total));
}

TEST_CASE("kmeans with one cluster returns the column mean") {
    cra::Rng rng(7);
    cra::Matrix x(4, 9);
    for (Eigen::Index j = 0; j < x.cols(); ++j)
        x.col(j) = cra::uniform_sphere(4, rng);
    cra::Rng fit_rng(8);
    cra::ClusterModel model = cra::kmeans_columns(x, 1, fit_rng);
    REQUIRE(model.q == 1);
    cra::Vector mean = x.rowwise().mean();
    CHECK((model.centroids.col(0) - mean).norm() <= 1e-12);
    for (int lab : model.labels)
        CHECK(lab == 0);
}

TEST_CASE("kmeans with q equal to p isolates every column") {
    cra::Rng rng(9);
    cra::Matrix x(5, 6);
    for (Eigen::Index j = 0; j < x.cols(); ++j)
        x.col(j) = cra::uniform_sphere(5, rng);
    cra::Rng fit_rng(10);
    cra::ClusterModel model = cra::kmeans_columns(x, 6, fit_rng);
    std::set<int> labels(model.labels.begin(), model.labels.end());
    CHECK(labels.size() == 6);
    CHECK(wcss_of(x, model) <= 1e-20);
}

TEST_CASE("kmeans rejects invalid arguments") {
    cra::Matrix x = cra::Matrix::Identity(3, 3);
    cra::Rng rng(1);
    CHECK_THROWS_AS(cra::kmeans_columns(x, 4, rng), std::invalid_argument);
    CHECK_THROWS_AS(cra::kmeans_columns(x, 0, rng), std::invalid_argument);
    CHECK_THROWS_AS(cra::kmeans_columns(x, 2, 0, 100, rng), std::invalid_argument);
}

TEST_CASE("more Lloyd iterations never increase the objective") {
    cra::Rng data_rng(11);
    cra::Matrix x(6, 30);
    for (Eigen::Index j = 0; j < x.cols(); ++j)
        x.col(j) = cra::uniform_sphere(6, data_rng);
    for (int seed = 0; seed < 5; ++seed) {
        cra::Rng short_rng(300 + seed);
        cra::Rng long_rng(300 + seed);
        // Same derived restart stream, so both runs share the seeding and the
        // longer run continues where the shorter one stopped.
        cra::ClusterModel one = cra::kmeans_columns(x, 4, 1, 1, short_rng);
        cra::ClusterModel many = cra::kmeans_columns(x, 4, 1, 100, long_rng);
        CHECK(wcss_of(x, many) <= wcss_of(x, one) + 1e-12);
    }
}

TEST_CASE("estimate_centroids computes member means") {
    cra::Matrix two_same(3, 2);
    two_same.col(0) << 0.0, 1.0, 0.0;
    two_same.col(1) << 0.0, 1.0, 0.0;
    cra::Matrix c1 = cra::estimate_centroids(two_same, {0, 0}, 1);
    CHECK((c1.col(0) - two_same.col(0)).norm() <= 1e-15);

    cra::Matrix e12 = cra::Matrix::Zero(3, 2);
    e12(0, 0) = 1.0;
    e12(1, 1) = 1.0;
    cra::Matrix c2 = cra::estimate_centroids(e12, {0, 0}, 1);
    CHECK(c2(0, 0) == Catch::Approx(0.5));
    CHECK(c2(1, 0) == Catch::Approx(0.5));
    CHECK(c2(2, 0) == Catch::Approx(0.0).margin(1e-15));
}

TEST_CASE("estimate_centroids rejects empty clusters and bad labels") {
    cra::Matrix x = cra::Matrix::Identity(3, 3);
    CHECK_THROWS_AS(cra::estimate_centroids(x, {0, 0, 0}, 2), std::invalid_argument);
    CHECK_THROWS_AS(cra::estimate_centroids(x, {0, 1}, 2), std::invalid_argument);
    CHECK_THROWS_AS(cra::estimate_centroids(x, {0, 1, 5}, 2), std::invalid_argument);
}

TEST_CASE("cap sample mean points at the cap center") {
    const int n = 8, p = 1000;
    cra::Rng rng(13);
    cra::Vector z = cra::uniform_sphere(n, rng);
    cra::CapEnsembleSpec spec;
    spec.caps.push_back({z, 0.6});
    spec.assignment.assign(p, 0);
    auto [x, truth] = cra::generate_cap_matrix(spec, cra::Rng(14));
    cra::Matrix centroid = cra::estimate_centroids(x, truth.labels, 1);
    cra::Vector dir = centroid.col(0) / centroid.col(0).norm();
    CHECK((dir - z).norm() < 0.05);
}

TEST_CASE("cluster subspace is invariant under label permutation") {
    cra::Rng rng(15);
    cra::Matrix x(5, 24);
    for (Eigen::Index j = 0; j < x.cols(); ++j)
        x.col(j) = cra::uniform_sphere(5, rng);
    cra::Rng fit_rng(16);
    cra::ClusterModel model = cra::kmeans_columns(x, 3, fit_rng);

    // Relabel 0->2, 1->0, 2->1 and rebuild; the projector must not move.
    std::vector<int> perm = {2, 0, 1};
    std::vector<int> relabeled(model.labels.size());
    for (std::size_t j = 0; j < model.labels.size(); ++j)
        relabeled[j] = perm[static_cast<std::size_t>(model.labels[j])];
    cra::Matrix centroids2 = cra::estimate_centroids(x, relabeled, 3);
    cra::OrthonormalBasis sub2 = cra::qr_orthonormalize(centroids2);
    CHECK((projector(model.subspace) - projector(sub2)).cwiseAbs().maxCoeff() <= 1e-9);
}

TEST_CASE("dependent centroids shrink the subspace below q") {
    cra::Matrix x = cra::Matrix::Zero(4, 3);
    x(0, 0) = 1.0;
    x(0, 1) = 1.0;
    x(0, 2) = 2.0;
    cra::Matrix centroids = cra::estimate_centroids(x, {0, 1, 1}, 2);
    cra::OrthonormalBasis sub = cra::qr_orthonormalize(centroids);
    CHECK(sub.count() == 1);
}

TEST_CASE("top_subspace captures a rank-one matrix exactly") {
    cra::Rng rng(17);
    cra::Vector u = cra::uniform_sphere(6, rng);
    cra::Vector v(10);
    for (int i = 0; i < 10; ++i) v(i) = rng.normal();
    cra::Matrix x = u * v.transpose();
    cra::ClusterModel model = cra::top_subspace(x, 1);
    REQUIRE(model.subspace.count() == 1);
    cra::Matrix res = x - projector(model.subspace) * x;
    CHECK(res.cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("top_subspace with full rank has zero projection residual") {
    cra::Rng rng(19);
    cra::Matrix x(6, 9);
    for (Eigen::Index j = 0; j < x.cols(); ++j)
        x.col(j) = cra::uniform_sphere(6, rng);
    cra::ClusterModel model = cra::top_subspace(x, 6);
    cra::Matrix res = x - projector(model.subspace) * x;
    CHECK(res.cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("top_subspace recovers the factor span of a factor-model design") {
    // Factor matrix built here, independent of the ensembles generator, so
    // the true factor span is available as an oracle.
    const int n = 250, p = 1000, q = 25;
    cra::Rng rng(21);
    cra::Matrix f(n, q);
    for (int j = 0; j < q; ++j) {
        double prev1 = 0.0, prev2 = 0.0;
        for (int t = 0; t < 500 + n; ++t) {
            double cur = 0.5 * prev1 + 0.3 * prev2 + rng.normal();
            prev2 = prev1;
            prev1 = cur;
            if (t >= 500)
                f(t - 500, j) = cur;
        }
    }
    cra::Matrix x(n, p);
    for (int j = 0; j < p; ++j) {
        cra::Vector loading(q);
        for (int k = 0; k < q; ++k)
            loading(k) = 2.0 * rng.normal();
        cra::Vector col = f * loading;
        for (int i = 0; i < n; ++i)
            col(i) += 0.1 * rng.normal();
        x.col(j) = col / col.norm();
    }

    cra::ClusterModel model = cra::top_subspace(x, q);
    cra::OrthonormalBasis f_basis = cra::qr_orthonormalize(f);
    REQUIRE(f_basis.count() == q);
    auto angles = principal_angles(f_basis.vectors, model.subspace.vectors);
    double mean_angle = 0.0;
    for (double a : angles)
        mean_angle += a;
    mean_angle /= static_cast<double>(angles.size());
    CHECK(mean_angle < 0.2);
}

TEST_CASE("top_subspace maximizes captured Frobenius energy") {
    cra::Rng rng(23);
    cra::Matrix x(5, 8);
    for (Eigen::Index j = 0; j < x.cols(); ++j)
        x.col(j) = cra::uniform_sphere(5, rng);
    cra::ClusterModel model = cra::top_subspace(x, 2);
    double captured = (model.subspace.vectors.transpose() * x).squaredNorm();

    // Full-spectrum reference: the best 2-dim capture is sigma1^2 + sigma2^2.
    Eigen::JacobiSVD<cra::Matrix> svd(x);
    double best = svd.singularValues()(0) * svd.singularValues()(0) +
                  svd.singularValues()(1) * svd.singularValues()(1);
    CHECK(captured == Catch::Approx(best).epsilon(1e-8));

    // No sampled 2-dim subspace does better.
    for (int rep = 0; rep < 200; ++rep) {
        cra::Matrix raw(5, 2);
        for (Eigen::Index j = 0; j < 2; ++j)
            raw.col(j) = cra::uniform_sphere(5, rng);
        cra::OrthonormalBasis cand = cra::qr_orthonormalize(raw);
        if (cand.count() != 2)
            continue;
        double got = (cand.vectors.transpose() * x).squaredNorm();
        CHECK(got <= captured + 1e-10);
    }
}

TEST_CASE("top_subspace validates q") {
    cra::Matrix x = cra::Matrix::Identity(4, 4);
    CHECK_THROWS_AS(cra::top_subspace(x, 0), std::invalid_argument);
    CHECK_THROWS_AS(cra::top_subspace(x, 5), std::invalid_argument);
}

TEST_CASE("wcss_curve reports one objective per requested q") {
    cra::Rng rng(25);
    cra::Matrix x(4, 12);
    for (Eigen::Index j = 0; j < x.cols(); ++j)
        x.col(j) = cra::uniform_sphere(4, rng);
    cra::Rng fit_rng(26);
    std::vector<double> curve = cra::wcss_curve(x, {1, 2, 4, 12}, 5, 50, fit_rng);
    REQUIRE(curve.size() == 4);
    for (double v : curve)
        CHECK(v >= 0.0);
    CHECK(curve[3] <= 1e-20);
    // With generous restarts the curve should trend downward in q.
    CHECK(curve[1] <= curve[0] + 1e-12);
    CHECK(curve[2] <= curve[1] + 1e-12);
}
