#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <vector>

#include "cra/ensembles.hpp"
#include "cra/linalg.hpp"
#include "cra/rng.hpp"

namespace {

// One-sample Kolmogorov-Smirnov statistic against a reference CDF.
double ks_statistic(std::vector<double> samples, double (*cdf)(double, double), double t0) {
    std::sort(samples.begin(), samples.end());
    const double n = static_cast<double>(samples.size());
    double d = 0.0;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        double f = cdf(samples[i], t0);
        d = std::max(d, std::abs((static_cast<double>(i) + 1.0) / n - f));
        d = std::max(d, std::abs(static_cast<double>(i) / n - f));
    }
    return d;
}

// Two-sample Kolmogorov-Smirnov statistic.
double ks_two_sample(std::vector<double> a, std::vector<double> b) {
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    double d = 0.0;
    std::size_t i = 0, j = 0;
    while (i < a.size() && j < b.size()) {
        if (a[i] <= b[j]) ++i; else ++j;
        double fa = static_cast<double>(i) / static_cast<double>(a.size());
        double fb = static_cast<double>(j) / static_cast<double>(b.size());
        d = std::max(d, std::abs(fa - fb));
    }
    return d;
}

// Height CDF on [t0, 1] for ambient dimension 3: flat density.
double cdf_n3(double t, double t0) {
    return std::clamp((t - t0) / (1.0 - t0), 0.0, 1.0);
}

// Height CDF for ambient dimension 5: density (1-t^2), antiderivative
// t - t^3/3, normalized over [t0, 1]. Closed form, independent of the
// library's tabulated inverse CDF.
double cdf_n5(double t, double t0) {
    auto prim = [](double u) { return u - u * u * u / 3.0; };
    return std::clamp((prim(t) - prim(t0)) / (prim(1.0) - prim(t0)), 0.0, 1.0);
}

cra::Vector basis_vector(int n, int i) {
    cra::Vector v = cra::Vector::Zero(n);
    v(i) = 1.0;
    return v;
}

}  // namespace

TEST_CASE("uniform sphere in one dimension is a fair coin") {
    cra::Rng rng(101);
    int plus = 0;
    for (int i = 0; i < 1000; ++i) {
        cra::Vector v = cra::uniform_sphere(1, rng);
        REQUIRE(std::abs(std::abs(v(0)) - 1.0) <= 1e-12);
        plus += (v(0) > 0.0);
    }
    CHECK(std::abs(plus / 1000.0 - 0.5) <= 0.05);
}

TEST_CASE("uniform sphere coordinates are centered") {
    cra::Rng rng(102);
    cra::Vector mean = cra::Vector::Zero(3);
    for (int i = 0; i < 10000; ++i)
        mean += cra::uniform_sphere(3, rng);
    mean /= 10000.0;
    for (int c = 0; c < 3; ++c)
        CHECK(std::abs(mean(c)) <= 0.05);
}

TEST_CASE("uniform sphere output has exact unit norm") {
    cra::Rng rng(103);
    for (int i = 0; i < 100; ++i)
        CHECK(std::abs(cra::uniform_sphere(5, rng).norm() - 1.0) <= 1e-12);
    CHECK_THROWS_AS(cra::uniform_sphere(0, rng), std::invalid_argument);
}

TEST_CASE("near-full cap degenerates to the uniform sphere") {
    cra::Rng rng(104);
    cra::CapSpec spec{basis_vector(4, 0), -1.0 + 1e-9};
    cra::CapHeightTable table(4, spec.height);
    cra::Vector mean = cra::Vector::Zero(4);
    for (int i = 0; i < 20000; ++i)
        mean += cra::sample_cap(spec, table, rng);
    mean /= 20000.0;
    for (int c = 0; c < 4; ++c)
        CHECK(std::abs(mean(c)) <= 0.05);
}

TEST_CASE("every cap sample satisfies the height constraint") {
    cra::Rng rng(105);
    cra::CapSpec spec{basis_vector(6, 0), 0.9};
    cra::CapHeightTable table(6, spec.height);
    for (int i = 0; i < 2000; ++i) {
        cra::Vector x = cra::sample_cap(spec, table, rng);
        REQUIRE(x(0) >= 0.9 - 1e-12);
        REQUIRE(std::abs(x.norm() - 1.0) <= 1e-12);
    }
}

TEST_CASE("cap heights in dimension three are uniform") {
    cra::Rng rng(106);
    cra::CapSpec spec{basis_vector(3, 0), 0.5};
    cra::CapHeightTable table(3, spec.height);
    std::vector<double> heights;
    for (int i = 0; i < 10000; ++i)
        heights.push_back(cra::sample_cap(spec, table, rng)(0));
    CHECK(ks_statistic(std::move(heights), cdf_n3, 0.5) < 0.025);
}

TEST_CASE("tabulated cap heights match the closed-form CDF in dimension five") {
    // n=5 goes through the numeric inverse-CDF table; the reference CDF here
    // is the exact antiderivative of (1-t^2).
    cra::Rng rng(107);
    cra::CapSpec spec{basis_vector(5, 0), 0.3};
    cra::CapHeightTable table(5, spec.height);
    std::vector<double> heights;
    for (int i = 0; i < 10000; ++i)
        heights.push_back(cra::sample_cap(spec, table, rng)(0));
    CHECK(ks_statistic(std::move(heights), cdf_n5, 0.3) < 0.025);
}

TEST_CASE("cap sampling is rotation equivariant") {
    const int n = 6, draws = 5000;
    cra::Rng basis_rng(108);
    cra::Matrix raw(n, n);
    for (Eigen::Index j = 0; j < n; ++j)
        raw.col(j) = cra::uniform_sphere(n, basis_rng);
    cra::Matrix u = cra::qr_orthonormalize(raw).vectors;
    REQUIRE(u.cols() == n);

    cra::Vector z = basis_vector(n, 0);
    cra::Vector uz = u * z;
    cra::CapSpec plain{z, 0.4};
    cra::CapSpec rotated{uz, 0.4};
    cra::CapHeightTable table(n, 0.4);

    cra::Rng rng_a(109), rng_b(110);
    std::vector<double> heights_a, heights_b, coord_a, coord_b;
    for (int i = 0; i < draws; ++i) {
        cra::Vector xa = cra::sample_cap(plain, table, rng_a);
        cra::Vector xb_rot = cra::sample_cap(rotated, table, rng_b);
        cra::Vector xb = u.transpose() * xb_rot;  // rotate back
        heights_a.push_back(xa.dot(z));
        heights_b.push_back(xb_rot.dot(uz));
        coord_a.push_back(xa(1));
        coord_b.push_back(xb(1));
    }
    // alpha = 0.01 two-sample critical value: 1.628 * sqrt(2/draws).
    const double crit = 1.628 * std::sqrt(2.0 / draws);
    CHECK(ks_two_sample(heights_a, heights_b) < crit);
    CHECK(ks_two_sample(coord_a, coord_b) < crit);
}

TEST_CASE("cap specs are validated") {
    cra::Rng rng(111);
    cra::Vector not_unit = 2.0 * basis_vector(3, 0);
    CHECK_THROWS_AS(cra::sample_cap({not_unit, 0.5}, rng), std::invalid_argument);
    CHECK_THROWS_AS(cra::sample_cap({basis_vector(3, 0), 1.0}, rng), std::invalid_argument);
    CHECK_THROWS_AS(cra::sample_cap({basis_vector(3, 0), -1.0}, rng), std::invalid_argument);
    CHECK_THROWS_AS(cra::CapHeightTable(0, 0.5), std::invalid_argument);
}

TEST_CASE("a single tight cap yields near-identical columns") {
    cra::CapEnsembleSpec spec;
    spec.caps.push_back({basis_vector(8, 0), 0.9999});
    spec.assignment.assign(12, 0);
    auto [x, truth] = cra::generate_cap_matrix(spec, cra::Rng(112));
    REQUIRE(truth.q == 1);
    for (Eigen::Index a = 0; a < x.cols(); ++a)
        for (Eigen::Index b = a + 1; b < x.cols(); ++b)
            CHECK(x.col(a).dot(x.col(b)) >= 0.99);
}

TEST_CASE("antipodal tight caps produce signed correlation blocks") {
    cra::CapEnsembleSpec spec;
    spec.caps.push_back({basis_vector(8, 0), 0.995});
    spec.caps.push_back({-basis_vector(8, 0), 0.995});
    spec.assignment = cra::round_robin_assignment(2, 10);
    auto [x, truth] = cra::generate_cap_matrix(spec, cra::Rng(113));
    for (Eigen::Index a = 0; a < x.cols(); ++a) {
        CHECK(std::abs(x.col(a).norm() - 1.0) <= 1e-12);
        for (Eigen::Index b = a + 1; b < x.cols(); ++b) {
            double corr = x.col(a).dot(x.col(b));
            bool same = truth.labels[static_cast<std::size_t>(a)] ==
                        truth.labels[static_cast<std::size_t>(b)];
            if (same)
                CHECK(corr >= 0.98);
            else
                CHECK(corr <= -0.98);
        }
    }
}

TEST_CASE("cap matrices are reproducible bit for bit") {
    cra::CapEnsembleSpec spec;
    spec.caps.push_back({basis_vector(5, 0), 0.2});
    spec.caps.push_back({basis_vector(5, 1), 0.6});
    spec.assignment = cra::round_robin_assignment(2, 30);
    auto [xa, ta] = cra::generate_cap_matrix(spec, cra::Rng(114));
    auto [xb, tb] = cra::generate_cap_matrix(spec, cra::Rng(114));
    CHECK(xa == xb);
    auto [xc, tc] = cra::generate_cap_matrix(spec, cra::Rng(115));
    CHECK(xa != xc);
}

TEST_CASE("cap ensemble validation rejects bad specs") {
    cra::CapEnsembleSpec too_many;
    for (int i = 0; i < 3; ++i)
        too_many.caps.push_back({basis_vector(2, i % 2), 0.5});
    too_many.assignment.assign(5, 0);
    CHECK_THROWS_AS(cra::generate_cap_matrix(too_many, cra::Rng(1)), std::invalid_argument);

    cra::CapEnsembleSpec empty_assign;
    empty_assign.caps.push_back({basis_vector(3, 0), 0.5});
    CHECK_THROWS_AS(cra::generate_cap_matrix(empty_assign, cra::Rng(1)), std::invalid_argument);

    cra::CapEnsembleSpec bad_assign;
    bad_assign.caps.push_back({basis_vector(3, 0), 0.5});
    bad_assign.assignment = {0, 1};
    CHECK_THROWS_AS(cra::generate_cap_matrix(bad_assign, cra::Rng(1)), std::invalid_argument);
}

TEST_CASE("factor matrix without factors is pure noise") {
    cra::FactorModelSpec spec;
    spec.n = 200;
    spec.p = 60;
    spec.q = 5;
    spec.loading_std = 0.0;
    cra::Matrix x = cra::generate_factor_matrix(spec, cra::Rng(116));
    double sum = 0.0;
    int count = 0;
    for (int a = 0; a < spec.p; ++a)
        for (int b = 0; b < spec.p; ++b)
            if (a != b) {
                sum += x.col(a).dot(x.col(b));
                ++count;
            }
    CHECK(std::abs(sum / count) < 0.05);
}

TEST_CASE("factor structure creates a spectral gap at q") {
    cra::FactorModelSpec spec;
    spec.n = 250;
    spec.p = 1000;
    spec.q = 25;
    double ratio_sum = 0.0;
    for (int seed = 0; seed < 10; ++seed) {
        cra::Matrix x = cra::generate_factor_matrix(spec, cra::Rng(2000 + seed));
        auto sv = cra::singular_values(x).singular_values;
        ratio_sum += sv[24] / sv[25];
    }
    CHECK(ratio_sum / 10.0 > 2.0);
}

TEST_CASE("one factor and no idiosyncratic noise gives rank one") {
    cra::FactorModelSpec spec;
    spec.n = 50;
    spec.p = 20;
    spec.q = 1;
    spec.idiosyncratic_std = 0.0;
    cra::Matrix x = cra::generate_factor_matrix(spec, cra::Rng(117));
    auto sv = cra::singular_values(x).singular_values;
    CHECK(sv[1] / sv[0] < 1e-10);
}

TEST_CASE("factor matrix columns are unit norm and reproducible") {
    cra::FactorModelSpec spec;
    spec.n = 40;
    spec.p = 30;
    spec.q = 3;
    cra::Matrix xa = cra::generate_factor_matrix(spec, cra::Rng(118));
    cra::Matrix xb = cra::generate_factor_matrix(spec, cra::Rng(118));
    CHECK(xa == xb);
    for (Eigen::Index j = 0; j < xa.cols(); ++j)
        CHECK(std::abs(xa.col(j).norm() - 1.0) <= 1e-12);
}

TEST_CASE("factor model validates its parameters") {
    cra::FactorModelSpec spec;
    spec.n = 10;
    spec.p = 5;
    spec.q = 10;  // q >= n
    CHECK_THROWS_AS(cra::generate_factor_matrix(spec, cra::Rng(1)), std::invalid_argument);
    spec.q = 2;
    spec.ar1 = 0.8;
    spec.ar2 = 0.3;  // nonstationary
    CHECK_THROWS_AS(cra::generate_factor_matrix(spec, cra::Rng(1)), std::invalid_argument);
    spec.ar1 = 0.5;
    spec.ar2 = 0.3;
    spec.loading_std = -1.0;
    CHECK_THROWS_AS(cra::generate_factor_matrix(spec, cra::Rng(1)), std::invalid_argument);
}

TEST_CASE("noise level tracks the requested signal-to-noise ratio exactly") {
    cra::Rng rng(119);
    cra::Vector y0(8);
    for (int i = 0; i < 8; ++i) y0(i) = rng.normal();

    auto [y_eq, eta_eq] = cra::add_noise_snr(y0, 0.0, rng);
    CHECK(eta_eq == Catch::Approx(y0.norm()).epsilon(1e-15));
    CHECK((y_eq - y0).norm() == Catch::Approx(eta_eq).epsilon(1e-12));

    auto [y_20, eta_20] = cra::add_noise_snr(y0, 20.0, rng);
    CHECK(eta_20 == Catch::Approx(y0.norm() / 10.0).epsilon(1e-15));

    cra::Vector y5 = cra::Vector::Zero(4);
    y5(0) = 5.0;
    auto [y_60, eta_60] = cra::add_noise_snr(y5, 60.0, rng);
    CHECK(eta_60 == Catch::Approx(0.005).epsilon(1e-12));

    // Realized SNR in dB round-trips to machine precision.
    double realized = 20.0 * std::log10(y5.norm() / (y_60 - y5).norm());
    CHECK(realized == Catch::Approx(60.0).margin(1e-9));

    CHECK_THROWS_AS(cra::add_noise_snr(cra::Vector::Zero(3), 10.0, rng),
                    std::invalid_argument);
}

TEST_CASE("noise spec overload is seed-deterministic") {
    cra::Vector y0(5);
    y0 << 1.0, -2.0, 0.5, 3.0, -1.0;
    auto [ya, ea] = cra::add_noise_snr(y0, cra::NoiseSpec{40.0, 77});
    auto [yb, eb] = cra::add_noise_snr(y0, cra::NoiseSpec{40.0, 77});
    CHECK(ya == yb);
    CHECK(ea == eb);
}

TEST_CASE("sparse coefficient draws respect support size and range") {
    cra::Rng rng(120);
    cra::Vector full = cra::sample_sparse_beta(10, 10, rng);
    for (int i = 0; i < 10; ++i) {
        CHECK(full(i) >= 1.0);
        CHECK(full(i) <= 2.0);
    }

    cra::Vector sparse = cra::sample_sparse_beta(1000, 20, rng);
    int nonzeros = 0;
    for (int i = 0; i < 1000; ++i)
        nonzeros += (sparse(i) != 0.0);
    CHECK(nonzeros == 20);

    cra::Vector zero = cra::sample_sparse_beta(7, 0, rng);
    CHECK(zero.norm() == 0.0);

    CHECK_THROWS_AS(cra::sample_sparse_beta(3, 4, rng), std::invalid_argument);
}
