#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <utility>
#include <vector>

#include "cra/clustering.hpp"
#include "cra/linalg.hpp"
#include "cra/matrix.hpp"
#include "cra/rng.hpp"

namespace cra {

// One spherical cap: points x on the unit sphere with <x, center> >= height.
struct CapSpec {
    Vector center;   // unit norm
    double height;   // in (-1, 1)
};

// A union of caps plus the column-to-cap assignment.
struct CapEnsembleSpec {
    std::vector<CapSpec> caps;
    std::vector<int> assignment;  // length p, values in [0, caps.size())
};

struct FactorModelSpec {
    int n = 0;
    int p = 0;
    int q = 0;
    double ar1 = 0.5;
    double ar2 = 0.3;
    double loading_std = 2.0;
    double idiosyncratic_std = 1.0;
    int burn_in = 500;
};

struct NoiseSpec {
    double snr_db = 0.0;
    std::uint64_t rng_seed = 0;
};

inline void validate(const CapSpec& spec) {
    if (spec.center.size() < 1)
        throw std::invalid_argument("CapSpec: empty center");
    if (std::abs(spec.center.norm() - 1.0) > 1e-10)
        throw std::invalid_argument("CapSpec: center must be unit norm");
    if (!(spec.height > -1.0 && spec.height < 1.0))
        throw std::invalid_argument("CapSpec: height must lie in (-1, 1)");
}

// Uniform draw from the unit sphere S^{n-1}: normalized Gaussian vector.
inline Vector uniform_sphere(int n, Rng& rng) {
    if (n < 1)
        throw std::invalid_argument("uniform_sphere: n must be positive");
    Vector v(n);
    for (;;) {
        for (int i = 0; i < n; ++i)
            v(i) = rng.normal();
        double nrm = v.norm();
        if (nrm > 0.0)
            return v / nrm;
    }
}

// Inverse-CDF table for the cap height density (1-t^2)^{(n-3)/2} restricted
// to [t0, 1]. The table integrates the density scaled by its interval
// maximum in log space; a cap that is tiny relative to the whole sphere
// would otherwise round to zero conditional mass in double precision.
class CapHeightTable {
public:
    CapHeightTable(int n, double t0) : n_(n), t0_(t0) {
        if (n < 1)
            throw std::invalid_argument("CapHeightTable: need n >= 1");
        if (!(t0 > -1.0 && t0 < 1.0))
            throw std::invalid_argument("CapHeightTable: t0 must lie in (-1, 1)");
        if (n_ <= 3)
            return;  // closed forms, no table
        const double ex = 0.5 * (n_ - 3);
        // Log-density peak over [t0, 1]: at t0 for t0 >= 0, else at 0.
        const double tpeak = (t0_ > 0.0) ? t0_ : 0.0;
        const double log_peak = ex * std::log1p(-tpeak * tpeak);
        edges_.resize(kPanels + 1);
        cdf_.resize(kPanels + 1);
        for (int i = 0; i <= kPanels; ++i)
            edges_[i] = t0_ + (1.0 - t0_) * static_cast<double>(i) / kPanels;
        // 4-point Gauss-Legendre nodes and weights on [-1, 1].
        static const double gx[4] = {-0.8611363115940526, -0.3399810435848563,
                                     0.3399810435848563, 0.8611363115940526};
        static const double gw[4] = {0.3478548451374538, 0.6521451548625461,
                                     0.6521451548625461, 0.3478548451374538};
        cdf_[0] = 0.0;
        for (int i = 0; i < kPanels; ++i) {
            const double a = edges_[i], b = edges_[i + 1];
            const double h = 0.5 * (b - a);
            const double mid = 0.5 * (a + b);
            double mass = 0.0;
            for (int k = 0; k < 4; ++k) {
                const double t = mid + h * gx[k];
                const double one_minus = 1.0 - t * t;
                double val = 0.0;
                if (one_minus > 0.0) {
                    double lg = ex * std::log(one_minus) - log_peak;
                    if (lg > -745.0)
                        val = std::exp(lg);
                }
                mass += gw[k] * val;
            }
            cdf_[i + 1] = cdf_[i] + h * mass;
        }
        const double total = cdf_[kPanels];
        if (!(total > 0.0))
            throw std::runtime_error("CapHeightTable: degenerate cap mass");
        for (int i = 0; i <= kPanels; ++i)
            cdf_[i] /= total;
    }

    // Inverse CDF with linear interpolation inside the bracketing panel.
    double sample(Rng& rng) const {
        if (n_ == 1)
            return 1.0;  // S^0: the cap holding the center is {center}
        if (n_ == 2) {
            // Density (1-t^2)^{-1/2}; CDF proportional to asin.
            const double a0 = std::asin(t0_);
            const double u = rng.uniform01();
            return std::sin(a0 + u * (1.5707963267948966 - a0));
        }
        if (n_ == 3)
            return t0_ + (1.0 - t0_) * rng.uniform01();  // flat density
        const double u = rng.uniform01();
        int lo = 0, hi = kPanels;
        while (hi - lo > 1) {
            int mid = (lo + hi) / 2;
            if (cdf_[mid] <= u) lo = mid; else hi = mid;
        }
        const double c0 = cdf_[lo], c1 = cdf_[hi];
        const double frac = (c1 > c0) ? (u - c0) / (c1 - c0) : 0.0;
        return edges_[lo] + frac * (edges_[hi] - edges_[lo]);
    }

private:
    static constexpr int kPanels = 1024;
    int n_;
    double t0_;
    std::vector<double> edges_;
    std::vector<double> cdf_;
};

// Draws one point uniformly from the cap: height t from the marginal
// density, direction orthogonal to the center uniform on the equator.
inline Vector sample_cap(const CapSpec& spec, const CapHeightTable& table, Rng& rng) {
    const int n = static_cast<int>(spec.center.size());
    if (n == 1)
        return spec.center;  // S^0 cap with height > -1 is just {center}
    const double t = table.sample(rng);
    Vector w = uniform_sphere(n, rng);
    w -= spec.center.dot(w) * spec.center;
    double nrm = w.norm();
    while (nrm < 1e-14) {
        w = uniform_sphere(n, rng);
        w -= spec.center.dot(w) * spec.center;
        nrm = w.norm();
    }
    w /= nrm;
    const double ortho = std::sqrt(std::max(0.0, 1.0 - t * t));
    Vector out = t * spec.center + ortho * w;
    return out / out.norm();
}

inline Vector sample_cap(const CapSpec& spec, Rng& rng) {
    validate(spec);
    CapHeightTable table(static_cast<int>(spec.center.size()), spec.height);
    return sample_cap(spec, table, rng);
}

// Round-robin assignment of p columns to q caps.
inline std::vector<int> round_robin_assignment(int q, int p) {
    std::vector<int> a(static_cast<std::size_t>(p));
    for (int j = 0; j < p; ++j)
        a[static_cast<std::size_t>(j)] = j % q;
    return a;
}

// Samples every column from its assigned cap. Column j uses a stream derived
// from the caller's seed and j only, so the matrix does not depend on
// evaluation order. Returns the matrix and the ground-truth cluster model.
inline std::pair<Matrix, ClusterModel> generate_cap_matrix(const CapEnsembleSpec& spec, const Rng& rng) {
    const int q = static_cast<int>(spec.caps.size());
    if (q == 0)
        throw std::invalid_argument("generate_cap_matrix: no caps");
    const int n = static_cast<int>(spec.caps[0].center.size());
    if (q > n)
        throw std::invalid_argument("generate_cap_matrix: more caps than ambient dimension");
    for (const CapSpec& cap : spec.caps) {
        validate(cap);
        if (cap.center.size() != n)
            throw std::invalid_argument("generate_cap_matrix: cap dimension mismatch");
    }
    const int p = static_cast<int>(spec.assignment.size());
    if (p == 0)
        throw std::invalid_argument("generate_cap_matrix: empty assignment");

    std::vector<CapHeightTable> tables;
    tables.reserve(spec.caps.size());
    for (const CapSpec& cap : spec.caps)
        tables.emplace_back(n, cap.height);

    Matrix x(n, p);
    for (int j = 0; j < p; ++j) {
        int c = spec.assignment[static_cast<std::size_t>(j)];
        if (c < 0 || c >= q)
            throw std::invalid_argument("generate_cap_matrix: assignment out of range");
        Rng col_rng = rng.derive({0xca9u, static_cast<std::uint64_t>(j)});
        x.col(j) = sample_cap(spec.caps[static_cast<std::size_t>(c)], tables[static_cast<std::size_t>(c)], col_rng);
    }

    ClusterModel truth;
    truth.q = q;
    truth.labels = spec.assignment;
    truth.centroids.resize(n, q);
    for (int c = 0; c < q; ++c)
        truth.centroids.col(c) = spec.caps[static_cast<std::size_t>(c)].center;
    truth.subspace = qr_orthonormalize(truth.centroids);
    return {std::move(x), std::move(truth)};
}

// X = F Lambda + Z with AR(2) factors, then unit column normalization.
// The AR recursion burns in before recording so the factor series starts
// near stationarity.
inline Matrix generate_factor_matrix(const FactorModelSpec& spec, const Rng& rng) {
    if (spec.n < 1 || spec.p < 1 || spec.q < 1)
        throw std::invalid_argument("generate_factor_matrix: dimensions must be positive");
    if (spec.q >= spec.n)
        throw std::invalid_argument("generate_factor_matrix: need q < n");
    if (spec.loading_std < 0.0 || spec.idiosyncratic_std < 0.0)
        throw std::invalid_argument("generate_factor_matrix: negative standard deviation");
    if (std::abs(spec.ar1) + std::abs(spec.ar2) >= 1.0)
        throw std::invalid_argument("generate_factor_matrix: AR(2) coefficients must be stationary");

    Matrix f(spec.n, spec.q);
    for (int j = 0; j < spec.q; ++j) {
        Rng col_rng = rng.derive({0xfac0u, static_cast<std::uint64_t>(j)});
        double prev1 = 0.0, prev2 = 0.0;
        for (int t = 0; t < spec.burn_in + spec.n; ++t) {
            double cur = spec.ar1 * prev1 + spec.ar2 * prev2 + col_rng.normal();
            prev2 = prev1;
            prev1 = cur;
            if (t >= spec.burn_in)
                f(t - spec.burn_in, j) = cur;
        }
    }

    Matrix x(spec.n, spec.p);
    for (int j = 0; j < spec.p; ++j) {
        Rng col_rng = rng.derive({0xfac1u, static_cast<std::uint64_t>(j)});
        Vector loading(spec.q);
        for (int k = 0; k < spec.q; ++k)
            loading(k) = spec.loading_std * col_rng.normal();
        Vector col = f * loading;
        for (int i = 0; i < spec.n; ++i)
            col(i) += spec.idiosyncratic_std * col_rng.normal();
        double nrm = col.norm();
        if (nrm == 0.0)
            throw std::runtime_error("generate_factor_matrix: zero column");
        x.col(j) = col / nrm;
    }
    return x;
}

// Adds Gaussian noise rescaled so the realized SNR hits snr_db exactly;
// returns the noisy vector and eta = ||u||_2.
inline std::pair<Vector, double> add_noise_snr(const Vector& y0, double snr_db, Rng& rng) {
    require_finite(y0, "add_noise_snr");
    const double signal = y0.norm();
    if (signal == 0.0)
        throw std::invalid_argument("add_noise_snr: zero signal");
    Vector g(y0.size());
    for (Eigen::Index i = 0; i < y0.size(); ++i)
        g(i) = rng.normal();
    double gn = g.norm();
    while (gn == 0.0) {
        for (Eigen::Index i = 0; i < y0.size(); ++i)
            g(i) = rng.normal();
        gn = g.norm();
    }
    const double eta = signal * std::pow(10.0, -snr_db / 20.0);
    Vector y = y0 + (eta / gn) * g;
    return {std::move(y), eta};
}

inline std::pair<Vector, double> add_noise_snr(const Vector& y0, const NoiseSpec& spec) {
    Rng rng(spec.rng_seed);
    return add_noise_snr(y0, spec.snr_db, rng);
}

// Exactly s nonzeros on a uniform random support, each i.i.d. uniform [1,2].
inline Vector sample_sparse_beta(int p, int s, Rng& rng) {
    if (s < 0 || s > p)
        throw std::invalid_argument("sample_sparse_beta: need 0 <= s <= p");
    Vector beta = Vector::Zero(p);
    std::vector<std::size_t> support =
        rng.sample_without_replacement(static_cast<std::size_t>(p), static_cast<std::size_t>(s));
    for (std::size_t idx : support)
        beta(static_cast<Eigen::Index>(idx)) = rng.uniform(1.0, 2.0);
    return beta;
}

}  // namespace cra
