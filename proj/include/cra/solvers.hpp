#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "cra/detail/csv.hpp"
#include "cra/linalg.hpp"
#include "cra/matrix.hpp"

namespace cra {

struct SolverOptions {
    int max_iter = 10000;       // inner iterations (gradient steps)
    int max_outer = 30;         // constraint-radius updates
    double opt_tol = 1e-6;
    double feas_tol = 1e-6;
    int verbosity = 0;
    // When set, one row (iteration, residual norm, l1 norm) per step.
    std::vector<std::array<double, 3>>* trace = nullptr;
};

struct RecoveryResult {
    Vector coefficients;
    double residual_norm = 0.0;
    int iterations = 0;
    bool converged = false;
};

// Euclidean projection onto the l1 ball of radius tau by sort and threshold.
inline Vector project_l1_ball(const Vector& v, double tau) {
    if (tau < 0.0)
        throw std::invalid_argument("project_l1_ball: negative radius");
    if (tau == 0.0)
        return Vector::Zero(v.size());
    double l1 = v.lpNorm<1>();
    if (l1 <= tau)
        return v;
    std::vector<double> mags(static_cast<std::size_t>(v.size()));
    for (Eigen::Index i = 0; i < v.size(); ++i)
        mags[static_cast<std::size_t>(i)] = std::abs(v(i));
    std::sort(mags.begin(), mags.end(), std::greater<double>());
    double acc = 0.0;
    double theta = 0.0;
    for (std::size_t k = 0; k < mags.size(); ++k) {
        acc += mags[k];
        double cand = (acc - tau) / static_cast<double>(k + 1);
        if (k + 1 == mags.size() || mags[k + 1] <= cand) {
            theta = cand;
            break;
        }
    }
    Vector out(v.size());
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        double mag = std::abs(v(i)) - theta;
        out(i) = (mag > 0.0) ? ((v(i) > 0.0) ? mag : -mag) : 0.0;
    }
    return out;
}

// Basis pursuit denoise: min ||z||_1 subject to ||Xz - y||_2 <= eta.
//
// Root-finding on the Pareto curve phi(tau) = ||r_tau||_2: spectral projected
// gradient solves the l1-ball-constrained least-squares subproblem at fixed
// tau, and Newton steps move tau toward the target eta. Tau updates fire only
// once the subproblem objective has stabilized; stepping from an unconverged
// subproblem overshoots the root and lands on feasible but suboptimal points.
//
// Feasibility at exit: ||r|| <= eta*(1+feas_tol) + feas_tol*max(1, ||y||).
// The absolute term makes eta = 0 (basis pursuit) meaningful.
inline RecoveryResult bpdn(const Matrix& x, const Vector& y, double eta,
                           const SolverOptions& opts = {}) {
    if (x.rows() != y.size())
        throw std::invalid_argument("bpdn: row count != rhs length");
    if (eta < 0.0)
        throw std::invalid_argument("bpdn: eta must be nonnegative");
    if (opts.opt_tol <= 0.0 || opts.feas_tol <= 0.0)
        throw std::invalid_argument("bpdn: tolerances must be positive");
    require_finite(x, "bpdn");
    require_finite(y, "bpdn");

    const Eigen::Index p = x.cols();
    const double bnorm = y.norm();
    RecoveryResult result;
    result.coefficients = Vector::Zero(p);
    result.residual_norm = bnorm;
    if (bnorm <= eta) {  // zero vector is feasible, and nothing beats ||0||_1
        result.converged = true;
        return result;
    }

    const double bp_feas = opts.feas_tol * std::max(1.0, bnorm);  // eta ~ 0 exit
    constexpr int kHistory = 10;

    Vector z = Vector::Zero(p);
    Vector r = y;
    Vector g = -(x.transpose() * r);
    double f = 0.5 * r.squaredNorm();
    double f_old = f;
    double tau = 0.0;
    int outer = 0;
    std::array<double, kHistory> recent_f;
    recent_f.fill(-std::numeric_limits<double>::infinity());
    recent_f[0] = f;
    double step = 1.0;

    int it = 0;
    for (; it < opts.max_iter; ++it) {
        const double gnorm = g.lpNorm<Eigen::Infinity>();
        const double rnorm = r.norm();
        const double gap = r.dot(r - y) + tau * gnorm;
        const double rgap = std::abs(gap) / std::max(1.0, f);
        const double aerror1 = rnorm - eta;
        const double rerror1 = std::abs(aerror1) / std::max(1.0, rnorm);
        const double rerror2 = std::abs(f - 0.5 * eta * eta) / std::max(1.0, f);

        if (opts.trace)
            opts.trace->push_back({static_cast<double>(it), rnorm, z.lpNorm<1>()});

        if (rgap <= std::max(opts.opt_tol, rerror2) || rerror1 <= opts.opt_tol) {
            // Subproblem solved accurately at the current tau.
            if (rnorm <= eta * (1.0 + opts.feas_tol)) { result.converged = true; break; }
            if (rerror1 <= opts.opt_tol) { result.converged = true; break; }
            if (rnorm <= bp_feas) { result.converged = true; break; }
        }

        const bool stable1 = std::abs(f - f_old) <= opts.feas_tol * f;
        const bool stable2 = std::abs(f - f_old) <= 1e-1 * f * std::abs(rnorm - eta);
        if ((stable1 && rnorm > 2.0 * eta) || (stable2 && rnorm <= 2.0 * eta)) {
            if (outer >= opts.max_outer)
                break;
            ++outer;
            if (gnorm > 0.0) {
                double tau_new = std::max(0.0, tau + rnorm * aerror1 / gnorm);
                if (tau_new < tau) {
                    z = project_l1_ball(z, tau_new);
                    r = y - x * z;
                    g = -(x.transpose() * r);
                    f = 0.5 * r.squaredNorm();
                }
                tau = tau_new;
                recent_f.fill(-std::numeric_limits<double>::infinity());
                recent_f[0] = f;
            }
        }
        f_old = f;

        // Spectral projected gradient step with nonmonotone backtracking.
        const double f_ref = *std::max_element(recent_f.begin(), recent_f.end());
        Vector z_old = z;
        Vector g_old = g;
        double trial_step = step;
        Vector z_new;
        Vector r_new;
        double f_new = 0.0;
        for (int bt = 0; bt < 30; ++bt) {
            z_new = project_l1_ball(z_old - trial_step * g_old, tau);
            r_new = y - x * z_new;
            f_new = 0.5 * r_new.squaredNorm();
            if (f_new <= f_ref + 1e-4 * g_old.dot(z_new - z_old))
                break;
            trial_step *= 0.5;
        }
        z = std::move(z_new);
        r = std::move(r_new);
        f = f_new;
        g = -(x.transpose() * r);

        Vector dz = z - z_old;
        Vector dg = g - g_old;
        const double sy = dz.dot(dg);
        step = (sy > 1e-16) ? std::clamp(dz.squaredNorm() / sy, 1e-5, 1e5) : 1e5;
        recent_f[static_cast<std::size_t>((it + 1) % kHistory)] = f;
    }

    result.coefficients = std::move(z);
    result.residual_norm = (y - x * result.coefficients).norm();
    result.iterations = it;
    return result;
}

// Greedy pursuit: grow the support by the column most correlated with the
// residual, refit by least squares, repeat s times.
inline RecoveryResult omp(const Matrix& x, const Vector& y, int s) {
    if (s < 0 || s > std::min(x.rows(), x.cols()))
        throw std::invalid_argument("omp: need 0 <= s <= min(n, p)");
    require_finite(x, "omp");
    require_finite(y, "omp");

    RecoveryResult result;
    result.coefficients = Vector::Zero(x.cols());
    Vector r = y;
    const double stop_norm = 1e-12 * y.norm();
    std::vector<Eigen::Index> support;
    int steps_taken = 0;
    for (int step = 0; step < s; ++step) {
        if (r.norm() <= stop_norm)
            break;  // residual already explained; keep support size <= s
        Vector corr = x.transpose() * r;
        Eigen::Index best = -1;
        double best_mag = -1.0;
        for (Eigen::Index j = 0; j < x.cols(); ++j) {
            bool taken = false;
            for (Eigen::Index idx : support)
                if (idx == j) { taken = true; break; }
            if (taken)
                continue;
            double mag = std::abs(corr(j));
            if (mag > best_mag) { best_mag = mag; best = j; }
        }
        support.push_back(best);
        ++steps_taken;
        Matrix sub(x.rows(), static_cast<Eigen::Index>(support.size()));
        for (std::size_t k = 0; k < support.size(); ++k)
            sub.col(static_cast<Eigen::Index>(k)) = x.col(support[k]);
        Vector coef = pseudo_inverse_solve(sub, y);
        r = y - sub * coef;
        for (std::size_t k = 0; k < support.size(); ++k)
            result.coefficients(support[k]) = coef(static_cast<Eigen::Index>(k));
    }
    result.residual_norm = r.norm();
    result.iterations = steps_taken;
    result.converged = true;
    return result;
}

// Keeps the k largest-magnitude entries; ties keep the lowest index.
inline Vector best_k_approx(const Vector& b, int k) {
    if (k < 0 || k > b.size())
        throw std::invalid_argument("best_k_approx: need 0 <= k <= length");
    std::vector<Eigen::Index> order(static_cast<std::size_t>(b.size()));
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&b](Eigen::Index a, Eigen::Index c) {
        return std::abs(b(a)) > std::abs(b(c));
    });
    Vector out = Vector::Zero(b.size());
    for (int i = 0; i < k; ++i)
        out(order[static_cast<std::size_t>(i)]) = b(order[static_cast<std::size_t>(i)]);
    return out;
}

inline std::vector<Eigen::Index> support_of(const Vector& b) {
    std::vector<Eigen::Index> s;
    for (Eigen::Index i = 0; i < b.size(); ++i)
        if (b(i) != 0.0)
            s.push_back(i);
    return s;
}

// Iterative hard thresholding with fixed step 0.9 / sigma_max(X)^2, the
// spectral norm estimated by 20 power iterations on X^T X.
inline RecoveryResult iht(const Matrix& x, const Vector& y, int s,
                          const SolverOptions& opts = {}) {
    if (s < 1)
        throw std::invalid_argument("iht: s must be positive");
    require_finite(x, "iht");
    require_finite(y, "iht");

    Vector v = Vector::Ones(x.cols()).normalized();
    for (int i = 0; i < 20; ++i) {
        Vector w = x.transpose() * (x * v);
        double nrm = w.norm();
        if (nrm == 0.0)
            break;
        v = w / nrm;
    }
    const double sigma_sq = (x * v).squaredNorm();
    const double mu = (sigma_sq > 0.0) ? 0.9 / sigma_sq : 1.0;

    RecoveryResult result;
    Vector z = Vector::Zero(x.cols());
    Vector best_z = z;
    double best_rnorm = y.norm();
    int it = 0;
    for (; it < opts.max_iter; ++it) {
        Vector r = y - x * z;
        const double rnorm = r.norm();
        if (rnorm < best_rnorm) {
            best_rnorm = rnorm;
            best_z = z;
        } else if (rnorm > 10.0 * best_rnorm) {
            result.coefficients = std::move(best_z);
            result.residual_norm = best_rnorm;
            result.iterations = it;
            result.converged = false;  // diverged; best iterate returned
            return result;
        }
        Vector z_next = best_k_approx(z + mu * (x.transpose() * r), s);
        const double move = (z_next - z).norm();
        z = std::move(z_next);
        if (move <= opts.opt_tol)
            break;
    }
    result.coefficients = std::move(z);
    result.residual_norm = (y - x * result.coefficients).norm();
    result.iterations = it;
    result.converged = it < opts.max_iter;
    return result;
}

// Least squares restricted to the given support, zeros elsewhere.
inline Vector ols_debias(const Matrix& x, const Vector& y,
                         const std::vector<Eigen::Index>& support) {
    if (support.empty())
        throw std::invalid_argument("ols_debias: empty support");
    Matrix sub(x.rows(), static_cast<Eigen::Index>(support.size()));
    for (std::size_t k = 0; k < support.size(); ++k) {
        if (support[k] < 0 || support[k] >= x.cols())
            throw std::invalid_argument("ols_debias: support index out of range");
        sub.col(static_cast<Eigen::Index>(k)) = x.col(support[k]);
    }
    Vector coef = pseudo_inverse_solve(sub, y);
    Vector out = Vector::Zero(x.cols());
    for (std::size_t k = 0; k < support.size(); ++k)
        out(support[k]) = coef(static_cast<Eigen::Index>(k));
    return out;
}

// Local support descent: each round scores every (drop one, add one) pair
// through the cached Gram matrix and applies the best strictly improving
// swap. Sparsity stays exactly |initial_support|.
inline RecoveryResult swap_refine(const Matrix& x, const Vector& y,
                                  const std::vector<Eigen::Index>& initial_support,
                                  const SolverOptions& opts = {}) {
    const Eigen::Index p = x.cols();
    const std::size_t s = initial_support.size();
    if (s < 1)
        throw std::invalid_argument("swap_refine: empty initial support");
    require_finite(x, "swap_refine");
    require_finite(y, "swap_refine");

    const Matrix gram = x.transpose() * x;
    const Vector xty = x.transpose() * y;

    std::vector<Eigen::Index> support = initial_support;
    std::sort(support.begin(), support.end());
    if (std::adjacent_find(support.begin(), support.end()) != support.end())
        throw std::invalid_argument("swap_refine: duplicate support index");
    if (support.front() < 0 || support.back() >= p)
        throw std::invalid_argument("swap_refine: support index out of range");

    auto fitted_energy = [&](const std::vector<Eigen::Index>& sup, Vector* coef_out) {
        Matrix gs(static_cast<Eigen::Index>(sup.size()), static_cast<Eigen::Index>(sup.size()));
        Vector bs(static_cast<Eigen::Index>(sup.size()));
        for (std::size_t a = 0; a < sup.size(); ++a) {
            bs(static_cast<Eigen::Index>(a)) = xty(sup[a]);
            for (std::size_t b = 0; b < sup.size(); ++b)
                gs(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) = gram(sup[a], sup[b]);
        }
        Vector w = gs.ldlt().solve(bs);
        if (coef_out)
            *coef_out = w;
        return bs.dot(w);  // ||proj_span y||^2
    };

    double energy = fitted_energy(support, nullptr);
    int swaps = 0;
    const int max_rounds = std::max(1, opts.max_iter);
    for (int round = 0; round < max_rounds; ++round) {
        double best_gain = 0.0;
        std::size_t best_pos = 0;
        Eigen::Index best_j = -1;

        for (std::size_t pos = 0; pos < s; ++pos) {
            std::vector<Eigen::Index> rest;
            rest.reserve(s - 1);
            for (std::size_t k = 0; k < s; ++k)
                if (k != pos)
                    rest.push_back(support[k]);

            const Eigen::Index m = static_cast<Eigen::Index>(rest.size());
            Matrix ga(m, m);
            Vector ba(m);
            for (Eigen::Index a = 0; a < m; ++a) {
                ba(a) = xty(rest[static_cast<std::size_t>(a)]);
                for (Eigen::Index b = 0; b < m; ++b)
                    ga(a, b) = gram(rest[static_cast<std::size_t>(a)], rest[static_cast<std::size_t>(b)]);
            }
            Eigen::LDLT<Matrix> ldlt(ga);
            Vector wa = ldlt.solve(ba);
            const double base = ba.dot(wa);

            // Candidate scores: gain of adding column j to `rest` equals
            // (xty_j - g_j.w)^2 / (G_jj - g_j.Ga^{-1}.g_j), the squared
            // residual correlation over the Schur complement.
            Matrix cross(m, p);
            for (Eigen::Index a = 0; a < m; ++a)
                cross.row(a) = gram.row(rest[static_cast<std::size_t>(a)]);
            Matrix solved = ldlt.solve(cross);
            for (Eigen::Index j = 0; j < p; ++j) {
                bool in_rest = false;
                for (Eigen::Index rj : rest)
                    if (rj == j) { in_rest = true; break; }
                if (in_rest)
                    continue;
                double num = xty(j) - cross.col(j).dot(wa);
                double den = gram(j, j) - cross.col(j).dot(solved.col(j));
                if (den <= 1e-12)
                    continue;
                double cand_energy = base + num * num / den;
                double gain = cand_energy - energy;
                if (gain > best_gain + 1e-12 * std::max(1.0, energy)) {
                    best_gain = gain;
                    best_pos = pos;
                    best_j = j;
                }
            }
        }

        if (best_j < 0)
            break;
        support[best_pos] = best_j;
        std::sort(support.begin(), support.end());
        energy += best_gain;
        ++swaps;
    }

    Vector coef;
    fitted_energy(support, &coef);
    RecoveryResult result;
    result.coefficients = Vector::Zero(p);
    for (std::size_t k = 0; k < s; ++k)
        result.coefficients(support[k]) = coef(static_cast<Eigen::Index>(k));
    // The Gram energies steer the search, but sqrt(yty - energy) cancels
    // catastrophically when the fit is near-exact; report a direct residual.
    result.residual_norm = (x * result.coefficients - y).norm();
    result.iterations = swaps;
    result.converged = true;
    return result;
}

// Renders a solver trace as CSV text with one row per recorded iteration.
inline std::string trace_to_csv(const std::vector<std::array<double, 3>>& trace) {
    detail::CsvTable table;
    table.header = {"iteration", "residual", "l1_norm"};
    for (const auto& row : trace)
        table.rows.push_back({detail::format_int(static_cast<long long>(row[0])),
                              detail::format_double(row[1]),
                              detail::format_double(row[2])});
    return table.to_string();
}

}  // namespace cra
