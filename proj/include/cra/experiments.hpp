#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <exception>
#include <map>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <variant>
#include <vector>

#include "cra/detail/csv.hpp"
#include "cra/ensembles.hpp"
#include "cra/matrix.hpp"
#include "cra/pipeline.hpp"
#include "cra/rng.hpp"
#include "cra/solvers.hpp"

namespace cra {

enum class Estimator { cra, cra_ols, bpdn, bpdn_ols, swap };

inline const char* estimator_name(Estimator e) {
    switch (e) {
        case Estimator::cra: return "cra";
        case Estimator::cra_ols: return "cra_ols";
        case Estimator::bpdn: return "bpdn";
        case Estimator::bpdn_ols: return "bpdn_ols";
        case Estimator::swap: return "swap";
    }
    throw std::logic_error("estimator_name: unknown estimator");
}

inline Estimator estimator_from_name(const std::string& name) {
    if (name == "cra") return Estimator::cra;
    if (name == "cra_ols") return Estimator::cra_ols;
    if (name == "bpdn") return Estimator::bpdn;
    if (name == "bpdn_ols") return Estimator::bpdn_ols;
    if (name == "swap") return Estimator::swap;
    throw std::invalid_argument("unknown estimator: " + name);
}

struct ExperimentConfig {
    std::variant<CapEnsembleSpec, FactorModelSpec, Matrix> ensemble;
    int s = 20;
    std::vector<double> snr_grid = {10, 15, 20, 25, 30, 35, 40, 45, 50,
                                    55, 60, 65, 70, 75, 80, 85, 90, 95, 100};
    int trials_per_level = 30;
    std::vector<Estimator> estimators = {Estimator::cra, Estimator::cra_ols,
                                         Estimator::bpdn, Estimator::bpdn_ols,
                                         Estimator::swap};
    int q = 0;
    ClusteringMethod clustering_method = ClusteringMethod::kmeans;
    int kmeans_restarts = 10;
    std::uint64_t base_seed = 1;
    int threads = 1;  // 0: hardware concurrency
    SolverOptions solver;
};

struct TrialRecord {
    double snr_db = 0.0;
    int trial = 0;
    Estimator estimator = Estimator::bpdn;
    double relative_error = 0.0;
    double tpr = 0.0;
    double wall_time = 0.0;
    bool failed = false;
    // FNV-1a over the raw (beta, y, eta) bytes: rows sharing a digest provably
    // solved the same instance, so paired comparisons can be audited from the
    // CSV alone.
    std::uint64_t input_digest = 0;
};

struct SummaryRow {
    Estimator estimator = Estimator::bpdn;
    double snr_db = 0.0;
    double mean_relative_error = 0.0;
    double mean_tpr = 0.0;
    double mean_wall_time = 0.0;
    int trials = 0;
    int failures = 0;
};

struct ExperimentOutcome {
    std::vector<TrialRecord> records;
    std::vector<SummaryRow> summary;
    double clustering_seconds = 0.0;
};

// ||beta - best-s(beta_hat)||_2 / ||beta||_2.
inline double relative_error(const Vector& beta, const Vector& beta_hat, int s) {
    if (beta.size() != beta_hat.size())
        throw std::invalid_argument("relative_error: length mismatch");
    const double denom = beta.norm();
    if (denom == 0.0)
        throw std::invalid_argument("relative_error: reference vector is zero");
    return (beta - best_k_approx(beta_hat, s)).norm() / denom;
}

// Fraction of the true support recovered by the best-s approximation.
inline double tpr(const Vector& beta, const Vector& beta_hat, int s) {
    if (beta.size() != beta_hat.size())
        throw std::invalid_argument("tpr: length mismatch");
    std::vector<Eigen::Index> truth = support_of(beta);
    if (truth.empty())
        throw std::invalid_argument("tpr: reference support is empty");
    const Vector trimmed = best_k_approx(beta_hat, s);
    int hits = 0;
    for (Eigen::Index i : truth)
        if (trimmed(i) != 0.0)
            ++hits;
    return static_cast<double>(hits) / static_cast<double>(truth.size());
}

namespace detail {

inline double seconds_since(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

// Runs fn(i) for i in [0, count) across a fixed pool. Work units write only
// to their own preassigned slots, so results cannot depend on scheduling.
template <typename Fn>
void parallel_for(std::size_t count, int threads, Fn&& fn) {
    if (threads == 0) {
        const unsigned hw = std::thread::hardware_concurrency();
        threads = hw ? static_cast<int>(hw) : 1;
    }
    threads = std::min<std::size_t>(static_cast<std::size_t>(std::max(threads, 1)), count);
    if (threads <= 1) {
        for (std::size_t i = 0; i < count; ++i)
            fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto worker = [&]() {
        while (true) {
            const std::size_t i = next.fetch_add(1);
            if (i >= count)
                return;
            try {
                fn(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(failure_mutex);
                if (!failure)
                    failure = std::current_exception();
            }
        }
    };
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t)
        pool.emplace_back(worker);
    for (std::thread& t : pool)
        t.join();
    if (failure)
        std::rethrow_exception(failure);
}

// Support of the best-s approximation, deterministically padded to size s
// with the lowest unused indices when the estimate has fewer nonzeros.
inline std::vector<Eigen::Index> top_support(const Vector& beta_hat, int s) {
    std::vector<Eigen::Index> sup = support_of(best_k_approx(beta_hat, s));
    if (static_cast<int>(sup.size()) < s) {
        std::vector<bool> used(static_cast<std::size_t>(beta_hat.size()), false);
        for (Eigen::Index i : sup)
            used[static_cast<std::size_t>(i)] = true;
        for (Eigen::Index i = 0; i < beta_hat.size() && static_cast<int>(sup.size()) < s; ++i)
            if (!used[static_cast<std::size_t>(i)])
                sup.push_back(i);
        std::sort(sup.begin(), sup.end());
    }
    return sup;
}

struct TrialInputs {
    Vector beta;
    Vector y;
    double eta = 0.0;
};

// The shared per-trial draw: every estimator in a trial sees this exact
// (beta, y, eta) triple. Streams depend only on (seed, level, trial), never
// on scheduling.
inline TrialInputs draw_trial(const Matrix& x, int s, double snr_db,
                              std::uint64_t base_seed, int level_index, int trial) {
    TrialInputs in;
    Rng beta_rng = Rng(base_seed).derive({0xbe7aULL, static_cast<std::uint64_t>(level_index),
                                          static_cast<std::uint64_t>(trial)});
    in.beta = sample_sparse_beta(static_cast<int>(x.cols()), s, beta_rng);
    const Vector y0 = x * in.beta;
    if (std::isinf(snr_db)) {
        in.y = y0;
        in.eta = 0.0;
    } else {
        Rng noise_rng = Rng(base_seed).derive({0x6e0ULL, static_cast<std::uint64_t>(level_index),
                                               static_cast<std::uint64_t>(trial)});
        auto [y, eta] = add_noise_snr(y0, snr_db, noise_rng);
        in.y = y;
        in.eta = eta;
    }
    return in;
}

struct EstimatorRun {
    Vector beta_hat;
    double seconds = 0.0;
};

// Runs every requested estimator on one trial. The base solves are shared:
// bpdn_ols and swap bill the cached bpdn time plus their own refinement, and
// cra_ols bills the cached cra time plus the refit, mirroring how the
// initialization cost is attributed in combined-method timings.
inline std::map<Estimator, EstimatorRun> run_estimators(
    const Matrix& x, const CraTransform* transform, const TrialInputs& in, int s,
    const std::vector<Estimator>& which, const SolverOptions& solver) {
    std::map<Estimator, EstimatorRun> out;
    std::optional<EstimatorRun> bpdn_base;
    std::optional<EstimatorRun> cra_base;

    auto ensure_bpdn = [&]() -> const EstimatorRun& {
        if (!bpdn_base) {
            const auto start = std::chrono::steady_clock::now();
            RecoveryResult r = bpdn(x, in.y, in.eta, solver);
            bpdn_base = EstimatorRun{std::move(r.coefficients), seconds_since(start)};
        }
        return *bpdn_base;
    };
    auto ensure_cra = [&]() -> const EstimatorRun& {
        if (!cra_base) {
            if (!transform)
                throw std::invalid_argument("experiments: CRA estimator requires q >= 1");
            const auto start = std::chrono::steady_clock::now();
            CraEstimate est = run_cra_with_transform(*transform, in.y, in.eta, solver);
            cra_base = EstimatorRun{std::move(est.beta_hat), seconds_since(start)};
        }
        return *cra_base;
    };

    for (Estimator e : which) {
        switch (e) {
            case Estimator::bpdn:
                out[e] = ensure_bpdn();
                break;
            case Estimator::cra:
                out[e] = ensure_cra();
                break;
            case Estimator::bpdn_ols: {
                const EstimatorRun& base = ensure_bpdn();
                const auto start = std::chrono::steady_clock::now();
                Vector refit = ols_debias(x, in.y, top_support(base.beta_hat, s));
                out[e] = EstimatorRun{std::move(refit), base.seconds + seconds_since(start)};
                break;
            }
            case Estimator::cra_ols: {
                const EstimatorRun& base = ensure_cra();
                const auto start = std::chrono::steady_clock::now();
                Vector refit = ols_debias(x, in.y, top_support(base.beta_hat, s));
                out[e] = EstimatorRun{std::move(refit), base.seconds + seconds_since(start)};
                break;
            }
            case Estimator::swap: {
                const EstimatorRun& base = ensure_bpdn();
                const auto start = std::chrono::steady_clock::now();
                RecoveryResult r = swap_refine(x, in.y, top_support(base.beta_hat, s));
                out[e] = EstimatorRun{std::move(r.coefficients),
                                      base.seconds + seconds_since(start)};
                break;
            }
        }
    }
    return out;
}

}  // namespace detail

// Resolves the configured ensemble into a unit-column design matrix.
inline Matrix materialize_design(const ExperimentConfig& config) {
    const Rng base(config.base_seed);
    if (const auto* cap = std::get_if<CapEnsembleSpec>(&config.ensemble))
        return generate_cap_matrix(*cap, base.derive({0xe5ULL})).first;
    if (const auto* factor = std::get_if<FactorModelSpec>(&config.ensemble))
        return generate_factor_matrix(*factor, base.derive({0xe5ULL}));
    return unit_normalize_columns(std::get<Matrix>(config.ensemble));
}

// Monte Carlo sweep over the SNR grid with paired trials: within a trial all
// estimators share the same design, signal, noise draw, and residual bound.
inline ExperimentOutcome run_experiment(const ExperimentConfig& config) {
    if (config.snr_grid.empty())
        throw std::invalid_argument("run_experiment: snr_grid must be nonempty");
    if (config.trials_per_level < 1)
        throw std::invalid_argument("run_experiment: trials_per_level must be >= 1");
    if (config.s < 1)
        throw std::invalid_argument("run_experiment: sparsity must be >= 1");
    if (config.estimators.empty())
        throw std::invalid_argument("run_experiment: estimators must be nonempty");

    const Matrix x = materialize_design(config);
    const bool needs_cra =
        std::any_of(config.estimators.begin(), config.estimators.end(), [](Estimator e) {
            return e == Estimator::cra || e == Estimator::cra_ols;
        });

    ExperimentOutcome outcome;
    std::optional<CraTransform> transform;
    if (needs_cra && config.q >= 1) {
        // One clustering pass serves the whole sweep; its cost is reported
        // on its own row rather than folded into per-trial times.
        const auto start = std::chrono::steady_clock::now();
        ClusterModel cluster;
        if (config.clustering_method == ClusteringMethod::kmeans) {
            Rng cluster_rng = Rng(config.base_seed).derive({0x6bULL});
            cluster = kmeans_columns(x, config.q, config.kmeans_restarts, 100, cluster_rng);
        } else {
            cluster = top_subspace(x, config.q);
        }
        transform = build_transform(x, cluster);
        outcome.clustering_seconds = detail::seconds_since(start);
    }

    const std::size_t levels = config.snr_grid.size();
    const std::size_t trials = static_cast<std::size_t>(config.trials_per_level);
    const std::size_t width = config.estimators.size();
    outcome.records.resize(levels * trials * width);
    detail::parallel_for(levels * trials, config.threads, [&](std::size_t unit) {
        const std::size_t li = unit / trials;
        const int t = static_cast<int>(unit % trials);
        const double snr_db = config.snr_grid[li];
        const detail::TrialInputs in = detail::draw_trial(
            x, config.s, snr_db, config.base_seed, static_cast<int>(li), t);
        std::string blob(reinterpret_cast<const char*>(in.beta.data()),
                         sizeof(double) * static_cast<std::size_t>(in.beta.size()));
        blob.append(reinterpret_cast<const char*>(in.y.data()),
                    sizeof(double) * static_cast<std::size_t>(in.y.size()));
        blob.append(reinterpret_cast<const char*>(&in.eta), sizeof(double));
        const std::uint64_t digest = detail::fnv1a64(blob);
        std::map<Estimator, detail::EstimatorRun> runs;
        bool hard_failed = false;
        try {
            runs = detail::run_estimators(x, transform ? &*transform : nullptr, in,
                                          config.s, config.estimators, config.solver);
        } catch (const std::exception&) {
            hard_failed = true;
        }
        for (std::size_t ei = 0; ei < width; ++ei) {
            const Estimator e = config.estimators[ei];
            TrialRecord rec;
            rec.snr_db = snr_db;
            rec.trial = t;
            rec.estimator = e;
            rec.input_digest = digest;
            if (hard_failed || !runs.count(e)) {
                rec.failed = true;
            } else {
                const detail::EstimatorRun& run = runs.at(e);
                rec.relative_error = relative_error(in.beta, run.beta_hat, config.s);
                rec.tpr = tpr(in.beta, run.beta_hat, config.s);
                rec.wall_time = run.seconds;
            }
            outcome.records[unit * width + ei] = rec;
        }
    });

    for (Estimator e : config.estimators) {
        for (double snr_db : config.snr_grid) {
            SummaryRow row;
            row.estimator = e;
            row.snr_db = snr_db;
            for (const TrialRecord& rec : outcome.records) {
                if (rec.estimator != e || rec.snr_db != snr_db)
                    continue;
                ++row.trials;
                if (rec.failed) {
                    ++row.failures;
                    continue;
                }
                row.mean_relative_error += rec.relative_error;
                row.mean_tpr += rec.tpr;
                row.mean_wall_time += rec.wall_time;
            }
            const int ok = row.trials - row.failures;
            if (ok > 0) {
                row.mean_relative_error /= ok;
                row.mean_tpr /= ok;
                row.mean_wall_time /= ok;
            }
            outcome.summary.push_back(row);
        }
    }
    return outcome;
}

struct ReducedObservationRow {
    int n = 0;
    Estimator estimator = Estimator::bpdn;
    double mean_tpr = 0.0;
};

struct TprDropRow {
    Estimator estimator = Estimator::bpdn;
    int n_from = 0;
    int n_to = 0;
    double tpr_drop = 0.0;
};

struct ReducedObservationStudy {
    std::vector<ReducedObservationRow> rows;
    std::vector<TprDropRow> drops;
};

// Reruns the TPR sweep while shrinking the observation window: the design is
// generated once at the largest n, then truncated row-wise and renormalized
// for each smaller n. Signal streams are shared across n so the comparison
// is paired; noise is redrawn per n since its length changes.
inline ReducedObservationStudy reduced_observation_study(const ExperimentConfig& config,
                                                         const std::vector<int>& n_values) {
    if (n_values.empty())
        throw std::invalid_argument("reduced_observation_study: empty n grid");
    if (config.snr_grid.empty() || config.trials_per_level < 1 || config.s < 1 ||
        config.estimators.empty())
        throw std::invalid_argument("reduced_observation_study: invalid sweep configuration");
    for (std::size_t i = 1; i < n_values.size(); ++i)
        if (n_values[i] > n_values[i - 1])
            throw std::invalid_argument("reduced_observation_study: n values must descend");

    const Matrix base = materialize_design(config);
    if (base.rows() < n_values.front())
        throw std::invalid_argument("reduced_observation_study: design has too few rows");

    ReducedObservationStudy study;
    std::map<std::pair<int, Estimator>, std::pair<double, int>> accum;

    for (int n : n_values) {
        const Matrix x = unit_normalize_columns(base.topRows(n));

        std::optional<CraTransform> transform;
        const bool needs_cra =
            std::any_of(config.estimators.begin(), config.estimators.end(), [](Estimator e) {
                return e == Estimator::cra || e == Estimator::cra_ols;
            });
        if (needs_cra && config.q >= 1) {
            ClusterModel cluster;
            if (config.clustering_method == ClusteringMethod::kmeans) {
                Rng cluster_rng = Rng(config.base_seed).derive(
                    {0x6bULL, static_cast<std::uint64_t>(n)});
                cluster = kmeans_columns(x, config.q, config.kmeans_restarts, 100, cluster_rng);
            } else {
                cluster = top_subspace(x, config.q);
            }
            transform = build_transform(x, cluster);
        }

        for (std::size_t li = 0; li < config.snr_grid.size(); ++li) {
            for (int t = 0; t < config.trials_per_level; ++t) {
                Rng beta_rng = Rng(config.base_seed).derive(
                    {0xbe7aULL, static_cast<std::uint64_t>(li), static_cast<std::uint64_t>(t)});
                detail::TrialInputs in;
                in.beta = sample_sparse_beta(static_cast<int>(x.cols()), config.s, beta_rng);
                const Vector y0 = x * in.beta;
                Rng noise_rng = Rng(config.base_seed).derive(
                    {0x6e0ULL, static_cast<std::uint64_t>(li), static_cast<std::uint64_t>(t),
                     static_cast<std::uint64_t>(n)});
                auto [y, eta] = add_noise_snr(y0, config.snr_grid[li], noise_rng);
                in.y = y;
                in.eta = eta;

                auto runs = detail::run_estimators(x, transform ? &*transform : nullptr, in,
                                                   config.s, config.estimators, config.solver);
                for (Estimator e : config.estimators) {
                    auto& slot = accum[{n, e}];
                    slot.first += tpr(in.beta, runs.at(e).beta_hat, config.s);
                    slot.second += 1;
                }
            }
        }
    }

    for (int n : n_values)
        for (Estimator e : config.estimators) {
            const auto& slot = accum.at({n, e});
            study.rows.push_back({n, e, slot.first / slot.second});
        }
    for (std::size_t i = 1; i < n_values.size(); ++i)
        for (Estimator e : config.estimators) {
            const auto& hi = accum.at({n_values[i - 1], e});
            const auto& lo = accum.at({n_values[i], e});
            study.drops.push_back({e, n_values[i - 1], n_values[i],
                                   hi.first / hi.second - lo.first / lo.second});
        }
    return study;
}

struct TimingRow {
    std::string name;
    double mean_seconds = 0.0;
    int count = 0;
};

// Mean wall time per estimator; clustering appears as its own row because it
// runs once per sweep, not once per trial.
inline std::vector<TimingRow> timing_report(const std::vector<TrialRecord>& records,
                                            double clustering_seconds = 0.0) {
    std::vector<TimingRow> table;
    if (records.empty())
        return table;
    for (Estimator e : {Estimator::cra, Estimator::cra_ols, Estimator::bpdn,
                        Estimator::bpdn_ols, Estimator::swap}) {
        TimingRow row;
        row.name = estimator_name(e);
        for (const TrialRecord& rec : records) {
            if (rec.estimator != e || rec.failed)
                continue;
            row.mean_seconds += rec.wall_time;
            ++row.count;
        }
        if (row.count > 0) {
            row.mean_seconds /= row.count;
            table.push_back(row);
        }
    }
    table.push_back({"clustering", clustering_seconds, 1});
    return table;
}

// Record CSVs carry only seed-determined values so identical configurations
// produce byte-identical files; wall times vary run to run and live in the
// timing table instead.
inline std::string records_to_csv(const std::vector<TrialRecord>& records) {
    detail::CsvTable csv;
    csv.header = {"snr_db", "trial", "estimator", "relative_error",
                  "tpr",    "input_digest", "failed"};
    for (const TrialRecord& rec : records)
        csv.rows.push_back({detail::format_double(rec.snr_db), detail::format_int(rec.trial),
                            estimator_name(rec.estimator),
                            detail::format_double(rec.relative_error),
                            detail::format_double(rec.tpr), detail::hex64(rec.input_digest),
                            rec.failed ? "1" : "0"});
    return csv.to_string();
}

inline std::string summary_to_csv(const std::vector<SummaryRow>& summary) {
    detail::CsvTable csv;
    csv.header = {"estimator", "snr_db", "mean_relative_error", "mean_tpr", "trials",
                  "failures"};
    for (const SummaryRow& row : summary)
        csv.rows.push_back({estimator_name(row.estimator), detail::format_double(row.snr_db),
                            detail::format_double(row.mean_relative_error),
                            detail::format_double(row.mean_tpr), detail::format_int(row.trials),
                            detail::format_int(row.failures)});
    return csv.to_string();
}

inline std::string timing_to_csv(const std::vector<TimingRow>& rows) {
    detail::CsvTable csv;
    csv.header = {"name", "mean_seconds", "count"};
    for (const TimingRow& row : rows)
        csv.rows.push_back({row.name, detail::format_double(row.mean_seconds),
                            detail::format_int(row.count)});
    return csv.to_string();
}

}  // namespace cra
