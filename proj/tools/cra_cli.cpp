// Command-line front end: generate synthetic designs, solve sparse
// regression problems, run diagnostics, and drive benchmark sweeps. Every
// run writes a manifest tying its outputs to the resolved configuration.

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cstdint>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "cra/cra.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kVersion = "1.0.0";

std::string iso_timestamp() {
    const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    char buf[32];
    std::tm tm_utc{};
    gmtime_r(&now, &tm_utc);
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm_utc);
    return buf;
}

std::string default_out_dir() {
    const char* env = std::getenv("CRA_OUT_DIR");
    return env && *env ? env : ".";
}

void write_manifest(const fs::path& dir, const json& resolved_config,
                    std::uint64_t base_seed, const std::vector<std::string>& outputs) {
    json manifest;
    manifest["config_digest"] = cra::detail::hex64(cra::detail::fnv1a64(resolved_config.dump()));
    manifest["base_seed"] = base_seed;
    manifest["artifact_version"] = kVersion;
    manifest["timestamp"] = iso_timestamp();
    manifest["outputs"] = outputs;
    cra::detail::write_text_file((dir / "manifest.json").string(), manifest.dump(2) + "\n");
}

cra::Matrix load_matrix_csv(const std::string& path) {
    return cra::load_csv(path).values;
}

void write_matrix_csv(const fs::path& path, const cra::Matrix& m, const std::string& stem) {
    std::vector<std::string> labels;
    for (Eigen::Index c = 0; c < m.cols(); ++c)
        labels.push_back(stem + std::to_string(c + 1));
    cra::detail::write_text_file(path.string(), cra::series_to_csv(m, labels));
}

void write_vector_csv(const fs::path& path, const cra::Vector& v, const std::string& label) {
    cra::detail::write_text_file(path.string(), cra::series_to_csv(v, {label}));
}

cra::ClusteringMethod clustering_from_name(const std::string& name) {
    if (name == "kmeans")
        return cra::ClusteringMethod::kmeans;
    if (name == "top_subspace")
        return cra::ClusteringMethod::top_subspace;
    throw CLI::ValidationError("clustering must be kmeans or top_subspace");
}

// Ensemble schema: {"type": "cap"|"factor"|"matrix", ...}. Cap centers are
// drawn from the seed unless a centers CSV is supplied.
struct EnsembleChoice {
    std::variant<cra::CapEnsembleSpec, cra::FactorModelSpec, cra::Matrix> value;
    int n = 0;
    int p = 0;
};

EnsembleChoice resolve_ensemble(const json& cfg, std::uint64_t seed) {
    if (!cfg.contains("ensemble"))
        throw std::invalid_argument("config: missing 'ensemble'");
    const json& e = cfg.at("ensemble");
    const std::string type = e.at("type").get<std::string>();
    EnsembleChoice out;
    if (type == "cap") {
        const int n = e.at("n").get<int>();
        const int p = e.at("p").get<int>();
        const int q = e.at("q").get<int>();
        const double height = e.at("height").get<double>();
        cra::CapEnsembleSpec spec;
        if (e.contains("centers_csv")) {
            const cra::Matrix centers = load_matrix_csv(e.at("centers_csv").get<std::string>());
            for (Eigen::Index j = 0; j < centers.cols(); ++j)
                spec.caps.push_back({centers.col(j).normalized(), height});
        } else {
            const cra::Rng base(seed);
            for (int j = 0; j < q; ++j) {
                cra::Rng stream = base.derive({0xceULL, static_cast<std::uint64_t>(j)});
                spec.caps.push_back({cra::uniform_sphere(n, stream), height});
            }
        }
        spec.assignment = cra::round_robin_assignment(static_cast<int>(spec.caps.size()), p);
        out.n = n;
        out.p = p;
        out.value = std::move(spec);
    } else if (type == "factor") {
        cra::FactorModelSpec spec;
        spec.n = e.at("n").get<int>();
        spec.p = e.at("p").get<int>();
        spec.q = e.at("q").get<int>();
        if (e.contains("ar1")) spec.ar1 = e.at("ar1").get<double>();
        if (e.contains("ar2")) spec.ar2 = e.at("ar2").get<double>();
        if (e.contains("loading_std")) spec.loading_std = e.at("loading_std").get<double>();
        if (e.contains("idiosyncratic_std"))
            spec.idiosyncratic_std = e.at("idiosyncratic_std").get<double>();
        if (e.contains("burn_in")) spec.burn_in = e.at("burn_in").get<int>();
        out.n = spec.n;
        out.p = spec.p;
        out.value = spec;
    } else if (type == "matrix") {
        cra::Matrix m = load_matrix_csv(e.at("path").get<std::string>());
        out.n = static_cast<int>(m.rows());
        out.p = static_cast<int>(m.cols());
        out.value = std::move(m);
    } else {
        throw std::invalid_argument("config: ensemble type must be cap, factor, or matrix");
    }
    return out;
}

int cmd_generate(const std::string& config_path, const std::string& out_dir,
                 std::int64_t seed_override) {
    json cfg = json::parse(cra::detail::read_text_file(config_path));
    std::uint64_t seed = cfg.value("seed", 1ULL);
    if (seed_override >= 0)
        seed = static_cast<std::uint64_t>(seed_override);
    cfg["seed"] = seed;

    EnsembleChoice ensemble = resolve_ensemble(cfg, seed);
    const cra::Rng base(seed);
    cra::Matrix x;
    json truth;
    if (auto* cap = std::get_if<cra::CapEnsembleSpec>(&ensemble.value)) {
        auto [m, model] = cra::generate_cap_matrix(*cap, base.derive({0xe5ULL}));
        x = std::move(m);
        truth["type"] = "cap";
        truth["labels"] = model.labels;
        truth["q"] = model.q;
    } else if (auto* factor = std::get_if<cra::FactorModelSpec>(&ensemble.value)) {
        x = cra::generate_factor_matrix(*factor, base.derive({0xe5ULL}));
        truth["type"] = "factor";
        truth["q"] = factor->q;
    } else {
        x = std::get<cra::Matrix>(ensemble.value);
        truth["type"] = "matrix";
    }

    const fs::path dir(out_dir);
    fs::create_directories(dir);
    std::vector<std::string> outputs = {"X.csv", "truth.json"};
    write_matrix_csv(dir / "X.csv", x, "x");

    if (cfg.contains("s")) {
        const int s = cfg.at("s").get<int>();
        cra::Rng beta_rng = base.derive({0xbe7aULL});
        const cra::Vector beta = cra::sample_sparse_beta(ensemble.p, s, beta_rng);
        write_vector_csv(dir / "beta.csv", beta, "beta");
        outputs.push_back("beta.csv");
        const cra::Vector y0 = x * beta;
        double eta = 0.0;
        cra::Vector y = y0;
        if (cfg.contains("snr_db")) {
            cra::Rng noise_rng = base.derive({0x6e0ULL});
            auto [noisy, realized] = cra::add_noise_snr(y0, cfg.at("snr_db").get<double>(),
                                                        noise_rng);
            y = noisy;
            eta = realized;
        }
        write_vector_csv(dir / "y.csv", y, "y");
        outputs.push_back("y.csv");
        truth["eta"] = eta;
        truth["s"] = s;
    }
    cra::detail::write_text_file((dir / "truth.json").string(), truth.dump(2) + "\n");
    write_manifest(dir, cfg, seed, outputs);
    std::cout << "generated " << x.rows() << "x" << x.cols() << " design in " << out_dir
              << "\n";
    return 0;
}

int cmd_solve(const std::string& matrix_path, const std::string& rhs_path,
              const std::string& method, double eta, int s, int q,
              const std::string& clustering, std::uint64_t seed,
              const std::string& out_dir) {
    const cra::Matrix x = load_matrix_csv(matrix_path);
    const cra::Matrix rhs = load_matrix_csv(rhs_path);
    if (rhs.cols() != 1)
        throw std::invalid_argument("rhs must be a single-column CSV");
    const cra::Vector y = rhs.col(0);
    if (y.size() != x.rows())
        throw std::invalid_argument("matrix and rhs dimensions do not match");

    cra::Vector beta_hat;
    bool converged = true;
    if (method == "bpdn") {
        cra::RecoveryResult r = cra::bpdn(x, y, eta);
        beta_hat = r.coefficients;
        converged = r.converged;
    } else if (method == "cra") {
        cra::CraOptions opts;
        opts.clustering = clustering_from_name(clustering);
        opts.cluster_seed = seed;
        cra::CraEstimate est = cra::run_cra(x, y, q, eta, opts);
        beta_hat = est.beta_hat;
        converged = est.solver_result.converged;
    } else if (method == "omp") {
        beta_hat = cra::omp(x, y, s).coefficients;
    } else if (method == "iht") {
        cra::RecoveryResult r = cra::iht(x, y, s);
        beta_hat = r.coefficients;
        converged = r.converged;
    } else if (method == "swap") {
        cra::RecoveryResult init = cra::bpdn(x, y, eta);
        std::vector<Eigen::Index> sup =
            cra::support_of(cra::best_k_approx(init.coefficients, s));
        cra::RecoveryResult r = cra::swap_refine(x, y, sup);
        beta_hat = r.coefficients;
    } else {
        throw CLI::ValidationError("method must be bpdn, cra, omp, iht, or swap");
    }

    const fs::path dir(out_dir);
    fs::create_directories(dir);
    write_vector_csv(dir / "estimate.csv", beta_hat, "beta_hat");
    json cfg = {{"matrix", matrix_path}, {"rhs", rhs_path},   {"method", method},
                {"eta", eta},           {"s", s},            {"q", q},
                {"clustering", clustering}, {"seed", seed}};
    write_manifest(dir, cfg, seed, {"estimate.csv"});
    if (!converged)
        std::cerr << "warning: solver did not report convergence\n";
    std::cout << "estimate written to " << (dir / "estimate.csv").string() << "\n";
    return 0;
}

int cmd_diagnose(const std::string& matrix_path, const std::string& check, int k,
                 const std::string& mode, std::uint64_t budget, int trials, int pad,
                 int q, std::uint64_t seed, const std::string& centroids_path,
                 const std::string& out_dir) {
    const cra::Matrix x = load_matrix_csv(matrix_path);
    const fs::path dir(out_dir);
    fs::create_directories(dir);
    cra::Rng rng(seed);
    json cfg = {{"matrix", matrix_path}, {"check", check}, {"k", k},
                {"mode", mode},          {"budget", budget}, {"trials", trials},
                {"pad", pad},            {"q", q},          {"seed", seed}};
    std::vector<std::string> outputs;

    if (check == "rip") {
        const cra::RipMode m =
            (mode == "exhaustive") ? cra::RipMode::exhaustive : cra::RipMode::monte_carlo;
        cra::RipEstimate est = cra::rip_constant(x, k, m, budget, rng);
        cra::detail::CsvTable csv;
        csv.header = {"order", "delta", "mode", "subsets_checked"};
        csv.rows.push_back({cra::detail::format_int(est.order),
                            cra::detail::format_double(est.delta),
                            est.mode == cra::RipMode::exhaustive ? "exhaustive" : "monte_carlo",
                            cra::detail::format_int(static_cast<long long>(est.subsets_checked))});
        cra::detail::write_text_file((dir / "rip_report.csv").string(), csv.to_string());
        outputs.push_back("rip_report.csv");
        std::cout << "delta_" << k << " = " << est.delta << "\n";
    } else if (check == "unitary") {
        cra::UnitaryInvarianceReport rep =
            cra::verify_unitary_invariance(x, pad, k, trials, rng);
        cra::detail::CsvTable csv;
        csv.header = {"base_delta", "max_deviation", "trials"};
        csv.rows.push_back({cra::detail::format_double(rep.base_delta),
                            cra::detail::format_double(rep.max_deviation),
                            cra::detail::format_int(rep.trials)});
        cra::detail::write_text_file((dir / "unitary_report.csv").string(), csv.to_string());
        outputs.push_back("unitary_report.csv");
        std::cout << "max deviation = " << rep.max_deviation << "\n";
    } else if (check == "gram") {
        write_matrix_csv(dir / "gram.csv", cra::gram_matrix(x), "g");
        outputs.push_back("gram.csv");
    } else if (check == "spectrum") {
        const cra::ClusterModel cluster = cra::top_subspace(x, q);
        const cra::CraTransform transform = cra::build_transform(x, cluster);
        cra::Matrix reference(x.rows(), x.cols());
        const cra::Rng base(seed);
        for (Eigen::Index j = 0; j < x.cols(); ++j) {
            cra::Rng stream = base.derive({0x7e5ULL, static_cast<std::uint64_t>(j)});
            reference.col(j) = cra::uniform_sphere(static_cast<int>(x.rows()), stream);
        }
        cra::SpectrumReport rep = cra::spectrum_report(x, transform.x_tilde, reference);
        cra::detail::CsvTable csv;
        csv.header = {"index", "x", "x_tilde", "reference"};
        for (std::size_t i = 0; i < rep.x.size(); ++i)
            csv.rows.push_back({cra::detail::format_int(static_cast<long long>(i + 1)),
                                cra::detail::format_double(rep.x[i]),
                                cra::detail::format_double(rep.x_tilde[i]),
                                cra::detail::format_double(rep.reference[i])});
        cra::detail::write_text_file((dir / "spectrum.csv").string(), csv.to_string());
        outputs.push_back("spectrum.csv");
    } else if (check == "uniformity") {
        if (centroids_path.empty())
            throw std::invalid_argument("uniformity check requires --centroids");
        const cra::Matrix centroids = load_matrix_csv(centroids_path);
        cra::ClusterModel cluster;
        cluster.q = static_cast<int>(centroids.cols());
        cluster.centroids = centroids;
        cluster.labels.assign(static_cast<std::size_t>(x.cols()), 0);
        cluster.subspace = cra::qr_orthonormalize(centroids);
        const cra::CraTransform transform = cra::build_transform(x, cluster);
        std::vector<Eigen::Index> retained;
        for (Eigen::Index i = 0; i < x.cols(); ++i)
            if (transform.normalizers[static_cast<std::size_t>(i)] > 0.0)
                retained.push_back(i);
        cra::Matrix samples(x.rows(), static_cast<Eigen::Index>(retained.size()));
        for (std::size_t i = 0; i < retained.size(); ++i)
            samples.col(static_cast<Eigen::Index>(i)) = transform.x_tilde.col(retained[i]);
        cra::UniformityReport rep = cra::uniformity_test(samples, transform.subspace, 0.01);
        cra::detail::CsvTable csv;
        csv.header = {"pass", "samples", "complement_dim", "tests", "max_abs_mean_z",
                      "mean_z_threshold", "min_ks_p", "ks_level"};
        csv.rows.push_back({rep.pass ? "1" : "0", cra::detail::format_int(rep.sample_count),
                            cra::detail::format_int(rep.complement_dim),
                            cra::detail::format_int(rep.tests),
                            cra::detail::format_double(rep.max_abs_mean_z),
                            cra::detail::format_double(rep.mean_z_threshold),
                            cra::detail::format_double(rep.min_ks_p),
                            cra::detail::format_double(rep.ks_level)});
        cra::detail::write_text_file((dir / "uniformity_report.csv").string(), csv.to_string());
        outputs.push_back("uniformity_report.csv");
        std::cout << "uniformity " << (rep.pass ? "pass" : "fail") << "\n";
    } else {
        throw CLI::ValidationError("check must be rip, unitary, gram, spectrum, or uniformity");
    }
    write_manifest(dir, cfg, seed, outputs);
    return 0;
}

cra::ExperimentConfig experiment_config_from_json(json& cfg, std::int64_t seed_override,
                                                  int trials_override, int s_override,
                                                  int threads) {
    cra::ExperimentConfig config;
    std::uint64_t seed = cfg.value("seed", 1ULL);
    if (seed_override >= 0)
        seed = static_cast<std::uint64_t>(seed_override);
    cfg["seed"] = seed;
    config.base_seed = seed;

    EnsembleChoice ensemble = resolve_ensemble(cfg, seed);
    config.ensemble = std::move(ensemble.value);
    if (cfg.contains("s")) config.s = cfg.at("s").get<int>();
    if (s_override > 0) config.s = s_override;
    if (cfg.contains("snr_grid")) config.snr_grid = cfg.at("snr_grid").get<std::vector<double>>();
    if (cfg.contains("trials_per_level"))
        config.trials_per_level = cfg.at("trials_per_level").get<int>();
    if (trials_override > 0) config.trials_per_level = trials_override;
    if (cfg.contains("estimators")) {
        config.estimators.clear();
        for (const auto& name : cfg.at("estimators"))
            config.estimators.push_back(cra::estimator_from_name(name.get<std::string>()));
    }
    if (cfg.contains("q")) config.q = cfg.at("q").get<int>();
    if (cfg.contains("clustering_method"))
        config.clustering_method =
            clustering_from_name(cfg.at("clustering_method").get<std::string>());
    if (cfg.contains("kmeans_restarts"))
        config.kmeans_restarts = cfg.at("kmeans_restarts").get<int>();
    config.threads = threads;
    return config;
}

int cmd_bench(const std::string& config_path, const std::string& out_dir,
              std::int64_t seed_override, int trials_override, int s_override,
              int threads) {
    json cfg = json::parse(cra::detail::read_text_file(config_path));
    cra::ExperimentConfig config =
        experiment_config_from_json(cfg, seed_override, trials_override, s_override, threads);

    const cra::ExperimentOutcome outcome = cra::run_experiment(config);
    const fs::path dir(out_dir);
    fs::create_directories(dir);
    cra::detail::write_text_file((dir / "records.csv").string(),
                                 cra::records_to_csv(outcome.records));
    cra::detail::write_text_file((dir / "summary.csv").string(),
                                 cra::summary_to_csv(outcome.summary));
    cra::detail::write_text_file(
        (dir / "timing.csv").string(),
        cra::timing_to_csv(cra::timing_report(outcome.records, outcome.clustering_seconds)));
    write_manifest(dir, cfg, config.base_seed, {"records.csv", "summary.csv", "timing.csv"});

    int failures = 0;
    for (const cra::TrialRecord& rec : outcome.records)
        failures += rec.failed ? 1 : 0;
    std::cout << outcome.records.size() << " records written to " << out_dir << " ("
              << failures << " failures)\n";
    return failures == 0 ? 0 : 2;
}

int cmd_ingest(const std::string& input_path, const std::string& out_dir,
               const std::string& detrend) {
    cra::DetrendMode mode = cra::DetrendMode::linear;
    if (detrend == "none")
        mode = cra::DetrendMode::none;
    else if (detrend == "mean")
        mode = cra::DetrendMode::mean_only;
    else if (detrend != "linear")
        throw CLI::ValidationError("detrend must be none, mean, or linear");

    const cra::SeriesTable table = cra::load_csv(input_path);
    const cra::PreprocessedSeries processed = cra::preprocess(table, mode);

    const fs::path dir(out_dir);
    fs::create_directories(dir);
    cra::detail::write_text_file((dir / "processed.csv").string(),
                                 cra::series_to_csv(processed.values, processed.labels));
    json cfg = {{"input", input_path}, {"detrend", detrend}};
    write_manifest(dir, cfg, 0, {"processed.csv"});
    std::cout << "processed " << processed.values.rows() << "x" << processed.values.cols()
              << " series table\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Sparse regression toolkit for highly correlated designs"};
    app.require_subcommand(1);

    std::string config_path, out_dir = default_out_dir();
    std::int64_t seed_override = -1;
    int trials_override = 0, s_override = 0;
    int threads = 0;

    auto* generate = app.add_subcommand("generate", "Generate a synthetic design");
    generate->add_option("--config", config_path, "JSON config")->required();
    generate->add_option("--out", out_dir, "Output directory");
    generate->add_option("--seed", seed_override, "Override config seed");

    std::string matrix_path, rhs_path, method = "bpdn", clustering = "kmeans";
    double eta = 0.0;
    int s = 20, q = 0, k = 2, pad = 0, trials = 50;
    std::uint64_t budget = 1000000, seed = 1;
    auto* solve = app.add_subcommand("solve", "Solve one sparse regression instance");
    solve->add_option("--matrix", matrix_path, "Design CSV")->required();
    solve->add_option("--rhs", rhs_path, "Observation CSV")->required();
    solve->add_option("--method", method, "bpdn | cra | omp | iht | swap");
    solve->add_option("--eta", eta, "Residual bound");
    solve->add_option("--s", s, "Sparsity for omp/iht/swap");
    solve->add_option("--q", q, "Cluster count for cra");
    solve->add_option("--clustering", clustering, "kmeans | top_subspace");
    solve->add_option("--seed", seed, "Clustering seed");
    solve->add_option("--out", out_dir, "Output directory");

    std::string check = "rip", mode = "exhaustive", centroids_path;
    auto* diagnose = app.add_subcommand("diagnose", "Run a diagnostic check");
    diagnose->add_option("--matrix", matrix_path, "Design CSV")->required();
    diagnose->add_option("--check", check, "rip | unitary | gram | spectrum | uniformity");
    diagnose->add_option("--k", k, "Subset order");
    diagnose->add_option("--mode", mode, "exhaustive | monte_carlo");
    diagnose->add_option("--budget", budget, "Subset budget");
    diagnose->add_option("--trials", trials, "Rotation trials");
    diagnose->add_option("--pad", pad, "Zero rows to pad");
    diagnose->add_option("--q", q, "Subspace dimension for spectrum");
    diagnose->add_option("--centroids", centroids_path, "Centroid CSV for uniformity");
    diagnose->add_option("--seed", seed, "RNG seed");
    diagnose->add_option("--out", out_dir, "Output directory");

    auto* bench = app.add_subcommand("bench", "Run a benchmark sweep");
    bench->add_option("--config", config_path, "JSON config")->required();
    bench->add_option("--out", out_dir, "Output directory");
    bench->add_option("--seed", seed_override, "Override config seed");
    bench->add_option("--trials", trials_override, "Override trials per level");
    bench->add_option("--s", s_override, "Override sparsity");
    bench->add_option("--threads", threads, "Worker threads (0 = all cores)");

    std::string input_path, detrend = "linear";
    auto* ingest = app.add_subcommand("ingest", "Load and preprocess a series CSV");
    ingest->add_option("--input", input_path, "Raw CSV")->required();
    ingest->add_option("--detrend", detrend, "none | mean | linear");
    ingest->add_option("--out", out_dir, "Output directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << e.what() << "\n";
        return 1;
    }

    try {
        if (generate->parsed())
            return cmd_generate(config_path, out_dir, seed_override);
        if (solve->parsed())
            return cmd_solve(matrix_path, rhs_path, method, eta, s, q, clustering, seed,
                             out_dir);
        if (diagnose->parsed())
            return cmd_diagnose(matrix_path, check, k, mode, budget, trials, pad, q, seed,
                                centroids_path, out_dir);
        if (bench->parsed())
            return cmd_bench(config_path, out_dir, seed_override, trials_override, s_override,
                             threads);
        if (ingest->parsed())
            return cmd_ingest(input_path, out_dir, detrend);
    } catch (const CLI::ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const nlohmann::json::exception& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "runtime failure: " << e.what() << "\n";
        return 2;
    }
    return 1;
}
