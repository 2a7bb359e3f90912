// qkband: reproducible experiments around bandwidth-equipped quantum kernels.
//
// Subcommands build Gram matrices, kernel spectra, predicted and measured
// learning curves, cross-validated bandwidth sweeps, purity tables, and a
// Haar covariance check. Every output file carries a provenance header with
// the full configuration and seed, so a run can be repeated bit-identically.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "qkband/dataset.hpp"
#include "qkband/gram.hpp"
#include "qkband/learners.hpp"
#include "qkband/spectral.hpp"
#include "qkband/theory.hpp"

namespace {

constexpr const char* kVersion = "0.1.0";

using json = nlohmann::json;

struct CommonConfig {
    std::string map = "product-rx";
    int n = 4;
    std::vector<double> c_grid{1.0};
    std::vector<int> p_grid{100};
    double ridge = 1e-10;
    std::uint64_t seed = 1;
    int trials = 1;
    std::string out;
    std::string format = "csv";
    unsigned threads = 0;
    std::uint64_t evo_seed = 7;
    std::string target = "gaussian";
    std::string data_path;
    int pca_components = 0;
    std::string config_path;

    qkband::FeatureMapSpec spec(double c) const {
        qkband::FeatureMapSpec s;
        s.family = qkband::parse_family(map);
        s.bandwidth = c;
        s.num_features = n;
        if (s.family == qkband::MapFamily::Evo) s.evo_seed = evo_seed;
        return s;
    }

    Eigen::VectorXd apply_target(const Eigen::MatrixXd& X) const {
        if (target == "gaussian") return qkband::target_gaussian(X);
        if (target == "cos-last") return qkband::target_cos_last(X);
        throw CLI::ValidationError("--target must be gaussian or cos-last");
    }
};

void add_common_flags(CLI::App* cmd, CommonConfig& cfg) {
    cmd->add_option("--map", cfg.map, "Feature map family: product-rx, iqp, or evo")
        ->check(CLI::IsMember({"product-rx", "iqp", "evo"}));
    cmd->add_option("--n", cfg.n, "Input dimension (qubits; evo uses n+1)")->check(CLI::Range(1, 26));
    cmd->add_option("--c", cfg.c_grid, "Bandwidth value(s)");
    cmd->add_option("--c-grid", cfg.c_grid, "Bandwidth grid (alias of --c)");
    cmd->add_option("--p-grid", cfg.p_grid, "Training-set sizes");
    cmd->add_option("--ridge", cfg.ridge, "KRR ridge parameter");
    cmd->add_option("--seed", cfg.seed, "Master seed; all randomness derives from it");
    cmd->add_option("--trials", cfg.trials, "Monte Carlo repetitions")->check(CLI::PositiveNumber);
    cmd->add_option("--out", cfg.out, "Output path (required here or in --config)");
    cmd->add_option("--format", cfg.format, "Output format")
        ->check(CLI::IsMember({"csv", "json", "binary"}));
    cmd->add_option("--threads", cfg.threads, "Worker thread cap (0 = hardware)");
    cmd->add_option("--evo-seed", cfg.evo_seed, "Seed of the evo initial product state");
    cmd->add_option("--config", cfg.config_path, "Flat key=value config file (flags win)");
}

// Flat key=value configuration with precedence flags > config > defaults.
// Keys match the provenance names (map, n, c_grid, p_grid, ridge, seed,
// trials, out, format, threads, evo_seed, target, data, pca, folds).
void apply_config_file(CLI::App* cmd, CommonConfig& cfg, int* folds) {
    if (cfg.config_path.empty()) return;
    std::ifstream in(cfg.config_path);
    if (!in) throw std::runtime_error("cannot open config file " + cfg.config_path);

    const auto given = [&](const std::string& flag) {
        const CLI::Option* opt = cmd->get_option_no_throw(flag);
        return opt != nullptr && opt->count() > 0;
    };
    const auto split_doubles = [](const std::string& text) {
        std::vector<double> values;
        std::stringstream ss(text);
        double v;
        while (ss >> v) values.push_back(v);
        return values;
    };

    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line[0] == '#') continue;
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos) {
            throw std::runtime_error("config line " + std::to_string(line_no) +
                                     ": expected key=value");
        }
        const std::string key = line.substr(0, eq);
        const std::string value = line.substr(eq + 1);
        if (key == "map" && !given("--map")) {
            cfg.map = value;
        } else if (key == "n" && !given("--n")) {
            cfg.n = std::stoi(value);
        } else if ((key == "c" || key == "c_grid") && !given("--c") && !given("--c-grid")) {
            cfg.c_grid = split_doubles(value);
        } else if (key == "p_grid" && !given("--p-grid")) {
            cfg.p_grid.clear();
            for (double v : split_doubles(value)) cfg.p_grid.push_back(static_cast<int>(v));
        } else if (key == "ridge" && !given("--ridge")) {
            cfg.ridge = std::stod(value);
        } else if (key == "seed" && !given("--seed")) {
            cfg.seed = std::stoull(value);
        } else if (key == "trials" && !given("--trials")) {
            cfg.trials = std::stoi(value);
        } else if (key == "out" && !given("--out")) {
            cfg.out = value;
        } else if (key == "format" && !given("--format")) {
            cfg.format = value;
        } else if (key == "threads" && !given("--threads")) {
            cfg.threads = static_cast<unsigned>(std::stoul(value));
        } else if (key == "evo_seed" && !given("--evo-seed")) {
            cfg.evo_seed = std::stoull(value);
        } else if (key == "target" && !given("--target")) {
            cfg.target = value;
        } else if (key == "data" && !given("--data")) {
            cfg.data_path = value;
        } else if (key == "pca" && !given("--pca")) {
            cfg.pca_components = std::stoi(value);
        } else if (key == "folds" && folds != nullptr && !given("--folds")) {
            *folds = std::stoi(value);
        }
        // Unknown keys are ignored so one config can serve several commands.
    }
}

// Everything needed to re-run the command, echoed into each output.
std::map<std::string, std::string> provenance(const std::string& command,
                                              const CommonConfig& cfg,
                                              std::map<std::string, std::string> extra = {}) {
    std::map<std::string, std::string> p;
    p["version"] = kVersion;
    p["command"] = command;
    p["map"] = cfg.map;
    p["n"] = std::to_string(cfg.n);
    std::string cs;
    for (double c : cfg.c_grid) cs += (cs.empty() ? "" : " ") + std::to_string(c);
    p["c_grid"] = cs;
    std::string ps;
    for (int v : cfg.p_grid) ps += (ps.empty() ? "" : " ") + std::to_string(v);
    p["p_grid"] = ps;
    p["ridge"] = std::to_string(cfg.ridge);
    p["seed"] = std::to_string(cfg.seed);
    p["trials"] = std::to_string(cfg.trials);
    p["threads"] = std::to_string(cfg.threads);
    if (cfg.map == "evo") p["evo_seed"] = std::to_string(cfg.evo_seed);
    for (auto& [k, v] : extra) p[k] = v;
    return p;
}

struct Table {
    std::vector<std::string> columns;
    std::vector<std::vector<double>> rows;

    void add(std::initializer_list<double> row) { rows.emplace_back(row); }
};

void write_table(const std::string& path, const std::string& format, const Table& table,
                 const std::map<std::string, std::string>& prov) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open output file " + path);
    if (format == "json") {
        json j;
        j["provenance"] = prov;
        j["columns"] = table.columns;
        j["rows"] = table.rows;
        out << j.dump(2) << '\n';
    } else {
        for (const auto& [k, v] : prov) out << "# " << k << "=" << v << '\n';
        for (std::size_t i = 0; i < table.columns.size(); ++i) {
            out << table.columns[i] << (i + 1 == table.columns.size() ? '\n' : ',');
        }
        char buf[40];
        for (const auto& row : table.rows) {
            for (std::size_t i = 0; i < row.size(); ++i) {
                std::snprintf(buf, sizeof(buf), "%.17g", row[i]);
                out << buf << (i + 1 == row.size() ? '\n' : ',');
            }
        }
    }
    if (!out) throw std::runtime_error("write failed for " + path);
}

// Inputs and labels for experiment commands: either the synthetic uniform
// toy task or an ingested CSV reduced with PCA and standardized.
struct Problem {
    Eigen::MatrixXd X;
    Eigen::VectorXd y;
    bool classification = false;
};

Problem load_problem(const CommonConfig& cfg, int samples) {
    Problem prob;
    if (cfg.data_path.empty()) {
        prob.X = qkband::sample_uniform(cfg.n, samples, qkband::substream(cfg.seed, 100));
        prob.y = cfg.apply_target(prob.X);
        return prob;
    }
    const qkband::Dataset ds = qkband::load_csv_dataset(cfg.data_path);
    const int m = cfg.pca_components > 0 ? cfg.pca_components : cfg.n;
    const qkband::PcaResult pca = qkband::pca_project(ds.inputs, m);
    prob.X = qkband::standardize_columns(pca.projected);
    prob.y = ds.labels;
    prob.classification = true;
    if (samples > 0 && samples < prob.X.rows()) {
        prob.X = prob.X.topRows(samples).eval();
        prob.y = prob.y.head(samples).eval();
    }
    return prob;
}

int cmd_spectrum(const CommonConfig& cfg) {
    const int samples = cfg.p_grid.front();
    Table empirical;
    empirical.columns = {"c", "rank", "eigenvalue", "weight", "cumulative_power"};
    Table analytic;
    analytic.columns = {"c", "scaling_index", "eigenvalue", "degeneracy"};

    for (double c : cfg.c_grid) {
        const qkband::FeatureMapSpec spec = cfg.spec(c);
        const Problem prob = load_problem(cfg, samples);
        qkband::GramOptions gopt;
        gopt.threads = cfg.threads;
        const qkband::GramMatrix G = qkband::gram(spec, prob.X, gopt);
        const qkband::SpectrumReport report = qkband::empirical_spectrum(G, prob.y);
        const double total = report.target_weights.squaredNorm();
        double tail = total;
        for (Eigen::Index k = 0; k < report.eigenvalues.size(); ++k) {
            tail -= report.target_weights(k) * report.target_weights(k);
            const double cum = total > 0.0 ? 1.0 - std::max(0.0, tail) / total : 0.0;
            empirical.add({c, static_cast<double>(k + 1), report.eigenvalues(k),
                           report.target_weights(k), cum});
        }
        if (spec.family == qkband::MapFamily::ProductRx) {
            const qkband::TensorSpectrum levels = qkband::tensor_spectrum(cfg.n, c, 64);
            for (const qkband::DegenerateLevel& lv : levels.levels) {
                analytic.add({c, static_cast<double>(lv.scaling_index), lv.eigenvalue,
                              lv.degeneracy});
            }
        }
    }
    const auto prov = provenance("spectrum", cfg, {{"samples", std::to_string(samples)}});
    write_table(cfg.out, cfg.format, empirical, prov);
    if (!analytic.rows.empty()) {
        write_table(cfg.out + ".analytic", cfg.format, analytic, prov);
    }
    return 0;
}

int cmd_learning_curve(const CommonConfig& cfg) {
    Table table;
    table.columns = {"c", "P", "eg_theory", "eg_empirical", "eg_empirical_std", "kappa", "gamma"};
    for (double c : cfg.c_grid) {
        const qkband::FeatureMapSpec spec = cfg.spec(c);

        qkband::TheoryInput theory_input;
        if (spec.family == qkband::MapFamily::ProductRx && cfg.data_path.empty()) {
            const int n = cfg.n;
            const std::string target = cfg.target;
            const auto factor = [n, target](double x) {
                return target == "gaussian" ? std::exp(-x * x / (static_cast<double>(n) * n)) : 1.0;
            };
            if (cfg.target == "gaussian") {
                theory_input = qkband::product_rx_theory_input(n, c, factor, cfg.ridge);
            } else {
                // Non-product targets fall back to the empirical route below.
            }
        }
        if (theory_input.levels.empty()) {
            const int reference = std::max(cfg.p_grid.back(), 512);
            const Problem prob = load_problem(cfg, reference);
            qkband::GramOptions gopt;
            gopt.threads = cfg.threads;
            const qkband::GramMatrix G = qkband::gram(spec, prob.X, gopt);
            theory_input = qkband::theory_input_from_report(
                qkband::empirical_spectrum(G, prob.y), cfg.ridge);
        }

        std::vector<double> grid(cfg.p_grid.begin(), cfg.p_grid.end());
        const qkband::TheoryCurve theory = qkband::learning_curve(theory_input, grid);

        qkband::LearningCurveOptions lopt;
        lopt.threads = cfg.threads;
        const qkband::EmpiricalCurve measured = qkband::empirical_learning_curve(
            spec, [&](const Eigen::MatrixXd& X) { return cfg.apply_target(X); }, cfg.p_grid,
            cfg.ridge, cfg.trials, qkband::substream(cfg.seed, 7), lopt);

        for (std::size_t i = 0; i < grid.size(); ++i) {
            table.add({c, grid[i], theory.errors[i], measured.mean_errors[i],
                       measured.stddev_errors[i], theory.kappas[i], theory.gammas[i]});
        }
    }
    write_table(cfg.out, cfg.format, table, provenance("learning-curve", cfg,
                                                       {{"target", cfg.target}}));
    return 0;
}

int cmd_tune(const CommonConfig& cfg, const std::vector<int>& n_grid, int folds) {
    Table table;
    table.columns = {"n", "c", "score", "chosen"};
    std::vector<double> ns, cstars;
    const std::vector<int> dims = n_grid.empty() ? std::vector<int>{cfg.n} : n_grid;
    for (int n : dims) {
        CommonConfig local = cfg;
        local.n = n;
        const Problem prob = load_problem(local, cfg.p_grid.front());
        qkband::TuneOptions topt;
        topt.ridge = cfg.ridge;
        topt.threads = cfg.threads;
        const qkband::TuneMetric metric =
            prob.classification ? qkband::TuneMetric::Accuracy : qkband::TuneMetric::MSE;
        const qkband::TuneResult result =
            qkband::tune_bandwidth(local.spec(1.0), prob.X, prob.y, cfg.c_grid, folds, metric,
                                   qkband::substream(cfg.seed, 11), topt);
        for (std::size_t ci = 0; ci < cfg.c_grid.size(); ++ci) {
            table.add({static_cast<double>(n), cfg.c_grid[ci], result.scores[ci],
                       cfg.c_grid[ci] == result.best_c ? 1.0 : 0.0});
        }
        ns.push_back(n);
        cstars.push_back(result.best_c);
    }
    auto prov = provenance("tune", cfg, {{"folds", std::to_string(folds)}});
    if (ns.size() >= 3) {
        const auto [alpha, a] = qkband::fit_scaling_exponent(ns, cstars);
        prov["fit_alpha"] = std::to_string(alpha);
        prov["fit_prefactor"] = std::to_string(a);
    }
    write_table(cfg.out, cfg.format, table, prov);
    return 0;
}

int cmd_gram(const CommonConfig& cfg) {
    const qkband::FeatureMapSpec spec = cfg.spec(cfg.c_grid.front());
    const Problem prob = load_problem(cfg, cfg.p_grid.front());
    if (!cfg.data_path.empty()) {
        qkband::DatasetProvenance dp;
        dp.source = cfg.data_path;
        dp.seed = cfg.seed;
        dp.pca_components = cfg.pca_components > 0 ? cfg.pca_components : cfg.n;
        qkband::save_provenance_sidecar(cfg.out, dp);
    }
    qkband::GramOptions gopt;
    gopt.threads = cfg.threads;
    const qkband::GramMatrix G = qkband::gram(spec, prob.X, gopt);
    const qkband::GramDiagnostics diag = qkband::gram_diagnostics(G);
    if (cfg.format == "binary") {
        qkband::save_gram_binary(cfg.out, G);
        // The binary container has no header; provenance goes alongside.
        std::ofstream sidecar(cfg.out + ".provenance");
        for (const auto& [k, v] : provenance("gram", cfg)) sidecar << k << "=" << v << '\n';
    } else if (cfg.format == "json") {
        json j;
        j["provenance"] = provenance("gram", cfg);
        j["entries"] = std::vector<std::vector<double>>();
        for (Eigen::Index u = 0; u < G.entries.rows(); ++u) {
            std::vector<double> row(static_cast<std::size_t>(G.entries.cols()));
            for (Eigen::Index v = 0; v < G.entries.cols(); ++v) {
                row[static_cast<std::size_t>(v)] = G.entries(u, v);
            }
            j["entries"].push_back(row);
        }
        std::ofstream out(cfg.out);
        out << j.dump() << '\n';
    } else {
        qkband::save_gram_csv(cfg.out, G);
    }
    std::cout << "P=" << G.size() << " lambda_max=" << diag.lambda_max
              << " lambda_min=" << diag.lambda_min << " psd=" << (diag.psd_ok ? "ok" : "VIOLATED")
              << " rowsum_bound=" << (diag.rowsum_lower_bound_ok ? "ok" : "VIOLATED")
              << " purity_bound=" << (diag.purity_upper_bound_ok ? "ok" : "VIOLATED") << '\n';
    return diag.all_ok() ? 0 : 2;
}

int cmd_purity(const CommonConfig& cfg) {
    Table table;
    table.columns = {"c", "purity_empirical", "purity_analytic"};
    const int samples = cfg.p_grid.front();
    for (double c : cfg.c_grid) {
        const qkband::FeatureMapSpec spec = cfg.spec(c);
        const Problem prob = load_problem(cfg, samples);
        qkband::GramOptions gopt;
        gopt.threads = cfg.threads;
        const qkband::GramMatrix G = qkband::gram(spec, prob.X, gopt);
        const double analytic = spec.family == qkband::MapFamily::ProductRx
                                    ? qkband::purity_toy_analytic(cfg.n, c)
                                    : std::nan("");
        table.add({c, qkband::purity_empirical(G), analytic});
    }
    write_table(cfg.out, cfg.format, table,
                provenance("purity", cfg, {{"samples", std::to_string(samples)}}));
    return 0;
}

int cmd_haar_check(const CommonConfig& cfg, int qubits, int draws) {
    const qkband::HaarCovarianceSpectrum two_copy_expected =
        qkband::haar_covariance_spectrum(qubits);
    const qkband::HaarEmbeddingCovarianceSpectrum embed_expected =
        qkband::haar_embedding_covariance_spectrum(qubits);
    const int dim = 1 << qubits;
    Eigen::MatrixXcd two_copy = Eigen::MatrixXcd::Zero(dim * dim, dim * dim);
    Eigen::MatrixXcd embed_cov = Eigen::MatrixXcd::Zero(dim * dim, dim * dim);
    Eigen::VectorXcd vec(dim * dim);
    Eigen::MatrixXcd rho(dim, dim);
    for (int d = 0; d < draws; ++d) {
        const qkband::Statevector s =
            qkband::random_haar_state(qubits, qkband::substream(cfg.seed, d));
        for (int i = 0; i < dim; ++i) {
            for (int j = 0; j < dim; ++j) {
                rho(i, j) = s.amplitudes[static_cast<std::size_t>(i)] *
                            std::conj(s.amplitudes[static_cast<std::size_t>(j)]);
                vec(i * dim + j) = rho(i, j);
            }
        }
        embed_cov += vec * vec.adjoint();
        for (int i = 0; i < dim; ++i) {
            for (int j = 0; j < dim; ++j) {
                for (int k = 0; k < dim; ++k) {
                    for (int l = 0; l < dim; ++l) {
                        two_copy(i * dim + j, k * dim + l) += rho(i, k) * rho(j, l);
                    }
                }
            }
        }
    }
    two_copy /= draws;
    embed_cov /= draws;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> two_solver(two_copy);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> embed_solver(embed_cov);

    Table table;
    table.columns = {"index", "two_copy_analytic", "two_copy_mc", "embedding_analytic",
                     "embedding_mc"};
    for (int i = 0; i < dim * dim; ++i) {
        const double two_analytic =
            i < two_copy_expected.nonzero_multiplicity ? two_copy_expected.nonzero_value : 0.0;
        const double embed_analytic =
            i == 0 ? embed_expected.top_value : embed_expected.bulk_value;
        table.add({static_cast<double>(i), two_analytic,
                   two_solver.eigenvalues()(dim * dim - 1 - i), embed_analytic,
                   embed_solver.eigenvalues()(dim * dim - 1 - i)});
    }
    write_table(cfg.out, cfg.format, table,
                provenance("haar-check", cfg,
                           {{"qubits", std::to_string(qubits)}, {"draws", std::to_string(draws)}}));
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Bandwidth-equipped quantum kernel experiments"};
    app.set_version_flag("--version", kVersion);
    app.require_subcommand(1);

    CommonConfig cfg;
    int folds = 5;
    std::vector<int> n_grid;
    int haar_qubits = 2;
    int haar_draws = 20000;

    CLI::App* spectrum = app.add_subcommand(
        "spectrum", "Empirical and analytic kernel spectra with target alignment");
    add_common_flags(spectrum, cfg);
    spectrum->add_option("--target", cfg.target, "Toy target: gaussian or cos-last");
    spectrum->add_option("--data", cfg.data_path, "CSV dataset (last column = label)");
    spectrum->add_option("--pca", cfg.pca_components, "PCA components for --data");

    CLI::App* curve = app.add_subcommand(
        "learning-curve", "Predicted and measured generalization error vs sample count");
    add_common_flags(curve, cfg);
    curve->add_option("--target", cfg.target, "Toy target: gaussian or cos-last");

    CLI::App* tune = app.add_subcommand("tune", "Cross-validated bandwidth sweep");
    add_common_flags(tune, cfg);
    tune->add_option("--folds", folds, "Cross-validation folds")->check(CLI::Range(2, 32));
    tune->add_option("--n-grid", n_grid, "Repeat the sweep per dimension and fit c*(n)");
    tune->add_option("--target", cfg.target, "Toy target: gaussian or cos-last");
    tune->add_option("--data", cfg.data_path, "CSV dataset (last column = label)");
    tune->add_option("--pca", cfg.pca_components, "PCA components for --data");

    CLI::App* gram = app.add_subcommand("gram", "Write a Gram matrix (csv, json, or binary)");
    add_common_flags(gram, cfg);
    gram->add_option("--data", cfg.data_path, "CSV dataset (last column = label)");
    gram->add_option("--pca", cfg.pca_components, "PCA components for --data");

    CLI::App* purity = app.add_subcommand("purity", "Empirical vs analytic kernel purity");
    add_common_flags(purity, cfg);

    CLI::App* haar = app.add_subcommand("haar-check",
                                        "Monte Carlo vs analytic Haar covariance spectrum");
    add_common_flags(haar, cfg);
    haar->add_option("--qubits", haar_qubits, "Register size")->check(CLI::Range(1, 3));
    haar->add_option("--draws", haar_draws, "Monte Carlo samples")->check(CLI::PositiveNumber);

    CLI11_PARSE(app, argc, argv);

    try {
        CLI::App* active = app.get_subcommands().front();
        apply_config_file(active, cfg, &folds);
        if (cfg.out.empty()) throw CLI::ValidationError("--out is required");
        if (spectrum->parsed()) return cmd_spectrum(cfg);
        if (curve->parsed()) return cmd_learning_curve(cfg);
        if (tune->parsed()) return cmd_tune(cfg, n_grid, folds);
        if (gram->parsed()) return cmd_gram(cfg);
        if (purity->parsed()) return cmd_purity(cfg);
        if (haar->parsed()) return cmd_haar_check(cfg, haar_qubits, haar_draws);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 1;
}
