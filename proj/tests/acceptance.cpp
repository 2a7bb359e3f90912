// Acceptance suite: one pass/fail line per criterion, exit 0 only if all pass.

#include <Eigen/Dense>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <string>
#include <vector>

#include "qkband/dataset.hpp"
#include "qkband/gram.hpp"
#include "qkband/learners.hpp"
#include "qkband/spectral.hpp"
#include "qkband/statevector.hpp"
#include "qkband/theory.hpp"
#include "support/oracles.hpp"

using namespace qkband;

namespace {

struct Runner {
    int failures = 0;

    void criterion(int number, const std::string& name, const std::function<bool()>& body) {
        const auto start = std::chrono::steady_clock::now();
        bool ok = false;
        std::string error;
        try {
            ok = body();
        } catch (const std::exception& e) {
            error = e.what();
        }
        const double seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        std::printf("[%s] criterion %d: %s (%.1fs)%s%s\n", ok ? "PASS" : "FAIL", number,
                    name.c_str(), seconds, error.empty() ? "" : " error: ", error.c_str());
        std::fflush(stdout);
        if (!ok) ++failures;
    }
};

bool check(bool condition, const std::string& what) {
    if (!condition) std::printf("       failed: %s\n", what.c_str());
    return condition;
}

// Grams built across the suite, re-checked wholesale in criterion 8.
std::vector<GramMatrix> gram_corpus;

GramMatrix tracked_gram(const FeatureMapSpec& spec, const Eigen::MatrixXd& X,
                        const GramOptions& opt = {}) {
    GramMatrix G = gram(spec, X, opt);
    if (G.size() <= 600) gram_corpus.push_back(G);
    return G;
}

// ---------------------------------------------------------------------------

bool criterion_single_qubit_exactness() {
    const SingleQubitSpectrum s = single_qubit_spectrum(1.0);
    bool ok = check(std::abs(s.l1 - 0.5) < 1e-15, "l1(1) = 1/2");
    ok &= check(std::abs(s.l2 - 0.25) < 1e-15, "l2(1) = 1/4");
    ok &= check(std::abs(s.l3 - 0.25) < 1e-15, "l3(1) = 1/4");
    ok &= check(s.l4 == 0.0, "l4(1) = 0");
    SplitMix64 gen(1);
    for (int i = 0; i < 100; ++i) {
        const double c = gen.uniform(1e-9, 1.0);
        const SingleQubitSpectrum t = single_qubit_spectrum(c);
        ok &= check(std::abs(t.l1 + t.l2 + t.l3 - 1.0) < 1e-12,
                    "unit trace at c = " + std::to_string(c));
    }
    return ok;
}

// Top eigenvalues of G/P, descending; eigenvalues-only decomposition (the
// convergence checks do not need eigenvectors, and skipping them halves the
// cost at P = 4000).
std::vector<double> top_scaled_eigenvalues(const GramMatrix& G, int count) {
    const Eigen::Index P = G.entries.rows();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(
        G.entries / static_cast<double>(P), Eigen::EigenvaluesOnly);
    std::vector<double> top;
    for (int k = 0; k < count; ++k) top.push_back(solver.eigenvalues()(P - 1 - k));
    return top;
}

bool criterion_empirical_convergence() {
    bool ok = true;
    {
        const int P = 4000;
        const Eigen::MatrixXd X = sample_uniform(1, P, 21);
        const FeatureMapSpec spec{MapFamily::ProductRx, 1.0, 1, std::nullopt};
        const std::vector<double> top = top_scaled_eigenvalues(gram(spec, X), 3);
        const double expected[3] = {0.5, 0.25, 0.25};
        for (int k = 0; k < 3; ++k) {
            ok &= check(std::abs(top[static_cast<std::size_t>(k)] - expected[k]) < 0.05,
                        "n=1 eigenvalue " + std::to_string(k));
        }
    }
    {
        const int P = 3000;
        const int n = 4;
        const Eigen::MatrixXd X = sample_uniform(n, P, 22);
        const FeatureMapSpec spec{MapFamily::ProductRx, 1.0, n, std::nullopt};
        const std::vector<double> top = top_scaled_eigenvalues(gram(spec, X), 5);
        // 2^{-n-k} ladder with degeneracy 2^k C(n,k): top five are
        // 2^-4 once and 2^-5 four more times.
        const double expected[5] = {0.0625, 0.03125, 0.03125, 0.03125, 0.03125};
        for (int k = 0; k < 5; ++k) {
            ok &= check(std::abs(top[static_cast<std::size_t>(k)] - expected[k]) < 0.05,
                        "n=4 eigenvalue " + std::to_string(k));
        }
    }
    return ok;
}

bool criterion_haar_covariance() {
    // Monte Carlo over 20000 Haar states, q = 2, checking the tabulated
    // two-copy spectrum (1/10 x10, 0 x6) and, additionally, the vectorized
    // embedding covariance whose spectrum the kernel operator shares
    // (1/4 x1, 1/20 x15).
    const int q = 2;
    const int dim = 1 << q;
    const int draws = 20000;
    Eigen::MatrixXcd two_copy = Eigen::MatrixXcd::Zero(dim * dim, dim * dim);
    Eigen::MatrixXcd embed_cov = Eigen::MatrixXcd::Zero(dim * dim, dim * dim);
    Eigen::VectorXcd vec(dim * dim);
    Eigen::MatrixXcd rho(dim, dim);
    for (int d = 0; d < draws; ++d) {
        const Statevector s = random_haar_state(q, substream(33, d));
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

    bool ok = true;
    {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> solver(two_copy);
        const HaarCovarianceSpectrum expected = haar_covariance_spectrum(q);
        for (int i = 0; i < dim * dim; ++i) {
            const double mc = solver.eigenvalues()(dim * dim - 1 - i);
            const double truth =
                i < expected.nonzero_multiplicity ? expected.nonzero_value : 0.0;
            ok &= check(std::abs(mc - truth) < 0.005,
                        "two-copy eigenvalue " + std::to_string(i));
        }
    }
    {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> solver(embed_cov);
        const HaarEmbeddingCovarianceSpectrum expected = haar_embedding_covariance_spectrum(q);
        ok &= check(std::abs(solver.eigenvalues()(dim * dim - 1) - expected.top_value) < 0.005,
                    "embedding covariance top eigenvalue");
        for (int i = 1; i < dim * dim; ++i) {
            const double mc = solver.eigenvalues()(dim * dim - 1 - i);
            ok &= check(std::abs(mc - expected.bulk_value) < 0.005,
                        "embedding covariance bulk eigenvalue " + std::to_string(i));
        }
    }
    return ok;
}

bool criterion_learning_curve_reproduction() {
    const int n = 20;
    const double ridge = 1e-10;
    const std::vector<int> grid{10, 40, 150, 550, 2000};
    const std::vector<double> bandwidths{1.0, 1.0 / std::sqrt(20.0), 0.1};

    const auto factor = [n](double x) { return std::exp(-x * x / (static_cast<double>(n) * n)); };
    // At least 20 trials everywhere; many more at small P, where fits are
    // cheap and trial variance is largest.
    const auto trials_for = [](int P) { return std::clamp(20000 / P, 48, 2000); };

    bool ok = true;
    for (std::size_t ci = 0; ci < bandwidths.size(); ++ci) {
        const double c = bandwidths[ci];
        FeatureMapSpec spec{MapFamily::ProductRx, c, n, std::nullopt};

        const TheoryInput input = product_rx_theory_input(n, c, factor, ridge);
        std::vector<double> pgrid(grid.begin(), grid.end());
        const TheoryCurve theory = learning_curve(input, pgrid);

        LearningCurveOptions opt;
        opt.test_points = 2000;
        std::vector<double> means, ses;
        for (std::size_t i = 0; i < grid.size(); ++i) {
            const int trials = trials_for(grid[i]);
            const std::vector<int> single{grid[i]};
            const EmpiricalCurve point = empirical_learning_curve(
                spec, target_gaussian, single, ridge, trials, substream(44, 16 * ci + i), opt);
            means.push_back(point.mean_errors.front());
            ses.push_back(point.stddev_errors.front() / std::sqrt(trials));
        }

        const double initial = means.front();
        const double final_error = means.back();
        const double total_power = generalization_error(input, 0.0).error;
        std::printf("       c=%.4f: E(10)=%.5g E(2000)=%.5g ratio=%.3g\n", c, initial,
                    final_error, final_error / initial);
        for (std::size_t i = 0; i < grid.size(); ++i) {
            const double rel = std::abs(theory.errors[i] - means[i]) / means[i];
            // Annotate the two regimes where the self-consistent prediction
            // is known to run outside 10%: the entry into a learning stage
            // at small P, and the fully-learned floor where E_g sits many
            // orders below the total target power, at the solver's numerical
            // resolution.
            const char* regime = "";
            if (rel > 0.10) {
                regime = means[i] < 1e-6 * total_power ? "  [numerical floor]" : "  [stage entry]";
            }
            std::printf(
                "       c=%.4f P=%-5d theory=%.5g empirical=%.5g (se %.1f%%) rel=%.3f%s\n", c,
                grid[i], theory.errors[i], means[i], 100.0 * ses[i] / means[i], rel, regime);
            ok &= check(rel <= 0.10, "theory within 10% at P = " + std::to_string(grid[i]) +
                                         ", c = " + std::to_string(c));
        }
        if (ci == 0) {
            ok &= check(final_error / initial > 0.9, "c = 1 curve is flat");
        }
        if (ci == 2) {
            ok &= check(final_error / initial < 0.5, "c = 2/n curve halves");
            ok &= check(final_error <= initial, "c = 2/n curve decreasing endpoint to endpoint");
        }
    }
    return ok;
}

bool criterion_optimal_bandwidth_location() {
    bool ok = true;
    std::vector<double> c_grid;
    for (double c = 0.02; c <= 1.0 + 1e-12; c *= 1.38949549437314) c_grid.push_back(c);
    c_grid.push_back(1.0);
    for (int n : {20, 40}) {
        const int P = 600;
        const Eigen::MatrixXd X = sample_uniform(n, P, 55 + n);
        const Eigen::VectorXd y = target_gaussian(X);
        FeatureMapSpec base{MapFamily::ProductRx, 1.0, n, std::nullopt};
        const TuneResult result =
            tune_bandwidth(base, X, y, c_grid, 5, TuneMetric::MSE, substream(56, n));
        const double target = 2.0 / n;
        std::printf("       n=%d: c* = %.4f (target %.4f)\n", n, result.best_c, target);
        ok &= check(result.best_c >= 0.5 * target && result.best_c <= 2.0 * target,
                    "c* within a factor 2 of 2/n for n = " + std::to_string(n));
    }
    return ok;
}

bool criterion_constant_purity_scaling() {
    std::vector<double> ns, cs;
    for (int n : {16, 32, 64, 128, 256}) {
        ns.push_back(n);
        cs.push_back(bandwidth_for_constant_purity(n, 0.5));
    }
    const auto [alpha, a] = fit_scaling_exponent(ns, cs);
    bool ok = check(alpha >= 0.45 && alpha <= 0.55,
                    "purity-preserving exponent " + std::to_string(alpha));

    std::vector<double> inverse;
    for (double n : ns) inverse.push_back(2.0 / n);
    const auto [alpha2, a2] = fit_scaling_exponent(ns, inverse);
    ok &= check(std::abs(alpha2 - 1.0) <= 1e-10, "exact fit on c = 2/n");
    (void)a;
    (void)a2;
    return ok;
}

// Synthetic stand-in for an image classification export: two stripe-textured
// classes on a 28 x 28 grid, written as a flat CSV (784 features + label)
// and ingested through the real CSV/PCA/standardize/split pipeline.
std::string write_synthetic_image_csv() {
    const std::string path =
        (std::filesystem::temp_directory_path() / "qkband_acceptance_images.csv").string();
    std::ofstream out(path);
    for (int j = 0; j < 784; ++j) out << "p" << j << ",";
    out << "label\n";
    SplitMix64 gen(4242);
    char buf[32];
    for (int i = 0; i < 360; ++i) {
        const bool horizontal = i % 2 == 0;
        const double phase = gen.uniform(0.0, 6.28318530717958647692);
        const double amplitude = 0.8 + 0.4 * gen.uniform();
        const double brightness = 0.5 + 0.3 * gen.uniform();
        for (int r = 0; r < 28; ++r) {
            for (int col = 0; col < 28; ++col) {
                const double wave = horizontal ? std::sin(2.0 * kPi * r / 7.0 + phase)
                                               : std::sin(2.0 * kPi * col / 7.0 + phase);
                const double value = brightness + amplitude * wave + 0.25 * gen.normal();
                std::snprintf(buf, sizeof(buf), "%.6f", value);
                out << buf << ",";
            }
        }
        out << (horizontal ? 3 : 8) << "\n";
    }
    return path;
}

bool criterion_real_data_direction() {
    const std::string csv = write_synthetic_image_csv();
    const Dataset raw = load_csv_dataset(csv);
    std::filesystem::remove(csv);

    const int n = 10;
    const PcaResult pca = pca_project(raw.inputs, n);
    Dataset reduced;
    reduced.inputs = standardize_columns(pca.projected);
    reduced.labels = raw.labels;
    const auto [train, test] = binary_filter_and_split(reduced, 3.0, 8.0, 200, 100, 77);

    FeatureMapSpec base{MapFamily::IQP, 1.0, n, std::nullopt};
    std::vector<double> c_grid{0.05, 0.1, 0.2, 0.4, 0.7, 1.0};
    TuneOptions topt;
    const TuneResult tuned = tune_bandwidth(base, train.inputs, train.labels, c_grid, 5,
                                            TuneMetric::Accuracy, 78, topt);

    const auto test_accuracy = [&](double c) {
        FeatureMapSpec spec = base;
        spec.bandwidth = c;
        const GramMatrix G = tracked_gram(spec, train.inputs);
        const SvmModel model = svm_fit(G.entries, train.labels, {.C = 1.0});
        const Eigen::MatrixXd K = kernel_matrix(spec, test.inputs, train.inputs);
        int correct = 0;
        for (Eigen::Index i = 0; i < test.size(); ++i) {
            if (svm_predict(model, K.row(i).transpose()) == test.labels(i)) ++correct;
        }
        return static_cast<double>(correct) / static_cast<double>(test.size());
    };

    const double acc_tuned = test_accuracy(tuned.best_c);
    const double acc_unit = test_accuracy(1.0);
    std::printf("       c* = %.2f acc = %.3f | c = 1 acc = %.3f\n", tuned.best_c, acc_tuned,
                acc_unit);
    bool ok = check(acc_tuned >= acc_unit + 0.05, "tuned accuracy beats c = 1 by >= 0.05");

    FeatureMapSpec unit = base;
    const SpectrumReport flat =
        empirical_spectrum(tracked_gram(unit, train.inputs), train.labels);
    FeatureMapSpec best = base;
    best.bandwidth = tuned.best_c;
    const SpectrumReport decayed =
        empirical_spectrum(tracked_gram(best, train.inputs), train.labels);
    const double pr_unit = participation_ratio(flat.eigenvalues);
    const double pr_tuned = participation_ratio(decayed.eigenvalues);
    std::printf("       participation ratio: c=1 %.1f vs c* %.1f\n", pr_unit, pr_tuned);
    ok &= check(pr_unit >= 2.0 * pr_tuned, "c = 1 spectrum at least 2x flatter");
    return ok;
}

bool criterion_gram_bounds() {
    // Extend the corpus with dedicated grams across families and bandwidths.
    for (MapFamily family : {MapFamily::ProductRx, MapFamily::IQP, MapFamily::Evo}) {
        for (double c : {0.1, 0.5, 1.0}) {
            FeatureMapSpec spec{family, c, 4,
                                family == MapFamily::Evo ? std::optional<std::uint64_t>(5)
                                                         : std::nullopt};
            tracked_gram(spec, sample_uniform(4, 150, 99));
        }
    }
    {
        FeatureMapSpec wide{MapFamily::ProductRx, 0.1, 20, std::nullopt};
        tracked_gram(wide, sample_uniform(20, 300, 98));
    }
    bool ok = true;
    int index = 0;
    for (const GramMatrix& G : gram_corpus) {
        const GramDiagnostics d = gram_diagnostics(G);
        ok &= check(d.psd_ok, "gram " + std::to_string(index) + " PSD");
        ok &= check(d.rowsum_lower_bound_ok,
                    "gram " + std::to_string(index) + " row-sum lower bound");
        ok &= check(d.purity_upper_bound_ok,
                    "gram " + std::to_string(index) + " purity upper bound");
        ++index;
    }
    std::printf("       %d grams checked\n", index);
    return ok;
}

bool criterion_oracle_equivalences() {
    bool ok = true;
    // Simulated product-Rx kernel vs the closed form: 1000 pairs, n <= 12.
    {
        SplitMix64 gen(7);
        int pairs = 0;
        while (pairs < 1000) {
            const int n = 1 + static_cast<int>(gen.below(12));
            const double c = gen.uniform(0.05, 1.0);
            FeatureMapSpec spec{MapFamily::ProductRx, c, n, std::nullopt};
            std::vector<double> x(static_cast<std::size_t>(n)), y(static_cast<std::size_t>(n));
            for (double& v : x) v = gen.uniform(-kPi, kPi);
            for (double& v : y) v = gen.uniform(-kPi, kPi);
            const double d = std::abs(kernel_value(spec, x, y) - closed_form_product_rx(x, y, c));
            if (d >= 1e-10) {
                ok = check(false, "kernel oracle pair " + std::to_string(pairs));
                break;
            }
            ++pairs;
        }
    }
    // Tensor spectrum vs Kronecker brute force at n <= 3.
    for (int n : {1, 2, 3}) {
        for (double c : {0.25, 0.7, 1.0}) {
            const Eigen::MatrixXd sigma = oracles::single_qubit_covariance_closed(c);
            Eigen::MatrixXd kron = sigma;
            for (int i = 1; i < n; ++i) kron = oracles::kronecker(kron, sigma);
            Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(kron);
            std::vector<double> brute(solver.eigenvalues().data(),
                                      solver.eigenvalues().data() + solver.eigenvalues().size());
            std::sort(brute.rbegin(), brute.rend());
            const TensorSpectrum spec = tensor_spectrum(n, c, 1000);
            std::size_t pos = 0;
            for (const DegenerateLevel& lv : spec.levels) {
                for (int copy = 0; copy < static_cast<int>(lv.degeneracy + 0.5); ++copy) {
                    ok &= std::abs(brute[pos++] - lv.eigenvalue) < 1e-12;
                }
            }
            ok = check(ok, "tensor oracle n = " + std::to_string(n) + " c = " + std::to_string(c));
            if (!ok) return ok;
        }
    }
    // Self-consistent kappa vs the explicit single-stage solution.
    {
        const int N = 9;
        const double eta_bar = 0.75;
        std::vector<TheoryLevel> levels{{eta_bar / N, 0.0, static_cast<double>(N)}};
        for (int i = 0; i < 20 && ok; ++i) {
            for (int j = 0; j < 20; ++j) {
                const double alpha = 0.1 + 0.25 * i;
                const double ridge = j == 0 ? 0.0 : std::pow(10.0, -9.0 + 0.5 * j);
                const double direct = explicit_kappa_single_stage(alpha, eta_bar, ridge);
                const double fixed = solve_kappa(alpha * N, ridge, levels);
                if (std::abs(direct - fixed) >= 1e-9) {
                    ok = check(false, "kappa grid alpha = " + std::to_string(alpha) +
                                          " ridge = " + std::to_string(ridge));
                    break;
                }
            }
        }
    }
    // Heisenberg pair gate vs the dense matrix exponential, 100 cases.
    {
        SplitMix64 gen(8);
        for (int trial = 0; trial < 100 && ok; ++trial) {
            const double angle = gen.uniform(-2.5, 2.5);
            const Statevector s = random_haar_state(2, substream(811, trial));
            const Statevector fast = apply_heisenberg_pair(s, 0, angle);
            const Eigen::Matrix4cd U = oracles::heisenberg_pair_exponential(angle);
            Eigen::Vector4cd v;
            for (int b = 0; b < 4; ++b) v(((b & 1) << 1) | (b >> 1)) = s.amplitudes[b];
            const Eigen::Vector4cd w = U * v;
            for (int b = 0; b < 4; ++b) {
                if (std::abs(w(((b & 1) << 1) | (b >> 1)) - fast.amplitudes[b]) >= 1e-10) {
                    ok = check(false, "heisenberg oracle trial " + std::to_string(trial));
                    break;
                }
            }
        }
    }
    return ok;
}

}  // namespace

int main() {
    Runner runner;
    runner.criterion(1, "single-qubit spectrum exactness", criterion_single_qubit_exactness);
    runner.criterion(2, "empirical-analytic spectral convergence", criterion_empirical_convergence);
    runner.criterion(3, "Haar covariance spectrum", criterion_haar_covariance);
    runner.criterion(4, "learning-curve reproduction at n=20", criterion_learning_curve_reproduction);
    runner.criterion(5, "optimal bandwidth location", criterion_optimal_bandwidth_location);
    runner.criterion(6, "constant-purity scaling", criterion_constant_purity_scaling);
    runner.criterion(7, "real-data direction at desk scale", criterion_real_data_direction);
    runner.criterion(8, "spectral bounds on every gram", criterion_gram_bounds);
    runner.criterion(9, "oracle equivalences", criterion_oracle_equivalences);

    if (runner.failures == 0) {
        std::printf("all acceptance criteria passed\n");
        return 0;
    }
    std::printf("%d criterion(s) failed\n", runner.failures);
    return 1;
}
