#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "qkband/featuremap.hpp"
#include "qkband/parallel.hpp"

namespace qkband {

enum class KernelEval {
    Auto,        // closed form for wide product-Rx problems, simulation otherwise
    Simulate,    // always build statevectors
    ClosedForm,  // product-Rx analytic kernel only
};

struct GramOptions {
    KernelEval eval = KernelEval::Auto;
    int block_size = 64;                           // cached statevectors per block
    unsigned threads = 0;                          // 0 = hardware concurrency
    std::size_t max_cache_bytes = 1ull << 32;      // budget for the two live blocks
    int closed_form_min_qubits = 15;               // Auto switchover point
};

// P x P symmetric kernel matrix with the producing map attached.
struct GramMatrix {
    Eigen::MatrixXd entries;
    std::optional<FeatureMapSpec> spec;

    int size() const { return static_cast<int>(entries.rows()); }
};

namespace detail {

inline bool use_closed_form(const FeatureMapSpec& spec, const GramOptions& opt) {
    switch (opt.eval) {
        case KernelEval::ClosedForm:
            if (spec.family != MapFamily::ProductRx) {
                throw std::invalid_argument(
                    "gram: closed-form evaluation exists only for the product-rx family");
            }
            return true;
        case KernelEval::Simulate: return false;
        case KernelEval::Auto:
            return spec.family == MapFamily::ProductRx &&
                   spec.qubit_count() >= opt.closed_form_min_qubits;
    }
    return false;
}

inline void check_samples(const FeatureMapSpec& spec, const Eigen::MatrixXd& X,
                          const char* where) {
    if (X.cols() != spec.num_features) {
        throw std::invalid_argument(std::string(where) + ": samples have " +
                                    std::to_string(X.cols()) + " columns, expected " +
                                    std::to_string(spec.num_features));
    }
    if (X.rows() < 1) throw std::invalid_argument(std::string(where) + ": empty sample set");
}

// Embeds rows [begin, end) of X.
inline std::vector<Statevector> embed_block(const FeatureMapSpec& spec, const Eigen::MatrixXd& X,
                                            Eigen::Index begin, Eigen::Index end,
                                            unsigned threads) {
    std::vector<Statevector> states(static_cast<std::size_t>(end - begin));
    parallel_for(states.size(), threads, [&](std::size_t i) {
        const Eigen::Index row = begin + static_cast<Eigen::Index>(i);
        std::vector<double> x(static_cast<std::size_t>(X.cols()));
        for (Eigen::Index j = 0; j < X.cols(); ++j) x[static_cast<std::size_t>(j)] = X(row, j);
        states[i] = embed(spec, x);
    });
    return states;
}

}  // namespace detail

// Builds the Gram matrix K_{uv} = k(x^u, x^v). Each unordered pair is
// evaluated once; entries are schedule-independent, so any thread count
// produces the identical matrix. Simulated evaluation caches statevectors
// in blocks of opt.block_size; the two live blocks must fit the cache
// budget or a capacity error is raised.
inline GramMatrix gram(const FeatureMapSpec& spec, const Eigen::MatrixXd& X,
                       const GramOptions& opt = {}) {
    spec.validate();
    detail::check_samples(spec, X, "gram");
    const Eigen::Index P = X.rows();
    GramMatrix G;
    G.spec = spec;
    G.entries.resize(P, P);

    if (detail::use_closed_form(spec, opt)) {
        const double c = spec.bandwidth;
        parallel_for(static_cast<std::size_t>(P), opt.threads, [&](std::size_t ui) {
            const Eigen::Index u = static_cast<Eigen::Index>(ui);
            G.entries(u, u) = 1.0;
            for (Eigen::Index v = u + 1; v < P; ++v) {
                double k = 1.0;
                for (Eigen::Index j = 0; j < X.cols(); ++j) {
                    const double cc = std::cos(0.5 * c * (X(u, j) - X(v, j)));
                    k *= cc * cc;
                }
                G.entries(u, v) = k;
                G.entries(v, u) = k;
            }
        });
        return G;
    }

    const int q = spec.qubit_count();
    const Eigen::Index B = std::min<Eigen::Index>(std::max(1, opt.block_size), P);
    const std::size_t block_bytes =
        2 * static_cast<std::size_t>(B) * (std::size_t{1} << q) * sizeof(Complex);
    if (block_bytes > opt.max_cache_bytes) {
        throw std::length_error(
            "gram: statevector cache needs " + std::to_string(block_bytes) +
            " bytes (block " + std::to_string(B) + ", " + std::to_string(q) +
            " qubits), budget is " + std::to_string(opt.max_cache_bytes) +
            "; lower block_size or raise max_cache_bytes");
    }

    for (Eigen::Index ib = 0; ib < P; ib += B) {
        const Eigen::Index iend = std::min(P, ib + B);
        const std::vector<Statevector> rows = detail::embed_block(spec, X, ib, iend, opt.threads);
        // Diagonal block.
        parallel_for(rows.size(), opt.threads, [&](std::size_t ui) {
            const Eigen::Index u = ib + static_cast<Eigen::Index>(ui);
            G.entries(u, u) = 1.0;
            for (Eigen::Index v = u + 1; v < iend; ++v) {
                const double k =
                    std::norm(inner_product(rows[ui], rows[static_cast<std::size_t>(v - ib)]));
                G.entries(u, v) = k;
                G.entries(v, u) = k;
            }
        });
        for (Eigen::Index jb = iend; jb < P; jb += B) {
            const Eigen::Index jend = std::min(P, jb + B);
            const std::vector<Statevector> cols =
                detail::embed_block(spec, X, jb, jend, opt.threads);
            parallel_for(rows.size(), opt.threads, [&](std::size_t ui) {
                const Eigen::Index u = ib + static_cast<Eigen::Index>(ui);
                for (Eigen::Index v = jb; v < jend; ++v) {
                    const double k = std::norm(
                        inner_product(rows[ui], cols[static_cast<std::size_t>(v - jb)]));
                    G.entries(u, v) = k;
                    G.entries(v, u) = k;
                }
            });
        }
    }
    return G;
}

// Cross-kernel block K_{uv} = k(z^u, x^v) between two sample sets.
inline Eigen::MatrixXd kernel_matrix(const FeatureMapSpec& spec, const Eigen::MatrixXd& Z,
                                     const Eigen::MatrixXd& X, const GramOptions& opt = {}) {
    spec.validate();
    detail::check_samples(spec, Z, "kernel_matrix");
    detail::check_samples(spec, X, "kernel_matrix");
    Eigen::MatrixXd K(Z.rows(), X.rows());
    if (detail::use_closed_form(spec, opt)) {
        const double c = spec.bandwidth;
        parallel_for(static_cast<std::size_t>(Z.rows()), opt.threads, [&](std::size_t ui) {
            const Eigen::Index u = static_cast<Eigen::Index>(ui);
            for (Eigen::Index v = 0; v < X.rows(); ++v) {
                double k = 1.0;
                for (Eigen::Index j = 0; j < X.cols(); ++j) {
                    const double cc = std::cos(0.5 * c * (Z(u, j) - X(v, j)));
                    k *= cc * cc;
                }
                K(u, v) = k;
            }
        });
        return K;
    }
    const std::vector<Statevector> xs = detail::embed_block(spec, X, 0, X.rows(), opt.threads);
    parallel_for(static_cast<std::size_t>(Z.rows()), opt.threads, [&](std::size_t ui) {
        const Eigen::Index u = static_cast<Eigen::Index>(ui);
        std::vector<double> z(static_cast<std::size_t>(Z.cols()));
        for (Eigen::Index j = 0; j < Z.cols(); ++j) z[static_cast<std::size_t>(j)] = Z(u, j);
        const Statevector zu = embed(spec, z);
        for (Eigen::Index v = 0; v < X.rows(); ++v) {
            // Coinciding samples get the exact fidelity 1.
            if (Z.row(u) == X.row(v)) {
                K(u, v) = 1.0;
            } else {
                K(u, v) = std::norm(inner_product(zu, xs[static_cast<std::size_t>(v)]));
            }
        }
    });
    return K;
}

// k(x)_u = k(x, x^u) against a training set.
inline Eigen::VectorXd kernel_vector(const FeatureMapSpec& spec, const Eigen::MatrixXd& X,
                                     std::span<const double> x, const GramOptions& opt = {}) {
    Eigen::MatrixXd Z(1, static_cast<Eigen::Index>(x.size()));
    for (std::size_t j = 0; j < x.size(); ++j) Z(0, static_cast<Eigen::Index>(j)) = x[j];
    return kernel_matrix(spec, Z, X, opt).row(0).transpose();
}

// Monte Carlo estimate of the kernel's double average over the data
// distribution (the purity of the mean embedding): the mean of all P^2
// Gram entries.
inline double purity_empirical(const GramMatrix& G) {
    const Eigen::Index P = G.entries.rows();
    if (P < 2) throw std::invalid_argument("purity_empirical: need at least 2 samples");
    return G.entries.mean();
}

inline double sinc(double y) { return y == 0.0 ? 1.0 : std::sin(y) / y; }

// Purity of the product-Rx map under uniform inputs on [-pi, pi]^n. Per
// coordinate the kernel's double average is
//   E[cos^2(c(x-x')/2)] = (1 + E[cos(cx)]^2) / 2 = (1 + sinc(pi c)^2) / 2,
// so M = 2^{-n} (1 + sinc(pi c)^2)^n. (The sinc enters squared; the two
// averages factorize. This matches the Monte Carlo estimator at every c,
// and reduces to 2^{-n} at c = 1 and to 1 as c -> 0.)
inline double purity_toy_analytic(int n, double c) {
    if (n < 1) throw std::invalid_argument("purity_toy_analytic: n must be >= 1");
    if (!(c > 0.0) || c > 1.0) {
        throw std::invalid_argument("purity_toy_analytic: c must lie in (0, 1]");
    }
    const double pi = 3.14159265358979323846;
    const double s = sinc(pi * c);
    return std::pow(0.5 * (1.0 + s * s), n);
}

// Spectral sanity bounds every Gram must satisfy: the uniform-vector lower
// bound lambda_max >= 1 + (P-1) * min offdiagonal, and the purity upper
// bound lambda_max / P <= sqrt(mean entry) + 5 / sqrt(P).
struct GramDiagnostics {
    double lambda_max = 0.0;
    double lambda_min = 0.0;
    double mean_entry = 0.0;
    double min_offdiag = 0.0;
    bool psd_ok = false;
    bool rowsum_lower_bound_ok = false;
    bool purity_upper_bound_ok = false;

    bool all_ok() const { return psd_ok && rowsum_lower_bound_ok && purity_upper_bound_ok; }
};

inline GramDiagnostics gram_diagnostics(const GramMatrix& G) {
    const Eigen::Index P = G.entries.rows();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(G.entries,
                                                          Eigen::EigenvaluesOnly);
    if (solver.info() != Eigen::Success) {
        throw std::runtime_error("gram_diagnostics: eigensolver failed to converge");
    }
    GramDiagnostics d;
    d.lambda_max = solver.eigenvalues().maxCoeff();
    d.lambda_min = solver.eigenvalues().minCoeff();
    d.mean_entry = G.entries.mean();
    d.min_offdiag = 1.0;
    for (Eigen::Index u = 0; u < P; ++u) {
        for (Eigen::Index v = 0; v < P; ++v) {
            if (u != v) d.min_offdiag = std::min(d.min_offdiag, G.entries(u, v));
        }
    }
    if (P == 1) d.min_offdiag = 0.0;
    d.psd_ok = d.lambda_min >= -1e-8 * static_cast<double>(P);
    const double slack = 1e-9 * static_cast<double>(P);
    const double avg_rowsum = G.entries.sum() / static_cast<double>(P);
    d.rowsum_lower_bound_ok =
        d.lambda_max >= avg_rowsum - slack &&
        avg_rowsum >= 1.0 + static_cast<double>(P - 1) * d.min_offdiag - slack;
    d.purity_upper_bound_ok =
        d.lambda_max / static_cast<double>(P) <=
        std::sqrt(std::max(0.0, d.mean_entry)) + 5.0 / std::sqrt(static_cast<double>(P));
    return d;
}

// --- serialization ---------------------------------------------------------

// CSV: one row per line, 17 significant digits.
inline void save_gram_csv(const std::string& path, const GramMatrix& G) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("save_gram_csv: cannot open " + path);
    const Eigen::Index P = G.entries.rows();
    char buf[40];
    for (Eigen::Index u = 0; u < P; ++u) {
        for (Eigen::Index v = 0; v < P; ++v) {
            std::snprintf(buf, sizeof(buf), "%.17g", G.entries(u, v));
            out << buf << (v + 1 == P ? '\n' : ',');
        }
    }
    if (!out) throw std::runtime_error("save_gram_csv: write failed for " + path);
}

// Binary: magic "QKGM", u32 P, then P*P little-endian f64 entries row-major.
inline void save_gram_binary(const std::string& path, const GramMatrix& G) {
    static_assert(std::endian::native == std::endian::little,
                  "binary gram format assumes a little-endian host");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("save_gram_binary: cannot open " + path);
    out.write("QKGM", 4);
    const std::uint32_t P = static_cast<std::uint32_t>(G.entries.rows());
    out.write(reinterpret_cast<const char*>(&P), sizeof(P));
    for (Eigen::Index u = 0; u < G.entries.rows(); ++u) {
        for (Eigen::Index v = 0; v < G.entries.cols(); ++v) {
            const double e = G.entries(u, v);
            out.write(reinterpret_cast<const char*>(&e), sizeof(e));
        }
    }
    if (!out) throw std::runtime_error("save_gram_binary: write failed for " + path);
}

inline GramMatrix load_gram_binary(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("load_gram_binary: cannot open " + path);
    char magic[4];
    in.read(magic, 4);
    if (!in || std::string(magic, 4) != "QKGM") {
        throw std::runtime_error("load_gram_binary: bad magic in " + path);
    }
    std::uint32_t P = 0;
    in.read(reinterpret_cast<char*>(&P), sizeof(P));
    GramMatrix G;
    G.entries.resize(P, P);
    for (std::uint32_t u = 0; u < P; ++u) {
        for (std::uint32_t v = 0; v < P; ++v) {
            double e = 0.0;
            in.read(reinterpret_cast<char*>(&e), sizeof(e));
            G.entries(u, v) = e;
        }
    }
    if (!in) throw std::runtime_error("load_gram_binary: truncated file " + path);
    return G;
}

}  // namespace qkband
