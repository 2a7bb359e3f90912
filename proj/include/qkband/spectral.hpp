#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstdio>
#include <functional>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "qkband/gram.hpp"
#include "qkband/quadrature.hpp"
#include "qkband/theory.hpp"

namespace qkband {

inline constexpr double kPi = 3.14159265358979323846;

// ---------------------------------------------------------------------------
// Single-qubit integral-operator spectrum of k(x,x') = cos^2(c(x-x')/2) with
// x uniform on [-pi, pi]. The operator has rank 3; the four closed-form
// eigenvalues satisfy l1 > l2 >= l3 > l4 = 0 and l1 + l2 + l3 = 1.
// ---------------------------------------------------------------------------

struct SingleQubitSpectrum {
    double l1, l2, l3, l4;
    std::array<double, 4> as_array() const { return {l1, l2, l3, l4}; }
};

inline SingleQubitSpectrum single_qubit_spectrum(double c) {
    if (!(c > 0.0) || c > 1.0) {
        throw std::invalid_argument("single_qubit_spectrum: c must lie in (0, 1]");
    }
    const double s1 = sinc(kPi * c);
    const double s2 = sinc(2.0 * kPi * c);
    const double root = std::sqrt((1.0 - s2) * (1.0 - s2) + 16.0 * s1 * s1);
    SingleQubitSpectrum s;
    s.l1 = 0.375 + 0.125 * s2 + 0.125 * root;
    s.l2 = 0.25 - 0.25 * s2;
    // Stable form of 0.375 + s2/8 - root/8: the difference (3 + s2 - root)/8
    // cancels badly for small c, so expand against the conjugate.
    // root^2 - (1 - s2)^2 = 16 s1^2 and 3 + s2 = (1 - s2) + 2 (1 + s2):
    //   l3 = ((1 - s2) + 2(1 + s2) - root) / 8
    // with (1 - s2) - root = -16 s1^2 / ((1 - s2) + root).
    s.l3 = (2.0 * (1.0 + s2) - 16.0 * s1 * s1 / ((1.0 - s2) + root)) * 0.125;
    s.l4 = 0.0;
    return s;
}

// Unnormalized eigenfunctions of the single-qubit operator. Index 1 and 3
// are even combinations of 1 and cos(cx); index 2 is i sin(cx); index 4 is
// the zero function by convention.
inline std::complex<double> single_qubit_eigenfunction(double c, int index, double x) {
    if (!(c > 0.0) || c > 1.0) {
        throw std::invalid_argument("single_qubit_eigenfunction: c must lie in (0, 1]");
    }
    if (index < 1 || index > 4) {
        throw std::invalid_argument("single_qubit_eigenfunction: index must be 1..4");
    }
    if (index == 4) return {0.0, 0.0};
    if (index == 2) return {0.0, std::sin(c * x)};
    const double s1 = sinc(kPi * c);
    const double s2 = sinc(2.0 * kPi * c);
    const double root = std::sqrt((1.0 - s2) * (1.0 - s2) + 16.0 * s1 * s1);
    const double half = 0.5 * c * x;
    const double sin_sq = std::sin(half) * std::sin(half);
    const double cos_sq = std::cos(half) * std::cos(half);
    double coef;
    if (index == 1) {
        coef = (4.0 * s1 + root) / (1.0 - s2);
    } else {
        // (4 s1 - root) / (1 - s2) via the conjugate to avoid cancellation.
        coef = -(1.0 - s2) / (4.0 * s1 + root);
    }
    return {sin_sq + cos_sq * coef, 0.0};
}

// Leading-order single-qubit eigenvalues at bandwidth c = a / sqrt(n):
// (1, a^2 pi^2 / 6n, a^4 pi^4 / 180 n^2).
inline std::array<double, 3> asymptotic_single_qubit(double a, int n) {
    if (a < 0.0 || n < 1) throw std::invalid_argument("asymptotic_single_qubit: bad arguments");
    const double l2 = a * a * kPi * kPi / (6.0 * n);
    const double l3 = std::pow(a * kPi, 4) / (180.0 * static_cast<double>(n) * n);
    return {1.0, l2, l3};
}

// ---------------------------------------------------------------------------
// Tensor-product spectrum over n coordinates with degeneracy bookkeeping.
// ---------------------------------------------------------------------------

struct DegenerateLevel {
    int scaling_index = 0;    // k2 + 2 k3 of the dominant composition
    double eigenvalue = 0.0;
    double degeneracy = 0.0;  // exact count while below 2^53
};

struct TensorSpectrum {
    std::vector<DegenerateLevel> levels;  // descending eigenvalue
    double total_mass = 0.0;              // sum eigenvalue * degeneracy of kept levels
};

namespace detail {

inline double binomial(int n, int k) {
    if (k < 0 || k > n) return 0.0;
    k = std::min(k, n - k);
    double c = 1.0;
    for (int i = 1; i <= k; ++i) c = c * (n - k + i) / i;
    return c;
}

// n! / (k2! k3! (n-k2-k3)!)
inline double multinomial(int n, int k2, int k3) {
    return binomial(n, k2 + k3) * binomial(k2 + k3, k2);
}

}  // namespace detail

// Distinct eigenvalues l1^{n-k2-k3} l2^{k2} l3^{k3} of the n-fold product
// kernel, with multinomial degeneracies. Levels whose values agree within a
// relative 1e-12 are merged (this recovers the 2^{-n-k} ladder with
// degeneracy 2^k C(n,k) at c = 1, where l2 = l3 exactly). Sorted descending
// and truncated to at most top_m levels.
inline TensorSpectrum tensor_spectrum(int n, double c, int top_m) {
    if (n < 1 || top_m < 1) throw std::invalid_argument("tensor_spectrum: bad arguments");
    const SingleQubitSpectrum s = single_qubit_spectrum(c);

    struct Entry {
        double value;
        double count;
        int scale;
    };
    std::vector<Entry> entries;
    entries.reserve(static_cast<std::size_t>(n + 1) * (n + 2) / 2);
    for (int k2 = 0; k2 <= n; ++k2) {
        for (int k3 = 0; k2 + k3 <= n; ++k3) {
            const double value = std::pow(s.l1, n - k2 - k3) * std::pow(s.l2, k2) *
                                 std::pow(s.l3, k3);
            entries.push_back({value, detail::multinomial(n, k2, k3), k2 + 2 * k3});
        }
    }
    std::sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) {
        if (a.value != b.value) return a.value > b.value;
        return a.scale < b.scale;
    });

    TensorSpectrum out;
    for (const Entry& e : entries) {
        if (!out.levels.empty()) {
            DegenerateLevel& last = out.levels.back();
            if (e.value >= last.eigenvalue * (1.0 - 1e-12)) {
                last.degeneracy += e.count;
                last.scaling_index = std::min(last.scaling_index, e.scale);
                continue;
            }
        }
        if (static_cast<int>(out.levels.size()) == top_m) break;
        out.levels.push_back({e.scale, e.value, e.count});
    }
    for (const DegenerateLevel& lv : out.levels) {
        out.total_mass += lv.eigenvalue * lv.degeneracy;
    }
    return out;
}

// Degeneracy N(n, k) of the n^{-k} scaling group: compositions k2 + 2 k3 = k
// weighted by multinomial placement counts. Matches the closed forms
// N(n,0)=1, N(n,1)=C(n,1), N(n,2)=C(n,2)+C(n,1),
// N(n,3)=C(n,3)+C(n-1,1)C(n,1), N(n,4)=C(n,4)+C(n-1,2)C(n,1)+C(n,2).
inline std::vector<std::pair<int, double>> degeneracy_table(int n, int k_max) {
    if (n < 1 || k_max < 0) throw std::invalid_argument("degeneracy_table: bad arguments");
    std::vector<std::pair<int, double>> table;
    table.reserve(static_cast<std::size_t>(k_max) + 1);
    for (int k = 0; k <= k_max; ++k) {
        double count = 0.0;
        for (int k3 = 0; 2 * k3 <= k; ++k3) {
            const int k2 = k - 2 * k3;
            if (k2 + k3 <= n) count += detail::multinomial(n, k2, k3);
        }
        table.emplace_back(k, count);
    }
    return table;
}

// Spectrum of the symmetric two-copy average E[rho x rho] over Haar states
// on q qubits: eigenvalue 2 / (2^q (2^q + 1)) on the symmetric subspace
// (multiplicity 2^q + 2^q(2^q-1)/2) and zero on the antisymmetric one.
struct HaarCovarianceSpectrum {
    double nonzero_value = 0.0;
    long long nonzero_multiplicity = 0;
    long long zero_multiplicity = 0;
};

inline HaarCovarianceSpectrum haar_covariance_spectrum(int q) {
    if (q < 1 || q > 31) throw std::invalid_argument("haar_covariance_spectrum: bad qubit count");
    const double d = static_cast<double>(1ll << q);
    HaarCovarianceSpectrum s;
    s.nonzero_value = 2.0 / (d * (d + 1.0));
    const long long di = 1ll << q;
    s.zero_multiplicity = di * (di - 1) / 2;
    s.nonzero_multiplicity = di + s.zero_multiplicity;
    return s;
}

// Spectrum of the embedding covariance E[vec(rho) vec(rho)^dagger]
// = E[rho x rho^T], the operator that shares its spectrum with the
// fidelity-kernel integral operator. The partial transpose moves the swap
// contribution onto the maximally entangled direction, so the spectrum is
// NOT the two-copy one: a single eigenvalue 1/2^q (the constant function's
// kernel eigenvalue) plus a flat bulk at 1 / (2^q (2^q + 1)).
struct HaarEmbeddingCovarianceSpectrum {
    double top_value = 0.0;       // multiplicity 1
    double bulk_value = 0.0;
    long long bulk_multiplicity = 0;
};

inline HaarEmbeddingCovarianceSpectrum haar_embedding_covariance_spectrum(int q) {
    if (q < 1 || q > 31) {
        throw std::invalid_argument("haar_embedding_covariance_spectrum: bad qubit count");
    }
    const double d = static_cast<double>(1ll << q);
    HaarEmbeddingCovarianceSpectrum s;
    s.top_value = 1.0 / d;
    s.bulk_value = 1.0 / (d * (d + 1.0));
    s.bulk_multiplicity = (1ll << q) * (1ll << q) - 1;
    return s;
}

// ---------------------------------------------------------------------------
// Empirical spectra.
// ---------------------------------------------------------------------------

struct SpectrumReport {
    enum class Source { Empirical, Analytic };
    Eigen::VectorXd eigenvalues;      // descending, clamped at 0
    Eigen::VectorXd target_weights;   // a_k aligned with eigenvalues
    Source source = Source::Empirical;
};

// Eigendecomposition of G / P with eigenvectors normalized to
// (1/P) Phi^T Phi = I; the target weights are a = (1/P) Phi^T y, which
// estimate the integral-operator projections of the labels. Eigenvector
// signs are fixed by making each vector's largest-magnitude entry positive.
inline SpectrumReport empirical_spectrum(const GramMatrix& G, const Eigen::VectorXd& y) {
    const Eigen::Index P = G.entries.rows();
    if (y.size() != P) {
        throw std::invalid_argument("empirical_spectrum: label length " +
                                    std::to_string(y.size()) + " != Gram size " +
                                    std::to_string(P));
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(G.entries / static_cast<double>(P));
    if (solver.info() != Eigen::Success) {
        throw std::runtime_error("empirical_spectrum: eigensolver failed to converge");
    }
    SpectrumReport report;
    report.source = SpectrumReport::Source::Empirical;
    report.eigenvalues.resize(P);
    report.target_weights.resize(P);
    const double inv_sqrt_p = 1.0 / std::sqrt(static_cast<double>(P));
    for (Eigen::Index k = 0; k < P; ++k) {
        const Eigen::Index src = P - 1 - k;  // ascending -> descending
        report.eigenvalues(k) = std::max(0.0, solver.eigenvalues()(src));
        Eigen::VectorXd v = solver.eigenvectors().col(src);
        Eigen::Index arg_max = 0;
        v.cwiseAbs().maxCoeff(&arg_max);
        if (v(arg_max) < 0.0) v = -v;
        report.target_weights(k) = v.dot(y) * inv_sqrt_p;
    }
    return report;
}

// Fraction of target power in the top-l modes: C(l) = 1 - tail / total.
inline double cumulative_power(const SpectrumReport& report, int l) {
    const Eigen::Index len = report.target_weights.size();
    if (l < 0 || l > len) throw std::invalid_argument("cumulative_power: l out of range");
    const double total = report.target_weights.squaredNorm();
    if (total == 0.0) {
        throw std::domain_error("cumulative_power: all target weights are zero");
    }
    double tail = 0.0;
    for (Eigen::Index k = l; k < len; ++k) {
        tail += report.target_weights(k) * report.target_weights(k);
    }
    return 1.0 - tail / total;
}

// Effective rank (sum eta)^2 / sum eta^2 of a spectrum; large for flat
// spectra, O(1) when a few modes dominate.
inline double participation_ratio(std::span<const double> eigenvalues) {
    double s1 = 0.0, s2 = 0.0;
    for (double e : eigenvalues) {
        s1 += e;
        s2 += e * e;
    }
    if (s2 == 0.0) throw std::domain_error("participation_ratio: zero spectrum");
    return s1 * s1 / s2;
}

inline double participation_ratio(const Eigen::VectorXd& eigenvalues) {
    return participation_ratio(
        std::span<const double>(eigenvalues.data(), static_cast<std::size_t>(eigenvalues.size())));
}

// ---------------------------------------------------------------------------
// Bandwidth scaling.
// ---------------------------------------------------------------------------

// Bandwidth at which the analytic product-Rx purity equals target_purity,
// found by bisection on (0, 1]. The purity decreases monotonically in c
// from 1 toward 2^{-n}.
inline double bandwidth_for_constant_purity(int n, double target_purity) {
    if (n < 1) throw std::invalid_argument("bandwidth_for_constant_purity: n must be >= 1");
    const double floor = std::pow(0.5, n);
    if (!(target_purity > floor) || !(target_purity < 1.0)) {
        throw std::domain_error("bandwidth_for_constant_purity: target purity " +
                                std::to_string(target_purity) + " outside (2^-n, 1) for n = " +
                                std::to_string(n));
    }
    double lo = 0.0, hi = 1.0;  // purity(lo) -> 1 > target, purity(hi) = floor < target
    while (hi - lo > 1e-10) {
        const double mid = 0.5 * (lo + hi);
        if (purity_toy_analytic(n, mid) > target_purity) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    return 0.5 * (lo + hi);
}

// Least-squares fit of log c = log a - alpha log n. Returns (alpha, a).
inline std::pair<double, double> fit_scaling_exponent(std::span<const double> ns,
                                                      std::span<const double> cs) {
    if (ns.size() != cs.size() || ns.size() < 3) {
        throw std::invalid_argument("fit_scaling_exponent: need >= 3 paired points");
    }
    double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
    const double m = static_cast<double>(ns.size());
    for (std::size_t i = 0; i < ns.size(); ++i) {
        if (!(ns[i] > 0.0) || !(cs[i] > 0.0)) {
            throw std::invalid_argument("fit_scaling_exponent: inputs must be positive");
        }
        const double x = std::log(ns[i]);
        const double y = std::log(cs[i]);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    const double denom = m * sxx - sx * sx;
    if (std::abs(denom) < 1e-12 * m * sxx) {
        throw std::invalid_argument("fit_scaling_exponent: degenerate abscissae");
    }
    const double slope = (m * sxy - sx * sy) / denom;
    const double intercept = (sy - slope * sx) / m;
    return {-slope, std::exp(intercept)};
}

// ---------------------------------------------------------------------------
// Analytic theory input for product targets on the product-Rx kernel.
// ---------------------------------------------------------------------------

// Squared projections of a 1-D factor g onto the normalized single-qubit
// eigenfunctions, plus its total power <g^2> under uniform measure.
struct CoordinateProjection {
    double b_sq[3] = {0.0, 0.0, 0.0};  // |<g, phi_i>|^2, i = 1..3
    double power = 0.0;                // <g, g>
    double in_span() const { return b_sq[0] + b_sq[1] + b_sq[2]; }
};

inline CoordinateProjection project_coordinate_factor(double c,
                                                      const std::function<double(double)>& g,
                                                      int quad_points = 4096) {
    CoordinateProjection proj;
    const double inv_2pi = 1.0 / (2.0 * kPi);
    proj.power = inv_2pi * integrate_simpson([&](double x) { return g(x) * g(x); }, -kPi, kPi,
                                             quad_points);
    for (int index = 1; index <= 3; ++index) {
        // Eigenfunctions are purely real (index 1, 3) or purely imaginary
        // (index 2); either way |<g, phi>|^2 / <phi, phi> is a real ratio.
        const auto phi = [&](double x) {
            const std::complex<double> v = single_qubit_eigenfunction(c, index, x);
            return index == 2 ? v.imag() : v.real();
        };
        const double norm_sq =
            inv_2pi * integrate_simpson([&](double x) { return phi(x) * phi(x); }, -kPi, kPi,
                                        quad_points);
        const double overlap =
            inv_2pi * integrate_simpson([&](double x) { return g(x) * phi(x); }, -kPi, kPi,
                                        quad_points);
        proj.b_sq[index - 1] = overlap * overlap / norm_sq;
    }
    return proj;
}

// Exact spectrum-and-alignment input for the n-coordinate product-Rx kernel
// and a product target prod_j g(x_j): every eigenvalue class (k2, k3)
// contributes a level with multinomial count and per-mode weight
// b1^{2(n-k2-k3)} b2^{2 k2} b3^{2 k3}. Target power outside the 3^n-mode
// span is attached to a zero eigenvalue, where it acts as effective noise
// and irreducible error.
inline TheoryInput product_rx_theory_input(int n, double c,
                                           const std::function<double(double)>& factor,
                                           double ridge, double noise_variance = 0.0,
                                           int quad_points = 4096) {
    if (n < 1) throw std::invalid_argument("product_rx_theory_input: n must be >= 1");
    const SingleQubitSpectrum s = single_qubit_spectrum(c);
    const CoordinateProjection proj = project_coordinate_factor(c, factor, quad_points);

    TheoryInput input;
    input.ridge = ridge;
    input.noise_variance = noise_variance;
    input.levels.reserve(static_cast<std::size_t>(n + 1) * (n + 2) / 2 + 1);
    for (int k2 = 0; k2 <= n; ++k2) {
        for (int k3 = 0; k2 + k3 <= n; ++k3) {
            const int k1 = n - k2 - k3;
            TheoryLevel level;
            level.eigenvalue = std::pow(s.l1, k1) * std::pow(s.l2, k2) * std::pow(s.l3, k3);
            level.weight_sq = std::pow(proj.b_sq[0], k1) * std::pow(proj.b_sq[1], k2) *
                              std::pow(proj.b_sq[2], k3);
            level.count = detail::multinomial(n, k2, k3);
            input.levels.push_back(level);
        }
    }
    const double total_power = std::pow(proj.power, n);
    const double in_span_power = std::pow(proj.in_span(), n);
    const double out_of_span = std::max(0.0, total_power - in_span_power);
    input.levels.push_back({0.0, out_of_span, 1.0});
    return input;
}

inline TheoryInput theory_input_from_report(const SpectrumReport& report, double ridge,
                                            double noise_variance = 0.0) {
    return make_theory_input(
        std::span<const double>(report.eigenvalues.data(),
                                static_cast<std::size_t>(report.eigenvalues.size())),
        std::span<const double>(report.target_weights.data(),
                                static_cast<std::size_t>(report.target_weights.size())),
        ridge, noise_variance);
}

// ---------------------------------------------------------------------------
// Report output.
// ---------------------------------------------------------------------------

inline void write_spectrum_csv(std::ostream& out, const SpectrumReport& report) {
    out << "rank,eigenvalue,weight,cumulative_power\n";
    const double total = report.target_weights.squaredNorm();
    double tail = total;
    char buf[160];
    for (Eigen::Index k = 0; k < report.eigenvalues.size(); ++k) {
        tail -= report.target_weights(k) * report.target_weights(k);
        const double cum = total > 0.0 ? 1.0 - std::max(0.0, tail) / total : 0.0;
        std::snprintf(buf, sizeof(buf), "%lld,%.17g,%.17g,%.17g\n",
                      static_cast<long long>(k + 1), report.eigenvalues(k),
                      report.target_weights(k), cum);
        out << buf;
    }
}

}  // namespace qkband
