#pragma once

#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "qkband/rng.hpp"
#include "qkband/statevector.hpp"

namespace qkband {

enum class MapFamily { ProductRx, IQP, Evo };

inline std::string family_name(MapFamily f) {
    switch (f) {
        case MapFamily::ProductRx: return "product-rx";
        case MapFamily::IQP: return "iqp";
        case MapFamily::Evo: return "evo";
    }
    return "?";
}

inline MapFamily parse_family(const std::string& name) {
    if (name == "product-rx" || name == "productrx") return MapFamily::ProductRx;
    if (name == "iqp") return MapFamily::IQP;
    if (name == "evo") return MapFamily::Evo;
    throw std::invalid_argument("unknown feature map family: " + name);
}

// Description of an embedding family. `bandwidth` is the input rescaling c;
// inputs enter every circuit only through c*x.
struct FeatureMapSpec {
    MapFamily family = MapFamily::ProductRx;
    double bandwidth = 1.0;                    // c in (0, 1]
    int num_features = 1;                      // n
    std::optional<std::uint64_t> evo_seed;     // initial product state for Evo

    int qubit_count() const {
        return family == MapFamily::Evo ? num_features + 1 : num_features;
    }

    void validate() const {
        if (num_features < 1) throw std::invalid_argument("feature map: num_features must be >= 1");
        if (!(bandwidth > 0.0) || bandwidth > 1.0) {
            throw std::invalid_argument("feature map: bandwidth must lie in (0, 1], got " +
                                        std::to_string(bandwidth));
        }
        if (family == MapFamily::Evo && !evo_seed.has_value()) {
            throw std::invalid_argument("feature map: evo family requires evo_seed");
        }
    }
};

namespace detail {

inline void check_sample_dim(const FeatureMapSpec& spec, std::span<const double> x,
                             const char* where) {
    if (static_cast<int>(x.size()) != spec.num_features) {
        throw std::invalid_argument(std::string(where) + ": sample has " +
                                    std::to_string(x.size()) + " coordinates, expected " +
                                    std::to_string(spec.num_features));
    }
}

// Diagonal phases for one layer of the two-layer diagonal circuit:
//   phase(b) = c * sum_j x_j z_j + c^2 * sum_{j<j'} x_j x_j' z_j z_j',
// with z_j = +1/-1 for bit j clear/set. Using s(b) = sum_j x_j z_j the
// ordered-pair term equals (s(b)^2 - sum_j x_j^2) / 2, which allows an
// O(2^n) subset-sum sweep instead of O(2^n n^2).
inline std::vector<double> iqp_phases(std::span<const double> x, double c) {
    const int n = static_cast<int>(x.size());
    const std::size_t dim = std::size_t{1} << n;
    double total = 0.0, total_sq = 0.0;
    for (double v : x) {
        total += v;
        total_sq += v * v;
    }
    std::vector<double> set_bit_sum(dim, 0.0);
    for (std::size_t b = 1; b < dim; ++b) {
        const int low = std::countr_zero(b);
        set_bit_sum[b] = set_bit_sum[b & (b - 1)] + x[static_cast<std::size_t>(low)];
    }
    std::vector<double> phases(dim);
    for (std::size_t b = 0; b < dim; ++b) {
        const double s = total - 2.0 * set_bit_sum[b];
        phases[b] = c * s + 0.5 * c * c * (s * s - total_sq);
    }
    return phases;
}

inline Statevector embed_product_rx(const FeatureMapSpec& spec, std::span<const double> x) {
    Statevector s = zero_state(spec.num_features);
    for (int j = 0; j < spec.num_features; ++j) {
        s = apply_rx(std::move(s), j, spec.bandwidth * x[static_cast<std::size_t>(j)]);
    }
    return s;
}

inline Statevector embed_iqp(const FeatureMapSpec& spec, std::span<const double> x) {
    const std::vector<double> phases = iqp_phases(x, spec.bandwidth);
    Statevector s = zero_state(spec.num_features);
    s = apply_hadamard_layer(std::move(s));
    s = apply_diagonal_phase(std::move(s), phases);
    s = apply_hadamard_layer(std::move(s));
    s = apply_diagonal_phase(std::move(s), phases);
    return s;
}

inline Statevector embed_evo(const FeatureMapSpec& spec, std::span<const double> x) {
    const int qubits = spec.num_features + 1;
    // Product of independent single-qubit Haar states, one substream per qubit.
    std::vector<std::array<Complex, 2>> locals(static_cast<std::size_t>(qubits));
    for (int j = 0; j < qubits; ++j) {
        const Statevector one =
            random_haar_state(1, substream(*spec.evo_seed, static_cast<std::uint64_t>(j)));
        locals[static_cast<std::size_t>(j)] = {one.amplitudes[0], one.amplitudes[1]};
    }
    Statevector s = zero_state(qubits);
    for (std::size_t b = 0; b < s.dim(); ++b) {
        Complex amp{1.0, 0.0};
        for (int j = 0; j < qubits; ++j) {
            amp *= locals[static_cast<std::size_t>(j)][(b >> j) & 1u];
        }
        s.amplitudes[b] = amp;
    }
    for (int j = 0; j < spec.num_features; ++j) {
        s = apply_heisenberg_pair(std::move(s), j,
                                  spec.bandwidth * x[static_cast<std::size_t>(j)]);
    }
    return s;
}

}  // namespace detail

// Builds the embedding state for one sample.
inline Statevector embed(const FeatureMapSpec& spec, std::span<const double> x) {
    spec.validate();
    detail::check_sample_dim(spec, x, "embed");
    switch (spec.family) {
        case MapFamily::ProductRx: return detail::embed_product_rx(spec, x);
        case MapFamily::IQP: return detail::embed_iqp(spec, x);
        case MapFamily::Evo: return detail::embed_evo(spec, x);
    }
    throw std::logic_error("embed: unreachable");
}

// Closed form for the product-Rx fidelity kernel:
//   k(x, x') = prod_j cos^2(c (x_j - x'_j) / 2).
inline double closed_form_product_rx(std::span<const double> x, std::span<const double> y,
                                     double c) {
    if (x.size() != y.size()) {
        throw std::invalid_argument("closed_form_product_rx: length mismatch (" +
                                    std::to_string(x.size()) + " vs " + std::to_string(y.size()) +
                                    ")");
    }
    double k = 1.0;
    for (std::size_t j = 0; j < x.size(); ++j) {
        const double cc = std::cos(0.5 * c * (x[j] - y[j]));
        k *= cc * cc;
    }
    return k;
}

// Fidelity kernel value |<psi(x)|psi(y)>|^2 from statevector simulation.
// The diagonal is short-circuited to exactly 1.0.
inline double kernel_value(const FeatureMapSpec& spec, std::span<const double> x,
                           std::span<const double> y) {
    spec.validate();
    detail::check_sample_dim(spec, x, "kernel_value");
    detail::check_sample_dim(spec, y, "kernel_value");
    bool same = true;
    for (std::size_t j = 0; j < x.size(); ++j) {
        if (x[j] != y[j]) {
            same = false;
            break;
        }
    }
    if (same) return 1.0;
    const Statevector a = embed(spec, x);
    const Statevector b = embed(spec, y);
    return std::norm(inner_product(a, b));
}

}  // namespace qkband
