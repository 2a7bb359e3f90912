#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "qkband/rng.hpp"

namespace qkband {

using Complex = std::complex<double>;

// Dense pure-state vector on `num_qubits` qubits. Qubit 0 is the least
// significant bit of the amplitude index. Treated as an immutable value
// once built; gate helpers return a fresh state.
struct Statevector {
    int num_qubits = 0;
    std::vector<Complex> amplitudes;

    std::size_t dim() const { return amplitudes.size(); }

    double squared_norm() const {
        double s = 0.0;
        for (const Complex& a : amplitudes) s += std::norm(a);
        return s;
    }
};

// Guard against accidental huge allocations; overridable per call site.
inline constexpr int kDefaultMaxQubits = 26;

inline Statevector zero_state(int num_qubits, int max_qubits = kDefaultMaxQubits) {
    if (num_qubits < 1 || num_qubits > max_qubits) {
        throw std::length_error("zero_state: qubit count " + std::to_string(num_qubits) +
                                " outside capacity [1, " + std::to_string(max_qubits) + "]");
    }
    Statevector s;
    s.num_qubits = num_qubits;
    s.amplitudes.assign(std::size_t{1} << num_qubits, Complex{0.0, 0.0});
    s.amplitudes[0] = Complex{1.0, 0.0};
    return s;
}

inline void check_qubit_index(const Statevector& s, int qubit, const char* where) {
    if (qubit < 0 || qubit >= s.num_qubits) {
        throw std::out_of_range(std::string(where) + ": qubit index " + std::to_string(qubit) +
                                " out of range for " + std::to_string(s.num_qubits) + " qubits");
    }
}

// X-axis rotation on one qubit: [[cos(t/2), i sin(t/2)], [i sin(t/2), cos(t/2)]].
inline Statevector apply_rx(Statevector state, int qubit, double theta) {
    check_qubit_index(state, qubit, "apply_rx");
    const double c = std::cos(0.5 * theta);
    const Complex is{0.0, std::sin(0.5 * theta)};
    const std::size_t stride = std::size_t{1} << qubit;
    const std::size_t dim = state.dim();
    for (std::size_t base = 0; base < dim; base += 2 * stride) {
        for (std::size_t low = 0; low < stride; ++low) {
            const std::size_t i0 = base + low;
            const std::size_t i1 = i0 + stride;
            const Complex a0 = state.amplitudes[i0];
            const Complex a1 = state.amplitudes[i1];
            state.amplitudes[i0] = c * a0 + is * a1;
            state.amplitudes[i1] = is * a0 + c * a1;
        }
    }
    return state;
}

// Hadamard on every qubit (a full Walsh-Hadamard transform).
inline Statevector apply_hadamard_layer(Statevector state) {
    const double inv_sqrt2 = 0.70710678118654752440;
    const std::size_t dim = state.dim();
    for (int q = 0; q < state.num_qubits; ++q) {
        const std::size_t stride = std::size_t{1} << q;
        for (std::size_t base = 0; base < dim; base += 2 * stride) {
            for (std::size_t low = 0; low < stride; ++low) {
                const std::size_t i0 = base + low;
                const std::size_t i1 = i0 + stride;
                const Complex a0 = state.amplitudes[i0];
                const Complex a1 = state.amplitudes[i1];
                state.amplitudes[i0] = (a0 + a1) * inv_sqrt2;
                state.amplitudes[i1] = (a0 - a1) * inv_sqrt2;
            }
        }
    }
    return state;
}

// Multiplies amplitude b by exp(i * phases[b]).
inline Statevector apply_diagonal_phase(Statevector state, std::span<const double> phases) {
    if (phases.size() != state.dim()) {
        throw std::invalid_argument("apply_diagonal_phase: phase vector length " +
                                    std::to_string(phases.size()) + " != state dimension " +
                                    std::to_string(state.dim()));
    }
    for (std::size_t b = 0; b < phases.size(); ++b) {
        state.amplitudes[b] *= Complex{std::cos(phases[b]), std::sin(phases[b])};
    }
    return state;
}

// exp(-i * angle * (XX + YY + ZZ)) on the adjacent pair (qubit, qubit+1).
// The pair operator has eigenvalue +1 on |00>, |11> and the triplet
// (|01>+|10>)/sqrt(2), and eigenvalue -3 on the singlet (|01>-|10>)/sqrt(2),
// so the exponential acts in closed form: phase e^{-ia} on the symmetric
// sector and e^{+3ia} on the singlet.
inline Statevector apply_heisenberg_pair(Statevector state, int qubit, double angle) {
    check_qubit_index(state, qubit, "apply_heisenberg_pair");
    check_qubit_index(state, qubit + 1, "apply_heisenberg_pair");
    const Complex sym{std::cos(angle), -std::sin(angle)};        // e^{-ia}
    const Complex singlet{std::cos(3.0 * angle), std::sin(3.0 * angle)};  // e^{+3ia}
    const Complex mix_diag = 0.5 * (sym + singlet);
    const Complex mix_off = 0.5 * (sym - singlet);

    const std::size_t lo = std::size_t{1} << qubit;
    const std::size_t hi = std::size_t{1} << (qubit + 1);
    const std::size_t dim = state.dim();
    for (std::size_t b = 0; b < dim; ++b) {
        if ((b & lo) || (b & hi)) continue;  // enumerate each 4-block once via its 00 index
        const std::size_t i00 = b;
        const std::size_t i01 = b | lo;   // qubit set
        const std::size_t i10 = b | hi;   // qubit+1 set
        const std::size_t i11 = b | lo | hi;
        const Complex a01 = state.amplitudes[i01];
        const Complex a10 = state.amplitudes[i10];
        state.amplitudes[i00] *= sym;
        state.amplitudes[i11] *= sym;
        state.amplitudes[i01] = mix_diag * a01 + mix_off * a10;
        state.amplitudes[i10] = mix_off * a01 + mix_diag * a10;
    }
    return state;
}

inline Complex inner_product(const Statevector& a, const Statevector& b) {
    if (a.num_qubits != b.num_qubits) {
        throw std::invalid_argument("inner_product: qubit counts differ (" +
                                    std::to_string(a.num_qubits) + " vs " +
                                    std::to_string(b.num_qubits) + ")");
    }
    Complex acc{0.0, 0.0};
    const std::size_t dim = a.dim();
    for (std::size_t i = 0; i < dim; ++i) {
        acc += std::conj(a.amplitudes[i]) * b.amplitudes[i];
    }
    return acc;
}

// Haar-distributed pure state: a normalized vector of i.i.d. standard complex
// Gaussians, equal in distribution to the first column of a Haar unitary.
inline Statevector random_haar_state(int num_qubits, std::uint64_t seed,
                                     int max_qubits = kDefaultMaxQubits) {
    Statevector s = zero_state(num_qubits, max_qubits);
    SplitMix64 gen(seed);
    double norm_sq = 0.0;
    for (Complex& a : s.amplitudes) {
        a = gen.complex_normal();
        norm_sq += std::norm(a);
    }
    const double inv = 1.0 / std::sqrt(norm_sq);
    for (Complex& a : s.amplitudes) a *= inv;
    return s;
}

}  // namespace qkband
