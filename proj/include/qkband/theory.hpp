#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace qkband {

// One eigenvalue level of a kernel spectrum: `count` modes sharing the
// eigenvalue, each carrying squared target weight `weight_sq`. Plain
// spectra are lists of count-1 levels; analytic product spectra use the
// counts to cover combinatorially many modes. Zero-eigenvalue levels hold
// target power that lies outside the RKHS.
struct TheoryLevel {
    double eigenvalue = 0.0;
    double weight_sq = 0.0;  // per-mode squared weight
    double count = 1.0;
};

struct TheoryInput {
    std::vector<TheoryLevel> levels;
    double ridge = 0.0;
    double noise_variance = 0.0;
};

inline TheoryInput make_theory_input(std::span<const double> eigenvalues,
                                     std::span<const double> weights, double ridge,
                                     double noise_variance) {
    if (eigenvalues.size() != weights.size()) {
        throw std::invalid_argument("make_theory_input: eigenvalue/weight lengths differ");
    }
    TheoryInput in;
    in.ridge = ridge;
    in.noise_variance = noise_variance;
    in.levels.reserve(eigenvalues.size());
    for (std::size_t k = 0; k < eigenvalues.size(); ++k) {
        in.levels.push_back({eigenvalues[k], weights[k] * weights[k], 1.0});
    }
    return in;
}

namespace detail {

inline double kappa_rhs(double kappa, double P, double ridge,
                        std::span<const TheoryLevel> levels) {
    double s = ridge;
    for (const TheoryLevel& lv : levels) {
        if (lv.eigenvalue <= 0.0) continue;
        s += kappa * lv.count * lv.eigenvalue / (P * lv.eigenvalue + kappa);
    }
    return s;
}

}  // namespace detail

// Solves the self-consistent effective ridge
//   kappa = ridge + kappa * sum_k eta_k / (P eta_k + kappa)
// by damped fixed-point iteration from kappa0 = ridge + sum eta, falling
// back to bisection when the iteration stalls (for ridge = 0 at large P the
// admissible solution is kappa = 0). P may be any nonnegative real.
inline double solve_kappa(double P, double ridge, std::span<const TheoryLevel> levels) {
    if (P < 0.0 || ridge < 0.0 || !std::isfinite(ridge)) {
        throw std::invalid_argument("solve_kappa: need P >= 0 and finite ridge >= 0");
    }
    double trace = 0.0;
    for (const TheoryLevel& lv : levels) {
        if (lv.eigenvalue < 0.0) throw std::invalid_argument("solve_kappa: negative eigenvalue");
        trace += lv.count * lv.eigenvalue;
    }
    const double upper = ridge + trace;
    if (upper == 0.0) return 0.0;

    double kappa = upper;
    bool converged = false;
    for (int it = 0; it < 100000; ++it) {
        const double next = 0.5 * kappa + 0.5 * detail::kappa_rhs(kappa, P, ridge, levels);
        const double delta = std::abs(next - kappa);
        kappa = next;
        if (delta / std::max(kappa, 1e-300) < 1e-12) {
            converged = true;
            break;
        }
        if (kappa == 0.0) {  // underflowed toward the ridge-free root
            converged = true;
            break;
        }
    }

    if (!converged) {
        // Bisect h(k) = k - rhs(k); h(upper) >= 0 and h decreases toward 0+.
        double lo = 0.0;
        double hi = upper;
        const double probe = 1e-14 * upper;
        if (detail::kappa_rhs(probe, P, ridge, levels) <= probe) {
            kappa = 0.0;  // no positive root: kappa = 0 is admitted
        } else {
            lo = probe;
            for (int it = 0; it < 500 && (hi - lo) > 1e-15 * std::max(hi, 1e-300); ++it) {
                const double mid = 0.5 * (lo + hi);
                if (detail::kappa_rhs(mid, P, ridge, levels) > mid) {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            kappa = 0.5 * (lo + hi);
        }
    }

    const double residual = std::abs(kappa - detail::kappa_rhs(kappa, P, ridge, levels));
    if (residual > 1e-10 * std::max({kappa, ridge, 1.0})) {
        throw std::runtime_error("solve_kappa: no convergence, residual " +
                                 std::to_string(residual));
    }
    return kappa;
}

struct GeneralizationPoint {
    double error = 0.0;
    double kappa = 0.0;
    double gamma = 0.0;
};

// Dataset-averaged generalization error of kernel ridge regression:
//   E_g = kappa^2/(1-gamma) sum_k w_k^2/(P eta_k + kappa)^2
//         + noise^2 * gamma/(1-gamma),
//   gamma = sum_k P eta_k^2 / (P eta_k + kappa)^2.
// Target power on zero-eigenvalue modes acts both as label noise and as an
// irreducible additive error. A requested ridge of exactly zero is executed
// as 1e-10 for numerical stability.
inline GeneralizationPoint generalization_error(const TheoryInput& input, double P) {
    if (input.ridge < 0.0 || input.noise_variance < 0.0) {
        throw std::invalid_argument("generalization_error: ridge and noise must be >= 0");
    }
    const double ridge = input.ridge == 0.0 ? 1e-10 : input.ridge;

    double out_of_rkhs = 0.0;
    for (const TheoryLevel& lv : input.levels) {
        if (lv.eigenvalue <= 0.0) out_of_rkhs += lv.count * lv.weight_sq;
    }
    GeneralizationPoint pt;
    pt.kappa = solve_kappa(P, ridge, input.levels);

    double gamma = 0.0;
    double bias_sum = 0.0;
    for (const TheoryLevel& lv : input.levels) {
        if (lv.eigenvalue <= 0.0) continue;
        const double d = P * lv.eigenvalue + pt.kappa;
        gamma += lv.count * P * lv.eigenvalue * lv.eigenvalue / (d * d);
        bias_sum += lv.count * lv.weight_sq / (d * d);
    }
    pt.gamma = gamma;
    if (gamma >= 1.0) {
        throw std::domain_error("generalization_error: gamma = " + std::to_string(gamma) +
                                " >= 1, variance diverges at P = " + std::to_string(P));
    }
    const double effective_noise = input.noise_variance + out_of_rkhs;
    pt.error = pt.kappa * pt.kappa / (1.0 - gamma) * bias_sum +
               effective_noise * gamma / (1.0 - gamma) + out_of_rkhs;
    return pt;
}

// Closed-form kappa for a single learning stage: one level with O(1) total
// eigenvalue mass eta_bar probed at load alpha = P / degeneracy, under an
// effective ridge that absorbs all higher (still unlearned) levels. This is
// the positive root of kappa^2 - t kappa - ridge_eff * eta_bar * alpha with
// t = ridge_eff + eta_bar (1 - alpha); both branches of the piecewise form
// reduce to it, so continuity across alpha = 1 + ridge_eff/eta_bar is exact.
inline double explicit_kappa_single_stage(double alpha, double eta_bar, double ridge_eff) {
    if (!(eta_bar > 0.0) || ridge_eff < 0.0 || alpha < 0.0) {
        throw std::invalid_argument("explicit_kappa_single_stage: bad arguments");
    }
    const double t = ridge_eff + eta_bar * (1.0 - alpha);
    const double prod = ridge_eff * eta_bar * alpha;
    const double disc = std::sqrt(t * t + 4.0 * prod);
    if (t >= 0.0) return 0.5 * (t + disc);
    return 2.0 * prod / (disc - t);
}

// Stage-l generalization error in the decoupled large-n limit. Levels below
// l are fully learned, levels above l contribute an effective ridge
// (sum of their eta_bar), effective noise (their target power), and an
// irreducible error floor.
inline double staged_error(int stage, double alpha, std::span<const double> eta_bar,
                           std::span<const double> weight_sq, double noise_variance,
                           double ridge = 0.0) {
    if (eta_bar.size() != weight_sq.size()) {
        throw std::invalid_argument("staged_error: eta_bar/weight_sq lengths differ");
    }
    if (stage < 0 || static_cast<std::size_t>(stage) >= eta_bar.size()) {
        throw std::invalid_argument("staged_error: stage out of range");
    }
    double ridge_eff = ridge;
    double tail_weight = 0.0;
    for (std::size_t k = static_cast<std::size_t>(stage) + 1; k < eta_bar.size(); ++k) {
        ridge_eff += eta_bar[k];
        tail_weight += weight_sq[k];
    }
    const double eta_l = eta_bar[static_cast<std::size_t>(stage)];
    const double kappa = explicit_kappa_single_stage(alpha, eta_l, ridge_eff);
    const double d = kappa + alpha * eta_l;
    const double gamma = alpha * eta_l * eta_l / (d * d);
    if (gamma >= 1.0) throw std::domain_error("staged_error: gamma >= 1");
    const double effective_noise = noise_variance + tail_weight;
    return kappa * kappa / (1.0 - gamma) * weight_sq[static_cast<std::size_t>(stage)] / (d * d) +
           effective_noise * gamma / (1.0 - gamma) + tail_weight;
}

struct TheoryCurve {
    std::vector<double> sample_counts;
    std::vector<double> errors;
    std::vector<double> kappas;
    std::vector<double> gammas;
};

inline TheoryCurve learning_curve(const TheoryInput& input, std::span<const double> sample_grid) {
    TheoryCurve curve;
    curve.sample_counts.reserve(sample_grid.size());
    for (double P : sample_grid) {
        const GeneralizationPoint pt = generalization_error(input, P);
        curve.sample_counts.push_back(P);
        curve.errors.push_back(pt.error);
        curve.kappas.push_back(pt.kappa);
        curve.gammas.push_back(pt.gamma);
    }
    return curve;
}

inline void write_theory_curve_csv(std::ostream& out, const TheoryCurve& curve) {
    out << "P,E_g,kappa,gamma\n";
    char buf[160];
    for (std::size_t i = 0; i < curve.sample_counts.size(); ++i) {
        std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%.17g,%.17g\n", curve.sample_counts[i],
                      curve.errors[i], curve.kappas[i], curve.gammas[i]);
        out << buf;
    }
}

}  // namespace qkband
