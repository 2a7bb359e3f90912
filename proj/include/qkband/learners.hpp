#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "qkband/dataset.hpp"
#include "qkband/gram.hpp"
#include "qkband/parallel.hpp"
#include "qkband/rng.hpp"

namespace qkband {

// ---------------------------------------------------------------------------
// Kernel ridge regression on a precomputed Gram matrix.
// ---------------------------------------------------------------------------

struct KrrModel {
    Eigen::VectorXd dual_coefficients;
    double ridge = 0.0;
    std::optional<FeatureMapSpec> map;
};

// Solves (K + ridge I) a = y by Cholesky with iterative refinement. The
// target residual is 1e-10 |y|; for exactly singular kernels with a
// near-zero ridge the dual norm reaches ~|y|/ridge and the attainable
// residual floor is eps |A| |a|, so solutions at that backward-stable floor
// are accepted. A requested ridge of exactly zero runs as 1e-10.
// Irrecoverable systems are reported with the smallest pivot seen.
inline KrrModel krr_fit(const Eigen::MatrixXd& K, const Eigen::VectorXd& y, double ridge) {
    if (K.rows() != K.cols()) throw std::invalid_argument("krr_fit: Gram matrix not square");
    if (K.rows() != y.size()) throw std::invalid_argument("krr_fit: label length mismatch");
    if (ridge < 0.0) throw std::invalid_argument("krr_fit: ridge must be >= 0");
    const double lambda = ridge == 0.0 ? 1e-10 : ridge;
    Eigen::MatrixXd A = K;
    A.diagonal().array() += lambda;

    const double ynorm = y.norm();
    const double anorm = A.norm();
    Eigen::VectorXd alpha;
    const Eigen::LLT<Eigen::MatrixXd> llt(A);
    const bool llt_ok = llt.info() == Eigen::Success;
    const Eigen::LDLT<Eigen::MatrixXd> ldlt = llt_ok ? Eigen::LDLT<Eigen::MatrixXd>()
                                                     : Eigen::LDLT<Eigen::MatrixXd>(A);
    const auto solve = [&](const Eigen::VectorXd& rhs) {
        return llt_ok ? llt.solve(rhs).eval() : ldlt.solve(rhs).eval();
    };
    alpha = solve(y);
    double residual = (y - A * alpha).norm();
    for (int step = 0; step < 5 && residual > 1e-10 * std::max(ynorm, 1e-300); ++step) {
        const Eigen::VectorXd refined = alpha + solve(y - A * alpha);
        const double next = (y - A * refined).norm();
        if (next >= residual) break;
        alpha = refined;
        residual = next;
    }
    const double floor = 64.0 * 2.220446049250313e-16 * anorm * alpha.norm();
    if (!(residual <= std::max(1e-8 * std::max(ynorm, 1e-300), floor))) {
        const double pivot = llt_ok ? llt.matrixLLT().diagonal().minCoeff()
                                    : ldlt.vectorD().cwiseAbs().minCoeff();
        throw std::runtime_error("krr_fit: factorization failed, residual " +
                                 std::to_string(residual) + ", smallest pivot " +
                                 std::to_string(pivot));
    }
    KrrModel model;
    model.dual_coefficients = std::move(alpha);
    model.ridge = lambda;
    return model;
}

inline double krr_predict(const KrrModel& model, const Eigen::VectorXd& kvec) {
    if (kvec.size() != model.dual_coefficients.size()) {
        throw std::invalid_argument("krr_predict: kernel vector length mismatch");
    }
    return model.dual_coefficients.dot(kvec);
}

// ---------------------------------------------------------------------------
// Soft-margin binary SVM via two-variable SMO on a precomputed Gram matrix.
// ---------------------------------------------------------------------------

struct SvmSettings {
    double C = 1.0;
    double tolerance = 1e-3;   // KKT gap at which optimization stops
    int max_iterations = 10000;
    bool throw_on_max_iterations = true;
};

struct SvmModel {
    Eigen::VectorXd alpha;           // dual variables in [0, C]
    Eigen::VectorXd coef;            // alpha_i * y_i
    double bias = 0.0;
    std::vector<int> support_indices;
    double C = 1.0;
    double kkt_violation = 0.0;      // final maximal-pair gap
    double dual_objective = 0.0;     // maximized dual value
    int iterations = 0;
    std::optional<FeatureMapSpec> map;
};

// Maximal-violating-pair SMO. Selection ties break toward the lowest index,
// so a fixed input gives a fixed optimization path.
inline SvmModel svm_fit(const Eigen::MatrixXd& K, const Eigen::VectorXd& y,
                        const SvmSettings& settings = {}) {
    const Eigen::Index P = K.rows();
    if (K.cols() != P) throw std::invalid_argument("svm_fit: Gram matrix not square");
    if (y.size() != P) throw std::invalid_argument("svm_fit: label length mismatch");
    if (!(settings.C > 0.0)) throw std::invalid_argument("svm_fit: C must be positive");
    for (Eigen::Index i = 0; i < P; ++i) {
        if (y(i) != 1.0 && y(i) != -1.0) {
            throw std::invalid_argument("svm_fit: labels must be -1 or +1");
        }
    }

    const double C = settings.C;
    Eigen::VectorXd alpha = Eigen::VectorXd::Zero(P);
    // grad_i = d/d alpha_i of (1/2) a^T Q a - sum a, with Q_ij = y_i y_j K_ij.
    Eigen::VectorXd grad = Eigen::VectorXd::Constant(P, -1.0);

    int iter = 0;
    double gap = 0.0;
    for (; iter < settings.max_iterations; ++iter) {
        // i: largest -y G over the upward-feasible set; j: smallest over the
        // downward-feasible set.
        int i = -1, j = -1;
        double up_max = -1e300, low_min = 1e300;
        for (Eigen::Index t = 0; t < P; ++t) {
            const double v = -y(t) * grad(t);
            const bool in_up = (y(t) > 0.0 && alpha(t) < C) || (y(t) < 0.0 && alpha(t) > 0.0);
            const bool in_low = (y(t) < 0.0 && alpha(t) < C) || (y(t) > 0.0 && alpha(t) > 0.0);
            if (in_up && v > up_max) {
                up_max = v;
                i = static_cast<int>(t);
            }
            if (in_low && v < low_min) {
                low_min = v;
                j = static_cast<int>(t);
            }
        }
        gap = (i >= 0 && j >= 0) ? up_max - low_min : 0.0;
        if (i < 0 || j < 0 || gap <= settings.tolerance) break;

        const double old_ai = alpha(i);
        const double old_aj = alpha(j);
        constexpr double kTau = 1e-12;
        if (y(i) != y(j)) {
            const double quad = std::max(kTau, K(i, i) + K(j, j) + 2.0 * K(i, j));
            const double delta = (-grad(i) - grad(j)) / quad;
            const double diff = alpha(i) - alpha(j);
            alpha(i) += delta;
            alpha(j) += delta;
            if (diff > 0.0 && alpha(j) < 0.0) {
                alpha(j) = 0.0;
                alpha(i) = diff;
            } else if (diff <= 0.0 && alpha(i) < 0.0) {
                alpha(i) = 0.0;
                alpha(j) = -diff;
            }
            if (diff > 0.0 && alpha(i) > C) {
                alpha(i) = C;
                alpha(j) = C - diff;
            } else if (diff <= 0.0 && alpha(j) > C) {
                alpha(j) = C;
                alpha(i) = C + diff;
            }
        } else {
            const double quad = std::max(kTau, K(i, i) + K(j, j) - 2.0 * K(i, j));
            const double delta = (grad(i) - grad(j)) / quad;
            const double sum = alpha(i) + alpha(j);
            alpha(i) -= delta;
            alpha(j) += delta;
            if (sum > C && alpha(i) > C) {
                alpha(i) = C;
                alpha(j) = sum - C;
            } else if (sum <= C && alpha(j) < 0.0) {
                alpha(j) = 0.0;
                alpha(i) = sum;
            }
            if (sum > C && alpha(j) > C) {
                alpha(j) = C;
                alpha(i) = sum - C;
            } else if (sum <= C && alpha(i) < 0.0) {
                alpha(i) = 0.0;
                alpha(j) = sum;
            }
        }
        const double di = y(i) * (alpha(i) - old_ai);
        const double dj = y(j) * (alpha(j) - old_aj);
        for (Eigen::Index t = 0; t < P; ++t) {
            grad(t) += y(t) * (K(t, i) * di + K(t, j) * dj);
        }
    }
    if (iter >= settings.max_iterations && gap > settings.tolerance &&
        settings.throw_on_max_iterations) {
        throw std::runtime_error("svm_fit: no convergence after " +
                                 std::to_string(settings.max_iterations) +
                                 " iterations, KKT gap " + std::to_string(gap));
    }

    SvmModel model;
    model.alpha = alpha;
    model.coef = alpha.cwiseProduct(y);
    model.C = C;
    model.kkt_violation = gap;
    model.iterations = iter;
    model.dual_objective = alpha.sum() - 0.5 * model.coef.dot(K * model.coef);

    // Bias from free support vectors; midpoint of the feasible window when
    // every support vector sits on the box boundary.
    double free_sum = 0.0;
    int free_count = 0;
    double up_max = -1e300, low_min = 1e300;
    const Eigen::VectorXd f = K * model.coef;
    for (Eigen::Index t = 0; t < P; ++t) {
        if (alpha(t) > 0.0) model.support_indices.push_back(static_cast<int>(t));
        const double v = y(t) - f(t);
        const bool in_up = (y(t) > 0.0 && alpha(t) < C) || (y(t) < 0.0 && alpha(t) > 0.0);
        const bool in_low = (y(t) < 0.0 && alpha(t) < C) || (y(t) > 0.0 && alpha(t) > 0.0);
        if (alpha(t) > 0.0 && alpha(t) < C) {
            free_sum += v;
            ++free_count;
        }
        if (in_up) up_max = std::max(up_max, v);
        if (in_low) low_min = std::min(low_min, v);
    }
    if (free_count > 0) {
        model.bias = free_sum / free_count;
    } else if (up_max <= -1e299) {
        model.bias = low_min;  // single-class data, all labels negative
    } else if (low_min >= 1e299) {
        model.bias = up_max;   // all labels positive
    } else {
        model.bias = 0.5 * (up_max + low_min);
    }
    return model;
}

inline double svm_decision(const SvmModel& model, const Eigen::VectorXd& kvec) {
    if (kvec.size() != model.coef.size()) {
        throw std::invalid_argument("svm_decision: kernel vector length mismatch");
    }
    return model.coef.dot(kvec) + model.bias;
}

// Predicted label; a decision value of exactly zero goes to +1.
inline double svm_predict(const SvmModel& model, const Eigen::VectorXd& kvec) {
    return svm_decision(model, kvec) >= 0.0 ? 1.0 : -1.0;
}

// ---------------------------------------------------------------------------
// Monte Carlo learning curves.
// ---------------------------------------------------------------------------

struct LearningCurveOptions {
    int test_points = 2000;
    unsigned threads = 0;
    GramOptions gram;
};

struct EmpiricalCurve {
    std::vector<double> sample_counts;
    std::vector<double> mean_errors;    // trial-averaged test MSE per P
    std::vector<double> stddev_errors;  // across trials
};

// Measures E_g(P): draw a fresh uniform training set, fit KRR, and score the
// mean squared error on fresh test points; averaged over `trials` draws.
// Every task derives its own seed, so results are independent of scheduling.
inline EmpiricalCurve empirical_learning_curve(
    const FeatureMapSpec& spec, const std::function<Eigen::VectorXd(const Eigen::MatrixXd&)>& target,
    std::span<const int> sample_grid, double ridge, int trials, std::uint64_t seed,
    const LearningCurveOptions& opt = {}) {
    spec.validate();
    if (trials < 1) throw std::invalid_argument("empirical_learning_curve: trials must be >= 1");
    const std::size_t tasks = sample_grid.size() * static_cast<std::size_t>(trials);
    std::vector<double> errors(tasks, 0.0);

    GramOptions inner = opt.gram;
    inner.threads = 1;  // tasks are the unit of parallelism
    parallel_for(tasks, opt.threads, [&](std::size_t t) {
        const std::size_t p_idx = t / static_cast<std::size_t>(trials);
        const int P = sample_grid[p_idx];
        if (P < 1) throw std::invalid_argument("empirical_learning_curve: P must be >= 1");
        const std::uint64_t train_seed = substream(seed, 2 * t);
        const std::uint64_t test_seed = substream(seed, 2 * t + 1);
        const Eigen::MatrixXd X = sample_uniform(spec.num_features, P, train_seed);
        const Eigen::MatrixXd Xt = sample_uniform(spec.num_features, opt.test_points, test_seed);
        const Eigen::VectorXd y = target(X);
        const Eigen::VectorXd yt = target(Xt);
        const GramMatrix G = gram(spec, X, inner);
        const KrrModel model = krr_fit(G.entries, y, ridge);
        const Eigen::MatrixXd Kt = kernel_matrix(spec, Xt, X, inner);
        const Eigen::VectorXd pred = Kt * model.dual_coefficients;
        errors[t] = (pred - yt).squaredNorm() / static_cast<double>(opt.test_points);
    });

    EmpiricalCurve curve;
    for (std::size_t p = 0; p < sample_grid.size(); ++p) {
        double mean = 0.0;
        for (int r = 0; r < trials; ++r) mean += errors[p * trials + r];
        mean /= trials;
        double var = 0.0;
        for (int r = 0; r < trials; ++r) {
            const double d = errors[p * trials + r] - mean;
            var += d * d;
        }
        curve.sample_counts.push_back(static_cast<double>(sample_grid[p]));
        curve.mean_errors.push_back(mean);
        curve.stddev_errors.push_back(trials > 1 ? std::sqrt(var / (trials - 1)) : 0.0);
    }
    return curve;
}

// ---------------------------------------------------------------------------
// Cross-validated bandwidth tuning.
// ---------------------------------------------------------------------------

enum class TuneMetric { Accuracy, MSE };

struct TuneOptions {
    double ridge = 1e-10;  // KRR regularization for the MSE metric
    double svm_C = 1.0;    // SVM box constraint for the accuracy metric
    unsigned threads = 0;
    GramOptions gram;
    int svm_max_iterations = 100000;
};

struct TuneResult {
    double best_c = 0.0;
    std::vector<double> scores;  // aligned with the candidate grid
};

namespace detail {

// Fold ids per sample. Classification folds are stratified per label.
inline std::vector<int> fold_assignment(const Eigen::VectorXd& y, int folds, bool stratified,
                                        std::uint64_t seed) {
    const Eigen::Index P = y.size();
    std::vector<int> assignment(static_cast<std::size_t>(P), 0);
    SplitMix64 gen(substream(seed, 3));
    if (stratified) {
        for (double cls : {1.0, -1.0}) {
            std::vector<Eigen::Index> members;
            for (Eigen::Index i = 0; i < P; ++i) {
                if (y(i) == cls) members.push_back(i);
            }
            for (std::size_t i = members.size(); i > 1; --i) {
                std::swap(members[i - 1], members[gen.below(i)]);
            }
            for (std::size_t i = 0; i < members.size(); ++i) {
                assignment[static_cast<std::size_t>(members[i])] =
                    static_cast<int>(i % static_cast<std::size_t>(folds));
            }
        }
    } else {
        std::vector<Eigen::Index> order(static_cast<std::size_t>(P));
        for (Eigen::Index i = 0; i < P; ++i) order[static_cast<std::size_t>(i)] = i;
        for (std::size_t i = order.size(); i > 1; --i) {
            std::swap(order[i - 1], order[gen.below(i)]);
        }
        for (std::size_t i = 0; i < order.size(); ++i) {
            assignment[static_cast<std::size_t>(order[i])] =
                static_cast<int>(i % static_cast<std::size_t>(folds));
        }
    }
    return assignment;
}

}  // namespace detail

// k-fold cross-validation score per candidate bandwidth; the winner is the
// best score with ties broken toward the smaller (more regularizing) c.
// Accuracy scores an SVM, MSE scores kernel ridge regression.
inline TuneResult tune_bandwidth(FeatureMapSpec base, const Eigen::MatrixXd& X,
                                 const Eigen::VectorXd& y, std::span<const double> c_grid,
                                 int folds, TuneMetric metric, std::uint64_t seed,
                                 const TuneOptions& opt = {}) {
    if (c_grid.empty()) throw std::invalid_argument("tune_bandwidth: empty bandwidth grid");
    if (folds < 2) throw std::invalid_argument("tune_bandwidth: need at least 2 folds");
    const Eigen::Index P = X.rows();
    if (P < 2 * folds) {
        throw std::invalid_argument("tune_bandwidth: folds of size < 2 with P = " +
                                    std::to_string(P));
    }
    const bool classify = metric == TuneMetric::Accuracy;
    const std::vector<int> fold_of = detail::fold_assignment(y, folds, classify, seed);

    GramOptions inner = opt.gram;
    inner.threads = 1;
    std::vector<double> scores(c_grid.size(), 0.0);
    parallel_for(c_grid.size(), opt.threads, [&](std::size_t ci) {
        FeatureMapSpec spec = base;
        spec.bandwidth = c_grid[ci];
        const GramMatrix G = gram(spec, X, inner);
        double score_sum = 0.0;
        for (int f = 0; f < folds; ++f) {
            std::vector<Eigen::Index> train, test;
            for (Eigen::Index i = 0; i < P; ++i) {
                (fold_of[static_cast<std::size_t>(i)] == f ? test : train).push_back(i);
            }
            if (test.empty() || train.empty()) {
                throw std::invalid_argument("tune_bandwidth: empty fold");
            }
            Eigen::MatrixXd Ktr(train.size(), train.size());
            Eigen::MatrixXd Kte(test.size(), train.size());
            Eigen::VectorXd ytr(train.size()), yte(test.size());
            for (std::size_t a = 0; a < train.size(); ++a) {
                ytr(static_cast<Eigen::Index>(a)) = y(train[a]);
                for (std::size_t b = 0; b < train.size(); ++b) {
                    Ktr(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) =
                        G.entries(train[a], train[b]);
                }
            }
            for (std::size_t a = 0; a < test.size(); ++a) {
                yte(static_cast<Eigen::Index>(a)) = y(test[a]);
                for (std::size_t b = 0; b < train.size(); ++b) {
                    Kte(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) =
                        G.entries(test[a], train[b]);
                }
            }
            if (classify) {
                SvmSettings settings;
                settings.C = opt.svm_C;
                settings.max_iterations = opt.svm_max_iterations;
                const SvmModel model = svm_fit(Ktr, ytr, settings);
                int correct = 0;
                for (Eigen::Index a = 0; a < yte.size(); ++a) {
                    const double pred = svm_predict(model, Kte.row(a).transpose());
                    if (pred == yte(a)) ++correct;
                }
                score_sum += static_cast<double>(correct) / static_cast<double>(yte.size());
            } else {
                const KrrModel model = krr_fit(Ktr, ytr, opt.ridge);
                const Eigen::VectorXd pred = Kte * model.dual_coefficients;
                score_sum += (pred - yte).squaredNorm() / static_cast<double>(yte.size());
            }
        }
        scores[ci] = score_sum / folds;
    });

    std::size_t best = 0;
    for (std::size_t ci = 1; ci < c_grid.size(); ++ci) {
        const bool better = classify ? scores[ci] > scores[best] : scores[ci] < scores[best];
        const bool tie = scores[ci] == scores[best] && c_grid[ci] < c_grid[best];
        if (better || tie) best = ci;
    }
    return {c_grid[best], std::move(scores)};
}

// ---------------------------------------------------------------------------
// Model serialization.
// ---------------------------------------------------------------------------

namespace detail {

inline nlohmann::json map_to_json(const std::optional<FeatureMapSpec>& map) {
    if (!map) return nullptr;
    nlohmann::json j{{"family", family_name(map->family)},
                     {"bandwidth", map->bandwidth},
                     {"num_features", map->num_features}};
    if (map->evo_seed) j["evo_seed"] = *map->evo_seed;
    return j;
}

inline std::optional<FeatureMapSpec> map_from_json(const nlohmann::json& j) {
    if (j.is_null()) return std::nullopt;
    FeatureMapSpec spec;
    spec.family = parse_family(j.at("family").get<std::string>());
    spec.bandwidth = j.at("bandwidth").get<double>();
    spec.num_features = j.at("num_features").get<int>();
    if (j.contains("evo_seed")) spec.evo_seed = j.at("evo_seed").get<std::uint64_t>();
    return spec;
}

}  // namespace detail

inline nlohmann::json krr_to_json(const KrrModel& model) {
    return {{"type", "krr"},
            {"ridge", model.ridge},
            {"duals", std::vector<double>(model.dual_coefficients.data(),
                                          model.dual_coefficients.data() +
                                              model.dual_coefficients.size())},
            {"map", detail::map_to_json(model.map)}};
}

inline KrrModel krr_from_json(const nlohmann::json& j) {
    if (j.at("type").get<std::string>() != "krr") {
        throw std::runtime_error("krr_from_json: not a krr model");
    }
    KrrModel model;
    const auto duals = j.at("duals").get<std::vector<double>>();
    model.dual_coefficients =
        Eigen::Map<const Eigen::VectorXd>(duals.data(), static_cast<Eigen::Index>(duals.size()));
    model.ridge = j.at("ridge").get<double>();
    model.map = detail::map_from_json(j.at("map"));
    return model;
}

inline nlohmann::json svm_to_json(const SvmModel& model) {
    return {{"type", "svm"},
            {"C", model.C},
            {"bias", model.bias},
            {"alpha", std::vector<double>(model.alpha.data(),
                                          model.alpha.data() + model.alpha.size())},
            {"coef", std::vector<double>(model.coef.data(),
                                         model.coef.data() + model.coef.size())},
            {"support_indices", model.support_indices},
            {"map", detail::map_to_json(model.map)}};
}

inline SvmModel svm_from_json(const nlohmann::json& j) {
    if (j.at("type").get<std::string>() != "svm") {
        throw std::runtime_error("svm_from_json: not an svm model");
    }
    SvmModel model;
    const auto alpha = j.at("alpha").get<std::vector<double>>();
    const auto coef = j.at("coef").get<std::vector<double>>();
    model.alpha =
        Eigen::Map<const Eigen::VectorXd>(alpha.data(), static_cast<Eigen::Index>(alpha.size()));
    model.coef =
        Eigen::Map<const Eigen::VectorXd>(coef.data(), static_cast<Eigen::Index>(coef.size()));
    model.bias = j.at("bias").get<double>();
    model.C = j.at("C").get<double>();
    model.support_indices = j.at("support_indices").get<std::vector<int>>();
    model.map = detail::map_from_json(j.at("map"));
    return model;
}

}  // namespace qkband
