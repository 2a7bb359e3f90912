#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "qkband/rng.hpp"

namespace qkband {

struct DatasetProvenance {
    std::string source;
    std::uint64_t seed = 0;
    int pca_components = 0;
};

inline nlohmann::json provenance_to_json(const DatasetProvenance& p) {
    return {{"source", p.source}, {"seed", p.seed}, {"pca_components", p.pca_components}};
}

// Writes "<path>.provenance.json" describing how a dataset was produced.
inline void save_provenance_sidecar(const std::string& path, const DatasetProvenance& p) {
    std::ofstream out(path + ".provenance.json");
    if (!out) throw std::runtime_error("cannot write provenance sidecar for " + path);
    out << provenance_to_json(p).dump(2) << '\n';
}

struct Dataset {
    Eigen::MatrixXd inputs;   // P x n, one sample per row
    Eigen::VectorXd labels;   // length P; -1/+1 for classification
    DatasetProvenance provenance;

    Eigen::Index size() const { return inputs.rows(); }
};

// P i.i.d. samples uniform on [-pi, pi]^n, bit-reproducible under seed.
inline Eigen::MatrixXd sample_uniform(int n, int P, std::uint64_t seed) {
    if (n < 1 || P < 1) throw std::invalid_argument("sample_uniform: need n >= 1 and P >= 1");
    const double pi = 3.14159265358979323846;
    Eigen::MatrixXd X(P, n);
    SplitMix64 gen(substream(seed, 0));
    for (Eigen::Index i = 0; i < P; ++i) {
        for (Eigen::Index j = 0; j < n; ++j) {
            X(i, j) = gen.uniform(-pi, pi);
        }
    }
    return X;
}

// f(x) = exp(-|x|^2 / n^2) with n the input dimension.
inline Eigen::VectorXd target_gaussian(const Eigen::MatrixXd& X) {
    const double n = static_cast<double>(X.cols());
    Eigen::VectorXd y(X.rows());
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
        y(i) = std::exp(-X.row(i).squaredNorm() / (n * n));
    }
    return y;
}

// f(x) = cos(x_n), the last coordinate.
inline Eigen::VectorXd target_cos_last(const Eigen::MatrixXd& X) {
    Eigen::VectorXd y(X.rows());
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
        y(i) = std::cos(X(i, X.cols() - 1));
    }
    return y;
}

namespace detail {

inline double parse_field(const std::string& field, std::size_t line_no) {
    double value = 0.0;
    const char* begin = field.data();
    const char* end = begin + field.size();
    while (begin < end && (*begin == ' ' || *begin == '\t')) ++begin;
    while (end > begin && (end[-1] == ' ' || end[-1] == '\t' || end[-1] == '\r')) --end;
    const auto [ptr, ec] = std::from_chars(begin, end, value);
    if (ec != std::errc{} || ptr != end) {
        throw std::runtime_error("csv parse error at line " + std::to_string(line_no) +
                                 ": bad number '" + field + "'");
    }
    return value;
}

}  // namespace detail

// Reads a CSV with a header row; every following row is numeric with the
// label in the last column. Ragged or malformed rows raise with the line
// number.
inline Dataset load_csv_dataset(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("load_csv_dataset: cannot open " + path);
    std::string line;
    if (!std::getline(in, line)) {
        throw std::runtime_error("load_csv_dataset: empty file " + path);
    }
    const std::size_t columns = 1 + static_cast<std::size_t>(
        std::count(line.begin(), line.end(), ','));
    if (columns < 2) {
        throw std::runtime_error("load_csv_dataset: need at least two columns in " + path);
    }
    std::vector<std::vector<double>> rows;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line == "\r") continue;
        std::vector<double> row;
        row.reserve(columns);
        std::stringstream ss(line);
        std::string field;
        while (std::getline(ss, field, ',')) {
            row.push_back(detail::parse_field(field, line_no));
        }
        if (row.size() != columns) {
            throw std::runtime_error("csv parse error at line " + std::to_string(line_no) +
                                     ": expected " + std::to_string(columns) + " fields, got " +
                                     std::to_string(row.size()));
        }
        rows.push_back(std::move(row));
    }
    if (rows.empty()) {
        throw std::runtime_error("load_csv_dataset: no data rows in " + path);
    }
    Dataset ds;
    ds.provenance.source = path;
    ds.inputs.resize(static_cast<Eigen::Index>(rows.size()),
                     static_cast<Eigen::Index>(columns - 1));
    ds.labels.resize(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        for (std::size_t j = 0; j + 1 < columns; ++j) {
            ds.inputs(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
        }
        ds.labels(static_cast<Eigen::Index>(i)) = rows[i][columns - 1];
    }
    return ds;
}

struct PcaResult {
    Eigen::MatrixXd projected;           // P x m
    Eigen::MatrixXd components;          // n x m, orthonormal columns
    Eigen::VectorXd explained_variance;  // descending
    Eigen::VectorXd mean;                // column means of the input
};

// Projects onto the top-m eigenvectors of the sample covariance
// (denominator P - 1). Component signs are fixed by making the
// largest-magnitude entry of each eigenvector positive.
inline PcaResult pca_project(const Eigen::MatrixXd& X, int m) {
    const Eigen::Index P = X.rows();
    const Eigen::Index n = X.cols();
    if (m < 1 || m > std::min(P, n)) {
        throw std::invalid_argument("pca_project: m must lie in [1, min(P, n)]");
    }
    PcaResult r;
    r.mean = X.colwise().mean();
    const Eigen::MatrixXd centered = X.rowwise() - r.mean.transpose();
    const Eigen::MatrixXd cov =
        (centered.transpose() * centered) / std::max<double>(1.0, static_cast<double>(P - 1));
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
    if (solver.info() != Eigen::Success) {
        throw std::runtime_error("pca_project: eigensolver failed to converge");
    }
    r.components.resize(n, m);
    r.explained_variance.resize(m);
    for (int k = 0; k < m; ++k) {
        const Eigen::Index src = n - 1 - k;  // ascending -> descending
        Eigen::VectorXd v = solver.eigenvectors().col(src);
        Eigen::Index arg_max = 0;
        v.cwiseAbs().maxCoeff(&arg_max);
        if (v(arg_max) < 0.0) v = -v;
        r.components.col(k) = v;
        r.explained_variance(k) = std::max(0.0, solver.eigenvalues()(src));
    }
    r.projected = centered * r.components;
    return r;
}

// Zero mean, unit variance per column (columns with zero variance are left
// centered only). Applied after PCA so the bandwidth is the only scale knob.
inline Eigen::MatrixXd standardize_columns(const Eigen::MatrixXd& X) {
    Eigen::MatrixXd out = X.rowwise() - X.colwise().mean();
    for (Eigen::Index j = 0; j < out.cols(); ++j) {
        const double var = out.col(j).squaredNorm() / std::max<double>(1.0, out.rows() - 1.0);
        if (var > 0.0) out.col(j) /= std::sqrt(var);
    }
    return out;
}

// Keeps the two requested classes, relabels them -1/+1, and produces
// disjoint shuffled train/test splits of the requested sizes.
inline std::pair<Dataset, Dataset> binary_filter_and_split(const Dataset& ds, double class_a,
                                                           double class_b, int train_count,
                                                           int test_count, std::uint64_t seed) {
    if (train_count < 1 || test_count < 0) {
        throw std::invalid_argument("binary_filter_and_split: bad split sizes");
    }
    std::vector<Eigen::Index> keep;
    for (Eigen::Index i = 0; i < ds.size(); ++i) {
        if (ds.labels(i) == class_a || ds.labels(i) == class_b) keep.push_back(i);
    }
    if (static_cast<int>(keep.size()) < train_count + test_count) {
        throw std::invalid_argument("binary_filter_and_split: only " +
                                    std::to_string(keep.size()) + " samples in the two classes, " +
                                    "need " + std::to_string(train_count + test_count));
    }
    SplitMix64 gen(substream(seed, 1));
    for (std::size_t i = keep.size(); i > 1; --i) {
        std::swap(keep[i - 1], keep[gen.below(i)]);
    }
    const auto build = [&](int offset, int count) {
        Dataset out;
        out.provenance = ds.provenance;
        out.provenance.seed = seed;
        out.inputs.resize(count, ds.inputs.cols());
        out.labels.resize(count);
        for (int i = 0; i < count; ++i) {
            const Eigen::Index src = keep[static_cast<std::size_t>(offset + i)];
            out.inputs.row(i) = ds.inputs.row(src);
            out.labels(i) = ds.labels(src) == class_a ? 1.0 : -1.0;
        }
        return out;
    };
    return {build(0, train_count), build(train_count, test_count)};
}

}  // namespace qkband
