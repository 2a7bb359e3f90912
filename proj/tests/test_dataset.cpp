#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "qkband/dataset.hpp"

using namespace qkband;

namespace {

constexpr double kPi = 3.14159265358979323846;

std::string write_temp(const std::string& name, const std::string& content) {
    const std::string path = (std::filesystem::temp_directory_path() / name).string();
    std::ofstream out(path);
    out << content;
    return path;
}

}  // namespace

TEST_CASE("uniform sampling", "[dataset]") {
    const Eigen::MatrixXd X = sample_uniform(3, 10000, 17);
    REQUIRE(X.minCoeff() >= -kPi);
    REQUIRE(X.maxCoeff() <= kPi);
    for (int j = 0; j < 3; ++j) {
        REQUIRE(std::abs(X.col(j).mean()) < 0.05);
    }
    REQUIRE(sample_uniform(3, 10000, 17) == X);
    REQUIRE(sample_uniform(3, 10, 18) != sample_uniform(3, 10, 19));
}

TEST_CASE("gaussian target", "[dataset]") {
    Eigen::MatrixXd X(3, 4);
    X.setZero();
    X.row(1) << 2.0, 2.0, 2.0, 2.0;  // norm^2 = 16 = n^2
    X.row(2) << 0.5, -0.5, 1.0, 0.0;
    const Eigen::VectorXd y = target_gaussian(X);
    REQUIRE(y(0) == 1.0);
    REQUIRE(std::abs(y(1) - std::exp(-1.0)) < 1e-15);
    for (int i = 0; i < 3; ++i) {
        REQUIRE(std::abs(y(i) - std::exp(-X.row(i).squaredNorm() / 16.0)) < 1e-15);
    }
}

TEST_CASE("cosine of the last coordinate", "[dataset]") {
    Eigen::MatrixXd X(3, 2);
    X << 0.4, 0.0,
         -1.0, kPi,
         0.2, kPi / 2.0;
    const Eigen::VectorXd y = target_cos_last(X);
    REQUIRE(y(0) == 1.0);
    REQUIRE(std::abs(y(1) + 1.0) < 1e-15);
    REQUIRE(std::abs(y(2)) < 1e-15);
}

TEST_CASE("csv ingestion", "[dataset]") {
    const std::string path = write_temp("qkband_two_rows.csv",
                                        "f0,f1,label\n0.5,-1.25,1\n0.125,3,0\n");
    const Dataset ds = load_csv_dataset(path);
    REQUIRE(ds.inputs.rows() == 2);
    REQUIRE(ds.inputs.cols() == 2);
    REQUIRE(ds.inputs(0, 0) == 0.5);
    REQUIRE(ds.inputs(0, 1) == -1.25);
    REQUIRE(ds.labels(0) == 1.0);
    REQUIRE(ds.labels(1) == 0.0);
    std::filesystem::remove(path);
}

TEST_CASE("csv error reporting", "[dataset]") {
    const std::string empty = write_temp("qkband_empty.csv", "");
    REQUIRE_THROWS_AS(load_csv_dataset(empty), std::runtime_error);
    std::filesystem::remove(empty);

    const std::string ragged = write_temp("qkband_ragged.csv", "a,b,y\n1,2,3\n4,5\n");
    REQUIRE_THROWS_WITH(load_csv_dataset(ragged),
                        Catch::Matchers::ContainsSubstring("line 3"));
    std::filesystem::remove(ragged);

    const std::string garbage = write_temp("qkband_garbage.csv", "a,b,y\n1,xyz,3\n");
    REQUIRE_THROWS_WITH(load_csv_dataset(garbage),
                        Catch::Matchers::ContainsSubstring("line 2"));
    std::filesystem::remove(garbage);

    REQUIRE_THROWS_AS(load_csv_dataset("/nonexistent/path.csv"), std::runtime_error);
}

TEST_CASE("wide csv keeps every feature", "[dataset]") {
    std::string content = "h0";
    for (int j = 1; j < 785; ++j) content += ",h" + std::to_string(j);
    content += "\n";
    for (int i = 0; i < 3; ++i) {
        content += std::to_string(i);
        for (int j = 1; j < 784; ++j) content += "," + std::to_string((i * j) % 7);
        content += ",1\n";
    }
    const std::string path = write_temp("qkband_wide.csv", content);
    const Dataset ds = load_csv_dataset(path);
    REQUIRE(ds.inputs.rows() == 3);
    REQUIRE(ds.inputs.cols() == 784);
    std::filesystem::remove(path);
}

TEST_CASE("pca recovers an embedded subspace", "[dataset]") {
    // Random points confined to a 3-dimensional subspace of R^8.
    const Eigen::MatrixXd latent = sample_uniform(3, 60, 21);
    Eigen::MatrixXd basis(8, 3);
    basis.setZero();
    basis(0, 0) = basis(3, 1) = basis(6, 2) = 1.0;
    basis(1, 0) = 0.5;
    basis(4, 2) = -0.25;
    const Eigen::MatrixXd X = latent * basis.transpose();
    const PcaResult pca = pca_project(X, 3);
    const Eigen::MatrixXd reconstructed =
        (pca.projected * pca.components.transpose()).rowwise() + pca.mean.transpose();
    REQUIRE((reconstructed - X).cwiseAbs().maxCoeff() < 1e-8);

    for (int k = 1; k < 3; ++k) {
        REQUIRE(pca.explained_variance(k) <= pca.explained_variance(k - 1) + 1e-12);
    }

    // Projection never lengthens a centered sample; equality at full rank.
    for (int i = 0; i < 10; ++i) {
        const double centered = (X.row(i) - pca.mean.transpose()).norm();
        REQUIRE(pca.projected.row(i).norm() <= centered + 1e-10);
        REQUIRE(std::abs(pca.projected.row(i).norm() - centered) < 1e-8);
    }
}

TEST_CASE("pca hand case", "[dataset]") {
    // Four points whose sample covariance is exactly diag(2, 1).
    const double a = std::sqrt(1.5);
    const double b = std::sqrt(0.75);
    Eigen::MatrixXd X(4, 2);
    X << a, b,
         a, -b,
         -a, b,
         -a, -b;
    const PcaResult pca = pca_project(X, 2);
    REQUIRE(std::abs(pca.explained_variance(0) - 2.0) < 1e-12);
    REQUIRE(std::abs(pca.explained_variance(1) - 1.0) < 1e-12);
    REQUIRE(std::abs(pca.components(0, 0) - 1.0) < 1e-12);
    REQUIRE(std::abs(pca.components(1, 0)) < 1e-12);

    REQUIRE_THROWS_AS(pca_project(X, 3), std::invalid_argument);
}

TEST_CASE("column standardization", "[dataset]") {
    const Eigen::MatrixXd X = sample_uniform(4, 200, 77).array() * 2.0 + 1.0;
    const Eigen::MatrixXd Z = standardize_columns(X);
    for (int j = 0; j < 4; ++j) {
        REQUIRE(std::abs(Z.col(j).mean()) < 1e-12);
        REQUIRE(std::abs(Z.col(j).squaredNorm() / 199.0 - 1.0) < 1e-12);
    }
}

TEST_CASE("provenance sidecar", "[dataset]") {
    DatasetProvenance p;
    p.source = "somewhere.csv";
    p.seed = 99;
    p.pca_components = 10;
    const std::string base = (std::filesystem::temp_directory_path() / "qkband_ds.csv").string();
    save_provenance_sidecar(base, p);
    std::ifstream in(base + ".provenance.json");
    REQUIRE(in.good());
    const auto j = nlohmann::json::parse(in);
    REQUIRE(j["source"] == "somewhere.csv");
    REQUIRE(j["seed"] == 99);
    REQUIRE(j["pca_components"] == 10);
    std::filesystem::remove(base + ".provenance.json");
}

TEST_CASE("binary filter and split", "[dataset]") {
    Dataset ds;
    ds.inputs = sample_uniform(2, 120, 3);
    ds.labels.resize(120);
    for (int i = 0; i < 120; ++i) ds.labels(i) = static_cast<double>(i % 4);  // classes 0..3

    const auto [train, test] = binary_filter_and_split(ds, 1.0, 3.0, 40, 15, 11);
    REQUIRE(train.size() == 40);
    REQUIRE(test.size() == 15);
    for (Eigen::Index i = 0; i < train.size(); ++i) {
        REQUIRE((train.labels(i) == 1.0 || train.labels(i) == -1.0));
    }

    // Disjointness: every row appears in at most one split.
    for (Eigen::Index i = 0; i < train.size(); ++i) {
        for (Eigen::Index j = 0; j < test.size(); ++j) {
            REQUIRE(train.inputs.row(i) != test.inputs.row(j));
        }
    }

    const auto [train2, test2] = binary_filter_and_split(ds, 1.0, 3.0, 40, 15, 11);
    REQUIRE(train2.inputs == train.inputs);
    REQUIRE(test2.labels == test.labels);

    REQUIRE_THROWS_AS(binary_filter_and_split(ds, 1.0, 3.0, 50, 15, 11), std::invalid_argument);
}
