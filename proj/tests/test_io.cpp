#include <catch2/catch.hpp>

#include <cstdio>
#include <filesystem>

#include "cellgp/cellgp.hpp"

using namespace cellgp;

namespace {

std::string temp_path(const std::string& name) {
    return (std::filesystem::temp_directory_path() / ("cellgp_io_" + name)).string();
}

}  // namespace

TEST_CASE("complex JSON round-trips bit-exactly") {
    CellularComplex X = make_triangulated_grid(2, 3);
    X.set_weights(1, Eigen::VectorXd::LinSpaced(X.count(1), 0.5, 2.0));
    json j = complex_to_json(X);
    CellularComplex Y = complex_from_json(j);

    REQUIRE(Y.dimension() == X.dimension());
    for (int k = 0; k <= X.dimension(); ++k) REQUIRE(Y.count(k) == X.count(k));
    for (int k = 1; k <= X.dimension(); ++k) {
        const auto& a = X.incidence(k).triplets();
        const auto& b = Y.incidence(k).triplets();
        REQUIRE(a.size() == b.size());
        for (std::size_t i = 0; i < a.size(); ++i) {
            REQUIRE(a[i].row == b[i].row);
            REQUIRE(a[i].col == b[i].col);
            REQUIRE(a[i].sign == b[i].sign);
        }
    }
    REQUIRE((Y.weights(1) - X.weights(1)).cwiseAbs().maxCoeff() == 0.0);
    REQUIRE(Y.builder()->kind == "triangulated_grid");
    REQUIRE(complex_to_json(Y).dump() == j.dump());
    REQUIRE(complex_hash(Y) == complex_hash(X));
}

TEST_CASE("polygon and explicit cells survive the round trip") {
    ComplexBuilder b(2);
    b.add_vertices(4);
    b.add_simplex({0, 1});
    b.add_simplex({0, 2});
    b.add_simplex({1, 3});
    b.add_simplex({2, 3});
    b.add_polygon({0, 2, 3, 1});
    CellularComplex X = b.build();
    CellularComplex Y = complex_from_json(complex_to_json(X));
    REQUIRE(Y.incidence(2).dense().isApprox(X.incidence(2).dense()));

    ComplexBuilder e(1);
    e.add_vertices(2);
    e.add_cell(1, {{0, -1}, {1, 1}});
    CellularComplex Z = complex_from_json(complex_to_json(e.build()));
    REQUIRE(Z.incidence(1).dense()(0, 0) == -1.0);
}

TEST_CASE("tampered incidence is rejected on load") {
    json j = complex_to_json(make_path(3));
    j["incidence"][0][0][2] = -j["incidence"][0][0][2].get<int>();
    REQUIRE_THROWS_AS(complex_from_json(j), ArgumentError);
    json missing = complex_to_json(make_path(3));
    missing.erase("incidence");
    REQUIRE_THROWS_AS(complex_from_json(missing), ArgumentError);
}

TEST_CASE("spectral bases round-trip and verify orthonormality on load") {
    CellularComplex X = make_triangulated_grid(2, 2);
    WeightSet W = WeightSet::from_complex(X);
    SpectralBasis basis = eigendecompose(dirac_matrix(X, W), W);
    basis.complex_hash = complex_hash(X);

    SpectralBasis loaded = basis_from_json(basis_to_json(basis));
    REQUIRE((loaded.eigenvalues - basis.eigenvalues).cwiseAbs().maxCoeff() == 0.0);
    REQUIRE((loaded.vectors - basis.vectors).cwiseAbs().maxCoeff() == 0.0);
    REQUIRE(loaded.source == "dirac");
    REQUIRE(loaded.complex_hash == basis.complex_hash);
    REQUIRE(loaded.space == basis.space);

    json corrupt = basis_to_json(basis);
    corrupt["vectors_colmajor"][0] = 17.0;
    REQUIRE_THROWS_AS(basis_from_json(corrupt), NumericError);
}

TEST_CASE("fit artifacts and kernel sidecars carry provenance") {
    CellularComplex X = make_path(4);
    WeightSet W = WeightSet::unit(X);
    SpectralBasis bd = eigendecompose(dirac_matrix(X, W), W);
    bd.complex_hash = complex_hash(X);
    Rng rng(3);
    std::vector<Observation> obs;
    for (Index i = 0; i < 4; ++i) obs.push_back({Target::cell(bd.space, 0, i), rng.normal()});
    OptimizerConfig cfg;
    cfg.iters = 10;
    GPFit fit = fit_rd(bd, RDHyper{}, obs, 0.1, cfg);

    json fj = fit_to_json(fit, 7);
    REQUIRE(fj.at("family") == "rd");
    REQUIRE(fj.at("seed") == 7);
    REQUIRE(fj.at("iterations") == 10);
    REQUIRE(fj.at("basis_hash") == bd.complex_hash);
    REQUIRE(fj.at("hyperparameters").contains("c"));
    REQUIRE(std::isfinite(fj.at("final_nll").get<double>()));

    KernelMatrix km = kernel_from_fit(bd, fit);
    json sj = kernel_sidecar(km);
    REQUIRE(sj.at("family") == "rd");
    REQUIRE(sj.at("basis_source") == "dirac");
    REQUIRE(sj.at("filter").size() == static_cast<std::size_t>(km.size()));
}

TEST_CASE("grid field CSV round-trips") {
    GridField g = GridField::sampled(FieldKind::vector2, 2, 3, [](double x, double y) { return x - y; },
                                     [](double x, double y) { return x * y; });
    const std::string path = temp_path("field.csv");
    write_field_csv(path, g);
    GridField h = read_field_csv(path, FieldKind::vector2);
    REQUIRE(h.rows == g.rows);
    REQUIRE(h.cols == g.cols);
    REQUIRE((h.a - g.a).cwiseAbs().maxCoeff() == 0.0);
    REQUIRE((h.b - g.b).cwiseAbs().maxCoeff() == 0.0);
    std::remove(path.c_str());

    REQUIRE_THROWS_AS(read_field_csv(temp_path("nonexistent.csv"), FieldKind::scalar), ArgumentError);
}

TEST_CASE("dataset and cochain CSVs have the declared headers") {
    std::map<int, Eigen::VectorXd> truth{{0, Eigen::Vector3d(1.0, 2.0, 3.0)}};
    Dataset ds = make_dataset(truth, {{0, 2.0 / 3.0}}, 1e-2, 1);
    const std::string dpath = temp_path("dataset.csv");
    write_dataset_csv(dpath, ds);
    std::string text = read_text(dpath);
    REQUIRE(text.rfind("dim,cell_id,observed_flag,noisy_value,true_value\n", 0) == 0);
    REQUIRE(std::count(text.begin(), text.end(), '\n') == 4);  // header + 3 cells
    std::remove(dpath.c_str());

    const std::string cpath = temp_path("cochain.csv");
    write_cochain_csv(cpath, CochainVec{1, Eigen::Vector2d(0.5, -0.5)});
    std::string ctext = read_text(cpath);
    REQUIRE(ctext.find("orientation") != std::string::npos);
    REQUIRE(ctext.find("dim,cell_id,value") != std::string::npos);
    std::remove(cpath.c_str());
}

TEST_CASE("kernel matrices dump to CSV with a header row") {
    CellularComplex X = make_path(3);
    WeightSet W = WeightSet::unit(X);
    KernelMatrix K = rd_kernel(eigendecompose(dirac_matrix(X, W), W), RDHyper{});
    const std::string path = temp_path("kernel.csv");
    write_matrix_csv(path, K.K);
    std::string text = read_text(path);
    REQUIRE(text.rfind("c0,c1,c2,c3,c4\n", 0) == 0);
    REQUIRE(std::count(text.begin(), text.end(), '\n') == 6);
    std::istringstream first_row(text.substr(text.find('\n') + 1));
    std::string cell;
    std::getline(first_row, cell, ',');
    REQUIRE(std::stod(cell) == K.K(0, 0));
    std::remove(path.c_str());
}

TEST_CASE("numeric formatting survives a parse round trip") {
    for (double x : {1.0 / 3.0, 1e-17, 123456.789012345678, -2.2250738585072014e-308}) {
        REQUIRE(std::stod(fmt(x)) == x);
    }
}
