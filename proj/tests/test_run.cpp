#include <catch2/catch.hpp>

#include <cstdlib>
#include <filesystem>

#include "cellgp/cellgp.hpp"

using namespace cellgp;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string file(const std::string& name) const { return (path / name).string(); }
};

RunConfig tiny_config() {
    RunConfig cfg;
    cfg.rows = 3;
    cfg.cols = 3;
    cfg.k_min = 2;
    cfg.k_max = 8;
    cfg.iters = 15;
    cfg.n_seeds = 2;
    return cfg;
}

int run_cli(const std::string& args) {
    const std::string cmd = std::string(CELLGP_CLI_PATH) + " " + args + " >/dev/null 2>&1";
    int status = std::system(cmd.c_str());
    return WEXITSTATUS(status);
}

}  // namespace

TEST_CASE("run config defaults follow the training protocol") {
    RunConfig cfg;
    REQUIRE(cfg.kind == "triangulated_grid");
    REQUIRE(cfg.rows == 9);
    REQUIRE(cfg.cols == 9);
    REQUIRE(cfg.nu == 2.0);
    REQUIRE(cfg.matern_init_sigma2 == 1.5);
    REQUIRE(cfg.matern_init_ell == 1.5);
    REQUIRE(cfg.rd_init_r == 1.5);
    REQUIRE(cfg.rd_init_c == 1.5);
    REQUIRE(cfg.rd_init_d == 1.5);
    REQUIRE(cfg.lr == 0.1);
    REQUIRE(cfg.iters == 1000);
    REQUIRE(cfg.k_min == 20);
    REQUIRE(cfg.k_max == 100);
    REQUIRE(cfg.fraction == Approx(1.0 / 3.0));
    REQUIRE(cfg.noise_var == 1e-2);
    REQUIRE(cfg.n_seeds == 20);
}

TEST_CASE("config JSON round-trips and rejects unknown keys") {
    RunConfig cfg = tiny_config();
    RunConfig back = RunConfig::from_json(cfg.to_json());
    REQUIRE(back.to_json().dump() == cfg.to_json().dump());
    REQUIRE(back.hash() == cfg.hash());

    json j = cfg.to_json();
    j["surprise"] = 1;
    REQUIRE_THROWS_AS(RunConfig::from_json(j), ArgumentError);
    json j2 = cfg.to_json();
    j2["data"]["noize_var"] = 0.1;
    REQUIRE_THROWS_AS(RunConfig::from_json(j2), ArgumentError);

    RunConfig other = cfg;
    other.noise_var = 0.5;
    REQUIRE(other.hash() != cfg.hash());
}

TEST_CASE("cmd_build reports counts and writes a loadable complex") {
    TempDir dir("cellgp_build_test");
    json config;
    config["complex"] = {{"kind", "triangulated_grid"}, {"rows", 9}, {"cols", 9}};
    std::string summary = cmd_build(config, dir.file("complex.json"));
    REQUIRE(summary.find("100 vertices, 261 edges, 162 triangles") != std::string::npos);
    REQUIRE(summary.find("boundary-of-boundary check passed") != std::string::npos);
    CellularComplex X = complex_from_json(json::parse(read_text(dir.file("complex.json"))));
    REQUIRE(X.count(1) == 261);

    json unit;
    unit["complex"] = {{"kind", "cubical_grid"}, {"rows", 1}, {"cols", 1}};
    REQUIRE(cmd_build(unit, "").find("4 vertices, 4 edges, 1 face") != std::string::npos);

    json bad;
    bad["complex"] = {{"kind", "moebius"}};
    REQUIRE_THROWS_AS(cmd_build(bad, ""), ArgumentError);
}

TEST_CASE("cmd_eigen prints the path(3) spectrum and writes the basis") {
    TempDir dir("cellgp_eigen_test");
    json config;
    config["complex"] = {{"kind", "path"}, {"rows", 3}};
    cmd_build(config, dir.file("path.json"));

    std::string report = cmd_eigen(dir.file("path.json"), "hodge:0", dir.file("basis.json"));
    REQUIRE(report.find("hodge:0") != std::string::npos);
    SpectralBasis basis = basis_from_json(json::parse(read_text(dir.file("basis.json"))));
    REQUIRE(basis.eigenvalues(0) == Approx(0.0).margin(1e-12));
    REQUIRE(basis.eigenvalues(1) == Approx(1.0).margin(1e-12));
    REQUIRE(basis.eigenvalues(2) == Approx(3.0).margin(1e-12));

    std::string super_report = cmd_eigen(dir.file("path.json"), "super", "");
    REQUIRE(super_report.rfind("5 eigenvalues", 0) == 0);

    std::string dirac_report = cmd_eigen(dir.file("path.json"), "dirac", dir.file("dirac.json"));
    SpectralBasis bd = basis_from_json(json::parse(read_text(dir.file("dirac.json"))));
    for (Index i = 0; i < bd.size(); ++i)
        REQUIRE(bd.eigenvalues(i) == Approx(-bd.eigenvalues(bd.size() - 1 - i)).margin(1e-8));

    REQUIRE_THROWS_AS(cmd_eigen(dir.file("path.json"), "laplace", ""), ArgumentError);
}

TEST_CASE("cmd_project writes the projected cochain") {
    TempDir dir("cellgp_project_test");
    json config;
    config["complex"] = {{"kind", "cubical_grid"}, {"rows", 2}, {"cols", 2}};
    cmd_build(config, dir.file("grid.json"));
    GridField g = GridField::sampled(FieldKind::vector2, 2, 2, [](double, double) { return 1.0; },
                                     [](double, double) { return 0.0; });
    write_field_csv(dir.file("field.csv"), g);

    std::string report = cmd_project(dir.file("field.csv"), dir.file("grid.json"), "vector2", dir.file("cochain.csv"));
    REQUIRE(report.find("dimension 1") != std::string::npos);
    std::string text = read_text(dir.file("cochain.csv"));
    REQUIRE(text.find("dim,cell_id,value") != std::string::npos);

    REQUIRE_THROWS_AS(cmd_project(dir.file("field.csv"), dir.file("grid.json"), "spinor", ""), ArgumentError);
}

TEST_CASE("the experiment driver is deterministic and guards its outputs") {
    RunConfig cfg = tiny_config();
    TempDir a("cellgp_exp_a"), b("cellgp_exp_b");

    ExperimentSummary s1 = run_experiment(cfg, a.file("out"));
    ExperimentSummary s2 = run_experiment(cfg, b.file("out"));
    REQUIRE(s1.seeds.size() == 2);
    for (const auto& r : s1.seeds) REQUIRE(r.ok);
    for (const std::string& model : {"matern", "rd"})
        for (int dim = 0; dim <= 2; ++dim) {
            REQUIRE(std::isfinite(s1.agg.at(model).at(dim).mse_mean));
            REQUIRE(std::isfinite(s1.agg.at(model).at(dim).nll_mean));
        }

    REQUIRE(read_text(a.file("out/metrics.csv")) == read_text(b.file("out/metrics.csv")));
    REQUIRE(read_text(a.file("out/predictions_seed0.csv")) == read_text(b.file("out/predictions_seed0.csv")));
    std::string header = read_text(a.file("out/metrics.csv"));
    REQUIRE(header.rfind("model,dim,mse_mean,mse_se,nll_mean,nll_se\n", 0) == 0);
    REQUIRE(fs::exists(a.file("out/fit_seed0_matern.json")));
    REQUIRE(fs::exists(a.file("out/fit_seed1_rd.json")));
    REQUIRE(fs::exists(a.file("out/run_meta.json")));
    json fit0 = json::parse(read_text(a.file("out/fit_seed0_matern.json")));
    REQUIRE(fit0.at("config_hash") == s1.config_hash);
    REQUIRE(read_text(a.file("out/predictions_seed0.csv")).rfind("# config " + s1.config_hash, 0) == 0);

    // refuse to clobber a different config's outputs unless forced
    RunConfig other = cfg;
    other.noise_var = 0.5;
    REQUIRE_THROWS_AS(run_experiment(other, a.file("out")), ArgumentError);
    ExperimentSummary forced = run_experiment(other, a.file("out"), true);
    REQUIRE(forced.seeds.size() == 2);
}

TEST_CASE("parallel seed execution matches sequential") {
    RunConfig cfg = tiny_config();
    TempDir a("cellgp_exp_seq"), b("cellgp_exp_par");
    run_experiment(cfg, a.file("out"));
    cfg.threads = 2;
    run_experiment(cfg, b.file("out"));
    REQUIRE(read_text(a.file("out/metrics.csv")) == read_text(b.file("out/metrics.csv")));
}

TEST_CASE("the CLI maps error classes to exit codes") {
    TempDir dir("cellgp_cli_test");
    REQUIRE(run_cli("build --config " + dir.file("missing.json")) == 2);

    write_text(dir.file("broken.json"), "{not json");
    REQUIRE(run_cli("build --config " + dir.file("broken.json")) == 2);

    write_text(dir.file("ok.json"), R"({"complex": {"kind": "path", "rows": 3}})");
    REQUIRE(run_cli("build --config " + dir.file("ok.json") + " --out " + dir.file("path.json")) == 0);
    REQUIRE(run_cli("eigen " + dir.file("path.json") + " hodge:0") == 0);
    REQUIRE(run_cli("eigen " + dir.file("path.json") + " hodge:7") == 2);
    REQUIRE(run_cli("frobnicate") != 0);
}
