// cellgp command-line front end: build complexes, compute spectral bases,
// run the signal-mixing experiment, and project grid fields onto cochains.
// Exit codes: 0 success, 2 input error, 3 numeric failure.

#include <CLI11.hpp>

#include <iostream>

#include "cellgp/cellgp.hpp"

namespace {

cellgp::json load_config(const std::string& path) {
    try {
        return cellgp::json::parse(cellgp::read_text(path));
    } catch (const nlohmann::json::exception& e) {
        throw cellgp::ArgumentError(std::string("config is not valid JSON: ") + e.what());
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Gaussian processes on cellular complexes"};
    app.require_subcommand(1);

    std::string config_path, out_path, complex_file, op_spec, field_csv, field_kind;
    bool force = false;
    std::uint64_t seed_override = 0;
    bool seed_given = false;

    CLI::App* build = app.add_subcommand("build", "Build a complex from a config and write it as JSON");
    build->add_option("--config", config_path, "JSON config with a 'complex' section")->required();
    build->add_option("--out", out_path, "output complex file");

    CLI::App* eigen = app.add_subcommand("eigen", "Eigendecompose hodge:k, super or dirac for a complex file");
    eigen->add_option("complex", complex_file, "complex JSON file")->required();
    eigen->add_option("operator", op_spec, "hodge:k | super | dirac")->required();
    eigen->add_option("--out", out_path, "output basis file");

    CLI::App* experiment = app.add_subcommand("experiment", "Run the signal-mixing experiment");
    experiment->add_option("--config", config_path, "JSON run config");
    experiment->add_option("--out", out_path, "output directory (overrides config)");
    experiment->add_option("--seed", seed_override, "base seed (overrides config)")->each([&](const std::string&) { seed_given = true; });
    experiment->add_flag("--force", force, "overwrite outputs from a different config");

    CLI::App* project = app.add_subcommand("project", "Project a grid field CSV onto a complex");
    project->add_option("field", field_csv, "field CSV (i,j,value or i,j,vx,vy)")->required();
    project->add_option("complex", complex_file, "complex JSON file")->required();
    project->add_option("kind", field_kind, "scalar | vector2 | pseudoscalar")->required();
    project->add_option("--out", out_path, "output cochain CSV");

    CLI11_PARSE(app, argc, argv);

    try {
        if (build->parsed()) {
            std::cout << cellgp::cmd_build(load_config(config_path), out_path) << "\n";
        } else if (eigen->parsed()) {
            std::cout << cellgp::cmd_eigen(complex_file, op_spec, out_path) << "\n";
        } else if (experiment->parsed()) {
            cellgp::RunConfig cfg =
                config_path.empty() ? cellgp::RunConfig{} : cellgp::RunConfig::from_json(load_config(config_path));
            if (seed_given) cfg.base_seed = seed_override;
            const std::string dir = out_path.empty() ? cfg.out_dir : out_path;
            cellgp::ExperimentSummary s = cellgp::run_experiment(cfg, dir, force);
            int ok = 0;
            for (const auto& r : s.seeds) {
                if (r.ok)
                    ++ok;
                else
                    std::cerr << "seed " << r.seed << " failed: " << r.error << "\n";
            }
            for (const auto& [model, dims] : s.agg)
                for (const auto& [dim, a] : dims)
                    std::cout << model << " dim " << dim << ": mse " << a.mse_mean << " +/- " << a.mse_se << ", nll "
                              << a.nll_mean << " +/- " << a.nll_se << "\n";
            std::cout << "results in " << dir << " (" << ok << "/" << s.seeds.size() << " seeds)\n";
            if (ok == 0) return 3;
        } else if (project->parsed()) {
            std::cout << cellgp::cmd_project(field_csv, complex_file, field_kind, out_path) << "\n";
        }
    } catch (const cellgp::ArgumentError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const cellgp::NumericError& e) {
        std::cerr << "numeric failure: " << e.what() << "\n";
        return 3;
    } catch (const nlohmann::json::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "failure: " << e.what() << "\n";
        return 3;
    }
    return 0;
}
