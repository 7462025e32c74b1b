#pragma once

#include <filesystem>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "cellgp/io.hpp"

namespace cellgp {

// ---------------------------------------------------------------------------
// Run configuration: one strict JSON file, unknown keys rejected. Defaults
// reproduce the signal-mixing protocol (10x10 vertex mesh, modes 20..100,
// one-third splits, noise variance 1e-2, Adam lr 0.1 for 1000 iterations,
// 20 seeds, nu = 2, all inits 1.5).
// ---------------------------------------------------------------------------

struct RunConfig {
    std::string kind = "triangulated_grid";
    Index rows = 9;
    Index cols = 9;

    double nu = 2.0;
    double matern_init_sigma2 = 1.5;
    double matern_init_ell = 1.5;
    double rd_init_sigma2 = 1.5;
    double rd_init_r = 1.5;
    double rd_init_c = 1.5;
    double rd_init_d = 1.5;

    double lr = 0.1;
    int iters = 1000;

    Index k_min = 20;
    Index k_max = 100;
    double fraction = 1.0 / 3.0;
    double noise_var = 1e-2;
    int n_seeds = 20;
    std::uint64_t base_seed = 0;

    int threads = 1;
    std::string out_dir = "out";

    json to_json() const {
        json j;
        j["complex"] = {{"kind", kind}, {"rows", rows}, {"cols", cols}};
        j["kernel"] = {{"nu", nu},
                       {"matern_init", {{"sigma2", matern_init_sigma2}, {"ell", matern_init_ell}}},
                       {"rd_init", {{"sigma2", rd_init_sigma2}, {"r", rd_init_r}, {"c", rd_init_c}, {"d", rd_init_d}}}};
        j["optimizer"] = {{"lr", lr}, {"iters", iters}};
        j["data"] = {{"k_min", k_min}, {"k_max", k_max},      {"fraction", fraction},
                     {"noise_var", noise_var}, {"seeds", n_seeds}, {"base_seed", base_seed}};
        j["output"] = {{"dir", out_dir}};
        j["threads"] = threads;
        return j;
    }

    std::string hash() const { return hash_hex(to_json().dump()); }

    static void reject_unknown(const json& j, const std::set<std::string>& allowed, const std::string& where) {
        for (auto it = j.begin(); it != j.end(); ++it)
            if (!allowed.contains(it.key())) throw ArgumentError("unknown key '" + it.key() + "' in " + where);
    }

    static RunConfig from_json(const json& j) {
        RunConfig c;
        reject_unknown(j, {"complex", "kernel", "optimizer", "data", "output", "threads"}, "config");
        if (j.contains("complex")) {
            const json& cj = j.at("complex");
            reject_unknown(cj, {"kind", "rows", "cols"}, "config.complex");
            c.kind = cj.value("kind", c.kind);
            c.rows = cj.value("rows", c.rows);
            c.cols = cj.value("cols", c.cols);
        }
        if (j.contains("kernel")) {
            const json& kj = j.at("kernel");
            reject_unknown(kj, {"nu", "matern_init", "rd_init"}, "config.kernel");
            c.nu = kj.value("nu", c.nu);
            if (kj.contains("matern_init")) {
                const json& m = kj.at("matern_init");
                reject_unknown(m, {"sigma2", "ell"}, "config.kernel.matern_init");
                c.matern_init_sigma2 = m.value("sigma2", c.matern_init_sigma2);
                c.matern_init_ell = m.value("ell", c.matern_init_ell);
            }
            if (kj.contains("rd_init")) {
                const json& r = kj.at("rd_init");
                reject_unknown(r, {"sigma2", "r", "c", "d"}, "config.kernel.rd_init");
                c.rd_init_sigma2 = r.value("sigma2", c.rd_init_sigma2);
                c.rd_init_r = r.value("r", c.rd_init_r);
                c.rd_init_c = r.value("c", c.rd_init_c);
                c.rd_init_d = r.value("d", c.rd_init_d);
            }
        }
        if (j.contains("optimizer")) {
            const json& oj = j.at("optimizer");
            reject_unknown(oj, {"lr", "iters"}, "config.optimizer");
            c.lr = oj.value("lr", c.lr);
            c.iters = oj.value("iters", c.iters);
        }
        if (j.contains("data")) {
            const json& dj = j.at("data");
            reject_unknown(dj, {"k_min", "k_max", "fraction", "noise_var", "seeds", "base_seed"}, "config.data");
            c.k_min = dj.value("k_min", c.k_min);
            c.k_max = dj.value("k_max", c.k_max);
            c.fraction = dj.value("fraction", c.fraction);
            c.noise_var = dj.value("noise_var", c.noise_var);
            c.n_seeds = dj.value("seeds", c.n_seeds);
            c.base_seed = dj.value("base_seed", c.base_seed);
        }
        if (j.contains("output")) {
            const json& oj = j.at("output");
            reject_unknown(oj, {"dir"}, "config.output");
            c.out_dir = oj.value("dir", c.out_dir);
        }
        c.threads = j.value("threads", c.threads);
        if (c.iters < 0 || c.n_seeds < 1 || c.threads < 1) throw ArgumentError("config: iters, seeds and threads must be positive");
        return c;
    }
};

// ---------------------------------------------------------------------------
// Signal-mixing experiment driver
// ---------------------------------------------------------------------------

struct SeedResult {
    std::uint64_t seed = 0;
    bool ok = false;
    std::string error;
    // model -> dim -> metrics on the held-out cells
    std::map<std::string, std::map<int, DimMetrics>> metrics;
    std::map<std::string, GPFit> fits;
};

struct Aggregate {
    double mse_mean = 0.0, mse_se = 0.0, nll_mean = 0.0, nll_se = 0.0;
    int n = 0;
};

struct ExperimentSummary {
    std::vector<SeedResult> seeds;
    std::map<std::string, std::map<int, Aggregate>> agg;  // model -> dim
    std::string config_hash;
};

namespace detail {

struct ExperimentBases {
    CellularComplex complex;
    SpectralBasis edge_hodge;  // for the KL field
    SpectralBasis super;       // CC-Matérn
    SpectralBasis dirac;       // reaction-diffusion
    IndexSpace space;
    std::string hash;
};

inline ExperimentBases prepare_bases(const RunConfig& cfg) {
    CellularComplex X = build_complex(cfg.kind, cfg.kind == "path" ? std::vector<Index>{cfg.rows} : std::vector<Index>{cfg.rows, cfg.cols});
    WeightSet W = WeightSet::from_complex(X);
    std::string xh = complex_hash(X);
    SpectralBasis b1 = eigendecompose(hodge_laplacian(X, 1, W), W);
    SpectralBasis bl = eigendecompose(super_laplacian(X, W), W);
    SpectralBasis bd = eigendecompose(dirac_matrix(X, W), W);
    b1.complex_hash = xh;
    bl.complex_hash = xh;
    bd.complex_hash = xh;
    IndexSpace space = IndexSpace::direct_sum(X);
    return ExperimentBases{std::move(X), std::move(b1), std::move(bl), std::move(bd), std::move(space), std::move(xh)};
}

struct SeedArtifacts {
    SeedResult result;
    std::string predictions_csv;
    std::map<std::string, json> fit_json;
};

inline SeedArtifacts run_one_seed(const ExperimentBases& bases, const RunConfig& cfg, std::uint64_t seed) {
    SeedArtifacts art;
    art.result.seed = seed;

    const CellularComplex& X = bases.complex;
    const IndexSpace& space = bases.space;

    CochainVec f = kl_edge_field(bases.edge_hodge, cfg.k_min, cfg.k_max, seed);
    DerivedSignals derived = derive_vertex_triangle(f, X);
    std::map<int, Eigen::VectorXd> truth;
    truth[0] = derived.vertex.values;
    truth[1] = f.values;
    truth[2] = derived.triangle ? derived.triangle->values : Eigen::VectorXd::Zero(0);
    if (!derived.triangle) truth.erase(2);

    std::map<int, double> fractions;
    for (const auto& [dim, v] : truth) fractions[dim] = cfg.fraction;
    Dataset ds = make_dataset(truth, fractions, cfg.noise_var, seed);

    std::vector<Observation> obs;
    for (const auto& [dim, dd] : ds.dims)
        for (std::size_t i = 0; i < dd.observed.size(); ++i)
            obs.push_back({Target::cell(space, dim, dd.observed[i]), dd.noisy(static_cast<Index>(i))});

    std::vector<Target> all_targets;
    for (std::size_t b = 0; b < space.dims.size(); ++b)
        for (Index id = 0; id < space.counts[b]; ++id) all_targets.push_back(Target::cell(space, space.dims[b], id));

    OptimizerConfig ocfg;
    ocfg.lr = cfg.lr;
    ocfg.iters = cfg.iters;
    ocfg.seed = seed;

    struct ModelRun {
        std::string name;
        GPFit fit;
        Posterior post;
    };
    std::vector<ModelRun> runs;

    {
        MaternHyper init;
        init.nu = cfg.nu;
        init.sigma2 = cfg.matern_init_sigma2;
        init.ell = cfg.matern_init_ell;
        GPFit fit = fit_matern(bases.super, init, obs, cfg.noise_var, ocfg);
        KernelMatrix K = kernel_from_fit(bases.super, fit);
        runs.push_back({"matern", std::move(fit), posterior(K, obs, cfg.noise_var, all_targets)});
    }
    {
        RDHyper init;
        init.nu = cfg.nu;
        init.sigma2 = cfg.rd_init_sigma2;
        init.r = cfg.rd_init_r;
        init.c = cfg.rd_init_c;
        init.d = cfg.rd_init_d;
        GPFit fit = fit_rd(bases.dirac, init, obs, cfg.noise_var, ocfg);
        KernelMatrix K = kernel_from_fit(bases.dirac, fit);
        runs.push_back({"rd", std::move(fit), posterior(K, obs, cfg.noise_var, all_targets)});
    }

    std::ostringstream csv;
    csv << "model,dim,cell_id,mean,std,truth,error,observed\n";
    for (const ModelRun& run : runs) {
        // held-out metrics per dimension
        std::vector<Target> test_targets;
        std::vector<double> test_truth;
        std::vector<Index> test_flat;
        for (const auto& [dim, dd] : ds.dims)
            for (Index id : dd.test_indices()) {
                test_targets.push_back(Target::cell(space, dim, id));
                test_truth.push_back(dd.truth(id));
                test_flat.push_back(space.flat(dim, id));
            }
        Posterior sub;
        sub.targets = test_targets;
        sub.mean.resize(static_cast<Index>(test_flat.size()));
        sub.cov = Eigen::MatrixXd::Zero(static_cast<Index>(test_flat.size()), static_cast<Index>(test_flat.size()));
        for (std::size_t i = 0; i < test_flat.size(); ++i) {
            sub.mean(static_cast<Index>(i)) = run.post.mean(test_flat[i]);
            sub.cov(static_cast<Index>(i), static_cast<Index>(i)) = run.post.cov(test_flat[i], test_flat[i]);
        }
        Eigen::VectorXd tv = Eigen::Map<const Eigen::VectorXd>(test_truth.data(), static_cast<Index>(test_truth.size()));
        art.result.metrics[run.name] = evaluate(sub, tv, cfg.noise_var);

        for (const auto& [dim, dd] : ds.dims) {
            std::size_t at = 0;
            for (Index id = 0; id < dd.truth.size(); ++id) {
                const bool observed = at < dd.observed.size() && dd.observed[at] == id;
                if (observed) ++at;
                const Index fi = space.flat(dim, id);
                const double mean = run.post.mean(fi);
                const double sd = std::sqrt(std::max(run.post.cov(fi, fi), 0.0));
                csv << run.name << "," << dim << "," << id << "," << fmt(mean) << "," << fmt(sd) << "," << fmt(dd.truth(id))
                    << "," << fmt(mean - dd.truth(id)) << "," << (observed ? 1 : 0) << "\n";
            }
        }
        art.fit_json[run.name] = fit_to_json(run.fit, seed);
        art.result.fits[run.name] = run.fit;
    }
    art.predictions_csv = csv.str();
    art.result.ok = true;
    return art;
}

inline Aggregate aggregate_metric(const std::vector<double>& mse, const std::vector<double>& nll) {
    Aggregate a;
    a.n = static_cast<int>(mse.size());
    if (a.n == 0) return a;
    auto mean_of = [](const std::vector<double>& v) {
        double s = 0.0;
        for (double x : v) s += x;
        return s / static_cast<double>(v.size());
    };
    auto se_of = [&](const std::vector<double>& v, double mean) {
        if (v.size() < 2) return 0.0;
        double s = 0.0;
        for (double x : v) s += (x - mean) * (x - mean);
        return std::sqrt(s / static_cast<double>(v.size() - 1)) / std::sqrt(static_cast<double>(v.size()));
    };
    a.mse_mean = mean_of(mse);
    a.mse_se = se_of(mse, a.mse_mean);
    a.nll_mean = mean_of(nll);
    a.nll_se = se_of(nll, a.nll_mean);
    return a;
}

}  // namespace detail

/// The signal-mixing experiment: per seed, generate a KL edge field and its
/// derived vertex/triangle signals, observe noisy thirds, fit CC-Matérn and
/// reaction-diffusion GPs, and score predictions on the held-out cells.
/// Writes metrics plus per-seed prediction/fit artifacts when out_dir is
/// nonempty. Seeds run independently; failures are recorded per seed.
inline ExperimentSummary run_experiment(const RunConfig& cfg, const std::string& out_dir, bool force = false) {
    namespace fs = std::filesystem;
    const std::string config_hash = cfg.hash();

    if (!out_dir.empty()) {
        fs::create_directories(out_dir);
        const std::string meta_path = out_dir + "/run_meta.json";
        if (fs::exists(meta_path)) {
            json meta = json::parse(read_text(meta_path));
            if (meta.value("config_hash", "") != config_hash && !force)
                throw ArgumentError("output directory holds results for a different config; rerun with --force to overwrite");
        }
        json meta;
        meta["config_hash"] = config_hash;
        meta["config"] = cfg.to_json();
        write_text(meta_path, meta.dump(2) + "\n");
    }

    detail::ExperimentBases bases = detail::prepare_bases(cfg);

    std::vector<detail::SeedArtifacts> artifacts(static_cast<std::size_t>(cfg.n_seeds));
    auto work = [&](int s) {
        const std::uint64_t seed = cfg.base_seed + static_cast<std::uint64_t>(s);
        try {
            artifacts[static_cast<std::size_t>(s)] = detail::run_one_seed(bases, cfg, seed);
        } catch (const std::exception& e) {
            artifacts[static_cast<std::size_t>(s)].result.seed = seed;
            artifacts[static_cast<std::size_t>(s)].result.ok = false;
            artifacts[static_cast<std::size_t>(s)].result.error = e.what();
        }
    };
    if (cfg.threads <= 1) {
        for (int s = 0; s < cfg.n_seeds; ++s) work(s);
    } else {
        std::vector<std::thread> pool;
        const int T = std::min(cfg.threads, cfg.n_seeds);
        for (int t = 0; t < T; ++t)
            pool.emplace_back([&, t] {
                for (int s = t; s < cfg.n_seeds; s += T) work(s);
            });
        for (auto& th : pool) th.join();
    }

    ExperimentSummary summary;
    summary.config_hash = config_hash;
    for (auto& art : artifacts) summary.seeds.push_back(art.result);

    for (const std::string& model : {"matern", "rd"}) {
        std::map<int, std::vector<double>> mse, nll;
        for (const SeedResult& r : summary.seeds) {
            if (!r.ok) continue;
            for (const auto& [dim, m] : r.metrics.at(model)) {
                mse[dim].push_back(m.mse);
                nll[dim].push_back(m.nll);
            }
        }
        for (const auto& [dim, v] : mse) summary.agg[model][dim] = detail::aggregate_metric(v, nll[dim]);
    }

    if (!out_dir.empty()) {
        std::ostringstream csv;
        csv << "model,dim,mse_mean,mse_se,nll_mean,nll_se\n";
        for (const auto& [model, dims] : summary.agg)
            for (const auto& [dim, a] : dims)
                csv << model << "," << dim << "," << fmt(a.mse_mean) << "," << fmt(a.mse_se) << "," << fmt(a.nll_mean) << ","
                    << fmt(a.nll_se) << "\n";
        write_text(out_dir + "/metrics.csv", csv.str());

        json mj;
        mj["config_hash"] = config_hash;
        mj["complex_hash"] = bases.hash;
        for (const SeedResult& r : summary.seeds) {
            json sj;
            sj["seed"] = r.seed;
            sj["ok"] = r.ok;
            if (!r.ok) sj["error"] = r.error;
            for (const auto& [model, dims] : r.metrics)
                for (const auto& [dim, m] : dims) {
                    sj[model][std::to_string(dim)] = {{"mse", m.mse}, {"nll", m.nll}, {"count", m.count}};
                }
            mj["seeds"].push_back(sj);
        }
        for (const auto& [model, dims] : summary.agg)
            for (const auto& [dim, a] : dims)
                mj["aggregate"][model][std::to_string(dim)] = {
                    {"mse_mean", a.mse_mean}, {"mse_se", a.mse_se}, {"nll_mean", a.nll_mean}, {"nll_se", a.nll_se}, {"n", a.n}};
        write_text(out_dir + "/metrics.json", mj.dump(2) + "\n");

        for (std::size_t s = 0; s < artifacts.size(); ++s) {
            if (!artifacts[s].result.ok) continue;
            const std::string tag = std::to_string(artifacts[s].result.seed);
            write_text(out_dir + "/predictions_seed" + tag + ".csv",
                       "# config " + config_hash + "\n" + artifacts[s].predictions_csv);
            for (auto [model, fj] : artifacts[s].fit_json) {
                fj["config_hash"] = config_hash;
                write_text(out_dir + "/fit_seed" + tag + "_" + model + ".json", fj.dump(2) + "\n");
            }
        }
    }
    return summary;
}

// ---------------------------------------------------------------------------
// CLI command bodies. These throw; the CLI maps ArgumentError to exit 2 and
// NumericError to exit 3.
// ---------------------------------------------------------------------------

inline std::string cmd_build(const json& config, const std::string& out_path) {
    RunConfig::reject_unknown(config, {"complex"}, "build config");
    if (!config.contains("complex")) throw ArgumentError("build config needs a 'complex' section");
    const json& cj = config.at("complex");
    RunConfig::reject_unknown(cj, {"kind", "rows", "cols", "weights"}, "build config.complex");
    const std::string kind = cj.value("kind", "triangulated_grid");
    std::vector<Index> dims;
    if (kind == "path")
        dims = {cj.value("rows", Index(3))};
    else
        dims = {cj.value("rows", Index(9)), cj.value("cols", Index(9))};
    CellularComplex X = build_complex(kind, dims);
    if (cj.contains("weights")) {
        const json& wj = cj.at("weights");
        for (int k = 0; k <= X.dimension(); ++k)
            if (wj.contains(std::to_string(k))) {
                auto wv = wj.at(std::to_string(k)).get<std::vector<double>>();
                X.set_weights(k, Eigen::Map<const Eigen::VectorXd>(wv.data(), static_cast<Index>(wv.size())));
            }
    }
    if (!out_path.empty()) write_text(out_path, complex_to_json(X).dump(2) + "\n");

    std::ostringstream os;
    for (int k = 0; k <= X.dimension(); ++k) {
        const bool cubical = X.builder() && X.builder()->kind == "cubical_grid";
        const bool one = X.count(k) == 1;
        const char* noun = k == 0 ? (one ? "vertex" : "vertices")
                                  : (k == 1 ? (one ? "edge" : "edges")
                                            : (k == 2 ? (cubical ? (one ? "face" : "faces") : (one ? "triangle" : "triangles"))
                                                      : (one ? "cell" : "cells")));
        os << (k ? ", " : "") << X.count(k) << " " << noun;
    }
    os << "; boundary-of-boundary check passed";
    return os.str();
}

inline std::string cmd_eigen(const std::string& complex_file, const std::string& op_spec, const std::string& out_path) {
    CellularComplex X = complex_from_json(json::parse(read_text(complex_file)));
    WeightSet W = WeightSet::from_complex(X);
    OperatorMatrix op = [&] {
        if (op_spec == "super") return super_laplacian(X, W);
        if (op_spec == "dirac") return dirac_matrix(X, W);
        if (op_spec.rfind("hodge:", 0) == 0) {
            int k = 0;
            try {
                k = std::stoi(op_spec.substr(6));
            } catch (const std::exception&) {
                throw ArgumentError("bad dimension in operator spec: " + op_spec);
            }
            return hodge_laplacian(X, k, W);
        }
        throw ArgumentError("unknown operator spec: " + op_spec + " (use hodge:k, super or dirac)");
    }();
    SpectralBasis basis = eigendecompose(op, W);
    basis.complex_hash = complex_hash(X);
    if (!out_path.empty()) write_text(out_path, basis_to_json(basis).dump() + "\n");

    std::ostringstream os;
    os << basis.size() << " eigenvalues of " << basis.source << ", orthonormality error " << basis.orthonormality_error()
       << "\n";
    const Index show = std::min<Index>(basis.size(), 16);
    for (Index i = 0; i < show; ++i) os << (i ? ", " : "") << basis.eigenvalues(i);
    if (show < basis.size()) os << ", ...";
    return os.str();
}

inline std::string cmd_project(const std::string& field_csv, const std::string& complex_file, const std::string& kind,
                               const std::string& out_path) {
    CellularComplex X = complex_from_json(json::parse(read_text(complex_file)));
    GridField g = read_field_csv(field_csv, field_kind_from(kind));
    CochainVec f = project_field(g, X);
    if (!out_path.empty()) write_cochain_csv(out_path, f);
    std::ostringstream os;
    os << "projected " << field_kind_name(g.kind) << " field onto " << f.values.size() << " cells of dimension " << f.dim;
    return os.str();
}

}  // namespace cellgp
