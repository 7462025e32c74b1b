#pragma once

#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "cellgp/common.hpp"
#include "cellgp/complex.hpp"
#include "cellgp/fields.hpp"
#include "cellgp/gp.hpp"
#include "cellgp/kernels.hpp"
#include "cellgp/operators.hpp"

namespace cellgp {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Complex <-> JSON. Integers (cell references, incidence triplets) round-trip
// bit-exactly; loading re-assembles the incidence from the stored geometry
// and cross-checks it against the stored triplets.
// ---------------------------------------------------------------------------

inline json complex_to_json(const CellularComplex& X) {
    json j;
    j["dimension"] = X.dimension();
    json cells = json::array();
    for (int k = 0; k <= X.dimension(); ++k) {
        json level = json::array();
        for (const Cell& cell : X.cells(k)) {
            json rec;
            if (const auto* sg = std::get_if<SimplexGeom>(&cell.geometry)) {
                rec["simplex"] = sg->vertices;
            } else if (const auto* pg = std::get_if<PolygonGeom>(&cell.geometry)) {
                rec["polygon"] = pg->cycle;
            } else {
                const auto& eg = std::get<ExplicitGeom>(cell.geometry);
                json faces = json::array();
                for (const auto& [f, s] : eg.faces) faces.push_back({f, s});
                rec["explicit"] = faces;
            }
            level.push_back(rec);
        }
        cells.push_back(level);
    }
    j["cells"] = cells;

    json weights = json::array();
    for (int k = 0; k <= X.dimension(); ++k) {
        json w = json::array();
        for (Index i = 0; i < X.count(k); ++i) w.push_back(X.weights(k)(i));
        weights.push_back(w);
    }
    j["weights"] = weights;

    json incidence = json::array();
    for (int k = 1; k <= X.dimension(); ++k) {
        json trips = json::array();
        for (const auto& t : X.incidence(k).triplets()) trips.push_back({t.row, t.col, t.sign});
        incidence.push_back(trips);
    }
    j["incidence"] = incidence;

    if (X.builder()) {
        j["builder"] = {{"kind", X.builder()->kind}, {"rows", X.builder()->rows}, {"cols", X.builder()->cols}};
    }
    return j;
}

inline CellularComplex complex_from_json(const json& j) {
    if (!j.contains("dimension") || !j.contains("cells") || !j.contains("incidence") || !j.contains("weights"))
        throw ArgumentError("complex JSON missing required fields");
    const int n = j.at("dimension").get<int>();
    const json& cells = j.at("cells");
    if (static_cast<int>(cells.size()) != n + 1) throw ArgumentError("complex JSON: wrong number of cell levels");

    ComplexBuilder b(n);
    for (const json& rec : cells.at(0)) {
        if (!rec.contains("simplex")) throw ArgumentError("complex JSON: vertices must be 0-simplices");
        b.add_vertex();
    }
    for (int k = 1; k <= n; ++k) {
        for (const json& rec : cells.at(static_cast<std::size_t>(k))) {
            if (rec.contains("simplex")) {
                b.add_simplex(rec.at("simplex").get<std::vector<Index>>());
            } else if (rec.contains("polygon")) {
                b.add_polygon(rec.at("polygon").get<std::vector<Index>>());
            } else if (rec.contains("explicit")) {
                std::vector<std::pair<Index, int>> faces;
                for (const json& fs : rec.at("explicit")) faces.emplace_back(fs.at(0).get<Index>(), fs.at(1).get<int>());
                b.add_cell(k, std::move(faces));
            } else {
                throw ArgumentError("complex JSON: unknown geometry record");
            }
        }
    }

    std::optional<GridInfo> info;
    if (j.contains("builder"))
        info = GridInfo{j.at("builder").at("kind").get<std::string>(), j.at("builder").at("rows").get<Index>(),
                        j.at("builder").at("cols").get<Index>()};
    CellularComplex X = b.build(info);

    for (int k = 0; k <= n; ++k) {
        const json& w = j.at("weights").at(static_cast<std::size_t>(k));
        Eigen::VectorXd wv(static_cast<Index>(w.size()));
        for (std::size_t i = 0; i < w.size(); ++i) wv(static_cast<Index>(i)) = w.at(i).get<double>();
        X.set_weights(k, wv);
    }

    // stored incidence must agree with what the geometry assembles to
    for (int k = 1; k <= n; ++k) {
        const json& trips = j.at("incidence").at(static_cast<std::size_t>(k - 1));
        const auto& built = X.incidence(k).triplets();
        if (trips.size() != built.size()) throw ArgumentError("complex JSON: stored incidence B_" + std::to_string(k) + " is inconsistent");
        for (std::size_t i = 0; i < built.size(); ++i) {
            const json& t = trips.at(i);
            if (t.at(0).get<Index>() != built[i].row || t.at(1).get<Index>() != built[i].col || t.at(2).get<int>() != built[i].sign)
                throw ArgumentError("complex JSON: stored incidence B_" + std::to_string(k) + " is inconsistent");
        }
    }
    return X;
}

inline std::string complex_hash(const CellularComplex& X) { return hash_hex(complex_to_json(X).dump()); }

// ---------------------------------------------------------------------------
// Spectral basis <-> JSON. Loaders re-verify W-orthonormality before use.
// ---------------------------------------------------------------------------

inline json basis_to_json(const SpectralBasis& basis) {
    json j;
    j["source"] = basis.source;
    j["complex_hash"] = basis.complex_hash;
    j["eigenvalues"] = std::vector<double>(basis.eigenvalues.data(), basis.eigenvalues.data() + basis.eigenvalues.size());
    std::vector<double> u(basis.vectors.data(), basis.vectors.data() + basis.vectors.size());  // column-major
    j["vectors_colmajor"] = u;
    j["weights"] = std::vector<double>(basis.weight.data(), basis.weight.data() + basis.weight.size());
    j["space"] = {{"dims", basis.space.dims}, {"counts", basis.space.counts}};
    return j;
}

inline SpectralBasis basis_from_json(const json& j) {
    SpectralBasis basis;
    basis.source = j.at("source").get<std::string>();
    basis.complex_hash = j.value("complex_hash", "");
    auto evs = j.at("eigenvalues").get<std::vector<double>>();
    auto u = j.at("vectors_colmajor").get<std::vector<double>>();
    auto w = j.at("weights").get<std::vector<double>>();
    const Index n = static_cast<Index>(evs.size());
    if (static_cast<Index>(u.size()) != n * n || static_cast<Index>(w.size()) != n)
        throw ArgumentError("basis JSON: inconsistent sizes");
    basis.eigenvalues = Eigen::Map<const Eigen::VectorXd>(evs.data(), n);
    basis.vectors = Eigen::Map<const Eigen::MatrixXd>(u.data(), n, n);
    basis.weight = Eigen::Map<const Eigen::VectorXd>(w.data(), n);
    basis.space.dims = j.at("space").at("dims").get<std::vector<int>>();
    basis.space.counts = j.at("space").at("counts").get<std::vector<Index>>();
    basis.space.starts.clear();
    Index at = 0;
    for (Index c : basis.space.counts) {
        basis.space.starts.push_back(at);
        at += c;
    }
    basis.space.total = at;
    if (basis.space.total != n) throw ArgumentError("basis JSON: index space does not match spectrum size");
    if (basis.orthonormality_error() > 1e-8) throw NumericError("basis JSON: loaded basis is not W-orthonormal");
    return basis;
}

// ---------------------------------------------------------------------------
// Fit artifact and kernel sidecar
// ---------------------------------------------------------------------------

inline json fit_to_json(const GPFit& fit, std::uint64_t seed) {
    json j;
    j["family"] = fit.family;
    j["hyperparameters"] = fit.hyper;
    j["noise_var"] = fit.noise_var;
    j["seed"] = seed;
    j["iterations"] = fit.iterations;
    j["final_nll"] = fit.final_nll;
    j["basis_hash"] = fit.basis_hash;
    return j;
}

inline json kernel_sidecar(const KernelMatrix& km) {
    json j;
    j["family"] = km.family;
    j["params"] = km.params;
    j["basis_source"] = km.basis_source;
    j["basis_hash"] = km.basis_hash;
    j["filter"] = std::vector<double>(km.filter.data(), km.filter.data() + km.filter.size());
    return j;
}

// ---------------------------------------------------------------------------
// CSV helpers. '.' decimal, header row, UTF-8; doubles printed with 17
// significant digits so reruns are byte-identical.
// ---------------------------------------------------------------------------

inline std::string fmt(double x) {
    std::ostringstream os;
    os << std::setprecision(17) << x;
    return os.str();
}

inline void write_text(const std::string& path, const std::string& content) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw ArgumentError("cannot open for writing: " + path);
    f << content;
}

inline std::string read_text(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw ArgumentError("cannot open for reading: " + path);
    std::ostringstream os;
    os << f.rdbuf();
    return os.str();
}

inline void write_matrix_csv(const std::string& path, const Eigen::MatrixXd& m) {
    std::ostringstream os;
    for (Index j = 0; j < m.cols(); ++j) os << (j ? "," : "") << "c" << j;
    os << "\n";
    for (Index i = 0; i < m.rows(); ++i) {
        for (Index j = 0; j < m.cols(); ++j) os << (j ? "," : "") << fmt(m(i, j));
        os << "\n";
    }
    write_text(path, os.str());
}

/// Grid field CSV: rows "i,j,value" or "i,j,vx,vy".
inline void write_field_csv(const std::string& path, const GridField& g) {
    std::ostringstream os;
    os << (g.kind == FieldKind::vector2 ? "i,j,vx,vy\n" : "i,j,value\n");
    for (Index i = 0; i < g.node_rows(); ++i)
        for (Index j = 0; j < g.node_cols(); ++j) {
            os << i << "," << j << "," << fmt(g.a(i, j));
            if (g.kind == FieldKind::vector2) os << "," << fmt(g.b(i, j));
            os << "\n";
        }
    write_text(path, os.str());
}

inline GridField read_field_csv(const std::string& path, FieldKind kind) {
    std::istringstream is(read_text(path));
    std::string line;
    if (!std::getline(is, line)) throw ArgumentError("field CSV is empty: " + path);
    struct Row {
        Index i, j;
        double a, b;
    };
    std::vector<Row> rows;
    Index max_i = -1, max_j = -1;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::istringstream ls(line);
        Row r{};
        char comma;
        ls >> r.i >> comma >> r.j >> comma >> r.a;
        if (kind == FieldKind::vector2) ls >> comma >> r.b;
        if (!ls) throw ArgumentError("field CSV: malformed row '" + line + "'");
        max_i = std::max(max_i, r.i);
        max_j = std::max(max_j, r.j);
        rows.push_back(r);
    }
    if (max_i < 1 || max_j < 1) throw ArgumentError("field CSV: need at least a 2x2 node grid");
    GridField g;
    g.kind = kind;
    g.rows = max_i;
    g.cols = max_j;
    g.a = Eigen::MatrixXd::Zero(max_i + 1, max_j + 1);
    if (kind == FieldKind::vector2) g.b = Eigen::MatrixXd::Zero(max_i + 1, max_j + 1);
    for (const Row& r : rows) {
        g.a(r.i, r.j) = r.a;
        if (kind == FieldKind::vector2) g.b(r.i, r.j) = r.b;
    }
    return g;
}

/// Dataset CSV: "dim,cell_id,observed_flag,noisy_value,true_value".
inline void write_dataset_csv(const std::string& path, const Dataset& ds) {
    std::ostringstream os;
    os << "dim,cell_id,observed_flag,noisy_value,true_value\n";
    for (const auto& [dim, dd] : ds.dims) {
        std::size_t at = 0;
        for (Index i = 0; i < dd.truth.size(); ++i) {
            const bool observed = at < dd.observed.size() && dd.observed[at] == i;
            os << dim << "," << i << "," << (observed ? 1 : 0) << ",";
            os << (observed ? fmt(dd.noisy(static_cast<Index>(at))) : "") << "," << fmt(dd.truth(i)) << "\n";
            if (observed) ++at;
        }
    }
    write_text(path, os.str());
}

/// Cochain CSV with the orientation-sign convention in the header.
inline void write_cochain_csv(const std::string& path, const CochainVec& f) {
    std::ostringstream os;
    os << "# value sign is relative to the cell's stored orientation: positive = aligned, negative = counter\n";
    os << "dim,cell_id,value\n";
    for (Index i = 0; i < f.values.size(); ++i) os << f.dim << "," << i << "," << fmt(f.values(i)) << "\n";
    write_text(path, os.str());
}

}  // namespace cellgp
