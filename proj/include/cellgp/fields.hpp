#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "cellgp/common.hpp"
#include "cellgp/complex.hpp"
#include "cellgp/operators.hpp"

namespace cellgp {

// ---------------------------------------------------------------------------
// Grid-sampled fields. Values live at the grid nodes of a builder complex;
// vertex (i,j) sits at position (x,y) = (j,i).
// ---------------------------------------------------------------------------

enum class FieldKind { scalar, vector2, pseudoscalar };

inline std::string field_kind_name(FieldKind k) {
    switch (k) {
        case FieldKind::scalar: return "scalar";
        case FieldKind::vector2: return "vector2";
        case FieldKind::pseudoscalar: return "pseudoscalar";
    }
    throw ArgumentError("unknown field kind");
}

inline FieldKind field_kind_from(const std::string& s) {
    if (s == "scalar") return FieldKind::scalar;
    if (s == "vector2") return FieldKind::vector2;
    if (s == "pseudoscalar") return FieldKind::pseudoscalar;
    throw ArgumentError("unknown field kind: " + s);
}

struct GridField {
    FieldKind kind = FieldKind::scalar;
    Index rows = 0;  // grid cells per axis; nodes are (rows+1) x (cols+1)
    Index cols = 0;
    Eigen::MatrixXd a;  // scalar value, flux density, or x-component
    Eigen::MatrixXd b;  // y-component for vector2

    Index node_rows() const { return rows + 1; }
    Index node_cols() const { return cols + 1; }

    void validate() const {
        if (rows < 1 || cols < 1) throw ArgumentError("grid field: dims must be >= 1");
        if (a.rows() != node_rows() || a.cols() != node_cols()) throw ArgumentError("grid field: node array shape mismatch");
        if (kind == FieldKind::vector2 && (b.rows() != node_rows() || b.cols() != node_cols()))
            throw ArgumentError("grid field: y-component shape mismatch");
    }

    static GridField sampled(FieldKind kind, Index rows, Index cols,
                             const std::function<double(double, double)>& fa,
                             const std::function<double(double, double)>& fb = nullptr) {
        GridField g;
        g.kind = kind;
        g.rows = rows;
        g.cols = cols;
        g.a.resize(rows + 1, cols + 1);
        if (kind == FieldKind::vector2) g.b.resize(rows + 1, cols + 1);
        for (Index i = 0; i <= rows; ++i)
            for (Index j = 0; j <= cols; ++j) {
                g.a(i, j) = fa(static_cast<double>(j), static_cast<double>(i));
                if (kind == FieldKind::vector2) g.b(i, j) = fb(static_cast<double>(j), static_cast<double>(i));
            }
        return g;
    }
};

// ---------------------------------------------------------------------------
// Karhunen-Loève synthetic edge field: f = sum_{i=k_min}^{k_max} xi_i u_i
// with xi_i ~ N(0, 1/lambda_i), indices 1-based inclusive over the ascending
// spectrum of Delta_1.
// ---------------------------------------------------------------------------

inline CochainVec kl_edge_field(const SpectralBasis& basis, Index k_min, Index k_max, std::uint64_t seed) {
    if (basis.source != "hodge:1") throw ArgumentError("kl_edge_field needs a basis of the edge Hodge Laplacian");
    const Index n = basis.size();
    if (!(0 < k_min && k_min < k_max && k_max <= n)) throw ArgumentError("kl_edge_field: need 0 < k_min < k_max <= N_1");
    const double scale = std::max(1.0, basis.eigenvalues.cwiseAbs().maxCoeff());
    Rng rng(seed);
    Eigen::VectorXd f = Eigen::VectorXd::Zero(n);
    for (Index i = k_min; i <= k_max; ++i) {
        const double lam = basis.eigenvalues(i - 1);
        if (lam <= 1e-12 * scale)
            throw ArgumentError("kl_edge_field: zero eigenvalue mode at index " + std::to_string(i));
        f += (rng.normal() / std::sqrt(lam)) * basis.vectors.col(i - 1);
    }
    return CochainVec{1, std::move(f)};
}

// ---------------------------------------------------------------------------
// Signals on vertices and triangles derived from an edge field by the
// incidence matrices: vertex = B_1 f, triangle = B_2^T f.
// ---------------------------------------------------------------------------

struct DerivedSignals {
    CochainVec vertex;
    std::optional<CochainVec> triangle;  // absent (with a warning) below dimension 2
};

inline DerivedSignals derive_vertex_triangle(const CochainVec& f, const CellularComplex& X) {
    if (f.dim != 1) throw ArgumentError("derive_vertex_triangle: input must be an edge cochain");
    if (f.values.size() != X.count(1)) throw ArgumentError("derive_vertex_triangle: length mismatch");
    DerivedSignals out;
    out.vertex = CochainVec{0, X.incidence(1).dense() * f.values};
    if (X.dimension() >= 2)
        out.triangle = CochainVec{2, X.incidence(2).dense().transpose() * f.values};
    return out;
}

// ---------------------------------------------------------------------------
// Field-to-cochain projection.
//   scalar       -> vertex cochain, point values at the nodes
//   vector2      -> edge cochain, trapezoidal average of endpoint dot
//                   products with the edge's orientation unit vector
//   pseudoscalar -> face cochain, corner average times the orientation sign
//                   (+1 anticlockwise cycle / normal +z, -1 clockwise)
// ---------------------------------------------------------------------------

namespace detail {

inline std::pair<double, double> node_position(Index vertex, Index node_cols) {
    return {static_cast<double>(vertex % node_cols), static_cast<double>(vertex / node_cols)};
}

inline const GridInfo& grid_info_for_projection(const GridField& field, const CellularComplex& X) {
    const auto& info = X.builder();
    if (!info) throw ArgumentError("project_field: complex has no grid builder metadata");
    if (info->kind == "path") throw ArgumentError("project_field: path complexes have no 2-D grid");
    if (info->rows != field.rows || info->cols != field.cols)
        throw ArgumentError("project_field: field shape does not match the complex grid");
    return *info;
}

inline std::vector<Index> face_cycle(const Cell& cell) {
    if (const auto* pg = std::get_if<PolygonGeom>(&cell.geometry)) return pg->cycle;
    if (const auto* sg = std::get_if<SimplexGeom>(&cell.geometry)) return sg->vertices;
    throw ArgumentError("project_field: face " + std::to_string(cell.id) + " has no vertex cycle");
}

}  // namespace detail

inline CochainVec project_field(const GridField& field, const CellularComplex& X) {
    field.validate();
    const GridInfo& info = detail::grid_info_for_projection(field, X);
    const Index nc = info.cols + 1;

    if (field.kind == FieldKind::scalar) {
        if (X.count(0) != field.node_rows() * field.node_cols()) throw ArgumentError("project_field: vertex count mismatch");
        Eigen::VectorXd v(X.count(0));
        for (Index id = 0; id < X.count(0); ++id) v(id) = field.a(id / nc, id % nc);
        return CochainVec{0, std::move(v)};
    }

    if (field.kind == FieldKind::vector2) {
        Eigen::VectorXd v(X.count(1));
        for (const Cell& cell : X.cells(1)) {
            const auto* sg = std::get_if<SimplexGeom>(&cell.geometry);
            if (!sg || sg->vertices.size() != 2) throw ArgumentError("project_field: edge without endpoints");
            const Index va = sg->vertices[0], vb = sg->vertices[1];
            auto [xa, ya] = detail::node_position(va, nc);
            auto [xb, yb] = detail::node_position(vb, nc);
            double tx = xb - xa, ty = yb - ya;
            const double len = std::hypot(tx, ty);
            tx /= len;
            ty /= len;
            const double dot_a = field.a(va / nc, va % nc) * tx + field.b(va / nc, va % nc) * ty;
            const double dot_b = field.a(vb / nc, vb % nc) * tx + field.b(vb / nc, vb % nc) * ty;
            v(cell.id) = 0.5 * (dot_a + dot_b);
        }
        return CochainVec{1, std::move(v)};
    }

    // pseudoscalar -> 2-cochain
    if (X.dimension() < 2) throw ArgumentError("project_field: complex has no 2-cells");
    Eigen::VectorXd v(X.count(2));
    for (const Cell& cell : X.cells(2)) {
        const std::vector<Index> cycle = detail::face_cycle(cell);
        double area2 = 0.0;  // shoelace; sign gives the cycle orientation
        double mean = 0.0;
        for (std::size_t l = 0; l < cycle.size(); ++l) {
            auto [x0, y0] = detail::node_position(cycle[l], nc);
            auto [x1, y1] = detail::node_position(cycle[(l + 1) % cycle.size()], nc);
            area2 += x0 * y1 - x1 * y0;
            mean += field.a(cycle[l] / nc, cycle[l] % nc);
        }
        mean /= static_cast<double>(cycle.size());
        v(cell.id) = (area2 >= 0.0 ? 1.0 : -1.0) * mean;
    }
    return CochainVec{2, std::move(v)};
}

// ---------------------------------------------------------------------------
// Observation splits
// ---------------------------------------------------------------------------

struct DimData {
    std::vector<Index> observed;  // ascending
    Eigen::VectorXd noisy;        // one value per observed cell
    Eigen::VectorXd truth;        // full length N_k

    std::vector<Index> test_indices() const {
        std::vector<Index> out;
        std::size_t at = 0;
        for (Index i = 0; i < truth.size(); ++i) {
            if (at < observed.size() && observed[at] == i)
                ++at;
            else
                out.push_back(i);
        }
        return out;
    }
};

struct Dataset {
    std::map<int, DimData> dims;
    double noise_var = 0.0;
    std::uint64_t seed = 0;
};

/// Seeded split: floor(fraction * N_k) cells per dimension observed without
/// replacement, corrupted by N(0, noise_var) noise. The second parameter of
/// the Gaussian is a variance throughout.
inline Dataset make_dataset(const std::map<int, Eigen::VectorXd>& truth, const std::map<int, double>& fractions,
                            double noise_var, std::uint64_t seed) {
    if (!(noise_var > 0.0)) throw ArgumentError("make_dataset: noise variance must be positive");
    Dataset ds;
    ds.noise_var = noise_var;
    ds.seed = seed;
    Rng base(seed);
    for (const auto& [dim, values] : truth) {
        const double frac = fractions.at(dim);
        if (!(frac > 0.0 && frac <= 1.0)) throw ArgumentError("make_dataset: fractions must lie in (0, 1]");
        const Index n = values.size();
        const Index n_obs = static_cast<Index>(std::floor(frac * static_cast<double>(n)));
        if (n_obs == 0) throw ArgumentError("make_dataset: fraction selects zero cells in dimension " + std::to_string(dim));
        Rng rng = base.fork(static_cast<std::uint64_t>(dim));
        DimData dd;
        dd.observed = rng.sample_without_replacement(n, n_obs);
        dd.truth = values;
        dd.noisy.resize(n_obs);
        const double sd = std::sqrt(noise_var);
        for (Index i = 0; i < n_obs; ++i) dd.noisy(i) = values(dd.observed[static_cast<std::size_t>(i)]) + sd * rng.normal();
        ds.dims.emplace(dim, std::move(dd));
    }
    return ds;
}

}  // namespace cellgp
