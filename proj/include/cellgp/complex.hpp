#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "cellgp/common.hpp"

namespace cellgp {

// ---------------------------------------------------------------------------
// Cell geometry
//
// A cell is attached to the skeleton below it in one of three ways:
//   * SimplexGeom  — ordered vertex tuple; the tuple order is the orientation.
//   * PolygonGeom  — oriented vertex cycle of a 2-cell.
//   * ExplicitGeom — a signed list of (k-1)-cell ids, for cell types whose
//                    attachment degree we do not compute combinatorially.
// ---------------------------------------------------------------------------

struct SimplexGeom {
    std::vector<Index> vertices;
};

struct PolygonGeom {
    std::vector<Index> cycle;
};

struct ExplicitGeom {
    std::vector<std::pair<Index, int>> faces;  // (face id, sign in {-1,+1})
};

using CellGeometry = std::variant<SimplexGeom, PolygonGeom, ExplicitGeom>;

struct Cell {
    int dim = 0;
    Index id = 0;
    CellGeometry geometry;
};

/// Parity of the permutation that sorts `tuple` ascending; duplicate entries
/// are invalid. Counting inversions is fine at simplex sizes.
inline int sort_parity(const std::vector<Index>& tuple) {
    int inversions = 0;
    for (std::size_t i = 0; i < tuple.size(); ++i)
        for (std::size_t j = i + 1; j < tuple.size(); ++j) {
            if (tuple[i] == tuple[j]) throw ArgumentError("invalid cell: duplicate vertex in simplex tuple");
            if (tuple[i] > tuple[j]) ++inversions;
        }
    return (inversions % 2 == 0) ? 1 : -1;
}

/// Boundary of an oriented k-simplex, k >= 1. The l-th face drops vertex l
/// and carries sign (-1)^l; each face is reported as a sorted tuple with the
/// sign adjusted by the parity of the sort.
inline std::vector<std::pair<std::vector<Index>, int>> simplex_boundary(const std::vector<Index>& vertices) {
    if (vertices.size() < 2) throw ArgumentError("simplex_boundary: need at least 2 vertices");
    sort_parity(vertices);  // rejects duplicates
    std::vector<std::pair<std::vector<Index>, int>> faces;
    faces.reserve(vertices.size());
    for (std::size_t l = 0; l < vertices.size(); ++l) {
        std::vector<Index> face;
        face.reserve(vertices.size() - 1);
        for (std::size_t m = 0; m < vertices.size(); ++m)
            if (m != l) face.push_back(vertices[m]);
        int sign = (l % 2 == 0) ? 1 : -1;
        sign *= sort_parity(face);
        std::sort(face.begin(), face.end());
        faces.emplace_back(std::move(face), sign);
    }
    return faces;
}

/// Boundary of an oriented polygon given as a vertex cycle of length m >= 3.
/// Edge l runs cycle[l] -> cycle[l+1] (cyclically) and is reported in
/// canonical (low, high) order, sign +1 when the traversal agrees with it.
inline std::vector<std::pair<std::array<Index, 2>, int>> polygon_boundary(const std::vector<Index>& cycle) {
    if (cycle.size() < 3) throw ArgumentError("polygon_boundary: need at least 3 vertices");
    {
        std::vector<Index> check = cycle;
        std::sort(check.begin(), check.end());
        if (std::adjacent_find(check.begin(), check.end()) != check.end())
            throw ArgumentError("invalid cell: repeated vertex in polygon cycle");
    }
    std::vector<std::pair<std::array<Index, 2>, int>> edges;
    edges.reserve(cycle.size());
    for (std::size_t l = 0; l < cycle.size(); ++l) {
        Index a = cycle[l];
        Index b = cycle[(l + 1) % cycle.size()];
        if (a < b)
            edges.push_back({{a, b}, 1});
        else
            edges.push_back({{b, a}, -1});
    }
    return edges;
}

// ---------------------------------------------------------------------------
// Signed incidence matrices, stored as integer triplets
// ---------------------------------------------------------------------------

struct IncidenceTriplet {
    Index row = 0;
    Index col = 0;
    int sign = 0;
};

class IncidenceMatrix {
  public:
    IncidenceMatrix() = default;
    IncidenceMatrix(Index rows, Index cols, std::vector<IncidenceTriplet> triplets)
        : rows_(rows), cols_(cols), triplets_(std::move(triplets)) {
        std::sort(triplets_.begin(), triplets_.end(), [](const auto& a, const auto& b) {
            return std::tie(a.col, a.row) < std::tie(b.col, b.row);
        });
        for (const auto& t : triplets_) {
            if (t.row < 0 || t.row >= rows_ || t.col < 0 || t.col >= cols_)
                throw ArgumentError("incidence triplet out of range");
            if (t.sign != 1 && t.sign != -1) throw ArgumentError("incidence entries must be +/-1");
        }
    }

    Index rows() const { return rows_; }
    Index cols() const { return cols_; }
    const std::vector<IncidenceTriplet>& triplets() const { return triplets_; }

    Eigen::MatrixXd dense() const {
        Eigen::MatrixXd m = Eigen::MatrixXd::Zero(rows_, cols_);
        for (const auto& t : triplets_) m(t.row, t.col) += t.sign;
        return m;
    }

    /// Exact integer product this * other; entries accumulated in 64 bits.
    std::map<std::pair<Index, Index>, long long> integer_product(const IncidenceMatrix& other) const {
        if (cols_ != other.rows_) throw ArgumentError("integer_product: shape mismatch");
        std::vector<std::vector<std::pair<Index, int>>> cols_of_this(static_cast<std::size_t>(cols_));
        for (const auto& t : triplets_) cols_of_this[static_cast<std::size_t>(t.col)].emplace_back(t.row, t.sign);
        std::map<std::pair<Index, Index>, long long> acc;
        for (const auto& t : other.triplets_)
            for (const auto& [r, s] : cols_of_this[static_cast<std::size_t>(t.row)])
                acc[std::make_pair(r, t.col)] += static_cast<long long>(s) * t.sign;
        std::erase_if(acc, [](const auto& kv) { return kv.second == 0; });
        return acc;
    }

  private:
    Index rows_ = 0;
    Index cols_ = 0;
    std::vector<IncidenceTriplet> triplets_;
};

// ---------------------------------------------------------------------------
// Chains, cochains, direct sums
// ---------------------------------------------------------------------------

struct ChainVec {
    int dim = 0;
    Eigen::VectorXi coeffs;
};

struct CochainVec {
    int dim = 0;
    Eigen::VectorXd values;
};

struct DirectSumCochain {
    std::vector<CochainVec> blocks;  // one per dimension 0..n

    Eigen::VectorXd concat() const {
        Index total = 0;
        for (const auto& b : blocks) total += b.values.size();
        Eigen::VectorXd out(total);
        Index at = 0;
        for (const auto& b : blocks) {
            out.segment(at, b.values.size()) = b.values;
            at += b.values.size();
        }
        return out;
    }
};

// ---------------------------------------------------------------------------
// The complex
// ---------------------------------------------------------------------------

struct GridInfo {
    std::string kind;  // "path" | "triangulated_grid" | "cubical_grid"
    Index rows = 0;
    Index cols = 0;
};

class CellularComplex {
  public:
    CellularComplex(int top_dim, std::vector<std::vector<Cell>> cells, std::vector<IncidenceMatrix> incidence,
                    std::vector<Eigen::VectorXd> weights, std::optional<GridInfo> builder = std::nullopt)
        : dim_(top_dim),
          cells_(std::move(cells)),
          incidence_(std::move(incidence)),
          weights_(std::move(weights)),
          builder_(std::move(builder)) {}

    int dimension() const { return dim_; }

    Index count(int k) const {
        return (k < 0 || k > dim_) ? 0 : static_cast<Index>(cells_[static_cast<std::size_t>(k)].size());
    }

    Index total_count() const {
        Index t = 0;
        for (int k = 0; k <= dim_; ++k) t += count(k);
        return t;
    }

    const std::vector<Cell>& cells(int k) const {
        if (k < 0 || k > dim_) throw ArgumentError("cells: dimension out of range");
        return cells_[static_cast<std::size_t>(k)];
    }

    /// B_k for 1 <= k <= n, mapping k-chains to (k-1)-chains.
    const IncidenceMatrix& incidence(int k) const {
        if (k < 1 || k > dim_) throw ArgumentError("incidence: k out of range");
        return incidence_[static_cast<std::size_t>(k - 1)];
    }

    const Eigen::VectorXd& weights(int k) const {
        if (k < 0 || k > dim_) throw ArgumentError("weights: dimension out of range");
        return weights_[static_cast<std::size_t>(k)];
    }

    void set_weights(int k, Eigen::VectorXd w) {
        if (k < 0 || k > dim_) throw ArgumentError("set_weights: dimension out of range");
        if (w.size() != count(k)) throw ArgumentError("set_weights: length mismatch");
        if ((w.array() <= 0.0).any()) throw ArgumentError("set_weights: weights must be strictly positive");
        weights_[static_cast<std::size_t>(k)] = std::move(w);
    }

    const std::optional<GridInfo>& builder() const { return builder_; }

  private:
    int dim_;
    std::vector<std::vector<Cell>> cells_;
    std::vector<IncidenceMatrix> incidence_;  // incidence_[k-1] = B_k
    std::vector<Eigen::VectorXd> weights_;
    std::optional<GridInfo> builder_;
};

/// f(c) = f^T c for a cochain and a chain of the same dimension.
inline double evaluate_cochain(const CochainVec& f, const ChainVec& c) {
    if (f.dim != c.dim) throw ArgumentError("evaluate_cochain: dimension mismatch");
    if (f.values.size() != c.coeffs.size()) throw ArgumentError("evaluate_cochain: length mismatch");
    return f.values.dot(c.coeffs.cast<double>());
}

// ---------------------------------------------------------------------------
// Builder: cells in, verified incidence out
// ---------------------------------------------------------------------------

class ComplexBuilder {
  public:
    explicit ComplexBuilder(int top_dim) : dim_(top_dim) {
        if (top_dim < 0) throw ArgumentError("top dimension must be >= 0");
        cells_.resize(static_cast<std::size_t>(top_dim) + 1);
    }

    Index add_vertex() {
        Index id = static_cast<Index>(cells_[0].size());
        cells_[0].push_back(Cell{0, id, SimplexGeom{{id}}});
        return id;
    }

    void add_vertices(Index n) {
        for (Index i = 0; i < n; ++i) add_vertex();
    }

    /// k-simplex from an ordered (k+1)-vertex tuple; the order fixes the
    /// orientation. Faces must already exist one dimension below.
    Index add_simplex(std::vector<Index> vertices) {
        int k = static_cast<int>(vertices.size()) - 1;
        if (k < 1 || k > dim_) throw ArgumentError("add_simplex: dimension out of range");
        sort_parity(vertices);  // rejects duplicates
        Index id = static_cast<Index>(cells_[static_cast<std::size_t>(k)].size());
        cells_[static_cast<std::size_t>(k)].push_back(Cell{k, id, SimplexGeom{std::move(vertices)}});
        return id;
    }

    Index add_polygon(std::vector<Index> cycle) {
        if (dim_ < 2) throw ArgumentError("add_polygon: complex dimension < 2");
        polygon_boundary(cycle);  // validates
        Index id = static_cast<Index>(cells_[2].size());
        cells_[2].push_back(Cell{2, id, PolygonGeom{std::move(cycle)}});
        return id;
    }

    Index add_cell(int k, std::vector<std::pair<Index, int>> boundary) {
        if (k < 1 || k > dim_) throw ArgumentError("add_cell: dimension out of range");
        for (const auto& [f, s] : boundary)
            if (s != 1 && s != -1) throw ArgumentError("add_cell: boundary coefficients must be +/-1");
        for (std::size_t i = 0; i < boundary.size(); ++i)
            for (std::size_t j = i + 1; j < boundary.size(); ++j)
                if (boundary[i].first == boundary[j].first)
                    throw ArgumentError("add_cell: duplicate face in boundary list");
        Index id = static_cast<Index>(cells_[static_cast<std::size_t>(k)].size());
        cells_[static_cast<std::size_t>(k)].push_back(Cell{k, id, ExplicitGeom{std::move(boundary)}});
        return id;
    }

    CellularComplex build(std::optional<GridInfo> builder_info = std::nullopt) const {
        const Index n_vertices = static_cast<Index>(cells_[0].size());

        // canonical-key lookup per dimension: sorted vertex tuple -> (id, parity of stored order)
        std::vector<std::map<std::vector<Index>, std::pair<Index, int>>> keys(cells_.size());
        for (int k = 0; k <= dim_; ++k) {
            for (const Cell& cell : cells_[static_cast<std::size_t>(k)]) {
                if (const auto* sg = std::get_if<SimplexGeom>(&cell.geometry)) {
                    for (Index v : sg->vertices)
                        if (v < 0 || v >= n_vertices)
                            throw ConstructionError("cell " + std::to_string(cell.id) + " of dimension " +
                                                    std::to_string(k) + " references unknown vertex " + std::to_string(v));
                    int parity = sort_parity(sg->vertices);
                    std::vector<Index> key = sg->vertices;
                    std::sort(key.begin(), key.end());
                    auto [it, inserted] = keys[static_cast<std::size_t>(k)].try_emplace(key, cell.id, parity);
                    if (!inserted)
                        throw ConstructionError("duplicate " + std::to_string(k) + "-simplex with vertices " + tuple_str(key));
                } else if (const auto* pg = std::get_if<PolygonGeom>(&cell.geometry)) {
                    for (Index v : pg->cycle)
                        if (v < 0 || v >= n_vertices)
                            throw ConstructionError("cell " + std::to_string(cell.id) + " of dimension " +
                                                    std::to_string(k) + " references unknown vertex " + std::to_string(v));
                }
            }
        }

        std::vector<IncidenceMatrix> incidence;
        incidence.reserve(static_cast<std::size_t>(dim_));
        for (int k = 1; k <= dim_; ++k) {
            std::map<std::pair<Index, Index>, long long> entries;
            for (const Cell& cell : cells_[static_cast<std::size_t>(k)]) {
                if (const auto* sg = std::get_if<SimplexGeom>(&cell.geometry)) {
                    for (const auto& [face, sign] : simplex_boundary(sg->vertices)) {
                        auto it = keys[static_cast<std::size_t>(k - 1)].find(face);
                        if (it == keys[static_cast<std::size_t>(k - 1)].end())
                            throw ConstructionError("cell " + std::to_string(cell.id) + " of dimension " +
                                                    std::to_string(k) + ": missing face " + tuple_str(face));
                        entries[{it->second.first, cell.id}] += sign * it->second.second;
                    }
                } else if (const auto* pg = std::get_if<PolygonGeom>(&cell.geometry)) {
                    for (const auto& [edge, sign] : polygon_boundary(pg->cycle)) {
                        std::vector<Index> key{edge[0], edge[1]};
                        auto it = keys[static_cast<std::size_t>(k - 1)].find(key);
                        if (it == keys[static_cast<std::size_t>(k - 1)].end())
                            throw ConstructionError("cell " + std::to_string(cell.id) + " of dimension " +
                                                    std::to_string(k) + ": missing face " + tuple_str(key));
                        entries[{it->second.first, cell.id}] += sign * it->second.second;
                    }
                } else {
                    const auto& eg = std::get<ExplicitGeom>(cell.geometry);
                    for (const auto& [face, sign] : eg.faces) {
                        if (face < 0 || face >= static_cast<Index>(cells_[static_cast<std::size_t>(k - 1)].size()))
                            throw ConstructionError("cell " + std::to_string(cell.id) + " of dimension " +
                                                    std::to_string(k) + ": missing face id " + std::to_string(face));
                        entries[{face, cell.id}] += sign;
                    }
                }
            }
            std::vector<IncidenceTriplet> triplets;
            triplets.reserve(entries.size());
            for (const auto& [rc, v] : entries) {
                if (v == 0) continue;
                if (v != 1 && v != -1)
                    throw ConstructionError("non-regular incidence entry " + std::to_string(v) + " in B_" + std::to_string(k));
                triplets.push_back({rc.first, rc.second, static_cast<int>(v)});
            }
            incidence.emplace_back(static_cast<Index>(cells_[static_cast<std::size_t>(k - 1)].size()),
                                   static_cast<Index>(cells_[static_cast<std::size_t>(k)].size()), std::move(triplets));
        }

        // edge columns of B_1 must pair one +1 with one -1
        if (dim_ >= 1) {
            std::vector<int> colsum(static_cast<std::size_t>(incidence[0].cols()), 0);
            std::vector<int> colcnt(static_cast<std::size_t>(incidence[0].cols()), 0);
            for (const auto& t : incidence[0].triplets()) {
                colsum[static_cast<std::size_t>(t.col)] += t.sign;
                colcnt[static_cast<std::size_t>(t.col)] += 1;
            }
            for (std::size_t j = 0; j < colsum.size(); ++j)
                if (colcnt[j] != 2 || colsum[j] != 0)
                    throw ConstructionError("edge " + std::to_string(j) + " does not have one +1 and one -1 endpoint");
        }

        // boundary-of-boundary must vanish identically
        for (int k = 2; k <= dim_; ++k) {
            auto prod = incidence[static_cast<std::size_t>(k - 2)].integer_product(incidence[static_cast<std::size_t>(k - 1)]);
            if (!prod.empty()) {
                const auto& [rc, v] = *prod.begin();
                throw ConstructionError("internal consistency: (B_" + std::to_string(k - 1) + " B_" + std::to_string(k) +
                                        ") has entry " + std::to_string(v) + " at (" + std::to_string(rc.first) + "," +
                                        std::to_string(rc.second) + ")");
            }
        }

        std::vector<Eigen::VectorXd> weights;
        for (int k = 0; k <= dim_; ++k)
            weights.push_back(Eigen::VectorXd::Ones(static_cast<Index>(cells_[static_cast<std::size_t>(k)].size())));

        return CellularComplex(dim_, cells_, std::move(incidence), std::move(weights), std::move(builder_info));
    }

  private:
    static std::string tuple_str(const std::vector<Index>& t) {
        std::ostringstream os;
        os << "(";
        for (std::size_t i = 0; i < t.size(); ++i) os << (i ? "," : "") << t[i];
        os << ")";
        return os.str();
    }

    int dim_;
    std::vector<std::vector<Cell>> cells_;
};

// ---------------------------------------------------------------------------
// Grid builders. Vertex (i,j) of an r x c grid of squares has id i*(c+1)+j;
// x runs along j, y along i. Edges and faces are listed lexicographically.
// ---------------------------------------------------------------------------

inline CellularComplex make_path(Index n_vertices) {
    if (n_vertices < 1) throw ArgumentError("path: need at least one vertex");
    ComplexBuilder b(n_vertices > 1 ? 1 : 0);
    b.add_vertices(n_vertices);
    for (Index i = 0; i + 1 < n_vertices; ++i) b.add_simplex({i, i + 1});
    return b.build(GridInfo{"path", n_vertices, 0});
}

inline CellularComplex make_triangulated_grid(Index rows, Index cols) {
    if (rows < 1 || cols < 1) throw ArgumentError("triangulated_grid: dims must be >= 1");
    ComplexBuilder b(2);
    const Index vc = cols + 1;
    b.add_vertices((rows + 1) * (cols + 1));
    auto vid = [vc](Index i, Index j) { return i * vc + j; };

    std::vector<std::array<Index, 2>> edges;
    for (Index i = 0; i <= rows; ++i)
        for (Index j = 0; j < cols; ++j) edges.push_back({vid(i, j), vid(i, j + 1)});
    for (Index i = 0; i < rows; ++i)
        for (Index j = 0; j <= cols; ++j) edges.push_back({vid(i, j), vid(i + 1, j)});
    // each square is split along its lower-left to upper-right diagonal
    for (Index i = 0; i < rows; ++i)
        for (Index j = 0; j < cols; ++j) edges.push_back({vid(i, j), vid(i + 1, j + 1)});
    std::sort(edges.begin(), edges.end());
    for (const auto& e : edges) b.add_simplex({e[0], e[1]});

    std::vector<std::array<Index, 3>> tris;
    for (Index i = 0; i < rows; ++i)
        for (Index j = 0; j < cols; ++j) {
            tris.push_back({vid(i, j), vid(i, j + 1), vid(i + 1, j + 1)});
            tris.push_back({vid(i, j), vid(i + 1, j), vid(i + 1, j + 1)});
        }
    for (auto& t : tris) std::sort(t.begin(), t.end());
    std::sort(tris.begin(), tris.end());
    for (const auto& t : tris) b.add_simplex({t[0], t[1], t[2]});

    return b.build(GridInfo{"triangulated_grid", rows, cols});
}

inline CellularComplex make_cubical_grid(Index rows, Index cols) {
    if (rows < 1 || cols < 1) throw ArgumentError("cubical_grid: dims must be >= 1");
    ComplexBuilder b(2);
    const Index vc = cols + 1;
    b.add_vertices((rows + 1) * (cols + 1));
    auto vid = [vc](Index i, Index j) { return i * vc + j; };

    std::vector<std::array<Index, 2>> edges;
    for (Index i = 0; i <= rows; ++i)
        for (Index j = 0; j < cols; ++j) edges.push_back({vid(i, j), vid(i, j + 1)});
    for (Index i = 0; i < rows; ++i)
        for (Index j = 0; j <= cols; ++j) edges.push_back({vid(i, j), vid(i + 1, j)});
    std::sort(edges.begin(), edges.end());
    for (const auto& e : edges) b.add_simplex({e[0], e[1]});

    // clockwise square faces, cycle started at the smallest vertex id
    for (Index i = 0; i < rows; ++i)
        for (Index j = 0; j < cols; ++j)
            b.add_polygon({vid(i, j), vid(i + 1, j), vid(i + 1, j + 1), vid(i, j + 1)});

    return b.build(GridInfo{"cubical_grid", rows, cols});
}

inline CellularComplex build_complex(const std::string& kind, const std::vector<Index>& dims) {
    if (kind == "path") {
        if (dims.size() != 1) throw ArgumentError("path takes one dimension (vertex count)");
        return make_path(dims[0]);
    }
    if (kind == "triangulated_grid") {
        if (dims.size() != 2) throw ArgumentError("triangulated_grid takes (rows, cols)");
        return make_triangulated_grid(dims[0], dims[1]);
    }
    if (kind == "cubical_grid") {
        if (dims.size() != 2) throw ArgumentError("cubical_grid takes (rows, cols)");
        return make_cubical_grid(dims[0], dims[1]);
    }
    throw ArgumentError("unknown complex kind: " + kind);
}

// ---------------------------------------------------------------------------
// Relabeling: one permutation per dimension. sigma[k][b] is the old index of
// the cell placed at new position b, so vectors transform as v -> Sigma^T v
// and matrices as M -> Sigma^T M Sigma.
// ---------------------------------------------------------------------------

struct Relabeling {
    std::vector<std::vector<Index>> sigma;

    static Relabeling identity(const CellularComplex& X) {
        Relabeling r;
        for (int k = 0; k <= X.dimension(); ++k) {
            std::vector<Index> s(static_cast<std::size_t>(X.count(k)));
            for (Index i = 0; i < X.count(k); ++i) s[static_cast<std::size_t>(i)] = i;
            r.sigma.push_back(std::move(s));
        }
        return r;
    }

    static Relabeling random(const CellularComplex& X, Rng& rng) {
        Relabeling r = identity(X);
        for (auto& s : r.sigma)
            for (std::size_t i = s.size(); i > 1; --i)
                std::swap(s[i - 1], s[rng.below(i)]);
        return r;
    }

    void validate(const CellularComplex& X) const {
        if (static_cast<int>(sigma.size()) != X.dimension() + 1)
            throw ArgumentError("relabeling: wrong number of dimensions");
        for (int k = 0; k <= X.dimension(); ++k) {
            std::vector<Index> s = sigma[static_cast<std::size_t>(k)];
            if (static_cast<Index>(s.size()) != X.count(k)) throw ArgumentError("relabeling: wrong length at dimension " + std::to_string(k));
            std::sort(s.begin(), s.end());
            for (Index i = 0; i < static_cast<Index>(s.size()); ++i)
                if (s[static_cast<std::size_t>(i)] != i)
                    throw ArgumentError("relabeling: sigma_" + std::to_string(k) + " is not a bijection");
        }
    }

    Relabeling inverse() const {
        Relabeling inv;
        for (const auto& s : sigma) {
            std::vector<Index> t(s.size());
            for (std::size_t b = 0; b < s.size(); ++b) t[static_cast<std::size_t>(s[b])] = static_cast<Index>(b);
            inv.sigma.push_back(std::move(t));
        }
        return inv;
    }

    /// Permutation matrix Sigma_k (old-by-new), Sigma[sigma[b], b] = 1.
    Eigen::MatrixXd matrix(int k) const {
        const auto& s = sigma.at(static_cast<std::size_t>(k));
        Eigen::MatrixXd m = Eigen::MatrixXd::Zero(static_cast<Index>(s.size()), static_cast<Index>(s.size()));
        for (std::size_t b = 0; b < s.size(); ++b) m(s[b], static_cast<Index>(b)) = 1.0;
        return m;
    }

    /// Block-diagonal Sigma over the direct sum of all dimensions.
    Eigen::MatrixXd direct_sum_matrix() const {
        Index total = 0;
        for (const auto& s : sigma) total += static_cast<Index>(s.size());
        Eigen::MatrixXd m = Eigen::MatrixXd::Zero(total, total);
        Index at = 0;
        for (const auto& s : sigma) {
            for (std::size_t b = 0; b < s.size(); ++b) m(at + s[b], at + static_cast<Index>(b)) = 1.0;
            at += static_cast<Index>(s.size());
        }
        return m;
    }

    /// v -> Sigma_k^T v
    Eigen::VectorXd permute_vector(int k, const Eigen::VectorXd& v) const {
        const auto& s = sigma.at(static_cast<std::size_t>(k));
        if (v.size() != static_cast<Index>(s.size())) throw ArgumentError("permute_vector: length mismatch");
        Eigen::VectorXd out(v.size());
        for (std::size_t b = 0; b < s.size(); ++b) out(static_cast<Index>(b)) = v(s[b]);
        return out;
    }

    /// M -> Sigma_r^T M Sigma_c for row dimension kr and column dimension kc.
    Eigen::MatrixXd permute_matrix(int kr, int kc, const Eigen::MatrixXd& m) const {
        const auto& sr = sigma.at(static_cast<std::size_t>(kr));
        const auto& sc = sigma.at(static_cast<std::size_t>(kc));
        if (m.rows() != static_cast<Index>(sr.size()) || m.cols() != static_cast<Index>(sc.size()))
            throw ArgumentError("permute_matrix: shape mismatch");
        Eigen::MatrixXd out(m.rows(), m.cols());
        for (std::size_t i = 0; i < sr.size(); ++i)
            for (std::size_t j = 0; j < sc.size(); ++j) out(static_cast<Index>(i), static_cast<Index>(j)) = m(sr[i], sc[j]);
        return out;
    }
};

/// Relabeled copy of X: cell lists permuted, geometry references renumbered
/// (tuple order, hence orientation, preserved), incidence permuted on both
/// sides, weights carried along. Builder metadata is dropped since the cell
/// ordering is no longer the builder's.
inline CellularComplex relabel(const CellularComplex& X, const Relabeling& rho) {
    rho.validate(X);
    const Relabeling inv = rho.inverse();

    std::vector<std::vector<Cell>> cells;
    for (int k = 0; k <= X.dimension(); ++k) {
        std::vector<Cell> list;
        list.reserve(static_cast<std::size_t>(X.count(k)));
        for (Index b = 0; b < X.count(k); ++b) {
            Cell cell = X.cells(k)[static_cast<std::size_t>(rho.sigma[static_cast<std::size_t>(k)][static_cast<std::size_t>(b)])];
            cell.id = b;
            if (auto* sg = std::get_if<SimplexGeom>(&cell.geometry)) {
                for (Index& v : sg->vertices) v = inv.sigma[0][static_cast<std::size_t>(v)];
            } else if (auto* pg = std::get_if<PolygonGeom>(&cell.geometry)) {
                for (Index& v : pg->cycle) v = inv.sigma[0][static_cast<std::size_t>(v)];
            } else {
                auto& eg = std::get<ExplicitGeom>(cell.geometry);
                for (auto& [f, s] : eg.faces) f = inv.sigma[static_cast<std::size_t>(k - 1)][static_cast<std::size_t>(f)];
            }
            list.push_back(std::move(cell));
        }
        cells.push_back(std::move(list));
    }

    std::vector<IncidenceMatrix> incidence;
    for (int k = 1; k <= X.dimension(); ++k) {
        std::vector<IncidenceTriplet> triplets;
        triplets.reserve(X.incidence(k).triplets().size());
        for (const auto& t : X.incidence(k).triplets())
            triplets.push_back({inv.sigma[static_cast<std::size_t>(k - 1)][static_cast<std::size_t>(t.row)],
                                inv.sigma[static_cast<std::size_t>(k)][static_cast<std::size_t>(t.col)], t.sign});
        incidence.emplace_back(X.count(k - 1), X.count(k), std::move(triplets));
    }

    std::vector<Eigen::VectorXd> weights;
    for (int k = 0; k <= X.dimension(); ++k) weights.push_back(rho.permute_vector(k, X.weights(k)));

    return CellularComplex(X.dimension(), std::move(cells), std::move(incidence), std::move(weights));
}

}  // namespace cellgp
