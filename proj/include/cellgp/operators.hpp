#pragma once

#include <Eigen/Dense>

#include <string>
#include <vector>

#include "cellgp/common.hpp"
#include "cellgp/complex.hpp"

namespace cellgp {

// ---------------------------------------------------------------------------
// Index space: which cells a vector over cochains refers to. Either a single
// dimension k (hodge bases) or the direct sum over all dimensions (super
// Laplacian / Dirac).
// ---------------------------------------------------------------------------

struct IndexSpace {
    std::vector<int> dims;
    std::vector<Index> counts;
    std::vector<Index> starts;
    Index total = 0;

    static IndexSpace single(int k, Index n) {
        IndexSpace s;
        s.dims = {k};
        s.counts = {n};
        s.starts = {0};
        s.total = n;
        return s;
    }

    static IndexSpace direct_sum(const CellularComplex& X) {
        IndexSpace s;
        Index at = 0;
        for (int k = 0; k <= X.dimension(); ++k) {
            s.dims.push_back(k);
            s.counts.push_back(X.count(k));
            s.starts.push_back(at);
            at += X.count(k);
        }
        s.total = at;
        return s;
    }

    bool contains(int dim) const {
        for (int d : dims)
            if (d == dim) return true;
        return false;
    }

    Index flat(int dim, Index cell) const {
        for (std::size_t b = 0; b < dims.size(); ++b)
            if (dims[b] == dim) {
                if (cell < 0 || cell >= counts[b]) throw ArgumentError("cell index out of range for dimension " + std::to_string(dim));
                return starts[b] + cell;
            }
        throw ArgumentError("dimension " + std::to_string(dim) + " not in this index space");
    }

    bool operator==(const IndexSpace& o) const { return dims == o.dims && counts == o.counts; }
};

// ---------------------------------------------------------------------------
// Weights
// ---------------------------------------------------------------------------

struct WeightSet {
    std::vector<Eigen::VectorXd> w;  // per dimension 0..n

    static WeightSet unit(const CellularComplex& X) {
        WeightSet ws;
        for (int k = 0; k <= X.dimension(); ++k) ws.w.push_back(Eigen::VectorXd::Ones(X.count(k)));
        return ws;
    }

    static WeightSet from_complex(const CellularComplex& X) {
        WeightSet ws;
        for (int k = 0; k <= X.dimension(); ++k) ws.w.push_back(X.weights(k));
        return ws;
    }

    const Eigen::VectorXd& at(int k) const {
        if (k < 0 || k >= static_cast<int>(w.size())) throw ArgumentError("weights: dimension out of range");
        return w[static_cast<std::size_t>(k)];
    }

    void validate() const {
        for (const auto& v : w)
            if ((v.array() <= 0.0).any()) throw ArgumentError("weights must be strictly positive");
    }

    Eigen::VectorXd concat(const IndexSpace& space) const {
        Eigen::VectorXd out(space.total);
        for (std::size_t b = 0; b < space.dims.size(); ++b) out.segment(space.starts[b], space.counts[b]) = at(space.dims[b]);
        return out;
    }
};

// ---------------------------------------------------------------------------
// Operator matrices
// ---------------------------------------------------------------------------

enum class OperatorRole { coboundary, coboundary_adjoint, hodge, super_laplacian, dirac };

inline std::string role_name(OperatorRole r, int k = -1) {
    switch (r) {
        case OperatorRole::coboundary: return "coboundary:" + std::to_string(k);
        case OperatorRole::coboundary_adjoint: return "coboundary_adjoint:" + std::to_string(k);
        case OperatorRole::hodge: return "hodge:" + std::to_string(k);
        case OperatorRole::super_laplacian: return "super";
        case OperatorRole::dirac: return "dirac";
    }
    throw ArgumentError("unknown operator role");
}

struct OperatorMatrix {
    OperatorRole role;
    int k = -1;  // meaningful for per-dimension roles
    Eigen::MatrixXd mat;
    IndexSpace domain;    // columns
    IndexSpace codomain;  // rows
};

namespace detail {

inline Eigen::MatrixXd incidence_dense(const CellularComplex& X, int k) { return X.incidence(k).dense(); }

/// W_k^{-1} B_{k+1} W_{k+1}, the matrix of d_k^*.
inline Eigen::MatrixXd adjoint_block(const CellularComplex& X, int k, const WeightSet& W) {
    Eigen::MatrixXd B = incidence_dense(X, k + 1);
    return W.at(k).cwiseInverse().asDiagonal() * B * W.at(k + 1).asDiagonal();
}

}  // namespace detail

/// D_k = B_{k+1}^T. k in {-1, n} yields the zero operator by convention.
inline OperatorMatrix coboundary(const CellularComplex& X, int k) {
    const int n = X.dimension();
    if (k < -1 || k > n) throw ArgumentError("coboundary: k out of range");
    OperatorMatrix op;
    op.role = OperatorRole::coboundary;
    op.k = k;
    if (k == -1) {
        op.mat = Eigen::MatrixXd::Zero(X.count(0), 0);
        op.domain = IndexSpace::single(-1, 0);
        op.codomain = IndexSpace::single(0, X.count(0));
    } else if (k == n) {
        op.mat = Eigen::MatrixXd::Zero(0, X.count(n));
        op.domain = IndexSpace::single(n, X.count(n));
        op.codomain = IndexSpace::single(n + 1, 0);
    } else {
        op.mat = detail::incidence_dense(X, k + 1).transpose();
        op.domain = IndexSpace::single(k, X.count(k));
        op.codomain = IndexSpace::single(k + 1, X.count(k + 1));
    }
    return op;
}

/// D_k^* = W_k^{-1} B_{k+1} W_{k+1}.
inline OperatorMatrix coboundary_adjoint(const CellularComplex& X, int k, const WeightSet& W) {
    const int n = X.dimension();
    if (k < -1 || k > n) throw ArgumentError("coboundary_adjoint: k out of range");
    W.validate();
    OperatorMatrix op;
    op.role = OperatorRole::coboundary_adjoint;
    op.k = k;
    if (k == -1) {
        op.mat = Eigen::MatrixXd::Zero(0, X.count(0));
        op.domain = IndexSpace::single(0, X.count(0));
        op.codomain = IndexSpace::single(-1, 0);
    } else if (k == n) {
        op.mat = Eigen::MatrixXd::Zero(X.count(n), 0);
        op.domain = IndexSpace::single(n + 1, 0);
        op.codomain = IndexSpace::single(n, X.count(n));
    } else {
        op.mat = detail::adjoint_block(X, k, W);
        op.domain = IndexSpace::single(k + 1, X.count(k + 1));
        op.codomain = IndexSpace::single(k, X.count(k));
    }
    return op;
}

/// Delta_k = B_k^T (W_{k-1}^{-1} B_k W_k) + (W_k^{-1} B_{k+1} W_{k+1}) B_{k+1}^T.
/// Self-adjoint and positive semi-definite in the W_k inner product.
inline OperatorMatrix hodge_laplacian(const CellularComplex& X, int k, const WeightSet& W) {
    const int n = X.dimension();
    if (k < 0 || k > n) throw ArgumentError("hodge_laplacian: k out of range");
    W.validate();
    Eigen::MatrixXd delta = Eigen::MatrixXd::Zero(X.count(k), X.count(k));
    if (k >= 1) {
        Eigen::MatrixXd B = detail::incidence_dense(X, k);
        delta += B.transpose() * (W.at(k - 1).cwiseInverse().asDiagonal() * B * W.at(k).asDiagonal());
    }
    if (k <= n - 1) {
        Eigen::MatrixXd B = detail::incidence_dense(X, k + 1);
        delta += (W.at(k).cwiseInverse().asDiagonal() * B * W.at(k + 1).asDiagonal()) * B.transpose();
    }
    OperatorMatrix op;
    op.role = OperatorRole::hodge;
    op.k = k;
    op.mat = std::move(delta);
    op.domain = IndexSpace::single(k, X.count(k));
    op.codomain = op.domain;
    return op;
}

/// blockdiag(Delta_0, ..., Delta_n) over the direct-sum cochain space.
inline OperatorMatrix super_laplacian(const CellularComplex& X, const WeightSet& W) {
    IndexSpace space = IndexSpace::direct_sum(X);
    Eigen::MatrixXd L = Eigen::MatrixXd::Zero(space.total, space.total);
    for (int k = 0; k <= X.dimension(); ++k) {
        OperatorMatrix dk = hodge_laplacian(X, k, W);
        L.block(space.starts[static_cast<std::size_t>(k)], space.starts[static_cast<std::size_t>(k)], X.count(k), X.count(k)) = dk.mat;
    }
    OperatorMatrix op;
    op.role = OperatorRole::super_laplacian;
    op.mat = std::move(L);
    op.domain = space;
    op.codomain = space;
    return op;
}

/// Block-tridiagonal Dirac matrix: W_{k-1}^{-1} B_k W_k above the diagonal,
/// B_k^T below. Squares to the super Laplacian.
inline OperatorMatrix dirac_matrix(const CellularComplex& X, const WeightSet& W) {
    W.validate();
    IndexSpace space = IndexSpace::direct_sum(X);
    Eigen::MatrixXd D = Eigen::MatrixXd::Zero(space.total, space.total);
    for (int k = 1; k <= X.dimension(); ++k) {
        Eigen::MatrixXd B = detail::incidence_dense(X, k);
        const Index r = space.starts[static_cast<std::size_t>(k - 1)];
        const Index c = space.starts[static_cast<std::size_t>(k)];
        D.block(r, c, X.count(k - 1), X.count(k)) = W.at(k - 1).cwiseInverse().asDiagonal() * B * W.at(k).asDiagonal();
        D.block(c, r, X.count(k), X.count(k - 1)) = B.transpose();
    }
    OperatorMatrix op;
    op.role = OperatorRole::dirac;
    op.mat = std::move(D);
    op.domain = space;
    op.codomain = space;
    return op;
}

/// Riesz representative of a chain: c_flat = W^{-1} c, so <f, c_flat>_W = f(c).
inline CochainVec flat(const ChainVec& c, const WeightSet& W) {
    CochainVec out;
    out.dim = c.dim;
    out.values = c.coeffs.cast<double>().cwiseQuotient(W.at(c.dim));
    return out;
}

inline Eigen::VectorXd flat_direct_sum(const Eigen::VectorXd& chain, const WeightSet& W, const IndexSpace& space) {
    if (chain.size() != space.total) throw ArgumentError("flat: length mismatch");
    return chain.cwiseQuotient(W.concat(space));
}

/// <f, g>_W = sum_a w_a f_a g_a.
inline double inner_product(const CochainVec& f, const CochainVec& g, const WeightSet& W) {
    if (f.dim != g.dim || f.values.size() != g.values.size()) throw ArgumentError("inner_product: dimension mismatch");
    return (f.values.array() * W.at(f.dim).array() * g.values.array()).sum();
}

// ---------------------------------------------------------------------------
// Spectral basis
// ---------------------------------------------------------------------------

struct SpectralBasis {
    Eigen::VectorXd eigenvalues;  // ascending; signed for Dirac sources
    Eigen::MatrixXd vectors;      // columns, W-orthonormal: U^T W U = I
    Eigen::VectorXd weight;       // concatenated diagonal of W over `space`
    std::string source;           // "hodge:k" | "super" | "dirac"
    IndexSpace space;
    std::string complex_hash;     // optional provenance

    Index size() const { return eigenvalues.size(); }

    double orthonormality_error() const {
        Eigen::MatrixXd g = vectors.transpose() * weight.asDiagonal() * vectors;
        g.diagonal().array() -= 1.0;
        return g.cwiseAbs().maxCoeff();
    }
};

namespace detail {

/// Symmetric eigensolve of an operator self-adjoint under diag(w), via the
/// similarity transform M = W^{1/2} A W^{-1/2}. The returned U satisfies
/// U^T W U = I by construction; eigenvalues ascend.
inline std::pair<Eigen::VectorXd, Eigen::MatrixXd> weighted_symmetric_eig(const Eigen::MatrixXd& A,
                                                                          const Eigen::VectorXd& w) {
    const Eigen::VectorXd ws = w.cwiseSqrt();
    Eigen::MatrixXd M = ws.asDiagonal() * A * ws.cwiseInverse().asDiagonal();
    const double scale = std::max(1.0, M.size() ? M.cwiseAbs().maxCoeff() : 0.0);
    if (M.size() && (M - M.transpose()).cwiseAbs().maxCoeff() > 1e-8 * scale)
        throw ArgumentError("eigendecompose: operator is not self-adjoint under the given weights");
    M = 0.5 * (M + M.transpose().eval());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(M);
    if (solver.info() != Eigen::Success) throw NumericError("eigendecompose: eigensolver failed");
    return {solver.eigenvalues(), ws.cwiseInverse().asDiagonal() * solver.eigenvectors()};
}

}  // namespace detail

/// Full eigendecomposition of an operator that is self-adjoint under W.
/// Eigenvalues ascend (ties keep their block/index order); each eigenvector
/// is signed so its largest-magnitude entry is positive (ties resolved at
/// the lowest index). The block-diagonal super Laplacian is decomposed one
/// dimension at a time, so its eigenvectors are supported on exactly one
/// cell dimension and downstream kernels get exactly-zero cross blocks.
inline SpectralBasis eigendecompose(const OperatorMatrix& A, const WeightSet& W) {
    if (!(A.domain == A.codomain)) throw ArgumentError("eigendecompose: operator is not square on one space");
    W.validate();
    const Eigen::VectorXd w = W.concat(A.domain);

    SpectralBasis basis;
    basis.weight = w;
    basis.source = role_name(A.role, A.k);
    basis.space = A.domain;

    if (A.role == OperatorRole::super_laplacian && A.domain.dims.size() > 1) {
        struct Entry {
            double value;
            std::size_t block;
            Index local;
        };
        std::vector<Entry> order;
        std::vector<Eigen::MatrixXd> block_vectors(A.domain.dims.size());
        for (std::size_t b = 0; b < A.domain.dims.size(); ++b) {
            const Index s = A.domain.starts[b], c = A.domain.counts[b];
            auto [vals, vecs] = detail::weighted_symmetric_eig(A.mat.block(s, s, c, c), w.segment(s, c));
            block_vectors[b] = std::move(vecs);
            for (Index i = 0; i < c; ++i) order.push_back({vals(i), b, i});
        }
        std::stable_sort(order.begin(), order.end(), [](const Entry& a, const Entry& b) { return a.value < b.value; });
        basis.eigenvalues.resize(A.domain.total);
        basis.vectors = Eigen::MatrixXd::Zero(A.domain.total, A.domain.total);
        for (std::size_t j = 0; j < order.size(); ++j) {
            basis.eigenvalues(static_cast<Index>(j)) = order[j].value;
            basis.vectors.block(A.domain.starts[order[j].block], static_cast<Index>(j), A.domain.counts[order[j].block], 1) =
                block_vectors[order[j].block].col(order[j].local);
        }
    } else {
        auto [vals, vecs] = detail::weighted_symmetric_eig(A.mat, w);
        basis.eigenvalues = std::move(vals);
        basis.vectors = std::move(vecs);
    }

    for (Index j = 0; j < basis.vectors.cols(); ++j) {
        auto col = basis.vectors.col(j);
        Index arg = 0;
        double best = -1.0;
        for (Index i = 0; i < col.size(); ++i)
            if (std::abs(col(i)) > best) {
                best = std::abs(col(i));
                arg = i;
            }
        if (col(arg) < 0.0) basis.vectors.col(j) = -col;
    }

    const double amax = std::max(1.0, A.mat.size() ? A.mat.cwiseAbs().maxCoeff() : 0.0);
    const double residual =
        A.mat.size() ? (A.mat * basis.vectors - basis.vectors * basis.eigenvalues.asDiagonal()).cwiseAbs().maxCoeff() : 0.0;
    if (residual > 1e-8 * amax) throw NumericError("eigendecompose: residual too large");
    if (basis.vectors.size() && basis.orthonormality_error() > 1e-8)
        throw NumericError("eigendecompose: basis not W-orthonormal");
    return basis;
}

}  // namespace cellgp
