#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <map>
#include <string>

#include "cellgp/common.hpp"
#include "cellgp/operators.hpp"

namespace cellgp {

struct MaternHyper {
    double nu = 2.0;      // smoothness
    double ell = 1.0;     // lengthscale
    double sigma2 = 1.0;  // amplitude

    void validate() const {
        if (!(nu > 0.0) || !std::isfinite(nu)) throw ArgumentError("matern: nu must be positive and finite");
        if (!(ell > 0.0) || !std::isfinite(ell)) throw ArgumentError("matern: lengthscale must be positive and finite");
        if (!(sigma2 > 0.0) || !std::isfinite(sigma2)) throw ArgumentError("matern: amplitude must be positive and finite");
    }
};

struct RDHyper {
    double r = 1.0;  // reaction
    double c = 1.0;  // cross-diffusion (couples adjacent cell dimensions)
    double d = 1.0;  // diffusion
    double nu = 2.0;
    double sigma2 = 1.0;
    bool allow_uneven_nu = false;  // expert flag; requires a positive filtered spectrum

    void validate() const {
        if (r < 0.0 || c < 0.0 || d < 0.0 || !std::isfinite(r + c + d))
            throw ArgumentError("rd: reaction/cross-diffusion/diffusion coefficients must be nonnegative");
        if (!(nu > 0.0) || !std::isfinite(nu)) throw ArgumentError("rd: nu must be positive and finite");
        if (!(sigma2 > 0.0) || !std::isfinite(sigma2)) throw ArgumentError("rd: amplitude must be positive and finite");
        if (!allow_uneven_nu && !is_even_integer(nu))
            throw ArgumentError("rd: nu must be an even positive integer (or set allow_uneven_nu after a positivity check)");
    }

    static bool is_even_integer(double nu) {
        double half = nu / 2.0;
        return std::abs(half - std::round(half)) < 1e-12 && nu > 0.0;
    }
};

struct KernelMatrix {
    Eigen::MatrixXd K;
    Eigen::MatrixXd factor;        // K = factor * factor^T; also the sampling map
    Eigen::VectorXd filter;        // per-eigenvalue variances sigma2 * phi_i
    std::string family;            // "matern" | "rd" | "filter"
    std::map<std::string, double> params;
    std::string basis_source;
    std::string basis_hash;
    IndexSpace space;

    Index size() const { return K.rows(); }
};

namespace detail {

inline double ipow(double base, long long e) {
    if (e < 0) return 1.0 / ipow(base, -e);
    double out = 1.0;
    double b = base;
    while (e > 0) {
        if (e & 1) out *= b;
        b *= b;
        e >>= 1;
    }
    return out;
}

inline bool is_integer(double x) { return std::abs(x - std::round(x)) < 1e-12; }

}  // namespace detail

/// Laplacian-type spectrum of a basis: Hodge/super eigenvalues clamped at
/// zero when within -1e-10 of it, Dirac eigenvalues squared.
inline Eigen::VectorXd laplacian_spectrum(const SpectralBasis& basis) {
    if (basis.source == "dirac") return basis.eigenvalues.array().square();
    const double scale = std::max(1.0, basis.eigenvalues.cwiseAbs().maxCoeff());
    Eigen::VectorXd mu = basis.eigenvalues;
    for (Index i = 0; i < mu.size(); ++i) {
        if (mu(i) < -1e-10 * scale)
            throw ArgumentError("basis has a significantly negative eigenvalue; not a Laplacian spectrum");
        if (mu(i) < 0.0) mu(i) = 0.0;
    }
    return mu;
}

/// K = sigma2 * U diag(phi) U^T, assembled as a symmetric rank update so the
/// result is exactly symmetric and PSD by construction.
inline KernelMatrix spectral_filter_kernel(const SpectralBasis& basis, const Eigen::VectorXd& phi, double sigma2) {
    if (phi.size() != basis.size()) throw ArgumentError("spectral filter length does not match the spectrum");
    if (!(sigma2 > 0.0) || !std::isfinite(sigma2)) throw ArgumentError("amplitude must be positive and finite");
    for (Index i = 0; i < phi.size(); ++i)
        if (!(phi(i) > 0.0) || !std::isfinite(phi(i)))
            throw ArgumentError("indefinite spectral filter: nonpositive value at eigenvalue index " + std::to_string(i));

    KernelMatrix km;
    km.filter = sigma2 * phi;
    km.factor = basis.vectors * km.filter.cwiseSqrt().asDiagonal();
    km.K = Eigen::MatrixXd::Zero(basis.size(), basis.size());
    km.K.selfadjointView<Eigen::Lower>().rankUpdate(km.factor);
    km.K.triangularView<Eigen::StrictlyUpper>() = km.K.transpose();
    km.family = "filter";
    km.basis_source = basis.source;
    km.basis_hash = basis.complex_hash;
    km.space = basis.space;
    return km;
}

inline Eigen::VectorXd matern_filter_values(const Eigen::VectorXd& laplacian_eigs, const MaternHyper& h) {
    const double a = 2.0 * h.nu / (h.ell * h.ell);
    return (laplacian_eigs.array() + a).pow(-h.nu).matrix();
}

/// CC-Matérn kernel sigma2 * U (2 nu / ell^2 I + Lambda^2)^(-nu) U^T on a
/// Hodge or super-Laplacian basis (a Dirac basis works too; its eigenvalues
/// are squared).
inline KernelMatrix matern_kernel(const SpectralBasis& basis, const MaternHyper& h) {
    h.validate();
    KernelMatrix km = spectral_filter_kernel(basis, matern_filter_values(laplacian_spectrum(basis), h), h.sigma2);
    km.family = "matern";
    km.params = {{"nu", h.nu}, {"ell", h.ell}, {"sigma2", h.sigma2}};
    return km;
}

inline Eigen::VectorXd rd_filter_base(const Eigen::VectorXd& dirac_eigs, const RDHyper& h) {
    return (h.r - h.c * dirac_eigs.array() + h.d * dirac_eigs.array().square()).matrix();
}

inline Eigen::VectorXd rd_filter_values(const Eigen::VectorXd& dirac_eigs, const RDHyper& h) {
    Eigen::VectorXd base = rd_filter_base(dirac_eigs, h);
    Eigen::VectorXd phi(base.size());
    for (Index i = 0; i < base.size(); ++i) {
        const double lam = dirac_eigs(i);
        const double guard = 1e-12 * (h.r + h.c * std::abs(lam) + h.d * lam * lam + 1.0);
        if (std::abs(base(i)) < guard)
            throw ArgumentError("degenerate reaction-diffusion hyperparameters: filter vanishes at eigenvalue index " +
                                std::to_string(i));
        phi(i) = detail::is_integer(h.nu) ? detail::ipow(base(i), -static_cast<long long>(std::llround(h.nu)))
                                          : std::pow(base(i), -h.nu);
    }
    return phi;
}

/// Reaction-diffusion kernel sigma2 * U (r I - c Lambda + d Lambda^2)^(-nu) U^T
/// over the signed Dirac spectrum. nu must be even unless the caller has
/// certified a positive filtered spectrum via allow_uneven_nu.
inline KernelMatrix rd_kernel(const SpectralBasis& basis, const RDHyper& h) {
    h.validate();
    if (basis.source != "dirac") throw ArgumentError("rd_kernel needs a Dirac basis (signed eigenvalues)");
    Eigen::VectorXd phi = rd_filter_values(basis.eigenvalues, h);
    if (h.allow_uneven_nu && !RDHyper::is_even_integer(h.nu)) {
        Eigen::VectorXd base = rd_filter_base(basis.eigenvalues, h);
        for (Index i = 0; i < base.size(); ++i)
            if (base(i) <= 0.0)
                throw ArgumentError("rd: uneven nu with a sign-changing filter makes the kernel indefinite (index " +
                                    std::to_string(i) + ")");
    }
    KernelMatrix km = spectral_filter_kernel(basis, phi, h.sigma2);
    km.family = "rd";
    km.params = {{"r", h.r}, {"c", h.c}, {"d", h.d}, {"nu", h.nu}, {"sigma2", h.sigma2}};
    return km;
}

/// kappa(c, d) = c^T K d for integer chains over the kernel's index space.
inline double chain_covariance(const KernelMatrix& km, const Eigen::VectorXi& c, const Eigen::VectorXi& d) {
    if (c.size() != km.size() || d.size() != km.size()) throw ArgumentError("chain_covariance: length mismatch");
    return c.cast<double>().dot(km.K * d.cast<double>());
}

/// Seeded draws f = U diag(sqrt(sigma2 phi)) eps with eps standard normal;
/// one column per sample.
inline Eigen::MatrixXd sample_prior(const KernelMatrix& km, Index count, std::uint64_t seed) {
    if (count < 0) throw ArgumentError("sample_prior: count must be nonnegative");
    Rng rng(seed);
    Eigen::MatrixXd eps(km.factor.cols(), count);
    for (Index j = 0; j < count; ++j)
        for (Index i = 0; i < eps.rows(); ++i) eps(i, j) = rng.normal();
    return km.factor * eps;
}

}  // namespace cellgp
