#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include <cmath>
#include <map>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "cellgp/common.hpp"
#include "cellgp/kernels.hpp"
#include "cellgp/operators.hpp"

namespace cellgp {

// ---------------------------------------------------------------------------
// Observation targets: a single cell or a general chain, expressed as sparse
// coefficients over a kernel's flat index space. Evaluating the GP on a chain
// is the discrete analogue of observing an integral of the field.
// ---------------------------------------------------------------------------

struct Target {
    int dim = -1;  // -1 when the chain mixes several dimensions
    std::vector<std::pair<Index, double>> entries;

    static Target cell(const IndexSpace& space, int dim, Index id) {
        Target t;
        t.dim = dim;
        t.entries = {{space.flat(dim, id), 1.0}};
        return t;
    }

    static Target chain(const IndexSpace& space, const ChainVec& c) {
        if (!space.contains(c.dim)) throw ArgumentError("chain target: dimension not in kernel index space");
        Target t;
        t.dim = c.dim;
        for (Index i = 0; i < c.coeffs.size(); ++i)
            if (c.coeffs(i) != 0) t.entries.emplace_back(space.flat(c.dim, i), static_cast<double>(c.coeffs(i)));
        return t;
    }

    /// Chain over the whole direct-sum space, given as a concatenated vector.
    static Target direct_sum_chain(const IndexSpace& space, const Eigen::VectorXi& coeffs) {
        if (coeffs.size() != space.total) throw ArgumentError("direct-sum chain: length mismatch");
        Target t;
        for (Index i = 0; i < coeffs.size(); ++i)
            if (coeffs(i) != 0) t.entries.emplace_back(i, static_cast<double>(coeffs(i)));
        return t;
    }

    Eigen::RowVectorXd row(Index n) const {
        Eigen::RowVectorXd r = Eigen::RowVectorXd::Zero(n);
        for (const auto& [i, v] : entries) {
            if (i < 0 || i >= n) throw ArgumentError("target index out of range");
            r(i) += v;
        }
        return r;
    }
};

struct Observation {
    Target target;
    double value = 0.0;
};

struct Posterior {
    Eigen::VectorXd mean;
    Eigen::MatrixXd cov;
    std::vector<Target> targets;
};

namespace detail {

inline Eigen::MatrixXd target_matrix(const std::vector<Target>& targets, Index n) {
    Eigen::MatrixXd T = Eigen::MatrixXd::Zero(static_cast<Index>(targets.size()), n);
    for (std::size_t i = 0; i < targets.size(); ++i) T.row(static_cast<Index>(i)) = targets[i].row(n);
    return T;
}

/// SPD factorization with one retry adding jitter 1e-8 * mean(diag).
inline Eigen::LLT<Eigen::MatrixXd> llt_with_jitter(Eigen::MatrixXd A) {
    Eigen::LLT<Eigen::MatrixXd> llt(A);
    if (llt.info() == Eigen::Success) return llt;
    A.diagonal().array() += 1e-8 * A.diagonal().mean();
    llt.compute(A);
    if (llt.info() == Eigen::Success) return llt;
    throw NumericError("observation covariance is not positive definite, even with jitter");
}

constexpr double log_2pi = 1.8378770664093454836;

}  // namespace detail

/// Exact Gaussian conditioning with zero prior mean (Eqs. of the posterior
/// predictive). Empty observations return the prior at the test targets.
inline Posterior posterior(const KernelMatrix& km, const std::vector<Observation>& obs, double noise_var,
                           const std::vector<Target>& test) {
    if (!(noise_var > 0.0)) throw ArgumentError("posterior: noise variance must be positive");
    const Index n = km.size();
    Eigen::MatrixXd Tt = detail::target_matrix(test, n);
    Eigen::MatrixXd Ktt = Tt * km.K * Tt.transpose();
    Ktt = 0.5 * (Ktt + Ktt.transpose().eval());

    Posterior post;
    post.targets = test;
    if (obs.empty()) {
        post.mean = Eigen::VectorXd::Zero(Tt.rows());
        post.cov = std::move(Ktt);
        return post;
    }

    std::vector<Target> obs_targets;
    obs_targets.reserve(obs.size());
    Eigen::VectorXd y(static_cast<Index>(obs.size()));
    for (std::size_t i = 0; i < obs.size(); ++i) {
        if (!std::isfinite(obs[i].value)) throw ArgumentError("posterior: observation value not finite");
        obs_targets.push_back(obs[i].target);
        y(static_cast<Index>(i)) = obs[i].value;
    }
    Eigen::MatrixXd To = detail::target_matrix(obs_targets, n);
    Eigen::MatrixXd A = To * km.K * To.transpose();
    A = 0.5 * (A + A.transpose().eval());
    A.diagonal().array() += noise_var;
    auto llt = detail::llt_with_jitter(A);

    Eigen::MatrixXd Kto = Tt * km.K * To.transpose();
    post.mean = Kto * llt.solve(y);
    post.cov = Ktt - Kto * llt.solve(Kto.transpose());
    post.cov = 0.5 * (post.cov + post.cov.transpose().eval());

    const double tol = 1e-8 * std::max(1.0, Ktt.diagonal().cwiseAbs().maxCoeff());
    for (Index i = 0; i < post.cov.rows(); ++i) {
        if (post.cov(i, i) < -tol) throw NumericError("posterior variance significantly negative");
        if (post.cov(i, i) < 0.0) post.cov(i, i) = 0.0;
    }
    return post;
}

/// Full Gaussian marginal negative log-likelihood, including the
/// (N/2) log 2pi constant.
inline double nll(const KernelMatrix& km, const std::vector<Observation>& obs, double noise_var) {
    if (!(noise_var > 0.0)) throw ArgumentError("nll: noise variance must be positive");
    if (obs.empty()) return 0.0;
    std::vector<Target> obs_targets;
    Eigen::VectorXd y(static_cast<Index>(obs.size()));
    for (std::size_t i = 0; i < obs.size(); ++i) {
        obs_targets.push_back(obs[i].target);
        y(static_cast<Index>(i)) = obs[i].value;
    }
    Eigen::MatrixXd To = detail::target_matrix(obs_targets, km.size());
    Eigen::MatrixXd A = To * km.K * To.transpose();
    A = 0.5 * (A + A.transpose().eval());
    A.diagonal().array() += noise_var;
    auto llt = detail::llt_with_jitter(A);
    const double logdet = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
    const double quad = y.dot(llt.solve(y));
    return 0.5 * quad + 0.5 * logdet + 0.5 * static_cast<double>(y.size()) * detail::log_2pi;
}

// ---------------------------------------------------------------------------
// Per-cell-dimension prediction metrics
// ---------------------------------------------------------------------------

struct DimMetrics {
    double mse = 0.0;
    double nll = 0.0;  // summed over test cells, not averaged
    Index count = 0;
};

/// MSE of the posterior mean and the summed negative log density of the
/// truth under the univariate marginals N(mu_i, Sigma_ii + noise_var),
/// grouped by cell dimension.
inline std::map<int, DimMetrics> evaluate(const Posterior& post, const Eigen::VectorXd& truth, double noise_var) {
    if (truth.size() != post.mean.size()) throw ArgumentError("evaluate: truth length does not match test targets");
    if (!(noise_var > 0.0)) throw ArgumentError("evaluate: noise variance must be positive");
    std::map<int, DimMetrics> out;
    for (Index i = 0; i < truth.size(); ++i) {
        DimMetrics& m = out[post.targets[static_cast<std::size_t>(i)].dim];
        const double err = post.mean(i) - truth(i);
        const double var = std::max(post.cov(i, i), 0.0) + noise_var;
        m.mse += err * err;
        m.nll += 0.5 * (err * err / var + std::log(2.0 * std::numbers::pi * var));
        m.count += 1;
    }
    for (auto& [dim, m] : out) m.mse /= static_cast<double>(m.count);
    return out;
}

// ---------------------------------------------------------------------------
// Hyperparameter fitting: Adam on log-transformed positive hyperparameters,
// with the NLL and its gradient computed through the spectral filter. The
// basis is fixed, so each iteration only reweights eigenvalue contributions.
// ---------------------------------------------------------------------------

struct OptimizerConfig {
    double lr = 0.1;
    int iters = 1000;
    std::uint64_t seed = 0;
    bool learn_noise = false;
    bool finite_difference = false;  // fallback gradients instead of closed form
};

struct GPFit {
    std::string family;
    std::map<std::string, double> hyper;
    double noise_var = 0.0;
    std::vector<Observation> obs;
    double final_nll = 0.0;
    int iterations = 0;
    Eigen::LLT<Eigen::MatrixXd> chol;  // of K_ff + noise I at the fitted hypers
    std::string basis_hash;
};

namespace detail {

struct MaternFilterModel {
    double nu;
    Eigen::VectorXd mu;  // Laplacian-type eigenvalues
    static constexpr int n_params = 2;
    static const char* name(int p) { return p == 0 ? "sigma2" : "ell"; }

    Eigen::VectorXd filter(const Eigen::VectorXd& theta) const {
        const double sigma2 = std::exp(theta(0));
        const double ell = std::exp(theta(1));
        const double a = 2.0 * nu / (ell * ell);
        return sigma2 * (mu.array() + a).pow(-nu);
    }

    Eigen::MatrixXd dfilter(const Eigen::VectorXd& theta) const {
        const double sigma2 = std::exp(theta(0));
        const double ell = std::exp(theta(1));
        const double a = 2.0 * nu / (ell * ell);
        Eigen::ArrayXd body = (mu.array() + a).pow(-nu);
        Eigen::MatrixXd d(mu.size(), n_params);
        d.col(0) = sigma2 * body;
        d.col(1) = sigma2 * 2.0 * nu * a * (mu.array() + a).pow(-nu - 1.0);
        return d;
    }
};

struct RDFilterModel {
    double nu;
    Eigen::VectorXd lambda;  // signed Dirac eigenvalues
    static constexpr int n_params = 4;
    static const char* name(int p) {
        constexpr const char* names[] = {"sigma2", "r", "c", "d"};
        return names[p];
    }

    Eigen::VectorXd filter(const Eigen::VectorXd& theta) const {
        const double sigma2 = std::exp(theta(0));
        const double r = std::exp(theta(1));
        const double c = std::exp(theta(2));
        const double d = std::exp(theta(3));
        Eigen::ArrayXd base = r - c * lambda.array() + d * lambda.array().square();
        Eigen::VectorXd phi(lambda.size());
        const bool integral = detail::is_integer(nu);
        const long long e = integral ? std::llround(nu) : 0;
        for (Index i = 0; i < phi.size(); ++i)
            phi(i) = sigma2 * (integral ? detail::ipow(base(i), -e) : std::pow(base(i), -nu));
        return phi;
    }

    Eigen::MatrixXd dfilter(const Eigen::VectorXd& theta) const {
        const double r = std::exp(theta(1));
        const double c = std::exp(theta(2));
        const double d = std::exp(theta(3));
        Eigen::ArrayXd base = r - c * lambda.array() + d * lambda.array().square();
        Eigen::VectorXd phi = filter(theta);
        Eigen::ArrayXd inner = phi.array() / base;  // sigma2 * base^(-nu-1)
        Eigen::MatrixXd g(lambda.size(), n_params);
        g.col(0) = phi;
        g.col(1) = -nu * r * inner;
        g.col(2) = nu * c * (lambda.array() * inner);
        g.col(3) = -nu * d * (lambda.array().square() * inner);
        return g;
    }
};

/// Marginal NLL of y under A = V diag(phi) V^T + sn2 I, with gradients in
/// the filter values: dNLL/dphi_j = 1/2 (v_j^T A^-1 v_j - (v_j^T alpha)^2).
template <class Model>
class SpectralObjective {
  public:
    SpectralObjective(Eigen::MatrixXd V, Eigen::VectorXd y, double noise_var, const Model& model, bool learn_noise)
        : V_(std::move(V)), y_(std::move(y)), noise_var_(noise_var), model_(model), learn_noise_(learn_noise) {}

    int dim() const { return Model::n_params + (learn_noise_ ? 1 : 0); }

    double operator()(const Eigen::VectorXd& theta, Eigen::VectorXd* grad) const {
        const Index m = V_.rows();
        Eigen::VectorXd phi = model_.filter(theta.head(Model::n_params));
        const double sn2 = learn_noise_ ? std::exp(theta(Model::n_params)) : noise_var_;
        if (!phi.allFinite() || (phi.array() <= 0.0).any() || !std::isfinite(sn2))
            return std::numeric_limits<double>::quiet_NaN();

        Eigen::MatrixXd X = V_ * phi.cwiseSqrt().asDiagonal();
        Eigen::MatrixXd A = Eigen::MatrixXd::Zero(m, m);
        A.template selfadjointView<Eigen::Lower>().rankUpdate(X);
        A.diagonal().array() += sn2;
        Eigen::LLT<Eigen::MatrixXd> llt(A);
        if (llt.info() != Eigen::Success) return std::numeric_limits<double>::quiet_NaN();

        Eigen::VectorXd alpha = llt.solve(y_);
        const double logdet = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
        const double value = 0.5 * y_.dot(alpha) + 0.5 * logdet + 0.5 * static_cast<double>(m) * log_2pi;

        if (grad) {
            Eigen::MatrixXd Y = llt.matrixL().solve(V_);
            Eigen::VectorXd q = Y.colwise().squaredNorm().transpose();  // v_j^T A^-1 v_j
            Eigen::VectorXd p = V_.transpose() * alpha;               // v_j^T alpha
            Eigen::VectorXd s = 0.5 * (q.array() - p.array().square()).matrix();
            Eigen::MatrixXd dphi = model_.dfilter(theta.head(Model::n_params));
            grad->head(Model::n_params) = dphi.transpose() * s;
            if (learn_noise_) {
                Eigen::MatrixXd Linv = llt.matrixL().solve(Eigen::MatrixXd::Identity(m, m));
                (*grad)(Model::n_params) = 0.5 * sn2 * (Linv.squaredNorm() - alpha.squaredNorm());
            }
        }
        return value;
    }

  private:
    Eigen::MatrixXd V_;
    Eigen::VectorXd y_;
    double noise_var_;
    const Model& model_;
    bool learn_noise_;
};

template <class Objective>
Eigen::VectorXd fd_gradient(const Objective& f, const Eigen::VectorXd& theta, double h = 1e-5) {
    Eigen::VectorXd g(theta.size());
    for (Index i = 0; i < theta.size(); ++i) {
        Eigen::VectorXd up = theta, dn = theta;
        up(i) += h;
        dn(i) -= h;
        g(i) = (f(up, nullptr) - f(dn, nullptr)) / (2.0 * h);
    }
    return g;
}

struct AdamResult {
    Eigen::VectorXd theta;
    double nll = 0.0;
    int iterations = 0;
};

/// Adam with the usual defaults (beta 0.9/0.999, eps 1e-8). Returns the best
/// iterate visited, so the fitted NLL never exceeds the initial one.
template <class Objective>
AdamResult adam_minimize(const Objective& f, Eigen::VectorXd theta, const OptimizerConfig& cfg) {
    const double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    Eigen::VectorXd m = Eigen::VectorXd::Zero(theta.size());
    Eigen::VectorXd v = Eigen::VectorXd::Zero(theta.size());
    Eigen::VectorXd grad(theta.size());

    AdamResult best;
    best.theta = theta;
    best.nll = std::numeric_limits<double>::infinity();

    double last_finite = std::numeric_limits<double>::quiet_NaN();
    Eigen::VectorXd last_theta = theta;
    for (int t = 0; t < cfg.iters; ++t) {
        double value;
        if (cfg.finite_difference) {
            value = f(theta, nullptr);
            grad = fd_gradient(f, theta);
        } else {
            value = f(theta, &grad);
        }
        if (!std::isfinite(value)) {
            std::ostringstream state;
            state << "optimization diverged at iteration " << t << "; last finite NLL " << last_finite
                  << " at log-parameters [";
            for (Index i = 0; i < last_theta.size(); ++i) state << (i ? ", " : "") << last_theta(i);
            state << "]";
            throw NumericError(state.str());
        }
        last_finite = value;
        last_theta = theta;
        if (value < best.nll) {
            best.nll = value;
            best.theta = theta;
        }
        const double c1 = 1.0 - std::pow(beta1, t + 1);
        const double c2 = 1.0 - std::pow(beta2, t + 1);
        m = beta1 * m + (1.0 - beta1) * grad;
        v = beta2 * v + (1.0 - beta2) * grad.array().square().matrix();
        theta.array() -= cfg.lr * (m.array() / c1) / ((v.array() / c2).sqrt() + eps);
        best.iterations = t + 1;
    }
    const double final_value = f(theta, nullptr);
    if (std::isfinite(final_value) && final_value < best.nll) {
        best.nll = final_value;
        best.theta = theta;
    }
    return best;
}

inline std::pair<Eigen::MatrixXd, Eigen::VectorXd> split_observations(const SpectralBasis& basis,
                                                                      const std::vector<Observation>& obs) {
    if (obs.empty()) throw ArgumentError("fit: need at least one observation");
    std::vector<Target> targets;
    Eigen::VectorXd y(static_cast<Index>(obs.size()));
    for (std::size_t i = 0; i < obs.size(); ++i) {
        targets.push_back(obs[i].target);
        y(static_cast<Index>(i)) = obs[i].value;
    }
    Eigen::MatrixXd T = target_matrix(targets, basis.size());
    return {T * basis.vectors, std::move(y)};
}

template <class Model>
GPFit run_fit(const SpectralBasis& basis, const Model& model, Eigen::VectorXd theta0, const std::vector<Observation>& obs,
              double noise_var, const OptimizerConfig& cfg, const std::string& family) {
    if (!(noise_var > 0.0)) throw ArgumentError("fit: noise variance must be positive");
    auto [V, y] = split_observations(basis, obs);
    SpectralObjective<Model> objective(V, y, noise_var, model, cfg.learn_noise);

    Eigen::VectorXd theta(objective.dim());
    theta.head(Model::n_params) = theta0;
    if (cfg.learn_noise) theta(Model::n_params) = std::log(noise_var);

    AdamResult res = adam_minimize(objective, theta, cfg);

    GPFit fit;
    fit.family = family;
    for (int p = 0; p < Model::n_params; ++p) fit.hyper[Model::name(p)] = std::exp(res.theta(p));
    fit.hyper["nu"] = model.nu;
    fit.noise_var = cfg.learn_noise ? std::exp(res.theta(Model::n_params)) : noise_var;
    fit.obs = obs;
    fit.final_nll = res.nll;
    fit.iterations = res.iterations;
    fit.basis_hash = basis.complex_hash;

    Eigen::VectorXd phi = model.filter(res.theta.head(Model::n_params));
    Eigen::MatrixXd X = V * phi.cwiseSqrt().asDiagonal();
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(V.rows(), V.rows());
    A.selfadjointView<Eigen::Lower>().rankUpdate(X);
    A.diagonal().array() += fit.noise_var;
    fit.chol.compute(A);
    if (fit.chol.info() != Eigen::Success) throw NumericError("fit: final system not positive definite");
    return fit;
}

}  // namespace detail

/// Gradient of the marginal NLL w.r.t. the log hyperparameters, by closed
/// form through the spectral filter. Exposed for verification against
/// finite differences.
inline Eigen::VectorXd nll_gradient_matern(const SpectralBasis& basis, const MaternHyper& h,
                                           const std::vector<Observation>& obs, double noise_var) {
    detail::MaternFilterModel model{h.nu, laplacian_spectrum(basis)};
    auto [V, y] = detail::split_observations(basis, obs);
    detail::SpectralObjective<detail::MaternFilterModel> obj(V, y, noise_var, model, false);
    Eigen::VectorXd theta(2);
    theta << std::log(h.sigma2), std::log(h.ell);
    Eigen::VectorXd g(2);
    if (!std::isfinite(obj(theta, &g))) throw NumericError("nll gradient: objective not finite");
    return g;
}

inline Eigen::VectorXd nll_gradient_rd(const SpectralBasis& basis, const RDHyper& h, const std::vector<Observation>& obs,
                                       double noise_var) {
    detail::RDFilterModel model{h.nu, basis.eigenvalues};
    auto [V, y] = detail::split_observations(basis, obs);
    detail::SpectralObjective<detail::RDFilterModel> obj(V, y, noise_var, model, false);
    Eigen::VectorXd theta(4);
    theta << std::log(h.sigma2), std::log(h.r), std::log(h.c), std::log(h.d);
    Eigen::VectorXd g(4);
    if (!std::isfinite(obj(theta, &g))) throw NumericError("nll gradient: objective not finite");
    return g;
}

/// Fit sigma2 and ell of a CC-Matérn GP (nu held fixed) by Adam on the
/// marginal NLL. The eigendecomposition is done once by the caller; only
/// filter values change during training.
inline GPFit fit_matern(const SpectralBasis& basis, const MaternHyper& init, const std::vector<Observation>& obs,
                        double noise_var, const OptimizerConfig& cfg = {}) {
    init.validate();
    detail::MaternFilterModel model{init.nu, laplacian_spectrum(basis)};
    Eigen::VectorXd theta0(2);
    theta0 << std::log(init.sigma2), std::log(init.ell);
    return detail::run_fit(basis, model, theta0, obs, noise_var, cfg, "matern");
}

/// Fit sigma2, r, c, d of a reaction-diffusion GP (nu held fixed; Dirac basis).
inline GPFit fit_rd(const SpectralBasis& basis, const RDHyper& init, const std::vector<Observation>& obs, double noise_var,
                    const OptimizerConfig& cfg = {}) {
    init.validate();
    if (basis.source != "dirac") throw ArgumentError("fit_rd needs a Dirac basis");
    detail::RDFilterModel model{init.nu, basis.eigenvalues};
    Eigen::VectorXd theta0(4);
    theta0 << std::log(init.sigma2), std::log(init.r), std::log(init.c), std::log(init.d);
    return detail::run_fit(basis, model, theta0, obs, noise_var, cfg, "rd");
}

/// Kernel matrix at a fit's hyperparameters.
inline KernelMatrix kernel_from_fit(const SpectralBasis& basis, const GPFit& fit) {
    if (fit.family == "matern") {
        MaternHyper h{fit.hyper.at("nu"), fit.hyper.at("ell"), fit.hyper.at("sigma2")};
        return matern_kernel(basis, h);
    }
    if (fit.family == "rd") {
        RDHyper h;
        h.r = fit.hyper.at("r");
        h.c = fit.hyper.at("c");
        h.d = fit.hyper.at("d");
        h.nu = fit.hyper.at("nu");
        h.sigma2 = fit.hyper.at("sigma2");
        return rd_kernel(basis, h);
    }
    throw ArgumentError("unknown kernel family: " + fit.family);
}

}  // namespace cellgp
