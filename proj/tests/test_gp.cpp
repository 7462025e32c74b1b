#include <catch2/catch.hpp>

#include "cellgp/complex.hpp"
#include "cellgp/gp.hpp"
#include "cellgp/kernels.hpp"
#include "cellgp/operators.hpp"

using namespace cellgp;

namespace {

KernelMatrix unit_kernel_1x1(double variance) {
    KernelMatrix km;
    km.K = Eigen::MatrixXd::Constant(1, 1, variance);
    km.factor = Eigen::MatrixXd::Constant(1, 1, std::sqrt(variance));
    km.filter = Eigen::VectorXd::Constant(1, variance);
    km.family = "filter";
    km.space = IndexSpace::single(0, 1);
    return km;
}

/// 6-cell 1-complex (4 vertices, 2 edges) with a random positive spectral
/// filter over its Dirac basis.
KernelMatrix random_six_cell_kernel(std::uint64_t seed) {
    ComplexBuilder b(1);
    b.add_vertices(4);
    b.add_simplex({0, 1});
    b.add_simplex({2, 3});
    CellularComplex X = b.build();
    WeightSet W = WeightSet::unit(X);
    SpectralBasis bd = eigendecompose(dirac_matrix(X, W), W);
    Rng rng(seed);
    Eigen::VectorXd phi(bd.size());
    for (Index i = 0; i < phi.size(); ++i) phi(i) = 0.2 + rng.uniform();
    return spectral_filter_kernel(bd, phi, 1.0);
}

/// Conditional of the zero-mean joint Gaussian over (observed, test) via the
/// precision matrix: an algebraically different route from the posterior
/// formula under test.
std::pair<Eigen::VectorXd, Eigen::MatrixXd> precision_route_conditional(const KernelMatrix& km,
                                                                        const std::vector<Observation>& obs,
                                                                        double noise_var,
                                                                        const std::vector<Target>& test) {
    const Index m = static_cast<Index>(obs.size());
    const Index t = static_cast<Index>(test.size());
    Eigen::MatrixXd T(m, km.size()), S(t, km.size());
    Eigen::VectorXd y(m);
    for (Index i = 0; i < m; ++i) {
        T.row(i) = obs[static_cast<std::size_t>(i)].target.row(km.size());
        y(i) = obs[static_cast<std::size_t>(i)].value;
    }
    for (Index i = 0; i < t; ++i) S.row(i) = test[static_cast<std::size_t>(i)].row(km.size());
    Eigen::MatrixXd J(m + t, m + t);
    J.topLeftCorner(m, m) = T * km.K * T.transpose() + noise_var * Eigen::MatrixXd::Identity(m, m);
    J.topRightCorner(m, t) = T * km.K * S.transpose();
    J.bottomLeftCorner(t, m) = S * km.K * T.transpose();
    J.bottomRightCorner(t, t) = S * km.K * S.transpose();
    Eigen::MatrixXd P = J.inverse();
    Eigen::MatrixXd cov = P.bottomRightCorner(t, t).inverse();
    Eigen::VectorXd mean = -cov * P.bottomLeftCorner(t, m) * y;
    return {mean, cov};
}

}  // namespace

TEST_CASE("scalar Gaussian conditioning by hand") {
    KernelMatrix km = unit_kernel_1x1(1.0);
    std::vector<Observation> obs{{Target::cell(km.space, 0, 0), 2.0}};
    std::vector<Target> test{Target::cell(km.space, 0, 0)};
    Posterior post = posterior(km, obs, 1.0, test);
    REQUIRE(post.mean(0) == Approx(1.0).epsilon(1e-12));
    REQUIRE(post.cov(0, 0) == Approx(0.5).epsilon(1e-12));
}

TEST_CASE("posterior interpolates observations as noise vanishes") {
    KernelMatrix km = random_six_cell_kernel(2);
    std::vector<Observation> obs{{Target::cell(km.space, 0, 1), 0.7}, {Target::cell(km.space, 1, 0), -0.4}};
    std::vector<Target> test{Target::cell(km.space, 0, 1), Target::cell(km.space, 1, 0)};
    Posterior post = posterior(km, obs, 1e-12, test);
    REQUIRE(post.mean(0) == Approx(0.7).margin(1e-6));
    REQUIRE(post.mean(1) == Approx(-0.4).margin(1e-6));
}

TEST_CASE("posterior matches the precision-route conditional on random instances") {
    Rng rng(31);
    for (int instance = 0; instance < 10; ++instance) {
        KernelMatrix km = random_six_cell_kernel(100 + static_cast<std::uint64_t>(instance));
        std::vector<Observation> obs;
        for (Index cell : {0, 2, 3}) obs.push_back({Target::cell(km.space, 0, cell), rng.normal()});
        std::vector<Target> test{Target::cell(km.space, 0, 1), Target::cell(km.space, 1, 0), Target::cell(km.space, 1, 1)};
        const double noise = 0.05 + 0.2 * rng.uniform();

        Posterior post = posterior(km, obs, noise, test);
        auto [mean, cov] = precision_route_conditional(km, obs, noise, test);
        REQUIRE((post.mean - mean).cwiseAbs().maxCoeff() <= 1e-10);
        REQUIRE((post.cov - cov).cwiseAbs().maxCoeff() <= 1e-10);
    }
}

TEST_CASE("empty observation set returns the prior") {
    KernelMatrix km = random_six_cell_kernel(77);
    std::vector<Target> test{Target::cell(km.space, 0, 0), Target::cell(km.space, 0, 1)};
    Posterior post = posterior(km, {}, 0.1, test);
    REQUIRE(post.mean.cwiseAbs().maxCoeff() == 0.0);
    REQUIRE(post.cov(0, 0) == Approx(km.K(0, 0)));
    REQUIRE_THROWS_AS(posterior(km, {}, 0.0, test), ArgumentError);
}

TEST_CASE("posterior variance never exceeds the prior and shrinks with data") {
    KernelMatrix km = random_six_cell_kernel(8);
    std::vector<Target> test;
    for (Index i = 0; i < 4; ++i) test.push_back(Target::cell(km.space, 0, i));
    std::vector<Observation> obs{{Target::cell(km.space, 0, 0), 0.3}};
    Posterior p1 = posterior(km, obs, 0.1, test);
    for (Index i = 0; i < 4; ++i) REQUIRE(p1.cov(i, i) <= km.K(i, i) + 1e-10);

    obs.push_back({Target::cell(km.space, 1, 1), -0.2});
    Posterior p2 = posterior(km, obs, 0.1, test);
    for (Index i = 0; i < 4; ++i) REQUIRE(p2.cov(i, i) <= p1.cov(i, i) + 1e-10);
}

TEST_CASE("direct-sum chain targets span several dimensions") {
    KernelMatrix km = random_six_cell_kernel(41);
    Eigen::VectorXi coeffs = Eigen::VectorXi::Zero(km.size());
    coeffs(0) = 1;   // a vertex ...
    coeffs(4) = -2;  // ... and an edge
    Target t = Target::direct_sum_chain(km.space, coeffs);
    REQUIRE(t.dim == -1);
    std::vector<Observation> obs{{Target::cell(km.space, 0, 1), 1.0}};
    Posterior post = posterior(km, obs, 0.1, {t, Target::cell(km.space, 0, 0), Target::cell(km.space, 1, 0)});
    REQUIRE(post.mean(0) == Approx(post.mean(1) - 2.0 * post.mean(2)).margin(1e-12));
    REQUIRE_THROWS_AS(Target::direct_sum_chain(km.space, Eigen::VectorXi::Zero(2)), ArgumentError);
}

TEST_CASE("chain-target predictions are additive with zero prior mean") {
    KernelMatrix km = random_six_cell_kernel(9);
    std::vector<Observation> obs{{Target::cell(km.space, 0, 0), 1.0}, {Target::cell(km.space, 1, 0), 0.5}};

    ChainVec c{0, (Eigen::VectorXi(4) << 0, 1, 0, -1).finished()};
    ChainVec d{0, (Eigen::VectorXi(4) << 1, 0, 2, 0).finished()};
    ChainVec cd{0, c.coeffs + d.coeffs};
    std::vector<Target> test{Target::chain(km.space, c), Target::chain(km.space, d), Target::chain(km.space, cd)};
    Posterior post = posterior(km, obs, 0.1, test);
    REQUIRE(post.mean(2) == Approx(post.mean(0) + post.mean(1)).margin(1e-12));
}

TEST_CASE("unit-variance scalar NLL is half log 2 pi") {
    KernelMatrix km = unit_kernel_1x1(0.5);
    std::vector<Observation> obs{{Target::cell(km.space, 0, 0), 0.0}};
    REQUIRE(nll(km, obs, 0.5) == Approx(0.9189385332046727).epsilon(1e-12));
}

TEST_CASE("NLL grows with the residual magnitude") {
    KernelMatrix km = unit_kernel_1x1(1.0);
    double prev = -1.0;
    for (double y : {0.0, 0.5, 1.0, 2.0, 4.0}) {
        double value = nll(km, {{Target::cell(km.space, 0, 0), y}}, 0.3);
        REQUIRE(value > prev);
        prev = value;
    }
}

TEST_CASE("NLL equals the direct multivariate normal density") {
    Rng rng(12);
    KernelMatrix km = random_six_cell_kernel(55);
    std::vector<Observation> obs;
    for (Index cell : {0, 1, 3}) obs.push_back({Target::cell(km.space, 0, cell), rng.normal()});
    obs.push_back({Target::cell(km.space, 1, 1), rng.normal()});
    const double noise = 0.2;

    Eigen::MatrixXd T(4, km.size());
    Eigen::VectorXd y(4);
    for (Index i = 0; i < 4; ++i) {
        T.row(i) = obs[static_cast<std::size_t>(i)].target.row(km.size());
        y(i) = obs[static_cast<std::size_t>(i)].value;
    }
    Eigen::MatrixXd A = T * km.K * T.transpose() + noise * Eigen::MatrixXd::Identity(4, 4);
    const double oracle = 0.5 * y.dot(A.inverse() * y) + 0.5 * std::log(A.determinant()) + 2.0 * std::log(2.0 * std::numbers::pi);
    REQUIRE(nll(km, obs, noise) == Approx(oracle).margin(1e-10));
}

TEST_CASE("analytic NLL gradients match central finite differences") {
    CellularComplex X = make_triangulated_grid(2, 2);
    WeightSet W = WeightSet::unit(X);
    SpectralBasis bl = eigendecompose(super_laplacian(X, W), W);
    SpectralBasis bd = eigendecompose(dirac_matrix(X, W), W);
    IndexSpace space = IndexSpace::direct_sum(X);

    Rng rng(4);
    std::vector<Observation> obs;
    for (Index i = 0; i < X.count(0); i += 2) obs.push_back({Target::cell(space, 0, i), rng.normal()});
    for (Index i = 0; i < X.count(1); i += 3) obs.push_back({Target::cell(space, 1, i), rng.normal()});
    const double noise = 0.05;
    const double h = 1e-5;

    SECTION("matern") {
        MaternHyper hy;
        hy.nu = 2.0;
        hy.ell = 1.2;
        hy.sigma2 = 0.8;
        Eigen::VectorXd g = nll_gradient_matern(bl, hy, obs, noise);
        // finite differences through the dense-kernel NLL path
        auto nll_at = [&](double ls2, double lell) {
            MaternHyper p = hy;
            p.sigma2 = std::exp(ls2);
            p.ell = std::exp(lell);
            return nll(matern_kernel(bl, p), obs, noise);
        };
        const double ls2 = std::log(hy.sigma2), lell = std::log(hy.ell);
        Eigen::VectorXd fd(2);
        fd(0) = (nll_at(ls2 + h, lell) - nll_at(ls2 - h, lell)) / (2 * h);
        fd(1) = (nll_at(ls2, lell + h) - nll_at(ls2, lell - h)) / (2 * h);
        for (int p = 0; p < 2; ++p) REQUIRE(std::abs(g(p) - fd(p)) <= 1e-4 * std::max(1.0, std::abs(fd(p))));
    }

    SECTION("reaction-diffusion") {
        RDHyper hy;
        hy.nu = 2.0;
        hy.r = 1.4;
        hy.c = 0.9;
        hy.d = 1.1;
        hy.sigma2 = 1.3;
        Eigen::VectorXd g = nll_gradient_rd(bd, hy, obs, noise);
        auto nll_at = [&](Eigen::Vector4d logp) {
            RDHyper p = hy;
            p.sigma2 = std::exp(logp(0));
            p.r = std::exp(logp(1));
            p.c = std::exp(logp(2));
            p.d = std::exp(logp(3));
            return nll(rd_kernel(bd, p), obs, noise);
        };
        Eigen::Vector4d theta(std::log(hy.sigma2), std::log(hy.r), std::log(hy.c), std::log(hy.d));
        for (int p = 0; p < 4; ++p) {
            Eigen::Vector4d up = theta, dn = theta;
            up(p) += h;
            dn(p) -= h;
            const double fd = (nll_at(up) - nll_at(dn)) / (2 * h);
            REQUIRE(std::abs(g(p) - fd) <= 1e-4 * std::max(1.0, std::abs(fd)));
        }
    }
}

TEST_CASE("fitting descends the training objective") {
    CellularComplex X = make_cubical_grid(9, 9);  // 10x10 vertex graph
    WeightSet W = WeightSet::unit(X);
    SpectralBasis b0 = eigendecompose(hodge_laplacian(X, 0, W), W);

    MaternHyper gen;
    gen.nu = 2.0;
    gen.ell = 1.0;
    gen.sigma2 = 1.0;
    KernelMatrix Kgen = matern_kernel(b0, gen);
    Eigen::VectorXd sample = sample_prior(Kgen, 1, 42).col(0);

    Rng rng(6);
    std::vector<Observation> obs;
    for (Index i = 0; i < X.count(0); i += 3)
        obs.push_back({Target::cell(b0.space, 0, i), sample(i) + 0.1 * rng.normal()});

    MaternHyper init;
    init.nu = 2.0;
    init.ell = 1.5;
    init.sigma2 = 1.5;
    OptimizerConfig cfg;
    cfg.lr = 0.1;
    cfg.iters = 80;
    const double initial = nll(matern_kernel(b0, init), obs, 1e-2);
    GPFit fit = fit_matern(b0, init, obs, 1e-2, cfg);
    REQUIRE(fit.final_nll <= initial + 1e-9);
    REQUIRE(fit.hyper.at("nu") == 2.0);
    REQUIRE(fit.hyper.at("ell") > 0.0);

    // the reported NLL is reproducible from the fitted hyperparameters
    MaternHyper fitted;
    fitted.nu = fit.hyper.at("nu");
    fitted.ell = fit.hyper.at("ell");
    fitted.sigma2 = fit.hyper.at("sigma2");
    REQUIRE(nll(matern_kernel(b0, fitted), obs, 1e-2) == Approx(fit.final_nll).margin(1e-8));
}

TEST_CASE("finite-difference fallback agrees with the closed-form path") {
    CellularComplex X = make_path(6);
    WeightSet W = WeightSet::unit(X);
    SpectralBasis bd = eigendecompose(dirac_matrix(X, W), W);
    Rng rng(14);
    std::vector<Observation> obs;
    for (Index i = 0; i < X.count(0); ++i) obs.push_back({Target::cell(bd.space, 0, i), rng.normal()});

    RDHyper init;
    init.nu = 2.0;
    OptimizerConfig cfg;
    cfg.iters = 25;
    GPFit closed = fit_rd(bd, init, obs, 0.05, cfg);
    cfg.finite_difference = true;
    GPFit fd = fit_rd(bd, init, obs, 0.05, cfg);
    REQUIRE(closed.final_nll == Approx(fd.final_nll).margin(1e-6));
    for (const auto& [name, value] : closed.hyper) REQUIRE(value == Approx(fd.hyper.at(name)).margin(1e-4));
}

TEST_CASE("learned noise stays positive and does not hurt the objective") {
    KernelMatrix km = random_six_cell_kernel(64);
    Rng rng(15);
    std::vector<Observation> obs;
    for (Index i = 0; i < 4; ++i) obs.push_back({Target::cell(km.space, 0, i), rng.normal()});

    ComplexBuilder b(1);
    b.add_vertices(4);
    b.add_simplex({0, 1});
    b.add_simplex({2, 3});
    CellularComplex Y = b.build();
    WeightSet W = WeightSet::unit(Y);
    SpectralBasis bd = eigendecompose(dirac_matrix(Y, W), W);

    OptimizerConfig cfg;
    cfg.iters = 40;
    cfg.learn_noise = true;
    GPFit fit = fit_rd(bd, RDHyper{}, obs, 0.3, cfg);
    REQUIRE(fit.noise_var > 0.0);
    REQUIRE(std::isfinite(fit.final_nll));
}

TEST_CASE("divergent optimization reports the last finite state") {
    CellularComplex X = make_path(4);
    WeightSet W = WeightSet::unit(X);
    SpectralBasis b0 = eigendecompose(hodge_laplacian(X, 0, W), W);
    std::vector<Observation> obs{{Target::cell(b0.space, 0, 0), 1.0}};
    OptimizerConfig cfg;
    cfg.lr = 1e8;  // exp overflow in the log-parameters
    cfg.iters = 40;
    REQUIRE_THROWS_AS(fit_matern(b0, MaternHyper{}, obs, 1e-2, cfg), NumericError);
}

TEST_CASE("relabeling the complex and data leaves predictions unchanged") {
    CellularComplex X = make_triangulated_grid(2, 2);
    WeightSet W = WeightSet::unit(X);
    SpectralBasis bd = eigendecompose(dirac_matrix(X, W), W);
    KernelMatrix K = rd_kernel(bd, RDHyper{});
    IndexSpace space = bd.space;

    Rng rng(18);
    std::vector<std::pair<int, Index>> obs_cells{{0, 0}, {0, 3}, {1, 2}, {1, 7}, {2, 1}};
    std::vector<Observation> obs;
    for (auto [dim, id] : obs_cells) obs.push_back({Target::cell(space, dim, id), rng.normal()});
    std::vector<Target> test{Target::cell(space, 0, 5), Target::cell(space, 1, 0), Target::cell(space, 2, 3)};
    Posterior post = posterior(K, obs, 0.1, test);

    Rng fork(91);
    Relabeling rho = Relabeling::random(X, fork);
    Relabeling inv = rho.inverse();
    CellularComplex Y = relabel(X, rho);
    WeightSet WY = WeightSet::from_complex(Y);
    KernelMatrix KY = rd_kernel(eigendecompose(dirac_matrix(Y, WY), WY), RDHyper{});

    auto mapped = [&](int dim, Index id) { return inv.sigma[static_cast<std::size_t>(dim)][static_cast<std::size_t>(id)]; };
    std::vector<Observation> obsY;
    for (std::size_t i = 0; i < obs_cells.size(); ++i)
        obsY.push_back({Target::cell(space, obs_cells[i].first, mapped(obs_cells[i].first, obs_cells[i].second)), obs[i].value});
    std::vector<Target> testY{Target::cell(space, 0, mapped(0, 5)), Target::cell(space, 1, mapped(1, 0)),
                              Target::cell(space, 2, mapped(2, 3))};
    Posterior postY = posterior(KY, obsY, 0.1, testY);
    REQUIRE((post.mean - postY.mean).cwiseAbs().maxCoeff() <= 1e-9);
}

TEST_CASE("evaluate groups metrics by dimension") {
    Posterior post;
    IndexSpace space = IndexSpace::single(0, 1);
    post.targets = {Target::cell(space, 0, 0)};
    post.mean = Eigen::VectorXd::Constant(1, 3.0);
    post.cov = Eigen::MatrixXd::Constant(1, 1, 0.5);
    Eigen::VectorXd truth = Eigen::VectorXd::Constant(1, 3.0);  // perfect prediction
    auto metrics = evaluate(post, truth, 0.5);                  // predictive variance 1
    REQUIRE(metrics.at(0).mse == Approx(0.0).margin(1e-15));
    REQUIRE(metrics.at(0).nll == Approx(0.9189385332046727).epsilon(1e-12));

    Posterior zero;
    zero.targets = {Target::cell(space, 0, 0)};
    zero.mean = Eigen::VectorXd::Zero(1);
    zero.cov = Eigen::MatrixXd::Constant(1, 1, 1.0);
    REQUIRE(evaluate(zero, Eigen::VectorXd::Zero(1), 0.1).at(0).mse == 0.0);

    REQUIRE_THROWS_AS(evaluate(zero, Eigen::VectorXd::Zero(2), 0.1), ArgumentError);
}
