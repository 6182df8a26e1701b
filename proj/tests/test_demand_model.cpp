#include <cmath>
#include <random>

#include "doctest.h"
#include "pvdb/demand_model.hpp"
#include "pvdb/error.hpp"
#include "support.hpp"

using namespace pvdb;

namespace {

BasisSpec small_spec() {
    BasisSpec s;
    s.price_bases = {{10.0, 5.0}, {20.0, 5.0}};
    s.poly_degrees = {0, 1};
    s.time_origin = 0.0;
    s.time_scale = 200.0;
    s.price_priors = {{0.0, 1.0}, {0.0, 1.0}};
    s.time_priors = {{0.0, 10.0}, {0.0, 10.0}};
    return s;
}

std::vector<WeeklyAggregate> synthetic(const BasisSpec& s, const Eigen::VectorXd& theta, int n, double noise_sd,
                                       std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> price(4.0, 30.0);
    std::normal_distribution<double> eps(0.0, noise_sd);
    std::vector<WeeklyAggregate> out;
    for (int t = 0; t < n; ++t) {
        const double p = price(rng);
        const double v = design_row(s, p, t).dot(theta) + eps(rng);
        out.push_back({t, p, v, 1});
    }
    return out;
}

Eigen::VectorXd truth() {
    Eigen::VectorXd th(4);
    th << 30.0, 50.0, 5.0, -2.0;
    return th;
}

}  // namespace

TEST_SUITE("demand_model") {

TEST_CASE("basis values at their landmarks") {
    const TanhBasis b{7.0, 2.0};
    CHECK(b(7.0) == 0.5);
    CHECK(b(1e6) == doctest::Approx(0.0));
    CHECK(TanhBasis{100.0, 1.0}(1e-9) == doctest::Approx(1.0));
    CHECK(RbfBasis{3.0, 2.0}(3.0) == 1.0);

    auto s = small_spec();
    s.rbf_bases = {{12.0, 3.0}};
    s.time_priors.insert(s.time_priors.begin(), GaussianPrior{0.0, 10.0});
    const auto row = design_row(s, 10.0, 12.0);
    REQUIRE(row.size() == 5);
    CHECK(row[0] == 0.5);
    CHECK(row[2] == 1.0);  // rbf at its centre
    CHECK(row[3] == 1.0);  // degree 0
    CHECK_THROWS_AS(design_row(s, 0.0, 1.0), Error);
    CHECK_THROWS_AS(design_row(s, -1.0, 1.0), Error);
}

TEST_CASE("price bases are strictly decreasing") {
    const TanhBasis b{12.0, 3.0};
    double prev = b(0.5);
    for (double p = 0.6; p < 30.0; p += 0.1) {
        const double v = b(p);
        CHECK(v < prev);
        prev = v;
    }
}

TEST_CASE("basis layout follows the observed range") {
    std::vector<WeeklyAggregate> h;
    for (int t = 0; t < 20; ++t) h.push_back({t + 3, 10.0 + t % 5, 100.0, 1});
    const auto s = make_basis_spec(BasisConfig{}, h, 1.0, 2.0);
    REQUIRE(s.price_bases.size() == 8);
    CHECK(s.price_bases.front().shift == doctest::Approx(5.0));
    CHECK(s.price_bases.back().shift == doctest::Approx(21.0));
    REQUIRE(s.rbf_bases.size() == 4);
    CHECK(s.rbf_bases.front().center == doctest::Approx(3.0));
    CHECK(s.rbf_bases.back().center == doctest::Approx(22.0));
    CHECK(s.poly_degrees == std::vector<int>{0, 1});
    CHECK_NOTHROW(s.validate());
}

TEST_CASE("empty data returns the prior") {
    const auto s = small_spec();
    const auto post = fit_posterior(s, {});
    CHECK(post.latent_mean.isApprox(prior_mean(s)));
    CHECK(post.latent_cov.isApprox(prior_covariance(s)));
    CHECK(post.n_observations == 0);
}

TEST_CASE("gradient and Hessian match finite differences") {
    const auto s = small_spec();
    const auto data = synthetic(s, truth(), 60, 2.0, 1);
    const PosteriorObjective obj(s, data);
    std::mt19937_64 rng(2);
    std::normal_distribution<double> z(0.0, 1.0);
    for (int rep = 0; rep < 20; ++rep) {
        Eigen::VectorXd x(4);
        for (int i = 0; i < 4; ++i) x[i] = z(rng) * (i < 2 ? 1.5 : 5.0);
        const double s2 = 4.0;
        const auto g = obj.gradient(x, s2);
        const auto H = obj.hessian(x, s2);
        Eigen::VectorXd fd(4);
        Eigen::MatrixXd hfd(4, 4);
        for (int i = 0; i < 4; ++i) {
            const double h = 1e-5 * std::max(1.0, std::abs(x[i]));
            Eigen::VectorXd a = x, b = x;
            a[i] += h;
            b[i] -= h;
            fd[i] = (obj.value(a, s2) - obj.value(b, s2)) / (2 * h);
            hfd.col(i) = (obj.gradient(a, s2) - obj.gradient(b, s2)) / (2 * h);
        }
        CHECK((g - fd).norm() / std::max(1.0, g.norm()) < 1e-5);
        CHECK((H - hfd).norm() / std::max(1.0, H.norm()) < 1e-5);
    }
}

TEST_CASE("noiseless data recovers the generating coefficients") {
    const auto s = small_spec();
    const auto data = synthetic(s, truth(), 200, 1e-4, 7);
    const auto post = fit_posterior(s, data);
    const auto th = post.coefficients();
    for (int i = 0; i < 4; ++i) CHECK(std::abs(th[i] - truth()[i]) <= 0.05 * std::abs(truth()[i]));
    CHECK(post.noise_variance < 1e-6 * 10);
}

TEST_CASE("Laplace covariance is symmetric positive definite") {
    const auto s = small_spec();
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        const auto post = fit_posterior(s, synthetic(s, truth(), 30, 3.0, seed));
        CHECK((post.latent_cov - post.latent_cov.transpose()).cwiseAbs().maxCoeff() < 1e-9);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(post.latent_cov);
        CHECK(es.eigenvalues().minCoeff() > 0.0);
    }
}

TEST_CASE("duplicated data shrinks the posterior") {
    auto s = small_spec();
    s.estimate_noise = false;
    s.noise_variance = 9.0;
    const auto one = synthetic(s, truth(), 40, 3.0, 4);
    auto two = one;
    two.insert(two.end(), one.begin(), one.end());
    const auto p1 = fit_posterior(s, one);
    const auto p2 = fit_posterior(s, two);
    CHECK(p2.latent_cov.trace() < p1.latent_cov.trace());
}

TEST_CASE("sampling") {
    const auto s = small_spec();
    const auto post = fit_posterior(s, synthetic(s, truth(), 25, 4.0, 9));

    SUBCASE("same seed, same draw") {
        Rng a(42), b(42);
        CHECK(sample_demand(post, s, a).latent() == sample_demand(post, s, b).latent());
    }
    SUBCASE("zero covariance gives the mean") {
        auto p = post;
        p.latent_cov.setZero();
        Rng r(1);
        CHECK(sample_demand(p, s, r).latent() == p.latent_mean);
    }
    SUBCASE("empirical mean within three standard errors") {
        Rng r(17);
        const int n = 1000;
        Eigen::VectorXd sum = Eigen::VectorXd::Zero(4);
        for (int i = 0; i < n; ++i) {
            const auto d = sample_demand(post, s, r);
            sum += d.latent();
            CHECK((d.coefficients().head(2).array() > 0.0).all());
        }
        const Eigen::VectorXd m = sum / n;
        for (int i = 0; i < 4; ++i)
            CHECK(std::abs(m[i] - post.latent_mean[i]) <= 3.0 * std::sqrt(post.latent_cov(i, i) / n));
    }
}

TEST_CASE("samples are non-increasing in price") {
    std::vector<WeeklyAggregate> h;
    for (int t = 0; t < 30; ++t) h.push_back({t, 10.0 + (t * 7) % 11, 200.0 - 5.0 * ((t * 7) % 11), 1});
    const auto s = make_basis_spec(BasisConfig{}, h, 1, 2);
    const auto post = fit_posterior(s, h);
    Rng r(3);
    std::uniform_real_distribution<double> p(0.5, 40.0), w(0.0, 40.0);
    for (int i = 0; i < 200; ++i) {
        const auto d = sample_demand(post, s, r);
        for (int k = 0; k < 20; ++k) {
            double a = p(r), b = p(r);
            if (a > b) std::swap(a, b);
            const double t = w(r);
            CHECK(d(a, t) >= d(b, t));
        }
    }
}

TEST_CASE("predict_mean is clipped and monotone") {
    auto s = small_spec();
    PosteriorState post;
    post.n_price = 2;
    post.latent_mean = Eigen::VectorXd(4);
    post.latent_mean << std::log(3.0), std::log(4.0), 0.0, 0.0;
    post.latent_cov = Eigen::MatrixXd::Identity(4, 4);
    CHECK(predict_mean(post, s, 10, 5) == predict_mean(post, s, 10, 150));
    CHECK(predict_mean(post, s, 8, 5) >= predict_mean(post, s, 12, 5));
    post.latent_mean[2] = -100.0;
    CHECK(predict_mean(post, s, 10, 5) == 0.0);
    CHECK_THROWS_AS(predict_mean(post, s, 0.0, 5), Error);
}

TEST_CASE("held-out error falls with more rounds") {
    const auto s = small_spec();
    const auto all = synthetic(s, truth(), 260, 3.0, 21);
    const std::vector<WeeklyAggregate> held(all.begin() + 200, all.end());
    double prev = 1e300;
    for (int n : {10, 50, 200}) {
        const auto post = fit_posterior(s, std::span(all).first(static_cast<std::size_t>(n)));
        double se = 0.0;
        for (const auto& a : held) {
            const double e = predict_mean(post, s, a.avg_price, static_cast<double>(a.week_index)) -
                             design_row(s, a.avg_price, static_cast<double>(a.week_index)).dot(truth());
            se += e * e;
        }
        const double rmse = std::sqrt(se / static_cast<double>(held.size()));
        CHECK(rmse < prev * 1.05);
        prev = rmse;
    }
}

TEST_CASE("posterior json round trip") {
    std::vector<WeeklyAggregate> h;
    for (int t = 0; t < 12; ++t) h.push_back({t, 10.0 + t % 4, 80.0 - 3.0 * (t % 4), 2});
    const auto s = make_basis_spec(BasisConfig{}, h, 1, 2);
    const auto post = fit_posterior(s, h);
    const auto text = posterior_to_json(post, s);
    const auto [p2, s2] = posterior_from_json(text);
    CHECK(p2.latent_mean == post.latent_mean);
    CHECK(p2.latent_cov == post.latent_cov);
    CHECK(p2.noise_variance == post.noise_variance);
    CHECK(s2.price_bases.size() == s.price_bases.size());
    CHECK(posterior_to_json(p2, s2) == text);
    CHECK_THROWS_AS(posterior_from_json("{\"format\":\"pvdb-posterior\",\"version\":99}"), Error);
}

}
