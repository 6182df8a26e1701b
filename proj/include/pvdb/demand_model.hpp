#pragma once

// Bayesian linear regression of weekly volume on price and time bases.
//
//   v(p, t) = sum_u theta_u * phi_u(p) + sum_d theta_d * phi_d(t)
//
// Price coefficients are lognormal: the fit works on psi_u = log(theta_u)
// with Gaussian priors, so every draw has theta_u > 0 and, because each
// phi_u is strictly decreasing, every sampled demand curve is non-increasing
// in price.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "pvdb/data_core.hpp"
#include "pvdb/random.hpp"

namespace pvdb {

/// phi(p) = (1 - tanh((p - shift) / scale)) / 2
struct TanhBasis {
    double shift = 0.0;
    double scale = 1.0;
    double operator()(double p) const noexcept;
};

/// phi(t) = exp(-(t - center)^2 / (2 width^2))
struct RbfBasis {
    double center = 0.0;
    double width = 1.0;
    double operator()(double t) const noexcept;
};

struct GaussianPrior {
    double mean = 0.0;
    double variance = 1.0;
};

/// Prior on a price coefficient: log(theta) ~ Normal(location, spread^2).
struct LognormalPrior {
    double location = 0.0;
    double spread = 1.0;
};

struct BasisSpec {
    std::vector<TanhBasis> price_bases;
    std::vector<RbfBasis> rbf_bases;
    /// Polynomial degrees over the normalized week (t - time_origin) / time_scale.
    std::vector<int> poly_degrees;
    double time_origin = 0.0;
    double time_scale = 1.0;
    /// Volumes are fit as total_volume / volume_scale, so the priors and the
    /// noise variance live on that unit-free scale.
    double volume_scale = 1.0;

    std::vector<LognormalPrior> price_priors;  // one per price basis
    std::vector<GaussianPrior> time_priors;    // rbf bases first, then polynomials

    /// Starting value for the noise variance; refined by maximum likelihood
    /// unless estimate_noise is false.
    double noise_variance = 1.0;
    bool estimate_noise = true;
    double noise_floor = 1e-6;

    std::size_t n_price() const noexcept { return price_bases.size(); }
    std::size_t n_time() const noexcept { return rbf_bases.size() + poly_degrees.size(); }
    std::size_t dim() const noexcept { return n_price() + n_time(); }

    /// Throws pvdb::Error when a structural invariant fails.
    void validate() const;
};

/// Knobs for laying out bases from data.
struct BasisConfig {
    std::size_t price_bases = 8;
    std::size_t rbf_bases = 4;
    std::vector<int> poly_degrees{0, 1};
    LognormalPrior price_prior{0.0, 1.0};
    GaussianPrior time_prior{0.0, 10.0};
    double noise_variance = 1.0;
    bool estimate_noise = true;
    double noise_floor = 1e-6;
    /// Scale volumes by the mean observed weekly volume.
    bool scale_volume = true;
};

/// Tanh shifts evenly spaced over [0.5 * min price, 1.5 * max price] of the
/// observed history (the fallback range when the history is empty), scale
/// equal to the spacing. RBF centers evenly spaced over the observed weeks,
/// width equal to the spacing. Polynomials run on weeks normalized by the
/// observed span.
BasisSpec make_basis_spec(const BasisConfig& cfg, std::span<const WeeklyAggregate> history,
                          double fallback_min_price, double fallback_max_price);

/// [phi_1(p) .. phi_U(p), phi_1(t) .. phi_D(t)]. Throws on p <= 0.
Eigen::VectorXd design_row(const BasisSpec& spec, double price, double week);
Eigen::VectorXd time_row(const BasisSpec& spec, double week);

Eigen::VectorXd prior_mean(const BasisSpec& spec);
Eigen::MatrixXd prior_covariance(const BasisSpec& spec);

/// Gaussian (Laplace) posterior over the latent vector z = [psi ; theta_time].
struct PosteriorState {
    static constexpr int kVersion = 1;

    Eigen::VectorXd latent_mean;
    Eigen::MatrixXd latent_cov;
    std::size_t n_price = 0;
    double noise_variance = 1.0;
    std::size_t n_observations = 0;
    int iterations = 0;
    double gradient_norm = 0.0;

    /// Coefficients at the mean on the scaled volume: exp on the price block.
    Eigen::VectorXd coefficients() const;
};

/// Negative log posterior of the latent vector for fixed noise variance,
/// with its gradient and exact Hessian.
class PosteriorObjective {
public:
    PosteriorObjective(const BasisSpec& spec, std::span<const WeeklyAggregate> data);

    std::size_t dim() const noexcept { return mean_.size(); }
    std::size_t n_observations() const noexcept { return static_cast<std::size_t>(y_.size()); }

    Eigen::VectorXd predict(const Eigen::VectorXd& z) const;
    double residual_sum_squares(const Eigen::VectorXd& z) const;

    double value(const Eigen::VectorXd& z, double noise_variance) const;
    Eigen::VectorXd gradient(const Eigen::VectorXd& z, double noise_variance) const;
    Eigen::MatrixXd hessian(const Eigen::VectorXd& z, double noise_variance) const;
    /// J^T J / sigma^2 + prior precision; positive definite everywhere.
    Eigen::MatrixXd gauss_newton(const Eigen::VectorXd& z, double noise_variance) const;

    const Eigen::VectorXd& prior_mean() const noexcept { return mean_; }
    const Eigen::VectorXd& prior_precision() const noexcept { return precision_; }

private:
    Eigen::MatrixXd price_design_;  // n x U
    Eigen::MatrixXd time_design_;   // n x D
    Eigen::VectorXd y_;
    Eigen::VectorXd mean_;
    Eigen::VectorXd precision_;     // diagonal prior precision
    std::size_t n_price_;
};

struct FitOptions {
    int max_iterations = 500;
    double gradient_tolerance = 1e-8;
    int max_noise_iterations = 100;
};

/// MAP by damped Newton with backtracking line search, noise variance
/// profiled by maximum likelihood (floored), Laplace covariance at the MAP.
/// Empty data returns the prior. Throws ConvergenceError.
PosteriorState fit_posterior(const BasisSpec& spec, std::span<const WeeklyAggregate> data,
                             const FitOptions& opts = {});

/// A single function drawn from the posterior.
class DemandSample {
public:
    DemandSample(const BasisSpec& spec, Eigen::VectorXd latent);

    /// theta in volume units: price block strictly positive, time block signed.
    const Eigen::VectorXd& coefficients() const noexcept { return coeffs_; }
    const Eigen::VectorXd& latent() const noexcept { return latent_; }
    const BasisSpec& spec() const noexcept { return spec_; }

    double operator()(double price, double week) const;
    /// Time contribution only.
    double time_component(double week) const;

private:
    BasisSpec spec_;
    Eigen::VectorXd latent_;
    Eigen::VectorXd coeffs_;
};

/// One multivariate-normal draw of the latent vector.
DemandSample sample_demand(const PosteriorState& post, const BasisSpec& spec, Rng& rng);

/// Plug-in prediction at the MAP, clipped below at 0.
double predict_mean(const PosteriorState& post, const BasisSpec& spec, double price, double week);

// Versioned JSON persistence (posterior plus the basis it was fit on).
std::string posterior_to_json(const PosteriorState& post, const BasisSpec& spec);
std::pair<PosteriorState, BasisSpec> posterior_from_json(const std::string& text);

}  // namespace pvdb
