#include "pvdb/demand_model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include "json.hpp"
#include "pvdb/error.hpp"

namespace pvdb {

double TanhBasis::operator()(double p) const noexcept { return 0.5 * (1.0 - std::tanh((p - shift) / scale)); }

double RbfBasis::operator()(double t) const noexcept {
    const double x = (t - center) / width;
    return std::exp(-0.5 * x * x);
}

void BasisSpec::validate() const {
    if (price_bases.empty()) throw Error("demand-model", "at least one price basis is required");
    for (const auto& b : price_bases)
        if (!(b.scale > 0.0)) throw Error("demand-model", "price basis scale must be > 0");
    for (const auto& b : rbf_bases)
        if (!(b.width > 0.0)) throw Error("demand-model", "RBF width must be > 0");
    for (int d : poly_degrees)
        if (d < 0) throw Error("demand-model", "polynomial degree must be >= 0");
    if (!(time_scale > 0.0)) throw Error("demand-model", "time scale must be > 0");
    if (!(volume_scale > 0.0)) throw Error("demand-model", "volume scale must be > 0");
    if (price_priors.size() != n_price()) throw Error("demand-model", "one prior per price basis is required");
    if (time_priors.size() != n_time()) throw Error("demand-model", "one prior per time basis is required");
    for (const auto& p : price_priors)
        if (!(p.spread > 0.0)) throw Error("demand-model", "lognormal spread must be > 0");
    for (const auto& p : time_priors)
        if (!(p.variance > 0.0)) throw Error("demand-model", "time prior variance must be > 0");
    if (!(noise_variance > 0.0) || !(noise_floor > 0.0))
        throw Error("demand-model", "noise variance must be > 0");
}

BasisSpec make_basis_spec(const BasisConfig& cfg, std::span<const WeeklyAggregate> history,
                          double fallback_min_price, double fallback_max_price) {
    if (cfg.price_bases == 0) throw Error("demand-model", "at least one price basis is required");
    double pmin = fallback_min_price, pmax = fallback_max_price;
    double tmin = 0.0, tmax = 0.0;
    if (!history.empty()) {
        pmin = pmax = history.front().avg_price;
        tmin = tmax = static_cast<double>(history.front().week_index);
        for (const auto& a : history) {
            pmin = std::min(pmin, a.avg_price);
            pmax = std::max(pmax, a.avg_price);
            tmin = std::min(tmin, static_cast<double>(a.week_index));
            tmax = std::max(tmax, static_cast<double>(a.week_index));
        }
    }
    if (!(pmin > 0.0) || pmax < pmin) throw Error("demand-model", "invalid price range for basis placement");

    BasisSpec spec;
    const double lo = 0.5 * pmin, hi = 1.5 * pmax;
    const std::size_t u = cfg.price_bases;
    const double spacing = u > 1 ? (hi - lo) / static_cast<double>(u - 1) : (hi - lo) / 2.0;
    for (std::size_t i = 0; i < u; ++i) {
        const double shift = u > 1 ? lo + spacing * static_cast<double>(i) : 0.5 * (lo + hi);
        spec.price_bases.push_back({shift, spacing > 0.0 ? spacing : std::max(lo, 1e-6)});
    }

    const std::size_t r = cfg.rbf_bases;
    const double tspan = tmax - tmin;
    const double tstep = r > 1 ? tspan / static_cast<double>(r - 1) : tspan;
    for (std::size_t i = 0; i < r; ++i) {
        const double center = r > 1 ? tmin + tstep * static_cast<double>(i) : 0.5 * (tmin + tmax);
        spec.rbf_bases.push_back({center, std::max(tstep, 1.0)});
    }
    spec.poly_degrees = cfg.poly_degrees;
    spec.time_origin = tmin;
    spec.time_scale = std::max(tspan, 1.0);
    if (cfg.scale_volume && !history.empty()) {
        double total = 0.0;
        for (const auto& a : history) total += a.total_volume;
        const double mean = total / static_cast<double>(history.size());
        if (mean > 0.0) spec.volume_scale = mean;
    }

    spec.price_priors.assign(u, cfg.price_prior);
    spec.time_priors.assign(spec.n_time(), cfg.time_prior);
    spec.noise_variance = cfg.noise_variance;
    spec.estimate_noise = cfg.estimate_noise;
    spec.noise_floor = cfg.noise_floor;
    spec.validate();
    return spec;
}

Eigen::VectorXd time_row(const BasisSpec& spec, double week) {
    Eigen::VectorXd row(static_cast<Eigen::Index>(spec.n_time()));
    Eigen::Index k = 0;
    for (const auto& b : spec.rbf_bases) row[k++] = b(week);
    const double x = (week - spec.time_origin) / spec.time_scale;
    for (int d : spec.poly_degrees) row[k++] = std::pow(x, d);
    return row;
}

Eigen::VectorXd design_row(const BasisSpec& spec, double price, double week) {
    if (!(price > 0.0)) throw Error("demand-model", "price must be > 0");
    Eigen::VectorXd row(static_cast<Eigen::Index>(spec.dim()));
    Eigen::Index k = 0;
    for (const auto& b : spec.price_bases) row[k++] = b(price);
    row.tail(static_cast<Eigen::Index>(spec.n_time())) = time_row(spec, week);
    return row;
}

Eigen::VectorXd prior_mean(const BasisSpec& spec) {
    Eigen::VectorXd m(static_cast<Eigen::Index>(spec.dim()));
    Eigen::Index k = 0;
    for (const auto& p : spec.price_priors) m[k++] = p.location;
    for (const auto& p : spec.time_priors) m[k++] = p.mean;
    return m;
}

Eigen::MatrixXd prior_covariance(const BasisSpec& spec) {
    Eigen::VectorXd v(static_cast<Eigen::Index>(spec.dim()));
    Eigen::Index k = 0;
    for (const auto& p : spec.price_priors) v[k++] = p.spread * p.spread;
    for (const auto& p : spec.time_priors) v[k++] = p.variance;
    return v.asDiagonal();
}

Eigen::VectorXd PosteriorState::coefficients() const {
    Eigen::VectorXd c = latent_mean;
    const auto u = static_cast<Eigen::Index>(n_price);
    c.head(u) = c.head(u).array().exp().matrix();
    return c;
}

// ---------------------------------------------------------------------------

PosteriorObjective::PosteriorObjective(const BasisSpec& spec, std::span<const WeeklyAggregate> data)
    : n_price_(spec.n_price()) {
    spec.validate();
    const auto n = static_cast<Eigen::Index>(data.size());
    const auto u = static_cast<Eigen::Index>(spec.n_price());
    const auto d = static_cast<Eigen::Index>(spec.n_time());
    price_design_.resize(n, u);
    time_design_.resize(n, d);
    y_.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto& a = data[static_cast<std::size_t>(i)];
        const Eigen::VectorXd row = design_row(spec, a.avg_price, static_cast<double>(a.week_index));
        price_design_.row(i) = row.head(u).transpose();
        time_design_.row(i) = row.tail(d).transpose();
        y_[i] = a.total_volume / spec.volume_scale;
    }
    mean_ = pvdb::prior_mean(spec);
    precision_ = prior_covariance(spec).diagonal().cwiseInverse();
}

Eigen::VectorXd PosteriorObjective::predict(const Eigen::VectorXd& z) const {
    const auto u = static_cast<Eigen::Index>(n_price_);
    const Eigen::VectorXd theta = z.head(u).array().exp().matrix();
    return price_design_ * theta + time_design_ * z.tail(z.size() - u);
}

double PosteriorObjective::residual_sum_squares(const Eigen::VectorXd& z) const {
    return (y_ - predict(z)).squaredNorm();
}

double PosteriorObjective::value(const Eigen::VectorXd& z, double noise_variance) const {
    const Eigen::VectorXd dz = z - mean_;
    return 0.5 * residual_sum_squares(z) / noise_variance + 0.5 * dz.dot(precision_.cwiseProduct(dz));
}

Eigen::VectorXd PosteriorObjective::gradient(const Eigen::VectorXd& z, double noise_variance) const {
    const auto u = static_cast<Eigen::Index>(n_price_);
    const Eigen::VectorXd r = y_ - predict(z);
    const Eigen::ArrayXd theta = z.head(u).array().exp();
    Eigen::VectorXd g(z.size());
    g.head(u) = -(price_design_.transpose() * r).array() * theta / noise_variance;
    g.tail(z.size() - u) = -(time_design_.transpose() * r) / noise_variance;
    g += precision_.cwiseProduct(z - mean_);
    return g;
}

namespace {

Eigen::MatrixXd jacobian(const Eigen::MatrixXd& price_design, const Eigen::MatrixXd& time_design,
                         const Eigen::VectorXd& z, Eigen::Index u) {
    Eigen::MatrixXd j(price_design.rows(), z.size());
    j.leftCols(u) = price_design * z.head(u).array().exp().matrix().asDiagonal();
    j.rightCols(z.size() - u) = time_design;
    return j;
}

}  // namespace

Eigen::MatrixXd PosteriorObjective::gauss_newton(const Eigen::VectorXd& z, double noise_variance) const {
    const auto u = static_cast<Eigen::Index>(n_price_);
    const Eigen::MatrixXd j = jacobian(price_design_, time_design_, z, u);
    Eigen::MatrixXd h = (j.transpose() * j) / noise_variance;
    h.diagonal() += precision_;
    return h;
}

Eigen::MatrixXd PosteriorObjective::hessian(const Eigen::VectorXd& z, double noise_variance) const {
    const auto u = static_cast<Eigen::Index>(n_price_);
    Eigen::MatrixXd h = gauss_newton(z, noise_variance);
    const Eigen::VectorXd r = y_ - predict(z);
    const Eigen::ArrayXd theta = z.head(u).array().exp();
    const Eigen::ArrayXd curvature = (price_design_.transpose() * r).array() * theta;
    h.diagonal().head(u) -= (curvature / noise_variance).matrix();
    return h;
}

// ---------------------------------------------------------------------------

namespace {

constexpr double kMinResidualDof = 0.5;

struct MapResult {
    Eigen::VectorXd z;
    int iterations = 0;
    double gradient_norm = 0.0;
};

MapResult find_map(const PosteriorObjective& obj, Eigen::VectorXd z, double s2, const FitOptions& opts) {
    double f = obj.value(z, s2);
    MapResult res;
    for (int it = 0; it < opts.max_iterations; ++it) {
        const Eigen::VectorXd g = obj.gradient(z, s2);
        const double gnorm = g.lpNorm<Eigen::Infinity>();
        res.gradient_norm = gnorm;
        res.iterations = it;
        if (gnorm <= opts.gradient_tolerance) {
            res.z = std::move(z);
            return res;
        }

        // Exact Hessian when it is positive definite, otherwise shifted by a
        // growing multiple of the identity.
        const Eigen::MatrixXd h = obj.hessian(z, s2);
        Eigen::LLT<Eigen::MatrixXd> llt(h);
        double shift = 1e-3 * std::max(h.diagonal().cwiseAbs().maxCoeff(), 1e-8);
        for (int k = 0; llt.info() != Eigen::Success && k < 40; ++k, shift *= 10.0)
            llt.compute(h + shift * Eigen::MatrixXd::Identity(h.rows(), h.cols()));
        if (llt.info() != Eigen::Success) llt.compute(obj.gauss_newton(z, s2));
        Eigen::VectorXd dir = -llt.solve(g);
        double slope = g.dot(dir);
        if (!(slope < 0.0)) {
            dir = -g;
            slope = -g.squaredNorm();
        }
        // Newton decrement at the resolution of f: the gradient left over is rounding noise.
        if (-slope <= 1e-12 * (1.0 + std::abs(f))) {
            res.z = std::move(z);
            return res;
        }

        double t = 1.0;
        bool accepted = false;
        for (int k = 0; k < 60; ++k, t *= 0.5) {
            const Eigen::VectorXd trial = z + t * dir;
            const double ft = obj.value(trial, s2);
            if (std::isfinite(ft) && ft <= f + 1e-4 * t * slope) {
                z = trial;
                f = ft;
                accepted = true;
                break;
            }
        }
        if (!accepted) {
            // Line search stalled at rounding level of f.
            if (-slope <= 1e-10 * (1.0 + std::abs(f))) {
                res.z = std::move(z);
                return res;
            }
            throw ConvergenceError("line search failed at iteration " + std::to_string(it) +
                                       ", gradient norm " + std::to_string(gnorm),
                                   gnorm);
        }
    }
    const double gnorm = obj.gradient(z, s2).lpNorm<Eigen::Infinity>();
    throw ConvergenceError("MAP did not converge in " + std::to_string(opts.max_iterations) +
                               " iterations, gradient norm " + std::to_string(gnorm),
                           gnorm);
}

Eigen::MatrixXd invert_spd(Eigen::MatrixXd h) {
    h = 0.5 * (h + h.transpose());
    Eigen::LLT<Eigen::MatrixXd> llt(h);
    double jitter = 1e-12 * std::max(1.0, h.diagonal().cwiseAbs().maxCoeff());
    for (int attempt = 0; llt.info() != Eigen::Success; ++attempt) {
        if (attempt == 12) throw Error("demand-model", "Hessian at the MAP is not positive definite");
        Eigen::MatrixXd hj = h;
        hj.diagonal().array() += jitter;
        llt.compute(hj);
        jitter *= 10.0;
    }
    const auto n = h.rows();
    Eigen::MatrixXd cov = llt.solve(Eigen::MatrixXd::Identity(n, n));
    return 0.5 * (cov + cov.transpose());
}

}  // namespace

PosteriorState fit_posterior(const BasisSpec& spec, std::span<const WeeklyAggregate> data,
                             const FitOptions& opts) {
    spec.validate();
    PosteriorState post;
    post.n_price = spec.n_price();
    post.n_observations = data.size();
    post.noise_variance = spec.noise_variance;
    if (data.empty()) {
        post.latent_mean = prior_mean(spec);
        post.latent_cov = prior_covariance(spec);
        return post;
    }

    const PosteriorObjective obj(spec, data);
    const double n = static_cast<double>(data.size());
    double s2 = spec.noise_variance;
    if (spec.estimate_noise) {
        // Start wide (sample variance of volumes) and let profiling shrink it.
        double m = 0.0;
        for (const auto& a : data) m += a.total_volume / spec.volume_scale;
        m /= n;
        double v = 0.0;
        for (const auto& a : data) {
            const double y = a.total_volume / spec.volume_scale;
            v += (y - m) * (y - m);
        }
        s2 = std::max({v / n, spec.noise_variance, spec.noise_floor});
    }

    MapResult map = find_map(obj, obj.prior_mean(), s2, opts);
    int total_iterations = map.iterations;
    Eigen::MatrixXd cov = invert_spd(obj.hessian(map.z, s2));
    if (spec.estimate_noise) {
        // Evidence fixed point: sigma^2 = RSS / (n - g), where g = dim - tr(prior precision * cov)
        // counts the parameters the data pin down.
        for (int k = 0; k < opts.max_noise_iterations; ++k) {
            const double determined =
                static_cast<double>(obj.dim()) - obj.prior_precision().dot(cov.diagonal());
            const double dof = std::max(n - determined, kMinResidualDof);
            const double next = std::max(obj.residual_sum_squares(map.z) / dof, spec.noise_floor);
            const bool settled = std::abs(std::log(next / s2)) < 1e-6;
            s2 = next;
            map = find_map(obj, std::move(map.z), s2, opts);
            total_iterations += map.iterations;
            cov = invert_spd(obj.hessian(map.z, s2));
            if (settled) break;
        }
    }

    post.latent_mean = map.z;
    post.latent_cov = std::move(cov);
    post.noise_variance = s2;
    post.iterations = total_iterations;
    post.gradient_norm = map.gradient_norm;
    return post;
}

// ---------------------------------------------------------------------------

DemandSample::DemandSample(const BasisSpec& spec, Eigen::VectorXd latent)
    : spec_(spec), latent_(std::move(latent)), coeffs_(latent_) {
    if (latent_.size() != static_cast<Eigen::Index>(spec_.dim()))
        throw Error("demand-model", "latent vector does not match the basis");
    const auto u = static_cast<Eigen::Index>(spec_.n_price());
    coeffs_.head(u) = latent_.head(u).array().exp().matrix();
    coeffs_ *= spec_.volume_scale;
}

double DemandSample::time_component(double week) const {
    const auto u = static_cast<Eigen::Index>(spec_.n_price());
    return time_row(spec_, week).dot(coeffs_.tail(coeffs_.size() - u));
}

double DemandSample::operator()(double price, double week) const {
    if (!(price > 0.0)) throw Error("demand-model", "price must be > 0");
    double v = 0.0;
    for (std::size_t u = 0; u < spec_.n_price(); ++u)
        v = v + coeffs_[static_cast<Eigen::Index>(u)] * spec_.price_bases[u](price);
    return v + time_component(week);
}

DemandSample sample_demand(const PosteriorState& post, const BasisSpec& spec, Rng& rng) {
    const auto k = post.latent_mean.size();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(post.latent_cov);
    const Eigen::VectorXd root = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    std::normal_distribution<double> normal(0.0, 1.0);
    Eigen::VectorXd xi(k);
    for (Eigen::Index i = 0; i < k; ++i) xi[i] = normal(rng);
    Eigen::VectorXd z = post.latent_mean + eig.eigenvectors() * root.cwiseProduct(xi);
    return DemandSample(spec, std::move(z));
}

double predict_mean(const PosteriorState& post, const BasisSpec& spec, double price, double week) {
    const double v = design_row(spec, price, week).dot(post.coefficients()) * spec.volume_scale;
    return std::max(v, 0.0);
}

// ---------------------------------------------------------------------------

namespace {

nlohmann::json basis_to_json(const BasisSpec& s) {
    nlohmann::json j;
    for (std::size_t i = 0; i < s.price_bases.size(); ++i)
        j["price_bases"].push_back({{"shift", s.price_bases[i].shift},
                                    {"scale", s.price_bases[i].scale},
                                    {"prior_location", s.price_priors[i].location},
                                    {"prior_spread", s.price_priors[i].spread}});
    j["rbf_bases"] = nlohmann::json::array();
    for (const auto& b : s.rbf_bases) j["rbf_bases"].push_back({{"center", b.center}, {"width", b.width}});
    j["poly_degrees"] = s.poly_degrees;
    j["time_priors"] = nlohmann::json::array();
    for (const auto& p : s.time_priors) j["time_priors"].push_back({{"mean", p.mean}, {"variance", p.variance}});
    j["time_origin"] = s.time_origin;
    j["time_scale"] = s.time_scale;
    j["volume_scale"] = s.volume_scale;
    j["noise_variance"] = s.noise_variance;
    j["estimate_noise"] = s.estimate_noise;
    j["noise_floor"] = s.noise_floor;
    return j;
}

BasisSpec basis_from_json(const nlohmann::json& j) {
    BasisSpec s;
    for (const auto& b : j.at("price_bases")) {
        s.price_bases.push_back({b.at("shift").get<double>(), b.at("scale").get<double>()});
        s.price_priors.push_back({b.at("prior_location").get<double>(), b.at("prior_spread").get<double>()});
    }
    for (const auto& b : j.at("rbf_bases")) s.rbf_bases.push_back({b.at("center").get<double>(), b.at("width").get<double>()});
    s.poly_degrees = j.at("poly_degrees").get<std::vector<int>>();
    for (const auto& p : j.at("time_priors")) s.time_priors.push_back({p.at("mean").get<double>(), p.at("variance").get<double>()});
    s.time_origin = j.at("time_origin").get<double>();
    s.time_scale = j.at("time_scale").get<double>();
    s.volume_scale = j.at("volume_scale").get<double>();
    s.noise_variance = j.at("noise_variance").get<double>();
    s.estimate_noise = j.at("estimate_noise").get<bool>();
    s.noise_floor = j.at("noise_floor").get<double>();
    s.validate();
    return s;
}

}  // namespace

std::string posterior_to_json(const PosteriorState& post, const BasisSpec& spec) {
    nlohmann::json j;
    j["format"] = "pvdb-posterior";
    j["version"] = PosteriorState::kVersion;
    j["basis"] = basis_to_json(spec);
    auto& p = j["posterior"];
    p["n_price"] = post.n_price;
    p["noise_variance"] = post.noise_variance;
    p["n_observations"] = post.n_observations;
    p["iterations"] = post.iterations;
    p["gradient_norm"] = post.gradient_norm;
    p["latent_mean"] = std::vector<double>(post.latent_mean.data(), post.latent_mean.data() + post.latent_mean.size());
    p["latent_cov"] = nlohmann::json::array();
    for (Eigen::Index r = 0; r < post.latent_cov.rows(); ++r) {
        std::vector<double> row(static_cast<std::size_t>(post.latent_cov.cols()));
        for (Eigen::Index c = 0; c < post.latent_cov.cols(); ++c) row[static_cast<std::size_t>(c)] = post.latent_cov(r, c);
        p["latent_cov"].push_back(row);
    }
    return j.dump(2) + "\n";
}

std::pair<PosteriorState, BasisSpec> posterior_from_json(const std::string& text) {
    try {
        const auto j = nlohmann::json::parse(text);
        if (j.at("format") != "pvdb-posterior") throw Error("demand-model", "not a posterior document");
        const int version = j.at("version").get<int>();
        if (version != PosteriorState::kVersion)
            throw Error("demand-model", "unsupported posterior version " + std::to_string(version));
        BasisSpec spec = basis_from_json(j.at("basis"));
        const auto& p = j.at("posterior");
        PosteriorState post;
        post.n_price = p.at("n_price").get<std::size_t>();
        post.noise_variance = p.at("noise_variance").get<double>();
        post.n_observations = p.at("n_observations").get<std::size_t>();
        post.iterations = p.at("iterations").get<int>();
        post.gradient_norm = p.at("gradient_norm").get<double>();
        const auto mean = p.at("latent_mean").get<std::vector<double>>();
        const auto k = static_cast<Eigen::Index>(mean.size());
        if (k != static_cast<Eigen::Index>(spec.dim())) throw Error("demand-model", "posterior does not match its basis");
        post.latent_mean = Eigen::Map<const Eigen::VectorXd>(mean.data(), k);
        post.latent_cov.resize(k, k);
        const auto& cov = p.at("latent_cov");
        if (static_cast<Eigen::Index>(cov.size()) != k) throw Error("demand-model", "covariance has wrong shape");
        for (Eigen::Index r = 0; r < k; ++r) {
            const auto row = cov.at(static_cast<std::size_t>(r)).get<std::vector<double>>();
            if (static_cast<Eigen::Index>(row.size()) != k) throw Error("demand-model", "covariance has wrong shape");
            for (Eigen::Index c = 0; c < k; ++c) post.latent_cov(r, c) = row[static_cast<std::size_t>(c)];
        }
        return {std::move(post), std::move(spec)};
    } catch (const nlohmann::json::exception& e) {
        throw Error("demand-model", std::string("bad posterior document: ") + e.what());
    }
}

}  // namespace pvdb
