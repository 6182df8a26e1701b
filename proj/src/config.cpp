#include "pvdb/config.hpp"

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"
#include "pvdb/error.hpp"

namespace pvdb {

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

[[noreturn]] void fail(const std::string& where, const std::string& what) {
    throw Error("cli", "config " + where + ": " + what);
}

// A JSON object whose keys must all be known.
class Section {
public:
    Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) fail(path_, "expected an object");
    }
    ~Section() noexcept(false) {
        if (std::uncaught_exceptions() > 0) return;
        for (auto it = j_.begin(); it != j_.end(); ++it)
            if (!seen_.count(it.key())) fail(path_ + "." + it.key(), "unknown key");
    }

    bool has(const std::string& k) {
        seen_.insert(k);
        return j_.contains(k);
    }
    const json& at(const std::string& k) {
        seen_.insert(k);
        return j_.at(k);
    }
    std::string where(const std::string& k) const { return path_ + "." + k; }

    template <class T>
    void get(const std::string& k, T& out) {
        if (!has(k)) return;
        try {
            out = j_.at(k).get<T>();
        } catch (const json::exception& e) {
            fail(where(k), e.what());
        }
    }
    void get_time(const std::string& k, Timestamp& out) {
        if (!has(k)) return;
        if (!j_.at(k).is_string()) fail(where(k), "expected an RFC 3339 timestamp string");
        out = parse_rfc3339(j_.at(k).get<std::string>());
    }

private:
    const json& j_;
    std::string path_;
    std::set<std::string> seen_;
};

std::string resolve(const std::string& base, const std::string& p) {
    const fs::path path(p);
    return path.is_absolute() ? p : (fs::path(base) / path).lexically_normal().string();
}

Interval read_interval(Section& parent, const std::string& key) {
    Section s(parent.at(key), parent.where(key));
    Timestamp b{}, e{};
    if (!s.has("begin") || !s.has("end")) fail(parent.where(key), "needs begin and end");
    s.get_time("begin", b);
    s.get_time("end", e);
    if (!(b < e)) fail(parent.where(key), "begin must precede end");
    return {b, e};
}

std::map<std::int64_t, double> read_baskets(Section& parent, const std::string& key) {
    const auto& j = parent.at(key);
    if (!j.is_object()) fail(parent.where(key), "expected an object of basket size to weight");
    std::map<std::int64_t, double> out;
    for (auto it = j.begin(); it != j.end(); ++it) {
        std::int64_t z = 0;
        try {
            std::size_t used = 0;
            z = std::stoll(it.key(), &used);
            if (used != it.key().size()) throw std::invalid_argument("");
        } catch (const std::exception&) {
            fail(parent.where(key), "basket size '" + it.key() + "' is not an integer");
        }
        if (!it.value().is_number()) fail(parent.where(key), "weight for " + it.key() + " is not a number");
        out[z] = it.value().get<double>();
    }
    return out;
}

void read_demand_model(Section& s, PvdbSettings& p) {
    auto& b = p.basis;
    s.get("price_bases", b.price_bases);
    s.get("rbf_bases", b.rbf_bases);
    s.get("poly_degrees", b.poly_degrees);
    if (s.has("price_prior")) {
        Section pr(s.at("price_prior"), s.where("price_prior"));
        pr.get("location", b.price_prior.location);
        pr.get("spread", b.price_prior.spread);
    }
    if (s.has("time_prior")) {
        Section pr(s.at("time_prior"), s.where("time_prior"));
        pr.get("mean", b.time_prior.mean);
        pr.get("variance", b.time_prior.variance);
    }
    s.get("noise_variance", b.noise_variance);
    s.get("estimate_noise", b.estimate_noise);
    s.get("noise_floor", b.noise_floor);
    s.get("scale_volume", b.scale_volume);
    s.get("max_iterations", p.fit.max_iterations);
    s.get("gradient_tolerance", p.fit.gradient_tolerance);
    s.get("max_noise_iterations", p.fit.max_noise_iterations);
}

void read_discounts(Section& s, DiscountConfig& d) {
    s.get("eta", d.eta);
    s.get("gamma_default", d.gamma_default);
    s.get("need_override", d.need_override);
    if (s.has("period_days")) {
        double days = 0;
        s.get("period_days", days);
        if (!(days > 0)) fail(s.where("period_days"), "must be > 0");
        d.period_length = std::chrono::seconds(static_cast<std::int64_t>(days * 86400.0));
    }
    if (s.has("measure")) d.measure = read_interval(s, "measure");
    if (s.has("control")) d.control = read_interval(s, "control");
}

void read_market(Section& s, MarketConfig& m) {
    s.get("product_id", m.product_id);
    if (s.has("form")) {
        std::string f;
        s.get("form", f);
        if (f == "exponential") m.form = DemandForm::exponential;
        else if (f == "logistic") m.form = DemandForm::logistic;
        else fail(s.where("form"), "expected exponential or logistic");
    }
    s.get("base_rate", m.base_rate);
    s.get("elasticity", m.elasticity);
    s.get("logistic_midpoint", m.logistic_midpoint);
    s.get("weekly_profile", m.weekly_profile);
    s.get("annual_profile", m.annual_profile);
    s.get("business_fraction", m.business_fraction);
    if (s.has("private_baskets")) m.private_baskets = read_baskets(s, "private_baskets");
    if (s.has("business_baskets")) m.business_baskets = read_baskets(s, "business_baskets");
    s.get("gamma_true", m.gamma_true);
    s.get("unit_cost", m.unit_cost);
    s.get("horizon", m.horizon);
    s.get("warmup_weeks", m.warmup_weeks);
    s.get("warmup_price", m.warmup_price);
    s.get_time("origin", m.origin);
}

void read_evaluation(Section& s, AbTestConfig& a) {
    s.get("products_a", a.products_a);
    s.get("products_b", a.products_b);
    s.get("baseline", a.baseline);
    s.get("base_rate_spread", a.base_rate_spread);
    s.get("elasticity_spread", a.elasticity_spread);
    s.get("permutations", a.permutations);
    s.get("workers", a.workers);
}

}  // namespace

EngineConfig config_from_text(const std::string& text, const std::string& base_dir) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        fail("", e.what());
    }
    EngineConfig cfg;
    {
        Section root(j, "");
        if (root.has("seed")) {
            const auto& v = root.at("seed");
            if (!v.is_number_unsigned()) fail(".seed", "expected a non-negative integer");
            cfg.seed = v.get<std::uint64_t>();
            cfg.has_seed = true;
        }
        if (root.has("paths")) {
            Section s(root.at("paths"), ".paths");
            std::string p;
            if (s.has("transactions")) {
                s.get("transactions", p);
                cfg.transactions = resolve(base_dir, p);
            }
            if (s.has("output_dir")) {
                s.get("output_dir", p);
                cfg.output_dir = p;
            }
            cfg.output_dir = resolve(base_dir, cfg.output_dir);
            if (s.has("posterior_dir")) {
                s.get("posterior_dir", p);
                cfg.posterior_dir = resolve(base_dir, p);
            }
        } else {
            cfg.output_dir = resolve(base_dir, cfg.output_dir);
        }
        if (root.has("data_core")) {
            Section s(root.at("data_core"), ".data_core");
            if (s.has("origin")) {
                Timestamp t{};
                s.get_time("origin", t);
                cfg.origin = t;
            }
        }
        if (root.has("demand_model")) {
            Section s(root.at("demand_model"), ".demand_model");
            read_demand_model(s, cfg.pricing);
        }
        if (root.has("price_optimizer")) {
            Section s(root.at("price_optimizer"), ".price_optimizer");
            s.get("margin_min", cfg.pricing.grid.margin_min);
            s.get("margin_max", cfg.pricing.grid.margin_max);
            s.get("step_fraction", cfg.pricing.grid.step_fraction);
        }
        if (root.has("discount_engine")) {
            Section s(root.at("discount_engine"), ".discount_engine");
            read_discounts(s, cfg.pricing.discounts);
        }
        if (root.has("market_sim")) {
            Section s(root.at("market_sim"), ".market_sim");
            read_market(s, cfg.market);
        }
        if (root.has("evaluation")) {
            Section s(root.at("evaluation"), ".evaluation");
            read_evaluation(s, cfg.abtest);
        }
    }
    return cfg;
}

EngineConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cli", "cannot open config file " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    const auto base = fs::path(path).parent_path().string();
    return config_from_text(ss.str(), base.empty() ? "." : base);
}

void validate(const EngineConfig& cfg) {
    if (!cfg.has_seed) fail(".seed", "a master seed is required");
    const auto& d = cfg.pricing.discounts;
    if (d.eta < 1) fail(".discount_engine.eta", "must be >= 1");
    if (!(d.gamma_default >= 0.0 && d.gamma_default <= 1.0)) fail(".discount_engine.gamma_default", "must lie in [0, 1]");
    if (d.need_override < 0) fail(".discount_engine.need_override", "must be >= 0");
    if (d.measure.has_value() != d.control.has_value())
        fail(".discount_engine", "measure and control must be given together");
    if (d.measure && d.measure->overlaps(*d.control)) fail(".discount_engine", "measure and control overlap");
    const auto& g = cfg.pricing.grid;
    if (!(g.margin_min > 0.0 && g.margin_max >= g.margin_min && g.step_fraction > 0.0))
        fail(".price_optimizer", "need 0 < margin_min <= margin_max and step_fraction > 0");
    const auto& b = cfg.pricing.basis;
    if (b.price_bases < 1) fail(".demand_model.price_bases", "must be >= 1");
    if (!(b.price_prior.spread > 0.0)) fail(".demand_model.price_prior.spread", "must be > 0");
    if (!(b.time_prior.variance > 0.0)) fail(".demand_model.time_prior.variance", "must be > 0");
    if (!(b.noise_variance > 0.0) || !(b.noise_floor > 0.0)) fail(".demand_model", "noise values must be > 0");
    if (cfg.transactions && !fs::is_regular_file(*cfg.transactions))
        fail(".paths.transactions", "no such file: " + *cfg.transactions);
    const auto& a = cfg.abtest;
    if (a.products_a < 1 || a.products_b < 1) fail(".evaluation", "both product sets need at least one product");
    if (a.baseline != "fixed" && a.baseline != "oracle" && a.baseline != "random")
        fail(".evaluation.baseline", "expected fixed, oracle or random");
    if (a.permutations < 1) fail(".evaluation.permutations", "must be >= 1");
    if (a.base_rate_spread < 0.0 || a.elasticity_spread < 0.0) fail(".evaluation", "spreads must be >= 0");
    cfg.market.validate();
}

}  // namespace pvdb
