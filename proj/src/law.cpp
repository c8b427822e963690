#include "homog/law.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "homog/error.hpp"

namespace homog {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
// exp(-745) underflows to the smallest subnormal.
constexpr double kTailExponent = 745.0;

std::string fmt_double(double x)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

bool has_lower_branch(const std::vector<double>& p) { return p[1] > 0.0; }

}  // namespace

MarginalLaw MarginalLaw::constant(double c)
{
    if (!(c > 0.0) || !std::isfinite(c))
        throw ConfigError("constant law needs 0 < c < inf");
    return MarginalLaw(LawKind::constant, {c}, kInf, kInf);
}

MarginalLaw MarginalLaw::two_point(double a1, double a2, double prob)
{
    if (!(a1 > 0.0) || !(a2 > 0.0) || !std::isfinite(a1) || !std::isfinite(a2))
        throw ConfigError("two_point law needs positive finite values");
    if (!(prob >= 0.0 && prob <= 1.0))
        throw ConfigError("two_point law needs prob in [0, 1]");
    return MarginalLaw(LawKind::two_point, {a1, a2, prob}, kInf, kInf);
}

MarginalLaw MarginalLaw::bounded_log_uniform(double s)
{
    if (!(s >= 0.0) || !std::isfinite(s))
        throw ConfigError("bounded_log_uniform law needs 0 <= s < inf");
    return MarginalLaw(LawKind::bounded_log_uniform, {s}, kInf, kInf);
}

MarginalLaw MarginalLaw::weibull_tail(double k_upper, double k_lower, double floor, double scale,
                                      double beta, double gamma)
{
    if (!(k_upper > 0.0) || !(floor > 0.0) || !(scale > 0.0))
        throw ConfigError("weibull_tail law needs k_upper, floor, scale > 0");
    if (beta <= 0.0)
        beta = 2.0 * k_upper / 3.0;
    if (gamma <= 0.0)
        gamma = k_lower > 0.0 ? 2.0 * k_lower / 3.0 : kInf;
    if (!(beta < k_upper))
        throw ConfigError("weibull_tail law needs beta < k_upper");
    if (k_lower > 0.0 && !(gamma < k_lower))
        throw ConfigError("weibull_tail law needs gamma < k_lower");
    return MarginalLaw(LawKind::weibull_tail, {k_upper, std::max(k_lower, 0.0), floor, scale},
                       beta, gamma);
}

MarginalLaw MarginalLaw::parse(const std::string& spec)
{
    auto colon = spec.find(':');
    std::string name = spec.substr(0, colon);
    std::vector<double> v;
    if (colon != std::string::npos) {
        std::stringstream ss(spec.substr(colon + 1));
        std::string item;
        while (std::getline(ss, item, ',')) {
            try {
                std::size_t used = 0;
                v.push_back(std::stod(item, &used));
                if (used != item.size())
                    throw std::invalid_argument(item);
            } catch (const std::exception&) {
                throw ConfigError("law: cannot parse number '" + item + "' in '" + spec + "'");
            }
        }
    }
    auto need = [&](std::size_t lo, std::size_t hi) {
        if (v.size() < lo || v.size() > hi)
            throw ConfigError("law: wrong parameter count in '" + spec + "'");
    };
    if (name == "constant") {
        need(1, 1);
        return constant(v[0]);
    }
    if (name == "two_point") {
        need(3, 3);
        return two_point(v[0], v[1], v[2]);
    }
    if (name == "bounded_log_uniform") {
        need(1, 1);
        return bounded_log_uniform(v[0]);
    }
    if (name == "weibull_tail") {
        need(4, 6);
        return weibull_tail(v[0], v[1], v[2], v[3], v.size() > 4 ? v[4] : -1.0,
                            v.size() > 5 ? v[5] : -1.0);
    }
    throw ConfigError("law: unknown kind '" + name + "'");
}

std::string MarginalLaw::to_spec() const
{
    std::string out;
    switch (kind_) {
    case LawKind::constant: out = "constant:"; break;
    case LawKind::two_point: out = "two_point:"; break;
    case LawKind::bounded_log_uniform: out = "bounded_log_uniform:"; break;
    case LawKind::weibull_tail: out = "weibull_tail:"; break;
    }
    for (std::size_t i = 0; i < params_.size(); ++i)
        out += (i ? "," : "") + fmt_double(params_[i]);
    if (kind_ == LawKind::weibull_tail) {
        out += "," + fmt_double(beta_);
        if (std::isfinite(gamma_))
            out += "," + fmt_double(gamma_);
    }
    return out;
}

double MarginalLaw::sample(double u) const
{
    const auto& p = params_;
    switch (kind_) {
    case LawKind::constant: return p[0];
    case LawKind::two_point: return u < p[2] ? p[0] : p[1];
    case LawKind::bounded_log_uniform: return std::exp(p[0] * (2.0 * u - 1.0));
    case LawKind::weibull_tail: {
        const double ku = p[0], kl = p[1], fl = p[2], sc = p[3];
        if (!has_lower_branch(p))
            return fl + sc * std::pow(-std::log1p(-u), 1.0 / ku);
        if (u < 0.5) {
            double w = 2.0 * u;
            return 1.0 / (1.0 / fl + std::pow(-std::log(w), 1.0 / kl) / sc);
        }
        double w = 2.0 * u - 1.0;
        return fl + sc * std::pow(-std::log1p(-w), 1.0 / ku);
    }
    }
    return p[0];
}

bool MarginalLaw::is_discrete() const noexcept
{
    return kind_ == LawKind::constant || kind_ == LawKind::two_point ||
           (kind_ == LawKind::bounded_log_uniform && params_[0] == 0.0);
}

std::vector<std::pair<double, double>> MarginalLaw::atoms() const
{
    switch (kind_) {
    case LawKind::constant: return {{params_[0], 1.0}};
    case LawKind::bounded_log_uniform: return {{1.0, 1.0}};
    case LawKind::two_point: {
        double a1 = params_[0], a2 = params_[1], pr = params_[2];
        if (a1 == a2)
            return {{a1, 1.0}};
        std::vector<std::pair<double, double>> out{{a1, pr}, {a2, 1.0 - pr}};
        std::sort(out.begin(), out.end());
        return out;
    }
    default: throw LawUnsuitableError("atoms() called on a continuous law");
    }
}

double MarginalLaw::cdf(double t) const
{
    const auto& p = params_;
    switch (kind_) {
    case LawKind::bounded_log_uniform: {
        double s = p[0];
        if (t <= std::exp(-s))
            return 0.0;
        if (t >= std::exp(s))
            return 1.0;
        return (std::log(t) + s) / (2.0 * s);
    }
    case LawKind::weibull_tail: {
        const double ku = p[0], kl = p[1], fl = p[2], sc = p[3];
        const double w_low = has_lower_branch(p) ? 0.5 : 0.0;
        if (t <= 0.0)
            return 0.0;
        if (t < fl) {
            if (w_low == 0.0)
                return 0.0;
            double y = sc * (1.0 / t - 1.0 / fl);
            return w_low * std::exp(-std::pow(y, kl));
        }
        double x = (t - fl) / sc;
        return w_low + (1.0 - w_low) * (-std::expm1(-std::pow(x, ku)));
    }
    default: break;
    }
    double acc = 0.0;
    for (auto [v, w] : atoms())
        if (v <= t)
            acc += w;
    return acc;
}

double MarginalLaw::pdf(double t) const
{
    const auto& p = params_;
    switch (kind_) {
    case LawKind::bounded_log_uniform: {
        double s = p[0];
        if (t < std::exp(-s) || t > std::exp(s))
            return 0.0;
        return 1.0 / (2.0 * s * t);
    }
    case LawKind::weibull_tail: {
        const double ku = p[0], kl = p[1], fl = p[2], sc = p[3];
        const double w_low = has_lower_branch(p) ? 0.5 : 0.0;
        if (t <= 0.0)
            return 0.0;
        if (t < fl) {
            if (w_low == 0.0)
                return 0.0;
            double y = sc * (1.0 / t - 1.0 / fl);
            return w_low * std::exp(-std::pow(y, kl)) * kl * std::pow(y, kl - 1.0) * sc / (t * t);
        }
        double x = (t - fl) / sc;
        if (x == 0.0)
            return ku == 1.0 ? (1.0 - w_low) / sc : 0.0;
        return (1.0 - w_low) * (ku / sc) * std::pow(x, ku - 1.0) * std::exp(-std::pow(x, ku));
    }
    default: throw LawUnsuitableError("pdf() called on a discrete law");
    }
}

std::pair<double, double> MarginalLaw::effective_support() const
{
    const auto& p = params_;
    switch (kind_) {
    case LawKind::bounded_log_uniform: return {std::exp(-p[0]), std::exp(p[0])};
    case LawKind::weibull_tail: {
        const double ku = p[0], kl = p[1], fl = p[2], sc = p[3];
        double hi = fl + sc * std::pow(kTailExponent, 1.0 / ku);
        double lo = has_lower_branch(p) ? 1.0 / (1.0 / fl + std::pow(kTailExponent, 1.0 / kl) / sc)
                                        : fl;
        return {lo, hi};
    }
    default: {
        auto a = atoms();
        return {a.front().first, a.back().first};
    }
    }
}

std::vector<double> MarginalLaw::breakpoints() const
{
    if (kind_ == LawKind::weibull_tail && has_lower_branch(params_))
        return {params_[2]};
    return {};
}

double integrate(const std::function<double(double)>& f, double a, double b,
                 const std::vector<double>& splits)
{
    if (!(b > a))
        return 0.0;
    std::vector<double> pts{a};
    for (double s : splits)
        if (s > a && s < b)
            pts.push_back(s);
    std::sort(pts.begin() + 1, pts.end());
    pts.push_back(b);
    double total = 0.0;
    for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
        if (pts[i + 1] <= pts[i])
            continue;
        double err = 0.0;
        total += boost::math::quadrature::gauss_kronrod<double, 61>::integrate(
            f, pts[i], pts[i + 1], 20, 1e-13, &err);
    }
    return total;
}

double MarginalLaw::expect(const std::function<double(double)>& g) const
{
    if (is_discrete()) {
        double acc = 0.0;
        for (auto [v, w] : atoms())
            if (w > 0.0)
                acc += w * g(v);
        return acc;
    }
    if (kind_ == LawKind::bounded_log_uniform) {
        double s = params_[0];
        return integrate([&](double y) { return g(std::exp(y)); }, -s, s) / (2.0 * s);
    }
    auto [lo, hi] = effective_support();
    return integrate([&](double t) { return g(t) * pdf(t); }, lo, hi, breakpoints());
}

double MarginalLaw::mean() const
{
    return expect([](double t) { return t; });
}

double MarginalLaw::mean_inverse() const
{
    return expect([](double t) { return 1.0 / t; });
}

double MarginalLaw::exp_moment() const
{
    double v = expect([](double t) { return std::exp(std::abs(t)); });
    return std::isfinite(v) && v < 1e300 ? v : kInf;
}

bool MarginalLaw::has_closed_form_effective(int dim) const
{
    if (kind_ == LawKind::constant || dim == 1)
        return true;
    if (dim == 2) {
        if (kind_ == LawKind::two_point)
            return params_[2] == 0.5 || params_[0] == params_[1];
        // log b symmetric about 0: statistically self-dual, effective value 1.
        if (kind_ == LawKind::bounded_log_uniform)
            return true;
    }
    return false;
}

double MarginalLaw::closed_form_effective(int dim) const
{
    if (!has_closed_form_effective(dim))
        throw LawUnsuitableError("no closed-form effective coefficient for " + to_spec());
    if (kind_ == LawKind::constant)
        return params_[0];
    if (dim == 1)
        return 1.0 / mean_inverse();
    if (kind_ == LawKind::two_point)
        return std::sqrt(params_[0] * params_[1]);
    return 1.0;
}

void to_json(nlohmann::json& j, const MarginalLaw& law)
{
    j = nlohmann::json{{"spec", law.to_spec()}, {"params", law.params()}};
    j["beta"] = std::isfinite(law.beta()) ? nlohmann::json(law.beta()) : nlohmann::json("inf");
    j["gamma"] = std::isfinite(law.gamma()) ? nlohmann::json(law.gamma()) : nlohmann::json("inf");
}

}  // namespace homog
