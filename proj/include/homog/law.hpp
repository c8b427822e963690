#pragma once

#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

namespace homog {

enum class LawKind { constant, two_point, bounded_log_uniform, weibull_tail };

//---------------------------------------------------------------------------//
/*!
 * Distribution of a single checkerboard cell conductivity b > 0.
 *
 * - constant(c): b = c.
 * - two_point(a1, a2, prob): b = a1 with probability prob, a2 otherwise.
 * - bounded_log_uniform(s): log b uniform on [-s, s].
 * - weibull_tail(k_upper, k_lower, floor, scale): with k_lower <= 0 the
 *   upper branch only, b = floor + scale * E^{1/k_upper} (E standard
 *   exponential), so P(b > t) = exp(-((t - floor)/scale)^k_upper) for
 *   t >= floor. With k_lower > 0 an equal-weight mixture with the reciprocal
 *   branch 1/b = 1/floor + E^{1/k_lower}/scale.
 *
 * beta and gamma are the exponents of the exponential-moment condition
 * E[exp(Lambda^beta)] + E[exp(lambda^-gamma)] < infinity; infinite for
 * bounded laws.
 */
class MarginalLaw {
public:
    static MarginalLaw constant(double c);
    static MarginalLaw two_point(double a1, double a2, double prob);
    static MarginalLaw bounded_log_uniform(double s);
    /// beta/gamma default to 2/3 of the tail shapes (infinite without a lower branch).
    static MarginalLaw weibull_tail(double k_upper, double k_lower, double floor, double scale,
                                    double beta = -1.0, double gamma = -1.0);

    /// Parse "kind:p1,p2,..." (e.g. "two_point:1,4,0.5"). Throws ConfigError.
    static MarginalLaw parse(const std::string& spec);
    std::string to_spec() const;

    LawKind kind() const noexcept { return kind_; }
    const std::vector<double>& params() const noexcept { return params_; }
    double beta() const noexcept { return beta_; }
    double gamma() const noexcept { return gamma_; }

    /// Inverse-CDF draw from one uniform in (0, 1).
    double sample(double u) const;

    bool is_discrete() const noexcept;
    /// Support points and weights of a discrete law (ascending values).
    std::vector<std::pair<double, double>> atoms() const;

    /// Continuous laws only.
    double cdf(double t) const;
    double pdf(double t) const;
    /// Closed interval outside of which the density is below double precision.
    std::pair<double, double> effective_support() const;
    /// Points where the density is not smooth (branch joins), inside the support.
    std::vector<double> breakpoints() const;

    /// E[g(b)] exactly for discrete laws, by adaptive quadrature otherwise.
    double expect(const std::function<double(double)>& g) const;
    double mean() const;
    double mean_inverse() const;
    /// E[exp(b)]; +inf when it diverges numerically.
    double exp_moment() const;

    bool has_closed_form_effective(int dim) const;
    /// 1-d: harmonic mean 1/E[1/b]. 2-d: geometric mean for the symmetric two-phase law.
    double closed_form_effective(int dim) const;

    friend bool operator==(const MarginalLaw&, const MarginalLaw&) = default;

private:
    MarginalLaw(LawKind kind, std::vector<double> params, double beta, double gamma)
        : kind_(kind), params_(std::move(params)), beta_(beta), gamma_(gamma) {}

    LawKind kind_;
    std::vector<double> params_;
    double beta_;
    double gamma_;
};

void to_json(nlohmann::json& j, const MarginalLaw& law);

/// Integral of f on [a, b] by adaptive Gauss-Kronrod, split at the given points.
double integrate(const std::function<double(double)>& f, double a, double b,
                 const std::vector<double>& splits = {});

}  // namespace homog
