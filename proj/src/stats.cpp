#include "homog/stats.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <limits>
#include <sstream>

#include "homog/error.hpp"
#include "homog/linalg.hpp"
#include "homog/parallel.hpp"
#include "homog/rng.hpp"

namespace homog {

int resolve_threads(int requested)
{
    if (requested > 0)
        return requested;
    if (const char* env = std::getenv("HOMOG_THREADS")) {
        char* end = nullptr;
        const long v = std::strtol(env, &end, 10);
        if (end != env && *end == '\0' && v > 0 && v <= 1024)
            return static_cast<int>(v);
    }
    return 1;
}

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

struct Moments {
    double mean = 0.0;
    double se = 0.0;
};

Moments moments(const std::vector<double>& x)
{
    Moments m;
    const auto n = static_cast<double>(x.size());
    if (x.empty())
        return m;
    CompensatedSum s;
    for (double v : x)
        s.add(v);
    m.mean = s.value() / n;
    if (x.size() < 2)
        return m;
    CompensatedSum s2;
    for (double v : x)
        s2.add((v - m.mean) * (v - m.mean));
    m.se = std::sqrt(s2.value() / (n - 1.0) / n);
    return m;
}

void matrix_moments(const std::vector<Mat>& xs, int d, Mat& mean, Mat& se)
{
    mean = Mat::Zero(d, d);
    se = Mat::Zero(d, d);
    std::vector<double> col(xs.size());
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) {
            for (std::size_t k = 0; k < xs.size(); ++k)
                col[k] = xs[k](i, j);
            auto m = moments(col);
            mean(i, j) = m.mean;
            se(i, j) = m.se;
        }
}

nlohmann::json rows_of(const Mat& m)
{
    auto j = nlohmann::json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        auto row = nlohmann::json::array();
        for (Eigen::Index c = 0; c < m.cols(); ++c)
            row.push_back(m(r, c));
        j.push_back(row);
    }
    return j;
}

std::string num(double v)
{
    if (!std::isfinite(v))
        return "";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

Vec top_eigenvector(const Mat& m)
{
    Eigen::SelfAdjointEigenSolver<Mat> es(symmetrize(m));
    return es.eigenvectors().col(m.rows() - 1);
}

// Rethrow with the sample index attached, keeping the category.
[[noreturn]] void rethrow_with_index(std::size_t i)
{
    const std::string prefix = "sample " + std::to_string(i) + ": ";
    try {
        throw;
    } catch (const SolverError& e) {
        throw SolverError(prefix + e.what(), e.residual(), e.iterations());
    } catch (const Error& e) {
        throw Error(e.category(), prefix + e.what());
    }
}

bool same_samples(const ScaleStudy& a, const ScaleStudy& b)
{
    return a.master_seed == b.master_seed && a.N == b.N && a.res == b.res && a.law == b.law &&
           a.dim == b.dim;
}

LogFit fit_line(const std::vector<double>& x, const std::vector<double>& y)
{
    LogFit f;
    const auto n = static_cast<double>(x.size());
    if (x.size() < 2)
        return f;
    double sx = 0, sy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sx += x[i];
        sy += y[i];
    }
    const double mx = sx / n, my = sy / n;
    double sxx = 0, sxy = 0, syy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
        syy += (y[i] - my) * (y[i] - my);
    }
    if (sxx <= 0.0)
        return f;
    f.slope = sxy / sxx;
    f.intercept = my - f.slope * mx;
    f.r2 = syy > 0.0 ? sxy * sxy / (sxx * syy) : 1.0;
    return f;
}

std::vector<double> per_sample_sq_error(const ScaleStudy& s, const Mat& ref)
{
    std::vector<double> e(s.a_samples.size());
    for (std::size_t i = 0; i < e.size(); ++i)
        e[i] = std::pow(operator_norm(s.a_samples[i] - ref), 2);
    return e;
}

}  // namespace

//---------------------------------------------------------------------------//

double ScaleStudy::omega_mean() const
{
    return omega.empty() ? kNaN : moments(omega).mean;
}

ScaleStudy run_scale_study(const MarginalLaw& law, int dim, int n, int N, int res,
                           std::uint64_t master_seed, const StudyOptions& opts)
{
    if (N < 2)
        throw PreconditionError("run_scale_study: N must be >= 2");
    if (dim < 1 || dim > 3 || n < 0 || res < 1)
        throw PreconditionError("run_scale_study: invalid dim, n or res");
    const auto t0 = std::chrono::steady_clock::now();

    ScaleStudy s;
    s.law = law;
    s.dim = dim;
    s.n = n;
    s.N = N;
    s.res = res;
    s.master_seed = master_seed;

    const auto cube = TriadicCube::centered(n, dim);
    std::vector<QuadraticReport> reps(static_cast<std::size_t>(N));
    parallel_for(reps.size(), resolve_threads(opts.threads), [&](std::size_t i) {
        try {
            auto field = sample_field(law, sample_seed(master_seed, i), cube);
            reps[i] = CellSolver(field, cube, res, opts.solver).matrices();
        } catch (const Error&) {
            rethrow_with_index(i);
        }
    });

    std::vector<double> Lam(reps.size()), inv_lam(reps.size());
    for (std::size_t i = 0; i < reps.size(); ++i) {
        s.a_samples.push_back(reps[i].a_U);
        s.a_star_inv_samples.push_back(reps[i].a_star_inv());
        Lam[i] = reps[i].Lam;
        inv_lam[i] = 1.0 / reps[i].lam;
    }
    matrix_moments(s.a_samples, dim, s.mean_a, s.se_a);
    matrix_moments(s.a_star_inv_samples, dim, s.mean_a_star_inv, s.se_a_star_inv);
    s.abar_n = symmetrize(s.mean_a_star_inv).inverse();
    s.mean_Lam = moments(Lam).mean;
    s.mean_inv_lam = moments(inv_lam).mean;
    s.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    return s;
}

void set_reference(ScaleStudy& s, const Mat& abar_ref)
{
    s.abar_ref = abar_ref;
    auto m = moments(per_sample_sq_error(s, abar_ref));
    s.sq_error = m.mean;
    s.sq_error_se = m.se;
}

void attach_omega(ScaleStudy& s, const Mat& abar_ref, const StudyOptions& opts)
{
    const auto cube = TriadicCube::centered(s.n, s.dim);
    s.omega.assign(static_cast<std::size_t>(s.N), 0.0);
    parallel_for(s.omega.size(), resolve_threads(opts.threads), [&](std::size_t i) {
        try {
            auto field = sample_field(s.law, sample_seed(s.master_seed, i), cube);
            s.omega[i] = compute_omega(field, s.n, abar_ref, s.res, opts.solver);
        } catch (const Error&) {
            rethrow_with_index(i);
        }
    });
}

//---------------------------------------------------------------------------//

AbarEstimate estimate_abar(const std::vector<ScaleStudy>& studies)
{
    if (studies.empty())
        throw PreconditionError("estimate_abar: no studies");
    for (std::size_t i = 1; i < studies.size(); ++i)
        if (studies[i].n != studies[i - 1].n + 1 || !(studies[i].law == studies[0].law))
            throw PreconditionError("estimate_abar: studies must be consecutive scales of one law");
    const ScaleStudy& top = studies.back();
    AbarEstimate e;
    e.n = top.n;
    e.abar = symmetrize(top.mean_a);
    e.se = top.se_a;
    e.lower = 1.0 / top.law.mean_inverse();
    e.upper = top.law.mean();
    // Scalar fields: |a| = b and |a^{-1}| = 1/b per cell, so the refined
    // bracket uses the same expectations.
    e.lower_refined = e.lower;
    e.upper_refined = e.upper;

    const double slack = 3.0 * e.se.cwiseAbs().maxCoeff();
    const double lo = min_eigenvalue(e.abar), hi = max_eigenvalue(e.abar);
    const double tol = 1e-12 * std::max(1.0, e.upper);
    if (lo < e.lower - slack - tol || hi > e.upper + slack + tol) {
        std::ostringstream msg;
        msg << "abar eigenvalues [" << lo << ", " << hi << "] outside bracket [" << e.lower << ", "
            << e.upper << "] beyond 3 standard errors";
        throw StudyInconsistencyError(msg.str());
    }
    e.strictly_inside = lo > e.lower_refined + slack && hi < e.upper_refined - slack;
    return e;
}

TauEstimate estimate_tau(const ScaleStudy& sn, const ScaleStudy& sn1)
{
    if (sn1.n != sn.n + 1 || sn.dim != sn1.dim)
        throw PreconditionError("estimate_tau: studies must be at consecutive scales");
    TauEstimate t;
    t.n = sn.n;
    t.coupled = same_samples(sn, sn1);
    const Mat da = sn.mean_a - sn1.mean_a;
    const Mat ds = sn.mean_a_star_inv - sn1.mean_a_star_inv;
    t.mu_part_raw = max_eigenvalue(da);
    t.mu_star_part_raw = max_eigenvalue(ds);
    t.clamped = t.mu_part_raw < 0.0 || t.mu_star_part_raw < 0.0;
    t.tau = 0.5 * std::max(t.mu_part_raw, 0.0) + 0.5 * std::max(t.mu_star_part_raw, 0.0);

    const Vec va = top_eigenvector(da), vs = top_eigenvector(ds);
    auto projected = [&](const ScaleStudy& s) {
        std::vector<double> x(s.a_samples.size());
        for (std::size_t i = 0; i < x.size(); ++i)
            x[i] = 0.5 * va.dot(s.a_samples[i] * va) + 0.5 * vs.dot(s.a_star_inv_samples[i] * vs);
        return x;
    };
    auto x0 = projected(sn), x1 = projected(sn1);
    if (t.coupled) {
        std::vector<double> d(x0.size());
        for (std::size_t i = 0; i < d.size(); ++i)
            d[i] = x0[i] - x1[i];
        t.se = moments(d).se;
    } else {
        t.se = std::hypot(moments(x0).se, moments(x1).se);
    }
    return t;
}

//---------------------------------------------------------------------------//

std::vector<double> omega_levels(const CheckerboardField& field, int n, const Mat& abar_ref,
                                 int res, SolverOptions opts)
{
    const int d = field.dim();
    if (abar_ref.rows() != d || abar_ref.cols() != d || min_eigenvalue(abar_ref) <= 0.0)
        throw PreconditionError("compute_omega: reference must be a d x d SPD matrix");
    const auto cube = TriadicCube::centered(n, d);
    if (!field.covers(cube))
        throw CoverageError("compute_omega: field does not cover the cube");
    std::vector<double> levels;
    for (int m = 0; m <= n; ++m) {
        CompensatedSum s;
        for (const auto& sub : cube.subcubes(m)) {
            // A single cell has constant coefficient, so a = b Id exactly.
            const Mat a = m == 0 ? field.cell_matrix(sub.offset)
                                 : CellSolver(field, sub, res, opts).matrices().a_U;
            s.add(operator_norm(a - abar_ref));
        }
        levels.push_back(s.value());
    }
    return levels;
}

double compute_omega(const CheckerboardField& field, int n, const Mat& abar_ref, int res,
                     SolverOptions opts)
{
    const int d = field.dim();
    auto levels = omega_levels(field, n, abar_ref, res, opts);
    double total = 0.0;
    for (int m = 0; m <= n; ++m) {
        const double avg = std::pow(3.0, -static_cast<double>((n - m) * d)) * levels[m];
        total += std::pow(3.0, -static_cast<double>(n - m)) * std::sqrt(avg);
    }
    return total * total;
}

//---------------------------------------------------------------------------//

namespace {

double checked(double v, const char* what)
{
    if (!std::isfinite(v) || v < 0.0)
        throw LawUnsuitableError(std::string("suppressive profile: quadrature failed for ") + what);
    return v;
}

SuppressiveRow discrete_row(const MarginalLaw& law, double K, SuppressiveRow row)
{
    auto atoms = law.atoms();
    double F = 0.0;
    for (const auto& [a, w] : atoms) {
        const double Fprev = F;
        F = std::min(1.0, F + w);
        const double p_max = std::pow(F, K) - std::pow(Fprev, K);
        const double p_min = std::pow(1.0 - Fprev, K) - std::pow(1.0 - F, K);
        if (a >= row.M)
            row.upper_moment += a * a * a * p_max;
        if (a <= row.delta)
            row.lower_moment += p_min / (a * a * a);
    }
    return row;
}

SuppressiveRow continuous_row(const MarginalLaw& law, double K, SuppressiveRow row)
{
    const auto [lo, hi] = law.effective_support();
    auto splits_in = [&](double a, double b) {
        std::vector<double> s;
        for (double x : law.breakpoints())
            if (x > a && x < b)
                s.push_back(x);
        return s;
    };
    // P(max <= t) = F^K and P(min <= t) = 1 - (1 - F)^K.
    auto tail_max = [&](double t) {
        const double F = law.cdf(t);
        return F <= 0.0 ? 1.0 : -std::expm1(K * std::log(F));
    };
    auto cdf_min = [&](double t) {
        const double F = law.cdf(t);
        return F >= 1.0 ? 1.0 : -std::expm1(K * std::log1p(-F));
    };
    if (row.M < hi) {
        const double s = std::max(row.M, lo);
        double v = s * s * s * tail_max(s);
        v += integrate([&](double t) { return 3.0 * t * t * tail_max(t); }, s, hi, splits_in(s, hi));
        row.upper_moment = checked(v, "the upper tail");
    }
    if (row.delta > lo) {
        const double e = std::min(row.delta, hi);
        double v = cdf_min(e) / (e * e * e);
        v += integrate([&](double t) { return 3.0 * cdf_min(t) / (t * t * t * t); }, lo, e,
                       splits_in(lo, e));
        row.lower_moment = checked(v, "the lower tail");
    }
    return row;
}

}  // namespace

SuppressiveProfile suppressive_profile(const MarginalLaw& law, int dim, double beta_prime,
                                       double gamma_prime, int n_max)
{
    if (dim < 1 || n_max < 0 || !(beta_prime > 0.0) || !(gamma_prime > 0.0))
        throw PreconditionError("suppressive_profile: need dim >= 1, n_max >= 0, positive exponents");
    SuppressiveProfile p;
    p.beta_prime = beta_prime;
    p.gamma_prime = gamma_prime;
    p.dim = dim;
    std::vector<double> scaled;
    for (int n = 0; n <= n_max; ++n) {
        SuppressiveRow row;
        row.n = n;
        row.delta = std::pow(n + 1.0, -gamma_prime);
        row.M = std::pow(n + 1.0, beta_prime);
        const double K = std::pow(3.0, static_cast<double>(n * dim));
        row = law.is_discrete() ? discrete_row(law, K, row) : continuous_row(law, K, row);
        p.rows.push_back(row);
        scaled.push_back(row.moment() * std::exp(static_cast<double>(n)));
        p.L = std::max(p.L, scaled.back());
    }
    p.consistent = n_max < 1 || scaled[n_max] <= scaled[n_max - 1];
    return p;
}

TruncatedMomentMc truncated_moment_mc(const MarginalLaw& law, int dim, int n, double delta,
                                      double M, std::int64_t samples, std::uint64_t seed)
{
    if (samples < 2)
        throw PreconditionError("truncated_moment_mc: need at least 2 samples");
    const std::int64_t K = [&] {
        std::int64_t k = 1;
        for (int i = 0; i < dim; ++i)
            k *= pow3(n);
        return k;
    }();
    CompensatedSum s, s2;
    for (std::int64_t i = 0; i < samples; ++i) {
        SplitMix rng(sample_seed(seed, static_cast<std::uint64_t>(i)));
        double mx = 0.0, mn = std::numeric_limits<double>::infinity();
        for (std::int64_t k = 0; k < K; ++k) {
            const double b = law.sample(rng.uniform());
            mx = std::max(mx, b);
            mn = std::min(mn, b);
        }
        double v = 0.0;
        if (mx >= M)
            v += mx * mx * mx;
        if (mn <= delta)
            v += 1.0 / (mn * mn * mn);
        s.add(v);
        s2.add(v * v);
    }
    const auto ns = static_cast<double>(samples);
    TruncatedMomentMc r;
    r.mean = s.value() / ns;
    r.se = std::sqrt(std::max(0.0, (s2.value() - ns * r.mean * r.mean) / (ns - 1.0)) / ns);
    return r;
}

//---------------------------------------------------------------------------//

ConvergenceReport convergence_study(const MarginalLaw& law, int dim, const std::vector<int>& n_range,
                                    int N, int res, std::uint64_t master_seed,
                                    const ConvergenceOptions& opts)
{
    if (n_range.empty() || !std::is_sorted(n_range.begin(), n_range.end()) ||
        std::adjacent_find(n_range.begin(), n_range.end()) != n_range.end())
        throw PreconditionError("convergence_study: n_range must be strictly ascending");
    ConvergenceReport r;
    for (int n : n_range)
        r.studies.push_back(run_scale_study(law, dim, n, N, res, master_seed, opts.study));

    if (opts.closed_form_reference && law.has_closed_form_effective(dim)) {
        r.abar_ref = law.closed_form_effective(dim) * Mat::Identity(dim, dim);
        r.reference = "closed_form";
    } else {
        r.abar_ref = symmetrize(r.studies.back().mean_a);
        r.reference = "largest_scale";
    }
    for (auto& s : r.studies) {
        set_reference(s, r.abar_ref);
        if (opts.with_omega)
            attach_omega(s, r.abar_ref, opts.study);
    }

    r.strictly_decreasing = true;
    for (std::size_t k = 0; k < r.studies.size(); ++k) {
        const auto& s = r.studies[k];
        ConvergenceRow row;
        row.n = s.n;
        row.sq_error = s.sq_error;
        row.sq_error_se = s.sq_error_se;
        row.tau = kNaN;
        row.drop_over_2se = kNaN;
        row.omega_mean = s.omega_mean();
        if (k + 1 < r.studies.size()) {
            const auto& s1 = r.studies[k + 1];
            if (s1.n == s.n + 1)
                row.tau = estimate_tau(s, s1).tau;
            auto e0 = per_sample_sq_error(s, r.abar_ref), e1 = per_sample_sq_error(s1, r.abar_ref);
            std::vector<double> diff(e0.size());
            for (std::size_t i = 0; i < diff.size(); ++i)
                diff[i] = e0[i] - e1[i];
            auto m = moments(diff);
            row.drop_over_2se = m.se > 0.0 ? m.mean / (2.0 * m.se) : (m.mean > 0.0 ? std::numeric_limits<double>::infinity() : 0.0);
            r.strictly_decreasing = r.strictly_decreasing && row.drop_over_2se > 1.0;
        }
        if (opts.discretization_probe) {
            const auto cube = TriadicCube::centered(s.n, dim);
            auto field = sample_field(law, sample_seed(master_seed, 0), cube);
            const Mat fine = CellSolver(field, cube, 2 * res, opts.study.solver).matrices().a_U;
            row.discretization = operator_norm(s.a_samples[0] - fine);
        }
        r.rows.push_back(row);
    }
    r.coupled = true;

    const double lo = 1.0 / law.beta() + 1.0 / law.gamma();
    r.alpha = lo < 1.0 / 3.0 ? 0.5 * (lo + 1.0 / 3.0) : kNaN;
    std::vector<double> xs, xe, xp, y;
    for (const auto& row : r.rows) {
        if (!(row.sq_error > 0.0))
            continue;
        y.push_back(std::log(row.sq_error));
        xs.push_back(std::isfinite(r.alpha) ? std::pow(row.n, 1.0 - 3.0 * r.alpha) : kNaN);
        xe.push_back(row.n);
        xp.push_back(std::log(row.n + 1.0));
    }
    if (std::isfinite(r.alpha))
        r.fit_stretched = fit_line(xs, y);
    r.fit_exponential = fit_line(xe, y);
    r.fit_power = fit_line(xp, y);
    return r;
}

//---------------------------------------------------------------------------//

std::vector<MonotonicityRow> monotonicity_rows(const std::vector<ScaleStudy>& studies)
{
    std::vector<MonotonicityRow> out;
    if (studies.size() < 2)
        return out;
    const int d = studies.front().dim;
    std::vector<std::pair<Vec, Vec>> probes;
    {
        Vec e1 = Vec::Zero(d);
        e1[0] = 1.0;
        Vec diag = Vec::Ones(d) / std::sqrt(static_cast<double>(d));
        Vec mixed = Vec::Zero(d);
        for (int i = 0; i < d; ++i)
            mixed[i] = (i % 2 ? -0.5 : 1.0);
        mixed.normalize();
        probes = {{e1, e1}, {diag, 2.0 * diag}, {mixed, e1}};
    }
    for (std::size_t k = 0; k + 1 < studies.size(); ++k) {
        const auto& s0 = studies[k];
        const auto& s1 = studies[k + 1];
        const bool coupled = same_samples(s0, s1);
        for (std::size_t pi = 0; pi < probes.size(); ++pi) {
            const auto& [p, q] = probes[pi];
            auto values = [&](const ScaleStudy& s, int which) {
                std::vector<double> v(s.a_samples.size());
                for (std::size_t i = 0; i < v.size(); ++i) {
                    const double mu = 0.5 * p.dot(s.a_samples[i] * p);
                    const double mus = 0.5 * q.dot(s.a_star_inv_samples[i] * q);
                    v[i] = which == 0 ? mu : (which == 1 ? mus : mu + mus - p.dot(q));
                }
                return v;
            };
            const char* names[] = {"mu", "mu_star", "J"};
            for (int w = 0; w < 3; ++w) {
                auto v0 = values(s0, w), v1 = values(s1, w);
                MonotonicityRow row;
                row.n = s0.n;
                row.quantity = names[w];
                row.probe = static_cast<int>(pi);
                row.value_n = moments(v0).mean;
                row.value_n1 = moments(v1).mean;
                if (coupled) {
                    std::vector<double> diff(v0.size());
                    for (std::size_t i = 0; i < diff.size(); ++i)
                        diff[i] = v0[i] - v1[i];
                    row.se = moments(diff).se;
                } else {
                    row.se = std::hypot(moments(v0).se, moments(v1).se);
                }
                row.holds = row.value_n1 <= row.value_n + 2.0 * row.se + 1e-12 * std::abs(row.value_n);
                out.push_back(row);
            }
        }
    }
    return out;
}

//---------------------------------------------------------------------------//

namespace {

void matrix_header(std::ostream& os, const char* prefix, int d)
{
    for (int i = 1; i <= d; ++i)
        for (int j = 1; j <= d; ++j)
            os << ',' << prefix << '_' << i << j;
}

void matrix_cells(std::ostream& os, const Mat& m)
{
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j)
            os << ',' << num(m(i, j));
}

}  // namespace

std::string studies_csv(const std::vector<ScaleStudy>& studies, const std::vector<double>& tau,
                        bool timings)
{
    std::ostringstream os;
    const int d = studies.empty() ? 1 : studies.front().dim;
    os << "n,N,res";
    matrix_header(os, "a", d);
    matrix_header(os, "se_a", d);
    matrix_header(os, "abar", d);
    os << ",tau,omega_mean,sq_error,sq_error_se,wall_ms\n";
    for (std::size_t k = 0; k < studies.size(); ++k) {
        const auto& s = studies[k];
        os << s.n << ',' << s.N << ',' << s.res;
        matrix_cells(os, s.mean_a);
        matrix_cells(os, s.se_a);
        matrix_cells(os, s.abar_n);
        os << ',' << num(k < tau.size() ? tau[k] : kNaN) << ',' << num(s.omega_mean()) << ','
           << num(s.abar_ref ? s.sq_error : kNaN) << ',' << num(s.abar_ref ? s.sq_error_se : kNaN)
           << ',' << num(timings ? s.wall_ms : 0.0) << '\n';
    }
    return os.str();
}

std::string convergence_csv(const ConvergenceReport& r)
{
    std::ostringstream os;
    os << "n,N,res,sq_error,sq_error_se,drop_over_2se,tau,omega_mean,discretization\n";
    for (std::size_t k = 0; k < r.rows.size(); ++k) {
        const auto& row = r.rows[k];
        const auto& s = r.studies[k];
        os << row.n << ',' << s.N << ',' << s.res << ',' << num(row.sq_error) << ','
           << num(row.sq_error_se) << ',' << num(row.drop_over_2se) << ',' << num(row.tau) << ','
           << num(row.omega_mean) << ',' << num(row.discretization < 0.0 ? kNaN : row.discretization)
           << '\n';
    }
    return os.str();
}

namespace {

nlohmann::json finite_or_null(double v)
{
    return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr);
}

}  // namespace

void to_json(nlohmann::json& j, const ScaleStudy& s)
{
    j = {{"law", s.law.to_spec()},
         {"dim", s.dim},
         {"n", s.n},
         {"N", s.N},
         {"res", s.res},
         {"master_seed", s.master_seed},
         {"mean_a", rows_of(s.mean_a)},
         {"se_a", rows_of(s.se_a)},
         {"mean_a_star_inv", rows_of(s.mean_a_star_inv)},
         {"se_a_star_inv", rows_of(s.se_a_star_inv)},
         {"abar_n", rows_of(s.abar_n)},
         {"mean_Lam", s.mean_Lam},
         {"mean_inv_lam", s.mean_inv_lam},
         {"omega_mean", finite_or_null(s.omega_mean())}};
    if (s.abar_ref) {
        j["abar_ref"] = rows_of(*s.abar_ref);
        j["sq_error"] = s.sq_error;
        j["sq_error_se"] = s.sq_error_se;
    }
}

void to_json(nlohmann::json& j, const AbarEstimate& a)
{
    j = {{"n", a.n},
         {"abar", rows_of(a.abar)},
         {"se", rows_of(a.se)},
         {"lower", a.lower},
         {"upper", a.upper},
         {"lower_refined", a.lower_refined},
         {"upper_refined", a.upper_refined},
         {"strictly_inside", a.strictly_inside}};
}

void to_json(nlohmann::json& j, const TauEstimate& t)
{
    j = {{"n", t.n},
         {"tau", t.tau},
         {"mu_part_raw", t.mu_part_raw},
         {"mu_star_part_raw", t.mu_star_part_raw},
         {"clamped", t.clamped},
         {"se", t.se},
         {"coupled", t.coupled}};
}

void to_json(nlohmann::json& j, const SuppressiveProfile& p)
{
    auto rows = nlohmann::json::array();
    for (const auto& r : p.rows)
        rows.push_back({{"n", r.n},
                        {"delta", r.delta},
                        {"M", r.M},
                        {"upper_moment", r.upper_moment},
                        {"lower_moment", r.lower_moment},
                        {"moment", r.moment()}});
    j = {{"beta_prime", p.beta_prime},
         {"gamma_prime", p.gamma_prime},
         {"dim", p.dim},
         {"rows", rows},
         {"L", p.L},
         {"consistent", p.consistent}};
}

void to_json(nlohmann::json& j, const ConvergenceReport& r)
{
    auto rows = nlohmann::json::array();
    for (const auto& row : r.rows)
        rows.push_back({{"n", row.n},
                        {"sq_error", row.sq_error},
                        {"sq_error_se", row.sq_error_se},
                        {"drop_over_2se", finite_or_null(row.drop_over_2se)},
                        {"tau", finite_or_null(row.tau)},
                        {"omega_mean", finite_or_null(row.omega_mean)},
                        {"discretization", row.discretization < 0.0 ? nlohmann::json(nullptr)
                                                                    : nlohmann::json(row.discretization)}});
    auto fit = [](const LogFit& f) {
        return nlohmann::json{{"slope", f.slope}, {"intercept", f.intercept}, {"r2", f.r2}};
    };
    j = {{"abar_ref", rows_of(r.abar_ref)},
         {"reference", r.reference},
         {"coupled", r.coupled},
         {"strictly_decreasing", r.strictly_decreasing},
         {"alpha", finite_or_null(r.alpha)},
         {"fit_stretched", fit(r.fit_stretched)},
         {"fit_exponential", fit(r.fit_exponential)},
         {"fit_power", fit(r.fit_power)},
         {"rows", rows},
         {"studies", r.studies}};
}

}  // namespace homog
