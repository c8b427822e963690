#include <cmath>
#include <cstdlib>

#include "doctest.h"
#include "homog/error.hpp"
#include "homog/parallel.hpp"
#include "homog/stats.hpp"
#include "oracles.hpp"

using namespace homog;

namespace {

const MarginalLaw kTwoPhase = MarginalLaw::two_point(1.0, 4.0, 0.5);

bool bit_equal(const Mat& a, const Mat& b)
{
    if (a.rows() != b.rows() || a.cols() != b.cols())
        return false;
    for (Eigen::Index i = 0; i < a.size(); ++i)
        if (std::memcmp(a.data() + i, b.data() + i, sizeof(double)) != 0)
            return false;
    return true;
}

}  // namespace

TEST_CASE("constant law: exact coefficients, zero error, zero tau")
{
    auto law = MarginalLaw::constant(3.0);
    std::vector<ScaleStudy> studies;
    for (int n = 0; n <= 2; ++n)
        studies.push_back(run_scale_study(law, 2, n, 4, 2, 9));
    for (const auto& s : studies) {
        CHECK((s.mean_a - 3.0 * Mat::Identity(2, 2)).cwiseAbs().maxCoeff() < 1e-10);
        CHECK((s.abar_n - 3.0 * Mat::Identity(2, 2)).cwiseAbs().maxCoeff() < 1e-10);
        CHECK(s.se_a.cwiseAbs().maxCoeff() < 1e-10);
    }
    auto t = estimate_tau(studies[0], studies[1]);
    CHECK(t.tau < 1e-10);
    CHECK(t.coupled);

    auto e = estimate_abar(studies);
    CHECK(e.lower == doctest::Approx(3.0));
    CHECK(e.upper == doctest::Approx(3.0));
    CHECK(e.abar(0, 0) == doctest::Approx(3.0));
    CHECK_FALSE(e.strictly_inside);

    auto f = sample_field(law, 1, TriadicCube::centered(1, 2));
    CHECK(compute_omega(f, 1, 3.0 * Mat::Identity(2, 2), 2) < 1e-12);
}

TEST_CASE("preconditions and error propagation")
{
    CHECK_THROWS_AS(run_scale_study(kTwoPhase, 2, 1, 1, 2, 1), PreconditionError);
    StudyOptions opts;
    opts.solver.max_iterations = 1;
    try {
        run_scale_study(kTwoPhase, 2, 1, 3, 4, 1, opts);
        FAIL("expected a solver error");
    } catch (const SolverError& e) {
        CHECK(std::string(e.what()).find("sample 0") != std::string::npos);
    }
    CHECK_THROWS_AS(convergence_study(kTwoPhase, 1, {2, 1}, 4, 2, 1), PreconditionError);
}

TEST_CASE("1-d two-phase: abar_n = 1.6 and the bracket")
{
    std::vector<ScaleStudy> studies;
    for (int n = 0; n <= 2; ++n)
        studies.push_back(run_scale_study(kTwoPhase, 1, n, 200, 2, 21));
    for (const auto& s : studies) {
        const double a = s.abar_n(0, 0);
        const double se = s.se_a_star_inv(0, 0) * a * a;
        CHECK(std::abs(a - 1.6) <= 3.0 * se);
        // In 1-d the discrete a and a_* are both the harmonic mean.
        for (std::size_t i = 0; i < s.a_samples.size(); ++i)
            CHECK(s.a_samples[i](0, 0) * s.a_star_inv_samples[i](0, 0) == doctest::Approx(1.0));
    }
    auto e = estimate_abar(studies);
    CHECK(e.lower_refined == doctest::Approx(1.6));
    CHECK(e.upper_refined == doctest::Approx(2.5));
    CHECK(e.abar(0, 0) >= 1.6);

    for (int n = 0; n < 2; ++n) {
        auto t = estimate_tau(studies[n], studies[n + 1]);
        CHECK(t.mu_part_raw >= -3.0 * t.se);
        CHECK(t.tau >= 0.0);
    }
}

TEST_CASE("1-d convergence matches the binomial closed form and the delta method")
{
    auto r = convergence_study(kTwoPhase, 1, {0, 1, 2, 3, 4}, 200, 1, 5);
    CHECK(r.reference == "closed_form");
    CHECK(r.abar_ref(0, 0) == doctest::Approx(1.6));
    for (const auto& row : r.rows) {
        const long K = pow3(row.n);
        const double exact = oracle::harmonic_mean_sq_error(1.0, 4.0, 0.5, K, 1.6);
        CHECK(std::abs(row.sq_error - exact) <= 3.0 * row.sq_error_se);
        if (row.n >= 3) {
            const double delta = oracle::harmonic_mean_delta(1.0, 4.0, 0.5, K);
            CHECK(std::abs(row.sq_error - delta) <= 3.0 * row.sq_error_se);
        }
    }
    CHECK(r.strictly_decreasing);
    CHECK(r.fit_exponential.slope < 0.0);
    CHECK(r.fit_stretched.slope < 0.0);
    CHECK(oracle::harmonic_mean_delta(1.0, 4.0, 0.5, 1) == doctest::Approx(0.9216));
}

TEST_CASE("2-d study: monotonicity, bracket, determinism across threads")
{
    std::vector<ScaleStudy> studies;
    for (int n = 0; n <= 2; ++n)
        studies.push_back(run_scale_study(kTwoPhase, 2, n, 24, 2, 33));
    for (const auto& row : monotonicity_rows(studies)) {
        INFO(row.quantity << " n=" << row.n << " probe=" << row.probe);
        CHECK(row.holds);
    }
    auto e = estimate_abar(studies);
    CHECK(e.strictly_inside);
    CHECK(psd_leq(studies[0].abar_n, studies[2].abar_n, 1e-2));

    StudyOptions four;
    four.threads = 4;
    auto s4 = run_scale_study(kTwoPhase, 2, 2, 24, 2, 33, four);
    CHECK(bit_equal(s4.mean_a, studies[2].mean_a));
    CHECK(bit_equal(s4.mean_a_star_inv, studies[2].mean_a_star_inv));
    CHECK(bit_equal(s4.se_a, studies[2].se_a));

    // A study far outside its bracket is rejected.
    auto fake = studies;
    fake.back().mean_a = 10.0 * Mat::Identity(2, 2);
    CHECK_THROWS_AS(estimate_abar(fake), StudyInconsistencyError);
}

TEST_CASE("Omega")
{
    SUBCASE("identity field against 2 Id")
    {
        auto f = sample_field(MarginalLaw::constant(1.0), 1, TriadicCube::centered(1, 2));
        const double w = compute_omega(f, 1, 2.0 * Mat::Identity(2, 2), 2);
        CHECK(std::abs(w - 16.0 / 9.0) <= 1e-13);
        CHECK(compute_omega(f, 1, Mat::Identity(2, 2), 2) < 1e-12);
    }
    SUBCASE("random 2-d sample against the brute-force loop order")
    {
        auto f = sample_field(kTwoPhase, 17, TriadicCube::centered(2, 2));
        const Mat ref = 2.0 * Mat::Identity(2, 2);
        const double w = compute_omega(f, 2, ref, 2);
        CHECK(std::abs(w - oracle::brute_omega(f, 2, ref, 2)) <= 1e-10 * std::max(1.0, w));
    }
    SUBCASE("reference equal to the sample's own a(box_n)")
    {
        auto f = sample_field(kTwoPhase, 4, TriadicCube::centered(1, 2));
        const Mat own = matrices(f, TriadicCube::centered(1, 2), 2).a_U;
        auto levels = omega_levels(f, 1, own, 2);
        CHECK(levels.back() == doctest::Approx(0.0).epsilon(1e-12));
        CHECK(levels.front() > 0.0);
    }
    CHECK_THROWS_AS(compute_omega(sample_field(kTwoPhase, 1, TriadicCube::centered(0, 2)), 1,
                                  Mat::Identity(2, 2), 2),
                    CoverageError);
}

TEST_CASE("suppressive profile")
{
    SUBCASE("sequences")
    {
        auto p = suppressive_profile(kTwoPhase, 2, 0.5, 0.5, 4);
        CHECK(p.rows[0].delta == 1.0);
        CHECK(p.rows[0].M == 1.0);
        for (std::size_t i = 1; i < p.rows.size(); ++i) {
            CHECK(p.rows[i].delta < p.rows[i - 1].delta);
            CHECK(p.rows[i].M > p.rows[i - 1].M);
        }
    }
    SUBCASE("constant law vanishes beyond n = 0")
    {
        auto p = suppressive_profile(MarginalLaw::constant(1.0), 2, 0.5, 0.5, 3);
        for (const auto& r : p.rows)
            if (r.n >= 1)
                CHECK(r.moment() == 0.0);
    }
    SUBCASE("bounded law vanishes once M_n exceeds the support")
    {
        auto p = suppressive_profile(kTwoPhase, 2, 1.5, 0.5, 4);
        for (const auto& r : p.rows)
            if (r.n >= 2)
                CHECK(r.moment() == 0.0);
        CHECK(p.rows[1].moment() > 0.0);
        auto q = suppressive_profile(MarginalLaw::bounded_log_uniform(1.0), 1, 1.5, 1.5, 3);
        for (const auto& r : q.rows)
            if (r.n >= 2)
                CHECK(r.moment() == 0.0);
    }
    SUBCASE("discrete law: quadrature against Monte Carlo")
    {
        auto p = suppressive_profile(kTwoPhase, 2, 0.5, 0.5, 1);
        const auto& r = p.rows[1];
        auto mc = truncated_moment_mc(kTwoPhase, 2, 1, r.delta, r.M, 200000, 7);
        CHECK(std::abs(mc.mean - r.moment()) <= 3.0 * mc.se);
    }
    SUBCASE("weibull tails: quadrature against Monte Carlo")
    {
        auto law = MarginalLaw::weibull_tail(6.0, 6.0, 1.0, 1.0);
        auto p = suppressive_profile(law, 2, 0.25, 0.25, 3);
        const auto& r = p.rows[1];
        CHECK(r.upper_moment > 0.0);
        CHECK(r.lower_moment > 0.0);
        auto mc = truncated_moment_mc(law, 2, 1, r.delta, r.M, 200000, 8);
        CHECK(std::abs(mc.mean - r.moment()) <= 3.0 * mc.se);
        CHECK(p.L >= r.moment() * std::exp(1.0));
    }
}

TEST_CASE("thread budget resolution")
{
    CHECK(resolve_threads(3) == 3);
    ::setenv("HOMOG_THREADS", "5", 1);
    CHECK(resolve_threads(0) == 5);
    ::setenv("HOMOG_THREADS", "five", 1);
    CHECK(resolve_threads(0) == 1);
    ::unsetenv("HOMOG_THREADS");
    CHECK(resolve_threads(0) == 1);

    std::vector<int> out(100, 0);
    parallel_for(out.size(), 4, [&](std::size_t i) { out[i] = static_cast<int>(i * i); });
    for (std::size_t i = 0; i < out.size(); ++i)
        CHECK(out[i] == static_cast<int>(i * i));
    CHECK_THROWS_AS(parallel_for(10, 3,
                                 [](std::size_t i) {
                                     if (i == 7)
                                         throw ConfigError("seven");
                                 }),
                    ConfigError);
}

TEST_CASE("CSV and JSON output")
{
    std::vector<ScaleStudy> studies;
    for (int n = 0; n <= 1; ++n)
        studies.push_back(run_scale_study(kTwoPhase, 2, n, 3, 2, 1));
    auto csv = studies_csv(studies, {0.25}, false);
    CHECK(csv.rfind("n,N,res,a_11,a_12,a_21,a_22,se_a_11", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 3);
    CHECK(csv.find(",0\n") != std::string::npos);

    nlohmann::json j = studies[1];
    CHECK(j["n"] == 1);
    CHECK(j["mean_a"].size() == 2);
    CHECK(j["omega_mean"].is_null());

    auto r = convergence_study(kTwoPhase, 1, {0, 1}, 4, 1, 1);
    nlohmann::json jr = r;
    CHECK(jr["rows"].size() == 2);
    CHECK(convergence_csv(r).rfind("n,N,res,sq_error", 0) == 0);
}
