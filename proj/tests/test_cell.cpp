#include <cmath>

#include "doctest.h"
#include "homog/cell.hpp"
#include "homog/error.hpp"
#include "oracles.hpp"

using namespace homog;

namespace {

const MarginalLaw kTwoPhase = MarginalLaw::two_point(1.0, 4.0, 0.5);

Vec vec(std::initializer_list<double> v)
{
    Vec out(static_cast<Eigen::Index>(v.size()));
    Eigen::Index i = 0;
    for (double x : v)
        out[i++] = x;
    return out;
}

// box_0 in 1-d with a = 1 on (-1/2, 0) and a = 4 on (0, 1/2).
CellSolver split_unit_interval(int elements)
{
    double lo[1] = {-0.5};
    int counts[1] = {elements};
    auto g = Grid::on_box(lo, counts, 1.0 / elements);
    ElementCoefficients c{1, {}};
    for (std::size_t e = 0; e < g.element_count(); ++e)
        c.data.push_back(g.element_center(e)[0] < 0.0 ? 1.0 : 4.0);
    return CellSolver(g, c);
}

double harmonic_mean(const CheckerboardField& f, const TriadicCube& u)
{
    double s = 0.0;
    std::size_t n = 0;
    for (const auto& c : u.subcubes(0)) {
        s += 1.0 / f.cell_value(c.offset);
        ++n;
    }
    return static_cast<double>(n) / s;
}

Vec random_ball(SplitMix& rng, int d)
{
    Vec v(d);
    do {
        for (int i = 0; i < d; ++i)
            v[i] = 2.0 * rng.uniform() - 1.0;
    } while (v.norm() > 1.0);
    return v;
}

}  // namespace

TEST_CASE("identity coefficient: mu, mu_*, J")
{
    auto f = sample_field(MarginalLaw::constant(1.0), 1, TriadicCube::centered(1, 2));
    CellSolver s(f, TriadicCube::centered(1, 2), 4);
    const Vec e1 = vec({1, 0});
    CHECK(s.mu(e1).value == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(s.mu_star(e1).value == doctest::Approx(0.5).epsilon(1e-10));
    CHECK(std::abs(s.J(e1, e1)) < 1e-10);
    CHECK(s.J(e1, Vec::Zero(2)) == doctest::Approx(0.5).epsilon(1e-12));
    auto v = s.mu(e1).optimizer.u;
    auto l = GridFunction::affine(s.grid(), std::vector<double>{1, 0});
    CHECK(oracle::max_diff(v.values, l.values) < 1e-10);
}

TEST_CASE("1-d split interval closed forms")
{
    auto s = split_unit_interval(8);
    const Vec one = vec({1});
    CHECK(s.mu(one).value == doctest::Approx(0.8).epsilon(1e-10));
    CHECK(s.mu_star(one).value == doctest::Approx(0.3125).epsilon(1e-10));
    CHECK(std::abs(s.J(one, vec({1.6}))) < 1e-8);
    auto r = s.matrices();
    CHECK(r.a_U(0, 0) == doctest::Approx(1.6).epsilon(1e-10));
    CHECK(r.a_star_U(0, 0) == doctest::Approx(1.6).epsilon(1e-10));
    CHECK(r.lam == 1.0);
    CHECK(r.Lam == 4.0);
}

TEST_CASE("1-d exactness: a = a_* = harmonic mean")
{
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        auto f = sample_field(kTwoPhase, seed, TriadicCube::centered(2, 1));
        auto r = matrices(f, TriadicCube::centered(2, 1), 4);
        const double hm = harmonic_mean(f, TriadicCube::centered(2, 1));
        CHECK(r.a_U(0, 0) == doctest::Approx(hm).epsilon(1e-8));
        CHECK(r.a_star_U(0, 0) == doctest::Approx(hm).epsilon(1e-8));
    }
}

TEST_CASE("2-d mu agrees with the dense oracle energy")
{
    auto cube = TriadicCube::centered(1, 2);
    for (std::uint64_t seed = 1; seed <= 3; ++seed) {
        auto f = sample_field(kTwoPhase, seed, cube);
        CellSolver s(f, cube, 4);
        const Vec p = vec({0.6, 0.8});
        auto m = s.mu(p);
        Mat k = oracle::dense_stiffness(s.grid(), oracle::element_values(s.grid(), f));
        auto lp = GridFunction::affine(s.grid(), std::vector<double>{0.6, 0.8});
        auto u = oracle::dense_dirichlet(k, lp, std::vector<double>(lp.size(), 0.0));
        Vec uv = Eigen::Map<Vec>(u.data(), static_cast<Eigen::Index>(u.size()));
        const double e = 0.5 * uv.dot(k * uv) / s.volume();
        CHECK(std::abs(m.value - e) < 1e-8);
    }
}

TEST_CASE("duality floor and ellipticity bounds on random probes")
{
    SplitMix rng(5);
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        auto f = sample_field(MarginalLaw::weibull_tail(6, 6, 1, 0.5), seed, TriadicCube::centered(1, 2));
        CellSolver s(f, TriadicCube::centered(1, 2), 4);
        for (int t = 0; t < 20; ++t) {
            Vec p = random_ball(rng, 2), q = random_ball(rng, 2);
            const double m = s.mu(p).value, ms = s.mu_star(q).value;
            CHECK(m + ms - p.dot(q) >= -1e-8);
            CHECK(m >= 0.5 * s.lam() * p.squaredNorm() - 1e-10);
            CHECK(m <= 0.5 * s.Lam() * p.squaredNorm() + 1e-10);
            CHECK(ms >= q.squaredNorm() / (2 * s.Lam()) - 1e-10);
            CHECK(ms <= q.squaredNorm() / (2 * s.lam()) + 1e-10);
        }
    }
}

TEST_CASE("J is a quadratic form and equals half the energy of its maximizer")
{
    auto f = sample_field(kTwoPhase, 11, TriadicCube::centered(1, 2));
    CellSolver s(f, TriadicCube::centered(1, 2), 4);
    const Vec p = vec({0.3, -0.4}), q = vec({0.5, 0.1});
    const double j = s.J(p, q);
    for (double t : {-2.0, 0.5, 3.0})
        CHECK(s.J(t * p, t * q) == doctest::Approx(t * t * j).epsilon(1e-10));
    auto v = s.j_maximizer(p, q);
    CHECK(0.5 * s.energy(v.u, v.u) == doctest::Approx(j).epsilon(1e-6));

    // Gradient bound.
    const double g2 = mean_gradient_energy(v.u);
    CHECK(g2 <= s.Lam() / s.lam() * p.squaredNorm() + q.squaredNorm() / (s.lam() * s.lam()) +
                    p.norm() * q.norm() / s.lam() + 1e-6);
}

TEST_CASE("j_maximizer: zero, linearity, normalization")
{
    auto f = sample_field(kTwoPhase, 2, TriadicCube::centered(1, 2));
    CellSolver s(f, TriadicCube::centered(1, 2), 4);
    auto zero = s.j_maximizer(Vec::Zero(2), Vec::Zero(2));
    CHECK(zero.u.max_abs() == 0.0);

    const Vec p1 = vec({1, 0}), p2 = vec({0.2, -0.7}), q = vec({0.4, 0.4});
    auto lhs = s.j_maximizer(p1 + p2, q).u;
    auto rhs = s.j_maximizer(p1, q).u + s.j_maximizer(p2, Vec::Zero(2)).u;
    CHECK(oracle::max_diff(lhs.values, rhs.values) < 1e-8);

    CHECK(std::abs(s.j_maximizer(Vec::Zero(2), q).u.mean()) < 1e-12);
    auto vp = s.dirichlet_minimizer(p2);
    auto vp0 = s.j_maximizer(p2, Vec::Zero(2)).u;
    for (std::size_t k = 0; k < vp.size(); ++k)
        CHECK(vp0[k] == -vp[k]);

    auto id = sample_field(MarginalLaw::constant(1.0), 1, TriadicCube::centered(1, 2));
    CellSolver si(id, TriadicCube::centered(1, 2), 4);
    auto u = si.j_maximizer(Vec::Zero(2), vec({1, 0})).u;
    auto l = GridFunction::affine(si.grid(), std::vector<double>{1, 0});
    CHECK(oracle::max_diff(u.values, l.values) < 1e-8);
}

TEST_CASE("matrices: constant field, ordering, cross-checks, JSON")
{
    auto c = sample_field(MarginalLaw::constant(2.5), 0, TriadicCube::centered(1, 2));
    auto rc = matrices(c, TriadicCube::centered(1, 2), 4);
    CHECK((rc.a_U - 2.5 * Mat::Identity(2, 2)).norm() < 1e-10);
    CHECK((rc.a_star_U - 2.5 * Mat::Identity(2, 2)).norm() < 1e-8);

    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        auto f = sample_field(kTwoPhase, seed, TriadicCube::centered(1, 2));
        auto r = matrices(f, TriadicCube::centered(1, 2), 4);
        CHECK(r.ordering_holds());
        CHECK(asymmetry(r.a_U) < 1e-12);
        CHECK(asymmetry(r.a_star_U) < 1e-12);
        CHECK(r.rq3_residual < 1e-6);
        CHECK(r.rq4_residual < 1e-6);
        const Vec p = vec({0.5, -0.5}), q = vec({0.2, 0.9});
        CellSolver s(f, TriadicCube::centered(1, 2), 4);
        CHECK(r.J(p, q) == doctest::Approx(s.J(p, q)).epsilon(1e-8));
    }
    nlohmann::json j = rc;
    CHECK(j.at("res") == 4);
    CHECK(j.at("a").size() == 2);
    CHECK(j.at("cube").at("scale") == 1);
    CHECK(j.contains("a_star"));
    CHECK(j.contains("lam"));
    CHECK(j.contains("Lam"));
}

TEST_CASE("laminate: a(box_2) close to diag(1.6, 2.5)")
{
    auto g = Grid::on_cube(TriadicCube::centered(2, 2), 8);
    ElementCoefficients c{2, {}};
    for (std::size_t e = 0; e < g.element_count(); ++e) {
        const auto x = g.element_center(e);
        // Each unit cell holds a column of 1 (left half) and a column of 4.
        const double frac = x[0] + 0.5 - std::floor(x[0] + 0.5);
        const double b = frac < 0.5 ? 1.0 : 4.0;
        c.data.insert(c.data.end(), {b, 0.0, 0.0, b});
    }
    auto r = CellSolver(g, c).matrices();
    CHECK(r.a_U(0, 0) == doctest::Approx(1.6).epsilon(0.02));
    CHECK(r.a_U(1, 1) == doctest::Approx(2.5).epsilon(0.02));
    CHECK(std::abs(r.a_U(0, 1)) < 1e-8);
}

TEST_CASE("lemma diagnostics: constant field")
{
    auto f = sample_field(MarginalLaw::constant(1.0), 0, TriadicCube::centered(1, 2));
    auto d = verify_lemma_properties(f, TriadicCube::centered(1, 2), 4);
    REQUIRE(d.probes.size() == 6);
    for (const auto& p : d.probes) {
        CHECK(std::abs(p.slack) < 1e-9);
        CHECK(std::abs(p.qr2_lhs) < 1e-9);
        CHECK(std::abs(p.qr2_rhs) < 1e-9);
    }
    CHECK(d.distance_holds());
}

TEST_CASE("lemma diagnostics: random 2-d sample, seed 7")
{
    auto f = sample_field(kTwoPhase, 7, TriadicCube::centered(1, 2));
    auto d = verify_lemma_properties(f, TriadicCube::centered(1, 2), 4);
    CHECK(d.min_slack() >= -1e-6);
    CHECK(d.max_qr2_residual() <= 1e-5);
    CHECK(d.max_fv_residual() <= 1e-6);
    CHECK(d.max_Jq_residual() <= 1e-6);
    CHECK(d.harmonic_basis_size == 48);
    CHECK(d.distance_holds());
    CHECK(d.distance.front().lhs == 0.0);
    CHECK(d.distance.front().rhs >= 0.0);
    CHECK_THROWS_AS(verify_lemma_properties(f, TriadicCube::centered(0, 2), 4), PreconditionError);
}

TEST_CASE("uncovered cube is a coverage error")
{
    auto f = sample_field(kTwoPhase, 7, TriadicCube::centered(1, 2));
    CHECK_THROWS_AS(matrices(f, TriadicCube::centered(2, 2), 4), CoverageError);
}
