#include <cmath>
#include <numbers>

#include "doctest.h"
#include "homog/error.hpp"
#include "homog/norms.hpp"
#include "norm_probes.hpp"
#include "oracles.hpp"

using namespace homog;

namespace {

constexpr NormKind kAllKinds[] = {NormKind::L2_normalized, NormKind::H1_normalized,
                                  NormKind::Hminus1_underline, NormKind::Hminus1_hat};

GridFunction random_function(const Grid& g, std::uint64_t seed)
{
    SplitMix rng(seed);
    return GridFunction(g, oracle::random_vector(rng, static_cast<int>(g.node_count()), -1.0, 1.0));
}

GridFunction constant(const Grid& g, double c)
{
    GridFunction u(g);
    for (auto& x : u.values)
        x = c;
    return u;
}

}  // namespace

TEST_CASE("primal norms on simple functions")
{
    for (int d = 1; d <= 3; ++d) {
        auto g = Grid::on_cube(TriadicCube::centered(0, d), 3);
        auto one = constant(g, 1.0);
        CHECK(norm(one, NormKind::L2_normalized) == doctest::Approx(1.0).epsilon(1e-14));
        CHECK(norm(one, NormKind::H1_normalized) == doctest::Approx(1.0).epsilon(1e-14));
        std::vector<double> p(d, 0.0);
        p[0] = 1.0;
        auto l = GridFunction::affine(g, p);
        CHECK(std::sqrt(mean_gradient_energy(l)) == doctest::Approx(1.0).epsilon(1e-14));
        // avg x^2 over (-1/2, 1/2) is 1/12.
        CHECK(norm(l, NormKind::L2_normalized) == doctest::Approx(std::sqrt(1.0 / 12.0)).epsilon(1e-14));
    }
}

TEST_CASE("hat dual norm of constants")
{
    for (int d = 1; d <= 2; ++d) {
        auto g0 = Grid::on_cube(TriadicCube::centered(0, d), 4);
        CHECK(norm(constant(g0, 1.0), NormKind::Hminus1_hat) == doctest::Approx(1.0).epsilon(1e-6));
        // On box_1 the constant test function gives |U|^{1/d} = 3.
        auto g1 = Grid::on_cube(TriadicCube::centered(1, d), 2);
        CHECK(norm(constant(g1, 1.0), NormKind::Hminus1_hat) == doctest::Approx(3.0).epsilon(1e-6));
        CHECK(norm(constant(g1, 1.0), NormKind::Hminus1_underline) <
              norm(constant(g1, 1.0), NormKind::Hminus1_hat));
    }
}

TEST_CASE("dual norms match a dense Riesz solve")
{
    for (int d = 1; d <= 2; ++d) {
        auto g = Grid::on_cube(TriadicCube::centered(1, d), d == 1 ? 5 : 3);
        auto m = assemble_mass(g);
        for (std::uint64_t seed = 1; seed <= 3; ++seed) {
            auto u = random_function(g, seed * 31 + d);
            auto load = m.apply(u.values);
            CHECK(norm(u, NormKind::Hminus1_hat) ==
                  doctest::Approx(oracle::dense_dual_norm(g, load, false)).epsilon(1e-8));
            CHECK(norm(u, NormKind::Hminus1_underline) ==
                  doctest::Approx(oracle::dense_dual_norm(g, load, true)).epsilon(1e-8));

            // Gradient field: one load per component, squares add.
            auto loads = flux_loads(u, nullptr, Vec::Zero(d));
            double s = 0.0;
            for (const auto& c : loads)
                s += std::pow(oracle::dense_dual_norm(g, c, false), 2);
            CHECK(dual_norm_of_field(u, nullptr, Vec::Zero(d), NormKind::Hminus1_hat) ==
                  doctest::Approx(std::sqrt(s)).epsilon(1e-8));
        }
    }
    auto g = Grid::on_cube(TriadicCube::centered(0, 2), 2);
    CHECK_THROWS_AS(dual_norm_of_loads(g, {}, NormKind::L2_normalized), PreconditionError);
}

TEST_CASE("homogeneity of every norm kind")
{
    auto g = Grid::on_cube(TriadicCube::centered(1, 2), 2);
    auto u = random_function(g, 77);
    auto tu = u;
    tu *= -2.5;
    for (auto kind : kAllKinds)
        CHECK(norm(tu, kind) == doctest::Approx(2.5 * norm(u, kind)).epsilon(1e-10));
}

TEST_CASE("scaling laws between box_0 and box_1")
{
    // v(x) = u(x / 3) on box_1 has the same nodal values as u on box_0.
    for (int d = 1; d <= 2; ++d) {
        auto g0 = Grid::on_cube(TriadicCube::centered(0, d), 6);
        auto g1 = Grid::on_cube(TriadicCube::centered(1, d), 2);
        auto u = random_function(g0, 5 + d);
        GridFunction v(g1, u.values);
        CHECK(norm(v, NormKind::L2_normalized) ==
              doctest::Approx(norm(u, NormKind::L2_normalized)).epsilon(1e-10));
        CHECK(norm(v, NormKind::H1_normalized) ==
              doctest::Approx(norm(u, NormKind::H1_normalized) / 3.0).epsilon(1e-6));
        CHECK(norm(v, NormKind::Hminus1_hat) ==
              doctest::Approx(3.0 * norm(u, NormKind::Hminus1_hat)).epsilon(1e-6));
        CHECK(norm(v, NormKind::Hminus1_underline) ==
              doctest::Approx(3.0 * norm(u, NormKind::Hminus1_underline)).epsilon(1e-6));
    }
}

TEST_CASE("multiscale sum")
{
    auto g1 = Grid::on_cube(TriadicCube::centered(1, 2), 2);
    CHECK(multiscale_sum(GridFunction(g1), 1) == 0.0);
    CHECK(multiscale_sum(constant(g1, 1.0), 1) == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(multiscale_sum_gradient(constant(g1, 1.0), 1) == doctest::Approx(0.0));

    struct Case {
        int d, n, res;
    };
    for (auto c : {Case{1, 4, 2}, Case{2, 2, 2}, Case{2, 1, 3}, Case{3, 1, 2}}) {
        auto g = Grid::on_cube(TriadicCube::centered(c.n, c.d), c.res);
        for (std::uint64_t seed = 0; seed < 3; ++seed) {
            auto u = random_function(g, 100 + seed);
            const double s = multiscale_sum(u, c.n);
            const double b = oracle::brute_multiscale(u, c.n, false);
            CHECK(std::abs(s - b) <= 1e-12 * std::max(1.0, b));
            const double sg = multiscale_sum_gradient(u, c.n);
            const double bg = oracle::brute_multiscale(u, c.n, true);
            CHECK(std::abs(sg - bg) <= 1e-12 * std::max(1.0, bg));
        }
    }
    CHECK_THROWS_AS(multiscale_sum(constant(g1, 1.0), 2), PreconditionError);
}

TEST_CASE("multiscale Poincare ratios")
{
    auto g = Grid::on_cube(TriadicCube::centered(1, 2), 4);
    auto zero = check_mpi(GridFunction(g), 1);
    CHECK(zero.max() == 0.0);

    auto one = check_mpi(constant(g, 1.0), 1);
    CHECK(std::isfinite(one.u_ratio));
    CHECK(one.u_ratio > 0.0);
    CHECK(one.v_poincare == 0.0);

    // Sign pattern following unit-cell parity, smoothed to the grid.
    auto osc = GridFunction::interpolate(
        g, [](std::span<const double> x) { return std::cos(std::numbers::pi * x[0]); });
    auto r = check_mpi(osc, 1);
    CHECK(r.u_ratio < one.u_ratio);
    CHECK(r.max() < 10.0);
}

TEST_CASE("multiscale Poincare ratios stay below the golden constant")
{
    auto golden = probes::load_golden();
    for (int d = 1; d <= 3; ++d) {
        const auto& e = golden["C_mpi"][std::to_string(d)];
        double m = 0.0;
        for (int i = 0; i < probes::kMpiInputs; ++i) {
            auto rec = probes::mpi_record(d, i);
            CHECK(rec.max() <= e["bound"].get<double>());
            m = std::max(m, rec.max());
        }
        CHECK(m == doctest::Approx(e["observed"].get<double>()).epsilon(1e-9));
    }
}

TEST_CASE("Caccioppoli ratio")
{
    SUBCASE("affine solution of the identity field")
    {
        for (int d = 1; d <= 2; ++d) {
            auto f = sample_field(MarginalLaw::constant(1.0), 1, TriadicCube::centered(2, d));
            auto g = caccioppoli_grid(d, 1.0, 2);
            std::vector<double> p(d, 0.0);
            p[0] = 1.0;
            auto rec = check_caccioppoli(f, 1.0, GridFunction::affine(g, p));
            CHECK(rec.ratio == doctest::Approx(1.0 / std::sqrt(3.0)).epsilon(1e-12));
            CHECK(rec.grad_inner == doctest::Approx(1.0).epsilon(1e-12));

            auto c = check_caccioppoli(f, 1.0, constant(g, 2.0));
            CHECK(c.ratio == 0.0);
        }
    }
    SUBCASE("preconditions")
    {
        auto f = sample_field(MarginalLaw::two_point(1.0, 4.0, 0.5), 3, TriadicCube::centered(2, 2));
        auto g = caccioppoli_grid(2, 1.5, 2);
        CHECK_THROWS_AS(check_caccioppoli(f, 1.5, random_function(g, 9)), PreconditionError);
        CHECK_THROWS_AS(check_caccioppoli(f, 1.0, GridFunction(g)), PreconditionError);
        CHECK_THROWS_AS(caccioppoli_grid(2, 0.3, 1), ResolutionError);
        auto big = caccioppoli_grid(2, 3.0, 1);
        CHECK_THROWS_AS(check_caccioppoli(f, 3.0, GridFunction(big)), CoverageError);
    }
    SUBCASE("golden constant over random harmonic extensions")
    {
        auto golden = probes::load_golden();
        for (int d = 1; d <= 2; ++d) {
            const auto& e = golden["C_cacc"][std::to_string(d)];
            double m = 0.0;
            for (int i = 0; i < probes::kCaccSamples; ++i) {
                auto rec = probes::cacc_record(d, i);
                CHECK(rec.residual <= 1e-8);
                CHECK(rec.ratio <= e["bound"].get<double>());
                m = std::max(m, rec.ratio);
            }
            CHECK(m == doctest::Approx(e["observed"].get<double>()).epsilon(1e-9));
        }
    }
}

TEST_CASE("maximum moment inequality")
{
    auto c = check_max_moment(MarginalLaw::constant(2.0), 1, 3.0, 10, 1);
    CHECK(c.lhs == doctest::Approx(8.0));
    CHECK(c.stderr_ == doctest::Approx(0.0));
    CHECK(c.rhs == doctest::Approx(4.0 * (8.0 + 8.0)));
    CHECK(c.holds());

    auto j = check_max_moment(MarginalLaw::bounded_log_uniform(2.0), 1, 1.0, 20000, 2);
    CHECK(j.lhs <= std::log(j.exp_moment) + 3.0 * j.stderr_);
    CHECK(j.holds());

    auto w = check_max_moment(MarginalLaw::weibull_tail(2.0, 0.0, 0.5, 1.0), 81, 3.0, 100000, 3);
    CHECK(w.holds());
    CHECK(w.margin() > 0.0);

    // Same seed, same answer.
    auto w2 = check_max_moment(MarginalLaw::weibull_tail(2.0, 0.0, 0.5, 1.0), 81, 3.0, 1000, 3);
    auto w3 = check_max_moment(MarginalLaw::weibull_tail(2.0, 0.0, 0.5, 1.0), 81, 3.0, 1000, 3);
    CHECK(w2.lhs == w3.lhs);

    CHECK_THROWS_AS(check_max_moment(MarginalLaw::weibull_tail(0.5, 0.0, 0.5, 1.0), 1, 1.0, 10, 1),
                    LawUnsuitableError);
    CHECK_THROWS_AS(check_max_moment(MarginalLaw::constant(1.0), 1, 0.5, 10, 1), PreconditionError);
}

TEST_CASE("Meyers probe reports ratios")
{
    auto cube = TriadicCube::centered(1, 2);
    auto f = sample_field(MarginalLaw::two_point(1.0, 4.0, 0.5), 11, cube);
    auto probe = meyers_probe(f, cube, 4, [](std::span<const double> x) {
        return x[0] + 0.3 * x[1] * x[1];
    });
    REQUIRE(probe.ratios.size() == probe.exponents.size());
    for (double r : probe.ratios) {
        CHECK(std::isfinite(r));
        CHECK(r > 0.0);
    }
    CHECK(probe.empirical_exponent >= 2.0);
}
