// Acceptance report: one PASS/FAIL line per criterion.
//
// A criterion that is measured and not met prints FAIL; the process still
// exits 0. A criterion that cannot be evaluated (an exception escapes)
// prints FAIL and makes the exit status nonzero.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "homog/cell.hpp"
#include "homog/cli.hpp"
#include "homog/dirichlet.hpp"
#include "homog/error.hpp"
#include "homog/norms.hpp"
#include "homog/stats.hpp"
#include "norm_probes.hpp"
#include "oracles.hpp"

using namespace homog;

namespace {

const MarginalLaw kTwoPhase = MarginalLaw::two_point(1.0, 4.0, 0.5);
const MarginalLaw kWeibull = MarginalLaw::weibull_tail(6.0, 6.0, 1.0, 0.5);

struct Verdict {
    bool pass = true;
    std::ostringstream detail;

    void require(bool ok, const std::string& what)
    {
        if (!ok)
            detail << "violated: " << what << "; ";
        pass = pass && ok;
    }
};

std::string fmt(double v)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4g", v);
    return buf;
}

Vec unit(int d, int i)
{
    Vec e = Vec::Zero(d);
    e[i] = 1.0;
    return e;
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

double seconds_since(std::chrono::steady_clock::time_point t0)
{
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

//---------------------------------------------------------------------------//

void one_d_exactness(Verdict& v)
{
    const auto t0 = std::chrono::steady_clock::now();
    const auto cube = TriadicCube::centered(3, 1);
    double worst_a = 0.0, worst_form = 0.0;
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        auto f = sample_field(kTwoPhase, sample_seed(101, seed), cube);
        double inv = 0.0;
        int cells = 0;
        for (const auto& c : cube.subcubes(0)) {
            inv += 1.0 / f.cell_value(c.offset);
            ++cells;
        }
        const double hm = cells / inv;
        CellSolver s(f, cube, 4);
        auto r = s.matrices();
        worst_a = std::max({worst_a, std::abs(r.a_U(0, 0) - hm) / hm, std::abs(r.a_star_U(0, 0) - hm) / hm});
        const Vec one = unit(1, 0);
        worst_form = std::max({worst_form, std::abs(s.mu(one).value - 0.5 * hm),
                               std::abs(s.mu_star(one).value - 0.5 / hm), std::abs(s.J(one, hm * one))});
    }
    // The (1 | 4) split of the unit interval: harmonic mean 1.6.
    double lo[1] = {-0.5};
    int counts[1] = {8};
    auto g = Grid::on_box(lo, counts, 1.0 / 8.0);
    ElementCoefficients c{1, {}};
    for (std::size_t e = 0; e < g.element_count(); ++e)
        c.data.push_back(g.element_center(e)[0] < 0.0 ? 1.0 : 4.0);
    CellSolver split(g, c);
    const Vec one = unit(1, 0);
    const double mu = split.mu(one).value, mus = split.mu_star(one).value, j = split.J(one, 1.6 * one);
    const double triple = std::max({std::abs(mu - 0.8), std::abs(mus - 0.3125), std::abs(j)});
    const double secs = seconds_since(t0);

    v.require(worst_a <= 1e-6, "a, a_* vs harmonic mean");
    v.require(worst_form <= 1e-8, "mu, mu_*, J closed forms");
    v.require(triple <= 1e-8, "0.8 / 0.3125 / 0 triple");
    v.require(secs < 10.0, "runtime < 10 s");
    if (v.pass)
        v.detail << "50 fields, max rel |a - hm| " << fmt(worst_a) << ", max form error " << fmt(worst_form)
                 << ", triple (" << fmt(mu) << ", " << fmt(mus) << ", " << fmt(j) << "), " << fmt(secs) << " s";
}

void dense_oracle(Verdict& v)
{
    const auto cube = TriadicCube::centered(1, 2);
    double worst = 0.0;
    int solves = 0;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        auto f = sample_field(kTwoPhase, sample_seed(202, seed), cube);
        CellSolver s(f, cube, 4);
        const auto& g = s.grid();
        Mat k = oracle::dense_stiffness(g, oracle::element_values(g, f));
        for (int i = 0; i < 2; ++i) {
            auto u = s.dirichlet_minimizer(unit(2, i));
            std::vector<double> p(2, 0.0);
            p[i] = 1.0;
            auto ref = oracle::dense_dirichlet(k, GridFunction::affine(g, p), std::vector<double>(g.node_count(), 0.0));
            worst = std::max(worst, oracle::max_diff(u.values, ref));
            auto w = s.dual_maximizer(unit(2, i));
            worst = std::max(worst, oracle::max_diff(w.values, oracle::dense_neumann(k, g, s.dual_load(unit(2, i)).values)));
            solves += 2;
        }
        SplitMix rng(seed);
        GridFunction rhs(g, oracle::random_vector(rng, static_cast<int>(g.node_count()), -1, 1));
        auto bc = GridFunction::interpolate(g, [](auto x) { return std::cos(x[0]) * x[1]; });
        auto u = solve_dirichlet(s.stiffness(), bc, rhs);
        worst = std::max(worst, oracle::max_diff(u.values, oracle::dense_dirichlet(k, bc, rhs.values)));
        double sum = 0.0;
        for (double x : rhs.values)
            sum += x;
        for (auto& x : rhs.values)
            x -= sum / static_cast<double>(rhs.size());
        auto w = solve_neumann_free(s.stiffness(), rhs);
        worst = std::max(worst, oracle::max_diff(w.values, oracle::dense_neumann(k, g, rhs.values)));
        solves += 2;
    }
    v.require(worst <= 1e-8, "max-norm difference " + fmt(worst));
    if (v.pass)
        v.detail << solves << " solves on box_1, res 4, 10 seeds, max-norm difference " << fmt(worst);
}

void lemma_suite(Verdict& v)
{
    const auto cube = TriadicCube::centered(1, 2);
    int lemma_probes = 0, form_probes = 0, failures = 0;
    double min_slack = 1e300, max_resid = 0.0, min_floor = 1e300;
    SplitMix rng(303);
    for (std::uint64_t i = 0; i < 17; ++i) {
        const auto& law = (i % 2 == 0) ? kTwoPhase : kWeibull;
        auto f = sample_field(law, sample_seed(303, i), cube);
        auto d = verify_lemma_properties(f, cube, 4);
        for (const auto& pr : d.probes) {
            ++lemma_probes;
            min_slack = std::min(min_slack, pr.slack);
            max_resid = std::max({max_resid, pr.Jq_residual, pr.fv_residual, pr.qr2_residual});
            const bool ok = pr.slack >= -1e-6 && pr.Jq_residual <= 1e-6 && pr.qr2_residual <= 1e-5 &&
                            pr.fv_residual <= 1e-6;
            failures += ok ? 0 : 1;
        }
        failures += d.distance_holds() ? 0 : 1;

        CellSolver s(f, cube, 4);
        auto m = s.matrices();
        failures += m.ordering_holds() ? 0 : 1;
        for (int t = 0; t < 100; ++t) {
            Vec p = random_ball(rng, 2), q = random_ball(rng, 2);
            const double jv = m.J(p, q);
            min_floor = std::min(min_floor, jv);
            failures += jv >= -1e-8 ? 0 : 1;
        }
        for (int t = 0; t < 6; ++t) {
            Vec p = random_ball(rng, 2), q = random_ball(rng, 2);
            ++form_probes;
            const double mu = s.mu(p).value, mus = s.mu_star(q).value;
            bool ok = mu >= 0.5 * s.lam() * p.squaredNorm() - 1e-10 && mu <= 0.5 * s.Lam() * p.squaredNorm() + 1e-10;
            ok = ok && mus >= q.squaredNorm() / (2.0 * s.Lam()) - 1e-10 &&
                 mus <= q.squaredNorm() / (2.0 * s.lam()) + 1e-10;
            ok = ok && mu + mus - p.dot(q) >= -1e-8;
            auto opt = s.j_maximizer(p, q);
            const double g2 = mean_gradient_energy(opt.u);
            ok = ok && g2 <= s.Lam() / s.lam() * p.squaredNorm() + q.squaredNorm() / (s.lam() * s.lam()) +
                                 p.norm() * q.norm() / s.lam() + 1e-6;
            failures += ok ? 0 : 1;
        }
    }
    v.require(lemma_probes >= 100 && form_probes >= 100, "fewer than 100 probes");
    v.require(failures == 0, std::to_string(failures) + " probe failures");
    if (v.pass)
        v.detail << lemma_probes << " subadditivity/energy/response/first-variation probes, " << form_probes
                 << " bound probes, 1700 duality-floor probes; min slack " << fmt(min_slack)
                 << ", max residual " << fmt(max_resid) << ", min J " << fmt(min_floor);
}

void dykhne(Verdict& v)
{
    const auto t0 = std::chrono::steady_clock::now();
    auto s = run_scale_study(kTwoPhase, 2, 3, 200, 4, 404);
    const double dev = (s.abar_n - 2.0 * Mat::Identity(2, 2)).cwiseAbs().maxCoeff();
    const double secs = seconds_since(t0);
    v.require(dev <= 0.05 * 2.0, "max |abar_n - 2 Id| = " + fmt(dev));
    v.require(secs < 600.0, "runtime " + fmt(secs) + " s");
    v.detail << "abar_3 = [" << fmt(s.abar_n(0, 0)) << ", " << fmt(s.abar_n(0, 1)) << "; " << fmt(s.abar_n(1, 0))
             << ", " << fmt(s.abar_n(1, 1)) << "], max deviation " << fmt(dev) << ", " << fmt(secs) << " s";
}

void convergence(Verdict& v)
{
    auto r = convergence_study(kTwoPhase, 2, {0, 1, 2, 3}, 100, 4, 505);
    v.require(r.reference == "closed_form", "reference");
    v.require(r.strictly_decreasing, "2-d error not strictly decreasing beyond 2 se");
    std::ostringstream rows;
    for (const auto& row : r.rows)
        rows << " n=" << row.n << ":" << fmt(row.sq_error) << "(+-" << fmt(row.sq_error_se) << ")";

    auto one = convergence_study(kTwoPhase, 1, {3, 4}, 400, 1, 506);
    std::ostringstream delta;
    for (const auto& row : one.rows) {
        const long K = pow3(row.n);
        const double ref = oracle::harmonic_mean_delta(1.0, 4.0, 0.5, K);
        v.require(std::abs(row.sq_error - ref) <= 3.0 * row.sq_error_se, "1-d delta method at n=" + std::to_string(row.n));
        delta << " n=" << row.n << ":" << fmt(row.sq_error) << " vs " << fmt(ref);
    }
    if (v.pass)
        v.detail << "2-d E|2Id - a|^2" << rows.str() << "; 1-d" << delta.str();
}

DirichletReport& dirichlet_2d()
{
    static DirichletReport rep = error_experiment(kTwoPhase, 2, Box::symmetric(2, 0.45),
                                                  BoundaryDatum::affine(unit(2, 0)), {1, 2, 3}, {0.1}, 30, 4, 606);
    return rep;
}

void dirichlet(Verdict& v)
{
    const auto& rep = dirichlet_2d();
    v.require(rep.strictly_decreasing, "2-d error not strictly decreasing");
    std::ostringstream rows;
    for (const auto& a : rep.aggregates)
        rows << " eps=3^-" << a.n << ":" << fmt(a.mean_sq);

    auto c = error_experiment(MarginalLaw::constant(2.0), 2, Box::symmetric(2, 0.45),
                              BoundaryDatum::parse("quadratic:1,0;1,0.5,0.5,-1", 2), {1, 2, 3}, {}, 2, 4, 607);
    double worst = 0.0;
    for (const auto& rec : c.records)
        worst = std::max(worst, rec.l2_error);
    v.require(worst <= 1e-8, "constant-law error " + fmt(worst));

    auto one = error_experiment(kTwoPhase, 1, Box::symmetric(1, 0.5), BoundaryDatum::affine(unit(1, 0)), {3}, {}, 400,
                                2, 608);
    const double closed = oscillation_error_1d(kTwoPhase, 1.0 / 27.0, 1.0);
    const double rel = std::abs(one.aggregates[0].mean_sq - closed) / closed;
    v.require(rel <= 0.2, "1-d error off by " + fmt(100 * rel) + "%");
    if (v.pass)
        v.detail << "2-d E||u - u^eps||^2" << rows.str() << "; constant law max " << fmt(worst) << "; 1-d "
                 << fmt(one.aggregates[0].mean_sq) << " vs closed form " << fmt(closed);
}

void two_scale(Verdict& v)
{
    const auto& rep = dirichlet_2d();
    std::vector<double> ratios;
    for (const auto& rec : rep.records)
        if (rec.n == 3)
            ratios.push_back(rec.h1_two_scale / rec.h1_homog);
    std::sort(ratios.begin(), ratios.end());
    const double frac = rep.two_scale_fraction(3, 0.1);
    v.require(ratios.size() == 30, "expected 30 samples");
    v.require(frac >= 0.8, "ratio <= 1/2 on " + fmt(100 * frac) + "% of samples");
    v.detail << "ratio ||u^eps - w^eps|| / ||u^eps - u|| at eps = 3^-3, r = 0.1: min " << fmt(ratios.front())
             << ", median " << fmt(ratios[ratios.size() / 2]) << ", max " << fmt(ratios.back());
}

void omega(Verdict& v)
{
    auto id = sample_field(MarginalLaw::constant(1.0), 1, TriadicCube::centered(1, 2));
    const double w = compute_omega(id, 1, 2.0 * Mat::Identity(2, 2), 2);
    v.require(std::abs(w - 16.0 / 9.0) <= 1e-13, "16/9 example gave " + fmt(w));
    double worst = 0.0;
    for (std::uint64_t i = 0; i < 4; ++i) {
        auto f = sample_field(i % 2 ? kWeibull : kTwoPhase, sample_seed(707, i), TriadicCube::centered(2, 2));
        const Mat ref = 2.0 * Mat::Identity(2, 2);
        const double a = compute_omega(f, 2, ref, 2);
        worst = std::max(worst, std::abs(a - oracle::brute_omega(f, 2, ref, 2)) / std::max(1.0, a));
    }
    v.require(worst <= 1e-10, "brute-force disagreement " + fmt(worst));
    if (v.pass)
        v.detail << "16/9 example off by " << fmt(std::abs(w - 16.0 / 9.0)) << ", brute force max rel diff "
                 << fmt(worst);
}

void suppressive(Verdict& v)
{
    struct Case {
        MarginalLaw law;
        double beta, gamma;
        std::uint64_t seed;
    };
    const std::vector<Case> cases = {{kTwoPhase, 0.5, 0.5, 801},
                                     {MarginalLaw::weibull_tail(6.0, 6.0, 1.0, 1.0), 0.25, 0.25, 802}};
    for (const auto& c : cases) {
        auto p = suppressive_profile(c.law, 2, c.beta, c.gamma, 1);
        const auto& r = p.rows[1];
        auto mc = truncated_moment_mc(c.law, 2, 1, r.delta, r.M, 1000000, c.seed);
        const double z = std::abs(mc.mean - r.moment()) / mc.se;
        v.require(z <= 3.0, c.law.to_spec() + " quadrature vs MC at " + fmt(z) + " se");
        v.detail << c.law.to_spec() << ": " << fmt(r.moment()) << " vs MC " << fmt(mc.mean) << " (" << fmt(z)
                 << " se); ";
    }
    auto b = suppressive_profile(MarginalLaw::bounded_log_uniform(0.25), 2, 0.25, 0.25, 5);
    double tail = 0.0;
    for (const auto& r : b.rows)
        if (r.n >= 2)
            tail = std::max(tail, r.moment());
    v.require(tail == 0.0, "bounded-law profile nonzero beyond n = 1");
    v.detail << "bounded law max moment for n in 2..5: " << fmt(tail);
}

void max_moment(Verdict& v)
{
    const std::vector<MarginalLaw> laws = {kTwoPhase, MarginalLaw::weibull_tail(2.0, 0.0, 0.5, 1.0)};
    double min_margin = 1e300;
    int checked = 0;
    std::uint64_t idx = 0;
    for (const auto& law : laws)
        for (long n : {1L, 9L, 81L})
            for (double p : {1.0, 3.0}) {
                auto r = check_max_moment(law, n, p, 100000, sample_seed(909, idx++));
                ++checked;
                min_margin = std::min(min_margin, r.margin());
                v.require(r.holds() && r.margin() > 0.0,
                          law.to_spec() + " n=" + std::to_string(n) + " p=" + fmt(p) + " margin " + fmt(r.margin()));
            }
    if (v.pass)
        v.detail << checked << " (law, n, p) cases, min margin " << fmt(min_margin);
}

void golden(Verdict& v)
{
    auto g = probes::load_golden();
    std::ostringstream out;
    for (int d = 1; d <= 3; ++d) {
        const auto& e = g["C_mpi"][std::to_string(d)];
        const double m = probes::max_mpi(d);
        v.require(m <= e["bound"].get<double>(), "C_mpi d=" + std::to_string(d) + " exceeds bound");
        v.require(std::abs(m - e["observed"].get<double>()) <= 1e-9 * m, "C_mpi d=" + std::to_string(d) + " drifted");
        out << "C_mpi(" << d << ")=" << fmt(m) << "<=" << fmt(e["bound"].get<double>()) << " ";
    }
    for (int d = 1; d <= 2; ++d) {
        const auto& e = g["C_cacc"][std::to_string(d)];
        const double m = probes::max_cacc(d);
        v.require(m <= e["bound"].get<double>(), "C_cacc d=" + std::to_string(d) + " exceeds bound");
        v.require(std::abs(m - e["observed"].get<double>()) <= 1e-9 * m, "C_cacc d=" + std::to_string(d) + " drifted");
        out << "C_cacc(" << d << ")=" << fmt(m) << "<=" << fmt(e["bound"].get<double>()) << " ";
    }
    if (v.pass)
        v.detail << probes::kMpiInputs << " MPI inputs per d, " << 2 * probes::kCaccSamples
                 << " Caccioppoli samples; " << out.str();
}

void determinism(Verdict& v)
{
    const std::vector<std::map<std::string, std::string>> configs = {
        {{"command", "study-cell"}, {"n", "0..2"}, {"N", "12"}, {"res", "2"}, {"seed", "11"}},
        {{"command", "study-convergence"}, {"dim", "1"}, {"n", "0..3"}, {"N", "60"}, {"res", "1"}},
        {{"command", "study-dirichlet"}, {"n", "1,2"}, {"N", "6"}, {"r", "0.1,0.2"}, {"omega", "on"}},
        {{"command", "check-invariants"}, {"n", "1"}, {"N", "4"}, {"res", "2"}},
        {{"command", "suppressive-profile"}, {"n", "0..2"}, {"mc", "on"}, {"samples", "5000"}},
        {{"command", "max-moment"}, {"counts", "1,9"}, {"samples", "5000"}},
    };
    int compared = 0;
    for (auto cfg : configs) {
        std::vector<std::string> outputs;
        for (const char* threads : {"1", "1", "8"}) {
            cfg["threads"] = threads;
            auto out = execute(parse_config({}, cfg));
            outputs.push_back(out.csv + "\n" + out.json.dump());
        }
        v.require(outputs[0] == outputs[1], cfg["command"] + " differs between runs");
        v.require(outputs[0] == outputs[2], cfg["command"] + " differs between 1 and 8 threads");
        ++compared;
    }
    if (v.pass)
        v.detail << compared << " commands byte-identical across two runs and across 1 vs 8 threads";
}

}  // namespace

int main()
{
    const std::vector<std::pair<std::string, std::function<void(Verdict&)>>> criteria = {
        {"1-d exactness suite", one_d_exactness},
        {"dense-oracle equivalence", dense_oracle},
        {"lemma suite", lemma_suite},
        {"Dykhne check", dykhne},
        {"convergence study", convergence},
        {"Dirichlet experiment", dirichlet},
        {"two-scale improvement", two_scale},
        {"Omega correctness", omega},
        {"suppressive profile", suppressive},
        {"max-moment inequality", max_moment},
        {"golden MPI and Caccioppoli constants", golden},
        {"determinism", determinism},
    };
    int passed = 0;
    bool errored = false;
    for (const auto& [name, check] : criteria) {
        const auto t0 = std::chrono::steady_clock::now();
        Verdict v;
        try {
            check(v);
        } catch (const std::exception& e) {
            v.pass = false;
            v.detail.str("");
            v.detail << "error: " << e.what();
            errored = true;
        }
        passed += v.pass ? 1 : 0;
        std::printf("%s  %s: %s [%.1f s]\n", v.pass ? "PASS" : "FAIL", name.c_str(), v.detail.str().c_str(),
                    seconds_since(t0));
        std::fflush(stdout);
    }
    std::printf("%d/%zu criteria passed\n", passed, criteria.size());
    return errored ? 1 : 0;
}
