#include "homog/dirichlet.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>
#include <sstream>

#include "homog/error.hpp"
#include "homog/norms.hpp"
#include "homog/parallel.hpp"
#include "homog/rng.hpp"
#include "homog/stats.hpp"

namespace homog {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

SolverOptions tight()
{
    SolverOptions o;
    o.tolerance = 1e-12;
    return o;
}

std::vector<double> split(const std::string& s, char sep)
{
    std::vector<double> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, sep)) {
        std::size_t used = 0;
        double v = 0.0;
        try {
            v = std::stod(item, &used);
        } catch (const std::exception&) {
            throw ConfigError("boundary datum: '" + item + "' is not a number");
        }
        if (used != item.size())
            throw ConfigError("boundary datum: '" + item + "' is not a number");
        out.push_back(v);
    }
    return out;
}

std::string num(double v)
{
    if (!std::isfinite(v))
        return "";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

double eps_of(int n) { return std::pow(3.0, -n); }

}  // namespace

//---------------------------------------------------------------------------//

Box Box::symmetric(int dim, double half_width)
{
    return Box{std::vector<double>(dim, -half_width), std::vector<double>(dim, half_width)};
}

std::string Box::to_string() const
{
    std::ostringstream os;
    for (int i = 0; i < dim(); ++i)
        os << (i ? "x" : "") << '(' << num(lo[i]) << ',' << num(hi[i]) << ')';
    return os.str();
}

BoundaryDatum BoundaryDatum::affine(const Vec& p)
{
    BoundaryDatum f;
    f.kind = Kind::affine;
    f.p = p;
    f.Q = Mat::Zero(p.size(), p.size());
    return f;
}

BoundaryDatum BoundaryDatum::quadratic(const Vec& p, const Mat& Q)
{
    BoundaryDatum f = affine(p);
    f.kind = Kind::quadratic;
    f.Q = Q;
    return f;
}

BoundaryDatum BoundaryDatum::sine(int dim)
{
    BoundaryDatum f = affine(Vec::Zero(dim));
    f.kind = Kind::sine;
    return f;
}

BoundaryDatum BoundaryDatum::parse(const std::string& spec, int dim)
{
    const auto colon = spec.find(':');
    const std::string kind = spec.substr(0, colon);
    const std::string rest = colon == std::string::npos ? "" : spec.substr(colon + 1);
    auto vec_of = [&](const std::string& s, std::size_t count, const char* what) {
        auto v = split(s, ',');
        if (v.size() != count)
            throw ConfigError("boundary datum: " + std::string(what) + " needs " +
                              std::to_string(count) + " entries");
        return v;
    };
    if (kind == "sine" && rest.empty())
        return sine(dim);
    if (kind == "affine") {
        auto v = vec_of(rest, dim, "affine");
        return affine(Eigen::Map<Vec>(v.data(), dim));
    }
    if (kind == "quadratic") {
        const auto semi = rest.find(';');
        if (semi == std::string::npos)
            throw ConfigError("boundary datum: quadratic needs 'p1,..;q11,..'");
        auto p = vec_of(rest.substr(0, semi), dim, "quadratic p");
        auto q = vec_of(rest.substr(semi + 1), static_cast<std::size_t>(dim * dim), "quadratic Q");
        Mat Q(dim, dim);
        for (int i = 0; i < dim; ++i)
            for (int j = 0; j < dim; ++j)
                Q(i, j) = q[i * dim + j];
        return quadratic(Eigen::Map<Vec>(p.data(), dim), Q);
    }
    throw ConfigError("boundary datum: unknown kind '" + spec + "'");
}

std::string BoundaryDatum::to_spec() const
{
    if (kind == Kind::sine)
        return "sine";
    std::string s = kind == Kind::affine ? "affine:" : "quadratic:";
    for (Eigen::Index i = 0; i < p.size(); ++i)
        s += (i ? "," : "") + num(p[i]);
    if (kind == Kind::quadratic) {
        s += ";";
        for (Eigen::Index i = 0; i < Q.size(); ++i)
            s += (i ? "," : "") + num(Q(i / Q.cols(), i % Q.cols()));
    }
    return s;
}

double BoundaryDatum::value(std::span<const double> x) const
{
    const int d = dim();
    if (kind == Kind::sine) {
        double v = 1.0;
        for (int i = 0; i < d; ++i)
            v *= std::sin(std::numbers::pi * x[i]);
        return v;
    }
    double v = 0.0;
    for (int i = 0; i < d; ++i) {
        v += p[i] * x[i];
        if (kind == Kind::quadratic)
            for (int j = 0; j < d; ++j)
                v += x[i] * Q(i, j) * x[j];
    }
    return v;
}

Vec BoundaryDatum::gradient(std::span<const double> x) const
{
    const int d = dim();
    Vec g = Vec::Zero(d);
    if (kind == Kind::sine) {
        for (int k = 0; k < d; ++k) {
            double v = std::numbers::pi * std::cos(std::numbers::pi * x[k]);
            for (int i = 0; i < d; ++i)
                if (i != k)
                    v *= std::sin(std::numbers::pi * x[i]);
            g[k] = v;
        }
        return g;
    }
    g = p;
    if (kind == Kind::quadratic)
        for (int i = 0; i < d; ++i)
            for (int j = 0; j < d; ++j)
                g[i] += (Q(i, j) + Q(j, i)) * x[j];
    return g;
}

//---------------------------------------------------------------------------//

Grid experiment_grid(const Box& u, int n, int res)
{
    const int d = u.dim();
    if (d < 1 || d > 3 || static_cast<int>(u.hi.size()) != d)
        throw PreconditionError("experiment grid: box must have 1 to 3 matching bounds");
    if (n < 0 || res < 1)
        throw ResolutionError("experiment grid: need n >= 0 and res >= 1");
    for (int i = 0; i < d; ++i)
        if (!(u.lo[i] < u.hi[i]) || u.lo[i] < -0.5 - 1e-12 || u.hi[i] > 0.5 + 1e-12)
            throw PreconditionError("experiment grid: U must be a nonempty box inside box_0");
    const double eps = eps_of(n);
    const double h = eps / res;
    std::vector<double> lo(d);
    std::vector<int> counts(d);
    for (int i = 0; i < d; ++i) {
        const double jlo = std::ceil((u.lo[i] - 0.5 * eps) / h - 1e-9);
        const double jhi = std::floor((u.hi[i] - 0.5 * eps) / h + 1e-9);
        if (jhi - jlo < 2)
            throw ResolutionError("experiment grid: U holds fewer than two elements at eps = 3^-" +
                                  std::to_string(n));
        lo[i] = 0.5 * eps + jlo * h;
        counts[i] = static_cast<int>(jhi - jlo);
    }
    return Grid::on_box(lo, counts, h);
}

GridFunction solve_oscillating(const CheckerboardField& field, int n, const Grid& grid,
                               const BoundaryDatum& f)
{
    if (field.dim() != grid.dim() || f.dim() != grid.dim())
        throw PreconditionError("solve_oscillating: dimension mismatch");
    auto coef = element_coefficients(grid, field, eps_of(n));
    auto k = assemble_stiffness(grid, coef);
    auto bd = GridFunction::interpolate(grid, [&](std::span<const double> x) { return f.value(x); });
    return solve_dirichlet(k, bd, GridFunction(grid), nullptr, tight());
}

GridFunction solve_oscillating(const CheckerboardField& field, int n, const Box& u,
                               const BoundaryDatum& f, int res)
{
    return solve_oscillating(field, n, experiment_grid(u, n, res), f);
}

GridFunction solve_homogenized(const Mat& abar, const Grid& grid, const BoundaryDatum& f)
{
    if (abar.rows() != grid.dim() || abar.cols() != grid.dim() || min_eigenvalue(abar) <= 0.0)
        throw PreconditionError("solve_homogenized: abar must be a d x d SPD matrix");
    auto k = assemble_stiffness(grid, constant_coefficients(grid, abar));
    auto bd = GridFunction::interpolate(grid, [&](std::span<const double> x) { return f.value(x); });
    return solve_dirichlet(k, bd, GridFunction(grid), nullptr, tight());
}

GridFunction solve_homogenized(const Mat& abar, const Box& u, const BoundaryDatum& f, int n, int res)
{
    return solve_homogenized(abar, experiment_grid(u, n, res), f);
}

//---------------------------------------------------------------------------//

std::vector<Corrector> correctors(const CellSolver& cell, int n)
{
    const int d = cell.grid().dim();
    std::vector<Corrector> out;
    for (int i = 0; i < d; ++i) {
        Vec e = Vec::Zero(d);
        e[i] = 1.0;
        auto v = cell.dirichlet_minimizer(e);
        std::vector<double> p(d, 0.0);
        p[i] = 1.0;
        v -= GridFunction::affine(cell.grid(), p);
        for (std::size_t k = 0; k < v.size(); ++k)
            if (cell.grid().on_boundary(k))
                v[k] = 0.0;
        out.push_back(Corrector{i, n, std::move(v)});
    }
    return out;
}

double cutoff_profile(double t)
{
    if (t <= 0.0)
        return 0.0;
    if (t >= 1.0)
        return 1.0;
    return t * t * t * (10.0 + t * (-15.0 + 6.0 * t));
}

GridFunction cutoff(const Grid& grid, const Box& u, double r)
{
    if (!(r > 0.0) || !(r < 1.0))
        throw PreconditionError("cutoff: r must lie in (0, 1)");
    if (r / grid.h() < 4.0)
        throw ResolutionError("cutoff: fewer than 4 grid nodes across the collar of width " + num(r));
    GridFunction eta(grid);
    for (std::size_t k = 0; k < grid.node_count(); ++k) {
        auto x = grid.node_coord(k);
        double v = 1.0;
        for (int i = 0; i < grid.dim(); ++i) {
            const double dist = std::min(x[i] - u.lo[i], u.hi[i] - x[i]);
            v *= cutoff_profile((dist - r) / r);
        }
        eta[k] = v;
    }
    return eta;
}

GridFunction difference_gradient(const GridFunction& u, int i)
{
    const Grid& g = u.grid;
    GridFunction out(g);
    const int last = g.elements(i);
    for (std::size_t k = 0; k < g.node_count(); ++k) {
        auto m = g.node_multi(k);
        std::array<int, 3> a = m, b = m;
        double span = 2.0 * g.h();
        if (m[i] == 0) {
            b[i] = 1;
            span = g.h();
        } else if (m[i] == last) {
            a[i] = last - 1;
            span = g.h();
        } else {
            a[i] = m[i] - 1;
            b[i] = m[i] + 1;
        }
        const int d = g.dim();
        out[k] = (u[g.node_index(std::span<const int>(b.data(), d))] -
                  u[g.node_index(std::span<const int>(a.data(), d))]) /
                 span;
    }
    return out;
}

GridFunction two_scale_expansion(const GridFunction& u, const std::vector<Corrector>& correctors,
                                 int n, const Box& box, double r)
{
    const Grid& g = u.grid;
    const int d = g.dim();
    if (static_cast<int>(correctors.size()) != d)
        throw PreconditionError("two_scale_expansion: need one corrector per direction");
    const double eps = eps_of(n);
    auto eta = cutoff(g, box, r);
    GridFunction w = u;
    for (const auto& c : correctors) {
        if (c.n != n)
            throw PreconditionError("two_scale_expansion: corrector scale does not match eps");
        const Grid& cg = c.phi.grid;
        auto du = difference_gradient(u, c.direction);
        for (std::size_t k = 0; k < g.node_count(); ++k) {
            if (eta[k] == 0.0)
                continue;
            auto x = g.node_coord(k);
            std::array<int, 3> idx{};
            for (int i = 0; i < d; ++i) {
                const double y = (x[i] / eps - cg.lo(i)) / cg.h();
                idx[i] = static_cast<int>(std::lround(y));
                if (std::abs(y - idx[i]) > 1e-6 || idx[i] < 0 || idx[i] > cg.elements(i))
                    throw CoverageError("two_scale_expansion: x / eps is not a corrector grid node");
            }
            const double ph = c.phi[cg.node_index(std::span<const int>(idx.data(), d))];
            w[k] += eps * eta[k] * du[k] * ph;
        }
    }
    return w;
}

//---------------------------------------------------------------------------//

double psi(const CellSolver& cell, const std::vector<Corrector>& correctors, const Mat& abar, int n)
{
    const double eps = eps_of(n);
    const int d = cell.grid().dim();
    double total = 0.0;
    for (const auto& c : correctors) {
        std::vector<double> p(d, 0.0);
        p[c.direction] = 1.0;
        GridFunction v = c.phi + GridFunction::affine(cell.grid(), p);
        const Vec shift = abar.col(c.direction);
        const double small = eps * norm(c.phi, NormKind::L2_normalized);
        const double flux =
            eps * dual_norm_of_field(v, &cell.coefficients(), shift, NormKind::Hminus1_underline);
        total += (small + flux) * (small + flux);
    }
    return total;
}

double phi(double Lam, double lam, double eps, double omega)
{
    return std::sqrt((Lam * Lam * Lam + Lam) / lam) * eps +
           (std::sqrt((Lam * Lam + 1.0) / lam) + 1.0) * std::sqrt(omega);
}

FluxGradientProbe flux_gradient_probe(const CheckerboardField& field, int n, int res, const Mat& abar)
{
    const int d = field.dim();
    const auto cube = TriadicCube::centered(n, d);
    CellSolver cell(field, cube, res, tight());
    Vec p = Vec::Zero(d);
    p[0] = 1.0;
    auto v = cell.dirichlet_minimizer(p);
    FluxGradientProbe r;
    r.gradient_lhs = std::pow(dual_norm_of_field(v, nullptr, p, NormKind::Hminus1_hat), 2);
    r.flux_lhs = std::pow(dual_norm_of_field(v, &cell.coefficients(), abar * p, NormKind::Hminus1_hat), 2);
    const double omega = compute_omega(field, n, abar, res);
    r.rhs_shape = (cell.Lam() + std::pow(9.0, n) * omega) / cell.lam();
    return r;
}

//---------------------------------------------------------------------------//

bool DirichletRecord::two_scale_resolved() const { return std::isfinite(h1_two_scale); }

double DirichletReport::two_scale_fraction(int n, double r) const
{
    int hit = 0, total = 0;
    for (const auto& rec : records) {
        if (rec.n != n || std::abs(rec.r - r) > 1e-12 || !rec.two_scale_resolved())
            continue;
        ++total;
        hit += rec.h1_two_scale <= 0.5 * rec.h1_homog ? 1 : 0;
    }
    return total ? static_cast<double>(hit) / total : kNaN;
}

double oscillation_error_1d(const MarginalLaw& law, double eps, double length)
{
    const double m = law.mean_inverse();
    const double var = law.expect([](double t) { return 1.0 / (t * t); }) - m * m;
    return eps * var * length * length / (6.0 * m * m);
}

namespace {

struct SampleResult {
    std::vector<DirichletRecord> records;
};

double l2_norm(const GridFunction& u) { return std::sqrt(mean_square(u) * u.grid.volume()); }

}  // namespace

DirichletReport error_experiment(const MarginalLaw& law, int dim, const Box& box,
                                 const BoundaryDatum& f, const std::vector<int>& n_range,
                                 const std::vector<double>& r_grid, int N, int res,
                                 std::uint64_t master_seed, const ExperimentOptions& opts)
{
    if (N < 2)
        throw PreconditionError("error_experiment: N must be >= 2");
    if (n_range.empty() || !std::is_sorted(n_range.begin(), n_range.end()) ||
        std::adjacent_find(n_range.begin(), n_range.end()) != n_range.end())
        throw PreconditionError("error_experiment: n_range must be strictly ascending");
    if (box.dim() != dim || f.dim() != dim)
        throw PreconditionError("error_experiment: dimension mismatch");

    DirichletReport rep;
    rep.law = law;
    rep.dim = dim;
    rep.box = box;
    rep.f = f;
    rep.res = res;
    if (opts.abar) {
        rep.abar = *opts.abar;
        rep.abar_source = "given";
    } else if (law.has_closed_form_effective(dim)) {
        rep.abar = law.closed_form_effective(dim) * Mat::Identity(dim, dim);
        rep.abar_source = "closed_form";
    } else {
        StudyOptions so;
        so.threads = opts.threads;
        auto s = run_scale_study(law, dim, 2, 20, res, master_seed ^ 0xABBAull, so);
        rep.abar = symmetrize(s.mean_a);
        rep.abar_source = "scale_study";
    }

    // The homogenized solution depends only on the grid, not on the sample.
    std::vector<Grid> grids;
    std::vector<GridFunction> homog;
    for (int n : n_range) {
        grids.push_back(experiment_grid(box, n, res));
        homog.push_back(solve_homogenized(rep.abar, grids.back(), f));
    }

    std::vector<SampleResult> results(static_cast<std::size_t>(N));
    parallel_for(results.size(), resolve_threads(opts.threads), [&](std::size_t s) {
        const std::uint64_t seed = sample_seed(master_seed, s);
        for (std::size_t k = 0; k < n_range.size(); ++k) {
            const auto t0 = std::chrono::steady_clock::now();
            const int n = n_range[k];
            const auto cube = TriadicCube::centered(n, dim);
            auto field = sample_field(law, seed, cube);
            auto ue = solve_oscillating(field, n, grids[k], f);
            const GridFunction& u = homog[k];
            const GridFunction diff = ue - u;

            CellSolver cell(field, cube, res, tight());
            auto corr = correctors(cell, n);
            DirichletRecord base;
            base.sample = static_cast<int>(s);
            base.seed = seed;
            base.n = n;
            base.eps = eps_of(n);
            base.l2_error = l2_norm(diff);
            base.h1_homog = norm(diff, NormKind::H1_normalized);
            base.psi = psi(cell, corr, rep.abar, n);
            base.lam = cell.lam();
            base.Lam = cell.Lam();
            base.omega = opts.with_phi ? compute_omega(field, n, rep.abar, res, tight()) : kNaN;
            base.phi = opts.with_phi ? phi(base.Lam, base.lam, base.eps, base.omega) : kNaN;
            const double shared_ms =
                std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();

            for (double r : r_grid) {
                const auto t1 = std::chrono::steady_clock::now();
                DirichletRecord rec = base;
                rec.r = r;
                try {
                    auto w = two_scale_expansion(u, corr, n, box, r);
                    const GridFunction dw = ue - w;
                    rec.h1_two_scale = norm(dw, NormKind::H1_normalized);
                    rec.grad_two_scale = std::sqrt(mean_gradient_energy(dw));
                } catch (const ResolutionError&) {
                    rec.h1_two_scale = kNaN;
                    rec.grad_two_scale = kNaN;
                }
                rec.runtime_ms =
                    shared_ms +
                    std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t1).count();
                results[s].records.push_back(rec);
            }
            if (r_grid.empty()) {
                base.r = kNaN;
                base.h1_two_scale = kNaN;
                base.grad_two_scale = kNaN;
                base.runtime_ms = shared_ms;
                results[s].records.push_back(base);
            }
        }
    });

    for (const auto& r : results)
        rep.records.insert(rep.records.end(), r.records.begin(), r.records.end());

    // Per-scale aggregates from one record per (sample, n).
    std::vector<std::vector<double>> sq(n_range.size(), std::vector<double>(N));
    const std::size_t per_n = std::max<std::size_t>(1, r_grid.size());
    for (int s = 0; s < N; ++s)
        for (std::size_t k = 0; k < n_range.size(); ++k)
            sq[k][s] = std::pow(results[s].records[k * per_n].l2_error, 2);

    auto mean_se = [](const std::vector<double>& x) {
        CompensatedSum a;
        for (double v : x)
            a.add(v);
        const double m = a.value() / x.size();
        CompensatedSum b;
        for (double v : x)
            b.add((v - m) * (v - m));
        return std::pair{m, std::sqrt(b.value() / (x.size() - 1.0) / x.size())};
    };

    rep.strictly_decreasing = true;
    rep.non_increasing = true;
    for (std::size_t k = 0; k < n_range.size(); ++k) {
        DirichletAggregate a;
        a.n = n_range[k];
        a.eps = eps_of(a.n);
        a.N = N;
        std::vector<double> l1(N);
        for (int s = 0; s < N; ++s)
            l1[s] = std::sqrt(sq[k][s]);
        a.mean_l2 = mean_se(l1).first;
        std::tie(a.mean_sq, a.sq_se) = mean_se(sq[k]);
        a.rms_l2 = std::sqrt(a.mean_sq);
        a.drop_over_2se = kNaN;
        if (k + 1 < n_range.size()) {
            std::vector<double> dsq(N);
            for (int s = 0; s < N; ++s)
                dsq[s] = sq[k][s] - sq[k + 1][s];
            auto [m, se] = mean_se(dsq);
            a.drop_over_2se = se > 0.0 ? m / (2.0 * se) : (m > 0.0 ? std::numeric_limits<double>::infinity() : 0.0);
            rep.strictly_decreasing = rep.strictly_decreasing && m > 0.0;
            rep.non_increasing = rep.non_increasing && a.drop_over_2se > -1.0;
        }
        rep.aggregates.push_back(a);
    }
    return rep;
}

//---------------------------------------------------------------------------//

std::string dirichlet_csv(const DirichletReport& r, bool timings)
{
    std::ostringstream os;
    os << "seed,eps,r,l2_error,psi,phi,lam,Lam,runtime_ms,sample,n,h1_homog,h1_two_scale,"
          "grad_two_scale,omega\n";
    for (const auto& rec : r.records)
        os << rec.seed << ',' << num(rec.eps) << ',' << num(rec.r) << ',' << num(rec.l2_error) << ','
           << num(rec.psi) << ',' << num(rec.phi) << ',' << num(rec.lam) << ',' << num(rec.Lam) << ','
           << num(timings ? rec.runtime_ms : 0.0) << ',' << rec.sample << ',' << rec.n << ','
           << num(rec.h1_homog) << ',' << num(rec.h1_two_scale) << ',' << num(rec.grad_two_scale)
           << ',' << num(rec.omega) << '\n';
    return os.str();
}

void to_json(nlohmann::json& j, const DirichletReport& r)
{
    auto fin = [](double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); };
    auto aggs = nlohmann::json::array();
    for (const auto& a : r.aggregates)
        aggs.push_back({{"n", a.n},
                        {"eps", a.eps},
                        {"N", a.N},
                        {"mean_l2", a.mean_l2},
                        {"rms_l2", a.rms_l2},
                        {"mean_sq", a.mean_sq},
                        {"sq_se", a.sq_se},
                        {"drop_over_2se", fin(a.drop_over_2se)}});
    auto abar = nlohmann::json::array();
    for (Eigen::Index i = 0; i < r.abar.rows(); ++i) {
        auto row = nlohmann::json::array();
        for (Eigen::Index k = 0; k < r.abar.cols(); ++k)
            row.push_back(r.abar(i, k));
        abar.push_back(row);
    }
    auto fractions = nlohmann::json::array();
    std::vector<std::pair<int, double>> seen;
    for (const auto& rec : r.records) {
        if (!std::isfinite(rec.r))
            continue;
        std::pair key{rec.n, rec.r};
        if (std::find(seen.begin(), seen.end(), key) != seen.end())
            continue;
        seen.push_back(key);
        fractions.push_back({{"n", rec.n}, {"r", rec.r}, {"fraction", fin(r.two_scale_fraction(rec.n, rec.r))}});
    }
    j = {{"law", r.law.to_spec()},
         {"dim", r.dim},
         {"U", r.box.to_string()},
         {"f", r.f.to_spec()},
         {"res", r.res},
         {"abar", abar},
         {"abar_source", r.abar_source},
         {"aggregates", aggs},
         {"two_scale_half_fraction", fractions},
         {"strictly_decreasing", r.strictly_decreasing},
         {"non_increasing", r.non_increasing}};
}

}  // namespace homog
