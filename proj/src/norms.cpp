#include "homog/norms.hpp"

#include <algorithm>
#include <cmath>

#include "homog/error.hpp"
#include "homog/rng.hpp"

namespace homog {

namespace {

// |U|^{-2/d} M + K_lap on the grid (unnormalized).
SparseOperator hilbert_gram(const Grid& g)
{
    auto m = assemble_mass(g);
    auto k = assemble_stiffness(g, constant_coefficients(g, Mat::Identity(g.dim(), g.dim())));
    const double c = std::pow(g.volume(), -2.0 / g.dim());
    std::vector<double> vals(m.vals().size());
    for (std::size_t i = 0; i < vals.size(); ++i)
        vals[i] = c * m.vals()[i] + k.vals()[i];
    return SparseOperator(m.size(), m.row_ptr(), m.cols(), std::move(vals));
}

void require_dual(NormKind kind)
{
    if (kind != NormKind::Hminus1_hat && kind != NormKind::Hminus1_underline)
        throw PreconditionError("dual norm requested with a primal norm kind");
}

// sqrt(L^T B^{-1} L / |U|) summed over components.
double dual_from_loads(const Grid& g, const SparseOperator& b,
                       const std::vector<std::vector<double>>& loads, NormKind kind)
{
    const std::size_t n = g.node_count();
    std::vector<char> mask(n, 1);
    if (kind == NormKind::Hminus1_underline)
        for (std::size_t k = 0; k < n; ++k)
            mask[k] = g.on_boundary(k) ? 0 : 1;
    SolverOptions opts;
    opts.tolerance = 1e-12;
    double total = 0.0;
    for (const auto& load : loads) {
        std::vector<double> z(n, 0.0);
        pcg(b, load, z, mask, opts);
        double s = 0.0;
        for (std::size_t k = 0; k < n; ++k)
            if (mask[k])
                s += load[k] * z[k];
        total += std::max(s, 0.0);
    }
    return std::sqrt(total / g.volume());
}

// Integrals over unit cells of a scale-n cube grid, one vector per component.
std::vector<std::vector<double>> unit_cell_integrals(const Grid& g, int n,
                                                     const std::vector<double>& elem, int comps)
{
    if (!g.cube() || g.cube()->scale != n || g.res() < 1)
        throw PreconditionError("multiscale_sum: grid is not the scale-n cube grid");
    const int d = g.dim();
    const std::int64_t side = pow3(n);
    std::size_t cells = 1;
    for (int i = 0; i < d; ++i)
        cells *= static_cast<std::size_t>(side);
    std::vector<std::vector<double>> out(comps, std::vector<double>(cells, 0.0));
    for (std::size_t e = 0; e < g.element_count(); ++e) {
        auto idx = g.element_multi(e);
        std::size_t c = 0;
        for (int i = 0; i < d; ++i)
            c = c * static_cast<std::size_t>(side) + static_cast<std::size_t>(idx[i] / g.res());
        for (int k = 0; k < comps; ++k)
            out[k][c] += elem[e * comps + k];
    }
    return out;
}

double multiscale_from_cells(int d, int n, const std::vector<std::vector<double>>& cells)
{
    const std::int64_t side = pow3(n);
    const std::size_t w = static_cast<std::size_t>(side) + 1;
    std::size_t total = 1;
    for (int i = 0; i < d; ++i)
        total *= w;

    // Summed-area tables on the (side+1)^d corner lattice, one per component.
    std::vector<std::vector<double>> pre;
    for (const auto& comp : cells) {
        std::vector<double> p(total, 0.0);
        for (std::size_t k = 0; k < total; ++k) {
            std::size_t rem = k, src = 0;
            bool edge = false;
            std::size_t digits[3] = {0, 0, 0};
            for (int i = d - 1; i >= 0; --i) {
                digits[i] = rem % w;
                rem /= w;
            }
            for (int i = 0; i < d; ++i) {
                if (digits[i] == 0)
                    edge = true;
                src = src * static_cast<std::size_t>(side) + (digits[i] ? digits[i] - 1 : 0);
            }
            if (edge)
                continue;
            double v = comp[src];
            // Inclusion-exclusion over the 2^d - 1 lower neighbours.
            for (int mask = 1; mask < (1 << d); ++mask) {
                std::size_t nb = 0;
                int bits = 0;
                for (int i = 0; i < d; ++i) {
                    const std::size_t di = digits[i] - ((mask >> i) & 1);
                    bits += (mask >> i) & 1;
                    nb = nb * w + di;
                }
                v += (bits % 2 ? 1.0 : -1.0) * p[nb];
            }
            p[k] = v;
        }
        pre.push_back(std::move(p));
    }

    auto block_sum = [&](const std::vector<double>& p, const std::size_t* lo, std::size_t len) {
        double s = 0.0;
        for (int mask = 0; mask < (1 << d); ++mask) {
            std::size_t idx = 0;
            int lows = 0;
            for (int i = 0; i < d; ++i) {
                const bool hi = (mask >> i) & 1;
                lows += hi ? 0 : 1;
                idx = idx * w + (hi ? lo[i] + len : lo[i]);
            }
            s += (lows % 2 ? -1.0 : 1.0) * p[idx];
        }
        return s;
    };

    double result = 0.0;
    for (int m = 0; m < n; ++m) {
        const std::size_t len = static_cast<std::size_t>(pow3(m));
        const std::size_t per = static_cast<std::size_t>(pow3(n - m));
        std::size_t blocks = 1;
        for (int i = 0; i < d; ++i)
            blocks *= per;
        const double vol = std::pow(static_cast<double>(len), d);
        CompensatedSum acc;
        for (std::size_t b = 0; b < blocks; ++b) {
            std::size_t lo[3] = {0, 0, 0};
            std::size_t rem = b;
            for (int i = d - 1; i >= 0; --i) {
                lo[i] = (rem % per) * len;
                rem /= per;
            }
            double sq = 0.0;
            for (const auto& p : pre) {
                const double avg = block_sum(p, lo, len) / vol;
                sq += avg * avg;
            }
            acc.add(sq);
        }
        const double weight = std::pow(3.0, -static_cast<double>((n - m) * d));
        result += std::pow(3.0, m) * std::sqrt(weight * acc.value());
    }
    return result;
}

double safe_ratio(double num, double den) { return den > 0.0 ? num / den : 0.0; }

Extremes element_extremes(const ElementCoefficients& c)
{
    Extremes e{0.0, std::numeric_limits<double>::infinity()};
    for (std::size_t k = 0; k < c.size(); ++k) {
        Vec ev = sym_eigenvalues(c.matrix(k));
        e.Lam = std::max(e.Lam, ev[ev.size() - 1]);
        e.lam = std::min(e.lam, ev[0]);
    }
    return e;
}

}  // namespace

//---------------------------------------------------------------------------//

double norm(const GridFunction& u, NormKind kind)
{
    const Grid& g = u.grid;
    switch (kind) {
    case NormKind::L2_normalized:
        return std::sqrt(mean_square(u));
    case NormKind::H1_normalized:
        return std::pow(g.volume(), -1.0 / g.dim()) * std::sqrt(mean_square(u)) +
               std::sqrt(mean_gradient_energy(u));
    case NormKind::Hminus1_underline:
    case NormKind::Hminus1_hat: {
        auto m = assemble_mass(g);
        std::vector<std::vector<double>> loads{m.apply(u.values)};
        return dual_from_loads(g, hilbert_gram(g), loads, kind);
    }
    }
    throw InternalConsistencyError("unknown norm kind");
}

double dual_norm_of_field(const GridFunction& u, const ElementCoefficients* coef, const Vec& shift,
                          NormKind kind)
{
    require_dual(kind);
    return dual_from_loads(u.grid, hilbert_gram(u.grid), flux_loads(u, coef, shift), kind);
}

double dual_norm_of_loads(const Grid& grid, const std::vector<std::vector<double>>& loads,
                          NormKind kind)
{
    require_dual(kind);
    return dual_from_loads(grid, hilbert_gram(grid), loads, kind);
}

double multiscale_sum(const GridFunction& u, int n)
{
    auto elem = element_integrals(u);
    return multiscale_from_cells(u.grid.dim(), n, unit_cell_integrals(u.grid, n, elem, 1));
}

double multiscale_sum_gradient(const GridFunction& v, int n)
{
    const int d = v.grid.dim();
    auto elem = element_gradient_integrals(v);
    return multiscale_from_cells(d, n, unit_cell_integrals(v.grid, n, elem, d));
}

double MpiRecord::max() const
{
    return std::max({u_ratio, v_poincare, v_gradient, w_poincare, w_gradient});
}

MpiRecord check_mpi(const GridFunction& u, int n)
{
    const Grid& g = u.grid;
    const int d = g.dim();
    MpiRecord r;
    const Vec zero = Vec::Zero(d);

    r.u_ratio = safe_ratio(norm(u, NormKind::Hminus1_hat),
                           norm(u, NormKind::L2_normalized) + multiscale_sum(u, n));

    auto gradient_ratios = [&](const GridFunction& v, double& poincare, double& gradient,
                               bool subtract_mean) {
        GridFunction c = v;
        if (subtract_mean) {
            const double m = v.mean();
            for (auto& x : c.values)
                x -= m;
        }
        const double gh = dual_norm_of_field(v, nullptr, zero, NormKind::Hminus1_hat);
        poincare = safe_ratio(norm(c, NormKind::L2_normalized), gh);
        gradient = safe_ratio(gh, std::sqrt(mean_gradient_energy(v)) + multiscale_sum_gradient(v, n));
    };
    gradient_ratios(u, r.v_poincare, r.v_gradient, true);

    GridFunction w = u;
    for (std::size_t k = 0; k < w.size(); ++k)
        if (g.on_boundary(k))
            w[k] = 0.0;
    gradient_ratios(w, r.w_poincare, r.w_gradient, false);
    return r;
}

//---------------------------------------------------------------------------//

Grid caccioppoli_grid(int dim, double r, int res)
{
    const double cells = 6.0 * r * res;
    const double inner = 2.0 * r * res;
    if (std::abs(cells - std::round(cells)) > 1e-9 || std::abs(inner - std::round(inner)) > 1e-9)
        throw ResolutionError("caccioppoli grid: +-r and +-3r must be grid nodes");
    std::vector<double> lo(dim, -3.0 * r);
    std::vector<int> counts(dim, static_cast<int>(std::lround(cells)));
    return Grid::on_box(lo, counts, 1.0 / res);
}

CaccioppoliRecord check_caccioppoli(const CheckerboardField& field, double r, const GridFunction& u)
{
    const Grid& g = u.grid;
    const int d = g.dim();
    for (int i = 0; i < d; ++i) {
        if (std::abs(g.lo(i) + 3.0 * r) > 1e-9 || std::abs(g.hi(i) - 3.0 * r) > 1e-9)
            throw PreconditionError("check_caccioppoli: grid must cover exactly (-3r, 3r)^d");
    }
    auto coef = element_coefficients(g, field);
    auto k = assemble_stiffness(g, coef);
    auto e = element_extremes(coef);

    CaccioppoliRecord rec;
    rec.lam = e.lam;
    rec.Lam = e.Lam;

    const double m = u.mean();
    GridFunction c = u;
    for (auto& x : c.values)
        x -= m;
    auto ku = k.apply(c.values);
    double res2 = 0.0, u2 = 0.0;
    for (std::size_t i = 0; i < g.node_count(); ++i) {
        u2 += c[i] * c[i];
        if (!g.on_boundary(i))
            res2 += ku[i] * ku[i];
    }
    double kmax = 0.0;
    for (double v : k.diagonal())
        kmax = std::max(kmax, v);
    rec.residual = safe_ratio(std::sqrt(res2), kmax * std::sqrt(u2));
    if (rec.residual > 1e-6)
        throw PreconditionError("check_caccioppoli: input is not discrete a-harmonic (residual " +
                                std::to_string(rec.residual) + ")");

    const double h = g.h();
    const int inner = static_cast<int>(std::lround(2.0 * r / h));
    std::vector<double> lo(d, -r);
    std::vector<int> counts(d, inner);
    auto ig = Grid::on_box(lo, counts, h);
    auto ui = u.restrict_to(ig);
    rec.grad_inner = std::sqrt(mean_gradient_energy(ui));
    rec.osc_outer = std::sqrt(mean_square(c));
    rec.ratio = safe_ratio(rec.grad_inner * r * rec.lam, rec.Lam * rec.osc_outer);
    return rec;
}

//---------------------------------------------------------------------------//

MaxMomentRecord check_max_moment(const MarginalLaw& law, std::int64_t count, double p,
                                 std::int64_t samples, std::uint64_t seed)
{
    if (p < 1.0)
        throw PreconditionError("check_max_moment: p must be >= 1");
    if (count < 1 || samples < 2)
        throw PreconditionError("check_max_moment: need count >= 1 and samples >= 2");
    MaxMomentRecord r;
    r.exp_moment = law.exp_moment();
    if (!std::isfinite(r.exp_moment))
        throw LawUnsuitableError("E[exp|X|] diverges for law " + law.to_spec());

    CompensatedSum s, s2;
    for (std::int64_t i = 0; i < samples; ++i) {
        SplitMix rng(sample_seed(seed, static_cast<std::uint64_t>(i)));
        double mx = 0.0;
        for (std::int64_t k = 0; k < count; ++k)
            mx = std::max(mx, std::abs(law.sample(rng.uniform())));
        const double v = std::pow(mx, p);
        s.add(v);
        s2.add(v * v);
    }
    const double ns = static_cast<double>(samples);
    r.lhs = s.value() / ns;
    const double var = std::max(0.0, (s2.value() - ns * r.lhs * r.lhs) / (ns - 1.0));
    r.stderr_ = std::sqrt(var / ns);
    const double lg = std::log(static_cast<double>(count) * r.exp_moment);
    r.rhs = std::pow(2.0, p - 1.0) * (std::pow(p - 1.0, p) + std::pow(std::max(lg, 0.0), p));
    return r;
}

//---------------------------------------------------------------------------//

MeyersProbe meyers_probe(const CheckerboardField& field, const TriadicCube& cube, int res,
                         const std::function<double(std::span<const double>)>& f,
                         const std::vector<double>& exponents)
{
    auto g = Grid::on_cube(cube, res);
    auto k = assemble_stiffness(g, field);
    auto fd = GridFunction::interpolate(g, f);
    auto u = solve_dirichlet(k, fd, GridFunction(g));

    auto ls = [&](const GridFunction& w, double s) {
        double acc = 0.0;
        for_each_gauss_point(
            w,
            [&](std::size_t, std::span<const double>, double, std::span<const double> grad, double wt) {
                double n2 = 0.0;
                for (double x : grad)
                    n2 += x * x;
                acc += wt * std::pow(n2, 0.5 * s);
            },
            3);
        return std::pow(acc / g.volume(), 1.0 / s);
    };

    MeyersProbe out;
    out.exponents = exponents;
    double base = 0.0;
    for (double s : exponents) {
        const double ratio = safe_ratio(ls(u, s), ls(fd, s));
        out.ratios.push_back(ratio);
        if (s == 2.0)
            base = ratio;
    }
    for (std::size_t i = 0; i < exponents.size(); ++i)
        if (exponents[i] >= 2.0 && out.ratios[i] <= 2.0 * base)
            out.empirical_exponent = std::max(out.empirical_exponent, exponents[i]);
    return out;
}

}  // namespace homog
