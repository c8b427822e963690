#include "homog/cell.hpp"

#include <algorithm>
#include <cmath>

#include "homog/error.hpp"

namespace homog {

namespace {

Extremes coefficient_extremes(const ElementCoefficients& c)
{
    Extremes e{0.0, std::numeric_limits<double>::infinity()};
    for (std::size_t k = 0; k < c.size(); ++k) {
        Vec ev = sym_eigenvalues(c.matrix(k));
        e.Lam = std::max(e.Lam, ev[ev.size() - 1]);
        e.lam = std::min(e.lam, ev[0]);
    }
    return e;
}

double rel_gap(double a, double b, double scale)
{
    return std::abs(a - b) / (std::abs(a) + std::abs(b) + scale + 1e-300);
}

}  // namespace

//---------------------------------------------------------------------------//

bool QuadraticReport::ordering_holds(double tol) const
{
    const int d = static_cast<int>(a_U.rows());
    const Mat id = Mat::Identity(d, d);
    return psd_leq(lam * id, a_star_U, tol) && psd_leq(a_star_U, a_U, tol) &&
           psd_leq(a_U, Lam * id, tol);
}

void to_json(nlohmann::json& j, const QuadraticReport& r)
{
    auto rows = [](const Mat& m) {
        nlohmann::json out = nlohmann::json::array();
        for (Eigen::Index i = 0; i < m.rows(); ++i) {
            nlohmann::json row = nlohmann::json::array();
            for (Eigen::Index k = 0; k < m.cols(); ++k)
                row.push_back(m(i, k));
            out.push_back(std::move(row));
        }
        return out;
    };
    j = nlohmann::json{{"cube", r.cube ? nlohmann::json(*r.cube) : nlohmann::json()},
                       {"res", r.res},
                       {"a", rows(r.a_U)},
                       {"a_star", rows(r.a_star_U)},
                       {"lam", r.lam},
                       {"Lam", r.Lam}};
}

//---------------------------------------------------------------------------//

CellSolver::CellSolver(const CheckerboardField& field, const TriadicCube& cube, int res,
                       SolverOptions opts)
    : grid_(Grid::on_cube(cube, res)), opts_(opts)
{
    if (!field.covers(cube))
        throw CoverageError("cell problem: cube not covered by field extent");
    coef_ = element_coefficients(grid_, field);
    k_ = assemble_stiffness(grid_, coef_);
    auto e = lambda_extremes(field, cube);
    lam_ = e.lam;
    Lam_ = e.Lam;
}

CellSolver::CellSolver(Grid grid, ElementCoefficients coef, SolverOptions opts)
    : grid_(std::move(grid)), coef_(std::move(coef)), opts_(opts)
{
    k_ = assemble_stiffness(grid_, coef_);
    auto e = coefficient_extremes(coef_);
    lam_ = e.lam;
    Lam_ = e.Lam;
}

GridFunction CellSolver::dirichlet_minimizer(const Vec& p) const
{
    if (p.isZero(0.0))
        return GridFunction(grid_);
    auto lp = GridFunction::affine(grid_, std::span<const double>(p.data(), p.size()));
    return solve_dirichlet(k_, lp, GridFunction(grid_), nullptr, opts_);
}

GridFunction CellSolver::dual_load(const Vec& q) const
{
    const int d = grid_.dim();
    const auto& ref = ReferenceElement::get(d);
    const double scale = std::pow(grid_.h(), d - 1);
    Vec local = scale * (ref.grad.transpose() * q);
    GridFunction g(grid_);
    for (std::size_t e = 0; e < grid_.element_count(); ++e)
        for (int a = 0; a < ref.nv; ++a)
            g[grid_.element_node(e, a)] += local[a];
    // Interior contributions cancel to rounding; clear them exactly.
    for (std::size_t k = 0; k < g.size(); ++k)
        if (!grid_.on_boundary(k))
            g[k] = 0.0;
    return g;
}

GridFunction CellSolver::dual_maximizer(const Vec& q) const
{
    if (q.isZero(0.0))
        return GridFunction(grid_);
    return solve_neumann_free(k_, dual_load(q), nullptr, opts_);
}

double CellSolver::energy(const GridFunction& w, const GridFunction& v) const
{
    return k_.form(w.values, v.values) / grid_.volume();
}

CellValue CellSolver::mu(const Vec& p) const
{
    auto v = dirichlet_minimizer(p);
    const double value = 0.5 * energy(v, v);
    return {value, Optimizer{OptimizerKind::dirichlet_minimizer, p, Vec::Zero(p.size()), std::move(v)}};
}

CellValue CellSolver::mu_star(const Vec& q) const
{
    auto u = dual_maximizer(q);
    auto g = dual_load(q);
    double gu = 0.0;
    for (std::size_t k = 0; k < u.size(); ++k)
        gu += g[k] * u[k];
    const double value = -0.5 * energy(u, u) + gu / grid_.volume();
    return {value, Optimizer{OptimizerKind::dual_maximizer, Vec::Zero(q.size()), q, std::move(u)}};
}

double CellSolver::J(const Vec& p, const Vec& q) const
{
    return mu(p).value + mu_star(q).value - p.dot(q);
}

Optimizer CellSolver::j_maximizer(const Vec& p, const Vec& q) const
{
    auto v = dual_maximizer(q);
    v -= dirichlet_minimizer(p);
    return Optimizer{OptimizerKind::j_maximizer, p, q, std::move(v)};
}

QuadraticReport CellSolver::matrices() const
{
    const int d = grid_.dim();
    QuadraticReport r;
    r.cube = grid_.cube();
    r.res = grid_.res();
    r.lam = lam_;
    r.Lam = Lam_;

    std::vector<GridFunction> v(d), u(d);
    Vec mu_e(d), mus_e(d);
    for (int i = 0; i < d; ++i) {
        Vec e = Vec::Unit(d, i);
        auto m = mu(e);
        auto ms = mu_star(e);
        mu_e[i] = m.value;
        mus_e[i] = ms.value;
        v[i] = std::move(m.optimizer.u);
        u[i] = std::move(ms.optimizer.u);
    }
    Mat a(d, d), b(d, d);
    for (int i = 0; i < d; ++i) {
        a(i, i) = 2.0 * mu_e[i];
        b(i, i) = 2.0 * mus_e[i];
        for (int j = i + 1; j < d; ++j) {
            Vec e = Vec::Unit(d, i) + Vec::Unit(d, j);
            a(i, j) = a(j, i) = mu(e).value - mu_e[i] - mu_e[j];
            b(i, j) = b(j, i) = mu_star(e).value - mus_e[i] - mus_e[j];
        }
    }

    // Flux/gradient averages give the same matrices column by column.
    Mat flux(d, d), grad(d, d);
    for (int i = 0; i < d; ++i) {
        flux.col(i) = mean_gradient(v[i], &coef_);
        grad.col(i) = mean_gradient(u[i]);
    }
    const double scale = std::max(operator_norm(a), 1e-300);
    if (asymmetry(flux) > 1e-8 * scale)
        throw InternalConsistencyError("a(U): flux matrix asymmetry " +
                                       std::to_string(asymmetry(flux)));
    if (asymmetry(grad) > 1e-8 * std::max(operator_norm(b), 1e-300))
        throw InternalConsistencyError("a_*(U): gradient matrix asymmetry " +
                                       std::to_string(asymmetry(grad)));
    r.a_U = a;
    r.a_star_U = b.inverse();
    for (int i = 0; i < d; ++i) {
        r.rq3_residual = std::max(r.rq3_residual, (a.col(i) - flux.col(i)).norm() / scale);
        r.rq4_residual = std::max(r.rq4_residual,
                                  (b.col(i) - grad.col(i)).norm() / operator_norm(b));
    }
    return r;
}

//---------------------------------------------------------------------------//

CellValue mu(const CheckerboardField& field, const TriadicCube& cube, const Vec& p, int res)
{
    return CellSolver(field, cube, res).mu(p);
}

CellValue mu_star(const CheckerboardField& field, const TriadicCube& cube, const Vec& q, int res)
{
    return CellSolver(field, cube, res).mu_star(q);
}

double J(const CheckerboardField& field, const TriadicCube& cube, const Vec& p, const Vec& q,
         int res)
{
    return CellSolver(field, cube, res).J(p, q);
}

Optimizer j_maximizer(const CheckerboardField& field, const TriadicCube& cube, const Vec& p,
                      const Vec& q, int res)
{
    return CellSolver(field, cube, res).j_maximizer(p, q);
}

QuadraticReport matrices(const CheckerboardField& field, const TriadicCube& cube, int res)
{
    return CellSolver(field, cube, res).matrices();
}

//---------------------------------------------------------------------------//

std::vector<std::pair<Vec, Vec>> lemma_probe_directions(int d)
{
    const Vec e1 = Vec::Unit(d, 0);
    const Vec ed = Vec::Unit(d, d - 1);
    const Vec diag = Vec::Ones(d) / std::sqrt(static_cast<double>(d));
    return {
        {e1, Vec::Zero(d)},
        {Vec::Zero(d), e1},
        {e1, e1},
        {ed, 0.5 * e1},
        {diag, -diag},
        {0.3 * e1 - 0.5 * ed, 0.7 * ed},
    };
}

double LemmaDiagnostics::min_slack() const
{
    double m = std::numeric_limits<double>::infinity();
    for (const auto& p : probes)
        m = std::min(m, p.slack);
    return m;
}

double LemmaDiagnostics::max_qr2_residual() const
{
    double m = 0.0;
    for (const auto& p : probes)
        m = std::max(m, p.qr2_residual);
    return m;
}

double LemmaDiagnostics::max_fv_residual() const
{
    double m = 0.0;
    for (const auto& p : probes)
        m = std::max(m, p.fv_residual);
    return m;
}

double LemmaDiagnostics::max_Jq_residual() const
{
    double m = 0.0;
    for (const auto& p : probes)
        m = std::max(m, p.Jq_residual);
    return m;
}

bool LemmaDiagnostics::distance_holds() const
{
    for (const auto& d : distance)
        if (d.lhs > d.rhs * (1.0 + 1e-8) + 1e-10)
            return false;
    return true;
}

void to_json(nlohmann::json& j, const LemmaDiagnostics& d)
{
    nlohmann::json probes = nlohmann::json::array();
    for (const auto& p : d.probes) {
        probes.push_back({{"p", std::vector<double>(p.p.data(), p.p.data() + p.p.size())},
                          {"q", std::vector<double>(p.q.data(), p.q.data() + p.q.size())},
                          {"J_parent", p.J_parent},
                          {"J_children_mean", p.J_children_mean},
                          {"slack", p.slack},
                          {"Jq_residual", p.Jq_residual},
                          {"qr2_lhs", p.qr2_lhs},
                          {"qr2_rhs", p.qr2_rhs},
                          {"qr2_residual", p.qr2_residual},
                          {"fv_residual", p.fv_residual}});
    }
    nlohmann::json dist = nlohmann::json::array();
    for (const auto& m : d.distance)
        dist.push_back({{"a_tilde", m.label}, {"lhs", m.lhs}, {"rhs", m.rhs}});
    j = nlohmann::json{{"cube", d.cube},
                       {"res", d.res},
                       {"probes", std::move(probes)},
                       {"matrix_distance", std::move(dist)},
                       {"distance_constant", d.distance_constant},
                       {"harmonic_basis_size", d.harmonic_basis_size}};
}

LemmaDiagnostics verify_lemma_properties(const CheckerboardField& field, const TriadicCube& cube,
                                         int res, std::size_t max_basis)
{
    if (cube.scale < 1)
        throw PreconditionError("verify_lemma_properties needs a cube with children");
    const int d = cube.dim();
    CellSolver parent(field, cube, res);
    auto kids = cube.children();
    std::vector<CellSolver> children;
    children.reserve(kids.size());
    for (const auto& c : kids)
        children.emplace_back(field, c, res);

    const Grid& g = parent.grid();
    const double vol = g.volume();

    // Harmonic extensions of (a strided subset of) boundary nodal basis functions.
    std::vector<std::size_t> bnodes;
    for (std::size_t k = 0; k < g.node_count(); ++k)
        if (g.on_boundary(k))
            bnodes.push_back(k);
    const std::size_t stride = std::max<std::size_t>(1, (bnodes.size() + max_basis - 1) / max_basis);
    std::vector<GridFunction> basis;
    for (std::size_t i = 0; i < bnodes.size(); i += stride) {
        GridFunction bc(g);
        bc[bnodes[i]] = 1.0;
        basis.push_back(solve_dirichlet(parent.stiffness(), bc, GridFunction(g)));
    }

    LemmaDiagnostics out;
    out.cube = cube;
    out.res = res;
    out.harmonic_basis_size = basis.size();
    out.distance_constant = std::sqrt(2.0);

    for (const auto& [p, q] : lemma_probe_directions(d)) {
        LemmaProbe pr;
        pr.p = p;
        pr.q = q;
        const double mu_p = parent.mu(p).value;
        const double mus_q = parent.mu_star(q).value;
        pr.J_parent = mu_p + mus_q - p.dot(q);
        const double scale = mu_p + mus_q + std::abs(p.dot(q));

        auto v = parent.j_maximizer(p, q);
        pr.Jq_residual = rel_gap(pr.J_parent, 0.5 * parent.energy(v.u, v.u), scale);

        double jsum = 0.0, lhs = 0.0;
        for (const auto& child : children) {
            const double jc = child.J(p, q);
            jsum += jc;
            auto vc = child.j_maximizer(p, q);
            auto diff = v.u.restrict_to(child.grid());
            diff -= vc.u;
            lhs += 0.5 * child.energy(diff, diff);
        }
        const double nkids = static_cast<double>(children.size());
        pr.J_children_mean = jsum / nkids;
        pr.slack = pr.J_children_mean - pr.J_parent;
        pr.qr2_lhs = lhs / nkids;
        pr.qr2_rhs = pr.slack;
        pr.qr2_residual = rel_gap(pr.qr2_lhs, pr.qr2_rhs, scale);

        // avg grad w . a grad v = avg(-p . a grad w + q . grad w) for harmonic w.
        auto lp = GridFunction::affine(g, std::span<const double>(p.data(), p.size()));
        auto gq = parent.dual_load(q);
        const double ev = parent.energy(v.u, v.u);
        for (const auto& w : basis) {
            const double l = parent.energy(w, v.u);
            double gw = 0.0;
            for (std::size_t k = 0; k < w.size(); ++k)
                gw += gq[k] * w[k];
            const double r = -parent.energy(lp, w) + gw / vol;
            const double ew = parent.energy(w, w);
            const double norm = std::sqrt(ew) * std::sqrt(ev + parent.Lam() * p.squaredNorm() +
                                                          q.squaredNorm() / parent.lam());
            pr.fv_residual = std::max(pr.fv_residual, std::abs(l - r) / (norm + 1e-300));
        }
        out.probes.push_back(std::move(pr));
    }

    // Matrix distance for several reference matrices.
    auto rep = parent.matrices();
    Mat child_mean = Mat::Zero(d, d);
    for (const auto& child : children)
        child_mean += child.matrices().a_U;
    child_mean /= static_cast<double>(children.size());
    double cell_mean = 0.0;
    for (double b : field.cells())
        cell_mean += b;
    cell_mean /= static_cast<double>(field.cells().size());

    const std::pair<std::string, Mat> refs[] = {
        {"a(U)", rep.a_U},
        {"a_*(U)", rep.a_star_U},
        {"mean child a", child_mean},
        {"arithmetic mean Id", cell_mean * Mat::Identity(d, d)},
    };
    const Mat as_inv = rep.a_star_inv();
    for (const auto& [label, at] : refs) {
        MatrixDistanceProbe m;
        m.label = label;
        m.a_tilde = at;
        Mat s = 0.5 * rep.a_U + 0.5 * at.transpose() * as_inv * at - symmetrize(at);
        Eigen::SelfAdjointEigenSolver<Mat> es(symmetrize(s));
        Vec pstar = es.eigenvectors().col(d - 1);
        double sup = std::max(0.0, es.eigenvalues()[d - 1]);
        // Direct evaluation by solves at the maximizing direction.
        sup = std::max(sup, parent.J(pstar, at * pstar));
        m.lhs = operator_norm(rep.a_U - at);
        m.rhs = out.distance_constant * std::sqrt(parent.Lam()) * std::sqrt(sup);
        out.distance.push_back(std::move(m));
    }
    return out;
}

}  // namespace homog
