#pragma once

#include <optional>
#include <vector>

#include "homog/field.hpp"
#include "homog/grid.hpp"
#include "json.hpp"

namespace homog {

enum class OptimizerKind { dirichlet_minimizer, dual_maximizer, j_maximizer };

/// Optimizing grid function of mu, mu_* or J for fixed directions.
struct Optimizer {
    OptimizerKind kind;
    Vec p;
    Vec q;
    GridFunction u;
};

struct CellValue {
    double value;
    Optimizer optimizer;
};

//---------------------------------------------------------------------------//
/*!
 * a(U), a_*(U) on one sample, with mu, mu_* and J as quadratic forms:
 *   mu(p) = p.a p / 2, mu_*(q) = q.a_*^{-1} q / 2, J = mu + mu_* - p.q.
 */
struct QuadraticReport {
    std::optional<TriadicCube> cube;
    int res = 0;
    Mat a_U;
    Mat a_star_U;
    double lam = 0.0;
    double Lam = 0.0;

    /// max_i |a(U) e_i - avg a grad v(., U, e_i)| / |a(U)|.
    double rq3_residual = 0.0;
    /// max_i |a_*^{-1} e_i - avg grad v(., U, 0, e_i)| / |a_*^{-1}|.
    double rq4_residual = 0.0;

    Mat a_star_inv() const { return a_star_U.inverse(); }
    double mu(const Vec& p) const { return 0.5 * p.dot(a_U * p); }
    double mu_star(const Vec& q) const { return 0.5 * q.dot(a_star_inv() * q); }
    double J(const Vec& p, const Vec& q) const { return mu(p) + mu_star(q) - p.dot(q); }

    /// lam Id <= a_* <= a <= Lam Id, eigenvalue tolerance tol.
    bool ordering_holds(double tol = 1e-8) const;
};

void to_json(nlohmann::json& j, const QuadraticReport& r);

//---------------------------------------------------------------------------//
/*!
 * Discrete cell problems on one grid with a fixed coefficient.
 *
 * The stiffness operator is assembled once; every query is a single sparse
 * solve. Instances are immutable and safe to share across threads.
 */
class CellSolver {
public:
    CellSolver(const CheckerboardField& field, const TriadicCube& cube, int res,
               SolverOptions opts = {});
    CellSolver(Grid grid, ElementCoefficients coef, SolverOptions opts = {});

    const Grid& grid() const noexcept { return grid_; }
    const ElementCoefficients& coefficients() const noexcept { return coef_; }
    const SparseOperator& stiffness() const noexcept { return k_; }
    double lam() const noexcept { return lam_; }
    double Lam() const noexcept { return Lam_; }
    double volume() const noexcept { return grid_.volume(); }

    /// v(., U, p): Dirichlet minimizer with boundary data l_p.
    GridFunction dirichlet_minimizer(const Vec& p) const;
    /// g_q(k) = int q . grad phi_k.
    GridFunction dual_load(const Vec& q) const;
    /// Mean-zero maximizer of mu_*(U, q).
    GridFunction dual_maximizer(const Vec& q) const;

    CellValue mu(const Vec& p) const;
    CellValue mu_star(const Vec& q) const;
    /// mu + mu_* - p.q.
    double J(const Vec& p, const Vec& q) const;
    /// v(., U, p, q) = (dual maximizer of q) - v(., U, p).
    Optimizer j_maximizer(const Vec& p, const Vec& q) const;
    /// (1/|U|) int grad w . a grad v.
    double energy(const GridFunction& w, const GridFunction& v) const;

    QuadraticReport matrices() const;

private:
    Grid grid_;
    ElementCoefficients coef_;
    SparseOperator k_;
    SolverOptions opts_;
    double lam_ = 0.0;
    double Lam_ = 0.0;
};

CellValue mu(const CheckerboardField& field, const TriadicCube& cube, const Vec& p, int res);
CellValue mu_star(const CheckerboardField& field, const TriadicCube& cube, const Vec& q, int res);
double J(const CheckerboardField& field, const TriadicCube& cube, const Vec& p, const Vec& q,
         int res);
Optimizer j_maximizer(const CheckerboardField& field, const TriadicCube& cube, const Vec& p,
                      const Vec& q, int res);
QuadraticReport matrices(const CheckerboardField& field, const TriadicCube& cube, int res);

//---------------------------------------------------------------------------//
struct LemmaProbe {
    Vec p;
    Vec q;
    double J_parent = 0.0;
    double J_children_mean = 0.0;
    /// J_children_mean - J_parent; nonnegative by subadditivity.
    double slack = 0.0;
    /// Energy identity J = (1/2) avg grad v . a grad v, relative gap.
    double Jq_residual = 0.0;
    /// Quadratic response, both sides and relative gap.
    double qr2_lhs = 0.0;
    double qr2_rhs = 0.0;
    double qr2_residual = 0.0;
    /// First variation against harmonic extensions of boundary nodal data.
    double fv_residual = 0.0;
};

struct MatrixDistanceProbe {
    std::string label;
    Mat a_tilde;
    double lhs = 0.0;  ///< |a(U) - a_tilde|
    double rhs = 0.0;  ///< C Lam^{1/2} sup_p J(U, p, a_tilde p)^{1/2}
};

struct LemmaDiagnostics {
    TriadicCube cube;
    int res = 0;
    std::vector<LemmaProbe> probes;
    std::vector<MatrixDistanceProbe> distance;
    /// Constant in |a(U) - a~| <= C Lam^{1/2} sup J^{1/2}.
    double distance_constant = 0.0;
    std::size_t harmonic_basis_size = 0;

    double min_slack() const;
    double max_qr2_residual() const;
    double max_fv_residual() const;
    double max_Jq_residual() const;
    bool distance_holds() const;
};

void to_json(nlohmann::json& j, const LemmaDiagnostics& d);

/// Subadditivity, quadratic response, first variation and matrix distance on
/// cube and its triadic children. Requires cube.scale >= 1.
LemmaDiagnostics verify_lemma_properties(const CheckerboardField& field, const TriadicCube& cube,
                                         int res, std::size_t max_basis = 64);

/// The six fixed (p, q) probes used by verify_lemma_properties.
std::vector<std::pair<Vec, Vec>> lemma_probe_directions(int dim);

}  // namespace homog
