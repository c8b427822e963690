#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "homog/cell.hpp"
#include "homog/field.hpp"
#include "homog/grid.hpp"
#include "homog/law.hpp"
#include "json.hpp"

namespace homog {

/// Axis-aligned box U inside box_0.
struct Box {
    std::vector<double> lo;
    std::vector<double> hi;

    int dim() const { return static_cast<int>(lo.size()); }
    static Box symmetric(int dim, double half_width);
    std::string to_string() const;
};

//---------------------------------------------------------------------------//
/*!
 * Boundary datum f from a fixed catalog.
 *
 * affine: p.x. quadratic: p.x + x^T Q x. sine: prod_i sin(pi x_i).
 * Spec strings: "affine:p1,...,pd", "quadratic:p1,...,pd;q11,q12,...,qdd", "sine".
 */
struct BoundaryDatum {
    enum class Kind { affine, quadratic, sine };
    Kind kind = Kind::affine;
    Vec p;
    Mat Q;

    static BoundaryDatum affine(const Vec& p);
    static BoundaryDatum quadratic(const Vec& p, const Mat& Q);
    static BoundaryDatum sine(int dim);
    /// Throws ConfigError.
    static BoundaryDatum parse(const std::string& spec, int dim);
    std::string to_spec() const;

    double value(std::span<const double> x) const;
    Vec gradient(std::span<const double> x) const;
    int dim() const { return static_cast<int>(p.size()); }
};

//---------------------------------------------------------------------------//
/// Grid of U snapped inward to the lattice eps/2 + Z h, h = eps / res, eps = 3^-n,
/// so element faces contain every eps-cell face. Throws ResolutionError when
/// the snapped box has fewer than two elements per side.
Grid experiment_grid(const Box& u, int n, int res);

/// u^eps with coefficient a(x / eps); residual at most 1e-10 relative.
GridFunction solve_oscillating(const CheckerboardField& field, int n, const Box& u,
                               const BoundaryDatum& f, int res);
GridFunction solve_oscillating(const CheckerboardField& field, int n, const Grid& grid,
                               const BoundaryDatum& f);

/// Constant-coefficient solve with the same data.
GridFunction solve_homogenized(const Mat& abar, const Grid& grid, const BoundaryDatum& f);
GridFunction solve_homogenized(const Mat& abar, const Box& u, const BoundaryDatum& f, int n, int res);

//---------------------------------------------------------------------------//
/// phi_{n,e_i} = v(., box_n, e_i) - l_{e_i} on the box_n grid (zero trace).
struct Corrector {
    int direction = 0;
    int n = 0;
    GridFunction phi;
};

std::vector<Corrector> correctors(const CellSolver& cell, int n);

/// 10t^3 - 15t^4 + 6t^5 on [0, 1], clamped outside.
double cutoff_profile(double t);

/// eta_r(x) = prod_i s((dist_i(x) - r) / r), dist_i the distance to the two
/// faces normal to e_i: 1 on U_{2r}, 0 off U_r. Throws ResolutionError when
/// r / h < 4.
GridFunction cutoff(const Grid& grid, const Box& u, double r);

/// w(x) = u(x) + eps eta_r(x) sum_i d_i u(x) phi_i(x / eps), d_i u by centered
/// differences (one-sided on the boundary of the grid).
GridFunction two_scale_expansion(const GridFunction& u, const std::vector<Corrector>& correctors,
                                 int n, const Box& box, double r);

/// Centered-difference gradient component at every node.
GridFunction difference_gradient(const GridFunction& u, int i);

//---------------------------------------------------------------------------//
/*!
 * Psi(eps) = sum_i (eps ||phi_i||_L2 + eps ||a (e_i + grad phi_i) - abar e_i||_H-1)^2,
 * in normalized norms on box_n (underline dual norm); by the scaling laws
 * this is the same quantity on eps box_n.
 */
double psi(const CellSolver& cell, const std::vector<Corrector>& correctors, const Mat& abar, int n);

/// ((Lam^3 + Lam)/lam)^{1/2} eps + (((Lam^2 + 1)/lam)^{1/2} + 1) Omega^{1/2}.
double phi(double Lam, double lam, double eps, double omega);

struct FluxGradientProbe {
    double gradient_lhs = 0.0;  ///< ||grad v(., box_n, p) - p||^2_hat
    double flux_lhs = 0.0;      ///< ||a grad v - abar p||^2_hat
    double rhs_shape = 0.0;     ///< Lam/lam + 3^{2n} Omega / lam
    double gradient_ratio() const { return rhs_shape > 0.0 ? gradient_lhs / rhs_shape : 0.0; }
    double flux_ratio() const { return rhs_shape > 0.0 ? flux_lhs / rhs_shape : 0.0; }
};

/// Weak convergence of gradient and flux on box_n for p = e_1.
FluxGradientProbe flux_gradient_probe(const CheckerboardField& field, int n, int res, const Mat& abar);

//---------------------------------------------------------------------------//
struct DirichletRecord {
    int sample = 0;
    std::uint64_t seed = 0;
    int n = 0;
    double eps = 0.0;
    double r = 0.0;
    double l2_error = 0.0;       ///< ||u - u^eps||_L2(U)
    double h1_homog = 0.0;       ///< ||u^eps - u||_H1 (normalized)
    double h1_two_scale = 0.0;   ///< ||u^eps - w^eps||_H1 (normalized); NaN if r unresolved
    double grad_two_scale = 0.0; ///< ||grad u^eps - grad w^eps||_L2 (normalized)
    double psi = 0.0;
    double phi = 0.0;
    double omega = 0.0;
    double lam = 0.0;
    double Lam = 0.0;
    double runtime_ms = 0.0;
    bool two_scale_resolved() const;
};

struct DirichletAggregate {
    int n = 0;
    double eps = 0.0;
    int N = 0;
    double mean_l2 = 0.0;   ///< E||u - u^eps||
    double rms_l2 = 0.0;    ///< E[||u - u^eps||^2]^{1/2}
    double mean_sq = 0.0;   ///< E||u - u^eps||^2
    double sq_se = 0.0;
    /// (mean_sq(n) - mean_sq(n+1)) over 2 se of the paired difference.
    double drop_over_2se = 0.0;
};

struct DirichletReport {
    MarginalLaw law = MarginalLaw::constant(1.0);
    int dim = 0;
    Box box;
    BoundaryDatum f;
    Mat abar;
    std::string abar_source;
    int res = 0;
    std::vector<DirichletRecord> records;
    std::vector<DirichletAggregate> aggregates;
    /// mean_sq strictly decreases at every step (point estimates).
    bool strictly_decreasing = false;
    /// Aggregate error non-increasing up to 2 standard errors.
    bool non_increasing = false;

    /// Fraction of samples at (n, r) with h1_two_scale <= h1_homog / 2.
    double two_scale_fraction(int n, double r) const;
};

struct ExperimentOptions {
    int threads = 0;
    std::optional<Mat> abar;  ///< default: closed form, else a scale-study estimate
    bool with_phi = true;
};

DirichletReport error_experiment(const MarginalLaw& law, int dim, const Box& box,
                                 const BoundaryDatum& f, const std::vector<int>& n_range,
                                 const std::vector<double>& r_grid, int N, int res,
                                 std::uint64_t master_seed, const ExperimentOptions& opts = {});

/// E||u - u^eps||_L2^2 ~ eps Var(1/b) L^2 / (6 E[1/b]^2) for f = x on a 1-d interval of length L.
double oscillation_error_1d(const MarginalLaw& law, double eps, double length);

/// seed,eps,r,l2_error,psi,phi,lam,Lam,runtime_ms plus sample, n, h1 and omega columns.
std::string dirichlet_csv(const DirichletReport& r, bool timings);
void to_json(nlohmann::json& j, const DirichletReport& r);

}  // namespace homog
