#pragma once

#include <cstdint>
#include <vector>

#include "homog/field.hpp"
#include "homog/grid.hpp"
#include "homog/law.hpp"

namespace homog {

enum class NormKind { L2_normalized, H1_normalized, Hminus1_underline, Hminus1_hat };

/*!
 * Normalized norms on a cube or box grid.
 *
 * L2: (avg u^2)^{1/2}. H1: |U|^{-1/d} ||u||_L2 + ||grad u||_L2.
 * Dual norms: sup avg(u v) / ||v||_H over v in H^1_0 (underline) or H^1
 * (hat), with the Hilbert norm ||v||_H^2 = |U|^{-2/d} ||v||^2 + ||grad v||^2
 * in normalized L2 norms. This is within a factor sqrt(2) of the sum form.
 */
double norm(const GridFunction& u, NormKind kind);

/// Dual norm of the vector field F = c grad u - shift (c = identity when null),
/// as (sum_k ||F_k||^2)^{1/2}. Only the two H^-1 kinds are accepted.
double dual_norm_of_field(const GridFunction& u, const ElementCoefficients* coef, const Vec& shift,
                          NormKind kind);

/// Dual norm for linear functionals given by nodal loads L(b) = int F phi_b.
double dual_norm_of_loads(const Grid& grid, const std::vector<std::vector<double>>& loads,
                          NormKind kind);

//---------------------------------------------------------------------------//
/// sum_{m<n} 3^m (3^{-(n-m)d} sum_y |avg_{y + box_m} u|^2)^{1/2} on a scale-n cube grid.
double multiscale_sum(const GridFunction& u, int n);
/// Same with the vector field grad v in place of u.
double multiscale_sum_gradient(const GridFunction& v, int n);

struct MpiRecord {
    /// ||u||_hat / (||u||_L2 + S(u))
    double u_ratio = 0.0;
    /// ||v - (v)||_L2 / ||grad v||_hat
    double v_poincare = 0.0;
    /// ||grad v||_hat / (||grad v||_L2 + S(grad v))
    double v_gradient = 0.0;
    /// Same two ratios for w = u with zeroed boundary values.
    double w_poincare = 0.0;
    double w_gradient = 0.0;

    double max() const;
};

MpiRecord check_mpi(const GridFunction& u, int n);

//---------------------------------------------------------------------------//
struct CaccioppoliRecord {
    double ratio = 0.0;
    double grad_inner = 0.0;  ///< ||grad u||_L2(r box)
    double osc_outer = 0.0;   ///< ||u - mean||_L2(3r box)
    double lam = 0.0;
    double Lam = 0.0;
    double residual = 0.0;  ///< relative interior residual of u
};

/*!
 * ||grad u||_L2(r box) r lam / (Lam ||u - mean||_L2(3r box)).
 *
 * u lives on a grid of the box (-3r, 3r)^d whose nodes include +-r. Throws
 * PreconditionError when u is not discrete a-harmonic (residual > 1e-6).
 */
CaccioppoliRecord check_caccioppoli(const CheckerboardField& field, double r, const GridFunction& u);

/// Grid of (-3r, 3r)^d with spacing 1/res.
Grid caccioppoli_grid(int dim, double r, int res);

//---------------------------------------------------------------------------//
struct MaxMomentRecord {
    double lhs = 0.0;     ///< Monte Carlo E[max_i |X_i|^p]
    double stderr_ = 0.0;
    double rhs = 0.0;     ///< 2^{p-1} {(p-1)^p + [log(n E e^|X|)]^p}
    double exp_moment = 0.0;
    double margin() const { return rhs - lhs; }
    bool holds() const { return lhs <= rhs + 3.0 * stderr_; }
};

/// X_i i.i.d. from law. Throws LawUnsuitableError if E e^|X| diverges.
MaxMomentRecord check_max_moment(const MarginalLaw& law, std::int64_t count, double p,
                                 std::int64_t samples, std::uint64_t seed);

//---------------------------------------------------------------------------//
struct MeyersProbe {
    std::vector<double> exponents;
    /// ||grad u||_Ls / ||grad f||_Ls per exponent.
    std::vector<double> ratios;
    /// Largest probed s with ratio(s) <= 2 ratio(2).
    double empirical_exponent = 2.0;
};

/// u solves the Dirichlet problem on the cube with data f; gradient norms by
/// 3-point Gauss quadrature.
MeyersProbe meyers_probe(const CheckerboardField& field, const TriadicCube& cube, int res,
                         const std::function<double(std::span<const double>)>& f,
                         const std::vector<double>& exponents = {2.0, 2.5, 3.0, 4.0, 6.0, 8.0});

}  // namespace homog
