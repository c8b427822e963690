#pragma once

#include <array>
#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "homog/field.hpp"
#include "homog/linalg.hpp"

namespace homog {

//---------------------------------------------------------------------------//
/*!
 * Uniform tensor grid of multilinear elements on an axis-aligned box.
 *
 * Nodes are x = origin + h * i, i in {0..n_i}^d, numbered with the first
 * coordinate slowest. Grids built on triadic cubes have h = 1/res, so element
 * faces fall on unit-cell faces and a checkerboard coefficient is constant on
 * every element.
 */
class Grid {
public:
    static Grid on_cube(const TriadicCube& cube, int res);
    /// Box [lo, lo + counts*h].
    static Grid on_box(std::span<const double> lo, std::span<const int> counts, double h);

    int dim() const noexcept { return dim_; }
    double h() const noexcept { return h_; }
    /// Elements per unit length for cube grids, 0 otherwise.
    int res() const noexcept { return res_; }
    const std::optional<TriadicCube>& cube() const noexcept { return cube_; }
    double origin(int i) const noexcept { return origin_[i]; }
    int elements(int i) const noexcept { return n_el_[i]; }
    int nodes(int i) const noexcept { return n_el_[i] + 1; }
    double lo(int i) const noexcept { return origin_[i]; }
    double hi(int i) const noexcept { return origin_[i] + h_ * n_el_[i]; }

    std::size_t node_count() const noexcept;
    std::size_t element_count() const noexcept;
    double volume() const noexcept;

    std::size_t node_index(std::span<const int> i) const noexcept;
    std::array<int, 3> node_multi(std::size_t k) const noexcept;
    std::array<double, 3> node_coord(std::size_t k) const noexcept;
    bool on_boundary(std::size_t k) const noexcept;

    std::array<int, 3> element_multi(std::size_t e) const noexcept;
    /// Global node of local vertex l (bit i of l = upper side in dimension i).
    std::size_t element_node(std::size_t e, int l) const noexcept;
    std::array<double, 3> element_center(std::size_t e) const noexcept;
    int vertices_per_element() const noexcept { return 1 << dim_; }

    /// Node offset of this grid inside `big` when it is an exact sub-grid.
    std::optional<std::array<int, 3>> offset_in(const Grid& big) const;

    friend bool operator==(const Grid& a, const Grid& b);

private:
    int dim_ = 0;
    double h_ = 0.0;
    int res_ = 0;
    std::array<double, 3> origin_{};
    std::array<int, 3> n_el_{1, 1, 1};
    std::optional<TriadicCube> cube_;
};

//---------------------------------------------------------------------------//
/// Nodal values of a multilinear function on a grid.
struct GridFunction {
    Grid grid;
    std::vector<double> values;

    GridFunction() = default;
    explicit GridFunction(Grid g) : grid(std::move(g)), values(grid.node_count(), 0.0) {}
    GridFunction(Grid g, std::vector<double> v);

    static GridFunction interpolate(const Grid& g, const std::function<double(std::span<const double>)>& f);
    /// Nodal interpolant of l_p(x) = p.x.
    static GridFunction affine(const Grid& g, std::span<const double> p);

    std::size_t size() const noexcept { return values.size(); }
    double& operator[](std::size_t k) { return values[k]; }
    double operator[](std::size_t k) const { return values[k]; }

    GridFunction& operator+=(const GridFunction& o);
    GridFunction& operator-=(const GridFunction& o);
    GridFunction& operator*=(double s);

    /// Values on a sub-grid (same spacing, node-aligned). Throws CoverageError.
    GridFunction restrict_to(const Grid& sub) const;
    /// Zero outside this grid's nodes.
    GridFunction extend_by_zero(const Grid& big) const;

    /// Integral mean (1/|U|) int u.
    double mean() const;
    double max_abs() const;
};

GridFunction operator+(GridFunction a, const GridFunction& b);
GridFunction operator-(GridFunction a, const GridFunction& b);
GridFunction operator*(double s, GridFunction a);

//---------------------------------------------------------------------------//
/// Symmetric sparse matrix in compressed row storage.
class SparseOperator {
public:
    SparseOperator() = default;
    SparseOperator(std::size_t n, std::vector<std::size_t> row_ptr, std::vector<std::size_t> cols,
                   std::vector<double> vals);

    std::size_t size() const noexcept { return n_; }
    std::size_t nonzeros() const noexcept { return vals_.size(); }
    void apply(std::span<const double> x, std::span<double> y) const;
    std::vector<double> apply(std::span<const double> x) const;
    double entry(std::size_t i, std::size_t j) const;
    std::vector<double> diagonal() const;
    /// max_ij |K_ij - K_ji|.
    double asymmetry() const;
    /// u^T K v.
    double form(std::span<const double> u, std::span<const double> v) const;
    Mat to_dense() const;

    const std::vector<std::size_t>& row_ptr() const noexcept { return row_ptr_; }
    const std::vector<std::size_t>& cols() const noexcept { return cols_; }
    const std::vector<double>& vals() const noexcept { return vals_; }

private:
    std::size_t n_ = 0;
    std::vector<std::size_t> row_ptr_;
    std::vector<std::size_t> cols_;
    std::vector<double> vals_;
};

//---------------------------------------------------------------------------//
/// Reference-element integrals for Q1 elements on the unit cube [0,1]^d.
struct ReferenceElement {
    explicit ReferenceElement(int dim);

    int dim;
    int nv;
    /// stiff[k][l](a,b) = int d_k phi_a d_l phi_b
    std::vector<std::vector<Mat>> stiff;
    /// mass(a,b) = int phi_a phi_b
    Mat mass;
    /// grad(k, a) = int d_k phi_a
    Mat grad;
    /// mixed[k](a,b) = int phi_a d_k phi_b
    std::vector<Mat> mixed;

    static const ReferenceElement& get(int dim);
};

/// One coefficient matrix per element, d*d entries each, row-major.
struct ElementCoefficients {
    int dim = 0;
    std::vector<double> data;

    std::size_t size() const noexcept { return dim ? data.size() / (dim * dim) : 0; }
    Mat matrix(std::size_t e) const;
    /// Largest eigenvalue on element e (the entry itself for scalar fields).
    double scalar(std::size_t e) const { return data[e * dim * dim]; }
};

/// a(x / scale) sampled at element centers. Throws CoverageError.
ElementCoefficients element_coefficients(const Grid& grid, const CheckerboardField& field,
                                         double scale = 1.0);
ElementCoefficients constant_coefficients(const Grid& grid, const Mat& a);

/// w^T K v = sum_e int_e grad w . a grad v, exact for multilinear w, v.
SparseOperator assemble_stiffness(const Grid& grid, const ElementCoefficients& coef);
SparseOperator assemble_stiffness(const Grid& grid, const CheckerboardField& field);
SparseOperator assemble_mass(const Grid& grid);

//---------------------------------------------------------------------------//
struct SolveStats {
    long iterations = 0;
    double residual = 0.0;
};

struct SolverOptions {
    double tolerance = 1e-10;
    /// Iteration cap 50 sqrt(unknowns) + 1000 when negative.
    long max_iterations = -1;
};

/// K u = rhs at interior nodes, u = boundary at boundary nodes.
GridFunction solve_dirichlet(const SparseOperator& k, const GridFunction& boundary,
                             const GridFunction& rhs, SolveStats* stats = nullptr,
                             const SolverOptions& opts = {});

/// K u = load with zero integral mean. Throws CompatibilityError when
/// |sum load| > 1e-8 * ||load||_1.
GridFunction solve_neumann_free(const SparseOperator& k, const GridFunction& load,
                                SolveStats* stats = nullptr, const SolverOptions& opts = {});

/// Diagonally preconditioned CG on the rows/cols where mask is true; x is the
/// initial guess on entry. Entries outside the mask are left untouched. With
/// deflate set, iterates are kept orthogonal to the constant vector.
SolveStats pcg(const SparseOperator& a, std::span<const double> b, std::span<double> x,
               const std::vector<char>& mask, const SolverOptions& opts, bool deflate = false);

//---------------------------------------------------------------------------//
// Integrals of grid functions.

/// int_e grad u for every element (element-major, dim entries each).
std::vector<double> element_gradient_integrals(const GridFunction& u);
/// int_e u for every element.
std::vector<double> element_integrals(const GridFunction& u);
/// (1/|U|) int |grad u|^2 (coefficient-weighted when coef is given).
double mean_gradient_energy(const GridFunction& u, const ElementCoefficients* coef = nullptr);
/// (1/|U|) int u^2.
double mean_square(const GridFunction& u);
/// (1/|U|) int grad u, and (1/|U|) int a grad u when coef is given.
Vec mean_gradient(const GridFunction& u, const ElementCoefficients* coef = nullptr);

/// Loads L_k(b) = int (c_e grad u - shift)_k phi_b for each component k, where
/// c_e is the element coefficient (identity when coef is null).
std::vector<std::vector<double>> flux_loads(const GridFunction& u, const ElementCoefficients* coef,
                                            const Vec& shift);

/// Visit 2-point-per-axis Gauss points: f(element, x, u(x), grad u(x), weight).
void for_each_gauss_point(
    const GridFunction& u,
    const std::function<void(std::size_t, std::span<const double>, double, std::span<const double>,
                             double)>& f,
    int points_per_axis = 2);

}  // namespace homog
