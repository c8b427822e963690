#include "homog/grid.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "homog/error.hpp"
#include "homog/rng.hpp"

namespace homog {

namespace {

constexpr double kSnap = 1e-9;

long default_cap(std::size_t unknowns)
{
    return static_cast<long>(50.0 * std::sqrt(static_cast<double>(unknowns))) + 1000;
}

double dot(std::span<const double> a, std::span<const double> b)
{
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
        s += a[i] * b[i];
    return s;
}

}  // namespace

//---------------------------------------------------------------------------//
// Grid

Grid Grid::on_cube(const TriadicCube& cube, int res)
{
    if (res < 1)
        throw ConfigError("res must be >= 1");
    const int d = cube.dim();
    if (d < 1 || d > 3)
        throw ConfigError("grid dimension must be 1, 2 or 3");
    Grid g;
    g.dim_ = d;
    g.res_ = res;
    g.h_ = 1.0 / res;
    g.cube_ = cube;
    const double half = 0.5 * static_cast<double>(cube.side());
    for (int i = 0; i < d; ++i) {
        g.origin_[i] = static_cast<double>(cube.offset[i]) - half;
        g.n_el_[i] = static_cast<int>(res * cube.side());
    }
    return g;
}

Grid Grid::on_box(std::span<const double> lo, std::span<const int> counts, double h)
{
    const int d = static_cast<int>(lo.size());
    if (d < 1 || d > 3 || counts.size() != lo.size())
        throw ConfigError("grid dimension must be 1, 2 or 3");
    if (!(h > 0.0))
        throw ConfigError("grid spacing must be positive");
    Grid g;
    g.dim_ = d;
    g.h_ = h;
    for (int i = 0; i < d; ++i) {
        if (counts[i] < 1)
            throw ConfigError("grid needs at least one element per axis");
        g.origin_[i] = lo[i];
        g.n_el_[i] = counts[i];
    }
    return g;
}

std::size_t Grid::node_count() const noexcept
{
    std::size_t n = 1;
    for (int i = 0; i < dim_; ++i)
        n *= static_cast<std::size_t>(n_el_[i] + 1);
    return n;
}

std::size_t Grid::element_count() const noexcept
{
    std::size_t n = 1;
    for (int i = 0; i < dim_; ++i)
        n *= static_cast<std::size_t>(n_el_[i]);
    return n;
}

double Grid::volume() const noexcept
{
    double v = 1.0;
    for (int i = 0; i < dim_; ++i)
        v *= h_ * n_el_[i];
    return v;
}

std::size_t Grid::node_index(std::span<const int> idx) const noexcept
{
    std::size_t k = 0;
    for (int i = 0; i < dim_; ++i)
        k = k * static_cast<std::size_t>(n_el_[i] + 1) + static_cast<std::size_t>(idx[i]);
    return k;
}

std::array<int, 3> Grid::node_multi(std::size_t k) const noexcept
{
    std::array<int, 3> idx{};
    for (int i = dim_ - 1; i >= 0; --i) {
        const auto n = static_cast<std::size_t>(n_el_[i] + 1);
        idx[i] = static_cast<int>(k % n);
        k /= n;
    }
    return idx;
}

std::array<double, 3> Grid::node_coord(std::size_t k) const noexcept
{
    auto idx = node_multi(k);
    std::array<double, 3> x{};
    for (int i = 0; i < dim_; ++i)
        x[i] = origin_[i] + h_ * idx[i];
    return x;
}

bool Grid::on_boundary(std::size_t k) const noexcept
{
    auto idx = node_multi(k);
    for (int i = 0; i < dim_; ++i) {
        if (idx[i] == 0 || idx[i] == n_el_[i])
            return true;
    }
    return false;
}

std::array<int, 3> Grid::element_multi(std::size_t e) const noexcept
{
    std::array<int, 3> idx{};
    for (int i = dim_ - 1; i >= 0; --i) {
        const auto n = static_cast<std::size_t>(n_el_[i]);
        idx[i] = static_cast<int>(e % n);
        e /= n;
    }
    return idx;
}

std::size_t Grid::element_node(std::size_t e, int l) const noexcept
{
    auto idx = element_multi(e);
    for (int i = 0; i < dim_; ++i)
        idx[i] += (l >> i) & 1;
    return node_index(std::span<const int>(idx.data(), dim_));
}

std::array<double, 3> Grid::element_center(std::size_t e) const noexcept
{
    auto idx = element_multi(e);
    std::array<double, 3> x{};
    for (int i = 0; i < dim_; ++i)
        x[i] = origin_[i] + h_ * (idx[i] + 0.5);
    return x;
}

std::optional<std::array<int, 3>> Grid::offset_in(const Grid& big) const
{
    if (big.dim_ != dim_ || std::abs(big.h_ - h_) > kSnap * h_)
        return std::nullopt;
    std::array<int, 3> off{};
    for (int i = 0; i < dim_; ++i) {
        const double s = (origin_[i] - big.origin_[i]) / h_;
        const double r = std::round(s);
        if (std::abs(s - r) > kSnap || r < 0 || r + n_el_[i] > big.n_el_[i])
            return std::nullopt;
        off[i] = static_cast<int>(r);
    }
    return off;
}

bool operator==(const Grid& a, const Grid& b)
{
    if (a.dim_ != b.dim_ || a.h_ != b.h_)
        return false;
    for (int i = 0; i < a.dim_; ++i) {
        if (a.origin_[i] != b.origin_[i] || a.n_el_[i] != b.n_el_[i])
            return false;
    }
    return true;
}

//---------------------------------------------------------------------------//
// GridFunction

GridFunction::GridFunction(Grid g, std::vector<double> v) : grid(std::move(g)), values(std::move(v))
{
    if (values.size() != grid.node_count())
        throw PreconditionError("grid function size does not match node count");
}

GridFunction GridFunction::interpolate(const Grid& g,
                                       const std::function<double(std::span<const double>)>& f)
{
    GridFunction u(g);
    for (std::size_t k = 0; k < u.size(); ++k) {
        auto x = g.node_coord(k);
        u.values[k] = f(std::span<const double>(x.data(), g.dim()));
    }
    return u;
}

GridFunction GridFunction::affine(const Grid& g, std::span<const double> p)
{
    return interpolate(g, [&](std::span<const double> x) {
        double s = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i)
            s += p[i] * x[i];
        return s;
    });
}

GridFunction& GridFunction::operator+=(const GridFunction& o)
{
    if (!(grid == o.grid))
        throw PreconditionError("grid functions live on different grids");
    for (std::size_t k = 0; k < values.size(); ++k)
        values[k] += o.values[k];
    return *this;
}

GridFunction& GridFunction::operator-=(const GridFunction& o)
{
    if (!(grid == o.grid))
        throw PreconditionError("grid functions live on different grids");
    for (std::size_t k = 0; k < values.size(); ++k)
        values[k] -= o.values[k];
    return *this;
}

GridFunction& GridFunction::operator*=(double s)
{
    for (auto& v : values)
        v *= s;
    return *this;
}

GridFunction operator+(GridFunction a, const GridFunction& b) { return a += b; }
GridFunction operator-(GridFunction a, const GridFunction& b) { return a -= b; }
GridFunction operator*(double s, GridFunction a) { return a *= s; }

GridFunction GridFunction::restrict_to(const Grid& sub) const
{
    auto off = sub.offset_in(grid);
    if (!off)
        throw CoverageError("restrict_to: target is not a sub-grid");
    GridFunction out(sub);
    const int d = grid.dim();
    for (std::size_t k = 0; k < out.size(); ++k) {
        auto idx = sub.node_multi(k);
        for (int i = 0; i < d; ++i)
            idx[i] += (*off)[i];
        out.values[k] = values[grid.node_index(std::span<const int>(idx.data(), d))];
    }
    return out;
}

GridFunction GridFunction::extend_by_zero(const Grid& big) const
{
    auto off = grid.offset_in(big);
    if (!off)
        throw CoverageError("extend_by_zero: source is not a sub-grid");
    GridFunction out(big);
    const int d = grid.dim();
    for (std::size_t k = 0; k < size(); ++k) {
        auto idx = grid.node_multi(k);
        for (int i = 0; i < d; ++i)
            idx[i] += (*off)[i];
        out.values[big.node_index(std::span<const int>(idx.data(), d))] = values[k];
    }
    return out;
}

double GridFunction::mean() const
{
    auto ints = element_integrals(*this);
    CompensatedSum s;
    for (double v : ints)
        s.add(v);
    return s.value() / grid.volume();
}

double GridFunction::max_abs() const
{
    double m = 0.0;
    for (double v : values)
        m = std::max(m, std::abs(v));
    return m;
}

//---------------------------------------------------------------------------//
// SparseOperator

SparseOperator::SparseOperator(std::size_t n, std::vector<std::size_t> row_ptr,
                               std::vector<std::size_t> cols, std::vector<double> vals)
    : n_(n), row_ptr_(std::move(row_ptr)), cols_(std::move(cols)), vals_(std::move(vals))
{
    if (row_ptr_.size() != n_ + 1 || cols_.size() != vals_.size() || row_ptr_.back() != vals_.size())
        throw InternalConsistencyError("malformed compressed row storage");
}

void SparseOperator::apply(std::span<const double> x, std::span<double> y) const
{
    for (std::size_t i = 0; i < n_; ++i) {
        double s = 0.0;
        for (std::size_t p = row_ptr_[i]; p < row_ptr_[i + 1]; ++p)
            s += vals_[p] * x[cols_[p]];
        y[i] = s;
    }
}

std::vector<double> SparseOperator::apply(std::span<const double> x) const
{
    std::vector<double> y(n_);
    apply(x, y);
    return y;
}

double SparseOperator::entry(std::size_t i, std::size_t j) const
{
    auto b = cols_.begin() + static_cast<std::ptrdiff_t>(row_ptr_[i]);
    auto e = cols_.begin() + static_cast<std::ptrdiff_t>(row_ptr_[i + 1]);
    auto it = std::lower_bound(b, e, j);
    return (it != e && *it == j) ? vals_[static_cast<std::size_t>(it - cols_.begin())] : 0.0;
}

std::vector<double> SparseOperator::diagonal() const
{
    std::vector<double> d(n_);
    for (std::size_t i = 0; i < n_; ++i)
        d[i] = entry(i, i);
    return d;
}

double SparseOperator::asymmetry() const
{
    double m = 0.0;
    for (std::size_t i = 0; i < n_; ++i) {
        for (std::size_t p = row_ptr_[i]; p < row_ptr_[i + 1]; ++p)
            m = std::max(m, std::abs(vals_[p] - entry(cols_[p], i)));
    }
    return m;
}

double SparseOperator::form(std::span<const double> u, std::span<const double> v) const
{
    auto kv = apply(v);
    return dot(u, kv);
}

Mat SparseOperator::to_dense() const
{
    Mat a = Mat::Zero(static_cast<Eigen::Index>(n_), static_cast<Eigen::Index>(n_));
    for (std::size_t i = 0; i < n_; ++i) {
        for (std::size_t p = row_ptr_[i]; p < row_ptr_[i + 1]; ++p)
            a(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(cols_[p])) = vals_[p];
    }
    return a;
}

//---------------------------------------------------------------------------//
// Reference element

ReferenceElement::ReferenceElement(int d) : dim(d), nv(1 << d)
{
    // Two-point Gauss on [0,1] is exact for the bi-quadratic integrands here.
    const double g[2] = {0.5 - 0.5 / std::sqrt(3.0), 0.5 + 0.5 / std::sqrt(3.0)};
    const int nq = 1 << d;
    const double w = 1.0 / nq;

    stiff.assign(d, std::vector<Mat>(d, Mat::Zero(nv, nv)));
    mixed.assign(d, Mat::Zero(nv, nv));
    mass = Mat::Zero(nv, nv);
    grad = Mat::Zero(d, nv);

    Mat phi(nq, nv), dphi;
    std::vector<Mat> dp(d, Mat(nq, nv));
    for (int q = 0; q < nq; ++q) {
        double xi[3];
        for (int i = 0; i < d; ++i)
            xi[i] = g[(q >> i) & 1];
        for (int a = 0; a < nv; ++a) {
            double v = 1.0;
            for (int i = 0; i < d; ++i)
                v *= ((a >> i) & 1) ? xi[i] : 1.0 - xi[i];
            phi(q, a) = v;
            for (int k = 0; k < d; ++k) {
                double s = ((a >> k) & 1) ? 1.0 : -1.0;
                for (int i = 0; i < d; ++i) {
                    if (i != k)
                        s *= ((a >> i) & 1) ? xi[i] : 1.0 - xi[i];
                }
                dp[k](q, a) = s;
            }
        }
    }
    mass = w * phi.transpose() * phi;
    for (int k = 0; k < d; ++k) {
        grad.row(k) = w * dp[k].colwise().sum();
        mixed[k] = w * phi.transpose() * dp[k];
        for (int l = 0; l < d; ++l)
            stiff[k][l] = w * dp[k].transpose() * dp[l];
    }
}

const ReferenceElement& ReferenceElement::get(int d)
{
    static const ReferenceElement r1(1), r2(2), r3(3);
    switch (d) {
    case 1:
        return r1;
    case 2:
        return r2;
    case 3:
        return r3;
    default:
        throw PreconditionError("reference element: dimension must be 1, 2 or 3");
    }
}

//---------------------------------------------------------------------------//
// Coefficients and assembly

Mat ElementCoefficients::matrix(std::size_t e) const
{
    Mat a(dim, dim);
    for (int i = 0; i < dim; ++i)
        for (int j = 0; j < dim; ++j)
            a(i, j) = data[e * dim * dim + i * dim + j];
    return a;
}

ElementCoefficients element_coefficients(const Grid& grid, const CheckerboardField& field,
                                         double scale)
{
    const int d = grid.dim();
    if (field.dim() != d)
        throw PreconditionError("field and grid dimensions differ");
    ElementCoefficients c;
    c.dim = d;
    c.data.resize(grid.element_count() * d * d);
    std::int64_t z[3];
    for (std::size_t e = 0; e < grid.element_count(); ++e) {
        auto x = grid.element_center(e);
        for (int i = 0; i < d; ++i)
            z[i] = static_cast<std::int64_t>(std::floor(x[i] / scale + 0.5));
        const double b = field.cell_value(std::span<const std::int64_t>(z, d));
        for (int i = 0; i < d; ++i)
            c.data[e * d * d + i * d + i] = b;
    }
    return c;
}

ElementCoefficients constant_coefficients(const Grid& grid, const Mat& a)
{
    const int d = grid.dim();
    if (a.rows() != d || a.cols() != d)
        throw PreconditionError("coefficient matrix has the wrong shape");
    ElementCoefficients c;
    c.dim = d;
    c.data.resize(grid.element_count() * d * d);
    for (std::size_t e = 0; e < grid.element_count(); ++e)
        for (int i = 0; i < d; ++i)
            for (int j = 0; j < d; ++j)
                c.data[e * d * d + i * d + j] = a(i, j);
    return c;
}

namespace {

// Assemble sum_e scale_e * local_e into CSR over the 3^d nearest-neighbour
// stencil of a structured grid.
template <class Local>
SparseOperator assemble(const Grid& grid, Local&& local)
{
    const int d = grid.dim();
    const int nv = 1 << d;
    const std::size_t n = grid.node_count();
    int ns = 1;
    for (int i = 0; i < d; ++i)
        ns *= 3;

    // Stencil slot of node b relative to node a: base-3 digits of (b - a + 1).
    std::vector<double> stencil(n * ns, 0.0);
    Mat ke(nv, nv);
    std::vector<std::size_t> nodes(nv);
    for (std::size_t e = 0; e < grid.element_count(); ++e) {
        local(e, ke);
        for (int a = 0; a < nv; ++a)
            nodes[a] = grid.element_node(e, a);
        for (int a = 0; a < nv; ++a) {
            for (int b = 0; b < nv; ++b) {
                int slot = 0;
                for (int i = d - 1; i >= 0; --i)
                    slot = slot * 3 + (((b >> i) & 1) - ((a >> i) & 1) + 1);
                stencil[nodes[a] * ns + slot] += ke(a, b);
            }
        }
    }

    std::vector<std::size_t> row_ptr(n + 1, 0), cols;
    std::vector<double> vals;
    cols.reserve(n * ns);
    vals.reserve(n * ns);
    for (std::size_t k = 0; k < n; ++k) {
        auto idx = grid.node_multi(k);
        // Slots in increasing column order: the first coordinate is slowest in
        // both node numbering and the slot digits read from the top.
        for (int s = 0; s < ns; ++s) {
            int rem = s;
            std::array<int, 3> nb = idx;
            bool inside = true;
            int digits[3] = {0, 0, 0};
            for (int i = 0; i < d; ++i) {
                digits[i] = rem % 3;
                rem /= 3;
            }
            for (int i = 0; i < d; ++i) {
                nb[i] += digits[i] - 1;
                if (nb[i] < 0 || nb[i] > grid.elements(i))
                    inside = false;
            }
            if (!inside)
                continue;
            const double v = stencil[k * ns + s];
            cols.push_back(grid.node_index(std::span<const int>(nb.data(), d)));
            vals.push_back(v);
        }
        row_ptr[k + 1] = cols.size();
        // Slot order has dimension 0 fastest; sort columns within the row.
        std::vector<std::size_t> perm(row_ptr[k + 1] - row_ptr[k]);
        std::iota(perm.begin(), perm.end(), 0);
        const std::size_t base = row_ptr[k];
        std::sort(perm.begin(), perm.end(),
                  [&](std::size_t x, std::size_t y) { return cols[base + x] < cols[base + y]; });
        std::vector<std::size_t> c2(perm.size());
        std::vector<double> v2(perm.size());
        for (std::size_t t = 0; t < perm.size(); ++t) {
            c2[t] = cols[base + perm[t]];
            v2[t] = vals[base + perm[t]];
        }
        std::copy(c2.begin(), c2.end(), cols.begin() + static_cast<std::ptrdiff_t>(base));
        std::copy(v2.begin(), v2.end(), vals.begin() + static_cast<std::ptrdiff_t>(base));
    }
    return SparseOperator(n, std::move(row_ptr), std::move(cols), std::move(vals));
}

}  // namespace

SparseOperator assemble_stiffness(const Grid& grid, const ElementCoefficients& coef)
{
    const int d = grid.dim();
    if (coef.dim != d || coef.size() != grid.element_count())
        throw PreconditionError("coefficients do not match the grid");
    const auto& ref = ReferenceElement::get(d);
    const double scale = std::pow(grid.h(), d - 2);
    return assemble(grid, [&](std::size_t e, Mat& ke) {
        ke.setZero();
        const double* a = &coef.data[e * d * d];
        for (int k = 0; k < d; ++k)
            for (int l = 0; l < d; ++l)
                if (a[k * d + l] != 0.0)
                    ke += a[k * d + l] * ref.stiff[k][l];
        ke *= scale;
    });
}

SparseOperator assemble_stiffness(const Grid& grid, const CheckerboardField& field)
{
    return assemble_stiffness(grid, element_coefficients(grid, field));
}

SparseOperator assemble_mass(const Grid& grid)
{
    const auto& ref = ReferenceElement::get(grid.dim());
    const double scale = std::pow(grid.h(), grid.dim());
    return assemble(grid, [&](std::size_t, Mat& ke) { ke = scale * ref.mass; });
}

//---------------------------------------------------------------------------//
// Solvers

SolveStats pcg(const SparseOperator& a, std::span<const double> b, std::span<double> x,
               const std::vector<char>& mask, const SolverOptions& opts, bool deflate)
{
    const std::size_t n = a.size();
    std::size_t unknowns = 0;
    for (char m : mask)
        unknowns += m ? 1 : 0;
    const long cap = opts.max_iterations >= 0 ? opts.max_iterations : default_cap(unknowns);

    auto diag = a.diagonal();
    std::vector<double> r(n, 0.0), z(n, 0.0), p(n, 0.0), ap(n, 0.0), xm(n, 0.0);

    auto project = [&](std::vector<double>& v) {
        if (!deflate)
            return;
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            if (mask[i])
                s += v[i];
        s /= static_cast<double>(unknowns);
        for (std::size_t i = 0; i < n; ++i)
            if (mask[i])
                v[i] -= s;
    };
    // A restricted to the mask: entries outside are zero in the argument.
    auto apply_masked = [&](const std::vector<double>& v, std::vector<double>& out) {
        a.apply(v, out);
        for (std::size_t i = 0; i < n; ++i)
            if (!mask[i])
                out[i] = 0.0;
    };

    for (std::size_t i = 0; i < n; ++i)
        xm[i] = mask[i] ? x[i] : 0.0;
    apply_masked(xm, ap);
    double bnorm = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        r[i] = mask[i] ? b[i] - ap[i] : 0.0;
        bnorm += mask[i] ? b[i] * b[i] : 0.0;
    }
    bnorm = std::sqrt(bnorm);
    project(r);

    SolveStats st;
    auto rnorm = [&] { return std::sqrt(dot(r, r)); };
    if (unknowns == 0 || bnorm == 0.0) {
        if (bnorm == 0.0)
            std::fill(xm.begin(), xm.end(), 0.0);
        for (std::size_t i = 0; i < n; ++i)
            if (mask[i])
                x[i] = xm[i];
        return st;
    }
    const double target = opts.tolerance * bnorm;

    for (std::size_t i = 0; i < n; ++i)
        z[i] = mask[i] ? r[i] / diag[i] : 0.0;
    project(z);
    p = z;
    double rz = dot(r, z);
    double res = rnorm();
    long it = 0;
    while (res > target && it < cap) {
        apply_masked(p, ap);
        const double pap = dot(p, ap);
        if (!(pap > 0.0))
            break;
        const double alpha = rz / pap;
        for (std::size_t i = 0; i < n; ++i) {
            xm[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        project(r);
        res = rnorm();
        ++it;
        if (res <= target)
            break;
        for (std::size_t i = 0; i < n; ++i)
            z[i] = mask[i] ? r[i] / diag[i] : 0.0;
        project(z);
        const double rz_new = dot(r, z);
        const double beta = rz_new / rz;
        rz = rz_new;
        for (std::size_t i = 0; i < n; ++i)
            p[i] = z[i] + beta * p[i];
    }

    // True residual, not the recursively updated one.
    apply_masked(xm, ap);
    double tr = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        r[i] = mask[i] ? b[i] - ap[i] : 0.0;
    project(r);
    tr = rnorm();
    st.iterations = it;
    st.residual = tr / bnorm;
    if (res > target)
        throw SolverError("PCG did not converge: relative residual " +
                              std::to_string(st.residual) + " after " + std::to_string(it) +
                              " iterations",
                          st.residual, it);
    for (std::size_t i = 0; i < n; ++i)
        if (mask[i])
            x[i] = xm[i];
    return st;
}

GridFunction solve_dirichlet(const SparseOperator& k, const GridFunction& boundary,
                             const GridFunction& rhs, SolveStats* stats, const SolverOptions& opts)
{
    const Grid& g = boundary.grid;
    const std::size_t n = g.node_count();
    if (k.size() != n || rhs.size() != n)
        throw PreconditionError("solve_dirichlet: operator and data sizes differ");
    std::vector<char> mask(n);
    std::vector<double> ub(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        mask[i] = g.on_boundary(i) ? 0 : 1;
        if (!mask[i])
            ub[i] = boundary.values[i];
    }
    auto kg = k.apply(ub);
    std::vector<double> b(n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        b[i] = mask[i] ? rhs.values[i] - kg[i] : 0.0;
    GridFunction u(g, ub);
    auto st = pcg(k, b, u.values, mask, opts);
    if (stats)
        *stats = st;
    return u;
}

GridFunction solve_neumann_free(const SparseOperator& k, const GridFunction& load,
                                SolveStats* stats, const SolverOptions& opts)
{
    const Grid& g = load.grid;
    const std::size_t n = g.node_count();
    if (k.size() != n)
        throw PreconditionError("solve_neumann_free: operator and load sizes differ");
    double sum = 0.0, l1 = 0.0;
    for (double v : load.values) {
        sum += v;
        l1 += std::abs(v);
    }
    if (std::abs(sum) > 1e-8 * l1)
        throw CompatibilityError("Neumann load has nonzero sum " + std::to_string(sum));
    std::vector<double> b(load.values);
    const double shift = sum / static_cast<double>(n);
    for (auto& v : b)
        v -= shift;
    std::vector<char> mask(n, 1);
    GridFunction u(g);
    auto st = pcg(k, b, u.values, mask, opts, true);
    if (stats)
        *stats = st;
    const double m = u.mean();
    for (auto& v : u.values)
        v -= m;
    return u;
}

//---------------------------------------------------------------------------//
// Integrals

std::vector<double> element_gradient_integrals(const GridFunction& u)
{
    const Grid& g = u.grid;
    const int d = g.dim();
    const auto& ref = ReferenceElement::get(d);
    const double scale = std::pow(g.h(), d - 1);
    std::vector<double> out(g.element_count() * d, 0.0);
    for (std::size_t e = 0; e < g.element_count(); ++e) {
        for (int a = 0; a < ref.nv; ++a) {
            const double ua = u.values[g.element_node(e, a)];
            for (int k = 0; k < d; ++k)
                out[e * d + k] += scale * ref.grad(k, a) * ua;
        }
    }
    return out;
}

std::vector<double> element_integrals(const GridFunction& u)
{
    const Grid& g = u.grid;
    const int nv = g.vertices_per_element();
    const double w = std::pow(g.h(), g.dim()) / nv;
    std::vector<double> out(g.element_count(), 0.0);
    for (std::size_t e = 0; e < g.element_count(); ++e) {
        double s = 0.0;
        for (int a = 0; a < nv; ++a)
            s += u.values[g.element_node(e, a)];
        out[e] = w * s;
    }
    return out;
}

double mean_gradient_energy(const GridFunction& u, const ElementCoefficients* coef)
{
    const Grid& g = u.grid;
    const int d = g.dim();
    const auto& ref = ReferenceElement::get(d);
    const double scale = std::pow(g.h(), d - 2);
    Vec ue(ref.nv);
    double total = 0.0;
    for (std::size_t e = 0; e < g.element_count(); ++e) {
        for (int a = 0; a < ref.nv; ++a)
            ue[a] = u.values[g.element_node(e, a)];
        double s = 0.0;
        for (int k = 0; k < d; ++k) {
            for (int l = 0; l < d; ++l) {
                double c = coef ? coef->data[e * d * d + k * d + l] : (k == l ? 1.0 : 0.0);
                if (c != 0.0)
                    s += c * ue.dot(ref.stiff[k][l] * ue);
            }
        }
        total += scale * s;
    }
    return total / g.volume();
}

double mean_square(const GridFunction& u)
{
    const Grid& g = u.grid;
    const auto& ref = ReferenceElement::get(g.dim());
    const double scale = std::pow(g.h(), g.dim());
    Vec ue(ref.nv);
    double total = 0.0;
    for (std::size_t e = 0; e < g.element_count(); ++e) {
        for (int a = 0; a < ref.nv; ++a)
            ue[a] = u.values[g.element_node(e, a)];
        total += scale * ue.dot(ref.mass * ue);
    }
    return total / g.volume();
}

Vec mean_gradient(const GridFunction& u, const ElementCoefficients* coef)
{
    const int d = u.grid.dim();
    auto gi = element_gradient_integrals(u);
    Vec m = Vec::Zero(d);
    for (std::size_t e = 0; e < u.grid.element_count(); ++e) {
        for (int k = 0; k < d; ++k) {
            if (!coef) {
                m[k] += gi[e * d + k];
                continue;
            }
            for (int l = 0; l < d; ++l)
                m[k] += coef->data[e * d * d + k * d + l] * gi[e * d + l];
        }
    }
    return m / u.grid.volume();
}

std::vector<std::vector<double>> flux_loads(const GridFunction& u, const ElementCoefficients* coef,
                                            const Vec& shift)
{
    const Grid& g = u.grid;
    const int d = g.dim();
    const auto& ref = ReferenceElement::get(d);
    const double hd1 = std::pow(g.h(), d - 1);
    const double hd = std::pow(g.h(), d);
    std::vector<std::vector<double>> loads(d, std::vector<double>(g.node_count(), 0.0));
    Vec ue(ref.nv);
    std::vector<Vec> du(d);  // du[l](a) = int phi_a d_l u / h^{d-1}
    std::vector<std::size_t> nodes(ref.nv);
    for (std::size_t e = 0; e < g.element_count(); ++e) {
        for (int a = 0; a < ref.nv; ++a) {
            nodes[a] = g.element_node(e, a);
            ue[a] = u.values[nodes[a]];
        }
        for (int l = 0; l < d; ++l)
            du[l] = ref.mixed[l] * ue;
        for (int k = 0; k < d; ++k) {
            for (int a = 0; a < ref.nv; ++a) {
                double s = 0.0;
                for (int l = 0; l < d; ++l) {
                    double c = coef ? coef->data[e * d * d + k * d + l] : (k == l ? 1.0 : 0.0);
                    s += c * du[l][a];
                }
                loads[k][nodes[a]] += hd1 * s - hd * shift[k] / ref.nv;
            }
        }
    }
    return loads;
}

void for_each_gauss_point(
    const GridFunction& u,
    const std::function<void(std::size_t, std::span<const double>, double, std::span<const double>,
                             double)>& f,
    int points_per_axis)
{
    const Grid& g = u.grid;
    const int d = g.dim();
    const int nv = 1 << d;
    const double h = g.h();
    std::vector<double> pts, wts;
    if (points_per_axis == 2) {
        pts = {0.5 - 0.5 / std::sqrt(3.0), 0.5 + 0.5 / std::sqrt(3.0)};
        wts = {0.5, 0.5};
    } else if (points_per_axis == 3) {
        const double s = 0.5 * std::sqrt(0.6);
        pts = {0.5 - s, 0.5, 0.5 + s};
        wts = {5.0 / 18.0, 8.0 / 18.0, 5.0 / 18.0};
    } else {
        throw PreconditionError("for_each_gauss_point: 2 or 3 points per axis");
    }
    const int q1 = points_per_axis;
    int nq = 1;
    for (int i = 0; i < d; ++i)
        nq *= q1;
    const double vol = std::pow(h, d);
    double ue[8];
    double x[3], grad[3];
    for (std::size_t e = 0; e < g.element_count(); ++e) {
        auto c = g.element_center(e);
        for (int a = 0; a < nv; ++a)
            ue[a] = u.values[g.element_node(e, a)];
        for (int q = 0; q < nq; ++q) {
            double xi[3];
            double w = vol;
            int rem = q;
            for (int i = 0; i < d; ++i) {
                const int t = rem % q1;
                rem /= q1;
                xi[i] = pts[t];
                w *= wts[t];
                x[i] = c[i] - 0.5 * h + h * xi[i];
            }
            double val = 0.0;
            for (int k = 0; k < d; ++k)
                grad[k] = 0.0;
            for (int a = 0; a < nv; ++a) {
                double phi = 1.0;
                for (int i = 0; i < d; ++i)
                    phi *= ((a >> i) & 1) ? xi[i] : 1.0 - xi[i];
                val += phi * ue[a];
                for (int k = 0; k < d; ++k) {
                    double s = ((a >> k) & 1) ? 1.0 : -1.0;
                    for (int i = 0; i < d; ++i)
                        if (i != k)
                            s *= ((a >> i) & 1) ? xi[i] : 1.0 - xi[i];
                    grad[k] += s * ue[a] / h;
                }
            }
            f(e, std::span<const double>(x, d), val, std::span<const double>(grad, d), w);
        }
    }
}

}  // namespace homog
