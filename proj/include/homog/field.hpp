#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "homog/law.hpp"
#include "homog/linalg.hpp"
#include "json.hpp"

namespace homog {

using Lattice = std::vector<std::int64_t>;

std::int64_t pow3(int n);

//---------------------------------------------------------------------------//
/*!
 * Triadic cube z + (-3^n/2, 3^n/2)^d.
 *
 * The unit cells it contains are exactly the lattice points y with
 * |y_i - z_i| <= (3^n - 1)/2.
 */
struct TriadicCube {
    int scale = 0;
    Lattice offset;

    TriadicCube() = default;
    TriadicCube(int n, Lattice z) : scale(n), offset(std::move(z)) {}
    static TriadicCube centered(int n, int dim) { return {n, Lattice(dim, 0)}; }

    int dim() const noexcept { return static_cast<int>(offset.size()); }
    std::int64_t side() const noexcept { return pow3(scale); }
    double volume() const;
    std::int64_t half_cells() const noexcept { return (side() - 1) / 2; }

    /// The 3^d children z + y + cube_{n-1}, y in 3^{n-1} {-1,0,1}^d, in
    /// lexicographic order (first coordinate slowest).
    std::vector<TriadicCube> children() const;
    /// All 3^{(n-m)d} subcubes of scale m, lexicographic order.
    std::vector<TriadicCube> subcubes(int m) const;

    bool contains(const TriadicCube& other) const;

    friend bool operator==(const TriadicCube&, const TriadicCube&) = default;
};

void to_json(nlohmann::json& j, const TriadicCube& c);
void from_json(const nlohmann::json& j, TriadicCube& c);

//---------------------------------------------------------------------------//
/*!
 * Z^d-stationary random checkerboard.
 *
 * The value of cell z is law.sample(u) with u drawn from
 * cell_seed(master_seed, z + shift), so cells are i.i.d. and depend only on
 * their absolute coordinates. The table is materialized over the extent cube
 * at construction and immutable afterwards.
 */
class CheckerboardField {
public:
    CheckerboardField(MarginalLaw law, std::uint64_t master_seed, TriadicCube extent);

    int dim() const noexcept { return extent_.dim(); }
    const MarginalLaw& law() const noexcept { return law_; }
    std::uint64_t master_seed() const noexcept { return master_seed_; }
    const TriadicCube& extent() const noexcept { return extent_; }
    const Lattice& shift_vector() const noexcept { return shift_; }

    bool covers(const TriadicCube& u) const { return extent_.contains(u); }
    /// Scalar value of cell z (z inside the extent). Throws CoverageError.
    double cell_value(std::span<const std::int64_t> z) const;
    /// Coefficient matrix of cell z (scalar multiple of the identity).
    Mat cell_matrix(std::span<const std::int64_t> z) const;
    /// Cell containing x: z = floor(x + 1/2).
    double value_at(std::span<const double> x) const;

    /// (T_z a)(x) = a(x + z); the extent moves by -z so the same cells stay covered.
    CheckerboardField shifted(std::span<const std::int64_t> z) const;

    /// Cells of the extent in lexicographic order.
    const std::vector<double>& cells() const noexcept { return cells_; }

    friend bool operator==(const CheckerboardField&, const CheckerboardField&) = default;

private:
    CheckerboardField(MarginalLaw law, std::uint64_t seed, TriadicCube extent, Lattice shift);
    void populate();
    std::size_t index_of(std::span<const std::int64_t> z) const;

    MarginalLaw law_;
    std::uint64_t master_seed_;
    TriadicCube extent_;
    Lattice shift_;
    std::vector<double> cells_;
};

CheckerboardField sample_field(const MarginalLaw& law, std::uint64_t master_seed,
                               const TriadicCube& extent);

CheckerboardField shift(const CheckerboardField& field, std::span<const std::int64_t> z);

struct Extremes {
    double Lam;
    double lam;
};

/// Largest / smallest eigenvalue over the cells meeting U. Throws CoverageError.
Extremes lambda_extremes(const CheckerboardField& field, const TriadicCube& u);

/// Fixture document {dim, law, master_seed, extent, shift, cells: [[z..., value]...]}.
nlohmann::json field_to_json(const CheckerboardField& field);
CheckerboardField field_from_json(const nlohmann::json& j);

}  // namespace homog
