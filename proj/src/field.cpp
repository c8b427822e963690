#include "homog/field.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "homog/error.hpp"
#include "homog/rng.hpp"

namespace homog {

std::int64_t pow3(int n)
{
    std::int64_t r = 1;
    for (int i = 0; i < n; ++i)
        r *= 3;
    return r;
}

double TriadicCube::volume() const { return std::pow(static_cast<double>(side()), dim()); }

namespace {

// Iterate over {0..k-1}^d in lexicographic order (first coordinate slowest).
template <class F>
void for_each_multi(int dim, std::int64_t k, F&& f)
{
    Lattice idx(dim, 0);
    if (k <= 0)
        return;
    while (true) {
        f(idx);
        int i = dim - 1;
        while (i >= 0 && ++idx[i] == k) {
            idx[i] = 0;
            --i;
        }
        if (i < 0)
            break;
    }
}

std::string lattice_str(std::span<const std::int64_t> z)
{
    std::string s = "(";
    for (std::size_t i = 0; i < z.size(); ++i)
        s += (i ? "," : "") + std::to_string(z[i]);
    return s + ")";
}

}  // namespace

std::vector<TriadicCube> TriadicCube::subcubes(int m) const
{
    if (m > scale || m < 0)
        throw PreconditionError("subcubes: scale out of range");
    const std::int64_t per = pow3(scale - m);
    const std::int64_t step = pow3(m);
    std::vector<TriadicCube> out;
    out.reserve(static_cast<std::size_t>(std::pow(per, dim())));
    for_each_multi(dim(), per, [&](const Lattice& idx) {
        Lattice z(offset);
        for (int i = 0; i < dim(); ++i)
            z[i] += (idx[i] - (per - 1) / 2) * step;
        out.emplace_back(m, std::move(z));
    });
    return out;
}

std::vector<TriadicCube> TriadicCube::children() const
{
    if (scale < 1)
        throw PreconditionError("children: unit cube has no triadic children");
    return subcubes(scale - 1);
}

bool TriadicCube::contains(const TriadicCube& other) const
{
    if (other.dim() != dim())
        return false;
    const auto h = half_cells(), ho = other.half_cells();
    for (int i = 0; i < dim(); ++i) {
        if (other.offset[i] - ho < offset[i] - h || other.offset[i] + ho > offset[i] + h)
            return false;
    }
    return true;
}

void to_json(nlohmann::json& j, const TriadicCube& c)
{
    j = nlohmann::json{{"scale", c.scale}, {"offset", c.offset}};
}

void from_json(const nlohmann::json& j, TriadicCube& c)
{
    c.scale = j.at("scale").get<int>();
    c.offset = j.at("offset").get<Lattice>();
}

//---------------------------------------------------------------------------//

CheckerboardField::CheckerboardField(MarginalLaw law, std::uint64_t master_seed, TriadicCube extent)
    : CheckerboardField(std::move(law), master_seed, std::move(extent),
                        Lattice(extent.dim(), 0))
{
}

CheckerboardField::CheckerboardField(MarginalLaw law, std::uint64_t seed, TriadicCube extent,
                                     Lattice shift)
    : law_(std::move(law)), master_seed_(seed), extent_(std::move(extent)), shift_(std::move(shift))
{
    if (extent_.dim() < 1 || extent_.dim() > 3)
        throw ConfigError("field dimension must be 1, 2 or 3");
    if (extent_.scale < 0)
        throw ConfigError("field extent scale must be >= 0");
    populate();
}

void CheckerboardField::populate()
{
    const int d = dim();
    const std::int64_t side = extent_.side();
    const std::int64_t h = extent_.half_cells();
    cells_.clear();
    cells_.reserve(static_cast<std::size_t>(std::pow(side, d)));
    Lattice abs(d);
    for_each_multi(d, side, [&](const Lattice& idx) {
        for (int i = 0; i < d; ++i)
            abs[i] = extent_.offset[i] - h + idx[i] + shift_[i];
        cells_.push_back(law_.sample(to_unit_open(cell_seed(master_seed_, abs))));
    });
}

std::size_t CheckerboardField::index_of(std::span<const std::int64_t> z) const
{
    const std::int64_t side = extent_.side();
    const std::int64_t h = extent_.half_cells();
    std::size_t idx = 0;
    for (int i = 0; i < dim(); ++i) {
        std::int64_t k = z[i] - (extent_.offset[i] - h);
        if (k < 0 || k >= side)
            throw CoverageError("cell " + lattice_str(z) + " outside field extent");
        idx = idx * static_cast<std::size_t>(side) + static_cast<std::size_t>(k);
    }
    return idx;
}

double CheckerboardField::cell_value(std::span<const std::int64_t> z) const
{
    return cells_[index_of(z)];
}

Mat CheckerboardField::cell_matrix(std::span<const std::int64_t> z) const
{
    return cell_value(z) * Mat::Identity(dim(), dim());
}

double CheckerboardField::value_at(std::span<const double> x) const
{
    std::int64_t z[3];
    for (int i = 0; i < dim(); ++i)
        z[i] = static_cast<std::int64_t>(std::floor(x[i] + 0.5));
    return cell_value(std::span<const std::int64_t>(z, dim()));
}

CheckerboardField CheckerboardField::shifted(std::span<const std::int64_t> z) const
{
    TriadicCube ext = extent_;
    Lattice s = shift_;
    for (int i = 0; i < dim(); ++i) {
        ext.offset[i] -= z[i];
        s[i] += z[i];
    }
    return CheckerboardField(law_, master_seed_, std::move(ext), std::move(s));
}

CheckerboardField sample_field(const MarginalLaw& law, std::uint64_t master_seed,
                               const TriadicCube& extent)
{
    return CheckerboardField(law, master_seed, extent);
}

CheckerboardField shift(const CheckerboardField& field, std::span<const std::int64_t> z)
{
    return field.shifted(z);
}

Extremes lambda_extremes(const CheckerboardField& field, const TriadicCube& u)
{
    if (!field.covers(u))
        throw CoverageError("lambda_extremes: cube not covered by field extent");
    const int d = field.dim();
    const std::int64_t h = u.half_cells();
    Extremes e{0.0, std::numeric_limits<double>::infinity()};
    Lattice z(d);
    for_each_multi(d, u.side(), [&](const Lattice& idx) {
        for (int i = 0; i < d; ++i)
            z[i] = u.offset[i] - h + idx[i];
        double b = field.cell_value(z);
        e.Lam = std::max(e.Lam, b);
        e.lam = std::min(e.lam, b);
    });
    return e;
}

nlohmann::json field_to_json(const CheckerboardField& field)
{
    nlohmann::json cells = nlohmann::json::array();
    const int d = field.dim();
    const auto& ext = field.extent();
    const std::int64_t h = ext.half_cells();
    std::size_t k = 0;
    for_each_multi(d, ext.side(), [&](const Lattice& idx) {
        nlohmann::json row = nlohmann::json::array();
        for (int i = 0; i < d; ++i)
            row.push_back(ext.offset[i] - h + idx[i]);
        row.push_back(field.cells()[k++]);
        cells.push_back(std::move(row));
    });
    return nlohmann::json{{"dim", d},
                          {"law", field.law().to_spec()},
                          {"master_seed", field.master_seed()},
                          {"extent", ext},
                          {"shift", field.shift_vector()},
                          {"cells", std::move(cells)}};
}

CheckerboardField field_from_json(const nlohmann::json& j)
{
    auto law = MarginalLaw::parse(j.at("law").get<std::string>());
    auto ext = j.at("extent").get<TriadicCube>();
    auto seed = j.at("master_seed").get<std::uint64_t>();
    CheckerboardField f(law, seed, ext);
    if (j.contains("shift")) {
        auto s = j.at("shift").get<Lattice>();
        // Regenerate at the unshifted extent, then move it.
        TriadicCube base = ext;
        for (std::size_t i = 0; i < s.size(); ++i)
            base.offset[i] += s[i];
        f = CheckerboardField(law, seed, base).shifted(s);
    }
    if (j.contains("cells")) {
        const auto& cells = j.at("cells");
        if (cells.size() != f.cells().size())
            throw ConfigError("field fixture: cell count mismatch");
        for (std::size_t k = 0; k < cells.size(); ++k) {
            if (cells[k].back().get<double>() != f.cells()[k])
                throw ConfigError("field fixture: cell table differs from the seed derivation");
        }
    }
    return f;
}

}  // namespace homog
