#pragma once

#include <cmath>
#include <cstdint>
#include <span>

namespace homog {

//---------------------------------------------------------------------------//
/*!
 * Counter-based seeding.
 *
 * Every random quantity in the workbench is derived from a 64-bit master seed
 * and an integer key (lattice coordinates, sample index) through the
 * splitmix64 finalizer. Nothing depends on generation order, so enlarging a
 * window, shifting a field, or distributing samples over threads never
 * changes a value.
 */
constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept
{
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

/// Seed for a lattice cell: fold each coordinate into the master seed.
///
/// h_0 = splitmix64(master), h_{k+1} = splitmix64(h_k ^ (uint64)z_k * K + k),
/// K = 0xD1B54A32D192ED03. The coordinate index k is folded in so that
/// permuted coordinates give different seeds.
inline std::uint64_t cell_seed(std::uint64_t master, std::span<const std::int64_t> z) noexcept
{
    std::uint64_t h = splitmix64(master);
    std::uint64_t k = 0;
    for (auto zi : z) {
        h = splitmix64(h ^ (static_cast<std::uint64_t>(zi) * 0xD1B54A32D192ED03ULL + k));
        ++k;
    }
    return h;
}

/// Seed for the i-th independent sample of a study.
constexpr std::uint64_t sample_seed(std::uint64_t master, std::uint64_t index) noexcept
{
    return splitmix64(splitmix64(master ^ 0x5851F42D4C957F2DULL) + index);
}

/// Uniform double in the open interval (0, 1) from 53 random bits.
constexpr double to_unit_open(std::uint64_t bits) noexcept
{
    return (static_cast<double>(bits >> 11) + 0.5) * 0x1.0p-53;
}

/// Sequential splitmix64 stream. Used for Monte Carlo draws in diagnostics.
class SplitMix {
public:
    explicit constexpr SplitMix(std::uint64_t seed) noexcept : state_(seed) {}

    constexpr std::uint64_t next() noexcept
    {
        state_ += 0x9E3779B97F4A7C15ULL;
        std::uint64_t x = state_;
        x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
        x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
        return x ^ (x >> 31);
    }

    constexpr double uniform() noexcept { return to_unit_open(next()); }

private:
    std::uint64_t state_;
};

/// Neumaier compensated summation.
class CompensatedSum {
public:
    void add(double x) noexcept
    {
        double t = sum_ + x;
        if (std::abs(sum_) >= std::abs(x))
            comp_ += (sum_ - t) + x;
        else
            comp_ += (x - t) + sum_;
        sum_ = t;
    }

    double value() const noexcept { return sum_ + comp_; }

private:
    double sum_ = 0.0;
    double comp_ = 0.0;
};

}  // namespace homog
