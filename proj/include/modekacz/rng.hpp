#pragma once

#include <cstdint>
#include <random>

namespace modekacz {

// splitmix64 finalizer; used to derive independent child seeds.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) noexcept {
    return mix64(mix64(master) ^ mix64(index + 0x5851f42d4c957f2dULL));
}

/// Seedable generator. Splitting yields a child whose stream does not
/// depend on how much of the parent's stream has been consumed.
class Rng {
public:
    using result_type = std::uint64_t;

    explicit Rng(std::uint64_t seed = 0) : seed_(seed), engine_(mix64(seed)) {}

    [[nodiscard]] std::uint64_t seed() const noexcept { return seed_; }
    [[nodiscard]] Rng split(std::uint64_t stream) const { return Rng(derive_seed(seed_, stream)); }

    static constexpr result_type min() { return std::mt19937_64::min(); }
    static constexpr result_type max() { return std::mt19937_64::max(); }
    result_type operator()() { return engine_(); }

    /// Uniform integer in [lo, hi].
    std::size_t uniform_index(std::size_t lo, std::size_t hi) {
        return std::uniform_int_distribution<std::size_t>(lo, hi)(engine_);
    }
    double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(engine_); }
    double normal() { return std::normal_distribution<double>(0.0, 1.0)(engine_); }

private:
    std::uint64_t seed_;
    std::mt19937_64 engine_;
};

// Named sub-streams used by the solvers so that independent decisions never
// share a stream (keeps zero-adversary runs step-aligned with plain RK).
namespace stream {
inline constexpr std::uint64_t rows = 1;
inline constexpr std::uint64_t workers = 2;
inline constexpr std::uint64_t ties = 3;
inline constexpr std::uint64_t population = 4;
inline constexpr std::uint64_t problem = 5;
}  // namespace stream

}  // namespace modekacz
