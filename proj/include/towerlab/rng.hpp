#pragma once

#include <cstdint>

namespace towerlab {

/// Counter-based randomness. Every random quantity in the library is a pure
/// function of (seed, counter), so ensembles can be split across workers in
/// any way without changing a single bit of output.
namespace rng {

constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept
{
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

constexpr std::uint64_t mix(std::uint64_t seed, std::uint64_t counter) noexcept
{
    return splitmix64(seed ^ splitmix64(counter + 0x632be59bd9b4e019ULL));
}

constexpr std::uint64_t mix(std::uint64_t seed, std::uint64_t a, std::uint64_t b) noexcept
{
    return mix(mix(seed, a), b);
}

/// Uniform double in [0, 1) with 53 random bits.
constexpr double to_unit(std::uint64_t bits) noexcept
{
    return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

constexpr double uniform(std::uint64_t seed, std::uint64_t counter) noexcept
{
    return to_unit(mix(seed, counter));
}

/// Stream tags so that different consumers of one seed never collide.
enum class Tag : std::uint64_t {
    column = 1,
    level = 2,
    point = 3,
    bootstrap = 4,
    tail = 5,
    ambient = 6,
    pairs = 7,
};

constexpr std::uint64_t tagged(std::uint64_t seed, Tag tag) noexcept
{
    return mix(seed, static_cast<std::uint64_t>(tag) * 0x2545f4914f6cdd1dULL);
}

/// Small sequential generator over the counter hash, usable with <random>
/// distributions when a handful of draws is needed from one seed.
class CounterEngine {
  public:
    using result_type = std::uint64_t;

    explicit CounterEngine(std::uint64_t seed) noexcept : seed_(seed) {}

    static constexpr result_type min() noexcept { return 0; }
    static constexpr result_type max() noexcept { return ~result_type{0}; }

    result_type operator()() noexcept { return mix(seed_, counter_++); }
    double unit() noexcept { return to_unit((*this)()); }

  private:
    std::uint64_t seed_;
    std::uint64_t counter_ = 0;
};

} // namespace rng
} // namespace towerlab
