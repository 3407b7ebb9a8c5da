#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace loadshift::util {

// Uniform double in [0, 1) built from the top 53 bits of the engine output;
// the standard distributions are implementation-defined, this is not.
inline double uniform01(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// Standard normal draw via Box-Muller (cosine branch only), again to keep
// the byte stream identical across standard library implementations.
inline double normal01(std::mt19937_64& rng) {
    double u1 = uniform01(rng);
    while (u1 <= 0.0) u1 = uniform01(rng);
    const double u2 = uniform01(rng);
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(6.28318530717958647692528676655900577 * u2);
}

// Engine stream decorrelation for restart/user substreams.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
    std::uint64_t x = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
    x ^= x >> 30;
    x *= 0xbf58476d1ce4e5b9ULL;
    x ^= x >> 27;
    x *= 0x94d049bb133111ebULL;
    x ^= x >> 31;
    return x;
}

// FNV-1a 64-bit, used for schema and config fingerprints.
std::uint64_t fnv1a64(std::string_view data);
std::string hex64(std::uint64_t v);

// Shortest round-trippable decimal rendering ("%.17g" fallback chain).
// Deterministic for a given double, independent of locale.
std::string fmt_double(double v);

double mean(std::span<const double> v);
// Population standard deviation (divide by N).
double stddev_population(std::span<const double> v);
// Linear-interpolation quantile (type 7); v must be sorted ascending.
double quantile_sorted(std::span<const double> sorted, double p);
double median(std::vector<double> v);

// Spearman rank correlation with midrank tie handling.
double spearman(std::span<const double> a, std::span<const double> b);

// Midranks (1-based, ties averaged) of v.
std::vector<double> midranks(std::span<const double> v);

// Standard normal CDF.
double normal_cdf(double z);

// Runs fn(i) for i in [0, n) on up to `jobs` threads. Results are whatever
// fn writes into caller-owned slots; iteration order within a thread is
// ascending so per-item work must not depend on global mutable state.
void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& fn);

std::string join(std::span<const std::string> parts, std::string_view sep);
std::vector<std::string> split(std::string_view s, char sep);
std::string trim(std::string_view s);

}  // namespace loadshift::util
