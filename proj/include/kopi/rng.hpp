#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <numeric>
#include <random>
#include <vector>

#include "kopi/core.hpp"

namespace kopi {

namespace detail {

constexpr std::uint64_t golden_gamma = 0x9e3779b97f4a7c15ULL;

constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

} // namespace detail

/// Counter-based random stream.
///
/// The i-th output is a bijective hash of (key + i * gamma), so a stream is
/// fully described by its key and position. `split(i)` derives an independent
/// child key, which lets every job (draw, row, run, fold) own its stream
/// regardless of scheduling order. Satisfies UniformRandomBitGenerator, so the
/// standard distributions can be used directly.
class Stream {
public:
    using result_type = std::uint64_t;

    explicit Stream(std::uint64_t seed = 0) noexcept : key_(detail::mix64(seed ^ 0x6a09e667f3bcc909ULL)) {}

    static constexpr result_type min() noexcept { return 0; }
    static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

    result_type operator()() noexcept {
        ++counter_;
        return detail::mix64(key_ + counter_ * detail::golden_gamma);
    }

    Stream split(std::uint64_t index) const noexcept {
        Stream child;
        child.key_ = detail::mix64(key_ ^ detail::mix64(index + 0x3c6ef372fe94f82bULL)) + 0xbb67ae8584caa73bULL;
        return child;
    }

    std::uint64_t key() const noexcept { return key_; }

private:
    std::uint64_t key_ = 0;
    std::uint64_t counter_ = 0;
};

inline double uniform01(Stream& rng) {
    // 53 random mantissa bits, in [0, 1).
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline bool coin_flip(Stream& rng) { return (rng() >> 63) != 0; }

inline Vector standard_normal_vector(Eigen::Index size, Stream& rng) {
    std::normal_distribution<double> normal(0.0, 1.0);
    Vector out(size);
    for (Eigen::Index i = 0; i < size; ++i) out(i) = normal(rng);
    return out;
}

inline Matrix standard_normal_matrix(Eigen::Index rows, Eigen::Index cols, Stream& rng) {
    std::normal_distribution<double> normal(0.0, 1.0);
    Matrix out(rows, cols);
    for (Eigen::Index j = 0; j < cols; ++j)
        for (Eigen::Index i = 0; i < rows; ++i) out(i, j) = normal(rng);
    return out;
}

inline std::vector<std::size_t> random_permutation(std::size_t size, Stream& rng) {
    std::vector<std::size_t> perm(size);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    std::shuffle(perm.begin(), perm.end(), rng);
    return perm;
}

} // namespace kopi
