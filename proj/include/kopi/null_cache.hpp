#pragma once

#include <array>
#include <bit>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>

#include "kopi/core.hpp"
#include "kopi/jer.hpp"

namespace kopi::jer {

// On-disk layout (little-endian):
//   "KOPI0" | u32 version | u64 p | u64 B | u64 D | u32 scheme | u32 pairing
//   | f64 gamma | u64 seed | B*p f64, row-major
inline constexpr std::array<char, 5> cache_magic{'K', 'O', 'P', 'I', '0'};
inline constexpr std::uint32_t cache_version = 1;

/// Everything that determines a sorted, aggregated null matrix.
struct NullSpec {
    std::size_t p = 0;
    std::size_t B = 0;
    std::size_t D = 1;
    pistats::AggregationScheme scheme{};
    PairingMode pairing = PairingMode::sorted;
    std::uint64_t seed = 0;

    // gamma only matters for the quantile kind; it is zeroed otherwise so that
    // irrelevant settings never invalidate a cache entry.
    double effective_gamma() const {
        return scheme.kind == pistats::AggregationKind::quantile ? scheme.gamma : 0.0;
    }
};

inline bool operator==(const NullSpec& a, const NullSpec& b) {
    return a.p == b.p && a.B == b.B && a.D == b.D && a.scheme.kind == b.scheme.kind &&
           a.effective_gamma() == b.effective_gamma() && a.pairing == b.pairing && a.seed == b.seed;
}

namespace detail {

template <class T>
void put_le(std::ostream& os, T value) {
    static_assert(std::is_trivially_copyable_v<T>);
    std::array<char, sizeof(T)> bytes;
    std::memcpy(bytes.data(), &value, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
    os.write(bytes.data(), sizeof(T));
}

template <class T>
bool get_le(std::istream& is, T& value) {
    std::array<char, sizeof(T)> bytes;
    if (!is.read(bytes.data(), sizeof(T))) return false;
    if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
    std::memcpy(&value, bytes.data(), sizeof(T));
    return true;
}

} // namespace detail

inline std::filesystem::path null_cache_path(const std::filesystem::path& dir, const NullSpec& spec) {
    std::ostringstream name;
    name << "nullpi_p" << spec.p << "_B" << spec.B << "_D" << spec.D << '_' << pistats::to_string(spec.scheme.kind);
    if (spec.scheme.kind == pistats::AggregationKind::quantile) name << spec.scheme.gamma;
    name << '_' << to_string(spec.pairing) << "_s" << spec.seed << ".bin";
    return dir / name.str();
}

inline void write_null_cache(const std::filesystem::path& file, const NullSpec& spec, const NullPiMatrix& null_pi) {
    require(null_pi.size() == spec.B && null_pi.p == spec.p, ErrorKind::invalid_parameter,
            "null matrix shape does not match its cache header");
    if (file.has_parent_path()) std::filesystem::create_directories(file.parent_path());
    const auto tmp = std::filesystem::path(file.string() + ".tmp");
    {
        std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
        require(static_cast<bool>(os), ErrorKind::io, "cannot open cache file " + tmp.string());
        os.write(cache_magic.data(), cache_magic.size());
        detail::put_le<std::uint32_t>(os, cache_version);
        detail::put_le<std::uint64_t>(os, spec.p);
        detail::put_le<std::uint64_t>(os, spec.B);
        detail::put_le<std::uint64_t>(os, spec.D);
        detail::put_le<std::uint32_t>(os, static_cast<std::uint32_t>(spec.scheme.kind));
        detail::put_le<std::uint32_t>(os, static_cast<std::uint32_t>(spec.pairing));
        detail::put_le<double>(os, spec.effective_gamma());
        detail::put_le<std::uint64_t>(os, spec.seed);
        for (Eigen::Index b = 0; b < null_pi.rows.rows(); ++b)
            for (Eigen::Index j = 0; j < null_pi.rows.cols(); ++j) detail::put_le<double>(os, null_pi.rows(b, j));
        require(static_cast<bool>(os), ErrorKind::io, "failed writing cache file " + tmp.string());
    }
    std::filesystem::rename(tmp, file);
}

/// The cached matrix if `file` exists and its header matches `spec` exactly,
/// otherwise nullopt. A matching header followed by truncated data is an error.
inline std::optional<NullPiMatrix> read_null_cache(const std::filesystem::path& file, const NullSpec& spec) {
    std::ifstream is(file, std::ios::binary);
    if (!is) return std::nullopt;
    std::array<char, 5> magic{};
    if (!is.read(magic.data(), magic.size()) || magic != cache_magic) return std::nullopt;
    std::uint32_t version = 0, scheme = 0, pairing = 0;
    std::uint64_t p = 0, B = 0, D = 0, seed = 0;
    double gamma = 0.0;
    const bool ok = detail::get_le(is, version) && detail::get_le(is, p) && detail::get_le(is, B) &&
                    detail::get_le(is, D) && detail::get_le(is, scheme) && detail::get_le(is, pairing) &&
                    detail::get_le(is, gamma) && detail::get_le(is, seed);
    if (!ok || version != cache_version) return std::nullopt;
    if (p != spec.p || B != spec.B || D != spec.D || scheme != static_cast<std::uint32_t>(spec.scheme.kind) ||
        pairing != static_cast<std::uint32_t>(spec.pairing) || gamma != spec.effective_gamma() || seed != spec.seed)
        return std::nullopt;

    NullPiMatrix out;
    out.rows.resize(static_cast<Eigen::Index>(B), static_cast<Eigen::Index>(p));
    out.p = spec.p;
    out.seed = spec.seed;
    out.sorted = true;
    for (Eigen::Index b = 0; b < out.rows.rows(); ++b)
        for (Eigen::Index j = 0; j < out.rows.cols(); ++j)
            require(detail::get_le(is, out.rows(b, j)), ErrorKind::io, "truncated cache file " + file.string());
    return out;
}

/// Sorted aggregated null matrix for `spec`, drawn from Stream(seed).split(0).
inline NullPiMatrix sample_null_for(const NullSpec& spec, std::size_t threads = 1) {
    return aggregated_null_pi(spec.D, spec.B, spec.p, spec.scheme, spec.pairing, Stream(spec.seed).split(0), threads);
}

struct NullLoad {
    NullPiMatrix matrix;
    bool cache_hit = false;
    std::filesystem::path file;
};

/// Read the null matrix from `dir` when a matching file exists; otherwise
/// sample it and (if dir is non-empty) store it.
inline NullLoad load_or_sample_null(const std::filesystem::path& dir, const NullSpec& spec, std::size_t threads = 1) {
    NullLoad out;
    if (!dir.empty()) {
        out.file = null_cache_path(dir, spec);
        if (auto cached = read_null_cache(out.file, spec)) {
            out.matrix = std::move(*cached);
            out.cache_hit = true;
            return out;
        }
    }
    out.matrix = sample_null_for(spec, threads);
    if (!dir.empty()) write_null_cache(out.file, spec, out.matrix);
    return out;
}

/// Full calibration input: null sample, template and level.
struct CalibrationSpec {
    std::size_t p = 0;
    std::size_t D = 1;
    std::size_t B = 10000;
    std::size_t B_prime = 1000;
    std::size_t k_max = 1;
    pistats::AggregationScheme scheme{};
    PairingMode pairing = PairingMode::sorted;
    double alpha = 0.1;
    std::uint64_t seed = 0;

    NullSpec null_spec() const { return NullSpec{p, B, D, scheme, pairing, seed}; }
};

struct CalibrationOutcome {
    CalibrationResult result;
    bool cache_hit = false;
};

/// Same result as aggregated_calibrate(..., Stream(seed)), with the null matrix
/// served from `cache_dir` when possible.
inline CalibrationOutcome calibrate_spec(const CalibrationSpec& spec, const std::filesystem::path& cache_dir = {},
                                         std::size_t threads = 1) {
    require(spec.k_max >= 1 && spec.k_max <= spec.p, ErrorKind::invalid_parameter, "k_max must lie in [1, p]");
    auto null = load_or_sample_null(cache_dir, spec.null_spec(), threads);
    const auto tmpl = aggregated_template(spec.D, spec.B_prime, spec.p, spec.k_max, spec.scheme, Stream(spec.seed).split(1));
    return CalibrationOutcome{calibrate(null.matrix, tmpl, spec.alpha), null.cache_hit};
}

} // namespace kopi::jer
