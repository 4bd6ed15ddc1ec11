#pragma once

#include <bit>
#include <chrono>
#include <cstdint>
#include <istream>
#include <optional>
#include <ostream>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace factcheck {

/// Runtime failure inside the engine (bad input files, failed services, ...).
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

using Date = std::chrono::year_month_day;

/// Parses a strict ISO-8601 calendar date (YYYY-MM-DD).
std::optional<Date> parse_date(std::string_view text);
std::string format_date(const Date& date);

/// Seeded generator used for every stochastic step. mt19937_64 output is
/// fully specified by the standard, and bounded draws go through
/// `uniform_index` instead of std::uniform_int_distribution so sequences match
/// across standard library implementations.
using Rng = std::mt19937_64;

/// Uniform integer in [0, bound) by rejection sampling. bound must be > 0.
std::uint64_t uniform_index(Rng& rng, std::uint64_t bound);

/// Uniform double in [0, 1) from the top 53 bits of one draw.
double uniform_unit(Rng& rng);

template <typename T>
void seeded_shuffle(std::vector<T>& items, Rng& rng) {
    for (std::size_t i = items.size(); i > 1; --i) {
        const auto j = static_cast<std::size_t>(uniform_index(rng, i));
        std::swap(items[i - 1], items[j]);
    }
}

/// 64-bit FNV-1a.
std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t basis = 0xcbf29ce484222325ULL);

std::string hex64(std::uint64_t value);

// Little-endian binary helpers shared by the checkpoint and index formats.
namespace binio {

template <typename T>
void write_le(std::ostream& out, T value) {
    static_assert(std::is_integral_v<T> || std::is_floating_point_v<T>);
    using U = std::conditional_t<sizeof(T) == 8, std::uint64_t,
              std::conditional_t<sizeof(T) == 4, std::uint32_t,
              std::conditional_t<sizeof(T) == 2, std::uint16_t, std::uint8_t>>>;
    auto bits = std::bit_cast<U>(value);
    char buf[sizeof(T)];
    for (std::size_t i = 0; i < sizeof(T); ++i) {
        buf[i] = static_cast<char>(bits & 0xffu);
        bits = static_cast<U>(bits >> 8);
    }
    out.write(buf, sizeof(T));
}

template <typename T>
T read_le(std::istream& in) {
    using U = std::conditional_t<sizeof(T) == 8, std::uint64_t,
              std::conditional_t<sizeof(T) == 4, std::uint32_t,
              std::conditional_t<sizeof(T) == 2, std::uint16_t, std::uint8_t>>>;
    unsigned char buf[sizeof(T)];
    if (!in.read(reinterpret_cast<char*>(buf), sizeof(T))) {
        throw Error("unexpected end of binary file");
    }
    U bits = 0;
    for (std::size_t i = sizeof(T); i-- > 0;) {
        bits = static_cast<U>((bits << 8) | buf[i]);
    }
    return std::bit_cast<T>(bits);
}

void write_string(std::ostream& out, std::string_view text);
std::string read_string(std::istream& in, std::uint32_t max_length = 1u << 24);
void expect_magic(std::istream& in, std::string_view magic, std::string_view what);

}  // namespace binio

/// Writes `contents` to `path` through a temporary file and rename, so a
/// failed write never leaves a partial artifact behind.
void write_file_atomic(const std::string& path, const std::string& contents);
std::string read_file(const std::string& path);

}  // namespace factcheck
