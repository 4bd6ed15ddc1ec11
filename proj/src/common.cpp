#include "factcheck/common.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace factcheck {

std::optional<Date> parse_date(std::string_view text) {
    if (text.size() != 10 || text[4] != '-' || text[7] != '-') {
        return std::nullopt;
    }
    auto digits = [&](std::size_t pos, std::size_t len) -> std::optional<int> {
        int v = 0;
        for (std::size_t i = pos; i < pos + len; ++i) {
            if (text[i] < '0' || text[i] > '9') {
                return std::nullopt;
            }
            v = v * 10 + (text[i] - '0');
        }
        return v;
    };
    const auto y = digits(0, 4);
    const auto m = digits(5, 2);
    const auto d = digits(8, 2);
    if (!y || !m || !d) {
        return std::nullopt;
    }
    const Date date{std::chrono::year{*y}, std::chrono::month{static_cast<unsigned>(*m)},
                    std::chrono::day{static_cast<unsigned>(*d)}};
    if (!date.ok()) {
        return std::nullopt;
    }
    return date;
}

std::string format_date(const Date& date) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%04d-%02u-%02u", static_cast<int>(date.year()),
                  static_cast<unsigned>(date.month()), static_cast<unsigned>(date.day()));
    return buf;
}

std::uint64_t uniform_index(Rng& rng, std::uint64_t bound) {
    if (bound == 0) {
        throw std::invalid_argument("uniform_index: bound must be positive");
    }
    // 2^64 mod bound low values are rejected so every residue is equally likely.
    const std::uint64_t threshold = (0 - bound) % bound;
    std::uint64_t x = rng();
    while (x < threshold) {
        x = rng();
    }
    return x % bound;
}

double uniform_unit(Rng& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t basis) {
    std::uint64_t h = basis;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string hex64(std::uint64_t value) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(value));
    return buf;
}

namespace binio {

void write_string(std::ostream& out, std::string_view text) {
    write_le<std::uint32_t>(out, static_cast<std::uint32_t>(text.size()));
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
}

std::string read_string(std::istream& in, std::uint32_t max_length) {
    const auto len = read_le<std::uint32_t>(in);
    if (len > max_length) {
        throw Error("string length " + std::to_string(len) + " exceeds limit");
    }
    std::string s(len, '\0');
    if (len > 0 && !in.read(s.data(), len)) {
        throw Error("unexpected end of binary file");
    }
    return s;
}

void expect_magic(std::istream& in, std::string_view magic, std::string_view what) {
    std::string buf(magic.size(), '\0');
    if (!in.read(buf.data(), static_cast<std::streamsize>(buf.size())) || buf != magic) {
        throw Error(std::string(what) + ": bad magic, expected \"" + std::string(magic) + "\"");
    }
}

}  // namespace binio

void write_file_atomic(const std::string& path, const std::string& contents) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) {
            throw Error("cannot open " + tmp + " for writing");
        }
        out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
        if (!out) {
            throw Error("write failed: " + tmp);
        }
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) {
        std::filesystem::remove(tmp);
        throw Error("cannot rename " + tmp + " to " + path + ": " + ec.message());
    }
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error("cannot open " + path);
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace factcheck
