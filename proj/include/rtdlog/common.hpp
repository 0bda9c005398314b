// Shared error types and small text/IO helpers.

#pragma once

#include <charconv>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace rtdlog {

// Error categories map onto CLI exit codes: usage=2, data=3, numeric=4.
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Replaces invalid UTF-8 byte sequences with U+FFFD so downstream code can
// assume well-formed text. Valid multi-byte sequences pass through untouched.
inline std::string utf8_sanitize(std::string_view in) {
    static constexpr const char* kReplacement = "\xEF\xBF\xBD";
    std::string out;
    out.reserve(in.size());
    size_t i = 0;
    auto cont = [&](size_t j) {
        return j < in.size() && (static_cast<unsigned char>(in[j]) & 0xC0) == 0x80;
    };
    while (i < in.size()) {
        unsigned char c = static_cast<unsigned char>(in[i]);
        if (c < 0x80) {
            out.push_back(static_cast<char>(c));
            i += 1;
        } else if (c >= 0xC2 && c <= 0xDF && cont(i + 1)) {
            out.append(in.substr(i, 2));
            i += 2;
        } else if (c >= 0xE0 && c <= 0xEF && cont(i + 1) && cont(i + 2)) {
            out.append(in.substr(i, 3));
            i += 3;
        } else if (c >= 0xF0 && c <= 0xF4 && cont(i + 1) && cont(i + 2) && cont(i + 3)) {
            out.append(in.substr(i, 4));
            i += 4;
        } else {
            out.append(kReplacement);
            i += 1;
        }
    }
    return out;
}

// Shortest round-trip decimal form. Used everywhere a float is written to a
// CSV or report so that reruns are byte-identical and values re-parse exactly.
inline std::string format_double(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

inline std::vector<std::string> split_ws(std::string_view s) {
    std::vector<std::string> out;
    size_t i = 0;
    while (i < s.size()) {
        while (i < s.size() && (s[i] == ' ' || s[i] == '\t')) ++i;
        size_t j = i;
        while (j < s.size() && s[j] != ' ' && s[j] != '\t') ++j;
        if (j > i) out.emplace_back(s.substr(i, j - i));
        i = j;
    }
    return out;
}

inline std::string read_text_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw UsageError("cannot open file: " + path);
    std::ostringstream ss;
    ss << f.rdbuf();
    if (f.bad()) throw DataError("read failure: " + path);
    return ss.str();
}

inline void write_text_file(const std::string& path, std::string_view content) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot write file: " + path);
    f.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!f) throw DataError("write failure: " + path);
}

}  // namespace rtdlog
