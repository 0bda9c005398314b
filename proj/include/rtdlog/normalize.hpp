// Log message normalization: lowercasing, structured-value replacement, and
// stop-word removal, applied before tokenization.
//
// Pipeline per message: lowercase, then each replacement rule in configured
// order (leftmost-longest), then punctuation is separated into standalone
// tokens (placeholders stay atomic), then stop words are dropped, then the
// surviving tokens are joined with single spaces. Applying the normalizer to
// its own output is a no-op.

#pragma once

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "json.hpp"
#include "rtdlog/common.hpp"
#include "rtdlog/linear_regex.hpp"

namespace rtdlog {

struct NormalizerRule {
    std::string pattern;
    std::string placeholder;  // single token of the form <name>
};

struct NormalizerConfig {
    bool lowercase = true;
    std::vector<std::string> stopwords;
    std::vector<NormalizerRule> rules;
};

struct NormalizedMessage {
    std::string text;
    int64_t source_line_no = -1;
};

inline bool is_valid_placeholder(std::string_view p) {
    if (p.size() < 3 || p.front() != '<' || p.back() != '>') return false;
    if (!(p[1] >= 'a' && p[1] <= 'z')) return false;
    for (size_t i = 2; i + 1 < p.size(); ++i) {
        char c = p[i];
        if (!((c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '_')) return false;
    }
    return true;
}

// Rule order matters: composite values (dates, times, IPs, paths) are matched
// before the hex and number rules would consume their digit substrings.
//
// The hex rule takes words over [0-9a-f] of length >= 4 that contain at least
// one digit and at least one letter. Pure digit runs fall through to <num>;
// pure a-f words ("deed", "face") are ordinary words, not IDs.
inline NormalizerConfig default_normalizer_config() {
    NormalizerConfig cfg;
    cfg.lowercase = true;
    cfg.stopwords = {"of", "have", "been", "the", "a", "an", "is", "are", "to"};
    cfg.rules = {
        {"\\b\\d{4}[-./]\\d{1,2}[-./]\\d{1,2}([-.T]\\d{1,2}[.:]\\d{2}[.:]\\d{2}(\\.\\d+)?)?\\b",
         "<date>"},
        {"\\b\\d{1,2}:\\d{2}(:\\d{2})?(\\.\\d+)?\\b", "<time>"},
        {"\\b\\d{1,3}(\\.\\d{1,3}){3}(:\\d{1,6})?\\b", "<ip>"},
        {"(?<!\\w)(/[a-zA-Z0-9_.+~-]+)+/?", "<path>"},
        {"\\b(0x[0-9a-f]+"
         "|[0-9a-f]{2,}([0-9][a-f]|[a-f][0-9])[0-9a-f]*"
         "|[0-9a-f]([0-9][a-f]|[a-f][0-9])[0-9a-f]+"
         "|([0-9][a-f]|[a-f][0-9])[0-9a-f]{2,})\\b",
         "<hex>"},
        {"\\b\\d+(\\.\\d+)?\\b", "<num>"},
    };
    return cfg;
}

inline nlohmann::json normalizer_config_to_json(const NormalizerConfig& cfg) {
    nlohmann::json j;
    j["version"] = 1;
    j["lowercase"] = cfg.lowercase;
    j["stopwords"] = cfg.stopwords;
    j["rules"] = nlohmann::json::array();
    for (const auto& r : cfg.rules) {
        j["rules"].push_back({{"pattern", r.pattern}, {"placeholder", r.placeholder}});
    }
    return j;
}

inline NormalizerConfig normalizer_config_from_json(const nlohmann::json& j) {
    if (!j.contains("version") || j.at("version").get<int>() != 1)
        throw DataError("normalizer config: unsupported version");
    NormalizerConfig cfg;
    cfg.lowercase = j.value("lowercase", true);
    cfg.stopwords = j.at("stopwords").get<std::vector<std::string>>();
    for (const auto& r : j.at("rules")) {
        NormalizerRule rule{r.at("pattern").get<std::string>(),
                            r.at("placeholder").get<std::string>()};
        if (!is_valid_placeholder(rule.placeholder))
            throw DataError("normalizer config: bad placeholder " + rule.placeholder);
        cfg.rules.push_back(std::move(rule));
    }
    return cfg;
}

class Normalizer {
public:
    explicit Normalizer(NormalizerConfig cfg) : cfg_(std::move(cfg)) {
        for (const auto& r : cfg_.rules) {
            if (!is_valid_placeholder(r.placeholder))
                throw UsageError("bad placeholder: " + r.placeholder);
            compiled_.emplace_back(r.pattern);
        }
        stopset_.insert(cfg_.stopwords.begin(), cfg_.stopwords.end());
    }

    const NormalizerConfig& config() const { return cfg_; }

    // Placeholder tokens of every configured rule, for vocabulary injection.
    std::vector<std::string> placeholders() const {
        std::vector<std::string> out;
        for (const auto& r : cfg_.rules) {
            if (std::find(out.begin(), out.end(), r.placeholder) == out.end())
                out.push_back(r.placeholder);
        }
        return out;
    }

    NormalizedMessage normalize(std::string_view raw, int64_t source_line_no = -1) const {
        std::string s = utf8_sanitize(raw);
        if (cfg_.lowercase) {
            for (char& c : s)
                if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
        }
        for (size_t i = 0; i < compiled_.size(); ++i) {
            s = compiled_[i].replace_all(s, cfg_.rules[i].placeholder);
        }
        std::string out;
        out.reserve(s.size());
        auto emit = [&](std::string_view tok) {
            if (tok.empty()) return;
            if (stopset_.count(std::string(tok))) return;
            if (!out.empty()) out.push_back(' ');
            out.append(tok);
        };
        size_t i = 0;
        size_t word_start = npos_;
        auto flush_word = [&](size_t end) {
            if (word_start != npos_) emit(std::string_view(s).substr(word_start, end - word_start));
            word_start = npos_;
        };
        while (i < s.size()) {
            unsigned char c = static_cast<unsigned char>(s[i]);
            if (c == '<') {
                size_t ph_end = placeholder_end(s, i);
                if (ph_end != npos_) {
                    flush_word(i);
                    emit(std::string_view(s).substr(i, ph_end - i));
                    i = ph_end;
                    continue;
                }
            }
            if (is_word_char(c)) {
                if (word_start == npos_) word_start = i;
                ++i;
                continue;
            }
            flush_word(i);
            if (!std::isspace(c)) emit(std::string_view(s).substr(i, 1));
            ++i;
        }
        flush_word(s.size());
        return NormalizedMessage{std::move(out), source_line_no};
    }

private:
    static constexpr size_t npos_ = static_cast<size_t>(-1);

    // Bytes >= 0x80 count as word characters so multi-byte UTF-8 sequences
    // are never split apart.
    static bool is_word_char(unsigned char c) {
        return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') ||
               c == '_' || c >= 0x80;
    }

    static size_t placeholder_end(std::string_view s, size_t start) {
        size_t i = start + 1;
        if (i >= s.size() || !(s[i] >= 'a' && s[i] <= 'z')) return npos_;
        ++i;
        while (i < s.size() &&
               ((s[i] >= 'a' && s[i] <= 'z') || (s[i] >= '0' && s[i] <= '9') || s[i] == '_'))
            ++i;
        if (i < s.size() && s[i] == '>') return i + 1;
        return npos_;
    }

    NormalizerConfig cfg_;
    std::vector<LinearRegex> compiled_;
    std::unordered_set<std::string> stopset_;
};

}  // namespace rtdlog
