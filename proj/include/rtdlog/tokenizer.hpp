// WordPiece subword vocabulary: trainer, encoder, decoder, and file I/O.
//
// Training induces merges greedily by likelihood gain,
// score(a,b) = count(ab) / (count(a) * count(b)), over whitespace-split words.
// Specials and normalizer placeholders are injected first and never split.
// Encoding is greedy longest-match-first with "##" continuation tokens.

#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "json.hpp"
#include "rtdlog/common.hpp"
#include "rtdlog/normalize.hpp"

namespace rtdlog {

struct TokenSequence {
    std::vector<int32_t> ids;

    size_t size() const { return ids.size(); }
    bool empty() const { return ids.empty(); }
};

class Vocabulary {
public:
    static constexpr const char* kPad = "[PAD]";
    static constexpr const char* kUnk = "[UNK]";
    static constexpr const char* kMask = "[MASK]";
    static constexpr const char* kContinuation = "##";

    int32_t pad_id() const { return pad_id_; }
    int32_t unk_id() const { return unk_id_; }
    int32_t mask_id() const { return mask_id_; }
    int32_t size() const { return static_cast<int32_t>(tokens_.size()); }
    int32_t max_vocab() const { return max_vocab_; }
    size_t max_token_len() const { return max_token_len_; }
    const std::vector<std::string>& tokens() const { return tokens_; }
    const std::vector<std::string>& placeholders() const { return placeholders_; }

    const std::string& token(int32_t id) const {
        if (id < 0 || id >= size()) throw DataError("vocabulary: invalid token id");
        return tokens_[static_cast<size_t>(id)];
    }

    int32_t find(std::string_view token) const {
        auto it = index_.find(std::string(token));
        return it == index_.end() ? -1 : it->second;
    }

    friend Vocabulary train_vocab(const std::vector<NormalizedMessage>&, int32_t,
                                  const std::vector<std::string>&);
    friend Vocabulary load_vocabulary(const std::string&);

private:
    int32_t add(const std::string& tok) {
        auto [it, inserted] = index_.emplace(tok, static_cast<int32_t>(tokens_.size()));
        if (inserted) tokens_.push_back(tok);
        return it->second;
    }

    std::vector<std::string> tokens_;
    std::unordered_map<std::string, int32_t> index_;
    std::vector<std::string> placeholders_;
    int32_t pad_id_ = 0, unk_id_ = 1, mask_id_ = 2;
    int32_t max_vocab_ = 0;
    size_t max_token_len_ = 1;

    friend class WordPieceEncoder;
};

namespace detail {

// Splits a word into UTF-8 codepoint chunks (bytes stay grouped).
inline std::vector<std::string> codepoints(std::string_view word) {
    std::vector<std::string> out;
    size_t i = 0;
    while (i < word.size()) {
        unsigned char c = static_cast<unsigned char>(word[i]);
        size_t len = (c < 0x80) ? 1 : (c < 0xE0) ? 2 : (c < 0xF0) ? 3 : 4;
        len = std::min(len, word.size() - i);
        out.emplace_back(word.substr(i, len));
        i += len;
    }
    return out;
}

}  // namespace detail

// Deterministic WordPiece induction. Ties between equal-scoring pairs break
// toward the lexicographically smallest (left, right) token strings.
inline Vocabulary train_vocab(const std::vector<NormalizedMessage>& corpus, int32_t max_vocab,
                              const std::vector<std::string>& placeholders = {}) {
    if (corpus.empty()) throw DataError("train_vocab: empty corpus");

    Vocabulary v;
    v.max_vocab_ = max_vocab;
    v.pad_id_ = v.add(Vocabulary::kPad);
    v.unk_id_ = v.add(Vocabulary::kUnk);
    v.mask_id_ = v.add(Vocabulary::kMask);
    for (const auto& p : placeholders) {
        v.add(p);
        v.placeholders_.push_back(p);
    }

    // Word frequencies; sorted map keeps everything order-independent.
    std::map<std::string, int64_t> word_freq;
    for (const auto& msg : corpus) {
        for (auto& w : split_ws(msg.text)) word_freq[w] += 1;
    }

    // Protected words (already whole tokens) never participate in merges.
    auto is_protected = [&](const std::string& w) { return v.find(w) >= 0; };

    // Alphabet: first codepoint bare, the rest with the continuation prefix.
    std::map<std::string, int64_t> alphabet;
    for (const auto& [word, freq] : word_freq) {
        if (is_protected(word)) continue;
        auto cps = detail::codepoints(word);
        for (size_t i = 0; i < cps.size(); ++i) {
            alphabet[i == 0 ? cps[i] : Vocabulary::kContinuation + cps[i]] += freq;
        }
    }
    for (const auto& [sym, freq] : alphabet) v.add(sym);
    if (v.size() > max_vocab)
        throw UsageError("train_vocab: max_vocab " + std::to_string(max_vocab) +
                         " smaller than specials+alphabet " + std::to_string(v.size()));

    // Working segmentation of every distinct word.
    struct Entry {
        std::vector<int32_t> symbols;
        int64_t freq;
    };
    std::vector<Entry> entries;
    for (const auto& [word, freq] : word_freq) {
        if (is_protected(word)) continue;
        auto cps = detail::codepoints(word);
        Entry e;
        e.freq = freq;
        for (size_t i = 0; i < cps.size(); ++i) {
            e.symbols.push_back(
                v.find(i == 0 ? cps[i] : Vocabulary::kContinuation + cps[i]));
        }
        entries.push_back(std::move(e));
    }

    while (v.size() < max_vocab) {
        // Recount symbol and adjacent-pair frequencies over the segmentation.
        std::unordered_map<int64_t, int64_t> pair_count;
        std::unordered_map<int32_t, int64_t> sym_count;
        auto key = [](int32_t a, int32_t b) {
            return (static_cast<int64_t>(a) << 32) | static_cast<uint32_t>(b);
        };
        for (const auto& e : entries) {
            for (size_t i = 0; i < e.symbols.size(); ++i) {
                sym_count[e.symbols[i]] += e.freq;
                if (i + 1 < e.symbols.size()) pair_count[key(e.symbols[i], e.symbols[i + 1])] += e.freq;
            }
        }
        if (pair_count.empty()) break;

        int32_t best_a = -1, best_b = -1;
        double best_score = -1.0;
        for (const auto& [k, c] : pair_count) {
            int32_t a = static_cast<int32_t>(k >> 32);
            int32_t b = static_cast<int32_t>(k & 0xFFFFFFFF);
            double score = static_cast<double>(c) /
                           (static_cast<double>(sym_count[a]) * static_cast<double>(sym_count[b]));
            bool better = score > best_score;
            if (!better && score == best_score) {
                auto cand = std::make_pair(v.token(a), v.token(b));
                auto cur = std::make_pair(v.token(best_a), v.token(best_b));
                better = cand < cur;
            }
            if (better) {
                best_score = score;
                best_a = a;
                best_b = b;
            }
        }

        std::string merged = v.token(best_a);
        std::string_view right = v.token(best_b);
        if (right.substr(0, 2) == Vocabulary::kContinuation) right.remove_prefix(2);
        merged += right;
        if (v.find(merged) >= 0) break;  // nothing new to learn
        int32_t merged_id = v.add(merged);

        for (auto& e : entries) {
            std::vector<int32_t> out;
            out.reserve(e.symbols.size());
            for (size_t i = 0; i < e.symbols.size(); ++i) {
                if (i + 1 < e.symbols.size() && e.symbols[i] == best_a &&
                    e.symbols[i + 1] == best_b) {
                    out.push_back(merged_id);
                    ++i;
                } else {
                    out.push_back(e.symbols[i]);
                }
            }
            e.symbols = std::move(out);
        }
    }

    for (const auto& t : v.tokens_) v.max_token_len_ = std::max(v.max_token_len_, t.size());
    return v;
}

// Greedy longest-match-first encoding of one normalized message. A word (or
// word residue) with no matching prefix becomes a single [UNK]. Output is
// truncated at max_len.
inline TokenSequence encode(const NormalizedMessage& msg, const Vocabulary& vocab,
                            size_t max_len = 128) {
    TokenSequence seq;
    for (const auto& word : split_ws(msg.text)) {
        if (seq.size() >= max_len) break;
        int32_t whole = vocab.find(word);
        if (whole >= 0) {
            seq.ids.push_back(whole);
            continue;
        }
        size_t pos = 0;
        std::string candidate;
        while (pos < word.size() && seq.size() < max_len) {
            size_t best_len = 0;
            int32_t best_id = -1;
            size_t limit = std::min(word.size() - pos, vocab.max_token_len());
            for (size_t len = limit; len >= 1; --len) {
                candidate.assign(pos > 0 ? Vocabulary::kContinuation : "");
                candidate.append(word, pos, len);
                int32_t id = vocab.find(candidate);
                if (id >= 0) {
                    best_len = len;
                    best_id = id;
                    break;
                }
            }
            if (best_id < 0) {
                seq.ids.push_back(vocab.unk_id());  // unmatched residue
                break;
            }
            seq.ids.push_back(best_id);
            pos += best_len;
        }
    }
    return seq;
}

// Joins tokens back into text, stripping continuation prefixes. Exact inverse
// of encode on words fully covered by the vocabulary.
inline std::string decode(const TokenSequence& seq, const Vocabulary& vocab) {
    std::string out;
    for (int32_t id : seq.ids) {
        const std::string& tok = vocab.token(id);
        if (tok.size() > 2 && tok.compare(0, 2, Vocabulary::kContinuation) == 0) {
            out.append(tok, 2, std::string::npos);
        } else {
            if (!out.empty()) out.push_back(' ');
            out.append(tok);
        }
    }
    return out;
}

// Vocabulary file: one token per line, line number = id. A JSON sidecar
// (path + ".json") records specials, placeholders, and max_vocab.
inline void save_vocabulary(const Vocabulary& v, const std::string& path) {
    std::string body;
    for (const auto& t : v.tokens()) {
        body += t;
        body += '\n';
    }
    write_text_file(path, body);
    nlohmann::json side = {{"version", 1},
                           {"max_vocab", v.max_vocab()},
                           {"continuation_prefix", Vocabulary::kContinuation},
                           {"specials",
                            {{"pad", v.pad_id()}, {"unk", v.unk_id()}, {"mask", v.mask_id()}}},
                           {"placeholders", v.placeholders()}};
    write_text_file(path + ".json", side.dump(2) + "\n");
}

inline Vocabulary load_vocabulary(const std::string& path) {
    Vocabulary v;
    std::string body = read_text_file(path);
    size_t start = 0;
    while (start < body.size()) {
        size_t end = body.find('\n', start);
        if (end == std::string::npos) end = body.size();
        if (end > start) v.add(body.substr(start, end - start));
        start = end + 1;
    }
    nlohmann::json side = nlohmann::json::parse(read_text_file(path + ".json"));
    if (side.value("version", 0) != 1) throw DataError("vocabulary sidecar: unsupported version");
    v.max_vocab_ = side.at("max_vocab").get<int32_t>();
    v.pad_id_ = side.at("specials").at("pad").get<int32_t>();
    v.unk_id_ = side.at("specials").at("unk").get<int32_t>();
    v.mask_id_ = side.at("specials").at("mask").get<int32_t>();
    v.placeholders_ = side.at("placeholders").get<std::vector<std::string>>();
    for (int32_t id : {v.pad_id_, v.unk_id_, v.mask_id_}) {
        if (id < 0 || id >= v.size()) throw DataError("vocabulary sidecar: special id out of range");
    }
    for (const auto& t : v.tokens_) v.max_token_len_ = std::max(v.max_token_len_, t.size());
    return v;
}

}  // namespace rtdlog
