// Labeled log corpora: loading, train/test splits, fixed-window grouping,
// and synthetic corpus generation.

#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "rtdlog/common.hpp"
#include "rtdlog/rng.hpp"

namespace rtdlog {

enum class Label : uint8_t { Normal, Anomaly };

inline const char* label_name(Label l) { return l == Label::Normal ? "normal" : "anomaly"; }

struct RawLogLine {
    int64_t line_no = 0;  // 1-based position in the source file
    std::optional<int64_t> timestamp;
    Label label = Label::Normal;
    std::string text;
};

// Column layout of a labeled dataset file. The first whitespace-separated
// field is the label ("-" means normal, anything else is an alert tag); the
// message is everything after `meta_columns` further fields.
struct DatasetProfile {
    std::string name;
    int meta_columns = 8;
    int timestamp_column = 0;  // index among the metadata fields, -1 = none
};

inline DatasetProfile dataset_profile(const std::string& name) {
    if (name == "bgl") return {"bgl", 8, 0};
    if (name == "spirit") return {"spirit", 7, 0};
    if (name == "thunderbird") return {"thunderbird", 7, 0};
    if (name == "raw") return {"raw", 0, -1};  // unlabeled single-message lines
    throw UsageError("unknown dataset profile: " + name);
}

struct SkipRecord {
    int64_t line_no;
    std::string reason;
};

struct LoadResult {
    std::vector<RawLogLine> lines;
    std::vector<SkipRecord> skipped;
};

// Splits one raw file line into (label, timestamp, message) per the profile.
// Returns false when the line has too few fields to carry the metadata.
inline bool parse_dataset_line(std::string_view line, const DatasetProfile& profile,
                               int64_t line_no, RawLogLine& out, std::string& reason) {
    size_t pos = 0;
    auto next_field = [&](std::string_view& field) {
        while (pos < line.size() && (line[pos] == ' ' || line[pos] == '\t')) ++pos;
        if (pos >= line.size()) return false;
        size_t start = pos;
        while (pos < line.size() && line[pos] != ' ' && line[pos] != '\t') ++pos;
        field = line.substr(start, pos - start);
        return true;
    };

    std::string_view label_field;
    if (!next_field(label_field)) {
        reason = "empty line";
        return false;
    }
    out.line_no = line_no;
    out.label = (label_field == "-") ? Label::Normal : Label::Anomaly;
    out.timestamp.reset();
    for (int i = 0; i < profile.meta_columns; ++i) {
        std::string_view field;
        if (!next_field(field)) {
            reason = "expected " + std::to_string(profile.meta_columns) +
                     " metadata fields, found " + std::to_string(i);
            return false;
        }
        if (i == profile.timestamp_column) {
            int64_t ts = 0;
            auto res = std::from_chars(field.data(), field.data() + field.size(), ts);
            if (res.ec == std::errc{} && res.ptr == field.data() + field.size())
                out.timestamp = ts;
        }
    }
    while (pos < line.size() && (line[pos] == ' ' || line[pos] == '\t')) ++pos;
    out.text = utf8_sanitize(line.substr(pos));
    return true;
}

inline LoadResult load_dataset(const std::string& path, const DatasetProfile& profile) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw UsageError("cannot open dataset: " + path);
    LoadResult result;
    std::string line;
    int64_t line_no = 0;
    while (std::getline(f, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        RawLogLine parsed;
        std::string reason;
        if (parse_dataset_line(line, profile, line_no, parsed, reason)) {
            result.lines.push_back(std::move(parsed));
        } else {
            result.skipped.push_back({line_no, std::move(reason)});
        }
    }
    if (f.bad()) throw DataError("read failure: " + path);
    return result;
}

// --- splitting ---------------------------------------------------------------

struct SplitSpec {
    enum class Mode : uint8_t { Random, Chronological };
    Mode mode = Mode::Random;
    double train_fraction = 0.8;
    uint64_t seed = 0;
};

struct Split {
    std::vector<RawLogLine> train;
    std::vector<RawLogLine> test;
};

inline Split split(const std::vector<RawLogLine>& lines, const SplitSpec& spec) {
    if (lines.empty()) throw DataError("split: empty input");
    if (!(spec.train_fraction > 0.0 && spec.train_fraction < 1.0))
        throw UsageError("split: train_fraction must be in (0,1)");
    size_t n = lines.size();
    // floor of the exact product; the epsilon absorbs binary representation
    // error in fractions like 0.7 so floor(0.7 * 10) is 7, not 6.
    size_t n_train =
        static_cast<size_t>(std::floor(spec.train_fraction * static_cast<double>(n) + 1e-9));
    Split out;
    if (spec.mode == SplitSpec::Mode::Chronological) {
        out.train.assign(lines.begin(), lines.begin() + static_cast<ptrdiff_t>(n_train));
        out.test.assign(lines.begin() + static_cast<ptrdiff_t>(n_train), lines.end());
    } else {
        std::vector<size_t> order(n);
        std::iota(order.begin(), order.end(), size_t{0});
        Rng rng(spec.seed);
        rng.shuffle(order);
        out.train.reserve(n_train);
        out.test.reserve(n - n_train);
        for (size_t i = 0; i < n; ++i) {
            (i < n_train ? out.train : out.test).push_back(lines[order[i]]);
        }
    }
    return out;
}

// --- grouping ----------------------------------------------------------------

struct WindowSpec {
    enum class Kind : uint8_t { Count, Minutes };
    Kind kind = Kind::Count;
    int64_t size = 100;  // messages for Count, minutes for Minutes
};

struct LogSequence {
    std::vector<size_t> member_indices;  // into the grouped input
    std::vector<int64_t> line_nos;
    Label label = Label::Normal;
};

// Order-preserving, non-overlapping partition; the trailing partial window is
// kept. A sequence is anomalous iff any member line is.
inline std::vector<LogSequence> group(const std::vector<RawLogLine>& lines,
                                      const WindowSpec& window) {
    if (window.size < 1) throw UsageError("group: window size must be >= 1");
    std::vector<LogSequence> out;
    if (lines.empty()) return out;
    if (window.kind == WindowSpec::Kind::Minutes) {
        for (const auto& l : lines) {
            if (!l.timestamp)
                throw DataError("group: line " + std::to_string(l.line_no) +
                                " has no timestamp, required for time windows");
        }
    }
    int64_t window_limit_s = window.size * 60;
    LogSequence cur;
    int64_t window_start_ts = 0;
    auto flush = [&] {
        if (!cur.member_indices.empty()) out.push_back(std::move(cur));
        cur = LogSequence{};
    };
    for (size_t i = 0; i < lines.size(); ++i) {
        const auto& l = lines[i];
        bool start_new = cur.member_indices.empty();
        if (!start_new) {
            if (window.kind == WindowSpec::Kind::Count) {
                start_new = cur.member_indices.size() >= static_cast<size_t>(window.size);
            } else {
                start_new = (*l.timestamp - window_start_ts) >= window_limit_s;
            }
        }
        if (start_new) {
            flush();
            if (window.kind == WindowSpec::Kind::Minutes) window_start_ts = *l.timestamp;
        }
        cur.member_indices.push_back(i);
        cur.line_nos.push_back(l.line_no);
        if (l.label == Label::Anomaly) cur.label = Label::Anomaly;
    }
    flush();
    return out;
}

// --- synthetic corpus ----------------------------------------------------------

struct SynthSpec {
    int n_templates = 20;
    int n_anomaly_templates = 6;
    int64_t n_lines = 5000;
    int64_t n_anomalies = 200;
    std::vector<std::string> param_vocab;  // pool for {w} slots; defaults applied when empty
    uint64_t seed = 1;
};

struct SynthResult {
    std::vector<RawLogLine> lines;
    std::vector<std::string> file_lines;  // full dataset rows, bgl profile layout
    nlohmann::json manifest;
};

namespace detail {

inline std::vector<std::string> synth_normal_skeletons() {
    return {
        "session {w} opened for user {w} from {ip}",
        "download of {path} completed in {n} ms",
        "connection to {ip} established on port {n}",
        "cache block {hex} flushed after {n} writes",
        "scheduler assigned job {n} to node {w}",
        "heartbeat from {w} received latency {n} ms",
        "config {path} reloaded by {w}",
        "packet queue {w} drained {n} entries",
        "lease for {ip} renewed ttl {n}",
        "checkpoint {hex} written to {path}",
        "worker {w} finished batch {n} status ok",
        "link {w} speed negotiated at {n} mbps",
        "volume {path} mounted read write",
        "token {hex} issued to {w}",
        "replica {w} synced {n} segments from {ip}",
        "timer {w} fired after {n} ticks",
        "route to {ip} updated metric {n}",
        "buffer pool resized to {n} pages",
        "snapshot {hex} verified checksum ok",
        "client {w} authenticated via {w}",
        "metrics flushed {n} samples to {path}",
        "thread pool {w} grew to {n} workers",
        "index {w} compacted {n} entries",
        "archive {path} rotated size {n} kb",
        "peer {ip} acknowledged sequence {n}",
    };
}

inline std::vector<std::string> synth_anomaly_skeletons() {
    return {
        "kernel panic unable to handle request at {hex}",
        "double bit ecc failure detected on dimm {n}",
        "filesystem corruption found in superblock {hex}",
        "watchdog reset machine wedge detected cpu {n}",
        "unrecoverable torus receiver error on {w}",
        "oom killer terminated process {n} rss exceeded",
        "raid array degraded disk {n} kicked from mirror",
        "voltage fault rail {w} outside tolerance reading {n}",
    };
}

inline std::vector<std::string> synth_param_words() {
    return {"alpha", "bravo", "delta", "gamma", "omega", "sigma", "kappa", "zeta",
            "north", "south", "east",  "west",  "amber", "coral", "ivory", "onyx"};
}

inline std::string synth_fill(const std::string& skeleton, Rng& rng,
                              const std::vector<std::string>& words) {
    static const char* hex_digits = "0123456789abcdef";
    std::string out;
    for (size_t i = 0; i < skeleton.size();) {
        if (skeleton[i] == '{') {
            size_t close = skeleton.find('}', i);
            std::string slot = skeleton.substr(i + 1, close - i - 1);
            if (slot == "w") {
                out += words[rng.next_below(words.size())];
            } else if (slot == "n") {
                out += std::to_string(rng.next_below(100000));
            } else if (slot == "ip") {
                out += std::to_string(10 + rng.next_below(160)) + "." +
                       std::to_string(rng.next_below(256)) + "." +
                       std::to_string(rng.next_below(256)) + "." +
                       std::to_string(1 + rng.next_below(254));
            } else if (slot == "path") {
                out += "/srv/" + words[rng.next_below(words.size())] + "/" +
                       words[rng.next_below(words.size())] + ".log";
            } else {  // hex
                out += "0x";
                for (int k = 0; k < 8; ++k)
                    out += hex_digits[rng.next_below(16)];
            }
            i = close + 1;
        } else {
            out += skeleton[i++];
        }
    }
    return out;
}

}  // namespace detail

// Deterministic labeled corpus: normal lines instantiate `n_templates`
// templates; anomalies come from a disjoint template set and are interleaved
// at seeded random positions. The manifest records per-line ground truth.
inline SynthResult synthesize(const SynthSpec& spec) {
    if (spec.n_templates < 2) throw UsageError("synthesize: n_templates must be >= 2");
    if (spec.n_anomalies > 0 && spec.n_anomaly_templates < 1)
        throw UsageError("synthesize: anomalies requested but no anomaly templates");
    if (spec.n_lines < 0 || spec.n_anomalies < 0)
        throw UsageError("synthesize: negative counts");

    auto normal_skel = detail::synth_normal_skeletons();
    auto anomaly_skel = detail::synth_anomaly_skeletons();
    std::vector<std::string> words =
        spec.param_vocab.empty() ? detail::synth_param_words() : spec.param_vocab;

    // Template strings are the skeleton pool cycled with a distinguishing
    // service token, so any template count stays pairwise distinct.
    std::vector<std::string> normal_templates, anomaly_templates;
    for (int i = 0; i < spec.n_templates; ++i) {
        normal_templates.push_back("svc" + std::to_string(i) + " " +
                                   normal_skel[static_cast<size_t>(i) % normal_skel.size()]);
    }
    for (int i = 0; i < spec.n_anomaly_templates; ++i) {
        anomaly_templates.push_back("fault" + std::to_string(i) + " " +
                                    anomaly_skel[static_cast<size_t>(i) % anomaly_skel.size()]);
    }

    int64_t total = spec.n_lines + spec.n_anomalies;
    Rng rng(spec.seed);
    std::vector<char> is_anomaly(static_cast<size_t>(total), 0);
    {
        Rng pos_rng = Rng::stream(spec.seed, 0xA0);
        auto positions =
            pos_rng.sample_indices(static_cast<size_t>(total), static_cast<size_t>(spec.n_anomalies));
        for (size_t p : positions) is_anomaly[p] = 1;
    }

    SynthResult result;
    result.lines.reserve(static_cast<size_t>(total));
    result.file_lines.reserve(static_cast<size_t>(total));
    nlohmann::json manifest_lines = nlohmann::json::array();

    int64_t ts = 1321000000;
    for (int64_t i = 0; i < total; ++i) {
        ts += 1 + static_cast<int64_t>(rng.next_below(3));
        RawLogLine line;
        line.line_no = i + 1;
        line.timestamp = ts;
        int template_id;
        if (is_anomaly[static_cast<size_t>(i)]) {
            template_id = static_cast<int>(rng.next_below(anomaly_templates.size()));
            line.label = Label::Anomaly;
            line.text = detail::synth_fill(anomaly_templates[static_cast<size_t>(template_id)],
                                           rng, words);
        } else {
            template_id = static_cast<int>(rng.next_below(normal_templates.size()));
            line.label = Label::Normal;
            line.text = detail::synth_fill(normal_templates[static_cast<size_t>(template_id)],
                                           rng, words);
        }

        // bgl profile layout: label + 8 metadata fields + message.
        std::string tag = line.label == Label::Anomaly
                              ? "FAULT" + std::to_string(template_id)
                              : "-";
        std::string row = tag + " " + std::to_string(ts) + " 2011.11.11 node-" +
                          std::to_string(i % 64) + " 2011-11-11-00.00.00." +
                          std::to_string(i % 1000000) + " node-" + std::to_string(i % 64) +
                          " RAS APP INFO " + line.text;
        result.file_lines.push_back(std::move(row));

        manifest_lines.push_back({{"line_no", line.line_no},
                                  {"label", label_name(line.label)},
                                  {"template", template_id}});
        result.lines.push_back(std::move(line));
    }

    result.manifest = {{"version", 1},
                       {"n_templates", spec.n_templates},
                       {"n_anomaly_templates", spec.n_anomaly_templates},
                       {"n_lines", spec.n_lines},
                       {"n_anomalies", spec.n_anomalies},
                       {"seed", spec.seed},
                       {"lines", std::move(manifest_lines)}};
    return result;
}

// --- manifests -----------------------------------------------------------------

inline nlohmann::json split_manifest(const Split& s, const SplitSpec& spec) {
    nlohmann::json j;
    j["version"] = 1;
    j["mode"] = spec.mode == SplitSpec::Mode::Random ? "random" : "chronological";
    j["train_fraction"] = spec.train_fraction;
    if (spec.mode == SplitSpec::Mode::Random) j["seed"] = spec.seed;
    auto nos = [](const std::vector<RawLogLine>& v) {
        std::vector<int64_t> out;
        out.reserve(v.size());
        for (const auto& l : v) out.push_back(l.line_no);
        return out;
    };
    j["train"] = nos(s.train);
    j["test"] = nos(s.test);
    return j;
}

inline nlohmann::json group_manifest(const std::vector<LogSequence>& seqs,
                                     const WindowSpec& window) {
    nlohmann::json j;
    j["version"] = 1;
    j["window"] = {{"kind", window.kind == WindowSpec::Kind::Count ? "count" : "minutes"},
                   {"size", window.size}};
    j["sequences"] = nlohmann::json::array();
    for (const auto& s : seqs) {
        j["sequences"].push_back({{"label", label_name(s.label)}, {"line_nos", s.line_nos}});
    }
    return j;
}

}  // namespace rtdlog
