// Anomaly scoring and evaluation.
//
// A line's anomaly score is the mean per-token discriminator surprise on the
// uncorrupted sequence: with head output d = P(token is original), the score
// is -(1/N) sum log d_i, equivalently -(1/N) sum log(1 - p_replaced_i). It is
// zero when every token looks original and grows without bound as tokens look
// replaced (sign convention pinned in electra.hpp). Thresholds come from F1
// maximization; predictions use strict "score > threshold".

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <unordered_map>
#include <vector>

#include "json.hpp"
#include "rtdlog/common.hpp"
#include "rtdlog/corpus.hpp"
#include "rtdlog/electra.hpp"
#include "rtdlog/normalize.hpp"
#include "rtdlog/tokenizer.hpp"

namespace rtdlog {

struct AnomalyScore {
    double value = 0.0;
    int64_t line_no = -1;
    int n_tokens = 0;
    bool empty_input = false;  // line vanished in normalization; scored as [UNK]
};

struct ScoredLine {
    AnomalyScore score;
    Label label = Label::Normal;
};

// Mean surprise over the non-pad positions of an already-encoded sequence.
template <typename Scalar>
double score_sequence(const ModelBundle<Scalar>& bundle, const std::vector<int32_t>& ids,
                      const PaddingMask& mask) {
    auto pass = discriminator_forward(bundle, ids, mask);
    double sum = 0.0;
    int64_t n = 0;
    for (size_t i = 0; i < ids.size(); ++i) {
        if (mask.pad(i)) continue;
        sum -= std::log(static_cast<double>(pass.d(static_cast<Eigen::Index>(i))));
        ++n;
    }
    return sum / static_cast<double>(n);
}

// Full path for one raw line: normalize, encode, score. No masking or
// corruption happens at inference. A line that normalizes to nothing is
// scored over a single [UNK] and flagged.
template <typename Scalar>
AnomalyScore score_line(const ModelBundle<Scalar>& bundle, const Normalizer& normalizer,
                        const Vocabulary& vocab, std::string_view raw_text,
                        int64_t line_no = -1, size_t max_len = 128) {
    NormalizedMessage norm = normalizer.normalize(raw_text, line_no);
    TokenSequence seq = encode(norm, vocab, max_len);
    AnomalyScore out;
    out.line_no = line_no;
    if (seq.empty()) {
        seq.ids.push_back(vocab.unk_id());
        out.empty_input = true;
    }
    out.n_tokens = static_cast<int>(seq.size());
    out.value = score_sequence(bundle, seq.ids, PaddingMask::none(seq.size()));
    return out;
}

// --- threshold selection -----------------------------------------------------

struct ThresholdReport {
    double threshold = 0.0;  // +-infinity possible at the sentinels
    double f1 = 0.0;
    double precision = 0.0;
    double recall = 0.0;
    double specificity = 0.0;
    int64_t candidate_count = 0;
};

struct MetricsReport {
    int64_t tp = 0, fp = 0, fn = 0, tn = 0;
    double precision = 0.0, recall = 0.0, specificity = 0.0, f1 = 0.0;
    std::vector<std::string> degenerate;  // metrics reported as 0 on a 0/0
    std::string level;                    // "line" or "sequence"
};

namespace detail {

struct Rates {
    double precision, recall, specificity, f1;
    std::vector<std::string> degenerate;
};

inline Rates rates_from_counts(int64_t tp, int64_t fp, int64_t fn, int64_t tn) {
    Rates r{0, 0, 0, 0, {}};
    if (tp + fp > 0)
        r.precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
    else
        r.degenerate.push_back("precision");
    if (tp + fn > 0)
        r.recall = static_cast<double>(tp) / static_cast<double>(tp + fn);
    else
        r.degenerate.push_back("recall");
    if (tn + fp > 0)
        r.specificity = static_cast<double>(tn) / static_cast<double>(tn + fp);
    else
        r.degenerate.push_back("specificity");
    if (r.precision + r.recall > 0)
        r.f1 = 2.0 * r.precision * r.recall / (r.precision + r.recall);
    else
        r.degenerate.push_back("f1");
    return r;
}

}  // namespace detail

// F1-maximizing threshold. Candidates are +-infinity plus the midpoints
// between consecutive distinct scores; ties in F1 resolve toward the higher
// threshold (fewer predicted positives).
inline ThresholdReport pick_threshold(const std::vector<ScoredLine>& scored) {
    int64_t total_pos = 0, total_neg = 0;
    for (const auto& s : scored) (s.label == Label::Anomaly ? total_pos : total_neg) += 1;
    if (total_pos == 0 || total_neg == 0)
        throw DataError("pick_threshold: need at least one anomaly and one normal line");

    std::vector<std::pair<double, Label>> by_score;
    by_score.reserve(scored.size());
    for (const auto& s : scored) by_score.push_back({s.score.value, s.label});
    std::sort(by_score.begin(), by_score.end(),
              [](const auto& a, const auto& b) { return a.first > b.first; });

    ThresholdReport best;
    best.f1 = -1.0;
    int64_t tp = 0, fp = 0;
    size_t i = 0;
    int64_t candidates = 0;
    // Walk thresholds from +infinity down; after consuming each distinct
    // score group, everything above the candidate is predicted positive.
    while (true) {
        double threshold;
        if (i == 0) {
            threshold = std::numeric_limits<double>::infinity();
        } else if (i == by_score.size()) {
            threshold = -std::numeric_limits<double>::infinity();
        } else {
            threshold = 0.5 * (by_score[i - 1].first + by_score[i].first);
        }
        ++candidates;
        int64_t fn = total_pos - tp;
        int64_t tn = total_neg - fp;
        auto r = detail::rates_from_counts(tp, fp, fn, tn);
        if (r.f1 > best.f1) {
            best.threshold = threshold;
            best.f1 = r.f1;
            best.precision = r.precision;
            best.recall = r.recall;
            best.specificity = r.specificity;
        }
        if (i == by_score.size()) break;
        double group = by_score[i].first;
        while (i < by_score.size() && by_score[i].first == group) {
            (by_score[i].second == Label::Anomaly ? tp : fp) += 1;
            ++i;
        }
    }
    best.candidate_count = candidates;
    return best;
}

// --- metrics -------------------------------------------------------------------

inline MetricsReport evaluate_lines(const std::vector<ScoredLine>& scored, double threshold) {
    MetricsReport m;
    m.level = "line";
    for (const auto& s : scored) {
        bool predicted = s.score.value > threshold;
        bool actual = s.label == Label::Anomaly;
        if (predicted && actual)
            ++m.tp;
        else if (predicted && !actual)
            ++m.fp;
        else if (!predicted && actual)
            ++m.fn;
        else
            ++m.tn;
    }
    auto r = detail::rates_from_counts(m.tp, m.fp, m.fn, m.tn);
    m.precision = r.precision;
    m.recall = r.recall;
    m.specificity = r.specificity;
    m.f1 = r.f1;
    m.degenerate = std::move(r.degenerate);
    return m;
}

// A sequence is predicted anomalous iff any member line's score exceeds the
// threshold; ground truth comes from the sequence labels.
inline MetricsReport evaluate_sequences(const std::vector<ScoredLine>& scored,
                                        const std::vector<LogSequence>& sequences,
                                        double threshold) {
    std::unordered_map<int64_t, double> score_by_line;
    score_by_line.reserve(scored.size());
    for (const auto& s : scored) score_by_line[s.score.line_no] = s.score.value;

    MetricsReport m;
    m.level = "sequence";
    for (const auto& seq : sequences) {
        bool predicted = false;
        for (int64_t line_no : seq.line_nos) {
            auto it = score_by_line.find(line_no);
            if (it == score_by_line.end())
                throw DataError("evaluate_sequences: no score for line " +
                                std::to_string(line_no));
            if (it->second > threshold) predicted = true;
        }
        bool actual = seq.label == Label::Anomaly;
        if (predicted && actual)
            ++m.tp;
        else if (predicted && !actual)
            ++m.fp;
        else if (!predicted && actual)
            ++m.fn;
        else
            ++m.tn;
    }
    auto r = detail::rates_from_counts(m.tp, m.fp, m.fn, m.tn);
    m.precision = r.precision;
    m.recall = r.recall;
    m.specificity = r.specificity;
    m.f1 = r.f1;
    m.degenerate = std::move(r.degenerate);
    return m;
}

// Rank-based AUROC with tied scores handled by average ranks.
inline double auroc(const std::vector<ScoredLine>& scored) {
    std::vector<std::pair<double, Label>> v;
    v.reserve(scored.size());
    int64_t pos = 0, neg = 0;
    for (const auto& s : scored) {
        v.push_back({s.score.value, s.label});
        (s.label == Label::Anomaly ? pos : neg) += 1;
    }
    if (pos == 0 || neg == 0) throw DataError("auroc: need both classes");
    std::sort(v.begin(), v.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    double rank_sum_pos = 0.0;
    size_t i = 0;
    while (i < v.size()) {
        size_t j = i;
        while (j < v.size() && v[j].first == v[i].first) ++j;
        double avg_rank = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j));
        for (size_t k = i; k < j; ++k) {
            if (v[k].second == Label::Anomaly) rank_sum_pos += avg_rank;
        }
        i = j;
    }
    double p = static_cast<double>(pos), n = static_cast<double>(neg);
    return (rank_sum_pos - p * (p + 1.0) / 2.0) / (p * n);
}

// --- serialization ----------------------------------------------------------------

inline nlohmann::json threshold_report_to_json(const ThresholdReport& t) {
    nlohmann::json j;
    if (std::isfinite(t.threshold))
        j["threshold"] = t.threshold;
    else
        j["threshold"] = t.threshold > 0 ? "inf" : "-inf";
    j["f1"] = t.f1;
    j["precision"] = t.precision;
    j["recall"] = t.recall;
    j["specificity"] = t.specificity;
    j["candidate_count"] = t.candidate_count;
    return j;
}

inline nlohmann::json metrics_report_to_json(const MetricsReport& m) {
    return {{"level", m.level},
            {"tp", m.tp},
            {"fp", m.fp},
            {"fn", m.fn},
            {"tn", m.tn},
            {"precision", m.precision},
            {"recall", m.recall},
            {"specificity", m.specificity},
            {"f1", m.f1},
            {"degenerate", m.degenerate}};
}

}  // namespace rtdlog
