// rtdlog command line: train a replaced-token-detection model on normal logs
// and score log lines as point anomalies.
//
// Subcommands: synth, train-tokenizer, train, score, evaluate.
// Exit codes: 0 ok, 2 usage error, 3 data error, 4 numeric failure.

#include <filesystem>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "rtdlog/checkpoint.hpp"
#include "rtdlog/corpus.hpp"
#include "rtdlog/detector.hpp"
#include "rtdlog/electra.hpp"
#include "rtdlog/normalize.hpp"
#include "rtdlog/tokenizer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace rtdlog;

namespace {

// --- JSON config files: same keys as the long option names; command-line
// flags override config values. Every run writes its resolved config in this
// format, so a run directory can be replayed with --config.
class JsonConfig : public CLI::Config {
public:
    std::string to_config(const CLI::App* app, bool default_also, bool, std::string) const override {
        json j = json::object();
        for (const CLI::Option* opt : app->get_options({})) {
            if (opt->get_lnames().empty() || !opt->get_configurable()) continue;
            std::string name = opt->get_lnames()[0];
            if (!opt->results().empty()) {
                j[name] = opt->results().size() == 1 ? json(opt->results()[0])
                                                     : json(opt->results());
            } else if (default_also && !opt->get_default_str().empty()) {
                j[name] = opt->get_default_str();
            }
        }
        return j.dump(2) + "\n";
    }

    std::vector<CLI::ConfigItem> from_config(std::istream& input) const override {
        json j = json::parse(input);
        std::vector<CLI::ConfigItem> items;
        for (auto& [key, value] : j.items()) {
            CLI::ConfigItem item;
            item.name = key;
            if (value.is_string())
                item.inputs.push_back(value.get<std::string>());
            else
                item.inputs.push_back(value.dump());
            items.push_back(std::move(item));
        }
        return items;
    }
};

SplitSpec parse_split(const std::string& s, double train_fraction) {
    SplitSpec spec;
    spec.train_fraction = train_fraction;
    if (s == "chrono" || s == "chronological") {
        spec.mode = SplitSpec::Mode::Chronological;
    } else if (s.rfind("random:", 0) == 0) {
        spec.mode = SplitSpec::Mode::Random;
        spec.seed = std::stoull(s.substr(7));
    } else if (s == "random") {
        spec.mode = SplitSpec::Mode::Random;
        spec.seed = 0;
    } else {
        throw UsageError("bad --split value '" + s + "' (use random:SEED or chrono)");
    }
    return spec;
}

WindowSpec parse_group(const std::string& s) {
    WindowSpec w;
    if (s.rfind("count:", 0) == 0) {
        w.kind = WindowSpec::Kind::Count;
        w.size = std::stoll(s.substr(6));
    } else if (s.rfind("minutes:", 0) == 0) {
        w.kind = WindowSpec::Kind::Minutes;
        w.size = std::stoll(s.substr(8));
    } else {
        throw UsageError("bad --group value '" + s + "' (use count:K or minutes:W)");
    }
    return w;
}

std::string split_name(const SplitSpec& s) {
    return s.mode == SplitSpec::Mode::Chronological
               ? "chronological"
               : "random:" + std::to_string(s.seed);
}

std::string group_name(const WindowSpec& w) {
    return (w.kind == WindowSpec::Kind::Count ? "count:" : "minutes:") + std::to_string(w.size);
}

void ensure_out_dir(const std::string& out) {
    if (out.empty()) throw UsageError("--out directory is required");
    fs::create_directories(out);
}

void write_run_config(const CLI::App* sub, const std::string& out_dir) {
    JsonConfig fmt;
    write_text_file((fs::path(out_dir) / "run_config.json").string(),
                    fmt.to_config(sub, true, false, ""));
}

// --- scored-lines CSV ---------------------------------------------------------

constexpr const char* kScoresHeader = "line_no,score,label,n_tokens,flag";

std::string scored_csv(const std::vector<ScoredLine>& rows, bool with_labels) {
    std::string out = kScoresHeader;
    out += '\n';
    for (const auto& r : rows) {
        out += std::to_string(r.score.line_no);
        out += ',';
        out += format_double(r.score.value);
        out += ',';
        if (with_labels) out += label_name(r.label);
        out += ',';
        out += std::to_string(r.score.n_tokens);
        out += ',';
        if (r.score.empty_input) out += "empty_input";
        out += '\n';
    }
    return out;
}

std::vector<ScoredLine> parse_scored_csv(const std::string& text) {
    std::vector<ScoredLine> rows;
    size_t pos = 0;
    bool header = true;
    while (pos < text.size()) {
        size_t end = text.find('\n', pos);
        if (end == std::string::npos) end = text.size();
        std::string_view line(text.data() + pos, end - pos);
        pos = end + 1;
        if (line.empty()) continue;
        if (header) {
            if (line != kScoresHeader)
                throw DataError("scores csv: unexpected header '" + std::string(line) + "'");
            header = false;
            continue;
        }
        std::vector<std::string> fields;
        size_t fpos = 0;
        while (true) {
            size_t comma = line.find(',', fpos);
            if (comma == std::string_view::npos) {
                fields.emplace_back(line.substr(fpos));
                break;
            }
            fields.emplace_back(line.substr(fpos, comma - fpos));
            fpos = comma + 1;
        }
        if (fields.size() != 5) throw DataError("scores csv: malformed row");
        ScoredLine r;
        r.score.line_no = std::stoll(fields[0]);
        r.score.value = std::stod(fields[1]);
        if (fields[2] == "normal")
            r.label = Label::Normal;
        else if (fields[2] == "anomaly")
            r.label = Label::Anomaly;
        else
            throw DataError("scores csv: row without a label cannot be evaluated");
        r.score.n_tokens = std::stoi(fields[3]);
        r.score.empty_input = fields[4] == "empty_input";
        rows.push_back(r);
    }
    return rows;
}

// --- shared pipeline pieces ------------------------------------------------------

Normalizer load_normalizer(const std::string& path) {
    if (path.empty()) return Normalizer(default_normalizer_config());
    return Normalizer(normalizer_config_from_json(json::parse(read_text_file(path))));
}

struct BundleFiles {
    ModelBundle<float> bundle;
    CheckpointInfo info;
    std::unique_ptr<Normalizer> normalizer;
    Vocabulary vocab;
};

BundleFiles load_bundle_files(const std::string& checkpoint_path) {
    BundleFiles out{.bundle = {}, .info = {}, .normalizer = nullptr, .vocab = {}};
    auto loaded = load_checkpoint(checkpoint_path);
    out.bundle = std::move(loaded.bundle);
    out.info = std::move(loaded.info);
    fs::path dir = fs::path(checkpoint_path).parent_path();
    out.vocab = load_vocabulary((dir / out.info.vocab_ref).string());
    out.normalizer = std::make_unique<Normalizer>(
        normalizer_config_from_json(json::parse(read_text_file((dir / out.info.normalizer_ref).string()))));
    if (out.vocab.size() != out.bundle.vocab_size())
        throw DataError("checkpoint: vocabulary size does not match model");
    return out;
}

std::vector<ScoredLine> score_dataset_lines(const BundleFiles& bf,
                                            const std::vector<RawLogLine>& lines,
                                            size_t max_len) {
    std::vector<ScoredLine> out;
    out.reserve(lines.size());
    for (const auto& l : lines) {
        ScoredLine r;
        r.score = score_line(bf.bundle, *bf.normalizer, bf.vocab, l.text, l.line_no, max_len);
        r.label = l.label;
        out.push_back(r);
    }
    return out;
}

void print_metrics_table(const MetricsReport& line_level, const MetricsReport& seq_level,
                         const std::string& grouping, const std::string& split) {
    auto row = [](const std::string& name, const MetricsReport& m) {
        char buf[160];
        std::snprintf(buf, sizeof(buf), "%-10s %7.3f %7.3f %7.3f %7.3f", name.c_str(),
                      m.precision, m.recall, m.specificity, m.f1);
        return std::string(buf);
    };
    std::cout << "grouping=" << grouping << " split=" << split << "\n";
    std::cout << "level         Prec     Rec    Spec      F1\n";
    std::cout << row("line", line_level) << "\n";
    std::cout << row("sequence", seq_level) << "\n";
}

// --- subcommand options -----------------------------------------------------------

struct SynthArgs {
    int templates = 20;
    int anomaly_templates = 6;
    int64_t lines = 5000;
    int64_t anomalies = 200;
    uint64_t seed = 1;
    std::string out;
};

struct TrainTokArgs {
    std::string dataset, profile = "bgl", split = "random:1", normalizer, out;
    double train_fraction = 0.8;
    int vocab_size = 8192;
};

struct TrainArgs {
    std::string dataset, profile = "bgl", split = "random:1", vocab, normalizer, out;
    std::string preset = "desk";
    double train_fraction = 0.8;
    double lambda = 50.0;
    double mask_prob = 0.15;
    int batch_size = 32;
    double learning_rate = 3e-4;
    double weight_decay = 0.01;
    int epochs = 4;
    uint64_t seed = 1;
    int max_len = 128;
};

struct ScoreArgs {
    std::string checkpoint, input = "-", profile = "raw", out;
};

struct EvalArgs {
    std::string checkpoint, dataset, scores, profile = "bgl", split = "random:1";
    std::string group = "count:100", threshold = "auto", out;
    double train_fraction = 0.8;
    double holdout = 0.0;
};

// --- subcommand bodies --------------------------------------------------------------

int run_synth(const SynthArgs& a, const CLI::App* sub) {
    SynthSpec spec;
    spec.n_templates = a.templates;
    spec.n_anomaly_templates = a.anomaly_templates;
    spec.n_lines = a.lines;
    spec.n_anomalies = a.anomalies;
    spec.seed = a.seed;
    SynthResult result = synthesize(spec);
    ensure_out_dir(a.out);
    std::string body;
    for (const auto& l : result.file_lines) {
        body += l;
        body += '\n';
    }
    write_text_file((fs::path(a.out) / "corpus.log").string(), body);
    write_text_file((fs::path(a.out) / "manifest.json").string(),
                    result.manifest.dump(2) + "\n");
    write_run_config(sub, a.out);
    std::cout << "wrote " << result.lines.size() << " lines (" << spec.n_anomalies
              << " anomalies) to " << a.out << "/corpus.log\n";
    return 0;
}

int run_train_tokenizer(const TrainTokArgs& a, const CLI::App* sub) {
    if (a.dataset.empty()) throw UsageError("--dataset is required");
    if (!fs::exists(a.dataset)) throw UsageError("dataset not found: " + a.dataset);
    auto profile = dataset_profile(a.profile);
    auto loaded = load_dataset(a.dataset, profile);
    if (loaded.lines.empty()) throw DataError("dataset is empty: " + a.dataset);
    auto sp = split(loaded.lines, parse_split(a.split, a.train_fraction));

    Normalizer normalizer = load_normalizer(a.normalizer);
    std::vector<NormalizedMessage> msgs;
    for (const auto& l : sp.train) {
        if (l.label != Label::Normal) continue;
        msgs.push_back(normalizer.normalize(l.text, l.line_no));
    }
    if (msgs.empty()) throw DataError("no normal lines in the training split");

    Vocabulary vocab = train_vocab(msgs, a.vocab_size, normalizer.placeholders());
    ensure_out_dir(a.out);
    save_vocabulary(vocab, (fs::path(a.out) / "vocab.txt").string());
    write_text_file((fs::path(a.out) / "normalizer.json").string(),
                    normalizer_config_to_json(normalizer.config()).dump(2) + "\n");
    write_run_config(sub, a.out);
    std::cout << "vocabulary: " << vocab.size() << " tokens from " << msgs.size()
              << " normal lines (skipped " << loaded.skipped.size() << " malformed)\n";
    return 0;
}

int run_train(const TrainArgs& a, const CLI::App* sub) {
    if (a.dataset.empty()) throw UsageError("--dataset is required");
    if (!fs::exists(a.dataset)) throw UsageError("dataset not found: " + a.dataset);
    if (a.vocab.empty()) throw UsageError("--vocab is required (run train-tokenizer first)");
    Vocabulary vocab = load_vocabulary(a.vocab);
    Normalizer normalizer = load_normalizer(a.normalizer);

    TrainingConfig cfg = a.preset == "paper-scale"
                             ? paper_scale_training_config(vocab.size())
                             : desk_training_config(vocab.size());
    if (a.preset != "desk" && a.preset != "paper-scale")
        throw UsageError("--preset must be desk or paper-scale");
    cfg.lambda = a.lambda;
    cfg.mask_prob = a.mask_prob;
    cfg.batch_size = a.batch_size;
    cfg.learning_rate = a.learning_rate;
    cfg.weight_decay = a.weight_decay;
    cfg.epochs = a.epochs;
    cfg.seed = a.seed;
    cfg.max_len = a.max_len;
    cfg.generator.max_len = a.max_len;
    cfg.discriminator.max_len = a.max_len;
    cfg.validate();

    auto profile = dataset_profile(a.profile);
    auto loaded = load_dataset(a.dataset, profile);
    if (loaded.lines.empty()) throw DataError("dataset is empty: " + a.dataset);
    auto sp = split(loaded.lines, parse_split(a.split, a.train_fraction));

    std::vector<TokenSequence> seqs;
    for (const auto& l : sp.train) {
        if (l.label != Label::Normal) continue;
        seqs.push_back(encode(normalizer.normalize(l.text, l.line_no), vocab,
                              static_cast<size_t>(a.max_len)));
    }
    if (seqs.empty()) throw DataError("no normal lines in the training split");

    ensure_out_dir(a.out);
    ModelBundle<float> bundle = init_bundle<float>(cfg, cfg.seed);
    std::vector<TrainStepRecord> history;
    std::string abort_message;
    try {
        history = train(bundle, seqs, cfg, vocab);
    } catch (const NumericError& e) {
        abort_message = e.what();  // bundle still holds the last finite state
    }

    save_vocabulary(vocab, (fs::path(a.out) / "vocab.txt").string());
    write_text_file((fs::path(a.out) / "normalizer.json").string(),
                    normalizer_config_to_json(normalizer.config()).dump(2) + "\n");
    CheckpointInfo info;
    info.config = cfg;
    info.steps = static_cast<int64_t>(history.size());
    info.vocab_ref = "vocab.txt";
    info.normalizer_ref = "normalizer.json";
    save_checkpoint((fs::path(a.out) / "checkpoint.json").string(), bundle, info);

    std::string csv = "step,L_g,L_d,joint\n";
    for (const auto& r : history) {
        csv += std::to_string(r.step);
        csv += ',';
        csv += format_double(r.lg);
        csv += ',';
        csv += format_double(r.ld);
        csv += ',';
        csv += format_double(r.joint(cfg.lambda));
        csv += '\n';
    }
    write_text_file((fs::path(a.out) / "losses.csv").string(), csv);
    write_run_config(sub, a.out);

    if (!abort_message.empty()) {
        std::cerr << "training aborted: " << abort_message << "\n"
                  << "last finite checkpoint written to " << a.out << "\n";
        return 4;
    }
    std::cout << "trained " << seqs.size() << " normal lines for " << history.size()
              << " steps; checkpoint written to " << a.out << "\n";
    if (!history.empty()) {
        std::cout << "final L_g=" << format_double(history.back().lg)
                  << " L_d=" << format_double(history.back().ld) << "\n";
    }
    return 0;
}

int run_score(const ScoreArgs& a, const CLI::App* sub) {
    if (a.checkpoint.empty()) throw UsageError("--checkpoint is required");
    BundleFiles bf = load_bundle_files(a.checkpoint);
    size_t max_len = static_cast<size_t>(bf.info.config.max_len);

    std::vector<ScoredLine> rows;
    bool labeled = a.profile != "raw";
    auto profile = dataset_profile(a.profile);
    auto handle_line = [&](const std::string& text, int64_t line_no) {
        ScoredLine r;
        if (labeled) {
            RawLogLine parsed;
            std::string reason;
            if (!parse_dataset_line(text, profile, line_no, parsed, reason)) return;
            r.score =
                score_line(bf.bundle, *bf.normalizer, bf.vocab, parsed.text, line_no, max_len);
            r.label = parsed.label;
        } else {
            r.score = score_line(bf.bundle, *bf.normalizer, bf.vocab, text, line_no, max_len);
        }
        rows.push_back(r);
    };

    int64_t line_no = 0;
    std::string line;
    if (a.input == "-") {
        while (std::getline(std::cin, line)) handle_line(line, ++line_no);
    } else {
        if (!fs::exists(a.input)) throw UsageError("input not found: " + a.input);
        std::ifstream f(a.input, std::ios::binary);
        while (std::getline(f, line)) {
            if (!line.empty() && line.back() == '\r') line.pop_back();
            handle_line(line, ++line_no);
        }
    }

    std::string csv = scored_csv(rows, labeled);
    if (a.out.empty()) {
        std::cout << csv;
    } else {
        ensure_out_dir(a.out);
        write_text_file((fs::path(a.out) / "scores.csv").string(), csv);
        write_run_config(sub, a.out);
        std::cout << "scored " << rows.size() << " lines to " << a.out << "/scores.csv\n";
    }
    return 0;
}

int run_evaluate(const EvalArgs& a, const CLI::App* sub) {
    WindowSpec window = parse_group(a.group);
    bool auto_threshold = a.threshold == "auto";
    double fixed_threshold = 0.0;
    if (!auto_threshold) {
        try {
            fixed_threshold = std::stod(a.threshold);
        } catch (const std::exception&) {
            throw UsageError("--threshold must be 'auto' or a number");
        }
    }

    json report;
    report["version"] = 1;
    report["grouping"] = {{"kind", window.kind == WindowSpec::Kind::Count ? "count" : "minutes"},
                          {"size", window.size}};

    std::vector<ScoredLine> scored;
    std::vector<LogSequence> sequences;
    std::string out_split_manifest, out_group_manifest;

    if (!a.scores.empty()) {
        // Pre-scored CSV: sequence evaluation groups rows in file order, so
        // only count windows are available here.
        if (window.kind == WindowSpec::Kind::Minutes)
            throw UsageError("minutes grouping needs --dataset (timestamps); csv mode has none");
        scored = parse_scored_csv(read_text_file(a.scores));
        report["split"] = {{"mode", "precomputed"}};
        std::vector<RawLogLine> pseudo;
        pseudo.reserve(scored.size());
        for (const auto& r : scored) {
            RawLogLine l;
            l.line_no = r.score.line_no;
            l.label = r.label;
            pseudo.push_back(l);
        }
        sequences = group(pseudo, window);
    } else {
        if (a.checkpoint.empty() || a.dataset.empty())
            throw UsageError("evaluate needs --checkpoint and --dataset (or --scores CSV)");
        if (!fs::exists(a.dataset)) throw UsageError("dataset not found: " + a.dataset);
        BundleFiles bf = load_bundle_files(a.checkpoint);
        auto profile = dataset_profile(a.profile);
        auto loaded = load_dataset(a.dataset, profile);
        if (loaded.lines.empty()) throw DataError("dataset is empty: " + a.dataset);
        SplitSpec split_spec = parse_split(a.split, a.train_fraction);
        auto sp = split(loaded.lines, split_spec);

        scored = score_dataset_lines(bf, sp.test, static_cast<size_t>(bf.info.config.max_len));
        sequences = group(sp.test, window);

        report["split"] = {{"mode", split_name(split_spec)},
                           {"train_fraction", split_spec.train_fraction},
                           {"train_lines", sp.train.size()},
                           {"test_lines", sp.test.size()}};
        if (split_spec.mode == SplitSpec::Mode::Chronological) {
            int64_t max_train = 0, min_test = 0;
            for (const auto& l : sp.train) max_train = std::max(max_train, l.line_no);
            min_test = sp.test.empty() ? 0 : sp.test.front().line_no;
            for (const auto& l : sp.test) min_test = std::min(min_test, l.line_no);
            bool ok = sp.test.empty() || max_train < min_test;
            if (!ok) throw DataError("chronological split violated file order");
            report["split"]["chronological_check"] = {
                {"max_train_line_no", max_train}, {"min_test_line_no", min_test}, {"ok", ok}};
        }
        out_split_manifest = split_manifest(sp, split_spec).dump(2) + "\n";
        out_group_manifest = group_manifest(sequences, window).dump(2) + "\n";
    }

    // Optional holdout: pick the threshold on a leading fraction of the test
    // rows and report metrics on the remainder. Default (0) follows the
    // evaluation protocol of selecting the threshold on the full test side.
    std::vector<ScoredLine> thr_rows = scored, eval_rows = scored;
    std::vector<LogSequence> eval_sequences = sequences;
    if (a.holdout > 0.0) {
        if (a.holdout >= 1.0) throw UsageError("--holdout must be in [0,1)");
        size_t n_hold = static_cast<size_t>(std::floor(a.holdout * scored.size()));
        thr_rows.assign(scored.begin(), scored.begin() + static_cast<ptrdiff_t>(n_hold));
        eval_rows.assign(scored.begin() + static_cast<ptrdiff_t>(n_hold), scored.end());
        std::vector<RawLogLine> pseudo;
        for (const auto& r : eval_rows) {
            RawLogLine l;
            l.line_no = r.score.line_no;
            l.label = r.label;
            pseudo.push_back(l);
        }
        eval_sequences = group(pseudo, window);
        report["holdout"] = {{"fraction", a.holdout}, {"threshold_rows", thr_rows.size()}};
    }

    double threshold = fixed_threshold;
    if (auto_threshold) {
        ThresholdReport tr = pick_threshold(thr_rows);
        threshold = tr.threshold;
        report["threshold"] = threshold_report_to_json(tr);
        report["threshold"]["mode"] = a.holdout > 0.0 ? "f1max-holdout" : "f1max";
    } else {
        report["threshold"] = {{"threshold", threshold}, {"mode", "fixed"}};
    }

    MetricsReport line_level = evaluate_lines(eval_rows, threshold);
    MetricsReport seq_level = evaluate_sequences(eval_rows, eval_sequences, threshold);
    report["line_level"] = metrics_report_to_json(line_level);
    report["sequence_level"] = metrics_report_to_json(seq_level);
    int64_t seq_anom = 0;
    for (const auto& s : eval_sequences)
        if (s.label == Label::Anomaly) ++seq_anom;
    report["sequence_counts"] = {{"total", eval_sequences.size()}, {"anomalous", seq_anom}};

    std::string split_desc =
        report["split"].contains("mode") ? report["split"]["mode"].get<std::string>() : "?";
    print_metrics_table(line_level, seq_level, group_name(window), split_desc);

    if (!a.out.empty()) {
        ensure_out_dir(a.out);
        write_text_file((fs::path(a.out) / "report.json").string(), report.dump(2) + "\n");
        write_text_file((fs::path(a.out) / "scores.csv").string(), scored_csv(scored, true));
        if (!out_split_manifest.empty())
            write_text_file((fs::path(a.out) / "split_manifest.json").string(),
                            out_split_manifest);
        if (!out_group_manifest.empty())
            write_text_file((fs::path(a.out) / "group_manifest.json").string(),
                            out_group_manifest);
        write_run_config(sub, a.out);
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"rtdlog: self-supervised log anomaly detection via replaced token detection"};
    app.require_subcommand(1);

    auto add_config = [](CLI::App* sub) {
        sub->set_config("--config")->configurable(false);
        sub->config_formatter(std::make_shared<JsonConfig>());
    };

    SynthArgs synth_args;
    CLI::App* synth_cmd = app.add_subcommand("synth", "generate a labeled synthetic corpus");
    synth_cmd->add_option("--templates", synth_args.templates, "normal template count");
    synth_cmd->add_option("--anomaly-templates", synth_args.anomaly_templates,
                          "anomaly template count");
    synth_cmd->add_option("--lines", synth_args.lines, "normal line count");
    synth_cmd->add_option("--anomalies", synth_args.anomalies, "anomalous line count");
    synth_cmd->add_option("--seed", synth_args.seed, "generation seed");
    synth_cmd->add_option("--out", synth_args.out, "output directory")->required();
    add_config(synth_cmd);

    TrainTokArgs tok_args;
    CLI::App* tok_cmd = app.add_subcommand("train-tokenizer", "induce a subword vocabulary");
    tok_cmd->add_option("--dataset", tok_args.dataset, "labeled log file");
    tok_cmd->add_option("--profile", tok_args.profile, "dataset profile (bgl|spirit|thunderbird)");
    tok_cmd->add_option("--split", tok_args.split, "random:SEED or chrono");
    tok_cmd->add_option("--train-fraction", tok_args.train_fraction, "train share of the split");
    tok_cmd->add_option("--vocab-size", tok_args.vocab_size, "target vocabulary size");
    tok_cmd->add_option("--normalizer", tok_args.normalizer, "normalizer config json");
    tok_cmd->add_option("--out", tok_args.out, "output directory")->required();
    add_config(tok_cmd);

    TrainArgs train_args;
    CLI::App* train_cmd = app.add_subcommand("train", "train generator and discriminator");
    train_cmd->add_option("--dataset", train_args.dataset, "labeled log file");
    train_cmd->add_option("--profile", train_args.profile, "dataset profile");
    train_cmd->add_option("--split", train_args.split, "random:SEED or chrono");
    train_cmd->add_option("--train-fraction", train_args.train_fraction, "train share");
    train_cmd->add_option("--vocab", train_args.vocab, "vocab.txt from train-tokenizer");
    train_cmd->add_option("--normalizer", train_args.normalizer, "normalizer config json");
    train_cmd->add_option("--preset", train_args.preset, "desk or paper-scale");
    train_cmd->add_option("--lambda", train_args.lambda, "detection loss weight");
    train_cmd->add_option("--mask-prob", train_args.mask_prob, "mask rate");
    train_cmd->add_option("--batch-size", train_args.batch_size, "sequences per step");
    train_cmd->add_option("--lr", train_args.learning_rate, "learning rate");
    train_cmd->add_option("--weight-decay", train_args.weight_decay, "decoupled weight decay");
    train_cmd->add_option("--epochs", train_args.epochs, "epochs over the training lines");
    train_cmd->add_option("--seed", train_args.seed, "training seed");
    train_cmd->add_option("--max-len", train_args.max_len, "token truncation length");
    train_cmd->add_option("--out", train_args.out, "output directory")->required();
    add_config(train_cmd);

    ScoreArgs score_args;
    CLI::App* score_cmd = app.add_subcommand("score", "score log lines (stdin or file)");
    score_cmd->add_option("--checkpoint", score_args.checkpoint, "checkpoint.json path");
    score_cmd->add_option("--input", score_args.input, "input file, or - for stdin");
    score_cmd->add_option("--profile", score_args.profile,
                          "raw (message-only lines) or a dataset profile");
    score_cmd->add_option("--out", score_args.out, "output directory (default: stdout)");
    add_config(score_cmd);

    EvalArgs eval_args;
    CLI::App* eval_cmd = app.add_subcommand("evaluate", "line and sequence level metrics");
    eval_cmd->add_option("--checkpoint", eval_args.checkpoint, "checkpoint.json path");
    eval_cmd->add_option("--dataset", eval_args.dataset, "labeled log file");
    eval_cmd->add_option("--scores", eval_args.scores, "pre-scored csv (skips the model)");
    eval_cmd->add_option("--profile", eval_args.profile, "dataset profile");
    eval_cmd->add_option("--split", eval_args.split, "random:SEED or chrono");
    eval_cmd->add_option("--train-fraction", eval_args.train_fraction, "train share");
    eval_cmd->add_option("--group", eval_args.group, "count:K or minutes:W");
    eval_cmd->add_option("--threshold", eval_args.threshold, "auto or a fixed value");
    eval_cmd->add_option("--holdout", eval_args.holdout,
                         "fraction of test rows reserved for threshold selection");
    eval_cmd->add_option("--out", eval_args.out, "output directory");
    add_config(eval_cmd);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (synth_cmd->parsed()) return run_synth(synth_args, synth_cmd);
        if (tok_cmd->parsed()) return run_train_tokenizer(tok_args, tok_cmd);
        if (train_cmd->parsed()) return run_train(train_args, train_cmd);
        if (score_cmd->parsed()) return run_score(score_args, score_cmd);
        if (eval_cmd->parsed()) return run_evaluate(eval_args, eval_cmd);
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const DataError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const NumericError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
    return 2;
}
