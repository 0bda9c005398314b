// End-to-end runs of the command line binary.

#include <sys/wait.h>

#include <cstdio>
#include <cstdlib>
#include <string>

#include "catch_amalgamated.hpp"
#include "json.hpp"
#include "test_util.hpp"

using nlohmann::json;
using test_util::TempDir;

namespace {

struct RunResult {
    int exit_code;
    std::string output;  // stdout only
};

RunResult run(const std::string& args, const std::string& stdin_data = "",
              bool has_stdin = false) {
    std::string cmd = std::string(RTDLOG_CLI_PATH) + " " + args;
    if (has_stdin) {
        std::string tmp = (std::filesystem::temp_directory_path() /
                           ("rtdlog_stdin_" + std::to_string(::getpid())))
                              .string();
        test_util::write_file(tmp, stdin_data);
        cmd += " < " + tmp;
    } else {
        cmd += " < /dev/null";
    }
    cmd += " 2>/dev/null";
    FILE* pipe = popen(cmd.c_str(), "r");
    REQUIRE(pipe != nullptr);
    std::string out;
    char buf[4096];
    size_t got;
    while ((got = fread(buf, 1, sizeof(buf), pipe)) > 0) out.append(buf, got);
    int status = pclose(pipe);
    return {WEXITSTATUS(status), out};
}

}  // namespace

TEST_CASE("full pipeline: synth, tokenizer, train, score, evaluate") {
    TempDir dir("pipeline");
    std::string corpus_dir = dir.file("corpus");
    std::string tok_dir = dir.file("tok");
    std::string model_dir = dir.file("model");
    std::string eval_dir = dir.file("eval");

    auto synth = run("synth --lines 300 --anomalies 30 --templates 10 --seed 5 --out " +
                     corpus_dir);
    REQUIRE(synth.exit_code == 0);
    std::string corpus = corpus_dir + "/corpus.log";

    auto tok = run("train-tokenizer --dataset " + corpus +
                   " --split random:3 --vocab-size 1024 --out " + tok_dir);
    REQUIRE(tok.exit_code == 0);
    CHECK(std::filesystem::exists(tok_dir + "/vocab.txt"));
    CHECK(std::filesystem::exists(tok_dir + "/vocab.txt.json"));
    CHECK(std::filesystem::exists(tok_dir + "/normalizer.json"));
    CHECK(std::filesystem::exists(tok_dir + "/run_config.json"));

    auto trained = run("train --dataset " + corpus + " --split random:3 --vocab " + tok_dir +
                       "/vocab.txt --normalizer " + tok_dir +
                       "/normalizer.json --epochs 1 --batch-size 32 --seed 11 --out " +
                       model_dir);
    REQUIRE(trained.exit_code == 0);
    CHECK(std::filesystem::exists(model_dir + "/checkpoint.json"));
    CHECK(std::filesystem::exists(model_dir + "/checkpoint.json.bin"));
    CHECK(std::filesystem::exists(model_dir + "/losses.csv"));

    std::string losses = test_util::read_file(model_dir + "/losses.csv");
    CHECK(losses.rfind("step,L_g,L_d,joint\n", 0) == 0);

    auto scored = run("score --checkpoint " + model_dir + "/checkpoint.json --input " +
                      corpus + " --profile bgl");
    REQUIRE(scored.exit_code == 0);
    CHECK(scored.output.rfind("line_no,score,label,n_tokens,flag\n", 0) == 0);

    auto eval = run("evaluate --checkpoint " + model_dir + "/checkpoint.json --dataset " +
                    corpus + " --split random:3 --group count:50 --out " + eval_dir);
    REQUIRE(eval.exit_code == 0);
    CHECK(eval.output.find("Prec") != std::string::npos);
    CHECK(eval.output.find("sequence") != std::string::npos);

    auto report = json::parse(test_util::read_file(eval_dir + "/report.json"));
    for (const char* key : {"line_level", "sequence_level", "threshold", "grouping", "split"})
        CHECK(report.contains(key));
    for (const char* key : {"precision", "recall", "specificity", "f1", "tp", "fp", "fn", "tn"}) {
        CHECK(report["line_level"].contains(key));
        CHECK(report["sequence_level"].contains(key));
    }
    CHECK(std::filesystem::exists(eval_dir + "/split_manifest.json"));
    CHECK(std::filesystem::exists(eval_dir + "/group_manifest.json"));

    // evaluate straight from the scored csv
    std::string eval2_dir = dir.file("eval2");
    auto eval2 = run("evaluate --scores " + eval_dir + "/scores.csv --group count:50 --out " +
                     eval2_dir);
    REQUIRE(eval2.exit_code == 0);

    // chronological split and minutes grouping
    std::string eval3_dir = dir.file("eval3");
    auto eval3 = run("evaluate --checkpoint " + model_dir + "/checkpoint.json --dataset " +
                     corpus + " --split chrono --group minutes:5 --out " + eval3_dir);
    REQUIRE(eval3.exit_code == 0);
    auto report3 = json::parse(test_util::read_file(eval3_dir + "/report.json"));
    CHECK(report3["split"]["chronological_check"]["ok"].get<bool>());

    // replaying the stored run config reproduces the checkpoint bit for bit
    std::string model2_dir = dir.file("model2");
    auto replay = run("train --config " + model_dir + "/run_config.json --out " + model2_dir);
    REQUIRE(replay.exit_code == 0);
    CHECK(test_util::read_file(model_dir + "/checkpoint.json.bin") ==
          test_util::read_file(model2_dir + "/checkpoint.json.bin"));
    CHECK(test_util::read_file(model_dir + "/losses.csv") ==
          test_util::read_file(model2_dir + "/losses.csv"));
}

TEST_CASE("score reads stdin and writes an ordered csv") {
    TempDir dir("stdin");
    std::string corpus_dir = dir.file("c");
    run("synth --lines 40 --anomalies 0 --templates 4 --seed 2 --out " + corpus_dir);
    std::string tok_dir = dir.file("t");
    run("train-tokenizer --dataset " + corpus_dir + "/corpus.log --vocab-size 512 --out " +
        tok_dir);
    std::string model_dir = dir.file("m");
    auto trained = run("train --dataset " + corpus_dir + "/corpus.log --vocab " + tok_dir +
                       "/vocab.txt --epochs 0 --out " + model_dir);
    REQUIRE(trained.exit_code == 0);

    auto scored = run("score --checkpoint " + model_dir + "/checkpoint.json",
                      "alpha beta gamma\nkernel panic now\n", true);
    REQUIRE(scored.exit_code == 0);
    auto lines = [&] {
        std::vector<std::string> out;
        std::string cur;
        for (char c : scored.output) {
            if (c == '\n') {
                out.push_back(cur);
                cur.clear();
            } else {
                cur += c;
            }
        }
        return out;
    }();
    REQUIRE(lines.size() == 3);
    CHECK(lines[0] == "line_no,score,label,n_tokens,flag");
    CHECK(lines[1].rfind("1,", 0) == 0);
    CHECK(lines[2].rfind("2,", 0) == 0);

    auto empty = run("score --checkpoint " + model_dir + "/checkpoint.json", "", true);
    REQUIRE(empty.exit_code == 0);
    CHECK(empty.output == "line_no,score,label,n_tokens,flag\n");
}

TEST_CASE("usage and data errors map to exit codes") {
    TempDir dir("codes");
    CHECK(run("train-tokenizer --dataset /nonexistent.log --out " + dir.file("x")).exit_code ==
          2);
    CHECK(run("nonsense-subcommand").exit_code == 2);
    CHECK(run("train --out " + dir.file("y")).exit_code == 2);  // missing inputs
    CHECK(run("--help").exit_code == 0);

    // single-class corpus: threshold selection must fail with a data error
    std::string corpus_dir = dir.file("c");
    run("synth --lines 60 --anomalies 0 --templates 4 --seed 3 --out " + corpus_dir);
    std::string tok_dir = dir.file("t");
    run("train-tokenizer --dataset " + corpus_dir + "/corpus.log --vocab-size 512 --out " +
        tok_dir);
    std::string model_dir = dir.file("m");
    run("train --dataset " + corpus_dir + "/corpus.log --vocab " + tok_dir +
        "/vocab.txt --epochs 0 --out " + model_dir);
    auto eval = run("evaluate --checkpoint " + model_dir + "/checkpoint.json --dataset " +
                    corpus_dir + "/corpus.log --group count:10 --out " + dir.file("e"));
    CHECK(eval.exit_code == 3);
}

TEST_CASE("synth is deterministic across runs") {
    TempDir dir("det");
    auto a = run("synth --lines 100 --anomalies 10 --seed 77 --out " + dir.file("a"));
    auto b = run("synth --lines 100 --anomalies 10 --seed 77 --out " + dir.file("b"));
    REQUIRE(a.exit_code == 0);
    REQUIRE(b.exit_code == 0);
    CHECK(test_util::read_file(dir.file("a") + "/corpus.log") ==
          test_util::read_file(dir.file("b") + "/corpus.log"));
    CHECK(test_util::read_file(dir.file("a") + "/manifest.json") ==
          test_util::read_file(dir.file("b") + "/manifest.json"));
}
