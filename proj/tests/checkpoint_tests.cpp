#include "catch_amalgamated.hpp"
#include "json.hpp"
#include "rtdlog/checkpoint.hpp"
#include "rtdlog/detector.hpp"
#include "test_util.hpp"

using namespace rtdlog;
using test_util::TempDir;

namespace {

TrainingConfig small_cfg(int vocab_size) {
    TrainingConfig cfg;
    cfg.generator = {.layers = 1, .width = 16, .heads = 2, .ff_mult = 2, .max_len = 16,
                     .vocab_size = vocab_size, .embed_dim = 16};
    cfg.discriminator = {.layers = 2, .width = 16, .heads = 2, .ff_mult = 2, .max_len = 16,
                         .vocab_size = vocab_size, .embed_dim = 16};
    return cfg;
}

}  // namespace

TEST_CASE("training config json roundtrip") {
    auto cfg = small_cfg(100);
    cfg.lambda = 12.5;
    cfg.seed = 777;
    auto j = training_config_to_json(cfg);
    auto back = training_config_from_json(j);
    CHECK(training_config_to_json(back) == j);
    CHECK(back.generator.layers == 1);
    CHECK(back.discriminator.layers == 2);
}

TEST_CASE("checkpoint roundtrip reproduces scores exactly") {
    auto cfg = small_cfg(40);
    auto bundle = init_bundle<float>(cfg, 5);
    Rng rng(6);
    for (Eigen::Index i = 0; i < bundle.disc_head_w.size(); ++i)
        bundle.disc_head_w(i) = static_cast<float>(rng.next_normal() * 0.3);

    TempDir dir("ckpt");
    CheckpointInfo info;
    info.config = cfg;
    info.steps = 123;
    info.vocab_ref = "vocab.txt";
    info.normalizer_ref = "normalizer.json";
    save_checkpoint(dir.file("checkpoint.json"), bundle, info);
    auto loaded = load_checkpoint(dir.file("checkpoint.json"));

    CHECK(loaded.info.steps == 123);
    CHECK(loaded.info.vocab_ref == "vocab.txt");

    bool all_equal = true;
    std::vector<std::pair<const float*, size_t>> a, b;
    bundle.for_each_param([&](const std::string&, auto& t) {
        a.push_back({t.data(), static_cast<size_t>(t.size())});
    });
    loaded.bundle.for_each_param([&](const std::string&, auto& t) {
        b.push_back({t.data(), static_cast<size_t>(t.size())});
    });
    REQUIRE(a.size() == b.size());
    for (size_t p = 0; p < a.size(); ++p) {
        REQUIRE(a[p].second == b[p].second);
        for (size_t i = 0; i < a[p].second; ++i)
            all_equal = all_equal && a[p].first[i] == b[p].first[i];
    }
    CHECK(all_equal);

    // Probe scores must be bit-identical before and after the roundtrip.
    for (int probe = 0; probe < 20; ++probe) {
        std::vector<int32_t> ids;
        Rng prng(100 + probe);
        size_t n = 1 + prng.next_below(10);
        for (size_t i = 0; i < n; ++i)
            ids.push_back(static_cast<int32_t>(3 + prng.next_below(37)));
        auto mask = PaddingMask::none(ids.size());
        double s1 = score_sequence(bundle, ids, mask);
        double s2 = score_sequence(loaded.bundle, ids, mask);
        CHECK(s1 == s2);
    }
}

TEST_CASE("version mismatch is an explicit error") {
    auto cfg = small_cfg(16);
    auto bundle = init_bundle<float>(cfg, 1);
    TempDir dir("ver");
    CheckpointInfo info;
    info.config = cfg;
    info.vocab_ref = "v";
    info.normalizer_ref = "n";
    save_checkpoint(dir.file("checkpoint.json"), bundle, info);

    auto manifest = nlohmann::json::parse(test_util::read_file(dir.file("checkpoint.json")));
    manifest["format_version"] = 999;
    test_util::write_file(dir.file("checkpoint.json"), manifest.dump(2));
    CHECK_THROWS_AS(load_checkpoint(dir.file("checkpoint.json")), DataError);
}

TEST_CASE("truncated tensor blob is an explicit error") {
    auto cfg = small_cfg(16);
    auto bundle = init_bundle<float>(cfg, 2);
    TempDir dir("trunc");
    CheckpointInfo info;
    info.config = cfg;
    info.vocab_ref = "v";
    info.normalizer_ref = "n";
    save_checkpoint(dir.file("checkpoint.json"), bundle, info);
    std::string blob = test_util::read_file(dir.file("checkpoint.json.bin"));
    test_util::write_file(dir.file("checkpoint.json.bin"), blob.substr(0, blob.size() / 2));
    CHECK_THROWS_AS(load_checkpoint(dir.file("checkpoint.json")), DataError);
}
