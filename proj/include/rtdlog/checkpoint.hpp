// Checkpoint persistence: a JSON manifest plus a binary tensor blob.
//
// Tensors are stored as little-endian 32-bit floats with explicit shape
// headers, independent of host byte order. Reloading reproduces bit-identical
// scores because inference runs at the stored precision.

#pragma once

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "json.hpp"
#include "rtdlog/common.hpp"
#include "rtdlog/electra.hpp"

namespace rtdlog {

inline nlohmann::json encoder_config_to_json(const EncoderConfig& c) {
    return {{"layers", c.layers},   {"width", c.width},
            {"heads", c.heads},     {"ff_mult", c.ff_mult},
            {"max_len", c.max_len}, {"vocab_size", c.vocab_size},
            {"embed_dim", c.embed_dim}};
}

inline EncoderConfig encoder_config_from_json(const nlohmann::json& j) {
    EncoderConfig c;
    c.layers = j.at("layers").get<int>();
    c.width = j.at("width").get<int>();
    c.heads = j.at("heads").get<int>();
    c.ff_mult = j.at("ff_mult").get<int>();
    c.max_len = j.at("max_len").get<int>();
    c.vocab_size = j.at("vocab_size").get<int>();
    c.embed_dim = j.at("embed_dim").get<int>();
    return c;
}

inline nlohmann::json training_config_to_json(const TrainingConfig& c) {
    return {{"lambda", c.lambda},
            {"mask_prob", c.mask_prob},
            {"batch_size", c.batch_size},
            {"learning_rate", c.learning_rate},
            {"weight_decay", c.weight_decay},
            {"epochs", c.epochs},
            {"seed", c.seed},
            {"max_len", c.max_len},
            {"generator", encoder_config_to_json(c.generator)},
            {"discriminator", encoder_config_to_json(c.discriminator)}};
}

inline TrainingConfig training_config_from_json(const nlohmann::json& j) {
    TrainingConfig c;
    c.lambda = j.at("lambda").get<double>();
    c.mask_prob = j.at("mask_prob").get<double>();
    c.batch_size = j.at("batch_size").get<int>();
    c.learning_rate = j.at("learning_rate").get<double>();
    c.weight_decay = j.at("weight_decay").get<double>();
    c.epochs = j.at("epochs").get<int>();
    c.seed = j.at("seed").get<uint64_t>();
    c.max_len = j.at("max_len").get<int>();
    c.generator = encoder_config_from_json(j.at("generator"));
    c.discriminator = encoder_config_from_json(j.at("discriminator"));
    return c;
}

namespace detail {

inline void put_u32(std::string& out, uint32_t v) {
    out.push_back(static_cast<char>(v & 0xFF));
    out.push_back(static_cast<char>((v >> 8) & 0xFF));
    out.push_back(static_cast<char>((v >> 16) & 0xFF));
    out.push_back(static_cast<char>((v >> 24) & 0xFF));
}

inline void put_f32(std::string& out, float f) {
    uint32_t v;
    std::memcpy(&v, &f, 4);
    put_u32(out, v);
}

struct ByteReader {
    const std::string& buf;
    size_t pos = 0;

    uint32_t u32() {
        if (pos + 4 > buf.size()) throw DataError("checkpoint: truncated tensor blob");
        uint32_t v = static_cast<uint8_t>(buf[pos]) |
                     (static_cast<uint32_t>(static_cast<uint8_t>(buf[pos + 1])) << 8) |
                     (static_cast<uint32_t>(static_cast<uint8_t>(buf[pos + 2])) << 16) |
                     (static_cast<uint32_t>(static_cast<uint8_t>(buf[pos + 3])) << 24);
        pos += 4;
        return v;
    }
    float f32() {
        uint32_t v = u32();
        float f;
        std::memcpy(&f, &v, 4);
        return f;
    }
    std::string bytes(size_t n) {
        if (pos + n > buf.size()) throw DataError("checkpoint: truncated tensor blob");
        std::string s = buf.substr(pos, n);
        pos += n;
        return s;
    }
};

}  // namespace detail

constexpr uint32_t kCheckpointVersion = 1;
constexpr const char* kTensorMagic = "RTDT";

struct CheckpointInfo {
    TrainingConfig config;
    int64_t steps = 0;
    std::string vocab_ref;       // paths relative to the manifest
    std::string normalizer_ref;
};

// `path` is the manifest; the tensor blob lands at path + ".bin".
inline void save_checkpoint(const std::string& path, ModelBundle<float>& bundle,
                            const CheckpointInfo& info) {
    std::string blob;
    blob.append(kTensorMagic);
    detail::put_u32(blob, kCheckpointVersion);
    uint32_t count = 0;
    bundle.for_each_param([&](const std::string&, auto&) { ++count; });
    detail::put_u32(blob, count);
    bundle.for_each_param([&](const std::string& name, auto& t) {
        detail::put_u32(blob, static_cast<uint32_t>(name.size()));
        blob.append(name);
        detail::put_u32(blob, static_cast<uint32_t>(t.rows()));
        detail::put_u32(blob, static_cast<uint32_t>(t.cols()));
        for (Eigen::Index i = 0; i < t.rows(); ++i)
            for (Eigen::Index j = 0; j < t.cols(); ++j)
                detail::put_f32(blob, static_cast<float>(t(i, j)));
    });
    std::string blob_name = std::filesystem::path(path).filename().string() + ".bin";
    write_text_file(path + ".bin", blob);

    nlohmann::json manifest = {{"format_version", kCheckpointVersion},
                               {"training", training_config_to_json(info.config)},
                               {"steps", info.steps},
                               {"vocabulary", info.vocab_ref},
                               {"normalizer", info.normalizer_ref},
                               {"tensors", blob_name}};
    write_text_file(path, manifest.dump(2) + "\n");
}

struct LoadedCheckpoint {
    ModelBundle<float> bundle;
    CheckpointInfo info;
};

inline LoadedCheckpoint load_checkpoint(const std::string& path) {
    nlohmann::json manifest = nlohmann::json::parse(read_text_file(path));
    if (manifest.value("format_version", 0) != static_cast<int>(kCheckpointVersion))
        throw DataError("checkpoint: unsupported format version in " + path);

    LoadedCheckpoint out;
    out.info.config = training_config_from_json(manifest.at("training"));
    out.info.steps = manifest.at("steps").get<int64_t>();
    out.info.vocab_ref = manifest.at("vocabulary").get<std::string>();
    out.info.normalizer_ref = manifest.at("normalizer").get<std::string>();

    std::string blob_path =
        (std::filesystem::path(path).parent_path() /
         manifest.at("tensors").get<std::string>())
            .string();
    std::string blob = read_text_file(blob_path);
    detail::ByteReader r{blob};
    if (r.bytes(4) != kTensorMagic) throw DataError("checkpoint: bad tensor magic");
    if (r.u32() != kCheckpointVersion) throw DataError("checkpoint: bad tensor version");
    uint32_t count = r.u32();

    out.bundle = ModelBundle<float>::zeros(out.info.config);
    std::unordered_map<std::string, uint32_t> seen;
    for (uint32_t t = 0; t < count; ++t) {
        std::string name = r.bytes(r.u32());
        uint32_t rows = r.u32();
        uint32_t cols = r.u32();
        bool matched = false;
        out.bundle.for_each_param([&](const std::string& pname, auto& tensor) {
            if (pname != name) return;
            matched = true;
            if (tensor.rows() != static_cast<Eigen::Index>(rows) ||
                tensor.cols() != static_cast<Eigen::Index>(cols))
                throw DataError("checkpoint: shape mismatch for tensor " + name);
            for (Eigen::Index i = 0; i < tensor.rows(); ++i)
                for (Eigen::Index j = 0; j < tensor.cols(); ++j)
                    tensor(i, j) = r.f32();
        });
        if (!matched) throw DataError("checkpoint: unknown tensor " + name);
        seen[name] += 1;
    }
    uint32_t expected = 0;
    out.bundle.for_each_param([&](const std::string&, auto&) { ++expected; });
    if (seen.size() != expected) throw DataError("checkpoint: missing tensors");
    return out;
}

}  // namespace rtdlog
