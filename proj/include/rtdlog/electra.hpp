// Replaced-token-detection training.
//
// A small generator encoder is trained by masked language modeling; its
// sampled reconstructions corrupt the input; a larger discriminator encoder
// is trained to tell original tokens from replacements. Both encoders share
// one token embedding table. Training consumes normal log lines only.
//
// Head sign convention, pinned here for every consumer: the discriminator
// head output d = sigmoid(w . h) reads as the probability that a token is
// ORIGINAL. Its loss is -log d on kept tokens and -log(1-d) on replaced
// tokens. The anomaly score therefore uses -log d as the per-token surprise
// (see detector.hpp): it vanishes when every token looks original and grows
// as tokens look replaced.

#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "rtdlog/common.hpp"
#include "rtdlog/corpus.hpp"
#include "rtdlog/encoder.hpp"
#include "rtdlog/rng.hpp"
#include "rtdlog/tokenizer.hpp"

namespace rtdlog {

struct TrainingConfig {
    double lambda = 50.0;
    double mask_prob = 0.15;
    int batch_size = 32;
    double learning_rate = 3e-4;
    double weight_decay = 0.01;
    int epochs = 4;
    uint64_t seed = 1;
    int max_len = 128;
    EncoderConfig generator;
    EncoderConfig discriminator;

    void validate() const {
        if (!(lambda >= 0.0)) throw UsageError("training config: lambda must be >= 0");
        if (!(mask_prob > 0.0 && mask_prob < 1.0))
            throw UsageError("training config: mask_prob must be in (0,1)");
        if (batch_size < 1 || epochs < 0) throw UsageError("training config: bad counts");
        generator.validate();
        discriminator.validate();
        if (generator.embed_dim != discriminator.embed_dim)
            throw UsageError("training config: encoders must share one embedding width");
    }
};

// Small sizes that train a toy corpus on a CPU in minutes.
inline TrainingConfig desk_training_config(int vocab_size) {
    TrainingConfig cfg;
    cfg.generator = {.layers = 2, .width = 64, .heads = 4, .ff_mult = 4, .max_len = 128,
                     .vocab_size = vocab_size, .embed_dim = 128};
    cfg.discriminator = {.layers = 4, .width = 128, .heads = 4, .ff_mult = 4, .max_len = 128,
                         .vocab_size = vocab_size, .embed_dim = 128};
    return cfg;
}

// Published model sizes: 3x256 generator, 6x512 discriminator.
inline TrainingConfig paper_scale_training_config(int vocab_size) {
    TrainingConfig cfg;
    cfg.generator = {.layers = 3, .width = 256, .heads = 8, .ff_mult = 4, .max_len = 128,
                     .vocab_size = vocab_size, .embed_dim = 512};
    cfg.discriminator = {.layers = 6, .width = 512, .heads = 8, .ff_mult = 4, .max_len = 128,
                         .vocab_size = vocab_size, .embed_dim = 512};
    return cfg;
}

struct MaskingPlan {
    std::vector<size_t> masked_indices;
    std::vector<int32_t> masked_sequence;  // input with [MASK] at those indices
    std::vector<int32_t> originals;        // the replaced-out token ids

    size_t k() const { return masked_indices.size(); }
};

struct CorruptedSequence {
    std::vector<int32_t> ids;
    std::vector<uint8_t> replaced_flags;  // by token identity, not by masking
};

template <typename Scalar>
struct ModelBundle {
    Matrix<Scalar> embeddings;  // vocab x embed_dim, shared by both encoders
    EncoderState<Scalar> generator;
    Matrix<Scalar> gen_out_proj;  // gen width x embed_dim, ahead of the tied logits
    Vector<Scalar> gen_out_bias;  // per-vocab logit bias
    EncoderState<Scalar> discriminator;
    Vector<Scalar> disc_head_w;  // zero-initialized: untrained head outputs 0.5

    int vocab_size() const { return static_cast<int>(embeddings.rows()); }
    int embed_dim() const { return static_cast<int>(embeddings.cols()); }

    static ModelBundle zeros(const TrainingConfig& cfg) {
        ModelBundle b;
        b.embeddings =
            Matrix<Scalar>::Zero(cfg.generator.vocab_size, cfg.generator.embed_dim);
        b.generator = EncoderState<Scalar>::zeros(cfg.generator);
        b.gen_out_proj = Matrix<Scalar>::Zero(cfg.generator.width, cfg.generator.embed_dim);
        b.gen_out_bias = Vector<Scalar>::Zero(cfg.generator.vocab_size);
        b.discriminator = EncoderState<Scalar>::zeros(cfg.discriminator);
        b.disc_head_w = Vector<Scalar>::Zero(cfg.discriminator.width);
        return b;
    }

    template <typename Fn>
    void for_each_param(Fn&& fn) {
        fn(std::string("embeddings"), embeddings);
        generator.for_each_param(
            [&](const std::string& name, auto& t) { fn("gen." + name, t); });
        fn(std::string("gen_out_proj"), gen_out_proj);
        fn(std::string("gen_out_bias"), gen_out_bias);
        discriminator.for_each_param(
            [&](const std::string& name, auto& t) { fn("disc." + name, t); });
        fn(std::string("disc_head_w"), disc_head_w);
    }

    void set_zero() {
        for_each_param([](const std::string&, auto& t) { t.setZero(); });
    }
};

// Embeddings from N(0, 0.02^2), encoders Xavier, logit bias and detection
// head at zero so the first step is analytically checkable.
template <typename Scalar>
ModelBundle<Scalar> init_bundle(const TrainingConfig& cfg, uint64_t seed) {
    cfg.validate();
    ModelBundle<Scalar> b = ModelBundle<Scalar>::zeros(cfg);
    Rng emb_rng = Rng::stream(seed, 0x10);
    for (Eigen::Index i = 0; i < b.embeddings.rows(); ++i)
        for (Eigen::Index j = 0; j < b.embeddings.cols(); ++j)
            b.embeddings(i, j) = Scalar(emb_rng.next_normal() * 0.02);
    Rng gen_rng = Rng::stream(seed, 0x20);
    b.generator = encoder_init<Scalar>(cfg.generator, gen_rng);
    Rng head_rng = Rng::stream(seed, 0x30);
    {
        Scalar std_dev = std::sqrt(Scalar(2) /
                                   Scalar(b.gen_out_proj.rows() + b.gen_out_proj.cols()));
        for (Eigen::Index i = 0; i < b.gen_out_proj.rows(); ++i)
            for (Eigen::Index j = 0; j < b.gen_out_proj.cols(); ++j)
                b.gen_out_proj(i, j) = Scalar(head_rng.next_normal()) * std_dev;
    }
    Rng disc_rng = Rng::stream(seed, 0x40);
    b.discriminator = encoder_init<Scalar>(cfg.discriminator, disc_rng);
    return b;
}

// --- masking -------------------------------------------------------------------

// k = max(1, round(mask_prob * N_nonpad)) positions drawn uniformly without
// replacement over the non-pad slots.
inline MaskingPlan make_masking_plan(const TokenSequence& seq, const PaddingMask& mask,
                                     double mask_prob, int32_t mask_token_id, Rng& rng) {
    std::vector<size_t> nonpad;
    for (size_t i = 0; i < seq.size(); ++i) {
        if (!mask.pad(i)) nonpad.push_back(i);
    }
    if (nonpad.empty()) throw DataError("make_masking_plan: no non-pad tokens");
    size_t k = static_cast<size_t>(
        std::max<long>(1, std::lround(mask_prob * static_cast<double>(nonpad.size()))));
    MaskingPlan plan;
    plan.masked_sequence = seq.ids;
    for (size_t slot : rng.sample_indices(nonpad.size(), k)) {
        size_t idx = nonpad[slot];
        plan.masked_indices.push_back(idx);
        plan.originals.push_back(seq.ids[idx]);
        plan.masked_sequence[idx] = mask_token_id;
    }
    return plan;
}

// --- generator -------------------------------------------------------------------

template <typename Scalar>
struct GeneratorPass {
    EncoderCache<Scalar> cache;
    Matrix<Scalar> hidden;       // N x width
    Matrix<Scalar> masked_rows;  // k x width, hidden rows at masked indices
    Matrix<Scalar> projected;    // k x embed_dim
    Matrix<Scalar> probs;        // k x vocab softmax rows
};

template <typename Scalar>
GeneratorPass<Scalar> generator_forward(const ModelBundle<Scalar>& bundle,
                                        const MaskingPlan& plan, const PaddingMask& mask) {
    GeneratorPass<Scalar> pass;
    pass.hidden = encoder_forward(bundle.generator, bundle.embeddings, plan.masked_sequence,
                                  mask, pass.cache);
    const int k = static_cast<int>(plan.k());
    pass.masked_rows.resize(k, bundle.generator.cfg.width);
    for (int j = 0; j < k; ++j)
        pass.masked_rows.row(j) = pass.hidden.row(
            static_cast<Eigen::Index>(plan.masked_indices[static_cast<size_t>(j)]));
    pass.projected = pass.masked_rows * bundle.gen_out_proj;
    Matrix<Scalar> logits =
        (pass.projected * bundle.embeddings.transpose()).rowwise() +
        bundle.gen_out_bias.transpose();
    pass.probs.resize(k, bundle.vocab_size());
    for (int j = 0; j < k; ++j) {
        Scalar row_max = logits.row(j).maxCoeff();
        Eigen::Matrix<Scalar, 1, Eigen::Dynamic> e =
            (logits.row(j).array() - row_max).exp();
        pass.probs.row(j) = e / e.sum();
    }
    if (!pass.probs.allFinite()) throw NumericError("generator: non-finite mlm probabilities");
    return pass;
}

// Sum over masked positions of -log p(original token). Batch averaging is the
// caller's job. Probabilities are floored at 1e-12 before the log.
template <typename Scalar>
Scalar generator_nll(const GeneratorPass<Scalar>& pass, const MaskingPlan& plan) {
    Scalar loss = 0;
    for (size_t j = 0; j < plan.k(); ++j) {
        Scalar p = pass.probs(static_cast<Eigen::Index>(j), plan.originals[j]);
        loss -= std::log(std::max(p, Scalar(1e-12)));
    }
    return loss;
}

// One categorical sample per masked index at temperature 1. Gradients never
// flow through sampling; the generator trains only via its MLM loss.
// replaced_flags compare token identity, so resampling the original token
// counts as "original".
template <typename Scalar>
CorruptedSequence sample_replacements(const GeneratorPass<Scalar>& pass,
                                      const MaskingPlan& plan,
                                      const std::vector<int32_t>& original_ids, Rng& rng) {
    CorruptedSequence corrupt;
    corrupt.ids = original_ids;
    corrupt.replaced_flags.assign(original_ids.size(), 0);
    std::vector<double> weights(static_cast<size_t>(pass.probs.cols()));
    for (size_t j = 0; j < plan.k(); ++j) {
        for (size_t t = 0; t < weights.size(); ++t)
            weights[t] = static_cast<double>(pass.probs(static_cast<Eigen::Index>(j),
                                                        static_cast<Eigen::Index>(t)));
        int32_t sampled = static_cast<int32_t>(rng.next_categorical(weights));
        size_t idx = plan.masked_indices[j];
        corrupt.ids[idx] = sampled;
        corrupt.replaced_flags[idx] = (sampled != original_ids[idx]) ? 1 : 0;
    }
    return corrupt;
}

// --- discriminator ----------------------------------------------------------------

constexpr double kProbClampLo = 1e-7;
constexpr double kProbClampHi = 1.0 - 1e-7;

template <typename Scalar>
struct DiscriminatorPass {
    EncoderCache<Scalar> cache;
    Matrix<Scalar> hidden;        // N x width
    Vector<Scalar> d;             // per-position P(original), clamped
    std::vector<uint8_t> clamped; // positions where the clamp is active
};

template <typename Scalar>
DiscriminatorPass<Scalar> discriminator_forward(const ModelBundle<Scalar>& bundle,
                                                const std::vector<int32_t>& ids,
                                                const PaddingMask& mask) {
    DiscriminatorPass<Scalar> pass;
    pass.hidden = encoder_forward(bundle.discriminator, bundle.embeddings, ids, mask,
                                  pass.cache);
    const int n = static_cast<int>(ids.size());
    pass.d.resize(n);
    pass.clamped.assign(static_cast<size_t>(n), 0);
    for (int i = 0; i < n; ++i) {
        Scalar z = pass.hidden.row(i).dot(bundle.disc_head_w.transpose());
        Scalar s = z >= Scalar(0) ? Scalar(1) / (Scalar(1) + std::exp(-z))
                                  : std::exp(z) / (Scalar(1) + std::exp(z));
        if (s < Scalar(kProbClampLo)) {
            s = Scalar(kProbClampLo);
            pass.clamped[static_cast<size_t>(i)] = 1;
        } else if (s > Scalar(kProbClampHi)) {
            s = Scalar(kProbClampHi);
            pass.clamped[static_cast<size_t>(i)] = 1;
        }
        pass.d(i) = s;
    }
    return pass;
}

// Sum over non-pad positions: -log d where the token is original,
// -log(1-d) where it was replaced.
template <typename Scalar>
Scalar discriminator_nll(const DiscriminatorPass<Scalar>& pass,
                         const std::vector<uint8_t>& replaced_flags, const PaddingMask& mask) {
    Scalar loss = 0;
    for (size_t i = 0; i < replaced_flags.size(); ++i) {
        if (mask.pad(i)) continue;
        Scalar d = pass.d(static_cast<Eigen::Index>(i));
        loss -= replaced_flags[i] ? std::log(Scalar(1) - d) : std::log(d);
    }
    return loss;
}

// --- backward --------------------------------------------------------------------

// MLM-loss backward for one sequence; `scale` carries the batch averaging.
template <typename Scalar>
void generator_backward(const ModelBundle<Scalar>& bundle, const GeneratorPass<Scalar>& pass,
                        const MaskingPlan& plan, Scalar scale, ModelBundle<Scalar>& grads) {
    const int k = static_cast<int>(plan.k());
    Matrix<Scalar> dlogits = pass.probs * scale;
    for (int j = 0; j < k; ++j)
        dlogits(j, plan.originals[static_cast<size_t>(j)]) -= scale;

    grads.gen_out_bias += dlogits.colwise().sum().transpose();
    grads.embeddings.noalias() += dlogits.transpose() * pass.projected;
    Matrix<Scalar> dprojected = dlogits * bundle.embeddings;
    grads.gen_out_proj.noalias() += pass.masked_rows.transpose() * dprojected;
    Matrix<Scalar> dmasked_rows = dprojected * bundle.gen_out_proj.transpose();

    Matrix<Scalar> dh = Matrix<Scalar>::Zero(pass.hidden.rows(), pass.hidden.cols());
    for (int j = 0; j < k; ++j)
        dh.row(static_cast<Eigen::Index>(plan.masked_indices[static_cast<size_t>(j)])) +=
            dmasked_rows.row(j);
    encoder_backward(bundle.generator, pass.cache, dh, grads.generator, grads.embeddings);
}

// RTD-loss backward for one sequence; no gradient where the clamp is active.
template <typename Scalar>
void discriminator_backward(const ModelBundle<Scalar>& bundle,
                            const DiscriminatorPass<Scalar>& pass,
                            const std::vector<uint8_t>& replaced_flags,
                            const PaddingMask& mask, Scalar scale,
                            ModelBundle<Scalar>& grads) {
    const int n = static_cast<int>(replaced_flags.size());
    Vector<Scalar> dz = Vector<Scalar>::Zero(n);
    for (int i = 0; i < n; ++i) {
        size_t si = static_cast<size_t>(i);
        if (mask.pad(si) || pass.clamped[si]) continue;
        Scalar target = replaced_flags[si] ? Scalar(0) : Scalar(1);
        dz(i) = scale * (pass.d(i) - target);
    }
    grads.disc_head_w.noalias() += pass.hidden.transpose() * dz;
    Matrix<Scalar> dh = dz * bundle.disc_head_w.transpose();
    encoder_backward(bundle.discriminator, pass.cache, dh, grads.discriminator,
                     grads.embeddings);
}

// --- optimizer -------------------------------------------------------------------

// AdamW with decoupled weight decay. Decay applies to weight matrices only;
// vectors (biases, layer-norm parameters, the detection head) are exempt.
template <typename Scalar>
class AdamW {
public:
    AdamW(double lr, double weight_decay, double beta1 = 0.9, double beta2 = 0.999,
          double eps = 1e-8)
        : lr_(lr), wd_(weight_decay), beta1_(beta1), beta2_(beta2), eps_(eps) {}

    void step(ModelBundle<Scalar>& params, ModelBundle<Scalar>& grads) {
        ++t_;
        double bc1 = 1.0 - std::pow(beta1_, t_);
        double bc2 = 1.0 - std::pow(beta2_, t_);
        size_t slot = 0;
        params.for_each_param([&](const std::string&, auto& p) {
            if (slot >= m_.size()) {
                m_.emplace_back(static_cast<size_t>(p.size()), Scalar(0));
                v_.emplace_back(static_cast<size_t>(p.size()), Scalar(0));
            }
            auto& m = m_[slot];
            auto& v = v_[slot];
            Scalar* g = grad_ptr(grads, slot);
            Scalar* w = p.data();
            bool decay = p.cols() > 1;  // matrices only
            for (size_t i = 0; i < m.size(); ++i) {
                double gi = static_cast<double>(g[i]);
                double mi = beta1_ * static_cast<double>(m[i]) + (1.0 - beta1_) * gi;
                double vi = beta2_ * static_cast<double>(v[i]) + (1.0 - beta2_) * gi * gi;
                m[i] = Scalar(mi);
                v[i] = Scalar(vi);
                double update = (mi / bc1) / (std::sqrt(vi / bc2) + eps_);
                double wi = static_cast<double>(w[i]);
                wi -= lr_ * update;
                if (decay) wi -= lr_ * wd_ * wi;
                w[i] = Scalar(wi);
            }
            ++slot;
        });
    }

private:
    // Parameter visit order is stable, so slots line up between calls.
    Scalar* grad_ptr(ModelBundle<Scalar>& grads, size_t want) {
        Scalar* out = nullptr;
        size_t slot = 0;
        grads.for_each_param([&](const std::string&, auto& g) {
            if (slot == want) out = g.data();
            ++slot;
        });
        return out;
    }

    double lr_, wd_, beta1_, beta2_, eps_;
    int64_t t_ = 0;
    std::vector<std::vector<Scalar>> m_, v_;
};

// --- training loop -----------------------------------------------------------------

struct TrainStepRecord {
    int64_t step;
    double lg;
    double ld;

    double joint(double lambda) const { return lg + lambda * ld; }
};

// One joint loss evaluation (forward only) against a fixed plan and fixed
// corruption. Shared by the training loop and by gradient checks, which need
// the loss as a smooth function of the parameters.
template <typename Scalar>
struct JointLosses {
    Scalar lg = 0;
    Scalar ld = 0;
};

template <typename Scalar>
JointLosses<Scalar> joint_forward(const ModelBundle<Scalar>& bundle, const MaskingPlan& plan,
                                  const CorruptedSequence& corrupt, const PaddingMask& mask) {
    JointLosses<Scalar> out;
    auto gen_pass = generator_forward(bundle, plan, mask);
    out.lg = generator_nll(gen_pass, plan);
    auto disc_pass = discriminator_forward(bundle, corrupt.ids, mask);
    out.ld = discriminator_nll(disc_pass, corrupt.replaced_flags, mask);
    return out;
}

// Trains in place so the caller keeps the last finite parameters if a step
// diverges. Returns the per-step loss history.
template <typename Scalar>
std::vector<TrainStepRecord> train(ModelBundle<Scalar>& bundle,
                                   const std::vector<TokenSequence>& corpus,
                                   const TrainingConfig& cfg, const Vocabulary& vocab,
                                   const std::vector<Label>* labels = nullptr) {
    cfg.validate();
    if (corpus.empty()) throw DataError("train: empty corpus");
    if (labels) {
        if (labels->size() != corpus.size()) throw UsageError("train: labels size mismatch");
        for (Label l : *labels) {
            if (l == Label::Anomaly)
                throw DataError("train: corpus must contain only normal-labeled lines");
        }
    }

    std::vector<size_t> usable;
    for (size_t i = 0; i < corpus.size(); ++i) {
        if (!corpus[i].empty()) usable.push_back(i);
    }
    if (usable.empty()) throw DataError("train: all sequences empty after tokenization");

    AdamW<Scalar> opt(cfg.learning_rate, cfg.weight_decay);
    ModelBundle<Scalar> grads = ModelBundle<Scalar>::zeros(cfg);
    std::vector<TrainStepRecord> history;
    int64_t step = 0;

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::vector<size_t> order = usable;
        Rng shuffle_rng = Rng::stream(cfg.seed, 0x50, static_cast<uint64_t>(epoch));
        shuffle_rng.shuffle(order);

        for (size_t batch_start = 0; batch_start < order.size();
             batch_start += static_cast<size_t>(cfg.batch_size)) {
            size_t batch_end =
                std::min(order.size(), batch_start + static_cast<size_t>(cfg.batch_size));
            const Scalar inv_b = Scalar(1) / Scalar(batch_end - batch_start);
            grads.set_zero();
            double lg_sum = 0.0, ld_sum = 0.0;

            for (size_t bi = batch_start; bi < batch_end; ++bi) {
                size_t idx = order[bi];
                const TokenSequence& seq = corpus[idx];
                PaddingMask mask = PaddingMask::none(seq.size());
                // Stream keyed by (seed, line index, epoch): reproducible no
                // matter how batches are assembled.
                Rng seq_rng = Rng::stream(cfg.seed, static_cast<uint64_t>(idx),
                                          static_cast<uint64_t>(epoch) + 1);
                MaskingPlan plan =
                    make_masking_plan(seq, mask, cfg.mask_prob, vocab.mask_id(), seq_rng);
                auto gen_pass = generator_forward(bundle, plan, mask);
                lg_sum += static_cast<double>(generator_nll(gen_pass, plan));
                CorruptedSequence corrupt =
                    sample_replacements(gen_pass, plan, seq.ids, seq_rng);
                auto disc_pass = discriminator_forward(bundle, corrupt.ids, mask);
                ld_sum +=
                    static_cast<double>(discriminator_nll(disc_pass, corrupt.replaced_flags, mask));

                generator_backward(bundle, gen_pass, plan, inv_b, grads);
                discriminator_backward(bundle, disc_pass, corrupt.replaced_flags, mask,
                                       Scalar(cfg.lambda) * inv_b, grads);
            }

            double lg = lg_sum / static_cast<double>(batch_end - batch_start);
            double ld = ld_sum / static_cast<double>(batch_end - batch_start);
            if (!std::isfinite(lg) || !std::isfinite(ld))
                throw NumericError("train: loss diverged at step " + std::to_string(step) +
                                   "; parameters left at the last finite state");
            opt.step(bundle, grads);
            history.push_back({step, lg, ld});
            ++step;
        }
    }
    return history;
}

}  // namespace rtdlog
