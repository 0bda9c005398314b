// Transformer encoder with explicit forward/backward passes.
//
// Pre-layer-norm blocks: x += MHA(LN(x)); x += FFN(LN(x)); final layer norm.
// Token embeddings live outside the encoder (they are shared between the
// generator and discriminator), so forward takes embedding rows plus an input
// projection. Positions are fixed sinusoids. Templated on the scalar type:
// float for training, double for gradient checks and numeric oracles.

#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "rtdlog/common.hpp"
#include "rtdlog/rng.hpp"

namespace rtdlog {

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

struct EncoderConfig {
    int layers = 2;
    int width = 64;
    int heads = 4;
    int ff_mult = 4;
    int max_len = 128;
    int vocab_size = 0;
    int embed_dim = 64;

    int head_dim() const { return width / heads; }
    int ff_dim() const { return width * ff_mult; }

    void validate() const {
        if (layers < 1 || width < 1 || heads < 1 || ff_mult < 1 || max_len < 1 ||
            vocab_size < 1 || embed_dim < 1)
            throw UsageError("encoder config: all dimensions must be >= 1");
        if (width % heads != 0) throw UsageError("encoder config: width must divide by heads");
    }
};

// Marks [PAD] slots. Pad positions are excluded from attention in both
// directions and carry no gradient.
struct PaddingMask {
    std::vector<uint8_t> is_pad;

    static PaddingMask none(size_t n) { return PaddingMask{std::vector<uint8_t>(n, 0)}; }
    size_t size() const { return is_pad.size(); }
    bool pad(size_t i) const { return is_pad[i] != 0; }
};

template <typename Scalar>
struct EncoderLayerParams {
    Matrix<Scalar> Wq, Wk, Wv, Wo;  // width x width
    Vector<Scalar> bq, bk, bv, bo;
    Vector<Scalar> ln1_g, ln1_b, ln2_g, ln2_b;
    Matrix<Scalar> W1, W2;  // width x ff, ff x width
    Vector<Scalar> b1, b2;
};

template <typename Scalar>
struct EncoderState {
    EncoderConfig cfg;
    Matrix<Scalar> in_proj;  // embed_dim x width
    std::vector<EncoderLayerParams<Scalar>> layers;
    Vector<Scalar> lnf_g, lnf_b;

    static EncoderState zeros(const EncoderConfig& cfg) {
        cfg.validate();
        EncoderState s;
        s.cfg = cfg;
        s.in_proj = Matrix<Scalar>::Zero(cfg.embed_dim, cfg.width);
        s.layers.resize(static_cast<size_t>(cfg.layers));
        for (auto& l : s.layers) {
            l.Wq = l.Wk = l.Wv = l.Wo = Matrix<Scalar>::Zero(cfg.width, cfg.width);
            l.bq = l.bk = l.bv = l.bo = Vector<Scalar>::Zero(cfg.width);
            l.ln1_g = l.ln2_g = Vector<Scalar>::Zero(cfg.width);
            l.ln1_b = l.ln2_b = Vector<Scalar>::Zero(cfg.width);
            l.W1 = Matrix<Scalar>::Zero(cfg.width, cfg.ff_dim());
            l.b1 = Vector<Scalar>::Zero(cfg.ff_dim());
            l.W2 = Matrix<Scalar>::Zero(cfg.ff_dim(), cfg.width);
            l.b2 = Vector<Scalar>::Zero(cfg.width);
        }
        s.lnf_g = Vector<Scalar>::Zero(cfg.width);
        s.lnf_b = Vector<Scalar>::Zero(cfg.width);
        return s;
    }

    // Visits every parameter tensor with a stable name; the same order is
    // used by the optimizer, gradient checks, and checkpoints.
    template <typename Fn>
    void for_each_param(Fn&& fn) {
        fn("in_proj", in_proj);
        for (size_t i = 0; i < layers.size(); ++i) {
            auto& l = layers[i];
            std::string p = "layer" + std::to_string(i) + ".";
            fn(p + "Wq", l.Wq);
            fn(p + "bq", l.bq);
            fn(p + "Wk", l.Wk);
            fn(p + "bk", l.bk);
            fn(p + "Wv", l.Wv);
            fn(p + "bv", l.bv);
            fn(p + "Wo", l.Wo);
            fn(p + "bo", l.bo);
            fn(p + "ln1_g", l.ln1_g);
            fn(p + "ln1_b", l.ln1_b);
            fn(p + "W1", l.W1);
            fn(p + "b1", l.b1);
            fn(p + "W2", l.W2);
            fn(p + "b2", l.b2);
            fn(p + "ln2_g", l.ln2_g);
            fn(p + "ln2_b", l.ln2_b);
        }
        fn("lnf_g", lnf_g);
        fn("lnf_b", lnf_b);
    }
};

namespace nn {

constexpr double kLayerNormEps = 1e-5;

template <typename Scalar>
Scalar gelu(Scalar x) {
    return Scalar(0.5) * x * (Scalar(1) + std::erf(x * Scalar(0.7071067811865475244)));
}

template <typename Scalar>
Scalar gelu_grad(Scalar x) {
    const Scalar inv_sqrt2 = Scalar(0.7071067811865475244);
    const Scalar inv_sqrt2pi = Scalar(0.3989422804014326779);
    Scalar cdf = Scalar(0.5) * (Scalar(1) + std::erf(x * inv_sqrt2));
    Scalar pdf = inv_sqrt2pi * std::exp(Scalar(-0.5) * x * x);
    return cdf + x * pdf;
}

// Sinusoidal position encodings, rows 0..n-1.
template <typename Scalar>
Matrix<Scalar> position_encoding(int n, int width) {
    Matrix<Scalar> pe(n, width);
    for (int pos = 0; pos < n; ++pos) {
        for (int i = 0; i < width; i += 2) {
            double angle = pos * std::exp(-std::log(10000.0) * double(i) / double(width));
            pe(pos, i) = Scalar(std::sin(angle));
            if (i + 1 < width) pe(pos, i + 1) = Scalar(std::cos(angle));
        }
    }
    return pe;
}

template <typename Scalar>
struct LayerNormCache {
    Matrix<Scalar> normalized;  // (x - mean) * inv_std, before scale/offset
    Vector<Scalar> inv_std;
};

template <typename Scalar>
Matrix<Scalar> layer_norm(const Matrix<Scalar>& x, const Vector<Scalar>& gamma,
                          const Vector<Scalar>& beta, LayerNormCache<Scalar>& cache) {
    const auto rows = x.rows();
    const auto cols = x.cols();
    cache.normalized.resize(rows, cols);
    cache.inv_std.resize(rows);
    Matrix<Scalar> out(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i) {
        Scalar mean = x.row(i).mean();
        Scalar var = (x.row(i).array() - mean).square().sum() / Scalar(cols);
        Scalar inv = Scalar(1) / std::sqrt(var + Scalar(kLayerNormEps));
        cache.inv_std(i) = inv;
        cache.normalized.row(i) = (x.row(i).array() - mean) * inv;
        out.row(i) =
            cache.normalized.row(i).cwiseProduct(gamma.transpose()) + beta.transpose();
    }
    return out;
}

template <typename Scalar>
Matrix<Scalar> layer_norm_backward(const Matrix<Scalar>& dout,
                                   const LayerNormCache<Scalar>& cache,
                                   const Vector<Scalar>& gamma, Vector<Scalar>& dgamma,
                                   Vector<Scalar>& dbeta) {
    const auto rows = dout.rows();
    const auto cols = dout.cols();
    Matrix<Scalar> dx(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i) {
        auto y = cache.normalized.row(i);
        dgamma += dout.row(i).cwiseProduct(y).transpose();
        dbeta += dout.row(i).transpose();
        Eigen::Matrix<Scalar, 1, Eigen::Dynamic> dy = dout.row(i).cwiseProduct(gamma.transpose());
        Scalar mean_dy = dy.mean();
        Scalar mean_dyy = dy.cwiseProduct(y).mean();
        dx.row(i) = (dy.array() - mean_dy - y.array() * mean_dyy) * cache.inv_std(i);
    }
    return dx;
}

}  // namespace nn

template <typename Scalar>
struct EncoderLayerCache {
    Matrix<Scalar> x_in;  // residual stream entering the block
    nn::LayerNormCache<Scalar> ln1, ln2;
    Matrix<Scalar> A;  // LN1 output
    Matrix<Scalar> Q, K, V;
    std::vector<Matrix<Scalar>> probs;  // per-head attention rows
    Matrix<Scalar> ctx;                 // concatenated head outputs
    Matrix<Scalar> x_mid;               // after attention residual
    Matrix<Scalar> B;                   // LN2 output
    Matrix<Scalar> U;                   // FFN pre-activation
    Matrix<Scalar> G;                   // gelu(U)
};

template <typename Scalar>
struct EncoderCache {
    std::vector<int32_t> ids;
    PaddingMask mask;
    Matrix<Scalar> emb_rows;  // N x embed_dim, gathered from the shared table
    Matrix<Scalar> x0;
    std::vector<EncoderLayerCache<Scalar>> layers;
    nn::LayerNormCache<Scalar> lnf;
    Matrix<Scalar> x_final;
};

// Forward pass over one sequence. `embeddings` is the shared token table
// (vocab_size x embed_dim). Returns hidden states (N x width); pad rows are
// zero-influence: nothing attends to them and they attend to nothing.
template <typename Scalar>
Matrix<Scalar> encoder_forward(const EncoderState<Scalar>& state,
                               const Matrix<Scalar>& embeddings,
                               const std::vector<int32_t>& ids, const PaddingMask& mask,
                               EncoderCache<Scalar>& cache) {
    const EncoderConfig& cfg = state.cfg;
    const int n = static_cast<int>(ids.size());
    if (n < 1) throw UsageError("encoder: empty sequence");
    if (n > cfg.max_len) throw UsageError("encoder: sequence longer than max_len");
    if (mask.size() != ids.size()) throw UsageError("encoder: mask length mismatch");
    for (int32_t id : ids) {
        if (id < 0 || id >= cfg.vocab_size) throw DataError("encoder: token id out of range");
    }

    cache.ids = ids;
    cache.mask = mask;
    cache.emb_rows.resize(n, cfg.embed_dim);
    for (int i = 0; i < n; ++i) cache.emb_rows.row(i) = embeddings.row(ids[static_cast<size_t>(i)]);

    cache.x0 = cache.emb_rows * state.in_proj + nn::position_encoding<Scalar>(n, cfg.width);

    const int dk = cfg.head_dim();
    const Scalar scale = Scalar(1) / std::sqrt(Scalar(dk));
    cache.layers.assign(static_cast<size_t>(cfg.layers), EncoderLayerCache<Scalar>{});

    Matrix<Scalar> x = cache.x0;
    for (int l = 0; l < cfg.layers; ++l) {
        auto& lc = cache.layers[static_cast<size_t>(l)];
        const auto& lp = state.layers[static_cast<size_t>(l)];
        lc.x_in = x;
        lc.A = nn::layer_norm(lc.x_in, lp.ln1_g, lp.ln1_b, lc.ln1);
        lc.Q = (lc.A * lp.Wq).rowwise() + lp.bq.transpose();
        lc.K = (lc.A * lp.Wk).rowwise() + lp.bk.transpose();
        lc.V = (lc.A * lp.Wv).rowwise() + lp.bv.transpose();
        lc.ctx.setZero(n, cfg.width);
        lc.probs.assign(static_cast<size_t>(cfg.heads), Matrix<Scalar>());
        for (int h = 0; h < cfg.heads; ++h) {
            auto Qh = lc.Q.block(0, h * dk, n, dk);
            auto Kh = lc.K.block(0, h * dk, n, dk);
            auto Vh = lc.V.block(0, h * dk, n, dk);
            Matrix<Scalar> scores = (Qh * Kh.transpose()) * scale;
            Matrix<Scalar>& probs = lc.probs[static_cast<size_t>(h)];
            probs.setZero(n, n);
            for (int i = 0; i < n; ++i) {
                if (mask.pad(static_cast<size_t>(i))) continue;  // pad attends to nothing
                Scalar row_max = -std::numeric_limits<Scalar>::infinity();
                for (int j = 0; j < n; ++j) {
                    if (!mask.pad(static_cast<size_t>(j)))
                        row_max = std::max(row_max, scores(i, j));
                }
                Scalar denom = Scalar(0);
                for (int j = 0; j < n; ++j) {
                    if (mask.pad(static_cast<size_t>(j))) continue;
                    Scalar e = std::exp(scores(i, j) - row_max);
                    probs(i, j) = e;
                    denom += e;
                }
                probs.row(i) /= denom;
            }
            lc.ctx.block(0, h * dk, n, dk) = probs * Vh;
        }
        Matrix<Scalar> attn_out = (lc.ctx * lp.Wo).rowwise() + lp.bo.transpose();
        lc.x_mid = lc.x_in + attn_out;
        lc.B = nn::layer_norm(lc.x_mid, lp.ln2_g, lp.ln2_b, lc.ln2);
        lc.U = (lc.B * lp.W1).rowwise() + lp.b1.transpose();
        lc.G = lc.U.unaryExpr([](Scalar v) { return nn::gelu(v); });
        Matrix<Scalar> ffn_out = (lc.G * lp.W2).rowwise() + lp.b2.transpose();
        x = lc.x_mid + ffn_out;
        if (!x.allFinite())
            throw NumericError("encoder: non-finite activations in layer " + std::to_string(l));
    }
    cache.x_final = x;
    Matrix<Scalar> h = nn::layer_norm(cache.x_final, state.lnf_g, state.lnf_b, cache.lnf);
    if (!h.allFinite()) throw NumericError("encoder: non-finite activations in final norm");
    return h;
}

// Backward pass. `dh` is the loss gradient at the hidden states. Parameter
// gradients accumulate into `grads` (same shape as the state); embedding-row
// gradients accumulate into `dembeddings` via the cached token ids.
template <typename Scalar>
void encoder_backward(const EncoderState<Scalar>& state, const EncoderCache<Scalar>& cache,
                      const Matrix<Scalar>& dh, EncoderState<Scalar>& grads,
                      Matrix<Scalar>& dembeddings) {
    const EncoderConfig& cfg = state.cfg;
    const int n = static_cast<int>(cache.ids.size());
    const int dk = cfg.head_dim();
    const Scalar scale = Scalar(1) / std::sqrt(Scalar(dk));

    Matrix<Scalar> dx = nn::layer_norm_backward(dh, cache.lnf, state.lnf_g, grads.lnf_g,
                                                grads.lnf_b);
    for (int l = cfg.layers - 1; l >= 0; --l) {
        const auto& lc = cache.layers[static_cast<size_t>(l)];
        const auto& lp = state.layers[static_cast<size_t>(l)];
        auto& lg = grads.layers[static_cast<size_t>(l)];

        // FFN sublayer: x = x_mid + gelu(LN2(x_mid) W1 + b1) W2 + b2
        const Matrix<Scalar>& dz = dx;
        lg.W2 += lc.G.transpose() * dz;
        lg.b2 += dz.colwise().sum().transpose();
        Matrix<Scalar> dg = dz * lp.W2.transpose();
        Matrix<Scalar> du =
            dg.binaryExpr(lc.U, [](Scalar g, Scalar u) { return g * nn::gelu_grad(u); });
        lg.W1 += lc.B.transpose() * du;
        lg.b1 += du.colwise().sum().transpose();
        Matrix<Scalar> db = du * lp.W1.transpose();
        Matrix<Scalar> dx_mid =
            dx + nn::layer_norm_backward(db, lc.ln2, lp.ln2_g, lg.ln2_g, lg.ln2_b);

        // Attention sublayer: x_mid = x_in + (heads(LN1(x_in)) Wo + bo)
        const Matrix<Scalar>& do_ = dx_mid;
        lg.Wo += lc.ctx.transpose() * do_;
        lg.bo += do_.colwise().sum().transpose();
        Matrix<Scalar> dctx = do_ * lp.Wo.transpose();

        Matrix<Scalar> dQ = Matrix<Scalar>::Zero(n, cfg.width);
        Matrix<Scalar> dK = Matrix<Scalar>::Zero(n, cfg.width);
        Matrix<Scalar> dV = Matrix<Scalar>::Zero(n, cfg.width);
        for (int h = 0; h < cfg.heads; ++h) {
            const Matrix<Scalar>& probs = lc.probs[static_cast<size_t>(h)];
            auto Qh = lc.Q.block(0, h * dk, n, dk);
            auto Kh = lc.K.block(0, h * dk, n, dk);
            auto Vh = lc.V.block(0, h * dk, n, dk);
            auto dCh = dctx.block(0, h * dk, n, dk);
            Matrix<Scalar> dP = dCh * Vh.transpose();
            dV.block(0, h * dk, n, dk) += probs.transpose() * dCh;
            // softmax rows: zero prob entries (pads) contribute nothing
            Matrix<Scalar> ds(n, n);
            for (int i = 0; i < n; ++i) {
                Scalar dot = dP.row(i).cwiseProduct(probs.row(i)).sum();
                ds.row(i) = probs.row(i).cwiseProduct((dP.row(i).array() - dot).matrix());
            }
            dQ.block(0, h * dk, n, dk) += (ds * Kh) * scale;
            dK.block(0, h * dk, n, dk) += (ds.transpose() * Qh) * scale;
        }
        lg.Wq += lc.A.transpose() * dQ;
        lg.bq += dQ.colwise().sum().transpose();
        lg.Wk += lc.A.transpose() * dK;
        lg.bk += dK.colwise().sum().transpose();
        lg.Wv += lc.A.transpose() * dV;
        lg.bv += dV.colwise().sum().transpose();
        Matrix<Scalar> dA = dQ * lp.Wq.transpose() + dK * lp.Wk.transpose() +
                            dV * lp.Wv.transpose();
        dx = dx_mid + nn::layer_norm_backward(dA, lc.ln1, lp.ln1_g, lg.ln1_g, lg.ln1_b);
    }

    grads.in_proj += cache.emb_rows.transpose() * dx;
    Matrix<Scalar> demb = dx * state.in_proj.transpose();
    for (int i = 0; i < n; ++i) {
        dembeddings.row(cache.ids[static_cast<size_t>(i)]) += demb.row(i);
    }
}

// Xavier-style initialization: projection weights from N(0, 2/(fan_in+fan_out)),
// layer norms at identity, biases zero.
template <typename Scalar>
EncoderState<Scalar> encoder_init(const EncoderConfig& cfg, Rng& rng) {
    EncoderState<Scalar> s = EncoderState<Scalar>::zeros(cfg);
    auto fill = [&rng](Matrix<Scalar>& m) {
        Scalar std_dev = std::sqrt(Scalar(2) / Scalar(m.rows() + m.cols()));
        for (Eigen::Index i = 0; i < m.rows(); ++i)
            for (Eigen::Index j = 0; j < m.cols(); ++j)
                m(i, j) = Scalar(rng.next_normal()) * std_dev;
    };
    fill(s.in_proj);
    for (auto& l : s.layers) {
        fill(l.Wq);
        fill(l.Wk);
        fill(l.Wv);
        fill(l.Wo);
        fill(l.W1);
        fill(l.W2);
        l.ln1_g.setOnes();
        l.ln2_g.setOnes();
    }
    s.lnf_g.setOnes();
    return s;
}

}  // namespace rtdlog
