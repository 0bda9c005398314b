#include <cmath>

#include "catch_amalgamated.hpp"
#include "rtdlog/encoder.hpp"
#include "rtdlog/rng.hpp"

using namespace rtdlog;

namespace {

EncoderConfig tiny_config() {
    EncoderConfig cfg;
    cfg.layers = 2;
    cfg.width = 16;
    cfg.heads = 2;
    cfg.ff_mult = 2;
    cfg.max_len = 16;
    cfg.vocab_size = 12;
    cfg.embed_dim = 16;
    return cfg;
}

template <typename Scalar>
Matrix<Scalar> random_embeddings(int vocab, int dim, uint64_t seed) {
    Rng rng(seed);
    Matrix<Scalar> e(vocab, dim);
    for (Eigen::Index i = 0; i < e.rows(); ++i)
        for (Eigen::Index j = 0; j < e.cols(); ++j) e(i, j) = Scalar(rng.next_normal() * 0.1);
    return e;
}

}  // namespace

TEST_CASE("init is deterministic per seed") {
    auto cfg = tiny_config();
    Rng r1(7), r2(7), r3(8);
    auto a = encoder_init<double>(cfg, r1);
    auto b = encoder_init<double>(cfg, r2);
    auto c = encoder_init<double>(cfg, r3);
    CHECK((a.in_proj.array() == b.in_proj.array()).all());
    CHECK((a.layers[0].Wq.array() == b.layers[0].Wq.array()).all());
    CHECK((a.layers[1].W2.array() == b.layers[1].W2.array()).all());
    CHECK(!(a.in_proj.array() == c.in_proj.array()).all());
}

TEST_CASE("forward is deterministic and finite") {
    auto cfg = tiny_config();
    Rng rng(3);
    auto state = encoder_init<double>(cfg, rng);
    auto emb = random_embeddings<double>(cfg.vocab_size, cfg.embed_dim, 4);
    std::vector<int32_t> ids = {1, 5, 3, 3, 7};
    auto mask = PaddingMask::none(ids.size());
    EncoderCache<double> c1, c2;
    auto h1 = encoder_forward(state, emb, ids, mask, c1);
    auto h2 = encoder_forward(state, emb, ids, mask, c2);
    CHECK((h1.array() == h2.array()).all());
    CHECK(h1.allFinite());
    CHECK(h1.rows() == 5);
    CHECK(h1.cols() == cfg.width);
}

// Width-2 single-layer single-head model evaluated by hand. With one token,
// attention reduces to the value vector of that position.
TEST_CASE("one-token forward matches a hand computation") {
    EncoderConfig cfg;
    cfg.layers = 1;
    cfg.width = 2;
    cfg.heads = 1;
    cfg.ff_mult = 2;
    cfg.max_len = 4;
    cfg.vocab_size = 3;
    cfg.embed_dim = 2;
    auto state = EncoderState<double>::zeros(cfg);
    state.in_proj << 1, 0, 0, 1;
    auto& l = state.layers[0];
    l.ln1_g << 1, 1;
    l.ln2_g << 1, 1;
    state.lnf_g << 1, 1;
    l.Wv << 0.5, -0.1, 0.2, 0.4;
    l.bv << 0.01, -0.02;
    l.Wo << 1, 0.3, -0.2, 1;
    l.bo << 0, 0.05;
    l.W1 << 0.3, -0.2, 0.1, 0.4, -0.5, 0.2, 0.6, -0.1;
    l.b1 << 0.02, -0.01, 0.03, 0.0;
    l.W2 << 0.2, -0.3, 0.5, 0.1, -0.4, 0.2, 0.3, 0.6;
    l.b2 << -0.05, 0.1;

    Matrix<double> emb = Matrix<double>::Zero(3, 2);
    emb.row(1) << 0.3, -0.2;

    EncoderCache<double> cache;
    auto h = encoder_forward(state, emb, {1}, PaddingMask::none(1), cache);

    // By hand. Position 0 adds (sin 0, cos 0) = (0, 1).
    double x0 = 0.3, x1 = -0.2 + 1.0;
    auto ln = [](double& a, double& b) {
        double mean = 0.5 * (a + b);
        double var = 0.5 * ((a - mean) * (a - mean) + (b - mean) * (b - mean));
        double inv = 1.0 / std::sqrt(var + 1e-5);
        double na = (a - mean) * inv, nb = (b - mean) * inv;
        a = na;
        b = nb;
    };
    double a0 = x0, a1 = x1;
    ln(a0, a1);
    // One position: attention output is just v = a Wv + bv, then Wo + bo.
    double v0 = a0 * 0.5 + a1 * 0.2 + 0.01;
    double v1 = a0 * -0.1 + a1 * 0.4 - 0.02;
    double o0 = v0 * 1.0 + v1 * -0.2 + 0.0;
    double o1 = v0 * 0.3 + v1 * 1.0 + 0.05;
    double m0 = x0 + o0, m1 = x1 + o1;
    double b0 = m0, b1 = m1;
    ln(b0, b1);
    auto gelu = [](double u) { return 0.5 * u * (1.0 + std::erf(u / std::sqrt(2.0))); };
    double u0 = gelu(b0 * 0.3 + b1 * -0.5 + 0.02);
    double u1 = gelu(b0 * -0.2 + b1 * 0.2 - 0.01);
    double u2 = gelu(b0 * 0.1 + b1 * 0.6 + 0.03);
    double u3 = gelu(b0 * 0.4 + b1 * -0.1 + 0.0);
    double z0 = u0 * 0.2 + u1 * 0.5 + u2 * -0.4 + u3 * 0.3 - 0.05;
    double z1 = u0 * -0.3 + u1 * 0.1 + u2 * 0.2 + u3 * 0.6 + 0.1;
    double f0 = m0 + z0, f1 = m1 + z1;
    ln(f0, f1);

    CHECK(h(0, 0) == Catch::Approx(f0).epsilon(1e-12));
    CHECK(h(0, 1) == Catch::Approx(f1).epsilon(1e-12));
}

TEST_CASE("attention rows are probability vectors over non-pad positions") {
    auto cfg = tiny_config();
    Rng rng(11);
    auto state = encoder_init<double>(cfg, rng);
    auto emb = random_embeddings<double>(cfg.vocab_size, cfg.embed_dim, 12);
    std::vector<int32_t> ids = {1, 2, 3, 4, 0, 0};
    PaddingMask mask{{0, 0, 0, 0, 1, 1}};
    EncoderCache<double> cache;
    encoder_forward(state, emb, ids, mask, cache);
    for (const auto& layer : cache.layers) {
        for (const auto& probs : layer.probs) {
            for (int i = 0; i < probs.rows(); ++i) {
                if (mask.pad(static_cast<size_t>(i))) {
                    CHECK(probs.row(i).cwiseAbs().sum() == 0.0);
                    continue;
                }
                double sum = 0.0;
                for (int j = 0; j < probs.cols(); ++j) {
                    CHECK(probs(i, j) >= 0.0);
                    if (mask.pad(static_cast<size_t>(j))) CHECK(probs(i, j) == 0.0);
                    sum += probs(i, j);
                }
                CHECK(sum == Catch::Approx(1.0).margin(1e-6));
            }
        }
    }
}

TEST_CASE("layer norm output has zero mean and unit variance before scale") {
    Rng rng(5);
    Matrix<double> x(6, 32);
    for (Eigen::Index i = 0; i < x.rows(); ++i)
        for (Eigen::Index j = 0; j < x.cols(); ++j) x(i, j) = rng.next_normal() * 3.0 + 1.0;
    Vector<double> g = Vector<double>::Ones(32), b = Vector<double>::Zero(32);
    nn::LayerNormCache<double> cache;
    nn::layer_norm(x, g, b, cache);
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        double mean = cache.normalized.row(i).mean();
        double var = (cache.normalized.row(i).array() - mean).square().sum() / 32.0;
        CHECK(std::fabs(mean) < 1e-5);
        CHECK(std::fabs(var - 1.0) < 1e-5);
    }
}

TEST_CASE("pad positions cannot influence non-pad outputs") {
    auto cfg = tiny_config();
    Rng rng(21);
    auto state = encoder_init<double>(cfg, rng);
    auto emb = random_embeddings<double>(cfg.vocab_size, cfg.embed_dim, 22);
    std::vector<int32_t> ids_a = {1, 2, 3, 0, 0};
    std::vector<int32_t> ids_b = {1, 2, 3, 7, 9};  // pads swapped for other tokens
    PaddingMask mask{{0, 0, 0, 1, 1}};
    EncoderCache<double> ca, cb;
    auto ha = encoder_forward(state, emb, ids_a, mask, ca);
    auto hb = encoder_forward(state, emb, ids_b, mask, cb);
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < cfg.width; ++j)
            CHECK(std::fabs(ha(i, j) - hb(i, j)) <= 1e-12);
}

TEST_CASE("zero adjoint gives zero gradients") {
    auto cfg = tiny_config();
    Rng rng(31);
    auto state = encoder_init<double>(cfg, rng);
    auto emb = random_embeddings<double>(cfg.vocab_size, cfg.embed_dim, 32);
    std::vector<int32_t> ids = {1, 2, 3};
    auto mask = PaddingMask::none(3);
    EncoderCache<double> cache;
    auto h = encoder_forward(state, emb, ids, mask, cache);
    auto grads = EncoderState<double>::zeros(cfg);
    Matrix<double> demb = Matrix<double>::Zero(cfg.vocab_size, cfg.embed_dim);
    encoder_backward(state, cache, Matrix<double>::Zero(h.rows(), h.cols()), grads, demb);
    grads.for_each_param([](const std::string&, auto& t) { CHECK(t.cwiseAbs().sum() == 0.0); });
    CHECK(demb.cwiseAbs().sum() == 0.0);
}

TEST_CASE("gradients accumulate additively across sequences") {
    auto cfg = tiny_config();
    Rng rng(41);
    auto state = encoder_init<double>(cfg, rng);
    auto emb = random_embeddings<double>(cfg.vocab_size, cfg.embed_dim, 42);
    std::vector<int32_t> ids_a = {1, 2, 3}, ids_b = {4, 5};
    Rng adj_rng(43);
    auto make_adjoint = [&](int n) {
        Matrix<double> d(n, cfg.width);
        for (Eigen::Index i = 0; i < d.rows(); ++i)
            for (Eigen::Index j = 0; j < d.cols(); ++j) d(i, j) = adj_rng.next_normal();
        return d;
    };
    auto da = make_adjoint(3), db = make_adjoint(2);

    auto ga = EncoderState<double>::zeros(cfg);
    auto gb = EncoderState<double>::zeros(cfg);
    auto gsum = EncoderState<double>::zeros(cfg);
    Matrix<double> ea = Matrix<double>::Zero(cfg.vocab_size, cfg.embed_dim), eb = ea, esum = ea;

    EncoderCache<double> c;
    encoder_forward(state, emb, ids_a, PaddingMask::none(3), c);
    encoder_backward(state, c, da, ga, ea);
    encoder_forward(state, emb, ids_b, PaddingMask::none(2), c);
    encoder_backward(state, c, db, gb, eb);

    encoder_forward(state, emb, ids_a, PaddingMask::none(3), c);
    encoder_backward(state, c, da, gsum, esum);
    encoder_forward(state, emb, ids_b, PaddingMask::none(2), c);
    encoder_backward(state, c, db, gsum, esum);

    CHECK((gsum.in_proj - (ga.in_proj + gb.in_proj)).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((gsum.layers[0].W1 - (ga.layers[0].W1 + gb.layers[0].W1)).cwiseAbs().maxCoeff() <
          1e-12);
    CHECK((esum - (ea + eb)).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("invalid inputs are rejected") {
    auto cfg = tiny_config();
    Rng rng(51);
    auto state = encoder_init<double>(cfg, rng);
    auto emb = random_embeddings<double>(cfg.vocab_size, cfg.embed_dim, 52);
    EncoderCache<double> cache;
    CHECK_THROWS_AS(encoder_forward(state, emb, {}, PaddingMask::none(0), cache), UsageError);
    CHECK_THROWS_AS(encoder_forward(state, emb, {99}, PaddingMask::none(1), cache), DataError);
    CHECK_THROWS_AS(encoder_forward(state, emb, {1, 2}, PaddingMask::none(3), cache),
                    UsageError);
    EncoderConfig bad = cfg;
    bad.width = 15;  // not divisible by heads
    CHECK_THROWS_AS(bad.validate(), UsageError);
}

TEST_CASE("non-finite activations raise a numeric error naming the layer") {
    auto cfg = tiny_config();
    Rng rng(61);
    auto state = encoder_init<double>(cfg, rng);
    state.layers[1].W2(0, 0) = std::numeric_limits<double>::quiet_NaN();
    auto emb = random_embeddings<double>(cfg.vocab_size, cfg.embed_dim, 62);
    EncoderCache<double> cache;
    CHECK_THROWS_WITH(encoder_forward(state, emb, {1, 2}, PaddingMask::none(2), cache),
                      Catch::Matchers::ContainsSubstring("layer 1"));
}
