#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "acmca/checkpoint.hpp"
#include "acmca/model.hpp"
#include "acmca/presets.hpp"
#include "testutil.hpp"

using namespace acmca;

namespace {

ModelConfig tiny_cfg() {
    ModelConfig cfg;
    cfg.feature_dim = 16;
    cfg.n_tokens = 4;
    cfg.token_dim = 4;
    cfg.encoder_layers = 2;
    cfg.encoder_hidden = 8;
    cfg.ffn_hidden = 8;
    return cfg;
}

InputWidths tiny_widths() { return InputWidths{7, 10, 12, 9}; }

ModalBatch random_batch(std::size_t b, const InputWidths& w, std::mt19937_64& rng) {
    ModalBatch batch;
    batch.clinical = rand_normal(Shape{b, w.clinical}, 0, 1, rng);
    batch.genetic = rand_normal(Shape{b, w.genetic}, 0, 1, rng);
    batch.mri = rand_normal(Shape{b, w.mri}, 0, 1, rng);
    batch.pet = rand_normal(Shape{b, w.pet}, 0, 1, rng);
    for (std::size_t i = 0; i < b; ++i) batch.labels.push_back(static_cast<int>(i % 3));
    return batch;
}

using Mat = std::vector<std::vector<double>>;

Mat tensor_rows(const Tensor& t, std::size_t rows, std::size_t cols, std::size_t offset = 0) {
    Mat m(rows, std::vector<double>(cols));
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c) m[r][c] = t.values()[offset + r * cols + c];
    return m;
}

Mat matmul_oracle(const Mat& a, const Mat& b) {
    Mat out(a.size(), std::vector<double>(b[0].size(), 0.0));
    for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t k = 0; k < b.size(); ++k)
            for (std::size_t j = 0; j < b[0].size(); ++j) out[i][j] += a[i][k] * b[k][j];
    return out;
}

// scalar-by-scalar evaluation of one cross-attention: queries from q_in,
// keys/values from kv_in, scores scaled by 1/sqrt(d), rows softmaxed
Mat attention_oracle(const Mat& q_in, const Mat& kv_in, const Mat& wq, const Mat& wk,
                     const Mat& wv) {
    const std::size_t d = wq.size();
    const Mat q = matmul_oracle(q_in, wq);
    const Mat k = matmul_oracle(kv_in, wk);
    const Mat v = matmul_oracle(kv_in, wv);
    Mat out(q.size(), std::vector<double>(d, 0.0));
    for (std::size_t i = 0; i < q.size(); ++i) {
        std::vector<double> score(k.size(), 0.0);
        for (std::size_t j = 0; j < k.size(); ++j) {
            for (std::size_t t = 0; t < d; ++t) score[j] += q[i][t] * k[j][t];
            score[j] /= std::sqrt(static_cast<double>(d));
        }
        double mx = score[0];
        for (double s : score) mx = std::max(mx, s);
        double z = 0;
        std::vector<double> w(k.size());
        for (std::size_t j = 0; j < k.size(); ++j) {
            w[j] = std::exp(score[j] - mx);
            z += w[j];
        }
        for (std::size_t j = 0; j < k.size(); ++j)
            for (std::size_t t = 0; t < d; ++t) out[i][t] += (w[j] / z) * v[j][t];
    }
    return out;
}

Tensor mat_tensor(const Mat& m) {
    std::vector<double> v;
    for (const auto& row : m)
        for (double x : row) v.push_back(x);
    return Tensor(Shape{m.size(), m[0].size()}, v);
}

Tensor token_tensor(const Mat& m) {  // (1, rows, cols)
    std::vector<double> v;
    for (const auto& row : m)
        for (double x : row) v.push_back(x);
    return Tensor(Shape{1, m.size(), m[0].size()}, v);
}

}  // namespace

// ---------------------------------------------------------------------------
// token layout

TEST(Tokenize, SquareLayoutAndRoundTrip) {
    ModelConfig cfg;
    cfg.feature_dim = 100;
    resolve_token_layout(cfg);
    EXPECT_EQ(cfg.n_tokens, 10u);
    EXPECT_EQ(cfg.token_dim, 10u);

    std::mt19937_64 rng(1);
    ModelParams mp = init_model(tiny_cfg(), variant_by_name("acmca"), tiny_widths(), 1);
    Tensor feat = rand_normal(Shape{2, 16}, 0, 1, rng);
    Graph g;
    Tensor tok = tokenize(g, feat, mp);
    ASSERT_EQ(tok.shape(), (Shape{2, 4, 4}));
    // subtract the position table and flatten back
    Tensor back = reshape(g, add(g, tok, scale(g, mp.pos_table, -1.0)), Shape{2, 16});
    for (std::size_t i = 0; i < feat.size(); ++i)
        EXPECT_NEAR(back.values()[i], feat.values()[i], 1e-12);
}

TEST(Tokenize, ZeroFeatureGivesPositionTable) {
    ModelParams mp = init_model(tiny_cfg(), variant_by_name("acmca"), tiny_widths(), 1);
    Graph g;
    Tensor tok = tokenize(g, Tensor::zeros(Shape{3, 16}), mp);
    for (std::size_t b = 0; b < 3; ++b)
        for (std::size_t t = 0; t < 4; ++t)
            for (std::size_t d = 0; d < 4; ++d)
                ASSERT_DOUBLE_EQ(tok.at({b, t, d}), mp.pos_table.at({t, d}));
}

TEST(Tokenize, IndivisibleDimensionIsConfigError) {
    ModelConfig cfg;
    cfg.feature_dim = 90;
    try {
        resolve_token_layout(cfg);
        FAIL() << "expected ConfigError";
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find("100"), std::string::npos) << e.what();
    }
    EXPECT_THROW(resolve_token_layout(cfg, 7), ConfigError);
    EXPECT_NO_THROW(resolve_token_layout(cfg, 10));  // 90 = 10 x 9 when explicit
    EXPECT_EQ(cfg.token_dim, 9u);
}

// ---------------------------------------------------------------------------
// fusion

TEST(FuseAsymmetric, MatchesScalarHandOracleOnTwoTokenInstance) {
    const Mat c = {{0.5, -1.0}, {1.5, 0.25}};
    const Mat gm = {{-0.75, 0.3}, {0.1, 1.2}};
    const Mat m = {{1.0, 2.0}, {-0.5, 0.75}};
    const Mat p = {{0.2, -0.4}, {1.1, 0.6}};
    const Mat wqc = {{0.3, -0.2}, {0.5, 0.7}};
    const Mat wkm = {{-0.4, 0.6}, {0.2, 0.1}};
    const Mat wvm = {{0.9, -0.3}, {0.4, 0.8}};
    const Mat wqg = {{0.1, 0.2}, {-0.6, 0.5}};
    const Mat wkp = {{0.7, -0.1}, {0.3, 0.2}};
    const Mat wvp = {{-0.2, 0.4}, {0.6, -0.5}};

    FusionParams fp;
    fp.w_qc = mat_tensor(wqc);
    fp.w_km = mat_tensor(wkm);
    fp.w_vm = mat_tensor(wvm);
    fp.w_qg = mat_tensor(wqg);
    fp.w_kp = mat_tensor(wkp);
    fp.w_vp = mat_tensor(wvp);

    Graph g;
    Tensor out = fuse_asymmetric(g, token_tensor(c), token_tensor(gm), token_tensor(m),
                                 token_tensor(p), fp);
    ASSERT_EQ(out.shape(), (Shape{1, 8, 2}));

    const Mat f_mc = attention_oracle(c, m, wqc, wkm, wvm);
    const Mat f_pg = attention_oracle(gm, p, wqg, wkp, wvp);
    // expected token order: [f_mc, c, f_pg, g]
    Mat expected;
    for (const auto& r : f_mc) expected.push_back(r);
    for (const auto& r : c) expected.push_back(r);
    for (const auto& r : f_pg) expected.push_back(r);
    for (const auto& r : gm) expected.push_back(r);
    for (std::size_t t = 0; t < 8; ++t)
        for (std::size_t d = 0; d < 2; ++d)
            EXPECT_NEAR(out.at({0, t, d}), expected[t][d], 1e-12) << "t=" << t << " d=" << d;
}

TEST(FuseAsymmetric, ZeroKeyWeightsGiveUniformAttention) {
    // w_km = 0 makes every key identical, so attention is uniform and the
    // attended rows equal the mean of the value rows
    const Mat m = {{1.0, 3.0}, {2.0, -1.0}};
    FusionParams fp;
    fp.w_qc = mat_tensor({{1, 0}, {0, 1}});
    fp.w_km = mat_tensor({{0, 0}, {0, 0}});
    fp.w_vm = mat_tensor({{1, 0}, {0, 1}});
    Graph g;
    Tensor c = token_tensor({{0.3, 0.4}, {-0.2, 0.9}});
    Tensor f = cross_attend(g, c, token_tensor(m), fp.w_qc, fp.w_km, fp.w_vm);
    for (std::size_t t = 0; t < 2; ++t) {
        EXPECT_NEAR(f.at({0, t, 0}), 1.5, 1e-12);
        EXPECT_NEAR(f.at({0, t, 1}), 1.0, 1e-12);
    }
}

TEST(FuseAsymmetric, ZeroQueryWeightsIgnoreQueryContent) {
    FusionParams fp;
    fp.w_qc = mat_tensor({{0, 0}, {0, 0}});
    fp.w_km = mat_tensor({{0.4, -0.2}, {0.7, 0.3}});
    fp.w_vm = mat_tensor({{0.5, 0.1}, {-0.3, 0.8}});
    const Mat m = {{1.0, 2.0}, {-0.5, 0.75}};
    Graph g;
    Tensor f1 = cross_attend(g, token_tensor({{5, -3}, {2, 8}}), token_tensor(m), fp.w_qc,
                             fp.w_km, fp.w_vm);
    Tensor f2 = cross_attend(g, token_tensor({{0, 0}, {-1, 1}}), token_tensor(m), fp.w_qc,
                             fp.w_km, fp.w_vm);
    for (std::size_t i = 0; i < f1.size(); ++i)
        EXPECT_NEAR(f1.values()[i], f2.values()[i], 1e-12);
}

TEST(CrossAttend, AttentionRowsAreStochastic) {
    // with identity values and one-hot key/value tokens the output rows are
    // exactly the attention rows
    std::mt19937_64 rng(9);
    Tensor q = rand_normal(Shape{1, 4, 4}, 0, 2, rng);
    Tensor eye = mat_tensor({{1, 0, 0, 0}, {0, 1, 0, 0}, {0, 0, 1, 0}, {0, 0, 0, 1}});
    Tensor kv = token_tensor({{1, 0, 0, 0}, {0, 1, 0, 0}, {0, 0, 1, 0}, {0, 0, 0, 1}});
    Tensor wk = rand_normal(Shape{4, 4}, 0, 1, rng);
    Graph g;
    Tensor out = cross_attend(g, q, kv, eye, wk, eye);
    for (std::size_t r = 0; r < 4; ++r) {
        double s = 0;
        for (std::size_t c = 0; c < 4; ++c) {
            const double a = out.at({0, r, c});
            EXPECT_GT(a, 0.0);
            s += a;
        }
        EXPECT_NEAR(s, 1.0, 1e-12);
    }
}

TEST(FuseSymmetric, TiedWeightsAndInputsGiveEqualDirections) {
    std::mt19937_64 rng(10);
    FusionParams fp;
    fp.w_qc = rand_normal(Shape{2, 2}, 0, 1, rng);
    fp.w_km = rand_normal(Shape{2, 2}, 0, 1, rng);
    fp.w_vm = rand_normal(Shape{2, 2}, 0, 1, rng);
    fp.w_qg = rand_normal(Shape{2, 2}, 0, 1, rng);
    fp.w_kp = rand_normal(Shape{2, 2}, 0, 1, rng);
    fp.w_vp = rand_normal(Shape{2, 2}, 0, 1, rng);
    fp.w_qm = fp.w_qc;  // tied reverse direction
    fp.w_kc = fp.w_km;
    fp.w_vc = fp.w_vm;
    fp.w_qp = fp.w_qg;
    fp.w_kg = fp.w_kp;
    fp.w_vg = fp.w_vp;

    Tensor c = rand_normal(Shape{1, 2, 2}, 0, 1, rng);
    Tensor gph = rand_normal(Shape{1, 2, 2}, 0, 1, rng);
    Graph g;
    Tensor out = fuse_symmetric(g, c, gph, c, gph, fp);  // m = c, p = g
    ASSERT_EQ(out.shape(), (Shape{1, 8, 2}));
    // token blocks: [f_mc, f_cm, f_pg, f_gp]; tied weights make 0==1, 2==3
    for (std::size_t t = 0; t < 2; ++t)
        for (std::size_t d = 0; d < 2; ++d) {
            EXPECT_NEAR(out.at({0, t, d}), out.at({0, t + 2, d}), 1e-12);
            EXPECT_NEAR(out.at({0, t + 4, d}), out.at({0, t + 6, d}), 1e-12);
        }
}

TEST(FuseSymmetric, MatchesHandOracle) {
    std::mt19937_64 rng(11);
    const auto rnd = [&] {
        Mat m(2, std::vector<double>(2));
        std::normal_distribution<double> nd(0, 1);
        for (auto& row : m)
            for (auto& v : row) v = nd(rng);
        return m;
    };
    const Mat c = rnd(), gm = rnd(), m = rnd(), p = rnd();
    const Mat wqc = rnd(), wkm = rnd(), wvm = rnd(), wqg = rnd(), wkp = rnd(), wvp = rnd();
    const Mat wqm = rnd(), wkc = rnd(), wvc = rnd(), wqp = rnd(), wkg = rnd(), wvg = rnd();
    FusionParams fp;
    fp.w_qc = mat_tensor(wqc);
    fp.w_km = mat_tensor(wkm);
    fp.w_vm = mat_tensor(wvm);
    fp.w_qg = mat_tensor(wqg);
    fp.w_kp = mat_tensor(wkp);
    fp.w_vp = mat_tensor(wvp);
    fp.w_qm = mat_tensor(wqm);
    fp.w_kc = mat_tensor(wkc);
    fp.w_vc = mat_tensor(wvc);
    fp.w_qp = mat_tensor(wqp);
    fp.w_kg = mat_tensor(wkg);
    fp.w_vg = mat_tensor(wvg);

    Graph g;
    Tensor out = fuse_symmetric(g, token_tensor(c), token_tensor(gm), token_tensor(m),
                                token_tensor(p), fp);
    Mat expected;
    for (const auto& r : attention_oracle(c, m, wqc, wkm, wvm)) expected.push_back(r);
    for (const auto& r : attention_oracle(m, c, wqm, wkc, wvc)) expected.push_back(r);
    for (const auto& r : attention_oracle(gm, p, wqg, wkp, wvp)) expected.push_back(r);
    for (const auto& r : attention_oracle(p, gm, wqp, wkg, wvg)) expected.push_back(r);
    for (std::size_t t = 0; t < 8; ++t)
        for (std::size_t d = 0; d < 2; ++d) EXPECT_NEAR(out.at({0, t, d}), expected[t][d], 1e-12);
}

TEST(FuseMcad, ShapeAndHandOracle) {
    std::mt19937_64 rng(12);
    const auto rnd = [&] {
        Mat m(2, std::vector<double>(2));
        std::normal_distribution<double> nd(0, 1);
        for (auto& row : m)
            for (auto& v : row) v = nd(rng);
        return m;
    };
    const Mat c = rnd(), gm = rnd(), m = rnd(), p = rnd();
    const Mat wq = rnd(), wk = rnd(), wv = rnd();
    FusionParams fp;
    fp.w_q = mat_tensor(wq);
    fp.w_k = mat_tensor(wk);
    fp.w_v = mat_tensor(wv);

    Graph g;
    Tensor out =
        fuse_mcad(g, token_tensor(c), token_tensor(gm), token_tensor(m), token_tensor(p), fp);
    ASSERT_EQ(out.shape(), (Shape{1, 8, 2}));  // 2nt attended + nt clinical + nt genetic

    Mat numerical = c, imaging = m;
    for (const auto& r : gm) numerical.push_back(r);
    for (const auto& r : p) imaging.push_back(r);
    Mat expected = attention_oracle(numerical, imaging, wq, wk, wv);  // (4,2)
    for (const auto& r : c) expected.push_back(r);
    for (const auto& r : gm) expected.push_back(r);
    for (std::size_t t = 0; t < 8; ++t)
        for (std::size_t d = 0; d < 2; ++d) EXPECT_NEAR(out.at({0, t, d}), expected[t][d], 1e-12);
}

// ---------------------------------------------------------------------------
// deep extraction

TEST(DeepExtract, NoneIsIdentity) {
    std::mt19937_64 rng(13);
    ModelParams mp = init_model(tiny_cfg(), variant_by_name("acmca-wde"), tiny_widths(), 3);
    Tensor x = rand_normal(Shape{2, 6, 4}, 0, 1, rng);
    Graph g;
    Tensor y = deep_extract(g, x, mp.deep, DeepMode::none);
    EXPECT_EQ(y.values(), x.values());
}

TEST(DeepExtract, SingleBranchesPreserveShape) {
    std::mt19937_64 rng(14);
    ModelParams att = init_model(tiny_cfg(), variant_by_name("acmca-wfnet"), tiny_widths(), 3);
    ModelParams fno = init_model(tiny_cfg(), variant_by_name("acmca-wt"), tiny_widths(), 3);
    Tensor x = rand_normal(Shape{2, 8, 4}, 0, 1, rng);
    Graph g;
    Tensor ya = deep_extract(g, x, att.deep, DeepMode::attention_only);
    Tensor yf = deep_extract(g, x, fno.deep, DeepMode::fourier_only);
    EXPECT_EQ(ya.shape(), x.shape());
    EXPECT_EQ(yf.shape(), x.shape());
    for (double v : ya.values()) ASSERT_TRUE(std::isfinite(v));
    for (double v : yf.values()) ASSERT_TRUE(std::isfinite(v));
}

TEST(DeepExtract, ParallelMergesBothBranches) {
    std::mt19937_64 rng(15);
    ModelParams mp = init_model(tiny_cfg(), variant_by_name("acmca"), tiny_widths(), 3);
    Tensor x = Tensor::full(Shape{1, 4, 4}, 1.0);
    Graph g;
    Tensor y = deep_extract(g, x, mp.deep, DeepMode::parallel);
    EXPECT_EQ(y.shape(), x.shape());
    for (double v : y.values()) ASSERT_TRUE(std::isfinite(v));

    ModelConfig cfg = tiny_cfg();
    cfg.merge = MergeMode::concat_project;
    ModelParams mp2 = init_model(cfg, variant_by_name("acmca"), tiny_widths(), 3);
    Tensor y2 = deep_extract(g, x, mp2.deep, DeepMode::parallel, MergeMode::concat_project);
    EXPECT_EQ(y2.shape(), x.shape());
}

// ---------------------------------------------------------------------------
// classifier

TEST(Classify, ZeroWeightsGiveUniformPosterior) {
    ClassifierParams cp;
    cp.layers.push_back({Tensor::zeros(Shape{4, 8}, true), Tensor::zeros(Shape{8}, true)});
    cp.layers.push_back({Tensor::zeros(Shape{8, 8}, true), Tensor::zeros(Shape{8}, true)});
    cp.layers.push_back({Tensor::zeros(Shape{8, 4}, true), Tensor::zeros(Shape{4}, true)});
    cp.layers.push_back({Tensor::zeros(Shape{4, 3}, true), Tensor::zeros(Shape{3}, true)});
    Graph g;
    Tensor tokens = Tensor::full(Shape{2, 2, 2}, 1.0);
    Tensor logits = classify(g, tokens, cp);
    ASSERT_EQ(logits.shape(), (Shape{2, 3}));
    for (double v : logits.values()) EXPECT_DOUBLE_EQ(v, 0.0);
    Tensor post = softmax(g, logits, 1);
    for (double v : post.values()) EXPECT_NEAR(v, 1.0 / 3.0, 1e-12);
}

TEST(Classify, IdentityLayersReproduceHandMatrixProduct) {
    const Mat eye = {{1, 0, 0, 0}, {0, 1, 0, 0}, {0, 0, 1, 0}, {0, 0, 0, 1}};
    const Mat w = {{0.2, -0.1, 0.5}, {0.7, 0.3, -0.2}, {0.1, 0.9, 0.4}, {-0.3, 0.2, 0.6}};
    ClassifierParams cp;
    for (int l = 0; l < 3; ++l)
        cp.layers.push_back({mat_tensor(eye), Tensor::zeros(Shape{4})});
    cp.layers.push_back({mat_tensor(w), Tensor::zeros(Shape{3})});

    const Mat x = {{0.5, 1.0, 0.25, 2.0}};  // positive, so relu passes it through
    Graph g;
    Tensor logits = classify(g, token_tensor({{0.5, 1.0}, {0.25, 2.0}}), cp);
    const Mat expected = matmul_oracle(x, w);
    for (std::size_t j = 0; j < 3; ++j) EXPECT_NEAR(logits.at({0, j}), expected[0][j], 1e-12);
}

TEST(Classify, GradientThroughAllFourLayers) {
    std::mt19937_64 rng(16);
    ClassifierParams cp;
    cp.layers.push_back({rand_normal(Shape{4, 6}, 0, 0.5, rng, true),
                         rand_normal(Shape{6}, 0, 0.1, rng, true)});
    cp.layers.push_back({rand_normal(Shape{6, 5}, 0, 0.5, rng, true),
                         rand_normal(Shape{5}, 0, 0.1, rng, true)});
    cp.layers.push_back({rand_normal(Shape{5, 4}, 0, 0.5, rng, true),
                         rand_normal(Shape{4}, 0, 0.1, rng, true)});
    cp.layers.push_back({rand_normal(Shape{4, 3}, 0, 0.5, rng, true),
                         rand_normal(Shape{3}, 0, 0.1, rng, true)});
    Tensor tokens = rand_normal(Shape{2, 2, 2}, 0, 1, rng);
    std::vector<Tensor> leaves;
    for (auto& l : cp.layers) {
        leaves.push_back(l.w);
        leaves.push_back(l.b);
    }
    auto r = testutil::check_gradients(
        leaves, [&](Graph& g) { return mean(g, classify(g, tokens, cp)); }, 1e-4);
    EXPECT_TRUE(r.ok) << r.detail;
}

TEST(Classify, WidthMismatchIsConfigError) {
    ClassifierParams cp;
    cp.layers.push_back({Tensor::zeros(Shape{8, 3}, true), Tensor::zeros(Shape{3}, true)});
    Graph g;
    EXPECT_THROW(classify(g, Tensor::zeros(Shape{1, 2, 2}), cp), ConfigError);
}

// ---------------------------------------------------------------------------
// whole-model forward

TEST(Forward, FullModelGivesFiniteLogits) {
    std::mt19937_64 rng(17);
    ModelParams mp = init_model(tiny_cfg(), variant_by_name("acmca"), tiny_widths(), 5);
    ModalBatch batch = random_batch(2, tiny_widths(), rng);
    Graph g;
    Tensor logits = model_forward(g, batch, mp);
    ASSERT_EQ(logits.shape(), (Shape{2, 3}));
    for (double v : logits.values()) EXPECT_TRUE(std::isfinite(v));
}

TEST(Forward, EveryRegisteredVariantRuns) {
    std::mt19937_64 rng(18);
    for (const auto& name : variant_names()) {
        ModelParams mp = init_model(tiny_cfg(), variant_by_name(name), tiny_widths(), 5);
        ModalBatch batch = random_batch(3, tiny_widths(), rng);
        Graph g;
        Tensor logits = model_forward(g, batch, mp);
        ASSERT_EQ(logits.shape(), (Shape{3, 3})) << name;
        for (double v : logits.values()) ASSERT_TRUE(std::isfinite(v)) << name;
    }
}

TEST(Forward, DeepNoneEqualsFusionStraightToClassifier) {
    std::mt19937_64 rng(19);
    ModelParams mp = init_model(tiny_cfg(), variant_by_name("acmca-wde"), tiny_widths(), 5);
    ModalBatch batch = random_batch(2, tiny_widths(), rng);
    Graph g;
    Tensor via_model = model_forward(g, batch, mp);

    auto feats = encode_modalities(g, batch, mp);
    Tensor fused = fuse_asymmetric(
        g, tokenize(g, *feats[0], mp), tokenize(g, *feats[1], mp), tokenize(g, *feats[2], mp),
        tokenize(g, *feats[3], mp), mp.fusion);
    Tensor direct = classify(g, fused, mp.classifier);
    for (std::size_t i = 0; i < via_model.size(); ++i)
        EXPECT_DOUBLE_EQ(via_model.values()[i], direct.values()[i]);
}

TEST(Forward, PermutationEquivariantAcrossBatch) {
    std::mt19937_64 rng(20);
    ModelParams mp = init_model(tiny_cfg(), variant_by_name("acmca"), tiny_widths(), 6);
    ModalBatch batch = random_batch(3, tiny_widths(), rng);
    Graph g;
    Tensor base = model_forward(g, batch, mp);

    const std::vector<std::size_t> perm{2, 0, 1};
    auto permute_rows = [&](const Tensor& t) {
        const std::size_t w = t.dim(1);
        std::vector<double> v(t.size());
        for (std::size_t r = 0; r < 3; ++r)
            for (std::size_t c = 0; c < w; ++c)
                v[r * w + c] = t.at({perm[r], c});
        return Tensor(Shape{3, w}, v);
    };
    ModalBatch shuffled;
    shuffled.clinical = permute_rows(batch.clinical);
    shuffled.genetic = permute_rows(batch.genetic);
    shuffled.mri = permute_rows(batch.mri);
    shuffled.pet = permute_rows(batch.pet);
    for (auto i : perm) shuffled.labels.push_back(batch.labels[i]);

    Tensor permuted = model_forward(g, shuffled, mp);
    for (std::size_t r = 0; r < 3; ++r)
        for (std::size_t c = 0; c < 3; ++c)
            EXPECT_NEAR(permuted.at({r, c}), base.at({perm[r], c}), 1e-12);
}

TEST(Forward, EncoderWidthMismatchNamesModality) {
    std::mt19937_64 rng(21);
    ModelParams mp = init_model(tiny_cfg(), variant_by_name("acmca"), tiny_widths(), 6);
    ModalBatch batch = random_batch(2, tiny_widths(), rng);
    batch.genetic = rand_normal(Shape{2, 5}, 0, 1, rng);  // wrong width
    Graph g;
    try {
        model_forward(g, batch, mp);
        FAIL() << "expected ConfigError";
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find("genetic"), std::string::npos) << e.what();
    }
}

TEST(Variants, InvalidCombinationsRejected) {
    VariantSpec bad;
    bad.mask = ModalityMask::parse("clinical,pet");
    bad.fusion = FusionMode::asymmetric;
    EXPECT_THROW(validate_variant(bad), ConfigError);

    VariantSpec sym;
    sym.mask = ModalityMask::parse("clinical,mri");
    sym.fusion = FusionMode::symmetric;
    EXPECT_THROW(validate_variant(sym), ConfigError);

    EXPECT_THROW(ModalityMask::parse("sound"), ConfigError);
    EXPECT_THROW(variant_by_name("nope"), ConfigError);
}

TEST(Variants, ParamSetMatchesActiveBlocks) {
    auto names_of = [](const ModelParams& mp) {
        std::vector<std::string> out;
        for (auto& [n, t] : named_params(mp)) out.push_back(n);
        return out;
    };
    ModelParams full = init_model(tiny_cfg(), variant_by_name("acmca"), tiny_widths(), 1);
    ModelParams wfnet = init_model(tiny_cfg(), variant_by_name("acmca-wfnet"), tiny_widths(), 1);
    ModelParams wde = init_model(tiny_cfg(), variant_by_name("acmca-wde"), tiny_widths(), 1);

    const auto full_names = names_of(full);
    const auto wfnet_names = names_of(wfnet);
    const auto wde_names = names_of(wde);
    auto has_prefix = [](const std::vector<std::string>& names, const std::string& p) {
        for (const auto& n : names)
            if (n.rfind(p, 0) == 0) return true;
        return false;
    };
    EXPECT_TRUE(has_prefix(full_names, "deep.fnet."));
    EXPECT_FALSE(has_prefix(wfnet_names, "deep.fnet."));  // fourier branch masked
    EXPECT_TRUE(has_prefix(wfnet_names, "deep.attn."));
    EXPECT_FALSE(has_prefix(wde_names, "deep."));
    EXPECT_TRUE(has_prefix(wde_names, "fuse."));
}

// ---------------------------------------------------------------------------
// end-to-end gradients (spot checks; the acceptance suite covers all variants)

TEST(Forward, EndToEndGradientSpotCheck) {
    std::mt19937_64 rng(22);
    for (const auto& name : {"acmca", "acmca-wcm"}) {
        ModelParams mp = init_model(tiny_cfg(), variant_by_name(name), tiny_widths(), 7);
        ModalBatch batch = random_batch(2, tiny_widths(), rng);
        auto leaves = param_tensors(mp);
        auto r = testutil::check_gradients(
            leaves,
            [&](Graph& g) {
                Tensor logits = model_forward(g, batch, mp);
                return cross_entropy(g, logits, batch.labels);
            },
            1e-3, 1e-6, 2, &rng);
        EXPECT_TRUE(r.ok) << name << ": " << r.detail;
    }
}

// ---------------------------------------------------------------------------
// checkpointing

TEST(Checkpoint, RoundTripPreservesParametersAndForward) {
    std::mt19937_64 rng(23);
    ModelParams mp = init_model(tiny_cfg(), variant_by_name("acmca-cm"), tiny_widths(), 9);
    const std::string path = testing::TempDir() + "acmca_ckpt_test.json";
    save_checkpoint(path, mp);
    ModelParams back = load_checkpoint(path);

    auto a = named_params(mp);
    auto b = named_params(back);
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        EXPECT_EQ(a[i].first, b[i].first);
        ASSERT_EQ(a[i].second.values(), b[i].second.values()) << a[i].first;
    }

    ModalBatch batch = random_batch(2, tiny_widths(), rng);
    Graph g;
    Tensor l1 = model_forward(g, batch, mp);
    Tensor l2 = model_forward(g, batch, back);
    EXPECT_EQ(l1.values(), l2.values());
}

TEST(Checkpoint, RejectsWrongVersionAndMissingParams) {
    ModelParams mp = init_model(tiny_cfg(), variant_by_name("acmca"), tiny_widths(), 9);
    nlohmann::json j = checkpoint_to_json(mp);
    j["format_version"] = 99;
    EXPECT_THROW(checkpoint_from_json(j), DataError);

    nlohmann::json j2 = checkpoint_to_json(mp);
    j2["params"].erase("head.0.w");
    EXPECT_THROW(checkpoint_from_json(j2), DataError);

    nlohmann::json j3 = checkpoint_to_json(mp);
    j3["params"]["head.0.w"]["shape"] = {1, 1};
    EXPECT_THROW(checkpoint_from_json(j3), DataError);
}

TEST(PositionTable, StandardSinusoid) {
    Tensor pe = build_position_table(4, 6);
    for (std::size_t pos = 0; pos < 4; ++pos)
        for (std::size_t i = 0; i < 6; ++i) {
            const double expo = static_cast<double>(2 * (i / 2)) / 6.0;
            const double ang = static_cast<double>(pos) / std::pow(10000.0, expo);
            const double want = i % 2 == 0 ? std::sin(ang) : std::cos(ang);
            EXPECT_NEAR(pe.at({pos, i}), want, 1e-15);
        }
}
