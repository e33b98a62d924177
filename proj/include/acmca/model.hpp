#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "acmca/data.hpp"
#include "acmca/error.hpp"
#include "acmca/fft.hpp"
#include "acmca/tensor.hpp"

namespace acmca {

// ---------------------------------------------------------------------------
// variants

enum class Modality : std::size_t { clinical = 0, genetic = 1, mri = 2, pet = 3 };

inline constexpr std::array<const char*, 4> kModalityNames{"clinical", "genetic", "mri", "pet"};

struct ModalityMask {
    std::array<bool, 4> active{true, true, true, true};

    bool at(Modality m) const { return active[static_cast<std::size_t>(m)]; }
    bool& at(Modality m) { return active[static_cast<std::size_t>(m)]; }
    std::size_t count() const {
        std::size_t n = 0;
        for (bool b : active) n += b;
        return n;
    }
    bool all() const { return count() == 4; }
    bool operator==(const ModalityMask&) const = default;

    std::string str() const {
        std::string s;
        for (std::size_t i = 0; i < 4; ++i)
            if (active[i]) {
                if (!s.empty()) s += '+';
                s += kModalityNames[i];
            }
        return s;
    }

    static ModalityMask none() { return ModalityMask{{false, false, false, false}}; }
    static ModalityMask only(Modality m) {
        ModalityMask k = none();
        k.at(m) = true;
        return k;
    }
    static ModalityMask parse(const std::string& spec) {
        ModalityMask k = none();
        for (const auto& tok : split(spec, ',')) {
            const std::string t = strip(tok);
            bool found = false;
            for (std::size_t i = 0; i < 4; ++i)
                if (t == kModalityNames[i] ||
                    (t.size() == 1 && t[0] == "cgmp"[i])) {
                    k.active[i] = true;
                    found = true;
                }
            if (!found) throw ConfigError("unknown modality \"" + t + "\"");
        }
        if (k.count() == 0) throw ConfigError("modality mask is empty");
        return k;
    }
};

enum class FusionMode { asymmetric, symmetric, mcad, none };
enum class DeepMode { parallel, fourier_only, attention_only, none };
enum class MergeMode { sum, concat_project };

inline const char* to_string(FusionMode m) {
    switch (m) {
        case FusionMode::asymmetric: return "asymmetric";
        case FusionMode::symmetric: return "symmetric";
        case FusionMode::mcad: return "mcad";
        case FusionMode::none: return "none";
    }
    return "?";
}
inline const char* to_string(DeepMode m) {
    switch (m) {
        case DeepMode::parallel: return "parallel";
        case DeepMode::fourier_only: return "fourier-only";
        case DeepMode::attention_only: return "attention-only";
        case DeepMode::none: return "none";
    }
    return "?";
}
inline const char* to_string(MergeMode m) {
    return m == MergeMode::sum ? "sum" : "concat-project";
}

inline FusionMode fusion_mode_from(const std::string& s) {
    if (s == "asymmetric") return FusionMode::asymmetric;
    if (s == "symmetric") return FusionMode::symmetric;
    if (s == "mcad") return FusionMode::mcad;
    if (s == "none") return FusionMode::none;
    throw ConfigError("unknown fusion mode \"" + s + "\"");
}
inline DeepMode deep_mode_from(const std::string& s) {
    if (s == "parallel") return DeepMode::parallel;
    if (s == "fourier-only") return DeepMode::fourier_only;
    if (s == "attention-only") return DeepMode::attention_only;
    if (s == "none") return DeepMode::none;
    throw ConfigError("unknown deep-extract mode \"" + s + "\"");
}
inline MergeMode merge_mode_from(const std::string& s) {
    if (s == "sum") return MergeMode::sum;
    if (s == "concat-project") return MergeMode::concat_project;
    throw ConfigError("unknown merge mode \"" + s + "\"");
}

// Which architecture blocks are active. Every comparison and ablation
// configuration is a point in this space.
struct VariantSpec {
    ModalityMask mask{};
    FusionMode fusion = FusionMode::asymmetric;
    DeepMode deep = DeepMode::parallel;

    bool operator==(const VariantSpec&) const = default;
};

inline bool is_numerical_imaging_pair(const ModalityMask& k) {
    const bool cm = k.at(Modality::clinical) && k.at(Modality::mri) &&
                    !k.at(Modality::genetic) && !k.at(Modality::pet);
    const bool gp = k.at(Modality::genetic) && k.at(Modality::pet) &&
                    !k.at(Modality::clinical) && !k.at(Modality::mri);
    return cm || gp;
}

inline void validate_variant(const VariantSpec& v) {
    if (v.mask.count() == 0) throw ConfigError("variant needs at least one modality");
    switch (v.fusion) {
        case FusionMode::asymmetric:
            if (!v.mask.all() && !is_numerical_imaging_pair(v.mask))
                throw ConfigError(
                    "asymmetric fusion needs all four modalities or the pair clinical+mri or "
                    "genetic+pet; use fusion=none for other subsets");
            break;
        case FusionMode::symmetric:
        case FusionMode::mcad:
            if (!v.mask.all())
                throw ConfigError(std::string(to_string(v.fusion)) +
                                  " fusion needs all four modalities; use fusion=none or an "
                                  "asymmetric pair variant");
            break;
        case FusionMode::none:
            break;
    }
}

// Token count entering the deep extractor / classifier.
inline std::size_t fused_token_count(const VariantSpec& v, std::size_t n_tokens) {
    switch (v.fusion) {
        case FusionMode::asymmetric:
            return (v.mask.all() ? 4 : 2) * n_tokens;
        case FusionMode::symmetric:
        case FusionMode::mcad:
            return 4 * n_tokens;
        case FusionMode::none:
            return v.mask.count() * n_tokens;
    }
    return 0;
}

// ---------------------------------------------------------------------------
// configuration

struct ModelConfig {
    std::size_t feature_dim = 100;  // shared encoder output width d
    std::size_t n_tokens = 10;      // d = n_tokens * token_dim
    std::size_t token_dim = 10;
    std::size_t encoder_layers = 2;
    std::size_t encoder_hidden = 256;
    std::size_t ffn_hidden = 40;  // deep-extract feed-forward width
    MergeMode merge = MergeMode::sum;
    std::array<std::size_t, 3> classifier_hidden{256, 128, 64};
};

// Factor feature_dim into (n_tokens, token_dim). With n_tokens given, d must
// divide evenly; otherwise d must be a perfect square (the 100 -> 10x10
// default).
inline void resolve_token_layout(ModelConfig& cfg, std::size_t n_tokens_hint = 0) {
    const std::size_t d = cfg.feature_dim;
    if (d == 0) throw ConfigError("feature_dim must be positive");
    if (n_tokens_hint != 0) {
        if (d % n_tokens_hint != 0)
            throw ConfigError("feature_dim " + std::to_string(d) + " is not divisible by " +
                              std::to_string(n_tokens_hint) + " tokens");
        cfg.n_tokens = n_tokens_hint;
        cfg.token_dim = d / n_tokens_hint;
    } else {
        const auto root = static_cast<std::size_t>(std::lround(std::sqrt(static_cast<double>(d))));
        if (root * root != d) {
            std::string valid;
            for (std::size_t r = 4; r <= 16; ++r) {
                if (!valid.empty()) valid += ", ";
                valid += std::to_string(r * r);
            }
            throw ConfigError("feature_dim " + std::to_string(d) +
                              " has no square token layout; valid values include " + valid +
                              " (or set n_tokens explicitly)");
        }
        cfg.n_tokens = root;
        cfg.token_dim = root;
    }
    if (cfg.ffn_hidden == 0) cfg.ffn_hidden = 4 * cfg.token_dim;
}

struct InputWidths {
    std::size_t clinical = kClinicalWidth;
    std::size_t genetic = 0;
    std::size_t mri = 0;
    std::size_t pet = 0;

    std::size_t at(Modality m) const {
        switch (m) {
            case Modality::clinical: return clinical;
            case Modality::genetic: return genetic;
            case Modality::mri: return mri;
            case Modality::pet: return pet;
        }
        return 0;
    }
};

// ---------------------------------------------------------------------------
// parameters

struct DenseLayer {
    Tensor w, b;
};

struct Encoder {
    std::vector<DenseLayer> layers;
};

struct FusionParams {
    // numerical queries against imaging keys/values
    Tensor w_qc, w_km, w_vm;  // clinical -> mri
    Tensor w_qg, w_kp, w_vp;  // genetic -> pet
    // reverse direction, symmetric mode only
    Tensor w_qm, w_kc, w_vc;
    Tensor w_qp, w_kg, w_vg;
    // concatenated-stream attention, mcad mode only
    Tensor w_q, w_k, w_v;
};

struct AttnBlockParams {
    Tensor wq, wk, wv, wo;
    Tensor ln1_g, ln1_b;
    Tensor ffn_w1, ffn_b1, ffn_w2, ffn_b2;
    Tensor ln2_g, ln2_b;
};

struct FourierBlockParams {
    Tensor ln1_g, ln1_b;
    Tensor ffn_w1, ffn_b1, ffn_w2, ffn_b2;
    Tensor ln2_g, ln2_b;
};

struct DeepExtractParams {
    AttnBlockParams attn;
    FourierBlockParams fnet;
    Tensor merge_ln_g, merge_ln_b;
    Tensor merge_proj;  // concat-project merge only
};

struct ClassifierParams {
    std::vector<DenseLayer> layers;  // 4 layers, final width 3
};

struct ModelParams {
    ModelConfig config;
    VariantSpec variant;
    InputWidths widths;
    std::array<Encoder, 4> encoders;  // indexed by Modality; inactive ones empty
    FusionParams fusion;
    DeepExtractParams deep;
    ClassifierParams classifier;
    Tensor pos_table;  // (n_tokens, token_dim) sinusoid, not trained
};

// Standard sinusoidal position table.
inline Tensor build_position_table(std::size_t n_tokens, std::size_t token_dim) {
    Tensor t = Tensor::zeros(Shape{n_tokens, token_dim});
    auto& v = t.values_mut();
    for (std::size_t pos = 0; pos < n_tokens; ++pos)
        for (std::size_t i = 0; i < token_dim; ++i) {
            const double expo = static_cast<double>(2 * (i / 2)) / static_cast<double>(token_dim);
            const double angle = static_cast<double>(pos) / std::pow(10000.0, expo);
            v[pos * token_dim + i] = (i % 2 == 0) ? std::sin(angle) : std::cos(angle);
        }
    return t;
}

namespace detail {

inline DenseLayer make_dense(std::size_t in, std::size_t out, std::mt19937_64& rng) {
    return DenseLayer{xavier_uniform(in, out, rng), Tensor::zeros(Shape{out}, true)};
}

inline Tensor make_square(std::size_t d, std::mt19937_64& rng) {
    return xavier_uniform(d, d, rng);
}

inline Tensor ln_gain(std::size_t d) { return Tensor::full(Shape{d}, 1.0, true); }
inline Tensor ln_bias(std::size_t d) { return Tensor::zeros(Shape{d}, true); }

}  // namespace detail

// Builds every parameter the variant needs, deterministically from the seed.
inline ModelParams init_model(const ModelConfig& cfg, const VariantSpec& variant,
                              const InputWidths& widths, std::uint64_t seed) {
    validate_variant(variant);
    if (cfg.n_tokens * cfg.token_dim != cfg.feature_dim)
        throw ConfigError("feature_dim " + std::to_string(cfg.feature_dim) + " != n_tokens " +
                          std::to_string(cfg.n_tokens) + " x token_dim " +
                          std::to_string(cfg.token_dim));
    std::mt19937_64 rng(seed);
    ModelParams mp;
    mp.config = cfg;
    mp.variant = variant;
    mp.widths = widths;
    mp.pos_table = build_position_table(cfg.n_tokens, cfg.token_dim);

    for (std::size_t m = 0; m < 4; ++m) {
        if (!variant.mask.active[m]) continue;
        const std::size_t in = widths.at(static_cast<Modality>(m));
        if (in == 0)
            throw ConfigError(std::string("modality ") + kModalityNames[m] +
                              " is active but its input width is 0");
        Encoder enc;
        std::size_t cur = in;
        for (std::size_t l = 0; l + 1 < cfg.encoder_layers; ++l) {
            enc.layers.push_back(detail::make_dense(cur, cfg.encoder_hidden, rng));
            cur = cfg.encoder_hidden;
        }
        enc.layers.push_back(detail::make_dense(cur, cfg.feature_dim, rng));
        mp.encoders[m] = std::move(enc);
    }

    const std::size_t td = cfg.token_dim;
    if (variant.fusion == FusionMode::asymmetric || variant.fusion == FusionMode::symmetric) {
        const bool cm_pair = variant.mask.at(Modality::clinical);
        const bool gp_pair = variant.mask.at(Modality::genetic);
        if (cm_pair) {
            mp.fusion.w_qc = detail::make_square(td, rng);
            mp.fusion.w_km = detail::make_square(td, rng);
            mp.fusion.w_vm = detail::make_square(td, rng);
        }
        if (gp_pair) {
            mp.fusion.w_qg = detail::make_square(td, rng);
            mp.fusion.w_kp = detail::make_square(td, rng);
            mp.fusion.w_vp = detail::make_square(td, rng);
        }
        if (variant.fusion == FusionMode::symmetric) {
            mp.fusion.w_qm = detail::make_square(td, rng);
            mp.fusion.w_kc = detail::make_square(td, rng);
            mp.fusion.w_vc = detail::make_square(td, rng);
            mp.fusion.w_qp = detail::make_square(td, rng);
            mp.fusion.w_kg = detail::make_square(td, rng);
            mp.fusion.w_vg = detail::make_square(td, rng);
        }
    } else if (variant.fusion == FusionMode::mcad) {
        mp.fusion.w_q = detail::make_square(td, rng);
        mp.fusion.w_k = detail::make_square(td, rng);
        mp.fusion.w_v = detail::make_square(td, rng);
    }

    if (variant.deep == DeepMode::parallel || variant.deep == DeepMode::attention_only) {
        auto& a = mp.deep.attn;
        a.wq = detail::make_square(td, rng);
        a.wk = detail::make_square(td, rng);
        a.wv = detail::make_square(td, rng);
        a.wo = detail::make_square(td, rng);
        a.ln1_g = detail::ln_gain(td);
        a.ln1_b = detail::ln_bias(td);
        a.ffn_w1 = xavier_uniform(td, cfg.ffn_hidden, rng);
        a.ffn_b1 = Tensor::zeros(Shape{cfg.ffn_hidden}, true);
        a.ffn_w2 = xavier_uniform(cfg.ffn_hidden, td, rng);
        a.ffn_b2 = Tensor::zeros(Shape{td}, true);
        a.ln2_g = detail::ln_gain(td);
        a.ln2_b = detail::ln_bias(td);
    }
    if (variant.deep == DeepMode::parallel || variant.deep == DeepMode::fourier_only) {
        auto& f = mp.deep.fnet;
        f.ln1_g = detail::ln_gain(td);
        f.ln1_b = detail::ln_bias(td);
        f.ffn_w1 = xavier_uniform(td, cfg.ffn_hidden, rng);
        f.ffn_b1 = Tensor::zeros(Shape{cfg.ffn_hidden}, true);
        f.ffn_w2 = xavier_uniform(cfg.ffn_hidden, td, rng);
        f.ffn_b2 = Tensor::zeros(Shape{td}, true);
        f.ln2_g = detail::ln_gain(td);
        f.ln2_b = detail::ln_bias(td);
    }
    if (variant.deep == DeepMode::parallel) {
        if (cfg.merge == MergeMode::concat_project)
            mp.deep.merge_proj = xavier_uniform(2 * td, td, rng);
        mp.deep.merge_ln_g = detail::ln_gain(td);
        mp.deep.merge_ln_b = detail::ln_bias(td);
    }

    const std::size_t flat = fused_token_count(variant, cfg.n_tokens) * td;
    std::size_t cur = flat;
    for (std::size_t h : cfg.classifier_hidden) {
        mp.classifier.layers.push_back(detail::make_dense(cur, h, rng));
        cur = h;
    }
    mp.classifier.layers.push_back(detail::make_dense(cur, kNumClasses, rng));
    return mp;
}

// Deterministically ordered (name, tensor) view over every trainable
// parameter; the order is the init order.
inline std::vector<std::pair<std::string, Tensor>> named_params(const ModelParams& mp) {
    std::vector<std::pair<std::string, Tensor>> out;
    auto put = [&](const std::string& name, const Tensor& t) {
        if (t.size() > 0) out.emplace_back(name, t);
    };
    for (std::size_t m = 0; m < 4; ++m) {
        const auto& enc = mp.encoders[m];
        for (std::size_t l = 0; l < enc.layers.size(); ++l) {
            const std::string base = std::string("enc.") + kModalityNames[m] + "." +
                                     std::to_string(l);
            put(base + ".w", enc.layers[l].w);
            put(base + ".b", enc.layers[l].b);
        }
    }
    const auto& f = mp.fusion;
    put("fuse.w_qc", f.w_qc);
    put("fuse.w_km", f.w_km);
    put("fuse.w_vm", f.w_vm);
    put("fuse.w_qg", f.w_qg);
    put("fuse.w_kp", f.w_kp);
    put("fuse.w_vp", f.w_vp);
    put("fuse.w_qm", f.w_qm);
    put("fuse.w_kc", f.w_kc);
    put("fuse.w_vc", f.w_vc);
    put("fuse.w_qp", f.w_qp);
    put("fuse.w_kg", f.w_kg);
    put("fuse.w_vg", f.w_vg);
    put("fuse.w_q", f.w_q);
    put("fuse.w_k", f.w_k);
    put("fuse.w_v", f.w_v);
    const auto& a = mp.deep.attn;
    put("deep.attn.wq", a.wq);
    put("deep.attn.wk", a.wk);
    put("deep.attn.wv", a.wv);
    put("deep.attn.wo", a.wo);
    put("deep.attn.ln1.g", a.ln1_g);
    put("deep.attn.ln1.b", a.ln1_b);
    put("deep.attn.ffn.w1", a.ffn_w1);
    put("deep.attn.ffn.b1", a.ffn_b1);
    put("deep.attn.ffn.w2", a.ffn_w2);
    put("deep.attn.ffn.b2", a.ffn_b2);
    put("deep.attn.ln2.g", a.ln2_g);
    put("deep.attn.ln2.b", a.ln2_b);
    const auto& fb = mp.deep.fnet;
    put("deep.fnet.ln1.g", fb.ln1_g);
    put("deep.fnet.ln1.b", fb.ln1_b);
    put("deep.fnet.ffn.w1", fb.ffn_w1);
    put("deep.fnet.ffn.b1", fb.ffn_b1);
    put("deep.fnet.ffn.w2", fb.ffn_w2);
    put("deep.fnet.ffn.b2", fb.ffn_b2);
    put("deep.fnet.ln2.g", fb.ln2_g);
    put("deep.fnet.ln2.b", fb.ln2_b);
    put("deep.merge.proj", mp.deep.merge_proj);
    put("deep.merge.ln.g", mp.deep.merge_ln_g);
    put("deep.merge.ln.b", mp.deep.merge_ln_b);
    for (std::size_t l = 0; l < mp.classifier.layers.size(); ++l) {
        const std::string base = "head." + std::to_string(l);
        put(base + ".w", mp.classifier.layers[l].w);
        put(base + ".b", mp.classifier.layers[l].b);
    }
    return out;
}

inline std::vector<Tensor> param_tensors(const ModelParams& mp) {
    std::vector<Tensor> out;
    for (auto& [name, t] : named_params(mp)) out.push_back(t);
    return out;
}

inline void zero_grads(const ModelParams& mp) {
    for (auto& [name, t] : named_params(mp)) t.zero_grad();
}

// ---------------------------------------------------------------------------
// forward pieces

// Dense projection stack for one modality: raw width -> d, ReLU between
// layers, linear output.
inline Tensor encode_one(Graph& g, const Tensor& x, const Encoder& enc) {
    Tensor h = x;
    for (std::size_t l = 0; l < enc.layers.size(); ++l) {
        h = linear(g, h, enc.layers[l].w, enc.layers[l].b);
        if (l + 1 < enc.layers.size()) h = relu(g, h);
    }
    return h;
}

// Per-modality (b, d) features for every active modality.
inline std::array<std::optional<Tensor>, 4> encode_modalities(Graph& g, const ModalBatch& batch,
                                                              const ModelParams& mp) {
    std::array<std::optional<Tensor>, 4> out;
    const std::array<const Tensor*, 4> inputs{&batch.clinical, &batch.genetic, &batch.mri,
                                              &batch.pet};
    for (std::size_t m = 0; m < 4; ++m) {
        if (!mp.variant.mask.active[m]) continue;
        const Tensor& x = *inputs[m];
        const std::size_t want = mp.widths.at(static_cast<Modality>(m));
        if (x.rank() != 2 || x.dim(1) != want)
            throw ConfigError(std::string("modality ") + kModalityNames[m] + " input width " +
                              std::to_string(x.rank() == 2 ? x.dim(1) : 0) +
                              " does not match encoder width " + std::to_string(want));
        out[m] = encode_one(g, x, mp.encoders[m]);
    }
    return out;
}

// (b, d) -> (b, n_tokens, token_dim) plus the sinusoidal position table.
inline Tensor tokenize(Graph& g, const Tensor& feat, const ModelParams& mp) {
    const std::size_t nt = mp.config.n_tokens, td = mp.config.token_dim;
    if (feat.rank() != 2 || feat.dim(1) != nt * td)
        throw ConfigError("tokenize: feature width " +
                          std::to_string(feat.rank() == 2 ? feat.dim(1) : 0) +
                          " is not n_tokens x token_dim = " + std::to_string(nt * td));
    Tensor tok = reshape(g, feat, Shape{feat.dim(0), nt, td});
    return add(g, tok, mp.pos_table);
}

// Scaled dot-product cross-attention: queries from one token stream, keys
// and values from another. Rows of the attention matrix are stochastic.
inline Tensor cross_attend(Graph& g, const Tensor& q_tokens, const Tensor& kv_tokens,
                           const Tensor& wq, const Tensor& wk, const Tensor& wv) {
    const std::size_t dk = wq.dim(1);
    Tensor q = matmul(g, q_tokens, wq);
    Tensor k = matmul(g, kv_tokens, wk);
    Tensor v = matmul(g, kv_tokens, wv);
    Tensor scores = scale(g, matmul(g, q, transpose(g, k)),
                          1.0 / std::sqrt(static_cast<double>(dk)));
    Tensor attn = softmax(g, scores, scores.rank() - 1);
    return matmul(g, attn, v);
}

// Numerical streams query the imaging streams; output token order is
// [attended-mri, clinical, attended-pet, genetic].
inline Tensor fuse_asymmetric(Graph& g, const Tensor& c, const Tensor& gph, const Tensor& m,
                              const Tensor& p, const FusionParams& fp) {
    if (c.size() == 0 || gph.size() == 0 || m.size() == 0 || p.size() == 0)
        throw ConfigError(
            "asymmetric fusion needs all four token streams; use a pair or no-fusion variant");
    Tensor f_mc = cross_attend(g, c, m, fp.w_qc, fp.w_km, fp.w_vm);
    Tensor f_pg = cross_attend(g, gph, p, fp.w_qg, fp.w_kp, fp.w_vp);
    return concat(g, {f_mc, c, f_pg, gph}, 1);
}

// Both directions for each numerical/imaging pair; raw streams are dropped
// so the output width matches the asymmetric mode.
inline Tensor fuse_symmetric(Graph& g, const Tensor& c, const Tensor& gph, const Tensor& m,
                             const Tensor& p, const FusionParams& fp) {
    if (c.size() == 0 || gph.size() == 0 || m.size() == 0 || p.size() == 0)
        throw ConfigError(
            "symmetric fusion needs all four token streams; use a pair or no-fusion variant");
    Tensor f_mc = cross_attend(g, c, m, fp.w_qc, fp.w_km, fp.w_vm);
    Tensor f_cm = cross_attend(g, m, c, fp.w_qm, fp.w_kc, fp.w_vc);
    Tensor f_pg = cross_attend(g, gph, p, fp.w_qg, fp.w_kp, fp.w_vp);
    Tensor f_gp = cross_attend(g, p, gph, fp.w_qp, fp.w_kg, fp.w_vg);
    return concat(g, {f_mc, f_cm, f_pg, f_gp}, 1);
}

// Imaging streams are concatenated along tokens first, then attended by the
// concatenated numerical streams; the attended tokens are followed by the
// raw numerical streams.
inline Tensor fuse_mcad(Graph& g, const Tensor& c, const Tensor& gph, const Tensor& m,
                        const Tensor& p, const FusionParams& fp) {
    if (c.size() == 0 || gph.size() == 0 || m.size() == 0 || p.size() == 0)
        throw ConfigError(
            "mcad fusion needs all four token streams; use a pair or no-fusion variant");
    Tensor numerical = concat(g, {c, gph}, 1);
    Tensor imaging = concat(g, {m, p}, 1);
    Tensor f = cross_attend(g, numerical, imaging, fp.w_q, fp.w_k, fp.w_v);
    return concat(g, {f, c, gph}, 1);
}

inline Tensor attention_block(Graph& g, const Tensor& x, const AttnBlockParams& p) {
    Tensor att = cross_attend(g, x, x, p.wq, p.wk, p.wv);
    att = matmul(g, att, p.wo);
    Tensor y = layer_norm(g, add(g, x, att), p.ln1_g, p.ln1_b, x.rank() - 1);
    Tensor h = relu(g, linear(g, y, p.ffn_w1, p.ffn_b1));
    Tensor f = linear(g, h, p.ffn_w2, p.ffn_b2);
    return layer_norm(g, add(g, y, f), p.ln2_g, p.ln2_b, x.rank() - 1);
}

inline Tensor fourier_block(Graph& g, const Tensor& x, const FourierBlockParams& p) {
    Tensor mix = fourier_mix(g, x);
    Tensor y = layer_norm(g, add(g, x, mix), p.ln1_g, p.ln1_b, x.rank() - 1);
    Tensor h = relu(g, linear(g, y, p.ffn_w1, p.ffn_b1));
    Tensor f = linear(g, h, p.ffn_w2, p.ffn_b2);
    return layer_norm(g, add(g, y, f), p.ln2_g, p.ln2_b, x.rank() - 1);
}

// Parallel Fourier / self-attention extractor. Branch outputs merge by
// elementwise sum (or concat+projection) followed by layer norm; single
// branches and identity pass straight through.
inline Tensor deep_extract(Graph& g, const Tensor& fused, const DeepExtractParams& dp,
                           DeepMode mode, MergeMode merge = MergeMode::sum) {
    switch (mode) {
        case DeepMode::none:
            return fused;
        case DeepMode::attention_only:
            return attention_block(g, fused, dp.attn);
        case DeepMode::fourier_only:
            return fourier_block(g, fused, dp.fnet);
        case DeepMode::parallel: {
            Tensor a = attention_block(g, fused, dp.attn);
            Tensor f = fourier_block(g, fused, dp.fnet);
            Tensor merged;
            if (merge == MergeMode::sum) {
                merged = add(g, a, f);
            } else {
                merged = matmul(g, concat(g, {a, f}, 2), dp.merge_proj);
            }
            return layer_norm(g, merged, dp.merge_ln_g, dp.merge_ln_b, merged.rank() - 1);
        }
    }
    throw ConfigError("unknown deep-extract mode");
}

// Flatten tokens and run the 4-layer MLP head; logits, no final activation.
inline Tensor classify(Graph& g, const Tensor& tokens, const ClassifierParams& cp) {
    const std::size_t b = tokens.dim(0);
    const std::size_t flat = tokens.size() / b;
    const std::size_t want = cp.layers.front().w.dim(0);
    if (flat != want)
        throw ConfigError("classifier input width " + std::to_string(flat) +
                          " does not match head width " + std::to_string(want));
    Tensor h = reshape(g, tokens, Shape{b, flat});
    for (std::size_t l = 0; l < cp.layers.size(); ++l) {
        h = linear(g, h, cp.layers[l].w, cp.layers[l].b);
        if (l + 1 < cp.layers.size()) h = relu(g, h);
    }
    return h;
}

// encode -> tokenize -> fuse -> deep-extract -> classify, per the variant.
inline Tensor model_forward(Graph& g, const ModalBatch& batch, const ModelParams& mp) {
    const auto& v = mp.variant;
    auto feats = encode_modalities(g, batch, mp);
    std::array<std::optional<Tensor>, 4> toks;
    for (std::size_t m = 0; m < 4; ++m)
        if (feats[m]) toks[m] = tokenize(g, *feats[m], mp);

    auto tok = [&](Modality m) -> const Tensor& {
        return *toks[static_cast<std::size_t>(m)];
    };

    Tensor fused;
    switch (v.fusion) {
        case FusionMode::asymmetric:
            if (v.mask.all()) {
                fused = fuse_asymmetric(g, tok(Modality::clinical), tok(Modality::genetic),
                                        tok(Modality::mri), tok(Modality::pet), mp.fusion);
            } else if (v.mask.at(Modality::clinical)) {
                Tensor f_mc = cross_attend(g, tok(Modality::clinical), tok(Modality::mri),
                                           mp.fusion.w_qc, mp.fusion.w_km, mp.fusion.w_vm);
                fused = concat(g, {f_mc, tok(Modality::clinical)}, 1);
            } else {
                Tensor f_pg = cross_attend(g, tok(Modality::genetic), tok(Modality::pet),
                                           mp.fusion.w_qg, mp.fusion.w_kp, mp.fusion.w_vp);
                fused = concat(g, {f_pg, tok(Modality::genetic)}, 1);
            }
            break;
        case FusionMode::symmetric:
            fused = fuse_symmetric(g, tok(Modality::clinical), tok(Modality::genetic),
                                   tok(Modality::mri), tok(Modality::pet), mp.fusion);
            break;
        case FusionMode::mcad:
            fused = fuse_mcad(g, tok(Modality::clinical), tok(Modality::genetic),
                              tok(Modality::mri), tok(Modality::pet), mp.fusion);
            break;
        case FusionMode::none: {
            std::vector<Tensor> parts;
            for (std::size_t m = 0; m < 4; ++m)
                if (toks[m]) parts.push_back(*toks[m]);
            fused = parts.size() == 1 ? parts[0] : concat(g, parts, 1);
            break;
        }
    }

    Tensor deep = deep_extract(g, fused, mp.deep, v.deep, mp.config.merge);
    return classify(g, deep, mp.classifier);
}

// Class posteriors for a batch (softmax over logits).
inline Tensor predict_proba(Graph& g, const ModalBatch& batch, const ModelParams& mp) {
    Tensor logits = model_forward(g, batch, mp);
    return softmax(g, logits, 1);
}

}  // namespace acmca
