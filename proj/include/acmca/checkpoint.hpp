#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "acmca/error.hpp"
#include "acmca/model.hpp"

namespace acmca {

inline constexpr int kCheckpointVersion = 1;

namespace detail {

inline const char* b64_alphabet() {
    return "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
}

inline std::string base64_encode(const std::vector<std::uint8_t>& bytes) {
    const char* tab = b64_alphabet();
    std::string out;
    out.reserve((bytes.size() + 2) / 3 * 4);
    std::size_t i = 0;
    for (; i + 2 < bytes.size(); i += 3) {
        const std::uint32_t v = (bytes[i] << 16) | (bytes[i + 1] << 8) | bytes[i + 2];
        out += tab[(v >> 18) & 63];
        out += tab[(v >> 12) & 63];
        out += tab[(v >> 6) & 63];
        out += tab[v & 63];
    }
    if (i + 1 == bytes.size()) {
        const std::uint32_t v = bytes[i] << 16;
        out += tab[(v >> 18) & 63];
        out += tab[(v >> 12) & 63];
        out += "==";
    } else if (i + 2 == bytes.size()) {
        const std::uint32_t v = (bytes[i] << 16) | (bytes[i + 1] << 8);
        out += tab[(v >> 18) & 63];
        out += tab[(v >> 12) & 63];
        out += tab[(v >> 6) & 63];
        out += '=';
    }
    return out;
}

inline std::vector<std::uint8_t> base64_decode(const std::string& s) {
    int rev[256];
    std::fill(std::begin(rev), std::end(rev), -1);
    const char* tab = b64_alphabet();
    for (int i = 0; i < 64; ++i) rev[static_cast<unsigned char>(tab[i])] = i;
    std::vector<std::uint8_t> out;
    std::uint32_t acc = 0;
    int bits = 0;
    for (char ch : s) {
        if (ch == '=' || ch == '\n' || ch == '\r') continue;
        const int v = rev[static_cast<unsigned char>(ch)];
        if (v < 0) throw DataError("invalid base64 payload");
        acc = (acc << 6) | static_cast<std::uint32_t>(v);
        bits += 6;
        if (bits >= 8) {
            bits -= 8;
            out.push_back(static_cast<std::uint8_t>((acc >> bits) & 0xff));
        }
    }
    return out;
}

// explicit little-endian layout, independent of host order
inline std::vector<std::uint8_t> doubles_to_le(const std::vector<double>& v) {
    std::vector<std::uint8_t> bytes(v.size() * 8);
    for (std::size_t i = 0; i < v.size(); ++i) {
        std::uint64_t u;
        std::memcpy(&u, &v[i], 8);
        for (int b = 0; b < 8; ++b) bytes[i * 8 + b] = static_cast<std::uint8_t>(u >> (8 * b));
    }
    return bytes;
}

inline std::vector<double> le_to_doubles(const std::vector<std::uint8_t>& bytes) {
    if (bytes.size() % 8 != 0) throw DataError("parameter payload is not a float64 array");
    std::vector<double> v(bytes.size() / 8);
    for (std::size_t i = 0; i < v.size(); ++i) {
        std::uint64_t u = 0;
        for (int b = 7; b >= 0; --b) u = (u << 8) | bytes[i * 8 + b];
        std::memcpy(&v[i], &u, 8);
    }
    return v;
}

}  // namespace detail

inline nlohmann::json variant_to_json(const VariantSpec& v) {
    return {{"modalities", v.mask.str()},
            {"fusion", to_string(v.fusion)},
            {"deep", to_string(v.deep)}};
}

inline VariantSpec variant_from_json(const nlohmann::json& j) {
    VariantSpec v;
    v.mask = ModalityMask::parse(j.at("modalities").get<std::string>());
    v.fusion = fusion_mode_from(j.at("fusion").get<std::string>());
    v.deep = deep_mode_from(j.at("deep").get<std::string>());
    return v;
}

inline nlohmann::json checkpoint_to_json(const ModelParams& mp) {
    nlohmann::json j;
    j["format_version"] = kCheckpointVersion;
    j["config"] = {{"feature_dim", mp.config.feature_dim},
                   {"n_tokens", mp.config.n_tokens},
                   {"token_dim", mp.config.token_dim},
                   {"encoder_layers", mp.config.encoder_layers},
                   {"encoder_hidden", mp.config.encoder_hidden},
                   {"ffn_hidden", mp.config.ffn_hidden},
                   {"merge", to_string(mp.config.merge)},
                   {"classifier_hidden", mp.config.classifier_hidden}};
    j["variant"] = variant_to_json(mp.variant);
    j["widths"] = {{"clinical", mp.widths.clinical},
                   {"genetic", mp.widths.genetic},
                   {"mri", mp.widths.mri},
                   {"pet", mp.widths.pet}};
    nlohmann::json params = nlohmann::json::object();
    for (const auto& [name, t] : named_params(mp)) {
        params[name] = {{"shape", t.shape()},
                        {"data", detail::base64_encode(detail::doubles_to_le(t.values()))}};
    }
    j["params"] = params;
    return j;
}

inline void save_checkpoint(const std::string& path, const ModelParams& mp) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write checkpoint " + path);
    out << checkpoint_to_json(mp).dump(1) << "\n";
}

inline ModelParams checkpoint_from_json(const nlohmann::json& j) {
    if (!j.contains("format_version"))
        throw DataError("checkpoint has no format_version field");
    if (j["format_version"].get<int>() != kCheckpointVersion)
        throw DataError("unsupported checkpoint format_version " +
                        j["format_version"].dump());
    ModelConfig cfg;
    const auto& jc = j.at("config");
    cfg.feature_dim = jc.at("feature_dim").get<std::size_t>();
    cfg.n_tokens = jc.at("n_tokens").get<std::size_t>();
    cfg.token_dim = jc.at("token_dim").get<std::size_t>();
    cfg.encoder_layers = jc.at("encoder_layers").get<std::size_t>();
    cfg.encoder_hidden = jc.at("encoder_hidden").get<std::size_t>();
    cfg.ffn_hidden = jc.at("ffn_hidden").get<std::size_t>();
    cfg.merge = merge_mode_from(jc.at("merge").get<std::string>());
    const auto ch = jc.at("classifier_hidden").get<std::vector<std::size_t>>();
    if (ch.size() != cfg.classifier_hidden.size())
        throw DataError("checkpoint classifier_hidden has wrong arity");
    std::copy(ch.begin(), ch.end(), cfg.classifier_hidden.begin());

    const VariantSpec variant = variant_from_json(j.at("variant"));
    InputWidths widths;
    const auto& jw = j.at("widths");
    widths.clinical = jw.at("clinical").get<std::size_t>();
    widths.genetic = jw.at("genetic").get<std::size_t>();
    widths.mri = jw.at("mri").get<std::size_t>();
    widths.pet = jw.at("pet").get<std::size_t>();

    ModelParams mp = init_model(cfg, variant, widths, 0);
    const auto& jp = j.at("params");
    for (auto& [name, t] : named_params(mp)) {
        if (!jp.contains(name)) throw DataError("checkpoint is missing parameter " + name);
        const auto& entry = jp.at(name);
        const auto shape = entry.at("shape").get<Shape>();
        if (shape != t.shape())
            throw DataError("checkpoint parameter " + name + " has shape " + shape_str(shape) +
                            ", expected " + shape_str(t.shape()));
        auto values = detail::le_to_doubles(
            detail::base64_decode(entry.at("data").get<std::string>()));
        if (values.size() != t.size())
            throw DataError("checkpoint parameter " + name + " has wrong payload length");
        t.values_mut() = std::move(values);
    }
    if (jp.size() != named_params(mp).size())
        throw DataError("checkpoint has extra parameters for this variant");
    return mp;
}

inline ModelParams load_checkpoint(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open checkpoint " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw DataError("checkpoint " + path + " is not valid JSON: " + e.what());
    }
    return checkpoint_from_json(j);
}

}  // namespace acmca
