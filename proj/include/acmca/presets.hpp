#pragma once

#include <string>
#include <utility>
#include <vector>

#include "acmca/error.hpp"
#include "acmca/eval.hpp"
#include "acmca/model.hpp"
#include "acmca/train.hpp"

namespace acmca {

// ---------------------------------------------------------------------------
// named variants

inline const std::vector<std::pair<std::string, VariantSpec>>& variant_registry() {
    static const std::vector<std::pair<std::string, VariantSpec>> reg = [] {
        std::vector<std::pair<std::string, VariantSpec>> v;
        const ModalityMask all{};
        auto add = [&](const std::string& name, ModalityMask mask, FusionMode fusion,
                       DeepMode deep) {
            v.push_back({name, VariantSpec{mask, fusion, deep}});
        };
        add("acmca", all, FusionMode::asymmetric, DeepMode::parallel);
        add("acmca-cm", all, FusionMode::symmetric, DeepMode::parallel);
        add("acmca-mcad", all, FusionMode::mcad, DeepMode::parallel);
        add("concat-baseline", all, FusionMode::none, DeepMode::none);
        add("acmca-wcm", all, FusionMode::none, DeepMode::parallel);
        add("acmca-wde", all, FusionMode::asymmetric, DeepMode::none);
        add("acmca-wfnet", all, FusionMode::asymmetric, DeepMode::attention_only);
        add("acmca-wt", all, FusionMode::asymmetric, DeepMode::fourier_only);
        add("clinical", ModalityMask::only(Modality::clinical), FusionMode::none,
            DeepMode::parallel);
        add("genetic", ModalityMask::only(Modality::genetic), FusionMode::none,
            DeepMode::parallel);
        add("mri", ModalityMask::only(Modality::mri), FusionMode::none, DeepMode::parallel);
        add("pet", ModalityMask::only(Modality::pet), FusionMode::none, DeepMode::parallel);
        add("clinical+mri", ModalityMask::parse("clinical,mri"), FusionMode::asymmetric,
            DeepMode::parallel);
        add("genetic+pet", ModalityMask::parse("genetic,pet"), FusionMode::asymmetric,
            DeepMode::parallel);
        return v;
    }();
    return reg;
}

inline std::vector<std::string> variant_names() {
    std::vector<std::string> names;
    for (const auto& [n, _] : variant_registry()) names.push_back(n);
    return names;
}

inline VariantSpec variant_by_name(const std::string& name) {
    for (const auto& [n, spec] : variant_registry())
        if (n == name) return spec;
    std::string valid;
    for (const auto& n : variant_names()) {
        if (!valid.empty()) valid += ", ";
        valid += n;
    }
    throw ConfigError("unknown variant \"" + name + "\"; valid: " + valid);
}

// Registered name for a spec, or a descriptive fallback.
inline std::string variant_name(const VariantSpec& spec) {
    for (const auto& [n, s] : variant_registry())
        if (s == spec) return n;
    return "custom(" + spec.mask.str() + ";" + to_string(spec.fusion) + ";" +
           to_string(spec.deep) + ")";
}

// ---------------------------------------------------------------------------
// presets

enum class PresetName {
    modality_matrix,
    variant_comparison,
    ablation_suite,
    sweep_epochs,
    sweep_batch,
    sweep_dim
};

inline PresetName preset_from(const std::string& s) {
    if (s == "modality-matrix") return PresetName::modality_matrix;
    if (s == "variant-comparison") return PresetName::variant_comparison;
    if (s == "ablation-suite") return PresetName::ablation_suite;
    if (s == "sweep-epochs") return PresetName::sweep_epochs;
    if (s == "sweep-batch") return PresetName::sweep_batch;
    if (s == "sweep-dim") return PresetName::sweep_dim;
    throw ConfigError("unknown preset \"" + s +
                      "\"; valid: modality-matrix, variant-comparison, ablation-suite, "
                      "sweep-epochs, sweep-batch, sweep-dim");
}

inline const char* to_string(PresetName p) {
    switch (p) {
        case PresetName::modality_matrix: return "modality-matrix";
        case PresetName::variant_comparison: return "variant-comparison";
        case PresetName::ablation_suite: return "ablation-suite";
        case PresetName::sweep_epochs: return "sweep-epochs";
        case PresetName::sweep_batch: return "sweep-batch";
        case PresetName::sweep_dim: return "sweep-dim";
    }
    return "?";
}

inline bool preset_is_sweep(PresetName p) {
    return p == PresetName::sweep_epochs || p == PresetName::sweep_batch ||
           p == PresetName::sweep_dim;
}

inline SweepAxis preset_sweep_axis(PresetName p) {
    switch (p) {
        case PresetName::sweep_epochs: return SweepAxis::epochs;
        case PresetName::sweep_batch: return SweepAxis::batch_size;
        case PresetName::sweep_dim: return SweepAxis::feature_dim;
        default: throw ConfigError("preset is not a sweep");
    }
}

inline std::vector<std::size_t> preset_sweep_defaults(PresetName p) {
    switch (p) {
        case PresetName::sweep_epochs: return {10, 25, 50, 75, 125};
        case PresetName::sweep_batch: return {8, 16, 32, 64};
        case PresetName::sweep_dim: return {36, 64, 100, 144};
        default: throw ConfigError("preset is not a sweep");
    }
}

// Member variants of the experiment presets.
inline std::vector<std::string> preset_runs(PresetName p) {
    switch (p) {
        case PresetName::modality_matrix:
            return {"clinical", "genetic", "mri", "pet", "clinical+mri", "genetic+pet", "acmca"};
        case PresetName::variant_comparison:
            return {"acmca", "acmca-cm", "acmca-mcad", "concat-baseline"};
        case PresetName::ablation_suite:
            return {"acmca-wcm", "acmca-wde", "acmca-wfnet", "acmca-wt", "acmca"};
        default:
            throw ConfigError("preset is a sweep, not an experiment matrix");
    }
}

// ---------------------------------------------------------------------------
// experiment runner

struct ExperimentResult {
    std::string name;
    EvalReport report;
    TrainResult trained;
};

// Train one named variant and evaluate its best checkpoint on the test split.
inline ExperimentResult run_experiment(const Dataset& train_set, const Dataset& test_set,
                                       const TrainConfig& base, const std::string& name) {
    ExperimentResult res;
    res.name = name;
    TrainConfig tc = base;
    tc.variant = variant_by_name(name);
    res.trained = train(train_set, test_set, tc);
    Tensor scores = scores_on(res.trained.best, test_set);
    res.report = evaluate_scores(name, scores, test_set.labels);
    return res;
}

}  // namespace acmca
