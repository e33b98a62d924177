// Command-line front end: prepare / train / eval / preset / sweep.
//
// Exit codes: 0 success, 2 usage or configuration error, 3 data error,
// 4 numeric failure.

#include <cstdlib>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "acmca/acmca.hpp"

namespace {

using namespace acmca;

std::string out_root() {
    const char* env = std::getenv("ACMCA_OUT_ROOT");
    return env && *env ? std::string(env) : std::string(".");
}

std::string default_out(const std::string& cmd) {
    return out_root() + "/acmca-out/" + cmd;
}

std::vector<std::size_t> parse_value_list(const std::string& csv) {
    std::vector<std::size_t> out;
    for (const auto& tok : split(csv, ',')) {
        long v = 0;
        if (!parse_long(strip(tok), v) || v <= 0)
            throw UsageError("bad value \"" + tok + "\" in --values (want positive integers)");
        out.push_back(static_cast<std::size_t>(v));
    }
    if (out.empty()) throw UsageError("--values is empty");
    return out;
}

// ---------------------------------------------------------------------------
// shared training flags

struct TrainCliOpts {
    std::string variant = "acmca";
    double lr = 1e-3;
    std::size_t batch_size = 32;
    std::size_t epochs = 125;
    std::size_t feature_dim = 100;
    std::string optimizer = "adam";
    std::uint64_t seed = 0;
    std::size_t n_tokens = 0;
    std::size_t encoder_layers = 2;
    std::size_t encoder_hidden = 256;
    std::size_t ffn_hidden = 0;
    std::string merge = "sum";
    bool quiet = false;
};

void add_train_flags(CLI::App* cmd, TrainCliOpts& o, bool with_variant) {
    if (with_variant) {
        std::string names;
        for (const auto& n : variant_names()) names += (names.empty() ? "" : ", ") + n;
        cmd->add_option("--variant", o.variant, "architecture variant (" + names + ")")
            ->capture_default_str();
    }
    cmd->add_option("--lr", o.lr, "learning rate")->capture_default_str();
    cmd->add_option("--batch-size", o.batch_size, "minibatch size")->capture_default_str();
    cmd->add_option("--epochs", o.epochs, "training epochs")->capture_default_str();
    cmd->add_option("--feature-dim", o.feature_dim, "shared encoder output width d")
        ->capture_default_str();
    cmd->add_option("--optimizer", o.optimizer, "sgd or adam")->capture_default_str();
    cmd->add_option("--seed", o.seed, "random seed")->capture_default_str();
    cmd->add_option("--n-tokens", o.n_tokens,
                    "tokens per modality (0 = square layout from feature-dim)")
        ->capture_default_str();
    cmd->add_option("--encoder-layers", o.encoder_layers, "dense layers per modality encoder")
        ->capture_default_str();
    cmd->add_option("--encoder-hidden", o.encoder_hidden, "encoder hidden width")
        ->capture_default_str();
    cmd->add_option("--ffn-hidden", o.ffn_hidden,
                    "deep-extract FFN width (0 = 4 x token_dim)")
        ->capture_default_str();
    cmd->add_option("--merge", o.merge, "parallel-branch merge: sum or concat-project")
        ->capture_default_str();
    cmd->add_flag("--quiet", o.quiet, "suppress per-epoch progress lines");
}

TrainConfig to_train_config(const TrainCliOpts& o) {
    TrainConfig tc;
    tc.learning_rate = o.lr;
    tc.batch_size = o.batch_size;
    tc.epochs = o.epochs;
    tc.feature_dim = o.feature_dim;
    tc.optimizer = optim_from(o.optimizer);
    tc.seed = o.seed;
    tc.variant = variant_by_name(o.variant);
    tc.n_tokens_hint = o.n_tokens;
    tc.encoder_layers = o.encoder_layers;
    tc.encoder_hidden = o.encoder_hidden;
    tc.ffn_hidden = o.ffn_hidden;
    tc.merge = merge_mode_from(o.merge);
    tc.log_progress = !o.quiet;
    validate_train_config(tc);
    model_config_from(tc);  // surfaces bad feature_dim / n_tokens combinations now
    return tc;
}

nlohmann::json train_config_json(const TrainConfig& tc) {
    return {{"learning_rate", tc.learning_rate},
            {"batch_size", tc.batch_size},
            {"epochs", tc.epochs},
            {"feature_dim", tc.feature_dim},
            {"optimizer", to_string(tc.optimizer)},
            {"seed", tc.seed},
            {"variant", variant_to_json(tc.variant)},
            {"n_tokens", tc.n_tokens_hint},
            {"encoder_layers", tc.encoder_layers},
            {"encoder_hidden", tc.encoder_hidden},
            {"ffn_hidden", tc.ffn_hidden},
            {"merge", to_string(tc.merge)}};
}

void write_resolved_config(const std::string& dir, const nlohmann::json& j) {
    write_text(dir + "/resolved_config.json", j.dump(1) + "\n");
}

// ---------------------------------------------------------------------------
// prepare

struct PrepareOpts {
    bool synthetic = false;
    std::size_t n_per_class = 60;
    std::size_t snp_count = 40;
    std::size_t img_width = 32;
    double separation = 3.0;
    double cross_corr = 0.3;
    std::string signal_mode = "shared";
    std::string clinical_path, genotype_path, mri_path, pet_path;
    double hwe_p = 0.05;
    int gq_min = 20;
    double maf_min = 0.01;
    double miss_max = 0.05;
    std::size_t top_k = 0;  // 0 = keep every retained site
    double test_fraction = 0.2;
    std::uint64_t seed = 0;
    std::string out;
};

void run_prepare(const PrepareOpts& o) {
    ClinicalTable clinical;
    GenotypeTable genotype;
    FeatureVectorTable mri, pet;
    nlohmann::json source;

    if (o.synthetic) {
        SynthSpec spec;
        spec.seed = o.seed;
        spec.n_per_class = o.n_per_class;
        spec.snp_count = o.snp_count;
        spec.img_width = o.img_width;
        spec.separation = o.separation;
        spec.cross_corr = o.cross_corr;
        spec.signal = signal_mode_from(o.signal_mode);
        auto tables = synth_cohort(spec);
        clinical = std::move(tables.clinical);
        genotype = std::move(tables.genotype);
        mri = std::move(tables.mri);
        pet = std::move(tables.pet);
        source = {{"kind", "synthetic"},
                  {"n_per_class", spec.n_per_class},
                  {"snp_count", spec.snp_count},
                  {"img_width", spec.img_width},
                  {"separation", spec.separation},
                  {"cross_corr", spec.cross_corr},
                  {"signal_mode", o.signal_mode}};
    } else {
        std::vector<std::string> missing;
        if (o.clinical_path.empty()) missing.push_back("--clinical");
        if (o.genotype_path.empty()) missing.push_back("--genotype");
        if (o.mri_path.empty()) missing.push_back("--mri-features");
        if (o.pet_path.empty()) missing.push_back("--pet-features");
        if (!missing.empty()) {
            std::string list;
            for (const auto& m : missing) list += (list.empty() ? "" : " ") + m;
            throw UsageError("missing modality flags: " + list +
                             " (or pass --synthetic to generate a cohort)");
        }
        clinical = parse_clinical(o.clinical_path);
        genotype = parse_genotype(o.genotype_path);
        mri = parse_features(o.mri_path);
        pet = parse_features(o.pet_path);
        source = {{"kind", "files"},
                  {"clinical", o.clinical_path},
                  {"genotype", o.genotype_path},
                  {"mri_features", o.mri_path},
                  {"pet_features", o.pet_path}};
    }
    for (const auto& w : clinical.warnings) std::cerr << "clinical: " << w << "\n";

    SnpFilterThresholds th{o.hwe_p, o.gq_min, o.maf_min, o.miss_max};
    auto filtered = filter_snps(genotype, th);
    for (const auto& w : filtered.warnings) std::cerr << "genotype: " << w << "\n";

    auto encoded = encode_alleles(filtered.table);
    std::vector<std::string> selected_sites = encoded.site_ids;
    if (o.top_k > 0) {
        auto sel = select_top_k_variance(encoded, o.top_k);
        encoded = std::move(sel.reduced);
        selected_sites = encoded.site_ids;
    }

    Dataset cohort = intersect_cohort(clinical, encoded, mri, pet);
    auto idx = split_stratified(cohort.labels, o.test_fraction, o.seed);
    SplitDataset splitds;
    splitds.train = take_rows(cohort, idx.train);
    splitds.test = take_rows(cohort, idx.test);

    auto norm = fit_clinical_norm(splitds.train.clinical);
    for (const auto& w : norm.warnings) std::cerr << "normalize: " << w << "\n";
    splitds.train.clinical = apply_clinical_norm(splitds.train.clinical, norm);
    splitds.test.clinical = apply_clinical_norm(splitds.test.clinical, norm);

    std::array<long, kNumClasses> per_class{}, per_class_test{};
    for (int l : cohort.labels) ++per_class[static_cast<std::size_t>(l)];
    for (int l : splitds.test.labels) ++per_class_test[static_cast<std::size_t>(l)];

    nlohmann::json manifest;
    manifest["format_version"] = kDatasetFormatVersion;
    manifest["source"] = source;
    manifest["seed"] = o.seed;
    manifest["thresholds"] = {{"hwe_p", th.hwe_p},
                              {"gq_min", th.gq_min},
                              {"maf_min", th.maf_min},
                              {"miss_max", th.miss_max}};
    manifest["top_k"] = o.top_k;
    manifest["test_fraction"] = o.test_fraction;
    manifest["subjects"] = {{"total", cohort.size()},
                            {"train", splitds.train.size()},
                            {"test", splitds.test.size()},
                            {"per_class",
                             {{"CN", per_class[0]}, {"MCI", per_class[1]}, {"AD", per_class[2]}}},
                            {"per_class_test",
                             {{"CN", per_class_test[0]},
                              {"MCI", per_class_test[1]},
                              {"AD", per_class_test[2]}}}};
    manifest["widths"] = {{"clinical", cohort.clinical_width()},
                          {"genetic", cohort.genetic_width()},
                          {"mri", cohort.mri_width()},
                          {"pet", cohort.pet_width()}};
    manifest["snp_sites"] = {{"input", genotype.sites.size()},
                             {"after_filter", filtered.table.sites.size()},
                             {"selected", selected_sites.size()}};
    manifest["selected_sites"] = selected_sites;
    {
        nlohmann::json means = nlohmann::json::array(), sds = nlohmann::json::array();
        for (std::size_t c = 0; c < kClinicalWidth; ++c) {
            means.push_back(norm.mean[c]);
            sds.push_back(norm.sd[c]);
        }
        manifest["clinical_norm"] = {{"mean", means}, {"sd", sds}};
    }

    ensure_dir(o.out);
    save_split(o.out, splitds);
    write_text(o.out + "/snp_filter_report.csv", filter_report_csv(filtered, th));
    std::cout << "prepared " << cohort.size() << " subjects (train " << splitds.train.size()
              << ", test " << splitds.test.size() << ", " << encoded.site_ids.size()
              << " snp sites) -> " << o.out << "\n";
}

// ---------------------------------------------------------------------------
// train

struct TrainCmdOpts {
    std::string data, out;
    TrainCliOpts train;
};

void run_train(const TrainCmdOpts& o) {
    SplitDataset ds = load_split(o.data);
    TrainConfig tc = to_train_config(o.train);
    ensure_dir(o.out);
    TrainResult res = train(ds.train, ds.test, tc);
    save_checkpoint(o.out + "/checkpoint.json", res.best);
    write_text(o.out + "/trainlog.csv", trainlog_csv(res.log));
    write_resolved_config(o.out, train_config_json(tc));
    std::cout << "trained " << variant_name(tc.variant) << ": best eval accuracy "
              << fmt_fixed(res.best_eval_acc, 4) << " at epoch " << res.best_epoch << " -> "
              << o.out << "\n";
}

// ---------------------------------------------------------------------------
// eval

struct EvalCmdOpts {
    std::string checkpoint, data, out;
    std::string split = "test";
};

void run_eval(const EvalCmdOpts& o) {
    ModelParams mp = load_checkpoint(o.checkpoint);
    SplitDataset ds = load_split(o.data);
    if (o.split != "test" && o.split != "train")
        throw UsageError("--split must be test or train");
    const Dataset& d = o.split == "test" ? ds.test : ds.train;

    const InputWidths have{d.clinical_width(), d.genetic_width(), d.mri_width(), d.pet_width()};
    for (std::size_t m = 0; m < 4; ++m) {
        const auto mod = static_cast<Modality>(m);
        if (mp.variant.mask.at(mod) && mp.widths.at(mod) != have.at(mod))
            throw ConfigError(std::string("checkpoint expects ") + kModalityNames[m] +
                              " width " + std::to_string(mp.widths.at(mod)) +
                              " but dataset has " + std::to_string(have.at(mod)));
    }

    const std::string name = variant_name(mp.variant);
    EvalReport rep = evaluate_scores(name, scores_on(mp, d), d.labels);
    ensure_dir(o.out);
    write_text(o.out + "/metrics_" + name + ".csv", report_csv(rep));
    write_text(o.out + "/roc_" + name + ".svg", roc_svg(rep));
    std::cout << "eval " << name << " on " << o.split << ": accuracy "
              << fmt_fixed(rep.metric.macro.accuracy, 4) << " recall "
              << fmt_fixed(rep.metric.macro.recall, 4) << " specificity "
              << fmt_fixed(rep.metric.macro.specificity, 4) << " f1 "
              << fmt_fixed(rep.metric.macro.f1, 4) << " auc "
              << fmt_fixed(rep.roc.macro_auc, 4) << " -> " << o.out << "\n";
}

// ---------------------------------------------------------------------------
// preset / sweep

struct PresetCmdOpts {
    std::string name;
    std::string data, out;
    std::string values;  // sweep presets only
    TrainCliOpts train;
};

void write_experiment_outputs(const std::string& dir, const ExperimentResult& res) {
    ensure_dir(dir);
    save_checkpoint(dir + "/checkpoint.json", res.trained.best);
    write_text(dir + "/trainlog.csv", trainlog_csv(res.trained.log));
    write_text(dir + "/metrics_" + res.name + ".csv", report_csv(res.report));
    write_text(dir + "/roc_" + res.name + ".svg", roc_svg(res.report));
}

void run_sweep_common(const std::string& out, const SplitDataset& ds, SweepAxis axis,
                      const std::vector<std::size_t>& values, const TrainConfig& base) {
    SweepResult res = sweep(ds.train, ds.test, axis, values, base);
    ensure_dir(out);
    write_text(out + "/sweep_" + to_string(axis) + ".csv", sweep_csv(res, base));
    SvgSeries series;
    series.label = "test accuracy";
    for (const auto& r : res.rows)
        series.points.emplace_back(static_cast<double>(r.value), r.test_accuracy);
    double xmin = series.points.front().first, xmax = series.points.back().first;
    write_text(out + "/sweep_" + std::string(to_string(axis)) + ".svg",
               line_plot_svg(std::string("sweep: ") + to_string(axis), to_string(axis),
                             "test accuracy", {series}, xmin, xmax, 0, 1, false));
    std::cout << "sweep " << to_string(axis) << " over " << values.size() << " values -> " << out
              << "\n";
}

void run_preset(const PresetCmdOpts& o) {
    const PresetName preset = preset_from(o.name);
    SplitDataset ds = load_split(o.data);
    TrainConfig base = to_train_config(o.train);
    ensure_dir(o.out);
    write_resolved_config(o.out, train_config_json(base));

    if (preset_is_sweep(preset)) {
        const auto values =
            o.values.empty() ? preset_sweep_defaults(preset) : parse_value_list(o.values);
        run_sweep_common(o.out, ds, preset_sweep_axis(preset), values, base);
        return;
    }

    std::vector<EvalReport> reports;
    nlohmann::json failures = nlohmann::json::array();
    std::exception_ptr first_failure;
    for (const auto& name : preset_runs(preset)) {
        try {
            ExperimentResult res = run_experiment(ds.train, ds.test, base, name);
            write_experiment_outputs(o.out + "/" + name, res);
            reports.push_back(res.report);
            std::cout << "  " << name << ": accuracy "
                      << fmt_fixed(res.report.metric.macro.accuracy, 4) << " auc "
                      << fmt_fixed(res.report.roc.macro_auc, 4) << "\n";
        } catch (const std::exception& e) {
            failures.push_back({{"variant", name}, {"error", e.what()}});
            if (!first_failure) first_failure = std::current_exception();
            std::cerr << "  " << name << " failed: " << e.what() << "\n";
        }
    }
    if (!reports.empty()) {
        write_text(o.out + "/comparison.csv", comparison_csv(reports));
        write_text(o.out + "/roc_comparison.svg", comparison_roc_svg(reports));
    }
    if (!failures.empty()) {
        write_text(o.out + "/failure_manifest.json", failures.dump(1) + "\n");
        std::rethrow_exception(first_failure);
    }
    std::cout << "preset " << o.name << ": " << reports.size() << " runs -> " << o.out << "\n";
}

struct SweepCmdOpts {
    std::string axis, values;
    std::string data, out;
    TrainCliOpts train;
};

void run_sweep(const SweepCmdOpts& o) {
    SplitDataset ds = load_split(o.data);
    TrainConfig base = to_train_config(o.train);
    ensure_dir(o.out);
    write_resolved_config(o.out, train_config_json(base));
    run_sweep_common(o.out, ds, sweep_axis_from(o.axis), parse_value_list(o.values), base);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{
        "acmca: multimodal three-class classifier with cross-attention fusion.\n"
        "Data preparation, training, evaluation, hyperparameter sweeps and experiment presets."};
    app.set_config("--config", "", "key-value config file; command-line flags take precedence");
    app.allow_config_extras(CLI::config_extras_mode::error);
    app.require_subcommand(1);

    PrepareOpts prep;
    auto* cprep = app.add_subcommand("prepare", "build a filtered, split dataset on disk");
    cprep->add_flag("--synthetic", prep.synthetic, "generate a synthetic cohort");
    cprep->add_option("--n-per-class", prep.n_per_class, "synthetic subjects per class")
        ->capture_default_str();
    cprep->add_option("--snp-count", prep.snp_count, "synthetic SNP sites")->capture_default_str();
    cprep->add_option("--img-width", prep.img_width, "synthetic image-feature width")
        ->capture_default_str();
    cprep->add_option("--separation", prep.separation, "synthetic class separation")
        ->capture_default_str();
    cprep->add_option("--cross-corr", prep.cross_corr, "synthetic cross-modality nuisance factor")
        ->capture_default_str();
    cprep->add_option("--signal-mode", prep.signal_mode,
                      "synthetic class-signal layout: shared or split")
        ->capture_default_str();
    cprep->add_option("--clinical", prep.clinical_path, "clinical CSV path");
    cprep->add_option("--genotype", prep.genotype_path, "genotype TSV path");
    cprep->add_option("--mri-features", prep.mri_path, "MRI feature-vector CSV path");
    cprep->add_option("--pet-features", prep.pet_path, "PET feature-vector CSV path");
    cprep->add_option("--hwe-p", prep.hwe_p, "drop sites with HWE p-value below")
        ->capture_default_str();
    cprep->add_option("--gq-min", prep.gq_min, "mask calls with genotype quality below")
        ->capture_default_str();
    cprep->add_option("--maf-min", prep.maf_min, "drop sites with minor allele frequency below")
        ->capture_default_str();
    cprep->add_option("--miss-max", prep.miss_max, "drop sites with missing rate above")
        ->capture_default_str();
    cprep->add_option("--top-k", prep.top_k, "keep k highest-variance sites (0 = keep all)")
        ->capture_default_str();
    cprep->add_option("--test-fraction", prep.test_fraction, "held-out fraction per class")
        ->capture_default_str();
    cprep->add_option("--seed", prep.seed, "random seed")->capture_default_str();
    cprep->add_option("--out", prep.out, "output dataset directory");
    cprep->callback([&] {
        if (prep.out.empty()) prep.out = default_out("dataset");
        run_prepare(prep);
    });

    TrainCmdOpts traincmd;
    auto* ctrain = app.add_subcommand("train", "train one variant on a prepared dataset");
    ctrain->add_option("--data", traincmd.data, "prepared dataset directory")->required();
    ctrain->add_option("--out", traincmd.out, "output directory");
    add_train_flags(ctrain, traincmd.train, true);
    ctrain->callback([&] {
        if (traincmd.out.empty()) traincmd.out = default_out("train");
        run_train(traincmd);
    });

    EvalCmdOpts evalcmd;
    auto* ceval = app.add_subcommand("eval", "evaluate a checkpoint on a prepared dataset");
    ceval->add_option("--checkpoint", evalcmd.checkpoint, "checkpoint JSON path")->required();
    ceval->add_option("--data", evalcmd.data, "prepared dataset directory")->required();
    ceval->add_option("--split", evalcmd.split, "test or train")->capture_default_str();
    ceval->add_option("--out", evalcmd.out, "output directory");
    ceval->callback([&] {
        if (evalcmd.out.empty()) evalcmd.out = default_out("eval");
        run_eval(evalcmd);
    });

    PresetCmdOpts presetcmd;
    auto* cpreset = app.add_subcommand(
        "preset",
        "run an experiment preset: modality-matrix, variant-comparison, ablation-suite, "
        "sweep-epochs, sweep-batch, sweep-dim");
    cpreset->add_option("name", presetcmd.name, "preset name")->required();
    cpreset->add_option("--data", presetcmd.data, "prepared dataset directory")->required();
    cpreset->add_option("--out", presetcmd.out, "output directory");
    cpreset->add_option("--values", presetcmd.values,
                        "comma-separated values for sweep presets (e.g. 10,50,125)");
    add_train_flags(cpreset, presetcmd.train, false);
    cpreset->callback([&] {
        if (presetcmd.out.empty()) presetcmd.out = default_out("preset-" + presetcmd.name);
        run_preset(presetcmd);
    });

    SweepCmdOpts sweepcmd;
    auto* csweep = app.add_subcommand("sweep", "sweep one hyperparameter axis");
    csweep->add_option("--axis", sweepcmd.axis, "epochs, batch_size or feature_dim")->required();
    csweep->add_option("--values", sweepcmd.values, "comma-separated values")->required();
    csweep->add_option("--data", sweepcmd.data, "prepared dataset directory")->required();
    csweep->add_option("--out", sweepcmd.out, "output directory");
    add_train_flags(csweep, sweepcmd.train, true);
    csweep->callback([&] {
        if (sweepcmd.out.empty()) sweepcmd.out = default_out("sweep");
        run_sweep(sweepcmd);
    });

    try {
        app.parse(argc, argv);
        return 0;
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    } catch (const acmca::UsageError& e) {  // covers ConfigError and ShapeError
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const acmca::DataError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const acmca::NumericError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
