#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "acmca/data.hpp"
#include "acmca/error.hpp"
#include "acmca/io.hpp"

namespace acmca {

inline constexpr int kDatasetFormatVersion = 1;

struct SplitDataset {
    Dataset train, test;
    nlohmann::json manifest;
};

namespace detail {

inline void write_split_part(const std::string& dir, const std::string& part, const Dataset& d) {
    write_text(dir + "/" + part + "_clinical.csv", features_to_csv(d.ids, d.clinical));
    write_text(dir + "/" + part + "_genetic.csv", features_to_csv(d.ids, d.genetic));
    write_text(dir + "/" + part + "_mri.csv", features_to_csv(d.ids, d.mri));
    write_text(dir + "/" + part + "_pet.csv", features_to_csv(d.ids, d.pet));
    std::string labels = "subject_id,label\n";
    for (std::size_t i = 0; i < d.size(); ++i)
        labels += d.ids[i] + "," + kClassNames[static_cast<std::size_t>(d.labels[i])] + "\n";
    write_text(dir + "/" + part + "_labels.csv", labels);
}

inline Dataset read_split_part(const std::string& dir, const std::string& part) {
    Dataset d;
    const auto clinical = parse_features(dir + "/" + part + "_clinical.csv");
    const auto genetic = parse_features(dir + "/" + part + "_genetic.csv");
    const auto mri = parse_features(dir + "/" + part + "_mri.csv");
    const auto pet = parse_features(dir + "/" + part + "_pet.csv");
    d.ids = clinical.subjects;
    d.clinical = clinical.rows;
    d.genetic = genetic.rows;
    d.mri = mri.rows;
    d.pet = pet.rows;
    auto check_ids = [&](const FeatureVectorTable& t, const char* which) {
        if (t.subjects != d.ids)
            throw DataError(std::string("dataset ") + part + " " + which +
                            " rows are not aligned with the clinical rows");
    };
    check_ids(genetic, "genetic");
    check_ids(mri, "mri");
    check_ids(pet, "pet");

    const auto lines = read_lines(dir + "/" + part + "_labels.csv");
    if (lines.empty() || strip(lines[0]) != "subject_id,label")
        throw DataError("bad labels header in " + dir + "/" + part + "_labels.csv");
    for (std::size_t i = 1; i < lines.size(); ++i) {
        const std::string line = strip(lines[i]);
        if (line.empty()) continue;
        const auto cells = split(line, ',');
        if (cells.size() != 2) throw DataError("bad labels row " + std::to_string(i + 1));
        const int label = label_index(strip(cells[1]));
        if (label < 0) throw DataError("unknown label \"" + cells[1] + "\"");
        d.labels.push_back(label);
    }
    if (d.labels.size() != d.ids.size())
        throw DataError("dataset " + part + " labels do not cover every subject");
    return d;
}

}  // namespace detail

inline void save_split(const std::string& dir, const SplitDataset& s) {
    ensure_dir(dir);
    detail::write_split_part(dir, "train", s.train);
    detail::write_split_part(dir, "test", s.test);
    std::ofstream out(dir + "/manifest.json");
    if (!out) throw DataError("cannot write " + dir + "/manifest.json");
    out << s.manifest.dump(1) << "\n";
}

inline SplitDataset load_split(const std::string& dir) {
    SplitDataset s;
    std::ifstream in(dir + "/manifest.json");
    if (!in) throw DataError("no manifest.json under " + dir + "; run prepare first");
    try {
        in >> s.manifest;
    } catch (const nlohmann::json::exception& e) {
        throw DataError(dir + "/manifest.json is not valid JSON: " + e.what());
    }
    if (!s.manifest.contains("format_version") ||
        s.manifest["format_version"].get<int>() != kDatasetFormatVersion)
        throw DataError("unsupported dataset manifest version under " + dir);
    s.train = detail::read_split_part(dir, "train");
    s.test = detail::read_split_part(dir, "test");
    return s;
}

}  // namespace acmca
