#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "acmca/error.hpp"
#include "acmca/io.hpp"
#include "acmca/stats.hpp"
#include "acmca/tensor.hpp"

namespace acmca {

// Diagnostic classes, in label-index order.
inline constexpr std::array<const char*, 3> kClassNames{"CN", "MCI", "AD"};
inline constexpr std::size_t kNumClasses = 3;
inline constexpr std::size_t kClinicalWidth = 7;  // gender + six numeric scores

inline int label_index(const std::string& name) {
    for (std::size_t i = 0; i < kClassNames.size(); ++i)
        if (name == kClassNames[i]) return static_cast<int>(i);
    return -1;
}

// ---------------------------------------------------------------------------
// raw tables

struct ClinicalRow {
    std::string subject_id;
    char gender = 'M';  // 'M' or 'F'
    double age = 0, moca = 0, mmse = 0, cdr = 0, faq = 0, gds = 0;
    int label = 0;
};

struct ClinicalTable {
    std::vector<ClinicalRow> rows;
    std::vector<std::string> warnings;
};

// One genotype call: alternate-allele count, or -1 for missing.
struct GenotypeCall {
    int gt = -1;
    int gq = 0;
};

struct GenotypeSite {
    std::string id;
    std::string ref, alt;
};

struct GenotypeTable {
    std::vector<GenotypeSite> sites;
    std::vector<std::string> subjects;
    std::vector<std::vector<GenotypeCall>> calls;  // [subject][site]
};

struct FeatureVectorTable {
    std::vector<std::string> subjects;
    std::vector<std::vector<double>> rows;
    std::size_t width = 0;
};

struct EncodedGenotypes {
    std::vector<std::string> subjects;
    std::vector<std::string> site_ids;
    std::vector<std::vector<double>> rows;  // values in {0,1,2}
};

// Subject-aligned modality matrices; the in-memory form of a prepared cohort.
struct Dataset {
    std::vector<std::string> ids;
    std::vector<std::vector<double>> clinical;  // width 7, gender folded to {0,1}
    std::vector<std::vector<double>> genetic;
    std::vector<std::vector<double>> mri;
    std::vector<std::vector<double>> pet;
    std::vector<int> labels;

    std::size_t size() const { return ids.size(); }
    std::size_t clinical_width() const { return clinical.empty() ? 0 : clinical[0].size(); }
    std::size_t genetic_width() const { return genetic.empty() ? 0 : genetic[0].size(); }
    std::size_t mri_width() const { return mri.empty() ? 0 : mri[0].size(); }
    std::size_t pet_width() const { return pet.empty() ? 0 : pet[0].size(); }
};

// Aligned per-sample feature tensors for one minibatch.
struct ModalBatch {
    Tensor clinical, genetic, mri, pet;
    std::vector<int> labels;
    std::size_t size() const { return labels.size(); }
};

inline Tensor rows_to_tensor(const std::vector<std::vector<double>>& rows,
                             const std::vector<std::size_t>& idx) {
    const std::size_t w = rows.empty() ? 0 : rows[0].size();
    std::vector<double> data;
    data.reserve(idx.size() * w);
    for (auto i : idx)
        data.insert(data.end(), rows[i].begin(), rows[i].end());
    return Tensor(Shape{idx.size(), w}, std::move(data));
}

inline ModalBatch make_batch(const Dataset& d, const std::vector<std::size_t>& idx) {
    ModalBatch b;
    b.clinical = rows_to_tensor(d.clinical, idx);
    b.genetic = rows_to_tensor(d.genetic, idx);
    b.mri = rows_to_tensor(d.mri, idx);
    b.pet = rows_to_tensor(d.pet, idx);
    b.labels.reserve(idx.size());
    for (auto i : idx) b.labels.push_back(d.labels[i]);
    return b;
}

// ---------------------------------------------------------------------------
// clinical CSV:  subject_id,gender,age,moca,mmse,cdr,faq,gds,label

inline const std::vector<std::string>& clinical_columns() {
    static const std::vector<std::string> cols{"subject_id", "gender", "age",  "moca", "mmse",
                                               "cdr",        "faq",    "gds", "label"};
    return cols;
}

inline ClinicalTable parse_clinical_lines(const std::vector<std::string>& lines) {
    ClinicalTable t;
    std::size_t first = 0;
    while (first < lines.size() && strip(lines[first]).empty()) ++first;
    if (first == lines.size()) throw DataError("clinical file is empty");

    const auto header = split(strip(lines[first]), ',');
    std::map<std::string, std::size_t> col;
    for (std::size_t i = 0; i < header.size(); ++i) {
        const std::string name = strip(header[i]);
        if (std::find(clinical_columns().begin(), clinical_columns().end(), name) ==
            clinical_columns().end())
            throw DataError("clinical schema has unknown column \"" + name + "\"");
        col[name] = i;
    }
    for (const auto& name : clinical_columns())
        if (!col.count(name))
            throw DataError("clinical schema missing column \"" + name + "\"");

    std::map<std::string, std::size_t> seen;  // subject -> row position in t.rows
    for (std::size_t ln = first + 1; ln < lines.size(); ++ln) {
        const std::string raw = strip(lines[ln]);
        if (raw.empty()) continue;
        const auto cells = split(raw, ',');
        const std::size_t rowno = ln + 1;
        if (cells.size() != header.size()) {
            t.warnings.push_back("row " + std::to_string(rowno) + ": expected " +
                                 std::to_string(header.size()) + " cells, got " +
                                 std::to_string(cells.size()) + "; row rejected");
            continue;
        }
        ClinicalRow r;
        r.subject_id = strip(cells[col["subject_id"]]);
        const std::string gender = strip(cells[col["gender"]]);
        const std::string label = strip(cells[col["label"]]);
        bool ok = !r.subject_id.empty() && (gender == "M" || gender == "F");
        r.gender = gender == "F" ? 'F' : 'M';
        r.label = label_index(label);
        ok = ok && r.label >= 0;
        ok = ok && parse_double(cells[col["age"]], r.age);
        ok = ok && parse_double(cells[col["moca"]], r.moca);
        ok = ok && parse_double(cells[col["mmse"]], r.mmse);
        ok = ok && parse_double(cells[col["cdr"]], r.cdr);
        ok = ok && parse_double(cells[col["faq"]], r.faq);
        ok = ok && parse_double(cells[col["gds"]], r.gds);
        if (!ok) {
            t.warnings.push_back("row " + std::to_string(rowno) +
                                 ": unparseable required field; row rejected");
            continue;
        }
        auto it = seen.find(r.subject_id);
        if (it != seen.end()) {
            // latest-record rule: a later row replaces the earlier one
            t.warnings.push_back("row " + std::to_string(rowno) + ": duplicate subject " +
                                 r.subject_id + "; keeping latest record");
            t.rows[it->second] = r;
        } else {
            seen[r.subject_id] = t.rows.size();
            t.rows.push_back(r);
        }
    }
    return t;
}

inline ClinicalTable parse_clinical(const std::string& path) {
    return parse_clinical_lines(read_lines(path));
}

inline std::string clinical_to_csv(const ClinicalTable& t) {
    std::string s = "subject_id,gender,age,moca,mmse,cdr,faq,gds,label\n";
    for (const auto& r : t.rows) {
        s += r.subject_id;
        s += ',';
        s += r.gender;
        s += ',' + fmt_double(r.age) + ',' + fmt_double(r.moca) + ',' + fmt_double(r.mmse) + ',' +
             fmt_double(r.cdr) + ',' + fmt_double(r.faq) + ',' + fmt_double(r.gds) + ',' +
             kClassNames[static_cast<std::size_t>(r.label)] + "\n";
    }
    return s;
}

// gender folded to {0,1} (F=1), then the six numeric scores
inline std::vector<double> clinical_feature_row(const ClinicalRow& r) {
    return {r.gender == 'F' ? 1.0 : 0.0, r.age, r.moca, r.mmse, r.cdr, r.faq, r.gds};
}

// ---------------------------------------------------------------------------
// genotype TSV:
//   #site <id> <ref> <alt>            (one per site, in column order)
//   subject_id <TAB> <id1> ...        (header, must match the #site order)
//   S001 <TAB> 0/1:35 <TAB> ./. ...

inline GenotypeTable parse_genotype_lines(const std::vector<std::string>& lines) {
    GenotypeTable t;
    std::size_t ln = 0;
    for (; ln < lines.size(); ++ln) {
        const std::string line = strip(lines[ln]);
        if (line.empty()) continue;
        if (line.rfind("#site", 0) != 0) break;
        std::istringstream is(line.substr(5));
        GenotypeSite site;
        if (!(is >> site.id >> site.ref >> site.alt))
            throw DataError("genotype line " + std::to_string(ln + 1) +
                            ": malformed #site metadata");
        t.sites.push_back(site);
    }
    if (ln == lines.size()) throw DataError("genotype file has no header row");
    const auto header = split(strip(lines[ln]), '\t');
    if (header.empty() || strip(header[0]) != "subject_id")
        throw DataError("genotype header must start with subject_id");
    if (header.size() != t.sites.size() + 1)
        throw DataError("genotype header has " + std::to_string(header.size() - 1) +
                        " site columns but " + std::to_string(t.sites.size()) +
                        " #site lines");
    for (std::size_t i = 0; i < t.sites.size(); ++i)
        if (strip(header[i + 1]) != t.sites[i].id)
            throw DataError("genotype header column " + std::to_string(i + 1) + " is \"" +
                            strip(header[i + 1]) + "\" but #site order says \"" +
                            t.sites[i].id + "\"");

    std::set<std::string> seen;
    for (++ln; ln < lines.size(); ++ln) {
        const std::string line = strip(lines[ln]);
        if (line.empty()) continue;
        const auto cells = split(line, '\t');
        if (cells.size() != t.sites.size() + 1)
            throw DataError("genotype line " + std::to_string(ln + 1) + ": expected " +
                            std::to_string(t.sites.size() + 1) + " columns, got " +
                            std::to_string(cells.size()));
        const std::string subject = strip(cells[0]);
        if (!seen.insert(subject).second)
            throw DataError("genotype line " + std::to_string(ln + 1) + ": duplicate subject " +
                            subject);
        std::vector<GenotypeCall> row(t.sites.size());
        for (std::size_t s = 0; s < t.sites.size(); ++s) {
            const std::string cell = strip(cells[s + 1]);
            const auto colon = cell.find(':');
            const std::string gt = cell.substr(0, colon);
            GenotypeCall call;
            if (gt == "0/0")
                call.gt = 0;
            else if (gt == "0/1" || gt == "1/0")
                call.gt = 1;
            else if (gt == "1/1")
                call.gt = 2;
            else if (gt == "./.")
                call.gt = -1;
            else
                throw DataError("genotype line " + std::to_string(ln + 1) + " site " +
                                t.sites[s].id + ": bad genotype \"" + gt + "\"");
            if (colon != std::string::npos) {
                long gq = 0;
                if (!parse_long(cell.substr(colon + 1), gq))
                    throw DataError("genotype line " + std::to_string(ln + 1) + " site " +
                                    t.sites[s].id + ": bad GQ \"" + cell.substr(colon + 1) +
                                    "\"");
                call.gq = static_cast<int>(gq);
            } else if (call.gt != -1) {
                throw DataError("genotype line " + std::to_string(ln + 1) + " site " +
                                t.sites[s].id + ": called genotype without GQ");
            }
            row[s] = call;
        }
        t.subjects.push_back(subject);
        t.calls.push_back(std::move(row));
    }
    return t;
}

inline GenotypeTable parse_genotype(const std::string& path) {
    return parse_genotype_lines(read_lines(path));
}

inline std::string genotype_to_tsv(const GenotypeTable& t) {
    std::string s;
    for (const auto& site : t.sites)
        s += "#site " + site.id + " " + site.ref + " " + site.alt + "\n";
    s += "subject_id";
    for (const auto& site : t.sites) s += '\t' + site.id;
    s += '\n';
    for (std::size_t r = 0; r < t.subjects.size(); ++r) {
        s += t.subjects[r];
        for (const auto& c : t.calls[r]) {
            s += '\t';
            if (c.gt < 0)
                s += "./.";
            else
                s += (c.gt == 0 ? "0/0" : c.gt == 1 ? "0/1" : "1/1") + std::string(":") +
                     std::to_string(c.gq);
        }
        s += '\n';
    }
    return s;
}

// ---------------------------------------------------------------------------
// feature-vector CSV:  subject_id,f0,f1,...

inline FeatureVectorTable parse_features_lines(const std::vector<std::string>& lines) {
    FeatureVectorTable t;
    std::size_t first = 0;
    while (first < lines.size() && strip(lines[first]).empty()) ++first;
    if (first == lines.size()) throw DataError("feature file is empty");
    const auto header = split(strip(lines[first]), ',');
    if (header.empty() || strip(header[0]) != "subject_id")
        throw DataError("feature header must start with subject_id");
    t.width = header.size() - 1;
    if (t.width == 0) throw DataError("feature file has no feature columns");

    std::set<std::string> seen;
    for (std::size_t ln = first + 1; ln < lines.size(); ++ln) {
        const std::string line = strip(lines[ln]);
        if (line.empty()) continue;
        const auto cells = split(line, ',');
        if (cells.size() != t.width + 1)
            throw DataError("feature line " + std::to_string(ln + 1) + ": expected " +
                            std::to_string(t.width + 1) + " cells, got " +
                            std::to_string(cells.size()));
        const std::string subject = strip(cells[0]);
        if (!seen.insert(subject).second)
            throw DataError("feature line " + std::to_string(ln + 1) + ": duplicate subject " +
                            subject);
        std::vector<double> row(t.width);
        for (std::size_t i = 0; i < t.width; ++i) {
            if (!parse_double(cells[i + 1], row[i]) || !std::isfinite(row[i]))
                throw DataError("feature line " + std::to_string(ln + 1) +
                                ": bad value in column f" + std::to_string(i));
        }
        t.subjects.push_back(subject);
        t.rows.push_back(std::move(row));
    }
    return t;
}

inline FeatureVectorTable parse_features(const std::string& path) {
    return parse_features_lines(read_lines(path));
}

inline std::string features_to_csv(const std::vector<std::string>& subjects,
                                   const std::vector<std::vector<double>>& rows) {
    const std::size_t w = rows.empty() ? 0 : rows[0].size();
    std::string s = "subject_id";
    for (std::size_t i = 0; i < w; ++i) s += ",f" + std::to_string(i);
    s += '\n';
    for (std::size_t r = 0; r < subjects.size(); ++r) {
        s += subjects[r];
        for (double v : rows[r]) s += ',' + fmt_double(v);
        s += '\n';
    }
    return s;
}

// ---------------------------------------------------------------------------
// SNP filtering

struct SnpFilterThresholds {
    double hwe_p = 0.05;     // drop sites with HWE p-value below this
    int gq_min = 20;         // calls below become missing
    double maf_min = 0.01;   // drop sites with minor allele frequency below
    double miss_max = 0.05;  // drop sites with missing rate above
};

struct SnpSiteDecision {
    std::string site_id;
    bool kept = false;
    std::string drop_reason;  // "missing_rate" | "maf" | "hwe"
    double missing_rate = 0, maf = 0, hwe_chi2 = 0, hwe_p = 1;
};

struct SnpFilterResult {
    GenotypeTable table;
    std::vector<SnpSiteDecision> decisions;
    std::vector<std::string> warnings;
};

// Chi-square HWE test (1 df, no continuity correction) on genotype counts
// against the p^2 / 2pq / q^2 expectation.
inline void hwe_test(std::size_t n0, std::size_t n1, std::size_t n2, double& chi2, double& p) {
    const double n = static_cast<double>(n0 + n1 + n2);
    chi2 = 0.0;
    p = 1.0;
    if (n == 0) return;
    const double pref = (2.0 * static_cast<double>(n0) + static_cast<double>(n1)) / (2.0 * n);
    const double qalt = 1.0 - pref;
    const double exp0 = n * pref * pref;
    const double exp1 = 2.0 * n * pref * qalt;
    const double exp2 = n * qalt * qalt;
    const double obs[3] = {static_cast<double>(n0), static_cast<double>(n1),
                           static_cast<double>(n2)};
    const double expd[3] = {exp0, exp1, exp2};
    for (int i = 0; i < 3; ++i)
        if (expd[i] > 0.0) chi2 += (obs[i] - expd[i]) * (obs[i] - expd[i]) / expd[i];
    p = chi_square_sf(chi2, 1.0);
}

// Masks low-GQ calls to missing, then drops sites failing the missing-rate,
// MAF, or HWE filters. Idempotent: a second pass changes nothing.
inline SnpFilterResult filter_snps(const GenotypeTable& g,
                                   const SnpFilterThresholds& th = SnpFilterThresholds{}) {
    SnpFilterResult res;
    if (g.sites.empty() || g.subjects.empty()) {
        res.warnings.push_back("genotype table is empty; nothing to filter");
        res.table.subjects = g.subjects;
        res.table.calls.assign(g.subjects.size(), {});
        return res;
    }

    const std::size_t nsub = g.subjects.size();
    GenotypeTable masked = g;
    for (auto& row : masked.calls)
        for (auto& call : row)
            if (call.gt >= 0 && call.gq < th.gq_min) call.gt = -1;

    std::vector<std::size_t> keep;
    for (std::size_t s = 0; s < g.sites.size(); ++s) {
        SnpSiteDecision dec;
        dec.site_id = g.sites[s].id;
        std::size_t counts[3] = {0, 0, 0};
        std::size_t missing = 0;
        for (std::size_t r = 0; r < nsub; ++r) {
            const int gt = masked.calls[r][s].gt;
            if (gt < 0)
                ++missing;
            else
                ++counts[gt];
        }
        dec.missing_rate = static_cast<double>(missing) / static_cast<double>(nsub);
        const std::size_t called = nsub - missing;
        double alt_freq = 0.0;
        if (called > 0)
            alt_freq = (static_cast<double>(counts[1]) + 2.0 * static_cast<double>(counts[2])) /
                       (2.0 * static_cast<double>(called));
        dec.maf = std::min(alt_freq, 1.0 - alt_freq);
        hwe_test(counts[0], counts[1], counts[2], dec.hwe_chi2, dec.hwe_p);

        if (dec.missing_rate > th.miss_max)
            dec.drop_reason = "missing_rate";
        else if (dec.maf < th.maf_min)
            dec.drop_reason = "maf";
        else if (dec.hwe_p < th.hwe_p)
            dec.drop_reason = "hwe";
        else
            dec.kept = true;
        if (dec.kept) keep.push_back(s);
        res.decisions.push_back(dec);
    }

    res.table.subjects = g.subjects;
    for (auto s : keep) res.table.sites.push_back(g.sites[s]);
    res.table.calls.resize(nsub);
    for (std::size_t r = 0; r < nsub; ++r) {
        res.table.calls[r].reserve(keep.size());
        for (auto s : keep) res.table.calls[r].push_back(masked.calls[r][s]);
    }
    return res;
}

inline std::string filter_report_csv(const SnpFilterResult& res, const SnpFilterThresholds& th) {
    CsvWriter w;
    w.meta("hwe_p", th.hwe_p);
    w.meta("gq_min", static_cast<long>(th.gq_min));
    w.meta("maf_min", th.maf_min);
    w.meta("miss_max", th.miss_max);
    w.header({"site_id", "kept", "drop_reason", "missing_rate", "maf", "hwe_chi2", "hwe_p"});
    for (const auto& d : res.decisions)
        w.row({d.site_id, d.kept ? "1" : "0", d.drop_reason, fmt_double(d.missing_rate),
               fmt_double(d.maf), fmt_double(d.hwe_chi2), fmt_double(d.hwe_p)});
    return w.str();
}

// ---------------------------------------------------------------------------
// allele encoding and variance ranking

// 0/0 -> 0, 0/1 -> 1, 1/1 -> 2; missing calls take the site mode (ties to the
// smaller value).
inline EncodedGenotypes encode_alleles(const GenotypeTable& g) {
    EncodedGenotypes enc;
    enc.subjects = g.subjects;
    for (const auto& s : g.sites) enc.site_ids.push_back(s.id);
    const std::size_t nsub = g.subjects.size();
    const std::size_t nsites = g.sites.size();

    std::vector<int> mode(nsites, 0);
    for (std::size_t s = 0; s < nsites; ++s) {
        std::size_t counts[3] = {0, 0, 0};
        std::size_t called = 0;
        for (std::size_t r = 0; r < nsub; ++r) {
            const int gt = g.calls[r][s].gt;
            if (gt >= 0) {
                ++counts[gt];
                ++called;
            }
        }
        if (called == 0)
            throw DataError("site " + g.sites[s].id +
                            " has no called genotypes; run filter_snps first");
        int best = 0;
        for (int v = 1; v < 3; ++v)
            if (counts[v] > counts[best]) best = v;
        mode[s] = best;
    }

    enc.rows.assign(nsub, std::vector<double>(nsites, 0.0));
    for (std::size_t r = 0; r < nsub; ++r)
        for (std::size_t s = 0; s < nsites; ++s) {
            const int gt = g.calls[r][s].gt;
            enc.rows[r][s] = static_cast<double>(gt >= 0 ? gt : mode[s]);
        }
    return enc;
}

struct VarianceSelection {
    EncodedGenotypes reduced;
    std::vector<std::size_t> kept_indices;  // into the input site list, ascending
};

// Keeps the k highest-variance sites, original order preserved, ties broken
// by site index.
inline VarianceSelection select_top_k_variance(const EncodedGenotypes& enc, std::size_t k) {
    if (k == 0) throw UsageError("select_top_k_variance requires k > 0");
    const std::size_t nsites = enc.site_ids.size();
    if (k > nsites)
        throw UsageError("select_top_k_variance: k=" + std::to_string(k) + " exceeds " +
                         std::to_string(nsites) + " sites");
    const std::size_t nsub = enc.subjects.size();

    std::vector<double> var(nsites, 0.0);
    for (std::size_t s = 0; s < nsites; ++s) {
        double mean = 0.0;
        for (std::size_t r = 0; r < nsub; ++r) mean += enc.rows[r][s];
        mean /= static_cast<double>(nsub);
        double acc = 0.0;
        for (std::size_t r = 0; r < nsub; ++r) {
            const double d = enc.rows[r][s] - mean;
            acc += d * d;
        }
        var[s] = acc / static_cast<double>(nsub);
    }

    std::vector<std::size_t> order(nsites);
    for (std::size_t i = 0; i < nsites; ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (var[a] != var[b]) return var[a] > var[b];
        return a < b;
    });
    order.resize(k);
    std::sort(order.begin(), order.end());

    VarianceSelection sel;
    sel.kept_indices = order;
    sel.reduced.subjects = enc.subjects;
    for (auto s : order) sel.reduced.site_ids.push_back(enc.site_ids[s]);
    sel.reduced.rows.assign(nsub, {});
    for (std::size_t r = 0; r < nsub; ++r) {
        sel.reduced.rows[r].reserve(k);
        for (auto s : order) sel.reduced.rows[r].push_back(enc.rows[r][s]);
    }
    return sel;
}

// ---------------------------------------------------------------------------
// cohort intersection

// Subjects present in all four sources, sorted by id; labels come from the
// clinical table.
inline Dataset intersect_cohort(const ClinicalTable& clinical, const EncodedGenotypes& genetic,
                                const FeatureVectorTable& mri, const FeatureVectorTable& pet) {
    std::map<std::string, std::size_t> cidx, gidx, midx, pidx;
    for (std::size_t i = 0; i < clinical.rows.size(); ++i) cidx[clinical.rows[i].subject_id] = i;
    for (std::size_t i = 0; i < genetic.subjects.size(); ++i) gidx[genetic.subjects[i]] = i;
    for (std::size_t i = 0; i < mri.subjects.size(); ++i) midx[mri.subjects[i]] = i;
    for (std::size_t i = 0; i < pet.subjects.size(); ++i) pidx[pet.subjects[i]] = i;

    std::vector<std::string> shared;
    for (const auto& [id, _] : cidx)
        if (gidx.count(id) && midx.count(id) && pidx.count(id)) shared.push_back(id);
    if (shared.empty())
        throw DataError(
            "no subject appears in all four modalities; check inputs or use synthetic data "
            "(prepare --synthetic)");
    // std::map iteration is already sorted by id

    Dataset d;
    for (const auto& id : shared) {
        const auto& row = clinical.rows[cidx[id]];
        d.ids.push_back(id);
        d.clinical.push_back(clinical_feature_row(row));
        d.genetic.push_back(genetic.rows[gidx[id]]);
        d.mri.push_back(mri.rows[midx[id]]);
        d.pet.push_back(pet.rows[pidx[id]]);
        d.labels.push_back(row.label);
    }
    return d;
}

// ---------------------------------------------------------------------------
// stratified split

struct SplitIndices {
    std::vector<std::size_t> train, test;
};

// Per-class proportions preserved to within one sample; deterministic for a
// fixed seed; train and test are disjoint and cover the cohort.
inline SplitIndices split_stratified(const std::vector<int>& labels, double test_fraction,
                                     std::uint64_t seed) {
    if (!(test_fraction > 0.0 && test_fraction < 1.0))
        throw UsageError("test_fraction must be in (0,1)");
    std::array<std::vector<std::size_t>, kNumClasses> byclass;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] < 0 || labels[i] >= static_cast<int>(kNumClasses))
            throw UsageError("label out of range at index " + std::to_string(i));
        byclass[static_cast<std::size_t>(labels[i])].push_back(i);
    }
    std::mt19937_64 rng(seed);
    SplitIndices out;
    for (std::size_t c = 0; c < kNumClasses; ++c) {
        auto& idx = byclass[c];
        if (idx.empty()) continue;
        if (idx.size() < 2)
            throw DataError("class " + std::string(kClassNames[c]) +
                            " has fewer than 2 samples; cannot stratify");
        std::shuffle(idx.begin(), idx.end(), rng);
        std::size_t ntest = static_cast<std::size_t>(
            std::llround(static_cast<double>(idx.size()) * test_fraction));
        ntest = std::min(ntest, idx.size() - 1);
        for (std::size_t i = 0; i < idx.size(); ++i)
            (i < ntest ? out.test : out.train).push_back(idx[i]);
    }
    std::sort(out.train.begin(), out.train.end());
    std::sort(out.test.begin(), out.test.end());
    return out;
}

inline Dataset take_rows(const Dataset& d, const std::vector<std::size_t>& idx) {
    Dataset out;
    for (auto i : idx) {
        out.ids.push_back(d.ids[i]);
        out.clinical.push_back(d.clinical[i]);
        out.genetic.push_back(d.genetic[i]);
        out.mri.push_back(d.mri[i]);
        out.pet.push_back(d.pet[i]);
        out.labels.push_back(d.labels[i]);
    }
    return out;
}

// ---------------------------------------------------------------------------
// clinical normalization

struct ClinicalNorm {
    std::array<double, kClinicalWidth> mean{};
    std::array<double, kClinicalWidth> sd{};
    std::array<bool, kClinicalWidth> zero_var{};
    std::vector<std::string> warnings;
};

// Fits z-score stats on the given rows (train split) for the six numeric
// columns; gender (column 0) stays {0,1}. Zero-variance columns pass through
// centered at 0.
inline ClinicalNorm fit_clinical_norm(const std::vector<std::vector<double>>& rows) {
    ClinicalNorm n;
    if (rows.empty()) throw UsageError("fit_clinical_norm on empty data");
    const double cnt = static_cast<double>(rows.size());
    for (std::size_t c = 1; c < kClinicalWidth; ++c) {
        double mean = 0.0;
        for (const auto& r : rows) mean += r[c];
        mean /= cnt;
        double var = 0.0;
        for (const auto& r : rows) var += (r[c] - mean) * (r[c] - mean);
        var /= cnt;
        n.mean[c] = mean;
        if (var <= 0.0) {
            n.sd[c] = 1.0;
            n.zero_var[c] = true;
            n.warnings.push_back("clinical column " + std::to_string(c) +
                                 " has zero variance; passing through centered");
        } else {
            n.sd[c] = std::sqrt(var);
        }
    }
    n.mean[0] = 0.0;
    n.sd[0] = 1.0;
    return n;
}

inline std::vector<std::vector<double>> apply_clinical_norm(
    const std::vector<std::vector<double>>& rows, const ClinicalNorm& n) {
    auto out = rows;
    for (auto& r : out)
        for (std::size_t c = 1; c < kClinicalWidth; ++c) r[c] = (r[c] - n.mean[c]) / n.sd[c];
    return out;
}

// ---------------------------------------------------------------------------
// synthetic cohort generator

enum class SignalMode {
    shared,  // every modality separates all three classes
    split    // clinical/MRI separate CN from the rest; genetic/PET separate AD
};

inline SignalMode signal_mode_from(const std::string& s) {
    if (s == "shared") return SignalMode::shared;
    if (s == "split") return SignalMode::split;
    throw ConfigError("unknown signal mode \"" + s + "\" (want shared|split)");
}

struct SynthSpec {
    std::uint64_t seed = 0;
    std::size_t n_per_class = 60;
    std::size_t snp_count = 40;
    std::size_t img_width = 32;
    double separation = 3.0;
    double cross_corr = 0.3;  // shared nuisance factor loading across modalities
    SignalMode signal = SignalMode::shared;
};

struct SynthTables {
    ClinicalTable clinical;
    GenotypeTable genotype;
    FeatureVectorTable mri, pet;
};

namespace detail {

// per-class coefficient patterns; both have zero mean over classes
inline double class_coef_shared(std::size_t c, std::size_t axis) {
    // axis 0 favors CN, axis 1 favors MCI, axis 2 favors AD
    return c == axis ? 1.0 : -0.5;
}

inline double class_coef_split_a(std::size_t c) { return c == 0 ? 1.0 : -0.5; }
inline double class_coef_split_b(std::size_t c) { return c == 2 ? 1.0 : -0.5; }

inline std::vector<double> unit_direction(std::size_t width, std::mt19937_64& rng) {
    std::normal_distribution<double> nd(0.0, 1.0);
    std::vector<double> v(width);
    double norm = 0.0;
    for (auto& x : v) {
        x = nd(rng);
        norm += x * x;
    }
    norm = std::sqrt(norm);
    if (norm == 0.0) norm = 1.0;
    for (auto& x : v) x /= norm;
    return v;
}

}  // namespace detail

// Deterministic synthetic four-modality cohort. Per-class Gaussian clusters
// in each modality; a shared per-subject nuisance factor correlates the
// continuous modalities; separation 0 removes all class signal.
inline SynthTables synth_cohort(const SynthSpec& spec) {
    if (spec.separation < 0.0) throw UsageError("class_separation must be >= 0");
    if (spec.n_per_class == 0) throw UsageError("n_per_class must be positive");
    std::mt19937_64 rng(spec.seed);
    std::normal_distribution<double> nd(0.0, 1.0);
    std::uniform_real_distribution<double> ud(0.0, 1.0);

    const std::size_t n = spec.n_per_class * kNumClasses;
    const bool split = spec.signal == SignalMode::split;

    // class direction vectors per continuous modality (three axes each in
    // shared mode, a single axis in split mode)
    std::array<std::vector<std::vector<double>>, 3> dirs;  // [modality][axis][component]
    const std::size_t widths[3] = {6, spec.img_width, spec.img_width};  // clinical numeric, mri, pet
    for (std::size_t m = 0; m < 3; ++m) {
        const std::size_t naxes = split ? 1 : kNumClasses;
        for (std::size_t a = 0; a < naxes; ++a)
            dirs[m].push_back(detail::unit_direction(widths[m], rng));
    }
    // nuisance loadings
    std::array<std::vector<double>, 3> nuisance;
    for (std::size_t m = 0; m < 3; ++m) nuisance[m] = detail::unit_direction(widths[m], rng);

    // genotype sites: base alternate-allele frequency and +/- signal direction
    std::vector<double> base_p(spec.snp_count);
    std::vector<double> site_sign(spec.snp_count);
    for (std::size_t s = 0; s < spec.snp_count; ++s) {
        base_p[s] = 0.2 + 0.25 * ud(rng);
        site_sign[s] = ud(rng) < 0.5 ? -1.0 : 1.0;
    }
    // amplitude kept small so pooled genotype counts stay near the
    // random-mating expectation and survive the HWE filter
    const double gen_amp = std::min(0.12, 0.04 * spec.separation);

    SynthTables out;
    for (std::size_t s = 0; s < spec.snp_count; ++s)
        out.genotype.sites.push_back({"rs" + std::to_string(100000 + s), "A", "G"});
    out.mri.width = spec.img_width;
    out.pet.width = spec.img_width;

    const double kClinicalBase[6] = {75.0, 22.0, 24.0, 1.0, 5.0, 3.0};
    const double kClinicalScale[6] = {5.0, 3.0, 2.0, 0.5, 2.0, 1.5};

    auto signal_shift = [&](std::size_t modality, std::size_t cls, std::size_t comp) {
        // modality: 0 clinical numeric, 1 mri, 2 pet
        if (split) {
            const double coef = (modality == 2) ? detail::class_coef_split_b(cls)
                                                : detail::class_coef_split_a(cls);
            return spec.separation * coef * dirs[modality][0][comp];
        }
        double acc = 0.0;
        for (std::size_t a = 0; a < kNumClasses; ++a)
            acc += detail::class_coef_shared(cls, a) * dirs[modality][a][comp];
        return spec.separation * acc;
    };

    char idbuf[32];
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t cls = i / spec.n_per_class;
        std::snprintf(idbuf, sizeof(idbuf), "SYN%04zu", i + 1);
        const std::string id = idbuf;
        const double latent = nd(rng);

        ClinicalRow row;
        row.subject_id = id;
        row.gender = ud(rng) < 0.5 ? 'M' : 'F';
        row.label = static_cast<int>(cls);
        double numeric[6];
        for (std::size_t c = 0; c < 6; ++c) {
            const double z = nd(rng) + signal_shift(0, cls, c) +
                             spec.cross_corr * latent * nuisance[0][c];
            numeric[c] = kClinicalBase[c] + kClinicalScale[c] * z;
        }
        row.age = numeric[0];
        row.moca = numeric[1];
        row.mmse = numeric[2];
        row.cdr = numeric[3];
        row.faq = numeric[4];
        row.gds = numeric[5];
        out.clinical.rows.push_back(row);

        std::vector<GenotypeCall> calls(spec.snp_count);
        for (std::size_t s = 0; s < spec.snp_count; ++s) {
            const double coef = split ? detail::class_coef_split_b(cls)
                                      : detail::class_coef_shared(cls, s % kNumClasses);
            const double p =
                std::clamp(base_p[s] + gen_amp * coef * site_sign[s], 0.02, 0.98);
            int gt = 0;
            if (ud(rng) < p) ++gt;
            if (ud(rng) < p) ++gt;
            GenotypeCall call;
            if (ud(rng) < 0.01) {
                call.gt = -1;  // raw missing
            } else {
                call.gt = gt;
                call.gq = ud(rng) < 0.03 ? 5 + static_cast<int>(ud(rng) * 14.0)
                                         : 25 + static_cast<int>(ud(rng) * 35.0);
            }
            calls[s] = call;
        }
        out.genotype.subjects.push_back(id);
        out.genotype.calls.push_back(std::move(calls));

        std::vector<double> mri(spec.img_width), pet(spec.img_width);
        for (std::size_t c = 0; c < spec.img_width; ++c) {
            mri[c] = nd(rng) + signal_shift(1, cls, c) +
                     spec.cross_corr * latent * nuisance[1][c];
            pet[c] = nd(rng) + signal_shift(2, cls, c) +
                     spec.cross_corr * latent * nuisance[2][c];
        }
        out.mri.subjects.push_back(id);
        out.mri.rows.push_back(std::move(mri));
        out.pet.subjects.push_back(id);
        out.pet.rows.push_back(std::move(pet));
    }
    return out;
}

}  // namespace acmca
