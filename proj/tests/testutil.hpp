// Shared test helpers: finite-difference gradient checks, independent
// oracles, and the hand-built genotype filtering fixture. Everything here is
// deliberately independent of the library's computation paths it checks.
#pragma once

#include <cmath>
#include <complex>
#include <functional>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "acmca/data.hpp"
#include "acmca/tensor.hpp"

namespace testutil {

using acmca::Graph;
using acmca::Tensor;

// ---------------------------------------------------------------------------
// central finite-difference gradient check

struct GradCheck {
    bool ok = true;
    std::string detail;
};

// Compares backward() gradients of every leaf against central differences of
// the rebuilt loss. |analytic - fd| <= tol * max(1, |analytic|, |fd|).
// max_coords > 0 samples that many coordinates per leaf.
inline GradCheck check_gradients(const std::vector<Tensor>& leaves,
                                 const std::function<Tensor(Graph&)>& build_loss, double tol,
                                 double h = 1e-6, std::size_t max_coords = 0,
                                 std::mt19937_64* rng = nullptr) {
    GradCheck res;
    for (const auto& l : leaves) l.zero_grad();
    {
        Graph g;
        Tensor loss = build_loss(g);
        g.backward(loss);
    }
    std::vector<std::vector<double>> analytic;
    for (const auto& l : leaves)
        analytic.push_back(l.has_grad() ? l.grad() : std::vector<double>(l.size(), 0.0));

    auto loss_value = [&] {
        Graph g;
        return build_loss(g).item();
    };

    for (std::size_t li = 0; li < leaves.size(); ++li) {
        auto& vals = const_cast<Tensor&>(leaves[li]).values_mut();
        std::vector<std::size_t> coords;
        if (max_coords == 0 || max_coords >= vals.size()) {
            coords.resize(vals.size());
            for (std::size_t i = 0; i < vals.size(); ++i) coords[i] = i;
        } else {
            std::uniform_int_distribution<std::size_t> pick(0, vals.size() - 1);
            for (std::size_t i = 0; i < max_coords; ++i) coords.push_back(pick(*rng));
        }
        for (std::size_t c : coords) {
            const double keep = vals[c];
            vals[c] = keep + h;
            const double fp = loss_value();
            vals[c] = keep - h;
            const double fm = loss_value();
            vals[c] = keep;
            const double fd = (fp - fm) / (2.0 * h);
            const double an = analytic[li][c];
            const double err = std::fabs(an - fd);
            const double scale = std::max({1.0, std::fabs(an), std::fabs(fd)});
            if (err > tol * scale) {
                std::ostringstream os;
                os << "leaf " << li << " coord " << c << ": analytic " << an << " vs fd " << fd
                   << " (err " << err << ", tol " << tol * scale << ")";
                res.ok = false;
                res.detail = os.str();
                return res;
            }
        }
    }
    for (const auto& l : leaves) l.zero_grad();
    return res;
}

// ---------------------------------------------------------------------------
// independent oracles

// O(N^2) complex DFT written with plain loops (no shared code with fft.hpp).
inline std::vector<std::complex<double>> dft_oracle(const std::vector<std::complex<double>>& x) {
    const std::size_t n = x.size();
    std::vector<std::complex<double>> out(n);
    for (std::size_t k = 0; k < n; ++k) {
        std::complex<double> acc{0, 0};
        for (std::size_t j = 0; j < n; ++j) {
            const double ang = -2.0 * std::numbers::pi * static_cast<double>(j) *
                               static_cast<double>(k) / static_cast<double>(n);
            acc += x[j] * std::complex<double>{std::cos(ang), std::sin(ang)};
        }
        out[k] = acc;
    }
    return out;
}

// Real part of the 2D DFT of a rows x cols real matrix, triple-loop style.
inline std::vector<double> dft2_real_oracle(const std::vector<double>& x, std::size_t rows,
                                            std::size_t cols) {
    std::vector<double> out(rows * cols, 0.0);
    for (std::size_t kr = 0; kr < rows; ++kr)
        for (std::size_t kc = 0; kc < cols; ++kc) {
            std::complex<double> acc{0, 0};
            for (std::size_t r = 0; r < rows; ++r)
                for (std::size_t c = 0; c < cols; ++c) {
                    const double ang =
                        -2.0 * std::numbers::pi *
                        (static_cast<double>(kr) * static_cast<double>(r) /
                             static_cast<double>(rows) +
                         static_cast<double>(kc) * static_cast<double>(c) /
                             static_cast<double>(cols));
                    acc += x[r * cols + c] * std::complex<double>{std::cos(ang), std::sin(ang)};
                }
            out[kr * cols + kc] = acc.real();
        }
    return out;
}

// Pairwise-ordering AUC: correctly ordered (positive, negative) pairs with
// ties counted 1/2, over n_pos * n_neg.
inline double auc_pairwise_oracle(const std::vector<double>& scores,
                                  const std::vector<bool>& positive) {
    double wins = 0;
    std::size_t npos = 0, nneg = 0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        if (!positive[i]) continue;
        ++npos;
        for (std::size_t j = 0; j < scores.size(); ++j) {
            if (positive[j]) continue;
            if (scores[i] > scores[j])
                wins += 1.0;
            else if (scores[i] == scores[j])
                wins += 0.5;
        }
    }
    for (bool p : positive) nneg += !p;
    return wins / (static_cast<double>(npos) * static_cast<double>(nneg));
}

// Nearest-centroid classifier on concatenated raw modality features;
// centroids fit on the train rows.
inline double nearest_centroid_accuracy(const acmca::Dataset& train,
                                        const acmca::Dataset& test) {
    auto concat_row = [](const acmca::Dataset& d, std::size_t i) {
        std::vector<double> v = d.clinical[i];
        v.insert(v.end(), d.genetic[i].begin(), d.genetic[i].end());
        v.insert(v.end(), d.mri[i].begin(), d.mri[i].end());
        v.insert(v.end(), d.pet[i].begin(), d.pet[i].end());
        return v;
    };
    const std::size_t w = concat_row(train, 0).size();
    std::vector<std::vector<double>> centroid(acmca::kNumClasses, std::vector<double>(w, 0.0));
    std::vector<std::size_t> count(acmca::kNumClasses, 0);
    for (std::size_t i = 0; i < train.size(); ++i) {
        const auto v = concat_row(train, i);
        const auto c = static_cast<std::size_t>(train.labels[i]);
        for (std::size_t j = 0; j < w; ++j) centroid[c][j] += v[j];
        ++count[c];
    }
    for (std::size_t c = 0; c < acmca::kNumClasses; ++c)
        for (auto& x : centroid[c]) x /= static_cast<double>(count[c]);
    std::size_t hits = 0;
    for (std::size_t i = 0; i < test.size(); ++i) {
        const auto v = concat_row(test, i);
        int best = 0;
        double best_d = std::numeric_limits<double>::max();
        for (std::size_t c = 0; c < acmca::kNumClasses; ++c) {
            double d2 = 0;
            for (std::size_t j = 0; j < w; ++j)
                d2 += (v[j] - centroid[c][j]) * (v[j] - centroid[c][j]);
            if (d2 < best_d) {
                best_d = d2;
                best = static_cast<int>(c);
            }
        }
        hits += best == test.labels[i];
    }
    return static_cast<double>(hits) / static_cast<double>(test.size());
}

// Runs the full synthetic pipeline (filter, encode, intersect) and a
// stratified split; shared by learnability checks.
inline std::pair<acmca::Dataset, acmca::Dataset> synth_split(const acmca::SynthSpec& spec,
                                                             double test_fraction,
                                                             std::uint64_t split_seed,
                                                             bool normalize = true) {
    auto tables = acmca::synth_cohort(spec);
    auto filtered = acmca::filter_snps(tables.genotype);
    auto encoded = acmca::encode_alleles(filtered.table);
    auto cohort = acmca::intersect_cohort(tables.clinical, encoded, tables.mri, tables.pet);
    auto idx = acmca::split_stratified(cohort.labels, test_fraction, split_seed);
    acmca::Dataset train = acmca::take_rows(cohort, idx.train);
    acmca::Dataset test = acmca::take_rows(cohort, idx.test);
    if (normalize) {
        auto norm = acmca::fit_clinical_norm(train.clinical);
        train.clinical = acmca::apply_clinical_norm(train.clinical, norm);
        test.clinical = acmca::apply_clinical_norm(test.clinical, norm);
    }
    return {std::move(train), std::move(test)};
}

// ---------------------------------------------------------------------------
// hand-built genotype filtering fixture: 10 sites x 100 subjects with
// keep/drop decisions worked out by hand at the default thresholds
// (HWE p < 0.05 drops, GQ >= 20, MAF >= 0.01, missing rate <= 0.05).

struct FixtureSite {
    std::string id;
    std::size_t n0, n1, n2;   // called genotype counts (before GQ masking)
    std::size_t raw_missing;  // ./. calls
    std::size_t low_gq;       // calls with GQ 15, taken from the 0/0 group
    bool expect_kept;
    std::string expect_reason;  // when dropped
};

inline const std::vector<FixtureSite>& hwe_fixture_sites() {
    // hand-computed: chi2(36,48,16)=0 -> p=1; maf(99,1,0)=0.005;
    // 6/100 missing = 0.06; chi2(50,0,50)=100; chi2(49,42,9)=0;
    // site6 masks 6 calls -> missing 0.06; site7 masks 5 -> missing 0.05,
    // chi2(57,33,5)=0.006184 -> p=0.9373; chi2(20,60,20)=4 -> p=0.045500;
    // chi2(21,58,21)=2.56 -> p=0.109599; maf(96,4,0)=0.02,
    // chi2=0.041649 -> p=0.838290.
    static const std::vector<FixtureSite> sites = {
        {"fx01_hwe_exact", 36, 48, 16, 0, 0, true, ""},
        {"fx02_rare_allele", 99, 1, 0, 0, 0, false, "maf"},
        {"fx03_gappy", 46, 40, 8, 6, 0, false, "missing_rate"},
        {"fx04_no_hets", 50, 0, 50, 0, 0, false, "hwe"},
        {"fx05_typical", 49, 42, 9, 0, 0, true, ""},
        {"fx06_low_gq_many", 50, 40, 10, 0, 6, false, "missing_rate"},
        {"fx07_low_gq_edge", 62, 33, 5, 0, 5, true, ""},
        {"fx08_het_excess", 20, 60, 20, 0, 0, false, "hwe"},
        {"fx09_het_mild", 21, 58, 21, 0, 0, true, ""},
        {"fx10_maf_edge", 96, 4, 0, 0, 0, true, ""},
    };
    return sites;
}

inline acmca::GenotypeTable hwe_fixture_table() {
    const auto& sites = hwe_fixture_sites();
    const std::size_t nsub = 100;
    acmca::GenotypeTable t;
    for (const auto& s : sites) t.sites.push_back({s.id, "A", "G"});
    for (std::size_t r = 0; r < nsub; ++r) {
        char buf[16];
        std::snprintf(buf, sizeof(buf), "FX%03zu", r + 1);
        t.subjects.emplace_back(buf);
    }
    t.calls.assign(nsub, std::vector<acmca::GenotypeCall>(sites.size()));
    for (std::size_t s = 0; s < sites.size(); ++s) {
        const auto& fx = sites[s];
        std::size_t r = 0;
        auto put = [&](int gt, int gq, std::size_t count) {
            for (std::size_t i = 0; i < count; ++i, ++r) t.calls[r][s] = {gt, gq};
        };
        put(0, 15, fx.low_gq);
        put(0, 30, fx.n0 - fx.low_gq);
        put(1, 30, fx.n1);
        put(2, 30, fx.n2);
        put(-1, 0, fx.raw_missing);
        if (r != nsub) throw std::logic_error("fixture site " + fx.id + " does not sum to 100");
    }
    return t;
}

}  // namespace testutil
