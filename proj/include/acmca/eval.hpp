#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <string>
#include <vector>

#include "acmca/data.hpp"
#include "acmca/error.hpp"
#include "acmca/io.hpp"
#include "acmca/svg.hpp"
#include "acmca/tensor.hpp"

namespace acmca {

// ---------------------------------------------------------------------------
// confusion matrix

struct ConfusionMatrix {
    std::array<std::array<long, kNumClasses>, kNumClasses> counts{};  // [true][pred]

    long total() const {
        long t = 0;
        for (const auto& row : counts)
            for (long c : row) t += c;
        return t;
    }
};

inline ConfusionMatrix confusion(const std::vector<int>& preds, const std::vector<int>& labels) {
    if (preds.size() != labels.size())
        throw UsageError("confusion: " + std::to_string(preds.size()) + " predictions vs " +
                         std::to_string(labels.size()) + " labels");
    ConfusionMatrix cm;
    for (std::size_t i = 0; i < preds.size(); ++i) {
        const int t = labels[i], p = preds[i];
        if (t < 0 || t >= static_cast<int>(kNumClasses) || p < 0 ||
            p >= static_cast<int>(kNumClasses))
            throw UsageError("confusion: class index out of range at sample " +
                             std::to_string(i));
        ++cm.counts[static_cast<std::size_t>(t)][static_cast<std::size_t>(p)];
    }
    return cm;
}

// Plain fraction correct: trace / total.
inline double micro_accuracy(const ConfusionMatrix& cm) {
    const long total = cm.total();
    if (total == 0) throw UsageError("micro_accuracy of an empty confusion matrix");
    long trace = 0;
    for (std::size_t c = 0; c < kNumClasses; ++c) trace += cm.counts[c][c];
    return static_cast<double>(trace) / static_cast<double>(total);
}

// ---------------------------------------------------------------------------
// accuracy / recall / specificity / F1, one-vs-rest with macro averaging

struct ClassMetrics {
    double accuracy = 0, recall = 0, specificity = 0, f1 = 0;
    // set where a zero denominator forced the value to 0
    bool recall_flag = false, specificity_flag = false, f1_flag = false;
};

struct MetricsReport {
    std::array<ClassMetrics, kNumClasses> per_class{};
    ClassMetrics macro{};
};

inline MetricsReport metrics(const ConfusionMatrix& cm) {
    const double total = static_cast<double>(cm.total());
    if (total == 0) throw UsageError("metrics of an empty confusion matrix");
    MetricsReport rep;
    for (std::size_t c = 0; c < kNumClasses; ++c) {
        double tp = static_cast<double>(cm.counts[c][c]);
        double fn = 0, fp = 0;
        for (std::size_t j = 0; j < kNumClasses; ++j) {
            if (j == c) continue;
            fn += static_cast<double>(cm.counts[c][j]);
            fp += static_cast<double>(cm.counts[j][c]);
        }
        const double tn = total - tp - fn - fp;
        ClassMetrics& m = rep.per_class[c];
        m.accuracy = (tp + tn) / total;
        if (tp + fn > 0)
            m.recall = tp / (tp + fn);
        else
            m.recall_flag = true;
        if (tn + fp > 0)
            m.specificity = tn / (tn + fp);
        else
            m.specificity_flag = true;
        if (2 * tp + fp + fn > 0)
            m.f1 = 2 * tp / (2 * tp + fp + fn);
        else
            m.f1_flag = true;
    }
    for (std::size_t c = 0; c < kNumClasses; ++c) {
        rep.macro.accuracy += rep.per_class[c].accuracy / kNumClasses;
        rep.macro.recall += rep.per_class[c].recall / kNumClasses;
        rep.macro.specificity += rep.per_class[c].specificity / kNumClasses;
        rep.macro.f1 += rep.per_class[c].f1 / kNumClasses;
        rep.macro.recall_flag |= rep.per_class[c].recall_flag;
        rep.macro.specificity_flag |= rep.per_class[c].specificity_flag;
        rep.macro.f1_flag |= rep.per_class[c].f1_flag;
    }
    return rep;
}

// ---------------------------------------------------------------------------
// ROC / AUC

struct RocPoint {
    double fpr = 0, tpr = 0;
};

struct RocCurve {
    std::vector<RocPoint> points;  // starts at (0,0), ends at (1,1)
    double auc = 0;
    bool defined = true;  // false when the class has no positives or no negatives
};

struct RocReport {
    std::array<RocCurve, kNumClasses> per_class{};
    double macro_auc = 0;
    std::size_t defined_classes = 0;
};

// One-vs-rest ROC by threshold sweep over distinct scores, descending; tied
// scores move together, so ties contribute diagonal segments and the
// trapezoidal AUC counts them as half-ordered pairs.
inline RocCurve roc_curve_binary(const std::vector<double>& scores,
                                 const std::vector<bool>& positive) {
    const std::size_t n = scores.size();
    std::size_t npos = 0;
    for (bool b : positive) npos += b;
    const std::size_t nneg = n - npos;

    RocCurve curve;
    if (npos == 0 || nneg == 0) {
        curve.defined = false;
        curve.points = {{0, 0}, {1, 1}};
        return curve;
    }
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (scores[a] != scores[b]) return scores[a] > scores[b];
        return a < b;
    });

    curve.points.push_back({0, 0});
    std::size_t tp = 0, fp = 0;
    double auc = 0;
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        std::size_t dtp = 0, dfp = 0;
        while (j < n && scores[order[j]] == scores[order[i]]) {
            if (positive[order[j]])
                ++dtp;
            else
                ++dfp;
            ++j;
        }
        const double fpr0 = static_cast<double>(fp) / static_cast<double>(nneg);
        const double tpr0 = static_cast<double>(tp) / static_cast<double>(npos);
        tp += dtp;
        fp += dfp;
        const double fpr1 = static_cast<double>(fp) / static_cast<double>(nneg);
        const double tpr1 = static_cast<double>(tp) / static_cast<double>(npos);
        auc += (fpr1 - fpr0) * (tpr0 + tpr1) / 2.0;
        curve.points.push_back({fpr1, tpr1});
        i = j;
    }
    curve.auc = auc;
    return curve;
}

inline RocReport roc_auc(const Tensor& scores, const std::vector<int>& labels) {
    if (scores.rank() != 2 || scores.dim(1) != kNumClasses)
        throw UsageError("roc_auc wants (n, 3) scores, got " + shape_str(scores.shape()));
    if (scores.dim(0) != labels.size())
        throw UsageError("roc_auc: score rows and labels differ in length");
    RocReport rep;
    const auto& v = scores.values();
    const std::size_t n = labels.size();
    for (std::size_t c = 0; c < kNumClasses; ++c) {
        std::vector<double> s(n);
        std::vector<bool> pos(n);
        for (std::size_t i = 0; i < n; ++i) {
            s[i] = v[i * kNumClasses + c];
            pos[i] = labels[i] == static_cast<int>(c);
        }
        rep.per_class[c] = roc_curve_binary(s, pos);
        if (rep.per_class[c].defined) {
            rep.macro_auc += rep.per_class[c].auc;
            ++rep.defined_classes;
        }
    }
    if (rep.defined_classes > 0) rep.macro_auc /= static_cast<double>(rep.defined_classes);
    return rep;
}

// TPR of a curve at a given FPR by linear interpolation along the polyline.
inline double roc_interp(const RocCurve& c, double fpr) {
    const auto& p = c.points;
    if (p.empty()) return 0.0;
    if (fpr <= p.front().fpr) return p.front().tpr;
    for (std::size_t i = 1; i < p.size(); ++i) {
        if (fpr <= p[i].fpr) {
            const double span = p[i].fpr - p[i - 1].fpr;
            if (span <= 0) return std::max(p[i].tpr, p[i - 1].tpr);
            const double w = (fpr - p[i - 1].fpr) / span;
            return p[i - 1].tpr + w * (p[i].tpr - p[i - 1].tpr);
        }
    }
    return p.back().tpr;
}

// Macro-average ROC over the defined classes on a fixed FPR grid.
inline std::vector<std::pair<double, double>> macro_roc_points(const RocReport& rep) {
    std::vector<std::pair<double, double>> pts;
    for (int i = 0; i <= 100; ++i) {
        const double fpr = static_cast<double>(i) / 100.0;
        double tpr = 0;
        std::size_t k = 0;
        for (const auto& c : rep.per_class)
            if (c.defined) {
                tpr += roc_interp(c, fpr);
                ++k;
            }
        pts.emplace_back(fpr, k ? tpr / static_cast<double>(k) : 0.0);
    }
    return pts;
}

// ---------------------------------------------------------------------------
// reports

struct EvalReport {
    std::string variant;
    std::size_t samples = 0;
    ConfusionMatrix cm;
    MetricsReport metric;
    RocReport roc;
};

inline EvalReport evaluate_scores(const std::string& variant, const Tensor& scores,
                                  const std::vector<int>& labels) {
    EvalReport rep;
    rep.variant = variant;
    rep.samples = labels.size();
    rep.cm = confusion(argmax_rows(scores), labels);
    rep.metric = metrics(rep.cm);
    rep.roc = roc_auc(scores, labels);
    return rep;
}

namespace detail {

inline std::string metric_cell(double v, bool flag) {
    std::string s = fmt_fixed(v, 4);
    if (flag) s += "*";
    return s;
}

}  // namespace detail

// metrics_<variant>.csv: per-class rows plus the macro row; a trailing *
// marks a zero-denominator cell forced to 0.
inline std::string report_csv(const EvalReport& rep) {
    CsvWriter w;
    w.meta("variant", rep.variant);
    w.meta("samples", static_cast<long>(rep.samples));
    for (std::size_t c = 0; c < kNumClasses; ++c) {
        std::string row;
        for (std::size_t p = 0; p < kNumClasses; ++p) {
            if (p) row += ' ';
            row += std::to_string(rep.cm.counts[c][p]);
        }
        w.meta(std::string("confusion_") + kClassNames[c], row);
    }
    w.header({"class", "accuracy", "recall", "specificity", "f1", "auc"});
    for (std::size_t c = 0; c < kNumClasses; ++c) {
        const auto& m = rep.metric.per_class[c];
        const auto& r = rep.roc.per_class[c];
        w.row({kClassNames[c], fmt_fixed(m.accuracy, 4),
               detail::metric_cell(m.recall, m.recall_flag),
               detail::metric_cell(m.specificity, m.specificity_flag),
               detail::metric_cell(m.f1, m.f1_flag),
               r.defined ? fmt_fixed(r.auc, 4) : "undefined"});
    }
    const auto& mm = rep.metric.macro;
    w.row({"macro", fmt_fixed(mm.accuracy, 4), detail::metric_cell(mm.recall, mm.recall_flag),
           detail::metric_cell(mm.specificity, mm.specificity_flag),
           detail::metric_cell(mm.f1, mm.f1_flag), fmt_fixed(rep.roc.macro_auc, 4)});
    return w.str();
}

// comparison.csv: one row per variant, macro metrics, column order
// accuracy / recall / specificity / F1 / AUC.
inline std::string comparison_csv(const std::vector<EvalReport>& reports) {
    CsvWriter w;
    w.header({"variant", "accuracy", "recall", "specificity", "f1", "auc"});
    for (const auto& rep : reports) {
        const auto& m = rep.metric.macro;
        w.row({rep.variant, fmt_fixed(m.accuracy, 4), detail::metric_cell(m.recall, m.recall_flag),
               detail::metric_cell(m.specificity, m.specificity_flag),
               detail::metric_cell(m.f1, m.f1_flag), fmt_fixed(rep.roc.macro_auc, 4)});
    }
    return w.str();
}

// Per-class curves plus the macro average for one variant.
inline std::string roc_svg(const EvalReport& rep) {
    std::vector<SvgSeries> series;
    for (std::size_t c = 0; c < kNumClasses; ++c) {
        const auto& curve = rep.roc.per_class[c];
        if (!curve.defined) continue;
        SvgSeries s;
        s.label = std::string(kClassNames[c]) + " (auc " + fmt_fixed(curve.auc, 3) + ")";
        for (const auto& p : curve.points) s.points.emplace_back(p.fpr, p.tpr);
        series.push_back(std::move(s));
    }
    SvgSeries macro;
    macro.label = "macro (auc " + fmt_fixed(rep.roc.macro_auc, 3) + ")";
    macro.points = macro_roc_points(rep.roc);
    series.push_back(std::move(macro));
    return line_plot_svg("ROC: " + rep.variant, "false positive rate", "true positive rate",
                         series, 0, 1, 0, 1, true);
}

// Overlaid macro-average curves across variants.
inline std::string comparison_roc_svg(const std::vector<EvalReport>& reports) {
    std::vector<SvgSeries> series;
    for (const auto& rep : reports) {
        SvgSeries s;
        s.label = rep.variant + " (auc " + fmt_fixed(rep.roc.macro_auc, 3) + ")";
        s.points = macro_roc_points(rep.roc);
        series.push_back(std::move(s));
    }
    return line_plot_svg("ROC comparison", "false positive rate", "true positive rate", series,
                         0, 1, 0, 1, true);
}

}  // namespace acmca
