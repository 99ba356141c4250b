#include "bump/evaluate.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "bump/errors.hpp"
#include "bump/svgplot.hpp"

namespace bump::evaluate {

double accuracy(const std::vector<int>& predictions, const std::vector<int>& labels) {
    if (predictions.size() != labels.size())
        throw std::invalid_argument("predictions and labels differ in length");
    if (predictions.empty()) throw std::invalid_argument("nothing to score");
    std::size_t correct = 0;
    for (std::size_t i = 0; i < labels.size(); ++i)
        if (predictions[i] == labels[i]) ++correct;
    return static_cast<double>(correct) / static_cast<double>(labels.size());
}

namespace {

void check_scores(const std::vector<double>& scores, const std::vector<int>& labels) {
    if (scores.size() != labels.size())
        throw std::invalid_argument("scores and labels differ in length");
    if (scores.empty()) throw std::invalid_argument("nothing to score");
    for (int l : labels)
        if (l != 0 && l != 1) throw std::invalid_argument("labels must be 0 or 1");
    for (double s : scores)
        if (!std::isfinite(s)) throw std::invalid_argument("scores must be finite");
}

}  // namespace

RocCurve roc(const std::vector<double>& scores, const std::vector<int>& labels) {
    check_scores(scores, labels);
    const auto n_pos = static_cast<std::size_t>(
        std::count(labels.begin(), labels.end(), 1));
    const std::size_t n_neg = labels.size() - n_pos;
    if (n_pos == 0 || n_neg == 0)
        throw std::invalid_argument("ROC needs both classes present");

    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return scores[a] > scores[b];
    });

    RocCurve curve;
    curve.points.push_back({std::numeric_limits<double>::infinity(), 0.0, 0.0});
    std::size_t tp = 0, fp = 0;
    std::size_t i = 0;
    while (i < order.size()) {
        const double s = scores[order[i]];
        // Whole tie group moves together.
        while (i < order.size() && scores[order[i]] == s) {
            if (labels[order[i]] == 1)
                ++tp;
            else
                ++fp;
            ++i;
        }
        curve.points.push_back({s, static_cast<double>(fp) / static_cast<double>(n_neg),
                                static_cast<double>(tp) / static_cast<double>(n_pos)});
    }
    return curve;
}

double auc(const RocCurve& curve) {
    if (curve.points.size() < 2) throw std::invalid_argument("ROC curve is degenerate");
    double area = 0;
    for (std::size_t i = 1; i < curve.points.size(); ++i) {
        const auto& a = curve.points[i - 1];
        const auto& b = curve.points[i];
        if (b.fpr < a.fpr || b.tpr < a.tpr)
            throw std::invalid_argument("ROC curve is not monotone");
        area += (b.fpr - a.fpr) * (a.tpr + b.tpr) / 2.0;
    }
    return area;
}

Confusion confusion_at(const std::vector<double>& scores, const std::vector<int>& labels,
                       double threshold) {
    check_scores(scores, labels);
    Confusion c;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        const bool positive = scores[i] >= threshold;
        if (labels[i] == 1)
            positive ? ++c.tp : ++c.fn;
        else
            positive ? ++c.fp : ++c.tn;
    }
    return c;
}

std::vector<SweepRow> threshold_sweep(const std::vector<double>& scores,
                                      const std::vector<int>& labels,
                                      const std::vector<double>& thresholds) {
    std::vector<SweepRow> rows;
    rows.reserve(thresholds.size());
    for (double t : thresholds) {
        const Confusion c = confusion_at(scores, labels, t);
        SweepRow row;
        row.threshold = t;
        row.tpr = c.tp + c.fn ? static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn)
                              : 0.0;
        row.fpr = c.fp + c.tn ? static_cast<double>(c.fp) / static_cast<double>(c.fp + c.tn)
                              : 0.0;
        row.precision =
            c.tp + c.fp ? static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp)
                        : 1.0;
        rows.push_back(row);
    }
    return rows;
}

std::vector<SweepRow> threshold_sweep(const std::vector<double>& scores,
                                      const std::vector<int>& labels) {
    std::vector<double> thresholds(scores);
    std::sort(thresholds.begin(), thresholds.end(), std::greater<>());
    thresholds.erase(std::unique(thresholds.begin(), thresholds.end()),
                     thresholds.end());
    return threshold_sweep(scores, labels, thresholds);
}

void write_roc_csv(const RocCurve& curve, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw io_error("cannot open " + path.string() + " for writing");
    out << "threshold,fpr,tpr\n";
    char line[128];
    for (const auto& p : curve.points) {
        std::snprintf(line, sizeof(line), "%.9g,%.9g,%.9g\n", p.threshold, p.fpr, p.tpr);
        out << line;
    }
    if (!out) throw io_error("short write to " + path.string());
}

void write_roc_svg(const RocCurve& curve, const std::filesystem::path& path,
                   const std::string& title) {
    svgplot::Series roc_series{"ROC", {}, {}};
    for (const auto& p : curve.points) {
        roc_series.x.push_back(p.fpr);
        roc_series.y.push_back(p.tpr);
    }
    svgplot::Series chance{"chance", {0.0, 1.0}, {0.0, 1.0}};
    svgplot::PlotLayout layout;  // unit square in the default frame
    svgplot::write_line_chart({roc_series, chance}, layout, title,
                              "False positive rate", "True positive rate", path);
}

void write_auc_table_csv(const std::vector<AucRow>& rows,
                         const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw io_error("cannot open " + path.string() + " for writing");
    out << "model,auc\n";
    char line[160];
    for (const auto& r : rows) {
        std::snprintf(line, sizeof(line), "%s,%.9g\n", r.model.c_str(), r.auc);
        out << line;
    }
    if (!out) throw io_error("short write to " + path.string());
}

}  // namespace bump::evaluate
