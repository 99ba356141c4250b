#pragma once

// Classification metrics: accuracy, ROC curves by descending-score sweep
// with tie grouping, trapezoidal AUC, threshold sweeps, CSV/SVG export.

#include <filesystem>
#include <string>
#include <vector>

namespace bump::evaluate {

// Fraction of matching entries.
double accuracy(const std::vector<int>& predictions, const std::vector<int>& labels);

struct RocPoint {
    double threshold = 0;  // score >= threshold predicts positive
    double fpr = 0;
    double tpr = 0;
};

struct RocCurve {
    std::vector<RocPoint> points;  // from (0,0) at +inf to (1,1) at the min score
};

// Standard sweep over distinct scores, descending, ties grouped; labels are
// 0/1 and both classes must be present.
RocCurve roc(const std::vector<double>& scores, const std::vector<int>& labels);

// Trapezoidal area; equals the Mann-Whitney pair statistic with half credit
// for ties.
double auc(const RocCurve& curve);

struct Confusion {
    std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
};
Confusion confusion_at(const std::vector<double>& scores, const std::vector<int>& labels,
                       double threshold);

struct SweepRow {
    double threshold = 0;
    double tpr = 0;
    double fpr = 0;
    double precision = 0;  // 1.0 when nothing is predicted positive
};
std::vector<SweepRow> threshold_sweep(const std::vector<double>& scores,
                                      const std::vector<int>& labels,
                                      const std::vector<double>& thresholds);
// Sweep over the distinct scores, descending.
std::vector<SweepRow> threshold_sweep(const std::vector<double>& scores,
                                      const std::vector<int>& labels);

void write_roc_csv(const RocCurve& curve, const std::filesystem::path& path);
void write_roc_svg(const RocCurve& curve, const std::filesystem::path& path,
                   const std::string& title = "ROC");

struct AucRow {
    std::string model;
    double auc = 0;
};
void write_auc_table_csv(const std::vector<AucRow>& rows,
                         const std::filesystem::path& path);

}  // namespace bump::evaluate
