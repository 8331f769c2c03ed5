#pragma once

#include <string>
#include <utility>
#include <vector>

namespace cfgnet {

struct RocPoint {
  double fpr = 0.0;
  double tpr = 0.0;
  double threshold = 0.0;
};

/// Points sorted by fpr with nondecreasing tpr. One-vs-rest curves start at
/// (0,0) and end at (1,1); macro-averaged curves keep the (1,1) end but may
/// start above tpr=0 when some class curve is vertical at fpr=0.
struct RocCurve {
  std::vector<RocPoint> points;
};

/// Fraction of positions where predicted == actual.
double accuracy(const std::vector<int>& predicted, const std::vector<int>& actual);

/// Binary ROC for one class against the rest. Thresholds sweep the distinct
/// scores of the class's probability column, highest first; tied scores
/// share a step. Starts at (0,0) with an infinite threshold, ends at (1,1).
/// Errors when the class is absent from `actual` (and when no negatives
/// exist, which leaves fpr undefined).
RocCurve roc_one_vs_rest(const std::vector<std::vector<double>>& scores,
                         const std::vector<int>& actual, int positive_class);

/// Equal-weight average of per-class curves: tpr is averaged over the union
/// of all fpr breakpoints, interpolating each curve linearly and taking the
/// top of any vertical segment at a shared fpr.
RocCurve macro_average_roc(const std::vector<RocCurve>& curves);

/// Pools every (sample, class) decision — one positive and K-1 negatives per
/// sample — into a single binary ROC, weighting each decision equally.
RocCurve micro_average_roc(const std::vector<std::vector<double>>& scores,
                           const std::vector<int>& actual);

/// Trapezoidal area over fpr.
double auc(const RocCurve& curve);

/// CSV with header `class,fpr,tpr,threshold`, one row per point.
std::string roc_csv(const std::string& class_name, const RocCurve& curve);

/// CSV with header `metric,value`.
std::string summary_csv(const std::vector<std::pair<std::string, double>>& rows);

/// Standalone SVG line plot of the named curves over the unit square.
std::string svg_roc_plot(const std::vector<std::pair<std::string, RocCurve>>& curves);

}  // namespace cfgnet
