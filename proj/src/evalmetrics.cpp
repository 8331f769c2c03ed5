#include "cfgnet/evalmetrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace cfgnet {

namespace {

// Staircase over the distinct score values, highest threshold first. At
// threshold t a sample is called positive when its score >= t.
RocCurve binary_roc(const std::vector<double>& score, const std::vector<char>& is_positive) {
  std::size_t pos = 0;
  for (char p : is_positive) pos += p ? 1 : 0;
  const std::size_t neg = score.size() - pos;
  if (pos == 0) throw std::invalid_argument("no positive samples for ROC");
  if (neg == 0) throw std::invalid_argument("no negative samples for ROC");

  std::vector<std::size_t> order(score.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return score[a] > score[b]; });

  RocCurve curve;
  curve.points.push_back({0.0, 0.0, std::numeric_limits<double>::infinity()});
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t i = 0;
  while (i < order.size()) {
    const double t = score[order[i]];
    while (i < order.size() && score[order[i]] == t) {
      if (is_positive[order[i]]) {
        ++tp;
      } else {
        ++fp;
      }
      ++i;
    }
    curve.points.push_back({static_cast<double>(fp) / static_cast<double>(neg),
                            static_cast<double>(tp) / static_cast<double>(pos), t});
  }
  // The lowest threshold classifies everything positive, so the sweep ends
  // at (1,1) on its own; keep the invariant explicit all the same.
  const RocPoint& last = curve.points.back();
  if (last.fpr != 1.0 || last.tpr != 1.0) {
    curve.points.push_back({1.0, 1.0, -std::numeric_limits<double>::infinity()});
  }
  return curve;
}

void check_scores(const std::vector<std::vector<double>>& scores, const std::vector<int>& actual) {
  if (scores.empty()) throw std::invalid_argument("empty score set");
  if (scores.size() != actual.size()) {
    throw std::invalid_argument("scores and labels differ in length");
  }
  const std::size_t k = scores.front().size();
  if (k == 0) throw std::invalid_argument("empty probability vectors");
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (scores[i].size() != k) throw std::invalid_argument("ragged score rows");
    for (double v : scores[i]) {
      // NaN in particular would wedge the threshold sweep: the tie loop
      // compares with == and NaN never equals itself.
      if (!std::isfinite(v)) {
        throw std::invalid_argument("non-finite score in row " + std::to_string(i));
      }
    }
  }
}

// tpr of a curve at the given fpr: the last point at an exact breakpoint
// (the top of any vertical segment), linear interpolation between
// neighboring points otherwise.
double tpr_at(const RocCurve& curve, double f) {
  const auto& pts = curve.points;
  if (pts.empty()) throw std::invalid_argument("empty ROC curve");
  if (f < pts.front().fpr) return pts.front().tpr;
  if (f >= pts.back().fpr) return pts.back().tpr;
  const auto it = std::upper_bound(pts.begin(), pts.end(), f,
                                   [](double v, const RocPoint& p) { return v < p.fpr; });
  const std::size_t lo = static_cast<std::size_t>(it - pts.begin()) - 1;
  if (pts[lo].fpr == f) return pts[lo].tpr;
  const RocPoint& a = pts[lo];
  const RocPoint& b = pts[lo + 1];
  const double w = (f - a.fpr) / (b.fpr - a.fpr);
  return a.tpr + w * (b.tpr - a.tpr);
}

void append_number(std::ostringstream& os, double v) {
  if (std::isnan(v)) {
    os << "nan";
  } else if (std::isinf(v)) {
    os << (v > 0 ? "inf" : "-inf");
  } else {
    os << v;
  }
}

}  // namespace

double accuracy(const std::vector<int>& predicted, const std::vector<int>& actual) {
  if (predicted.size() != actual.size()) {
    throw std::invalid_argument("prediction and label lists differ in length");
  }
  if (predicted.empty()) throw std::invalid_argument("cannot score an empty prediction list");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    if (predicted[i] == actual[i]) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(predicted.size());
}

RocCurve roc_one_vs_rest(const std::vector<std::vector<double>>& scores,
                         const std::vector<int>& actual, int positive_class) {
  check_scores(scores, actual);
  const std::size_t k = scores.front().size();
  if (positive_class < 0 || static_cast<std::size_t>(positive_class) >= k) {
    throw std::invalid_argument("positive class " + std::to_string(positive_class) +
                                " outside the score columns");
  }
  std::vector<double> s(scores.size());
  std::vector<char> pos(scores.size());
  std::size_t present = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    s[i] = scores[i][static_cast<std::size_t>(positive_class)];
    pos[i] = actual[i] == positive_class ? 1 : 0;
    present += pos[i];
  }
  if (present == 0) {
    throw std::invalid_argument("class " + std::to_string(positive_class) +
                                " does not occur in the labels");
  }
  if (present == scores.size()) {
    throw std::invalid_argument("class " + std::to_string(positive_class) +
                                " has no negatives; fpr is undefined");
  }
  return binary_roc(s, pos);
}

RocCurve macro_average_roc(const std::vector<RocCurve>& curves) {
  if (curves.empty()) throw std::invalid_argument("no curves to average");
  std::vector<double> grid;
  for (const RocCurve& c : curves) {
    if (c.points.empty()) throw std::invalid_argument("empty ROC curve in average");
    for (const RocPoint& p : c.points) grid.push_back(p.fpr);
  }
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());

  RocCurve avg;
  avg.points.reserve(grid.size());
  const double inv = 1.0 / static_cast<double>(curves.size());
  for (double f : grid) {
    double sum = 0.0;
    for (const RocCurve& c : curves) sum += tpr_at(c, f);
    avg.points.push_back({f, sum * inv, std::numeric_limits<double>::quiet_NaN()});
  }
  return avg;
}

RocCurve micro_average_roc(const std::vector<std::vector<double>>& scores,
                           const std::vector<int>& actual) {
  check_scores(scores, actual);
  const std::size_t k = scores.front().size();
  for (int label : actual) {
    if (label < 0 || static_cast<std::size_t>(label) >= k) {
      throw std::invalid_argument("label " + std::to_string(label) +
                                  " outside the score columns");
    }
  }
  std::vector<double> s;
  std::vector<char> pos;
  s.reserve(scores.size() * k);
  pos.reserve(scores.size() * k);
  for (std::size_t i = 0; i < scores.size(); ++i) {
    for (std::size_t c = 0; c < k; ++c) {
      s.push_back(scores[i][c]);
      pos.push_back(static_cast<std::size_t>(actual[i]) == c ? 1 : 0);
    }
  }
  return binary_roc(s, pos);
}

double auc(const RocCurve& curve) {
  const auto& pts = curve.points;
  if (pts.size() < 2) throw std::invalid_argument("ROC curve needs at least two points");
  double area = 0.0;
  for (std::size_t i = 1; i < pts.size(); ++i) {
    if (pts[i].fpr < pts[i - 1].fpr) {
      throw std::invalid_argument("ROC curve points are not sorted by fpr");
    }
    area += (pts[i].fpr - pts[i - 1].fpr) * (pts[i].tpr + pts[i - 1].tpr) * 0.5;
  }
  return area;
}

std::string roc_csv(const std::string& class_name, const RocCurve& curve) {
  std::ostringstream os;
  os.precision(10);
  os << "class,fpr,tpr,threshold\n";
  for (const RocPoint& p : curve.points) {
    os << class_name << ',';
    append_number(os, p.fpr);
    os << ',';
    append_number(os, p.tpr);
    os << ',';
    append_number(os, p.threshold);
    os << '\n';
  }
  return os.str();
}

std::string summary_csv(const std::vector<std::pair<std::string, double>>& rows) {
  std::ostringstream os;
  os.precision(10);
  os << "metric,value\n";
  for (const auto& [name, value] : rows) {
    os << name << ',';
    append_number(os, value);
    os << '\n';
  }
  return os.str();
}

std::string svg_roc_plot(const std::vector<std::pair<std::string, RocCurve>>& curves) {
  constexpr int kSize = 480;
  constexpr int kMargin = 50;
  constexpr int kPlot = kSize - 2 * kMargin;
  const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                           "#ff7f0e", "#8c564b", "#17becf"};
  const std::size_t ncolors = sizeof(palette) / sizeof(palette[0]);

  auto px = [&](double f) { return kMargin + f * kPlot; };
  auto py = [&](double t) { return kSize - kMargin - t * kPlot; };

  std::ostringstream os;
  os.precision(6);
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kSize << "\" height=\"" << kSize
     << "\" viewBox=\"0 0 " << kSize << ' ' << kSize << "\">\n";
  os << "  <rect width=\"" << kSize << "\" height=\"" << kSize << "\" fill=\"white\"/>\n";
  os << "  <rect x=\"" << kMargin << "\" y=\"" << kMargin << "\" width=\"" << kPlot
     << "\" height=\"" << kPlot << "\" fill=\"none\" stroke=\"#333\"/>\n";
  os << "  <line x1=\"" << px(0.0) << "\" y1=\"" << py(0.0) << "\" x2=\"" << px(1.0) << "\" y2=\""
     << py(1.0) << "\" stroke=\"#bbb\" stroke-dasharray=\"4 3\"/>\n";
  for (int tick = 0; tick <= 4; ++tick) {
    const double v = tick / 4.0;
    os << "  <text x=\"" << px(v) << "\" y=\"" << kSize - kMargin + 18
       << "\" font-size=\"11\" text-anchor=\"middle\">" << v << "</text>\n";
    os << "  <text x=\"" << kMargin - 8 << "\" y=\"" << py(v) + 4
       << "\" font-size=\"11\" text-anchor=\"end\">" << v << "</text>\n";
  }
  os << "  <text x=\"" << kSize / 2 << "\" y=\"" << kSize - 10
     << "\" font-size=\"12\" text-anchor=\"middle\">false positive rate</text>\n";
  os << "  <text x=\"14\" y=\"" << kSize / 2
     << "\" font-size=\"12\" text-anchor=\"middle\" transform=\"rotate(-90 14 " << kSize / 2
     << ")\">true positive rate</text>\n";

  std::size_t color = 0;
  int legend_y = kMargin + 14;
  for (const auto& [name, curve] : curves) {
    const char* c = palette[color % ncolors];
    ++color;
    os << "  <polyline fill=\"none\" stroke=\"" << c << "\" stroke-width=\"1.5\" points=\"";
    for (const RocPoint& p : curve.points) {
      os << px(p.fpr) << ',' << py(p.tpr) << ' ';
    }
    os << "\"/>\n";
    os << "  <line x1=\"" << kSize - kMargin - 130 << "\" y1=\"" << legend_y << "\" x2=\""
       << kSize - kMargin - 110 << "\" y2=\"" << legend_y << "\" stroke=\"" << c
       << "\" stroke-width=\"2\"/>\n";
    os << "  <text x=\"" << kSize - kMargin - 104 << "\" y=\"" << legend_y + 4
       << "\" font-size=\"11\">" << name << "</text>\n";
    legend_y += 16;
  }
  os << "</svg>\n";
  return os.str();
}

}  // namespace cfgnet
