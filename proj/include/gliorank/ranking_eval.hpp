#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <vector>

#include "gliorank/core_fields.hpp"

namespace gliorank {

/// Precision-recall curve of a time-to-invasion ranking against a segmentation.
///
/// Thresholds are the distinct finite ranks inside the region of interest, ascending. At threshold t
/// the prediction is {x in roi : T(x) <= t}; tied voxels enter together. If part of the reference
/// is never invaded, a terminal step at +inf (predicting the whole roi) is appended so recall reaches
/// one, and `terminal_never_invaded` is set.
struct PRCurve {
  std::vector<double> thresholds;
  std::vector<double> recall;
  std::vector<double> precision;
  std::vector<std::size_t> tp, fp, fn;
  bool terminal_never_invaded = false;
  std::size_t positives = 0;  // |S ∩ roi|
  std::size_t roi_size = 0;

  std::size_t size() const noexcept { return thresholds.size(); }
  /// Number of steps with a finite threshold.
  std::size_t finite_size() const noexcept { return size() - (terminal_never_invaded ? 1 : 0); }
};

inline PRCurve pr_curve(const InvasionMap& t, const Segmentation& s, const Segmentation& roi) {
  require_same_grid(t, s, "ranking and segmentation");
  require_same_grid(t, roi, "ranking and roi");

  struct Item {
    double rank;
    bool positive;
  };
  std::vector<Item> items;
  PRCurve pr;
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (!roi[i]) continue;
    ++pr.roi_size;
    const bool pos = s[i] != 0;
    if (pos) ++pr.positives;
    if (std::isfinite(t[i])) items.push_back({t[i], pos});
  }
  require(pr.positives > 0, errc::empty_region, "empty evaluation region");
  std::sort(items.begin(), items.end(), [](const Item& a, const Item& b) { return a.rank < b.rank; });

  const double npos = static_cast<double>(pr.positives);
  std::size_t tp = 0, fp = 0;
  auto push = [&](double threshold) {
    pr.thresholds.push_back(threshold);
    pr.tp.push_back(tp);
    pr.fp.push_back(fp);
    pr.fn.push_back(pr.positives - tp);
    pr.recall.push_back(static_cast<double>(tp) / npos);
    pr.precision.push_back(static_cast<double>(tp) / static_cast<double>(tp + fp));
  };
  for (std::size_t k = 0; k < items.size();) {
    const double rank = items[k].rank;
    for (; k < items.size() && items[k].rank == rank; ++k) (items[k].positive ? tp : fp) += 1;
    push(rank);
  }
  if (tp < pr.positives) {
    tp = pr.positives;
    fp = pr.roi_size - pr.positives;
    push(never_invaded);
    pr.terminal_never_invaded = true;
  }
  return pr;
}

/// AP = sum_k (R_k - R_{k-1}) P_k with R_{-1} = 0.
///
/// Evaluated from the integer counts in extended precision and rounded once, so the result only
/// depends on the counts (and is the correctly rounded value for small curves).
inline double average_precision(const PRCurve& pr) {
  if (pr.positives == 0) return 0.0;
  long double ap = 0.0L;
  std::size_t prev_tp = 0;
  const auto npos = static_cast<long double>(pr.positives);
  for (std::size_t k = 0; k < pr.size(); ++k) {
    const std::size_t gained = pr.tp[k] - prev_tp;
    if (gained > 0) {
      const auto predicted = static_cast<long double>(pr.tp[k] + pr.fp[k]);
      ap += static_cast<long double>(gained) * static_cast<long double>(pr.tp[k]) / (predicted * npos);
    }
    prev_tp = pr.tp[k];
  }
  return static_cast<double>(ap);
}

/// Smallest finite threshold whose predicted volume reaches |S ∩ roi|, i.e. where recall first
/// meets precision. Falls back to the last finite threshold; +inf when the curve has none.
inline double volume_matched_threshold(const PRCurve& pr) {
  const std::size_t finite = pr.finite_size();
  for (std::size_t k = 0; k < finite; ++k)
    if (pr.tp[k] + pr.fp[k] >= pr.positives) return pr.thresholds[k];
  return finite > 0 ? pr.thresholds[finite - 1] : never_invaded;
}

inline constexpr double agreement_outside_roi = -1.0;

/// Per-voxel agreement: P(T(x)) inside S, R(T(x)) outside S, within the roi.
inline ScalarField local_agreement(const InvasionMap& t, const Segmentation& s, const Segmentation& roi,
                                   const PRCurve& pr) {
  require_same_grid(t, s, "ranking and segmentation");
  require_same_grid(t, roi, "ranking and roi");
  ScalarField out(t.geometry(), agreement_outside_roi);
  const std::size_t finite = pr.finite_size();
  const auto first = pr.thresholds.begin();
  const auto last = first + static_cast<std::ptrdiff_t>(finite);
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (!roi[i]) continue;
    const bool pos = s[i] != 0;
    if (!std::isfinite(t[i])) {
      out[i] = pos ? pr.precision.back() : 1.0;
      continue;
    }
    const auto it = std::lower_bound(first, last, t[i]);
    require(it != last && *it == t[i], errc::invalid_argument, "ranking does not match the PR curve");
    const auto k = static_cast<std::size_t>(it - first);
    out[i] = pos ? pr.precision[k] : pr.recall[k];
  }
  return out;
}

struct EvalReport {
  double ap = 0.0;
  PRCurve pr;
  double volume_matched_t = never_invaded;
  ScalarField agreement;
  /// Reference voxels outside the roi, which never enter the metric.
  std::size_t excluded_voxel_count = 0;
};

inline EvalReport evaluate_ranking(const InvasionMap& t, const Segmentation& s, const Segmentation& roi) {
  EvalReport r;
  r.pr = pr_curve(t, s, roi);
  r.ap = average_precision(r.pr);
  r.volume_matched_t = volume_matched_threshold(r.pr);
  r.agreement = local_agreement(t, s, roi, r.pr);
  for (std::size_t i = 0; i < s.size(); ++i)
    if (s[i] && !roi[i]) ++r.excluded_voxel_count;
  return r;
}

/// AP only, without the agreement map.
inline double average_precision(const InvasionMap& t, const Segmentation& s, const Segmentation& roi) {
  return average_precision(pr_curve(t, s, roi));
}

/// CSV with header threshold,recall,precision,tp,fp,fn; the never-invaded step prints as "inf".
inline void write_pr_csv(const PRCurve& pr, std::ostream& os) {
  const auto old = os.precision(17);
  os << "threshold,recall,precision,tp,fp,fn\n";
  for (std::size_t k = 0; k < pr.size(); ++k) {
    if (std::isfinite(pr.thresholds[k]))
      os << pr.thresholds[k];
    else
      os << "inf";
    os << ',' << pr.recall[k] << ',' << pr.precision[k] << ',' << pr.tp[k] << ',' << pr.fp[k] << ','
       << pr.fn[k] << '\n';
  }
  os.precision(old);
}

inline void write_pr_csv(const PRCurve& pr, const std::filesystem::path& path) {
  std::ofstream os(path);
  require(static_cast<bool>(os), errc::io_failure, "cannot open for writing: " + path.string());
  write_pr_csv(pr, os);
}

}  // namespace gliorank
