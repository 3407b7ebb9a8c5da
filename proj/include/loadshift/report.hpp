#pragma once

#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "loadshift/effects.hpp"
#include "loadshift/segment.hpp"

namespace loadshift::report {

// Mean absolute percentage error over pairs whose true value clears the
// denominator floor. When every pair is excluded the result is undefined
// and the record is flagged.
struct MapeRecord {
    double percent = std::numeric_limits<double>::quiet_NaN();
    std::size_t excluded = 0;
    bool flagged = false;
};

MapeRecord mape(std::span<const double> y_true, std::span<const double> y_pred,
                double floor);

// Five-number summary plus Tukey whiskers (furthest points within 1.5 IQR
// of the quartiles) and the values outside them. Non-finite inputs are
// dropped before summarizing.
struct DistributionSummary {
    std::string method;
    std::string metric;
    std::size_t n = 0;
    double min = std::numeric_limits<double>::quiet_NaN();
    double q1 = std::numeric_limits<double>::quiet_NaN();
    double median = std::numeric_limits<double>::quiet_NaN();
    double q3 = std::numeric_limits<double>::quiet_NaN();
    double max = std::numeric_limits<double>::quiet_NaN();
    double whisker_lo = std::numeric_limits<double>::quiet_NaN();
    double whisker_hi = std::numeric_limits<double>::quiet_NaN();
    std::vector<double> outliers;
};

DistributionSummary summarize(std::string method, std::string metric,
                              std::vector<double> values);

// Null-rejection rates per variability bin. Users are binned by their
// variability percentile at `k_setting`; an estimate is rejected at a
// significance level when its one-sided Wilcoxon p-value is below
// 1 - significance. Estimates for users without a variability score are
// excluded and reported.
struct RejectionCell {
    std::string method;
    std::size_t bin = 0;
    double significance = 0.0;
    std::size_t n = 0;
    std::size_t rejected = 0;
    double rate = std::numeric_limits<double>::quiet_NaN();
};

struct RejectionTable {
    std::vector<RejectionCell> cells;
    std::vector<std::string> excluded_users;
};

RejectionTable rejection_rates(
    const std::vector<effects::TreatmentEstimate>& estimates,
    const std::vector<segment::VariabilityScore>& scores, int k_setting,
    std::span<const double> significances, std::size_t n_bins);

}  // namespace loadshift::report
