#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "loadshift/forecast.hpp"
#include "loadshift/prep.hpp"

namespace loadshift::effects {

// Mean of counterfactual minus observed; positive means estimated reduction.
double delta_hat(std::span<const double> y_dr, std::span<const double> y_hat);

struct MprResult {
    double percent = 0.0;          // NaN when every term was excluded
    std::size_t excluded = 0;      // terms with |counterfactual| below the floor
    bool divergence = false;
};

// Mean of (observed - counterfactual)/|counterfactual| in percent; negative
// values correspond to an estimated reduction. Terms whose counterfactual
// magnitude falls below the floor are excluded and flagged.
MprResult mpr(std::span<const double> y_dr, std::span<const double> y_hat,
              double floor = 0.05);

enum class WilcoxonMode { Auto, Exact, Normal };

struct WilcoxonResult {
    double statistic = 0.0;      // signed-rank sum, W+ - W-
    double w_plus = 0.0;
    std::size_t n_effective = 0; // pairs left after zero-difference removal
    double p_value = 1.0;
    bool exact = true;
};

// One-sided signed-rank test of "differences shifted up" on d = y_hat - y_dr.
// Zero differences are dropped; ties get midranks. Exact enumeration when
// n_effective <= 25, otherwise a normal approximation with tie-corrected
// variance and continuity correction 0.5.
WilcoxonResult wilcoxon_signed_rank(std::span<const double> diffs,
                                    WilcoxonMode mode = WilcoxonMode::Auto,
                                    bool two_sided = false);
WilcoxonResult wilcoxon_signed_rank_paired(std::span<const double> y_hat,
                                           std::span<const double> y_dr,
                                           WilcoxonMode mode = WilcoxonMode::Auto,
                                           bool two_sided = false);

// Median of the Walsh averages (d_i + d_j)/2 over i <= j, selected by value
// binary search rather than materializing the quadratic set.
double hodges_lehmann(std::span<const double> diffs);
double hodges_lehmann_paired(std::span<const double> y_hat,
                             std::span<const double> y_dr);

struct TreatmentEstimate {
    std::string user_id;
    std::string method;
    std::size_t n_events = 0;
    double delta_hat = 0.0;
    MprResult mpr;
    WilcoxonResult wilcoxon;
    double hl_shift = 0.0;
    double bias = 0.0;  // mean in-sample residual on the training partition
};

// Assembles the four statistics from a counterfactual vector the caller
// already produced (lets the same path serve baseline predictions too).
TreatmentEstimate estimate_from_counterfactual(std::span<const double> y_hat,
                                               std::span<const double> y_dr,
                                               double bias, double mpr_floor);

// Predicts the DR partition with the fitted model and derives the estimate;
// bias is the mean residual over the full training partition.
TreatmentEstimate estimate_user(const prep::FeatureSet& fs,
                                const forecast::ForecastModel& model,
                                double mpr_floor = 0.05);

}  // namespace loadshift::effects
