#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "loadshift/ingest.hpp"
#include "loadshift/linalg.hpp"
#include "loadshift/series.hpp"

namespace loadshift::prep {

// Fit on the training partition only, then applied to both partitions.
struct StandardizationParams {
    double mean = 0.0;
    double std = 1.0;  // strictly positive
};

// Without params: computes mean and population std from `series` (error on
// zero variance) and transforms. With params: applies them unchanged.
std::pair<HourlySeries, StandardizationParams> standardize(
    const HourlySeries& series, std::optional<StandardizationParams> params = {});

inline double apply_standardization(double v, const StandardizationParams& p) {
    return (v - p.mean) / p.std;
}
inline double invert_standardization(double z, const StandardizationParams& p) {
    return z * p.std + p.mean;
}

struct ADFResult {
    double test_statistic = 0.0;
    int used_lags = 0;
    std::map<std::string, double> critical_values;  // keys "1%", "5%", "10%"
    bool stationary_at_99 = false;
};

// Augmented Dickey-Fuller unit-root test, constant + linear trend case:
//   Δy_t = α + β·t + γ·y_{t−1} + Σ_{i=1..p} δ_i Δy_{t−i} + e_t
// Lag order p is chosen by AIC over 0..max_lag on a common sample, then the
// chosen order is refit on its maximal sample. max_lag <= 0 applies the
// Schwert rule 12·(T/100)^(1/4). The series must be gap-free.
ADFResult adf_test(const HourlySeries& series, int max_lag = 0);

// First differences of a contiguous series (length n-1).
HourlySeries difference(const HourlySeries& series);

// Longest run of consecutive clock hours within the series.
HourlySeries longest_contiguous_run(const HourlySeries& series);

// Hours in (event end, event end + spillover_hours] for any event, minus
// hours that are themselves event hours.
std::vector<HourIndex> spillover_hours_set(const std::vector<ingest::DREvent>& events,
                                           int spillover_hours);

struct SpilloverResult {
    HourlySeries training;              // event and spillover hours removed
    std::vector<HourIndex> dr_hours;    // moved to the DR partition
    std::vector<HourIndex> removed;     // spillover hours, for audit
};

SpilloverResult remove_spillover(const HourlySeries& series,
                                 const std::vector<ingest::DREvent>& events,
                                 int spillover_hours = 8);

// Covariate layout: columns 0-4 consumption lags 1..5, columns 5-9
// temperature lags 1..5, columns 10-57 one-hot hour-of-day x weekend
// (weekday block first, then weekend block).
inline constexpr int kNumLags = 5;
inline constexpr int kOneHotWidth = 48;
inline constexpr int kNumFeatures = 2 * kNumLags + kOneHotWidth;

std::vector<std::string> feature_schema();
std::uint64_t schema_hash();

// Position of the hot entry within the 48-wide categorical block.
int onehot_block_index(HourIndex target);

struct FeatureSet {
    linalg::Matrix X0;  // training covariates
    linalg::Vector Y0;  // training outcomes
    linalg::Matrix X1;  // DR covariates
    linalg::Vector Y1;  // observed DR outcomes
    std::vector<HourIndex> hours0;  // target hour per training row
    std::vector<HourIndex> hours1;  // target hour per DR row
    std::vector<std::string> column_schema;
};

struct FeatureBuildResult {
    std::optional<FeatureSet> features;
    std::string skip_reason;  // set when features is empty
    std::size_t train_rows = 0;
    std::size_t dr_rows = 0;
};

// Builds lagged covariate rows from aligned standardized series. A target
// hour lands in (X1, Y1) when it is an event hour and its 5-hour lag window
// has no data gaps; it lands in (X0, Y0) when neither it nor its lag window
// touches an event or spillover hour. Everything else is dropped. Users with
// too few rows are skipped with a reason instead of an error.
FeatureBuildResult build_features(const HourlySeries& cons, const HourlySeries& temp,
                                  const std::vector<ingest::DREvent>& events,
                                  int spillover_hours, std::size_t min_train_rows,
                                  std::size_t min_dr_rows);

// Featureset checkpoint file (see docs/formats.md).
void save_featureset(const std::filesystem::path& path, const std::string& user_id,
                     const FeatureSet& fs, const StandardizationParams& cons_params,
                     const StandardizationParams& temp_params);

struct LoadedFeatureSet {
    std::string user_id;
    FeatureSet features;
    StandardizationParams cons_params;
    StandardizationParams temp_params;
};

LoadedFeatureSet load_featureset(const std::filesystem::path& path);

}  // namespace loadshift::prep
