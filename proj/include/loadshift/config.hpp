#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace loadshift::config {

// Runtime configuration, populated from a key=value file plus CLI overrides.
// Every field has a usable default so small runs need only the input paths.
struct Config {
    // inputs
    std::string meter_csv;
    std::string temperature_csv;
    std::string dr_events_csv;
    std::string flags_csv;
    bool strict_csv = false;

    // ingest / prep
    double excessive_kwh = 50.0;
    int spillover_hours = 8;
    std::size_t min_train_rows = 1000;
    std::size_t min_dr_rows = 10;
    int adf_max_lag = 0;  // 0: Schwert rule
    std::vector<std::string> holidays;  // YYYY-MM-DD

    // forecasting
    int cv_folds = 5;
    std::vector<double> lambda_grid;      // shared by lasso and ridge
    std::vector<int> knn_grid;            // k values
    std::vector<double> svr_c;
    std::vector<double> svr_gamma;
    std::vector<double> svr_eps;
    std::size_t svr_subset_cap = 5000;
    std::vector<int> tree_depths;
    int tree_min_samples = 5;
    double holdout_fraction = 0.2;
    double mape_floor_kwh = 0.01;
    std::vector<std::string> methods;  // subset of: ols lasso ridge knn svr tree iso

    // effects
    double mpr_floor = 0.05;
    std::vector<double> significance_levels;  // e.g. 0.95 0.90 0.80

    // segmentation
    std::vector<int> kmeans_ks;
    int kmeans_restarts = 10;
    int kmeans_max_iter = 300;
    int entropy_bins = 10;
    bool hourly_std_raw = false;

    // synthetic generator
    int synth_n_days = 365;
    int synth_n_users = 20;
    double synth_sigma = 0.2;
    double synth_c_dr = 0.5;
    double synth_dr_fraction = 0.01;
    double synth_c_t = 0.02;
    // Daily energy scale; keeps the hourly floor high enough that zero
    // clipping stays negligible even at the top of the noise grid.
    double synth_daily_energy = 60.0;
    double synth_mixture_ratio = 0.3;
    double synth_temp_mean = 15.0;
    double synth_temp_seasonal_amp = 8.0;
    double synth_temp_daily_amp = 5.0;
    double synth_temp_noise = 0.5;

    // recovery experiment grids
    std::vector<double> recovery_mixtures;  // mixture ratios (entropy axis)
    std::vector<double> recovery_sigmas;    // noise axis
    int recovery_seeds = 3;                 // runs per grid cell
    std::vector<std::string> recovery_methods;  // default: ridge ols

    // run control
    std::uint64_t seed = 42;
    int jobs = 1;
    std::string out_dir = "out";

    // Stable content hash of the effective configuration (used in the
    // run manifest). Hashes the canonical serialization, so defaults and
    // an explicit file spelling the same values hash identically.
    std::uint64_t content_hash() const;
    std::string serialize() const;
};

Config default_config();

// Parses `key = value` lines; '#' and ';' start comments, blank lines are
// skipped. Unknown keys and malformed values are errors.
Config load_config(const std::filesystem::path& path);
Config parse_config(const std::string& text, const std::string& origin);

// Post-parse sanity checks shared by file and CLI entry points.
void validate(const Config& cfg);

std::vector<std::string> known_methods();

}  // namespace loadshift::config
