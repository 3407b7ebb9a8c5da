#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "loadshift/config.hpp"
#include "loadshift/ingest.hpp"
#include "loadshift/series.hpp"
#include "loadshift/timeutil.hpp"

namespace loadshift::synth {

using DayShape = std::array<double, 24>;

// Twelve stylized unit-sum dictionary shapes: a flat floor plus a bump
// component covering four archetypes (morning+evening, daytime, night,
// evening) in three variants each.
const std::array<DayShape, 12>& dictionary_shapes();

struct SynthConfig {
    int n_days = 365;
    int n_users = 20;
    double sigma = 0.2;          // Gaussian noise std, kWh
    double c_dr = 0.5;           // injected reduction, kWh
    double dr_fraction = 0.01;   // share of hours selected as DR
    double c_t = 0.02;           // temperature coefficient
    double daily_energy = 60.0;  // kWh per day carried by the base shape
    double mixture_ratio = 0.3;  // weight of shape i proportional to ratio^i
    double temp_mean = 15.0;
    double temp_seasonal_amp = 8.0;
    double temp_daily_amp = 5.0;
    double temp_noise = 0.5;
    std::uint64_t seed = 42;
};

SynthConfig synth_config_from(const config::Config& cfg);

// Normalized mixture weights over the 12 dictionary shapes, w_i ~ ratio^i.
std::array<double, 12> mixture_weights(double ratio);

struct GroundTruth {
    std::vector<timeutil::HourIndex> hours;
    std::vector<double> base;       // scaled shape component
    std::vector<double> temp_term;  // c_t * T(t)
    std::vector<double> noise;
    std::vector<std::uint8_t> is_dr;
    std::vector<double> clip_amount;  // kWh removed by the zero clip
    std::set<timeutil::HourIndex> dr_hours;
    std::vector<int> base_assignments;  // day offset -> dictionary shape
    timeutil::DayIndex first_day = 0;
    double true_reduction = 0.0;
    double true_mpr = 0.0;  // percent, over DR hours, raw scale
    double clip_rate = 0.0;
};

struct UserSynth {
    HourlySeries consumption;
    GroundTruth truth;
};

struct SynthDataset {
    std::map<std::string, HourlySeries> consumption;
    HourlySeries temperature;
    std::vector<ingest::DREvent> events;
    std::map<std::string, GroundTruth> truths;
    timeutil::DayIndex first_day = 0;
};

// Generation is split so the temperature and the event calendar are shared
// across users while each user owns an independent substream.
HourlySeries synth_temperature(const SynthConfig& cfg);
std::vector<ingest::DREvent> synth_events(const SynthConfig& cfg);
UserSynth synth_user(const SynthConfig& cfg, const HourlySeries& temperature,
                     std::span<const timeutil::HourIndex> dr_hours,
                     std::uint64_t user_stream);

// Full dataset; user ids are u0001..uNNNN. Throws if any user's clip rate
// reaches 0.1%.
SynthDataset generate(const SynthConfig& cfg);

// Entropy (natural log) of the dictionary assignment distribution over
// weekdays; this is the ground-truth counterpart of the segment metric.
double assignment_entropy(const GroundTruth& truth);

struct RecoveryRow {
    double entropy = 0.0;  // ground-truth assignment entropy
    double sigma = 0.0;
    std::string method;
    double mpr_err = 0.0;    // actual - predicted MPR, percentage points
    double delta_err = 0.0;  // actual - predicted mean reduction, kWh
    double hl_shift = 0.0;   // predicted Hodges-Lehmann shift, kWh
    double mape = 0.0;       // holdout MAPE, percent
};

// One generated user per (mixture, sigma, seed) cell, run through
// prep -> forecast -> effects; rows ordered by (mixture, sigma, seed,
// method) regardless of job count.
std::vector<RecoveryRow> recovery_experiment(const config::Config& base,
                                             std::span<const double> mixtures,
                                             std::span<const double> sigmas,
                                             int seeds_per_cell,
                                             const std::vector<std::string>& methods,
                                             int jobs);

}  // namespace loadshift::synth
