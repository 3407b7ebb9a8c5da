#include "loadshift/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <random>
#include <stdexcept>

#include "loadshift/baseline.hpp"
#include "loadshift/effects.hpp"
#include "loadshift/forecast.hpp"
#include "loadshift/prep.hpp"
#include "loadshift/report.hpp"
#include "loadshift/util.hpp"

namespace loadshift::synth {

namespace {

constexpr double kTwoPi = 6.28318530717958647692528676655900577;

// Generation starts on a Monday so weekday groups tile cleanly.
const timeutil::DayIndex kStartDay = timeutil::days_from_civil(2016, 1, 4);

double circular_hour_distance(double h, double mu) {
    const double d = std::abs(h - mu);
    return std::min(d, 24.0 - d);
}

DayShape gaussian_bump(double mu, double width) {
    DayShape b{};
    double total = 0.0;
    for (int h = 0; h < 24; ++h) {
        const double z = circular_hour_distance(static_cast<double>(h), mu) / width;
        b[static_cast<std::size_t>(h)] = std::exp(-0.5 * z * z);
        total += b[static_cast<std::size_t>(h)];
    }
    for (double& v : b) v /= total;
    return b;
}

DayShape with_floor(const DayShape& bump) {
    DayShape s{};
    for (std::size_t h = 0; h < 24; ++h) s[h] = 0.8 / 24.0 + 0.2 * bump[h];
    return s;
}

DayShape double_bump(double mu1, double mu2, double width) {
    const DayShape a = gaussian_bump(mu1, width);
    const DayShape b = gaussian_bump(mu2, width);
    DayShape out{};
    for (std::size_t h = 0; h < 24; ++h) out[h] = 0.5 * (a[h] + b[h]);
    return out;
}

// Substream tags; user streams are offset past these.
constexpr std::uint64_t kTempStream = 1;
constexpr std::uint64_t kEventStream = 2;
constexpr std::uint64_t kUserStreamBase = 16;

}  // namespace

const std::array<DayShape, 12>& dictionary_shapes() {
    static const std::array<DayShape, 12> shapes = [] {
        std::array<DayShape, 12> s;
        // morning + evening peaks
        s[0] = with_floor(double_bump(7.0, 19.0, 1.5));
        s[1] = with_floor(double_bump(6.0, 18.0, 1.5));
        s[2] = with_floor(double_bump(8.0, 20.0, 1.5));
        // daytime peak
        s[3] = with_floor(gaussian_bump(13.0, 2.0));
        s[4] = with_floor(gaussian_bump(12.0, 3.0));
        s[5] = with_floor(gaussian_bump(14.0, 1.5));
        // night peak
        s[6] = with_floor(gaussian_bump(1.0, 2.0));
        s[7] = with_floor(gaussian_bump(0.0, 1.5));
        s[8] = with_floor(gaussian_bump(2.0, 2.5));
        // evening peak
        s[9] = with_floor(gaussian_bump(20.0, 1.5));
        s[10] = with_floor(gaussian_bump(19.0, 2.0));
        s[11] = with_floor(gaussian_bump(21.0, 1.2));
        return s;
    }();
    return shapes;
}

SynthConfig synth_config_from(const config::Config& cfg) {
    SynthConfig sc;
    sc.n_days = cfg.synth_n_days;
    sc.n_users = cfg.synth_n_users;
    sc.sigma = cfg.synth_sigma;
    sc.c_dr = cfg.synth_c_dr;
    sc.dr_fraction = cfg.synth_dr_fraction;
    sc.c_t = cfg.synth_c_t;
    sc.daily_energy = cfg.synth_daily_energy;
    sc.mixture_ratio = cfg.synth_mixture_ratio;
    sc.temp_mean = cfg.synth_temp_mean;
    sc.temp_seasonal_amp = cfg.synth_temp_seasonal_amp;
    sc.temp_daily_amp = cfg.synth_temp_daily_amp;
    sc.temp_noise = cfg.synth_temp_noise;
    sc.seed = cfg.seed;
    return sc;
}

std::array<double, 12> mixture_weights(double ratio) {
    if (ratio <= 0.0) throw std::invalid_argument("mixture_weights: ratio must be > 0");
    std::array<double, 12> w{};
    double total = 0.0;
    double cur = 1.0;
    for (std::size_t i = 0; i < 12; ++i) {
        w[i] = cur;
        total += cur;
        cur *= ratio;
    }
    for (double& v : w) v /= total;
    return w;
}

HourlySeries synth_temperature(const SynthConfig& cfg) {
    std::mt19937_64 rng(util::mix_seed(cfg.seed, kTempStream));
    const timeutil::HourIndex h0 = kStartDay * 24;
    const std::int64_t n = static_cast<std::int64_t>(cfg.n_days) * 24;
    std::vector<std::pair<timeutil::HourIndex, double>> vals;
    vals.reserve(static_cast<std::size_t>(n));
    for (std::int64_t i = 0; i < n; ++i) {
        const double day = static_cast<double>(i / 24);
        const double hod = static_cast<double>(i % 24);
        const double t = cfg.temp_mean +
                         cfg.temp_seasonal_amp * std::sin(kTwoPi * day / 365.25 -
                                                          kTwoPi / 4.0) +
                         cfg.temp_daily_amp * std::sin(kTwoPi * (hod - 8.0) / 24.0) +
                         cfg.temp_noise * util::normal01(rng);
        vals.emplace_back(h0 + i, t);
    }
    return HourlySeries::from_pairs(std::move(vals));
}

std::vector<ingest::DREvent> synth_events(const SynthConfig& cfg) {
    std::mt19937_64 rng(util::mix_seed(cfg.seed, kEventStream));
    const std::int64_t total = static_cast<std::int64_t>(cfg.n_days) * 24;
    const std::int64_t count = std::llround(cfg.dr_fraction * static_cast<double>(total));
    std::vector<ingest::DREvent> events;
    if (count <= 0) return events;

    std::vector<std::int64_t> offsets(static_cast<std::size_t>(total));
    for (std::int64_t i = 0; i < total; ++i) offsets[static_cast<std::size_t>(i)] = i;
    // Partial Fisher-Yates: the first `count` slots become the sample.
    for (std::int64_t i = 0; i < count; ++i) {
        const std::int64_t span = total - i;
        const std::int64_t j =
            i + static_cast<std::int64_t>(util::uniform01(rng) * static_cast<double>(span));
        std::swap(offsets[static_cast<std::size_t>(i)],
                  offsets[static_cast<std::size_t>(std::min(j, total - 1))]);
    }
    offsets.resize(static_cast<std::size_t>(count));
    std::sort(offsets.begin(), offsets.end());

    const timeutil::HourIndex h0 = kStartDay * 24;
    std::size_t i = 0;
    while (i < offsets.size()) {
        std::size_t j = i;
        while (j + 1 < offsets.size() && offsets[j + 1] == offsets[j] + 1) ++j;
        events.push_back(ingest::DREvent{h0 + offsets[i],
                                         static_cast<int>(j - i + 1)});
        i = j + 1;
    }
    return events;
}

UserSynth synth_user(const SynthConfig& cfg, const HourlySeries& temperature,
                     std::span<const timeutil::HourIndex> dr_hours,
                     std::uint64_t user_stream) {
    std::mt19937_64 shape_rng(
        util::mix_seed(cfg.seed, kUserStreamBase + 2 * user_stream));
    std::mt19937_64 noise_rng(
        util::mix_seed(cfg.seed, kUserStreamBase + 2 * user_stream + 1));
    const std::array<double, 12> weights = mixture_weights(cfg.mixture_ratio);
    const auto& dict = dictionary_shapes();

    // One dictionary shape per tiled group of five weekdays; weekends join
    // the following group. Constant shapes within a group let the segment
    // module's 5-day averages recover the dictionary.
    std::vector<int> assignments(static_cast<std::size_t>(cfg.n_days), 0);
    std::vector<int> group_shape;
    std::int64_t weekday_count = 0;
    for (int d = 0; d < cfg.n_days; ++d) {
        const bool weekday = timeutil::weekday_from_days(kStartDay + d) < 5;
        const std::size_t g = static_cast<std::size_t>(weekday_count / 5);
        while (group_shape.size() <= g) {
            const double r = util::uniform01(shape_rng);
            double acc = 0.0;
            int pick = 11;
            for (int s = 0; s < 12; ++s) {
                acc += weights[static_cast<std::size_t>(s)];
                if (r < acc) {
                    pick = s;
                    break;
                }
            }
            group_shape.push_back(pick);
        }
        assignments[static_cast<std::size_t>(d)] = group_shape[g];
        if (weekday) ++weekday_count;
    }

    const timeutil::HourIndex h0 = kStartDay * 24;
    const std::int64_t n = static_cast<std::int64_t>(cfg.n_days) * 24;

    UserSynth out;
    GroundTruth& truth = out.truth;
    truth.first_day = kStartDay;
    truth.base_assignments = assignments;
    truth.true_reduction = cfg.c_dr;
    truth.dr_hours.insert(dr_hours.begin(), dr_hours.end());
    truth.hours.reserve(static_cast<std::size_t>(n));
    truth.base.reserve(static_cast<std::size_t>(n));
    truth.temp_term.reserve(static_cast<std::size_t>(n));
    truth.noise.reserve(static_cast<std::size_t>(n));
    truth.is_dr.reserve(static_cast<std::size_t>(n));
    truth.clip_amount.reserve(static_cast<std::size_t>(n));

    std::vector<std::pair<timeutil::HourIndex, double>> vals;
    vals.reserve(static_cast<std::size_t>(n));
    std::size_t dr_ptr = 0;
    std::size_t clipped = 0;
    double mpr_sum = 0.0;
    std::size_t mpr_terms = 0;

    for (std::int64_t i = 0; i < n; ++i) {
        const timeutil::HourIndex h = h0 + i;
        const int d = static_cast<int>(i / 24);
        const int hod = static_cast<int>(i % 24);
        const int shape = assignments[static_cast<std::size_t>(d)];
        const double base =
            dict[static_cast<std::size_t>(shape)][static_cast<std::size_t>(hod)] *
            cfg.daily_energy;
        const auto temp = temperature.at(h);
        if (!temp) throw std::logic_error("synth_user: temperature hour missing");
        const double temp_term = cfg.c_t * *temp;
        const double eps = cfg.sigma * util::normal01(noise_rng);
        while (dr_ptr < dr_hours.size() && dr_hours[dr_ptr] < h) ++dr_ptr;
        const bool is_dr = dr_ptr < dr_hours.size() && dr_hours[dr_ptr] == h;

        const double counterfactual = base + temp_term + eps;
        double value = counterfactual - (is_dr ? cfg.c_dr : 0.0);
        double clip = 0.0;
        if (value < 0.0) {
            clip = -value;
            value = 0.0;
            ++clipped;
        }
        if (is_dr && std::abs(counterfactual) >= 1e-12) {
            mpr_sum += (value - counterfactual) / std::abs(counterfactual);
            ++mpr_terms;
        }

        truth.hours.push_back(h);
        truth.base.push_back(base);
        truth.temp_term.push_back(temp_term);
        truth.noise.push_back(eps);
        truth.is_dr.push_back(is_dr ? 1 : 0);
        truth.clip_amount.push_back(clip);
        vals.emplace_back(h, value);
    }

    truth.true_mpr =
        mpr_terms > 0 ? mpr_sum / static_cast<double>(mpr_terms) * 100.0 : 0.0;
    truth.clip_rate = static_cast<double>(clipped) / static_cast<double>(n);
    if (truth.clip_rate >= 0.001)
        throw std::runtime_error(
            "synth: clip rate " + util::fmt_double(truth.clip_rate * 100.0) +
            "% reached 0.1%; raise synth_daily_energy or lower sigma/c_dr");

    out.consumption = HourlySeries::from_pairs(std::move(vals));
    return out;
}

SynthDataset generate(const SynthConfig& cfg) {
    if (cfg.n_users < 1) throw std::invalid_argument("synth: n_users must be >= 1");
    if (cfg.n_days < 1) throw std::invalid_argument("synth: n_days must be >= 1");
    SynthDataset ds;
    ds.first_day = kStartDay;
    ds.temperature = synth_temperature(cfg);
    ds.events = synth_events(cfg);
    std::vector<timeutil::HourIndex> dr = ingest::event_hours(ds.events);
    for (int u = 0; u < cfg.n_users; ++u) {
        char buf[16];
        std::snprintf(buf, sizeof buf, "u%04d", u + 1);
        UserSynth us = synth_user(cfg, ds.temperature, dr,
                                  static_cast<std::uint64_t>(u));
        ds.consumption.emplace(buf, std::move(us.consumption));
        ds.truths.emplace(buf, std::move(us.truth));
    }
    return ds;
}

double assignment_entropy(const GroundTruth& truth) {
    std::array<std::size_t, 12> counts{};
    std::size_t total = 0;
    for (std::size_t d = 0; d < truth.base_assignments.size(); ++d) {
        if (timeutil::weekday_from_days(truth.first_day +
                                        static_cast<std::int64_t>(d)) >= 5)
            continue;
        ++counts[static_cast<std::size_t>(truth.base_assignments[d])];
        ++total;
    }
    if (total == 0) return 0.0;
    double h = 0.0;
    for (std::size_t c : counts) {
        if (c == 0) continue;
        const double p = static_cast<double>(c) / static_cast<double>(total);
        h -= p * std::log(p);
    }
    return std::max(0.0, h);
}

namespace {

struct ActualStats {
    double delta = 0.0;
    double mpr = 0.0;
};

// Ground-truth reduction statistics over a subset of DR hours; the
// counterfactual is the pre-clip no-DR value reconstructed from the logs.
ActualStats actual_stats(const GroundTruth& truth, const HourlySeries& cons,
                         std::span<const timeutil::HourIndex> hours,
                         double mpr_floor) {
    ActualStats st;
    if (hours.empty()) return st;
    const timeutil::HourIndex h0 = truth.hours.front();
    double delta_sum = 0.0;
    double mpr_sum = 0.0;
    std::size_t mpr_terms = 0;
    for (timeutil::HourIndex h : hours) {
        const auto i = static_cast<std::size_t>(h - h0);
        const double cf = truth.base[i] + truth.temp_term[i] + truth.noise[i];
        const auto obs = cons.at(h);
        if (!obs) throw std::logic_error("actual_stats: observation missing");
        delta_sum += cf - *obs;
        if (std::abs(cf) >= mpr_floor) {
            mpr_sum += (*obs - cf) / std::abs(cf);
            ++mpr_terms;
        }
    }
    st.delta = delta_sum / static_cast<double>(hours.size());
    st.mpr = mpr_terms > 0 ? mpr_sum / static_cast<double>(mpr_terms) * 100.0
                           : std::numeric_limits<double>::quiet_NaN();
    return st;
}

std::vector<double> inverted(const linalg::Vector& v,
                             const prep::StandardizationParams& p) {
    std::vector<double> out(static_cast<std::size_t>(v.size()));
    for (Eigen::Index i = 0; i < v.size(); ++i)
        out[static_cast<std::size_t>(i)] = prep::invert_standardization(v(i), p);
    return out;
}

forecast::CVConfig cv_config_from(const config::Config& cfg) {
    forecast::CVConfig cv;
    cv.folds = cfg.cv_folds;
    cv.seed = cfg.seed;
    cv.lambda_grid = cfg.lambda_grid;
    cv.knn_grid = cfg.knn_grid;
    cv.svr_c = cfg.svr_c;
    cv.svr_gamma = cfg.svr_gamma;
    cv.svr_eps = cfg.svr_eps;
    cv.svr_subset_cap = cfg.svr_subset_cap;
    cv.tree_depths = cfg.tree_depths;
    cv.tree_min_samples = cfg.tree_min_samples;
    return cv;
}

void run_recovery_cell(const config::Config& base, double mixture, double sigma,
                       std::uint64_t run_seed,
                       const std::vector<std::string>& methods,
                       RecoveryRow* out_rows) {
    SynthConfig sc = synth_config_from(base);
    sc.mixture_ratio = mixture;
    sc.sigma = sigma;
    sc.n_users = 1;
    sc.seed = run_seed;

    const HourlySeries temp = synth_temperature(sc);
    const std::vector<ingest::DREvent> events = synth_events(sc);
    const std::vector<timeutil::HourIndex> dr = ingest::event_hours(events);
    UserSynth user = synth_user(sc, temp, dr, 0);

    auto [cons_a, temp_a] = align_series(user.consumption, temp);
    const prep::SpilloverResult spill =
        prep::remove_spillover(cons_a, events, base.spillover_hours);
    const auto [train_std, cons_params] = prep::standardize(spill.training);
    const HourlySeries cons_std = prep::standardize(cons_a, cons_params).first;
    const HourlySeries temp_train = temp_a.restricted_to(spill.training.hours());
    const auto [temp_train_std, temp_params] = prep::standardize(temp_train);
    const HourlySeries temp_std = prep::standardize(temp_a, temp_params).first;

    prep::FeatureBuildResult fb =
        prep::build_features(cons_std, temp_std, events, base.spillover_hours,
                             base.min_train_rows, base.min_dr_rows);
    if (!fb.features)
        throw std::runtime_error("recovery: features skipped: " + fb.skip_reason);
    const prep::FeatureSet& fs = *fb.features;

    const double ent = assignment_entropy(user.truth);
    const forecast::CVConfig cv = cv_config_from(base);

    for (std::size_t mi = 0; mi < methods.size(); ++mi) {
        RecoveryRow row;
        row.entropy = ent;
        row.sigma = sigma;
        row.method = methods[mi];

        if (methods[mi] == "iso") {
            forecast::BaselineConfig bc;
            const forecast::BaselineResult br =
                forecast::iso_baseline(cons_a, events, fs.hours1, bc);
            std::vector<double> pred, obs;
            std::vector<timeutil::HourIndex> used;
            for (std::size_t i = 0; i < br.hours.size(); ++i) {
                if (!br.adjusted[i]) continue;
                pred.push_back(*br.adjusted[i]);
                const auto o = cons_a.at(br.hours[i]);
                obs.push_back(o.value());
                used.push_back(br.hours[i]);
            }
            if (pred.empty()) {
                row.mpr_err = row.delta_err = row.hl_shift = row.mape =
                    std::numeric_limits<double>::quiet_NaN();
                out_rows[mi] = std::move(row);
                continue;
            }
            const ActualStats act =
                actual_stats(user.truth, cons_a, used, base.mpr_floor);
            row.delta_err = act.delta - effects::delta_hat(obs, pred);
            row.mpr_err =
                act.mpr - effects::mpr(obs, pred, base.mpr_floor).percent;
            row.hl_shift = effects::hodges_lehmann_paired(pred, obs);

            // Holdout MAPE from raw baselines over the training tail.
            const std::size_t held = std::max<std::size_t>(
                1, static_cast<std::size_t>(std::floor(
                       static_cast<double>(fs.hours0.size()) * base.holdout_fraction)));
            const std::size_t begin = fs.hours0.size() - held;
            std::span<const timeutil::HourIndex> tail(fs.hours0.data() + begin, held);
            const forecast::BaselineResult bh =
                forecast::iso_baseline(cons_a, events, tail, bc);
            std::vector<double> hp, ht;
            for (std::size_t i = 0; i < bh.hours.size(); ++i) {
                if (!bh.adjusted[i]) continue;
                hp.push_back(*bh.adjusted[i]);
                ht.push_back(cons_a.at(bh.hours[i]).value());
            }
            row.mape = hp.empty() ? std::numeric_limits<double>::quiet_NaN()
                                  : report::mape(ht, hp, base.mape_floor_kwh).percent;
            out_rows[mi] = std::move(row);
            continue;
        }

        const auto method = forecast::method_from_name(methods[mi]);
        if (!method)
            throw std::runtime_error("recovery: unknown method " + methods[mi]);
        const forecast::HoldoutFit hf = forecast::fit_with_holdout(
            *method, fs.X0, fs.Y0, cv, base.holdout_fraction, prep::schema_hash());

        const std::vector<double> hold_true = inverted(
            fs.Y0.tail(fs.Y0.size() - hf.holdout_begin), cons_params);
        const std::vector<double> hold_pred = inverted(hf.holdout_pred, cons_params);
        row.mape = report::mape(hold_true, hold_pred, base.mape_floor_kwh).percent;

        const linalg::Vector y1_hat = hf.model.predict(fs.X1);
        std::span<const double> y1(fs.Y1.data(),
                                   static_cast<std::size_t>(fs.Y1.size()));
        std::span<const double> y1h(y1_hat.data(),
                                    static_cast<std::size_t>(y1_hat.size()));
        const double delta_raw = effects::delta_hat(y1, y1h) * cons_params.std;
        const double hl_raw = effects::hodges_lehmann_paired(y1h, y1) * cons_params.std;
        const std::vector<double> y1_raw = inverted(fs.Y1, cons_params);
        const std::vector<double> y1_hat_raw = inverted(y1_hat, cons_params);
        const double mpr_raw =
            effects::mpr(y1_raw, y1_hat_raw, base.mpr_floor).percent;

        const ActualStats act =
            actual_stats(user.truth, cons_a, fs.hours1, base.mpr_floor);
        row.delta_err = act.delta - delta_raw;
        row.mpr_err = act.mpr - mpr_raw;
        row.hl_shift = hl_raw;
        out_rows[mi] = std::move(row);
    }
}

}  // namespace

std::vector<RecoveryRow> recovery_experiment(const config::Config& base,
                                             std::span<const double> mixtures,
                                             std::span<const double> sigmas,
                                             int seeds_per_cell,
                                             const std::vector<std::string>& methods,
                                             int jobs) {
    if (mixtures.empty() || sigmas.empty() || seeds_per_cell < 1 || methods.empty())
        throw std::invalid_argument("recovery_experiment: empty grid");
    struct Run {
        double mixture;
        double sigma;
        std::uint64_t seed;
    };
    std::vector<Run> runs;
    for (double m : mixtures)
        for (double s : sigmas)
            for (int k = 0; k < seeds_per_cell; ++k)
                // The run seed depends only on the seed index, so grid cells
                // share their draws (paired-seed comparisons).
                runs.push_back({m, s, util::mix_seed(base.seed,
                                                     static_cast<std::uint64_t>(k))});

    std::vector<RecoveryRow> rows(runs.size() * methods.size());
    util::parallel_for(runs.size(), jobs, [&](std::size_t r) {
        run_recovery_cell(base, runs[r].mixture, runs[r].sigma, runs[r].seed,
                          methods, rows.data() + r * methods.size());
    });
    return rows;
}

}  // namespace loadshift::synth
