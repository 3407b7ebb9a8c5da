#include "loadshift/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "loadshift/baseline.hpp"
#include "loadshift/csvio.hpp"
#include "loadshift/effects.hpp"
#include "loadshift/forecast.hpp"
#include "loadshift/ingest.hpp"
#include "loadshift/prep.hpp"
#include "loadshift/report.hpp"
#include "loadshift/segment.hpp"
#include "loadshift/series.hpp"
#include "loadshift/synth.hpp"
#include "loadshift/timeutil.hpp"
#include "loadshift/util.hpp"

namespace fs = std::filesystem;

namespace loadshift::pipeline {

namespace {

constexpr const char* kVersion = "0.1.0";

fs::path out_root(const config::Config& cfg) { return fs::path(cfg.out_dir); }

fs::path make_stage_dir(const config::Config& cfg, const char* stage) {
    const fs::path dir = out_root(cfg) / stage;
    fs::create_directories(dir);
    return dir;
}

fs::path require_stage_dir(const config::Config& cfg, const char* stage) {
    const fs::path dir = out_root(cfg) / stage;
    if (!fs::exists(dir))
        throw std::runtime_error(std::string("missing checkpoint directory ") +
                                 dir.string() + "; run `loadshift " + stage +
                                 "` first");
    return dir;
}

// User ids become file name stems; anything outside [A-Za-z0-9_-] is mapped
// to '_' and collisions are a hard error rather than a silent merge.
std::string sanitize_id(const std::string& id) {
    std::string out = id;
    for (char& c : out) {
        const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') ||
                        (c >= '0' && c <= '9') || c == '_' || c == '-';
        if (!ok) c = '_';
    }
    return out;
}

std::string read_file_bytes(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + path.string());
    return std::string(std::istreambuf_iterator<char>(in),
                       std::istreambuf_iterator<char>());
}

void write_manifest(const config::Config& cfg) {
    nlohmann::json j;
    j["artifact"] = "loadshift";
    j["version"] = kVersion;
    j["config_hash"] = util::hex64(cfg.content_hash());
    nlohmann::json inputs = nlohmann::json::object();
    for (const std::string& p :
         {cfg.meter_csv, cfg.temperature_csv, cfg.dr_events_csv, cfg.flags_csv}) {
        if (p.empty()) continue;
        inputs[p] = fs::exists(p) ? util::hex64(util::fnv1a64(read_file_bytes(p)))
                                  : "missing";
    }
    j["inputs"] = inputs;
    fs::create_directories(out_root(cfg));
    std::ofstream out(out_root(cfg) / "manifest.json", std::ios::binary);
    out << j.dump(1) << "\n";
}

std::string bool_field(bool b) { return b ? "1" : "0"; }

HourlySeries read_series_csv(const fs::path& path, const std::string& value_col) {
    std::vector<std::pair<timeutil::HourIndex, double>> vals;
    csvio::read_csv(path, {"hour", value_col}, false,
                    [&](std::size_t line, const std::vector<std::string>& f,
                        const csvio::ColumnMap& col) {
                        const auto h = timeutil::parse_timestamp_hour(f[col[0]]);
                        const auto v = csvio::parse_double(f[col[1]]);
                        if (!h || !v)
                            throw std::runtime_error(path.string() + ":" +
                                                     std::to_string(line) +
                                                     ": bad row");
                        vals.emplace_back(*h, *v);
                    });
    return HourlySeries::from_pairs(std::move(vals));
}

void write_series_csv(const fs::path& path, const HourlySeries& s,
                      const std::string& value_col) {
    csvio::CsvWriter w(path, {"hour", value_col});
    for (std::size_t i = 0; i < s.size(); ++i)
        w.row({timeutil::format_hour(s.hour(i)), csvio::csv_field(s.value(i))});
}

struct UserEntry {
    std::string id;
    std::string stem;
};

std::vector<UserEntry> read_kept_users(const fs::path& ingest_dir) {
    std::vector<UserEntry> users;
    csvio::read_csv(ingest_dir / "users.csv", {"user_id", "stem", "status"}, false,
                    [&](std::size_t, const std::vector<std::string>& f,
                        const csvio::ColumnMap& col) {
                        if (f[col[2]] == "kept") users.push_back({f[col[0]], f[col[1]]});
                    });
    return users;
}

std::map<std::string, std::vector<ingest::DREvent>> read_events_checkpoint(
    const fs::path& ingest_dir) {
    std::map<std::string, std::vector<ingest::DREvent>> events;
    const fs::path path = ingest_dir / "events.csv";
    if (!fs::exists(path)) return events;
    csvio::read_csv(path, {"user_id", "start", "duration_hours"}, false,
                    [&](std::size_t line, const std::vector<std::string>& f,
                        const csvio::ColumnMap& col) {
                        const auto h = timeutil::parse_timestamp_hour(f[col[1]]);
                        const auto d = csvio::parse_int(f[col[2]]);
                        if (!h || !d)
                            throw std::runtime_error(path.string() + ":" +
                                                     std::to_string(line) +
                                                     ": bad row");
                        events[f[col[0]]].push_back(
                            ingest::DREvent{*h, static_cast<int>(*d)});
                    });
    return events;
}

const std::vector<ingest::DREvent>& events_for(
    const std::map<std::string, std::vector<ingest::DREvent>>& events,
    const std::string& user) {
    static const std::vector<ingest::DREvent> none;
    const auto it = events.find(user);
    return it == events.end() ? none : it->second;
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

forecast::BaselineConfig baseline_config_from(const config::Config& cfg) {
    forecast::BaselineConfig bc;
    for (const std::string& d : cfg.holidays) {
        const auto day = timeutil::parse_date_days(d);
        if (!day) throw std::runtime_error("bad holiday date: " + d);
        bc.holidays.insert(*day);
    }
    return bc;
}

std::vector<double> inverse_standardized(const linalg::Vector& v,
                                         const prep::StandardizationParams& p) {
    std::vector<double> out(static_cast<std::size_t>(v.size()));
    for (Eigen::Index i = 0; i < v.size(); ++i)
        out[static_cast<std::size_t>(i)] = prep::invert_standardization(v(i), p);
    return out;
}

std::string model_file(const std::string& stem, const std::string& method) {
    return "model__" + stem + "__" + method + ".json";
}

// Baseline predictions for the hours that have one, paired with the raw
// observation; `hours_out` records which target hours were served.
struct BaselinePairs {
    std::vector<double> pred;
    std::vector<double> obs;
    std::vector<timeutil::HourIndex> hours;
    std::size_t missing = 0;
};

BaselinePairs baseline_pairs(const HourlySeries& raw,
                             const std::vector<ingest::DREvent>& events,
                             std::span<const timeutil::HourIndex> targets,
                             const forecast::BaselineConfig& bc) {
    const forecast::BaselineResult br =
        forecast::iso_baseline(raw, events, targets, bc);
    BaselinePairs out;
    for (std::size_t i = 0; i < br.hours.size(); ++i) {
        if (!br.adjusted[i]) {
            ++out.missing;
            continue;
        }
        const auto obs = raw.at(br.hours[i]);
        if (!obs) {
            ++out.missing;
            continue;
        }
        out.pred.push_back(*br.adjusted[i]);
        out.obs.push_back(*obs);
        out.hours.push_back(br.hours[i]);
    }
    return out;
}

std::span<const timeutil::HourIndex> holdout_tail(
    const std::vector<timeutil::HourIndex>& hours, double fraction) {
    const std::size_t held = std::max<std::size_t>(
        1, static_cast<std::size_t>(
               std::floor(static_cast<double>(hours.size()) * fraction)));
    return {hours.data() + (hours.size() - held), held};
}

}  // namespace

void run_ingest(const config::Config& cfg) {
    if (cfg.meter_csv.empty() || cfg.temperature_csv.empty())
        throw std::runtime_error("ingest requires meter_csv and temperature_csv");
    const fs::path dir = make_stage_dir(cfg, "ingest");

    ingest::MeterLoad meter =
        ingest::load_meter_csv(cfg.meter_csv, cfg.excessive_kwh, cfg.strict_csv);
    ingest::TemperatureLoad tl =
        ingest::load_temperature_csv(cfg.temperature_csv, cfg.strict_csv);
    const HourlySeries temperature = ingest::resample_temperature(tl.obs);
    std::map<std::string, std::vector<ingest::DREvent>> events;
    if (!cfg.dr_events_csv.empty())
        events = ingest::load_dr_events_csv(cfg.dr_events_csv, cfg.strict_csv);

    // Solar flags fold into the corruption flags collected while loading.
    std::map<std::string, ingest::UserFlags> flags = meter.flags;
    if (!cfg.flags_csv.empty()) {
        for (const auto& [user, solar] :
             ingest::load_flags_csv(cfg.flags_csv, cfg.strict_csv)) {
            const auto it = flags.find(user);
            if (it != flags.end()) it->second.has_solar = solar;
        }
    }
    std::vector<std::string> all_users;
    for (const auto& [user, series] : meter.consumption) all_users.push_back(user);
    const ingest::FilterResult filtered = ingest::filter_users(flags, all_users);

    std::map<std::string, std::string> removal_reason;
    for (const auto& r : filtered.removed) removal_reason[r.user_id] = r.reason;

    std::map<std::string, std::string> stems;
    std::set<std::string> seen_stems;
    for (const std::string& user : all_users) {
        const std::string stem = sanitize_id(user);
        if (!seen_stems.insert(stem).second)
            throw std::runtime_error("user id collision after sanitizing: " + stem);
        stems[user] = stem;
    }

    {
        csvio::CsvWriter w(dir / "users.csv", {"user_id", "stem", "status", "reason"});
        for (const std::string& user : all_users) {
            const auto it = removal_reason.find(user);
            w.row({user, stems[user], it == removal_reason.end() ? "kept" : "excluded",
                   it == removal_reason.end() ? "" : it->second});
        }
    }
    for (const std::string& user : filtered.kept)
        write_series_csv(dir / ("consumption__" + stems[user] + ".csv"),
                         meter.consumption.at(user), "kwh");
    write_series_csv(dir / "temperature.csv", temperature, "temp_c");
    {
        csvio::CsvWriter w(dir / "events.csv", {"user_id", "start", "duration_hours"});
        for (const auto& [user, evs] : events)
            for (const auto& e : evs)
                w.row({user, timeutil::format_hour(e.start),
                       csvio::csv_field(e.duration_hours)});
    }
    {
        csvio::CsvWriter w(dir / "issues.csv", {"source", "line", "message"});
        for (const auto& issue : meter.stats.issues)
            w.row({"meter", csvio::csv_field(issue.line), issue.message});
        for (const auto& issue : tl.stats.issues)
            w.row({"temperature", csvio::csv_field(issue.line), issue.message});
    }
    write_manifest(cfg);
}

void run_prep(const config::Config& cfg) {
    const fs::path ingest_dir = require_stage_dir(cfg, "ingest");
    const fs::path dir = make_stage_dir(cfg, "prep");
    const std::vector<UserEntry> users = read_kept_users(ingest_dir);
    const HourlySeries temperature =
        read_series_csv(ingest_dir / "temperature.csv", "temp_c");
    const auto events = read_events_checkpoint(ingest_dir);

    csvio::CsvWriter summary(
        dir / "prep_summary.csv",
        {"user_id", "status", "skip_reason", "train_rows", "dr_rows", "cons_mean",
         "cons_std", "temp_mean", "temp_std", "adf_stat", "adf_lags",
         "adf_stationary_99"});

    for (const UserEntry& user : users) {
        const HourlySeries raw =
            read_series_csv(ingest_dir / ("consumption__" + user.stem + ".csv"), "kwh");
        const auto& user_events = events_for(events, user.id);

        std::string status = "ok";
        std::string reason;
        std::size_t train_rows = 0, dr_rows = 0;
        prep::StandardizationParams cons_params{}, temp_params{};
        bool have_params = false;
        double adf_stat = std::numeric_limits<double>::quiet_NaN();
        int adf_lags = -1;
        bool adf_stat99 = false;

        try {
            auto [cons_a, temp_a] = align_series(raw, temperature);
            const prep::SpilloverResult spill =
                prep::remove_spillover(cons_a, user_events, cfg.spillover_hours);
            const auto cons_fit = prep::standardize(spill.training);
            cons_params = cons_fit.second;
            const HourlySeries cons_std = prep::standardize(cons_a, cons_params).first;
            const HourlySeries temp_train =
                temp_a.restricted_to(spill.training.hours());
            const auto temp_fit = prep::standardize(temp_train);
            temp_params = temp_fit.second;
            const HourlySeries temp_std = prep::standardize(temp_a, temp_params).first;
            have_params = true;

            // Stationarity diagnostic on the longest gap-free stretch of the
            // standardized training partition.
            try {
                const HourlySeries run = prep::longest_contiguous_run(cons_fit.first);
                if (run.size() >= 100) {
                    const prep::ADFResult adf = prep::adf_test(run, cfg.adf_max_lag);
                    adf_stat = adf.test_statistic;
                    adf_lags = adf.used_lags;
                    adf_stat99 = adf.stationary_at_99;
                }
            } catch (const std::exception&) {
                // diagnostic only; a failed regression must not block the user
            }

            prep::FeatureBuildResult built = prep::build_features(
                cons_std, temp_std, user_events, cfg.spillover_hours,
                cfg.min_train_rows, cfg.min_dr_rows);
            train_rows = built.train_rows;
            dr_rows = built.dr_rows;
            if (built.features) {
                prep::save_featureset(dir / ("featureset__" + user.stem + ".csv"),
                                      user.id, *built.features, cons_params,
                                      temp_params);
            } else {
                status = "skipped";
                reason = built.skip_reason;
            }
        } catch (const std::exception& e) {
            status = "skipped";
            reason = e.what();
        }

        const double nan = std::numeric_limits<double>::quiet_NaN();
        summary.row({user.id, status, reason, csvio::csv_field(train_rows),
                     csvio::csv_field(dr_rows),
                     csvio::csv_field(have_params ? cons_params.mean : nan),
                     csvio::csv_field(have_params ? cons_params.std : nan),
                     csvio::csv_field(have_params ? temp_params.mean : nan),
                     csvio::csv_field(have_params ? temp_params.std : nan),
                     csvio::csv_field(adf_stat), csvio::csv_field(adf_lags),
                     bool_field(adf_stat99)});
    }
    write_manifest(cfg);
}

namespace {

std::vector<UserEntry> prepared_users(const config::Config& cfg,
                                      const fs::path& prep_dir) {
    const fs::path ingest_dir = require_stage_dir(cfg, "ingest");
    std::vector<UserEntry> out;
    for (const UserEntry& u : read_kept_users(ingest_dir))
        if (fs::exists(prep_dir / ("featureset__" + u.stem + ".csv"))) out.push_back(u);
    return out;
}

}  // namespace

void run_forecast(const config::Config& cfg) {
    const fs::path ingest_dir = require_stage_dir(cfg, "ingest");
    const fs::path prep_dir = require_stage_dir(cfg, "prep");
    const fs::path dir = make_stage_dir(cfg, "forecast");
    const std::vector<UserEntry> users = prepared_users(cfg, prep_dir);
    const auto events = read_events_checkpoint(ingest_dir);
    const forecast::CVConfig cv = cv_config_from(cfg);
    const forecast::BaselineConfig bc = baseline_config_from(cfg);

    struct Rows {
        std::vector<std::vector<std::string>> mape;
        std::vector<std::vector<std::string>> cv;
    };
    std::vector<Rows> per_user(users.size());

    util::parallel_for(users.size(), cfg.jobs, [&](std::size_t ui) {
        const UserEntry& user = users[ui];
        const prep::LoadedFeatureSet lfs =
            prep::load_featureset(prep_dir / ("featureset__" + user.stem + ".csv"));
        const prep::FeatureSet& f = lfs.features;
        Rows& rows = per_user[ui];

        for (const std::string& name : cfg.methods) {
            if (name == "iso") {
                const HourlySeries raw = read_series_csv(
                    ingest_dir / ("consumption__" + user.stem + ".csv"), "kwh");
                const BaselinePairs pairs =
                    baseline_pairs(raw, events_for(events, user.id),
                                   holdout_tail(f.hours0, cfg.holdout_fraction), bc);
                report::MapeRecord rec;
                if (!pairs.obs.empty())
                    rec = report::mape(pairs.obs, pairs.pred, cfg.mape_floor_kwh);
                else
                    rec.flagged = true;
                rows.mape.push_back({user.id, name, csvio::csv_field(rec.percent),
                                     csvio::csv_field(rec.excluded),
                                     bool_field(rec.flagged)});
                continue;
            }
            const auto method = forecast::method_from_name(name);
            if (!method) throw std::runtime_error("unknown method: " + name);
            const forecast::HoldoutFit hf =
                forecast::fit_with_holdout(*method, f.X0, f.Y0, cv,
                                           cfg.holdout_fraction, prep::schema_hash());
            hf.model.save(dir / model_file(user.stem, name));

            const std::vector<double> truth = inverse_standardized(
                f.Y0.tail(f.Y0.size() - hf.holdout_begin), lfs.cons_params);
            const std::vector<double> pred =
                inverse_standardized(hf.holdout_pred, lfs.cons_params);
            const report::MapeRecord rec =
                report::mape(truth, pred, cfg.mape_floor_kwh);
            rows.mape.push_back({user.id, name, csvio::csv_field(rec.percent),
                                 csvio::csv_field(rec.excluded),
                                 bool_field(rec.flagged)});

            const forecast::CVRecord& cvr = hf.model.cv_record();
            std::vector<std::string> folds;
            for (double m : cvr.fold_mse) folds.push_back(util::fmt_double(m));
            rows.cv.push_back({user.id, name, cvr.chosen,
                               csvio::csv_field(cvr.mean_mse),
                               util::join(folds, " ")});
        }
    });

    csvio::CsvWriter mape_out(dir / "mape.csv",
                              {"user_id", "method", "mape", "excluded", "flagged"});
    csvio::CsvWriter cv_out(dir / "cv.csv",
                            {"user_id", "method", "chosen", "mean_mse", "fold_mse"});
    for (const Rows& rows : per_user) {
        for (const auto& r : rows.mape) mape_out.row(r);
        for (const auto& r : rows.cv) cv_out.row(r);
    }
    write_manifest(cfg);
}

void run_effects(const config::Config& cfg) {
    const fs::path ingest_dir = require_stage_dir(cfg, "ingest");
    const fs::path prep_dir = require_stage_dir(cfg, "prep");
    const fs::path forecast_dir = require_stage_dir(cfg, "forecast");
    const fs::path dir = make_stage_dir(cfg, "effects");
    const std::vector<UserEntry> users = prepared_users(cfg, prep_dir);
    const auto events = read_events_checkpoint(ingest_dir);
    const forecast::BaselineConfig bc = baseline_config_from(cfg);

    csvio::CsvWriter out(dir / "effects.csv",
                         {"user_id", "method", "n_events", "delta_hat", "mpr",
                          "wilcoxon_p", "hl_shift", "bias"});
    csvio::CsvWriter flags(dir / "effects_flags.csv",
                           {"user_id", "method", "flag", "detail"});

    for (const UserEntry& user : users) {
        const prep::LoadedFeatureSet lfs =
            prep::load_featureset(prep_dir / ("featureset__" + user.stem + ".csv"));
        const prep::FeatureSet& f = lfs.features;

        for (const std::string& name : cfg.methods) {
            effects::TreatmentEstimate est;
            try {
                if (name == "iso") {
                    const HourlySeries raw = read_series_csv(
                        ingest_dir / ("consumption__" + user.stem + ".csv"), "kwh");
                    const auto& evs = events_for(events, user.id);
                    const BaselinePairs dr_pairs =
                        baseline_pairs(raw, evs, f.hours1, bc);
                    if (dr_pairs.missing > 0)
                        flags.row({user.id, name, "baseline_unavailable",
                                   csvio::csv_field(dr_pairs.missing)});
                    if (dr_pairs.obs.empty())
                        throw std::runtime_error("no baseline-covered event hours");

                    // Standardize the baseline so its estimate is comparable
                    // with the model columns.
                    std::vector<double> y_hat(dr_pairs.pred.size());
                    std::vector<double> y_dr(dr_pairs.obs.size());
                    for (std::size_t i = 0; i < dr_pairs.pred.size(); ++i) {
                        y_hat[i] = prep::apply_standardization(dr_pairs.pred[i],
                                                               lfs.cons_params);
                        y_dr[i] = prep::apply_standardization(dr_pairs.obs[i],
                                                              lfs.cons_params);
                    }
                    const BaselinePairs train_pairs =
                        baseline_pairs(raw, evs, f.hours0, bc);
                    double bias = 0.0;
                    if (!train_pairs.obs.empty()) {
                        double sum = 0.0;
                        for (std::size_t i = 0; i < train_pairs.obs.size(); ++i)
                            sum += prep::apply_standardization(train_pairs.obs[i],
                                                               lfs.cons_params) -
                                   prep::apply_standardization(train_pairs.pred[i],
                                                               lfs.cons_params);
                        bias = sum / static_cast<double>(train_pairs.obs.size());
                    }
                    est = effects::estimate_from_counterfactual(y_hat, y_dr, bias,
                                                                cfg.mpr_floor);
                } else {
                    const fs::path mpath = forecast_dir / model_file(user.stem, name);
                    if (!fs::exists(mpath))
                        throw std::runtime_error(
                            "model file missing (run forecast with this method): " +
                            mpath.string());
                    const forecast::ForecastModel model =
                        forecast::ForecastModel::load(mpath);
                    if (model.schema_hash() != prep::schema_hash())
                        throw std::runtime_error("model schema mismatch: " +
                                                 mpath.string());
                    est = effects::estimate_user(f, model, cfg.mpr_floor);
                }
            } catch (const std::exception& e) {
                flags.row({user.id, name, "estimate_failed", e.what()});
                continue;
            }
            est.user_id = user.id;
            est.method = name;
            if (est.mpr.divergence)
                flags.row({user.id, name, "mpr_divergence",
                           csvio::csv_field(est.mpr.excluded)});
            if (std::isnan(est.mpr.percent))
                flags.row({user.id, name, "mpr_undefined", ""});
            out.row({est.user_id, est.method, csvio::csv_field(est.n_events),
                     csvio::csv_field(est.delta_hat),
                     csvio::csv_field(est.mpr.percent),
                     csvio::csv_field(est.wilcoxon.p_value),
                     csvio::csv_field(est.hl_shift), csvio::csv_field(est.bias)});
        }
    }
    write_manifest(cfg);
}

void run_segment(const config::Config& cfg) {
    const fs::path ingest_dir = require_stage_dir(cfg, "ingest");
    const fs::path dir = make_stage_dir(cfg, "segment");
    const std::vector<UserEntry> users = read_kept_users(ingest_dir);

    csvio::CsvWriter excluded(dir / "excluded.csv", {"user_id", "reason"});

    std::vector<segment::LoadShape> shapes;
    struct UserShapes {
        std::string id;
        std::size_t first = 0;
        std::size_t count = 0;
        double hstd = 0.0;
    };
    std::vector<UserShapes> scored;

    for (const UserEntry& user : users) {
        const HourlySeries raw =
            read_series_csv(ingest_dir / ("consumption__" + user.stem + ".csv"), "kwh");
        std::vector<segment::LoadShape> mine = segment::daily_shapes(raw);
        if (mine.empty()) {
            excluded.row({user.id, "fewer than five usable weekdays"});
            continue;
        }
        double hstd = 0.0;
        try {
            hstd = segment::hourly_std(raw, cfg.hourly_std_raw);
        } catch (const std::exception& e) {
            excluded.row({user.id, e.what()});
            continue;
        }
        UserShapes us;
        us.id = user.id;
        us.first = shapes.size();
        us.count = mine.size();
        us.hstd = hstd;
        for (auto& s : mine) {
            s.source_user = user.id;
            shapes.push_back(std::move(s));
        }
        scored.push_back(std::move(us));
    }
    if (scored.empty()) throw std::runtime_error("segment: no scorable users");

    std::vector<int> ks = cfg.kmeans_ks;
    std::sort(ks.begin(), ks.end());
    const int ref_k = ks[ks.size() / 2];

    std::vector<segment::VariabilityScore> scores(scored.size());
    for (std::size_t i = 0; i < scored.size(); ++i) {
        scores[i].user_id = scored[i].id;
        scores[i].hourly_std = scored[i].hstd;
    }

    for (int k : ks) {
        segment::KmeansConfig kc;
        kc.k = k;
        kc.seed = util::mix_seed(cfg.seed, 7000 + static_cast<std::uint64_t>(k));
        kc.restarts = cfg.kmeans_restarts;
        kc.max_iter = cfg.kmeans_max_iter;
        const segment::ClusterModel model = segment::kmeans(shapes, kc);

        std::vector<std::size_t> members(static_cast<std::size_t>(k), 0);
        for (int a : model.assignments) ++members[static_cast<std::size_t>(a)];
        std::vector<std::string> header{"cluster"};
        for (int h = 0; h < 24; ++h) {
            char buf[8];
            std::snprintf(buf, sizeof buf, "h%02d", h);
            header.emplace_back(buf);
        }
        header.emplace_back("members");
        csvio::CsvWriter w(dir / ("centroids_k" + std::to_string(k) + ".csv"), header);
        for (int c = 0; c < k; ++c) {
            std::vector<std::string> row{csvio::csv_field(c)};
            for (double v : model.centroids[static_cast<std::size_t>(c)])
                row.push_back(util::fmt_double(v));
            row.push_back(csvio::csv_field(members[static_cast<std::size_t>(c)]));
            w.row(row);
        }

        for (std::size_t i = 0; i < scored.size(); ++i) {
            std::span<const int> mine(model.assignments.data() + scored[i].first,
                                      scored[i].count);
            scores[i].entropy_by_k[k] = segment::entropy(mine, k);
        }
    }

    // Percentile rank on the reference k's entropy; 100 = most variable.
    std::vector<std::size_t> order(scores.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        const double ea = scores[a].entropy_by_k.at(ref_k);
        const double eb = scores[b].entropy_by_k.at(ref_k);
        if (ea != eb) return ea < eb;
        return scores[a].user_id < scores[b].user_id;
    });
    for (std::size_t rank = 0; rank < order.size(); ++rank)
        scores[order[rank]].percentile = 100.0 * static_cast<double>(rank + 1) /
                                         static_cast<double>(order.size());

    std::vector<std::string> header{"user_id"};
    for (int k : ks) header.push_back("entropy_k" + std::to_string(k));
    header.emplace_back("hourly_std");
    header.emplace_back("percentile");
    csvio::CsvWriter w(dir / "scores.csv", header);
    for (const auto& s : scores) {
        std::vector<std::string> row{s.user_id};
        for (int k : ks) row.push_back(util::fmt_double(s.entropy_by_k.at(k)));
        row.push_back(util::fmt_double(s.hourly_std));
        row.push_back(util::fmt_double(s.percentile));
        w.row(row);
    }
    write_manifest(cfg);
}

void run_synth(const config::Config& cfg) {
    const fs::path dir = make_stage_dir(cfg, "synth");
    const synth::SynthConfig sc = synth::synth_config_from(cfg);
    const synth::SynthDataset ds = synth::generate(sc);

    {
        csvio::CsvWriter w(dir / "meter.csv", {"user_id", "timestamp", "kwh"});
        for (const auto& [user, series] : ds.consumption)
            for (std::size_t i = 0; i < series.size(); ++i)
                w.row({user, timeutil::format_hour(series.hour(i)),
                       csvio::csv_field(series.value(i))});
    }
    {
        csvio::CsvWriter w(dir / "temperature.csv", {"timestamp", "temp_c"});
        for (std::size_t i = 0; i < ds.temperature.size(); ++i)
            w.row({timeutil::format_hour(ds.temperature.hour(i)),
                   csvio::csv_field(ds.temperature.value(i))});
    }
    {
        csvio::CsvWriter w(dir / "events.csv", {"user_id", "start", "duration_hours"});
        for (const auto& [user, series] : ds.consumption)
            for (const auto& e : ds.events)
                w.row({user, timeutil::format_hour(e.start),
                       csvio::csv_field(e.duration_hours)});
    }
    {
        csvio::CsvWriter w(dir / "flags.csv", {"user_id", "has_solar"});
        for (const auto& [user, series] : ds.consumption) w.row({user, "0"});
    }
    {
        csvio::CsvWriter w(dir / "ground_truth.csv",
                           {"user_id", "hour", "base", "temp_term", "noise", "is_dr",
                            "clip_amount"});
        for (const auto& [user, truth] : ds.truths)
            for (std::size_t i = 0; i < truth.hours.size(); ++i)
                w.row({user, timeutil::format_hour(truth.hours[i]),
                       csvio::csv_field(truth.base[i]),
                       csvio::csv_field(truth.temp_term[i]),
                       csvio::csv_field(truth.noise[i]),
                       bool_field(truth.is_dr[i] != 0),
                       csvio::csv_field(truth.clip_amount[i])});
    }
    {
        csvio::CsvWriter w(dir / "assignments.csv", {"user_id", "day", "shape"});
        for (const auto& [user, truth] : ds.truths)
            for (std::size_t d = 0; d < truth.base_assignments.size(); ++d)
                w.row({user,
                       timeutil::format_day(truth.first_day +
                                            static_cast<std::int64_t>(d)),
                       csvio::csv_field(truth.base_assignments[d])});
    }
    {
        std::ofstream out(dir / "config.ini", std::ios::binary);
        out << cfg.serialize();
    }
    {
        const std::vector<synth::RecoveryRow> rows = synth::recovery_experiment(
            cfg, cfg.recovery_mixtures, cfg.recovery_sigmas, cfg.recovery_seeds,
            cfg.recovery_methods, cfg.jobs);
        csvio::CsvWriter w(dir / "recovery.csv",
                           {"entropy", "sigma", "method", "mpr_err", "delta_err",
                            "hl_shift", "mape"});
        for (const auto& r : rows)
            w.row({util::fmt_double(r.entropy), util::fmt_double(r.sigma), r.method,
                   csvio::csv_field(r.mpr_err), csvio::csv_field(r.delta_err),
                   csvio::csv_field(r.hl_shift), csvio::csv_field(r.mape)});
    }
    write_manifest(cfg);
}

void run_report(const config::Config& cfg) {
    const fs::path forecast_dir = require_stage_dir(cfg, "forecast");
    const fs::path effects_dir = require_stage_dir(cfg, "effects");
    const fs::path segment_dir = require_stage_dir(cfg, "segment");
    const fs::path dir = make_stage_dir(cfg, "report");

    // method -> metric values
    std::map<std::string, std::vector<double>> mape_by_method;
    csvio::read_csv(forecast_dir / "mape.csv", {"user_id", "method", "mape"}, false,
                    [&](std::size_t, const std::vector<std::string>& f,
                        const csvio::ColumnMap& col) {
                        const auto v = csvio::parse_double(f[col[2]]);
                        if (v) mape_by_method[f[col[1]]].push_back(*v);
                    });

    std::vector<effects::TreatmentEstimate> estimates;
    std::map<std::string, std::vector<double>> delta_by_method, hl_by_method,
        mpr_by_method;
    csvio::read_csv(
        effects_dir / "effects.csv",
        {"user_id", "method", "delta_hat", "mpr", "wilcoxon_p", "hl_shift"}, false,
        [&](std::size_t line, const std::vector<std::string>& f,
            const csvio::ColumnMap& col) {
            effects::TreatmentEstimate est;
            est.user_id = f[col[0]];
            est.method = f[col[1]];
            const auto delta = csvio::parse_double(f[col[2]]);
            const auto mpr = csvio::parse_double(f[col[3]]);
            const auto p = csvio::parse_double(f[col[4]]);
            const auto hl = csvio::parse_double(f[col[5]]);
            if (!delta || !mpr || !p || !hl)
                throw std::runtime_error("effects.csv:" + std::to_string(line) +
                                         ": bad row");
            est.delta_hat = *delta;
            est.mpr.percent = *mpr;
            est.wilcoxon.p_value = *p;
            est.hl_shift = *hl;
            estimates.push_back(est);
            delta_by_method[est.method].push_back(est.delta_hat);
            hl_by_method[est.method].push_back(est.hl_shift);
            mpr_by_method[est.method].push_back(est.mpr.percent);
        });

    std::vector<int> ks = cfg.kmeans_ks;
    std::sort(ks.begin(), ks.end());
    std::vector<std::string> score_cols{"user_id"};
    for (int k : ks) score_cols.push_back("entropy_k" + std::to_string(k));
    score_cols.emplace_back("hourly_std");
    score_cols.emplace_back("percentile");
    std::vector<segment::VariabilityScore> scores;
    csvio::read_csv(segment_dir / "scores.csv", score_cols, false,
                    [&](std::size_t line, const std::vector<std::string>& f,
                        const csvio::ColumnMap& col) {
                        segment::VariabilityScore s;
                        s.user_id = f[col[0]];
                        for (std::size_t i = 0; i < ks.size(); ++i) {
                            const auto v = csvio::parse_double(f[col[1 + i]]);
                            if (!v)
                                throw std::runtime_error("scores.csv:" +
                                                         std::to_string(line) +
                                                         ": bad row");
                            s.entropy_by_k[ks[i]] = *v;
                        }
                        s.hourly_std =
                            csvio::parse_double(f[col[1 + ks.size()]]).value_or(0.0);
                        s.percentile =
                            csvio::parse_double(f[col[2 + ks.size()]]).value_or(0.0);
                        scores.push_back(std::move(s));
                    });

    csvio::CsvWriter summary(dir / "summary.csv",
                             {"method", "metric", "n", "min", "q1", "median", "q3",
                              "max", "whisker_lo", "whisker_hi", "n_outliers"});
    csvio::CsvWriter outliers(dir / "outliers.csv", {"method", "metric", "value"});
    const auto emit = [&](const std::map<std::string, std::vector<double>>& by_method,
                          const std::string& metric) {
        for (const auto& [method, values] : by_method) {
            const report::DistributionSummary s =
                report::summarize(method, metric, values);
            summary.row({s.method, s.metric, csvio::csv_field(s.n),
                         csvio::csv_field(s.min), csvio::csv_field(s.q1),
                         csvio::csv_field(s.median), csvio::csv_field(s.q3),
                         csvio::csv_field(s.max), csvio::csv_field(s.whisker_lo),
                         csvio::csv_field(s.whisker_hi),
                         csvio::csv_field(s.outliers.size())});
            for (double v : s.outliers)
                outliers.row({s.method, s.metric, csvio::csv_field(v)});
        }
    };
    emit(mape_by_method, "mape");
    emit(delta_by_method, "delta_hat");
    emit(hl_by_method, "hl_shift");
    emit(mpr_by_method, "mpr");

    csvio::CsvWriter rejection(dir / "rejection.csv",
                               {"k", "method", "bin", "significance", "n", "rejected",
                                "rate"});
    std::set<std::string> excluded_users;
    // Small populations cannot fill the configured bin count.
    const std::size_t n_bins =
        std::min<std::size_t>(static_cast<std::size_t>(cfg.entropy_bins),
                              scores.size());
    for (int k : ks) {
        const report::RejectionTable table = report::rejection_rates(
            estimates, scores, k, cfg.significance_levels, n_bins);
        for (const auto& cell : table.cells)
            rejection.row({csvio::csv_field(k), cell.method,
                           csvio::csv_field(cell.bin),
                           util::fmt_double(cell.significance),
                           csvio::csv_field(cell.n), csvio::csv_field(cell.rejected),
                           csvio::csv_field(cell.rate)});
        excluded_users.insert(table.excluded_users.begin(),
                              table.excluded_users.end());
    }
    csvio::CsvWriter rex(dir / "rejection_excluded.csv", {"user_id"});
    for (const std::string& u : excluded_users) rex.row({u});
    write_manifest(cfg);
}

void run_all(const config::Config& cfg) {
    run_ingest(cfg);
    run_prep(cfg);
    run_forecast(cfg);
    run_effects(cfg);
    run_segment(cfg);
    run_report(cfg);
}

}  // namespace loadshift::pipeline
