#include "loadshift/prep.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>
#include <stdexcept>

#include "loadshift/util.hpp"

namespace loadshift::prep {

std::pair<HourlySeries, StandardizationParams> standardize(
    const HourlySeries& series, std::optional<StandardizationParams> params) {
    StandardizationParams p;
    if (params) {
        p = *params;
        if (!(p.std > 0.0)) {
            throw std::invalid_argument("standardize: std must be positive");
        }
    } else {
        if (series.size() < 2) {
            throw std::runtime_error("standardize: need at least 2 values to fit");
        }
        p.mean = util::mean(series.values());
        p.std = util::stddev_population(series.values());
        if (!(p.std > 0.0)) {
            throw std::runtime_error("standardize: zero variance (degenerate user)");
        }
    }
    std::vector<HourIndex> hours(series.hours().begin(), series.hours().end());
    std::vector<double> values;
    values.reserve(series.size());
    for (double v : series.values()) values.push_back(apply_standardization(v, p));
    return {HourlySeries::from_sorted(std::move(hours), std::move(values)), p};
}

HourlySeries difference(const HourlySeries& series) {
    if (series.size() < 2) {
        throw std::invalid_argument("difference: need at least 2 values");
    }
    if (!series.gap_hours().empty()) {
        throw std::invalid_argument("difference: series has gaps");
    }
    std::vector<HourIndex> hours;
    std::vector<double> values;
    hours.reserve(series.size() - 1);
    values.reserve(series.size() - 1);
    for (std::size_t i = 1; i < series.size(); ++i) {
        hours.push_back(series.hour(i));
        values.push_back(series.value(i) - series.value(i - 1));
    }
    return HourlySeries::from_sorted(std::move(hours), std::move(values));
}

HourlySeries longest_contiguous_run(const HourlySeries& series) {
    if (series.empty()) return series;
    std::size_t best_start = 0, best_len = 1;
    std::size_t start = 0;
    for (std::size_t i = 1; i < series.size(); ++i) {
        if (series.hour(i) != series.hour(i - 1) + 1) start = i;
        if (i - start + 1 > best_len) {
            best_len = i - start + 1;
            best_start = start;
        }
    }
    std::vector<HourIndex> hours(series.hours().begin() + best_start,
                                 series.hours().begin() + best_start + best_len);
    std::vector<double> values(series.values().begin() + best_start,
                               series.values().begin() + best_start + best_len);
    return HourlySeries::from_sorted(std::move(hours), std::move(values));
}

ADFResult adf_test(const HourlySeries& series, int max_lag) {
    if (!series.gap_hours().empty()) {
        throw std::invalid_argument("adf_test: series has gaps; pass a contiguous run");
    }
    const std::size_t n = series.size();
    if (max_lag <= 0) {
        max_lag = static_cast<int>(
            std::floor(12.0 * std::pow(static_cast<double>(n) / 100.0, 0.25)));
        max_lag = std::max(max_lag, 0);
    }
    if (n <= 10 * static_cast<std::size_t>(std::max(max_lag, 1))) {
        throw std::runtime_error("adf_test: series too short for max_lag " +
                                 std::to_string(max_lag));
    }

    const auto y = series.values();
    std::vector<double> dy(n - 1);
    for (std::size_t i = 1; i < n; ++i) dy[i - 1] = y[i] - y[i - 1];

    // Builds the regression for lag order p with targets dy[t], t >= first.
    // Columns: const, trend, y_{t-1}, dy_{t-1..t-p}. Returns (tstat, aic, rows).
    auto fit = [&](int p, std::size_t first) {
        const std::size_t rows = dy.size() - first;
        const int k = 3 + p;
        linalg::Matrix X(rows, k);
        linalg::Vector b(rows);
        for (std::size_t r = 0; r < rows; ++r) {
            const std::size_t t = first + r;  // index into dy; target dy[t] = y[t+1]-y[t]
            X(r, 0) = 1.0;
            X(r, 1) = static_cast<double>(t + 1);  // time index of y[t+1]
            X(r, 2) = y[t];                        // level y_{t-1} for target dy_t
            for (int j = 1; j <= p; ++j) X(r, 2 + j) = dy[t - j];
            b(r) = dy[t];
        }
        const auto ls = linalg::solve_ls_with_se(X, b);
        const double tstat = ls.beta(2) / ls.se(2);
        const double T = static_cast<double>(rows);
        const double aic = T * std::log(ls.ssr / T) + 2.0 * k;
        return std::tuple<double, double, std::size_t>(tstat, aic, rows);
    };

    // AIC selection over a common sample so the candidates are comparable.
    int best_p = 0;
    double best_aic = std::numeric_limits<double>::infinity();
    const std::size_t common_first = static_cast<std::size_t>(max_lag);
    for (int p = 0; p <= max_lag; ++p) {
        const auto [tstat, aic, rows] = fit(p, common_first);
        (void)tstat;
        (void)rows;
        if (aic < best_aic - 1e-12) {
            best_aic = aic;
            best_p = p;
        }
    }

    const auto [tstat, aic, rows] = fit(best_p, static_cast<std::size_t>(best_p));
    (void)aic;

    // MacKinnon (2010) response-surface critical values, constant+trend case.
    const double T = static_cast<double>(rows);
    ADFResult res;
    res.test_statistic = tstat;
    res.used_lags = best_p;
    res.critical_values["1%"] = -3.9638 - 8.353 / T - 47.44 / (T * T);
    res.critical_values["5%"] = -3.4126 - 4.039 / T - 17.83 / (T * T);
    res.critical_values["10%"] = -3.1279 - 2.418 / T - 7.58 / (T * T);
    res.stationary_at_99 = res.test_statistic < res.critical_values["1%"];
    return res;
}

std::vector<HourIndex> spillover_hours_set(const std::vector<ingest::DREvent>& events,
                                           int spillover_hours) {
    std::set<HourIndex> dr;
    for (const auto& ev : events) {
        for (HourIndex h = ev.start; h < ev.end(); ++h) dr.insert(h);
    }
    std::set<HourIndex> spill;
    for (const auto& ev : events) {
        for (HourIndex h = ev.end(); h < ev.end() + spillover_hours; ++h) {
            if (!dr.count(h)) spill.insert(h);
        }
    }
    return {spill.begin(), spill.end()};
}

SpilloverResult remove_spillover(const HourlySeries& series,
                                 const std::vector<ingest::DREvent>& events,
                                 int spillover_hours) {
    SpilloverResult out;
    out.dr_hours = ingest::event_hours(events);
    out.removed = spillover_hours_set(events, spillover_hours);
    std::vector<HourIndex> drop;
    drop.reserve(out.dr_hours.size() + out.removed.size());
    std::merge(out.dr_hours.begin(), out.dr_hours.end(), out.removed.begin(),
               out.removed.end(), std::back_inserter(drop));
    out.training = series.without(drop);
    return out;
}

std::vector<std::string> feature_schema() {
    std::vector<std::string> cols;
    cols.reserve(kNumFeatures);
    for (int l = 1; l <= kNumLags; ++l) cols.push_back("cons_lag" + std::to_string(l));
    for (int l = 1; l <= kNumLags; ++l) cols.push_back("temp_lag" + std::to_string(l));
    for (int h = 0; h < 24; ++h) {
        char buf[16];
        std::snprintf(buf, sizeof(buf), "hod_wd_%02d", h);
        cols.push_back(buf);
    }
    for (int h = 0; h < 24; ++h) {
        char buf[16];
        std::snprintf(buf, sizeof(buf), "hod_we_%02d", h);
        cols.push_back(buf);
    }
    return cols;
}

std::uint64_t schema_hash() {
    const auto cols = feature_schema();
    return util::fnv1a64(util::join(cols, "|"));
}

int onehot_block_index(HourIndex target) {
    return (timeutil::is_weekend_hour(target) ? 24 : 0) + timeutil::hour_of_day(target);
}

FeatureBuildResult build_features(const HourlySeries& cons, const HourlySeries& temp,
                                  const std::vector<ingest::DREvent>& events,
                                  int spillover_hours, std::size_t min_train_rows,
                                  std::size_t min_dr_rows) {
    if (cons.size() != temp.size() ||
        !std::equal(cons.hours().begin(), cons.hours().end(), temp.hours().begin())) {
        throw std::invalid_argument("build_features: series not aligned");
    }

    const auto dr_vec = ingest::event_hours(events);
    const auto spill_vec = spillover_hours_set(events, spillover_hours);
    const std::set<HourIndex> dr(dr_vec.begin(), dr_vec.end());
    const std::set<HourIndex> spill(spill_vec.begin(), spill_vec.end());

    std::vector<std::size_t> train_idx;
    std::vector<std::size_t> dr_idx;
    for (std::size_t i = kNumLags; i < cons.size(); ++i) {
        if (!cons.window_complete(i, kNumLags + 1)) continue;
        const HourIndex h = cons.hour(i);
        if (dr.count(h)) {
            dr_idx.push_back(i);
            continue;
        }
        if (spill.count(h)) continue;
        bool window_clean = true;
        for (int l = 1; l <= kNumLags; ++l) {
            if (dr.count(h - l) || spill.count(h - l)) {
                window_clean = false;
                break;
            }
        }
        if (window_clean) train_idx.push_back(i);
    }

    FeatureBuildResult out;
    out.train_rows = train_idx.size();
    out.dr_rows = dr_idx.size();
    if (train_idx.size() < min_train_rows) {
        out.skip_reason = "training rows " + std::to_string(train_idx.size()) +
                          " below minimum " + std::to_string(min_train_rows);
        return out;
    }
    if (dr_idx.size() < min_dr_rows) {
        out.skip_reason = "dr rows " + std::to_string(dr_idx.size()) +
                          " below minimum " + std::to_string(min_dr_rows);
        return out;
    }

    auto fill = [&](const std::vector<std::size_t>& idx, linalg::Matrix& X,
                    linalg::Vector& Y, std::vector<HourIndex>& hours) {
        X.setZero(static_cast<Eigen::Index>(idx.size()), kNumFeatures);
        Y.resize(static_cast<Eigen::Index>(idx.size()));
        hours.reserve(idx.size());
        for (std::size_t r = 0; r < idx.size(); ++r) {
            const std::size_t i = idx[r];
            const HourIndex h = cons.hour(i);
            for (int l = 1; l <= kNumLags; ++l) {
                X(r, l - 1) = cons.value(i - l);
                X(r, kNumLags + l - 1) = temp.value(i - l);
            }
            X(r, 2 * kNumLags + onehot_block_index(h)) = 1.0;
            Y(r) = cons.value(i);
            hours.push_back(h);
        }
    };

    FeatureSet fs;
    fs.column_schema = feature_schema();
    fill(train_idx, fs.X0, fs.Y0, fs.hours0);
    fill(dr_idx, fs.X1, fs.Y1, fs.hours1);
    out.features = std::move(fs);
    return out;
}

void save_featureset(const std::filesystem::path& path, const std::string& user_id,
                     const FeatureSet& fs, const StandardizationParams& cons_params,
                     const StandardizationParams& temp_params) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << "# loadshift featureset v1\n";
    out << "# user " << user_id << '\n';
    out << "# cons_params " << util::fmt_double(cons_params.mean) << ' '
        << util::fmt_double(cons_params.std) << '\n';
    out << "# temp_params " << util::fmt_double(temp_params.mean) << ' '
        << util::fmt_double(temp_params.std) << '\n';
    out << "# schema " << util::join(fs.column_schema, "|") << '\n';
    out << "partition,target_hour,y";
    for (int j = 0; j < kNumFeatures; ++j) out << ",x" << j;
    out << '\n';

    auto dump = [&](int partition, const linalg::Matrix& X, const linalg::Vector& Y,
                    const std::vector<HourIndex>& hours) {
        for (Eigen::Index r = 0; r < X.rows(); ++r) {
            out << partition << ',' << hours[static_cast<std::size_t>(r)] << ','
                << util::fmt_double(Y(r));
            for (Eigen::Index j = 0; j < X.cols(); ++j) {
                out << ',' << util::fmt_double(X(r, j));
            }
            out << '\n';
        }
    };
    dump(0, fs.X0, fs.Y0, fs.hours0);
    dump(1, fs.X1, fs.Y1, fs.hours1);
    out.close();
    if (out.fail()) throw std::runtime_error("write failed: " + path.string());
}

LoadedFeatureSet load_featureset(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path.string());

    LoadedFeatureSet out;
    std::string line;
    auto expect_prefix = [&](const std::string& prefix) {
        if (!std::getline(in, line) || line.rfind(prefix, 0) != 0) {
            throw std::runtime_error(path.string() + ": expected \"" + prefix + "\" line");
        }
        return line.substr(prefix.size());
    };

    if (expect_prefix("# loadshift featureset v") != "1") {
        throw std::runtime_error(path.string() + ": unsupported featureset version");
    }
    out.user_id = util::trim(expect_prefix("# user "));
    {
        std::istringstream ss(expect_prefix("# cons_params "));
        if (!(ss >> out.cons_params.mean >> out.cons_params.std)) {
            throw std::runtime_error(path.string() + ": bad cons_params");
        }
    }
    {
        std::istringstream ss(expect_prefix("# temp_params "));
        if (!(ss >> out.temp_params.mean >> out.temp_params.std)) {
            throw std::runtime_error(path.string() + ": bad temp_params");
        }
    }
    const std::string schema = expect_prefix("# schema ");
    out.features.column_schema = util::split(schema, '|');
    if (out.features.column_schema != feature_schema()) {
        throw std::runtime_error(path.string() + ": schema mismatch");
    }
    expect_prefix("partition,target_hour,y");  // header row

    std::vector<std::vector<double>> rows0, rows1;
    std::vector<double> y0, y1;
    std::vector<HourIndex> h0, h1;
    std::size_t lineno = 6;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        const auto fields = util::split(line, ',');
        if (fields.size() != static_cast<std::size_t>(kNumFeatures) + 3) {
            throw std::runtime_error(path.string() + ":" + std::to_string(lineno) +
                                     ": wrong field count");
        }
        const int partition = std::stoi(fields[0]);
        const HourIndex hour = std::stoll(fields[1]);
        const double y = std::stod(fields[2]);
        std::vector<double> x(kNumFeatures);
        for (int j = 0; j < kNumFeatures; ++j) x[j] = std::stod(fields[3 + j]);
        if (partition == 0) {
            h0.push_back(hour);
            y0.push_back(y);
            rows0.push_back(std::move(x));
        } else if (partition == 1) {
            h1.push_back(hour);
            y1.push_back(y);
            rows1.push_back(std::move(x));
        } else {
            throw std::runtime_error(path.string() + ":" + std::to_string(lineno) +
                                     ": bad partition");
        }
    }

    auto pack = [](const std::vector<std::vector<double>>& rows,
                   const std::vector<double>& y, linalg::Matrix& X, linalg::Vector& Y) {
        X.resize(static_cast<Eigen::Index>(rows.size()), kNumFeatures);
        Y.resize(static_cast<Eigen::Index>(y.size()));
        for (std::size_t r = 0; r < rows.size(); ++r) {
            for (int j = 0; j < kNumFeatures; ++j) X(r, j) = rows[r][j];
            Y(r) = y[r];
        }
    };
    pack(rows0, y0, out.features.X0, out.features.Y0);
    pack(rows1, y1, out.features.X1, out.features.Y1);
    out.features.hours0 = std::move(h0);
    out.features.hours1 = std::move(h1);
    return out;
}

}  // namespace loadshift::prep
