#include "loadshift/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <stdexcept>

#include "loadshift/timeutil.hpp"
#include "loadshift/util.hpp"

namespace loadshift::config {

namespace {

std::vector<double> log_spaced(double lo, double hi, int n) {
    std::vector<double> out;
    out.reserve(static_cast<std::size_t>(n));
    const double llo = std::log10(lo);
    const double lhi = std::log10(hi);
    for (int i = 0; i < n; ++i) {
        const double t = (n == 1) ? 0.0 : static_cast<double>(i) / (n - 1);
        out.push_back(std::pow(10.0, llo + t * (lhi - llo)));
    }
    return out;
}

double to_double(const std::string& key, const std::string& v) {
    try {
        std::size_t used = 0;
        const double x = std::stod(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return x;
    } catch (const std::exception&) {
        throw std::runtime_error("config: bad numeric value for " + key + ": \"" + v + "\"");
    }
}

int to_int(const std::string& key, const std::string& v) {
    try {
        std::size_t used = 0;
        const long x = std::stol(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return static_cast<int>(x);
    } catch (const std::exception&) {
        throw std::runtime_error("config: bad integer value for " + key + ": \"" + v + "\"");
    }
}

std::uint64_t to_uint64(const std::string& key, const std::string& v) {
    try {
        std::size_t used = 0;
        const unsigned long long x = std::stoull(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return static_cast<std::uint64_t>(x);
    } catch (const std::exception&) {
        throw std::runtime_error("config: bad integer value for " + key + ": \"" + v + "\"");
    }
}

bool to_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw std::runtime_error("config: bad boolean value for " + key + ": \"" + v + "\"");
}

std::vector<std::string> to_list(const std::string& v) {
    std::vector<std::string> out;
    for (const auto& part : util::split(v, ',')) {
        const std::string t = util::trim(part);
        if (!t.empty()) out.push_back(t);
    }
    return out;
}

std::vector<double> to_double_list(const std::string& key, const std::string& v) {
    std::vector<double> out;
    for (const auto& part : to_list(v)) out.push_back(to_double(key, part));
    return out;
}

std::vector<int> to_int_list(const std::string& key, const std::string& v) {
    std::vector<int> out;
    for (const auto& part : to_list(v)) out.push_back(to_int(key, part));
    return out;
}

template <typename T>
std::string list_str(const std::vector<T>& v) {
    std::vector<std::string> parts;
    parts.reserve(v.size());
    for (const auto& x : v) {
        if constexpr (std::is_same_v<T, double>) {
            parts.push_back(util::fmt_double(x));
        } else if constexpr (std::is_same_v<T, std::string>) {
            parts.push_back(x);
        } else {
            parts.push_back(std::to_string(x));
        }
    }
    return util::join(parts, ",");
}

}  // namespace

std::vector<std::string> known_methods() {
    return {"ols", "lasso", "ridge", "knn", "svr", "tree", "iso"};
}

Config default_config() {
    Config cfg;
    cfg.lambda_grid = log_spaced(1e-4, 1e2, 10);
    cfg.knn_grid = {2, 4, 8, 16, 32, 64, 128};
    cfg.svr_c = {0.1, 1.0, 10.0};
    cfg.svr_gamma = {0.01, 0.1, 1.0};
    cfg.svr_eps = {0.05, 0.1};
    cfg.tree_depths = {3, 4, 5, 6, 7, 8, 9, 10, 11, 12};
    cfg.methods = known_methods();
    cfg.significance_levels = {0.95, 0.90, 0.80};
    cfg.kmeans_ks = {6, 12, 20};
    cfg.recovery_mixtures = {0.3, 0.5, 0.7, 0.85, 1.0};
    cfg.recovery_sigmas = {0.05, 0.2, 0.5};
    cfg.recovery_methods = {"ridge", "ols"};
    return cfg;
}

Config parse_config(const std::string& text, const std::string& origin) {
    Config cfg = default_config();
    std::istringstream in(text);
    std::string line;
    std::size_t lineno = 0;

    const std::map<std::string, std::function<void(const std::string&, const std::string&)>>
        setters = {
            {"meter_csv", [&](const std::string&, const std::string& v) { cfg.meter_csv = v; }},
            {"temperature_csv", [&](const std::string&, const std::string& v) { cfg.temperature_csv = v; }},
            {"dr_events_csv", [&](const std::string&, const std::string& v) { cfg.dr_events_csv = v; }},
            {"flags_csv", [&](const std::string&, const std::string& v) { cfg.flags_csv = v; }},
            {"strict_csv", [&](const std::string& k, const std::string& v) { cfg.strict_csv = to_bool(k, v); }},
            {"excessive_kwh", [&](const std::string& k, const std::string& v) { cfg.excessive_kwh = to_double(k, v); }},
            {"spillover_hours", [&](const std::string& k, const std::string& v) { cfg.spillover_hours = to_int(k, v); }},
            {"min_train_rows", [&](const std::string& k, const std::string& v) { cfg.min_train_rows = static_cast<std::size_t>(to_int(k, v)); }},
            {"min_dr_rows", [&](const std::string& k, const std::string& v) { cfg.min_dr_rows = static_cast<std::size_t>(to_int(k, v)); }},
            {"adf_max_lag", [&](const std::string& k, const std::string& v) { cfg.adf_max_lag = to_int(k, v); }},
            {"holidays", [&](const std::string&, const std::string& v) { cfg.holidays = to_list(v); }},
            {"cv_folds", [&](const std::string& k, const std::string& v) { cfg.cv_folds = to_int(k, v); }},
            {"lambda_grid", [&](const std::string& k, const std::string& v) { cfg.lambda_grid = to_double_list(k, v); }},
            {"knn_grid", [&](const std::string& k, const std::string& v) { cfg.knn_grid = to_int_list(k, v); }},
            {"svr_c", [&](const std::string& k, const std::string& v) { cfg.svr_c = to_double_list(k, v); }},
            {"svr_gamma", [&](const std::string& k, const std::string& v) { cfg.svr_gamma = to_double_list(k, v); }},
            {"svr_eps", [&](const std::string& k, const std::string& v) { cfg.svr_eps = to_double_list(k, v); }},
            {"svr_subset_cap", [&](const std::string& k, const std::string& v) { cfg.svr_subset_cap = static_cast<std::size_t>(to_int(k, v)); }},
            {"tree_depths", [&](const std::string& k, const std::string& v) { cfg.tree_depths = to_int_list(k, v); }},
            {"tree_min_samples", [&](const std::string& k, const std::string& v) { cfg.tree_min_samples = to_int(k, v); }},
            {"holdout_fraction", [&](const std::string& k, const std::string& v) { cfg.holdout_fraction = to_double(k, v); }},
            {"mape_floor_kwh", [&](const std::string& k, const std::string& v) { cfg.mape_floor_kwh = to_double(k, v); }},
            {"methods", [&](const std::string&, const std::string& v) { cfg.methods = to_list(v); }},
            {"mpr_floor", [&](const std::string& k, const std::string& v) { cfg.mpr_floor = to_double(k, v); }},
            {"significance_levels", [&](const std::string& k, const std::string& v) { cfg.significance_levels = to_double_list(k, v); }},
            {"kmeans_ks", [&](const std::string& k, const std::string& v) { cfg.kmeans_ks = to_int_list(k, v); }},
            {"kmeans_restarts", [&](const std::string& k, const std::string& v) { cfg.kmeans_restarts = to_int(k, v); }},
            {"kmeans_max_iter", [&](const std::string& k, const std::string& v) { cfg.kmeans_max_iter = to_int(k, v); }},
            {"entropy_bins", [&](const std::string& k, const std::string& v) { cfg.entropy_bins = to_int(k, v); }},
            {"hourly_std_raw", [&](const std::string& k, const std::string& v) { cfg.hourly_std_raw = to_bool(k, v); }},
            {"synth_n_days", [&](const std::string& k, const std::string& v) { cfg.synth_n_days = to_int(k, v); }},
            {"synth_n_users", [&](const std::string& k, const std::string& v) { cfg.synth_n_users = to_int(k, v); }},
            {"synth_sigma", [&](const std::string& k, const std::string& v) { cfg.synth_sigma = to_double(k, v); }},
            {"synth_c_dr", [&](const std::string& k, const std::string& v) { cfg.synth_c_dr = to_double(k, v); }},
            {"synth_dr_fraction", [&](const std::string& k, const std::string& v) { cfg.synth_dr_fraction = to_double(k, v); }},
            {"synth_c_t", [&](const std::string& k, const std::string& v) { cfg.synth_c_t = to_double(k, v); }},
            {"synth_daily_energy", [&](const std::string& k, const std::string& v) { cfg.synth_daily_energy = to_double(k, v); }},
            {"synth_mixture_ratio", [&](const std::string& k, const std::string& v) { cfg.synth_mixture_ratio = to_double(k, v); }},
            {"synth_temp_mean", [&](const std::string& k, const std::string& v) { cfg.synth_temp_mean = to_double(k, v); }},
            {"synth_temp_seasonal_amp", [&](const std::string& k, const std::string& v) { cfg.synth_temp_seasonal_amp = to_double(k, v); }},
            {"synth_temp_daily_amp", [&](const std::string& k, const std::string& v) { cfg.synth_temp_daily_amp = to_double(k, v); }},
            {"synth_temp_noise", [&](const std::string& k, const std::string& v) { cfg.synth_temp_noise = to_double(k, v); }},
            {"recovery_mixtures", [&](const std::string& k, const std::string& v) { cfg.recovery_mixtures = to_double_list(k, v); }},
            {"recovery_sigmas", [&](const std::string& k, const std::string& v) { cfg.recovery_sigmas = to_double_list(k, v); }},
            {"recovery_seeds", [&](const std::string& k, const std::string& v) { cfg.recovery_seeds = to_int(k, v); }},
            {"recovery_methods", [&](const std::string&, const std::string& v) { cfg.recovery_methods = to_list(v); }},
            {"seed", [&](const std::string& k, const std::string& v) { cfg.seed = to_uint64(k, v); }},
            {"jobs", [&](const std::string& k, const std::string& v) { cfg.jobs = to_int(k, v); }},
            {"out_dir", [&](const std::string&, const std::string& v) { cfg.out_dir = v; }},
        };

    while (std::getline(in, line)) {
        ++lineno;
        const std::size_t comment = line.find_first_of("#;");
        if (comment != std::string::npos) line = line.substr(0, comment);
        line = util::trim(line);
        if (line.empty()) continue;
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos) {
            throw std::runtime_error(origin + ":" + std::to_string(lineno) +
                                     ": expected key=value, got \"" + line + "\"");
        }
        const std::string key = util::trim(line.substr(0, eq));
        const std::string value = util::trim(line.substr(eq + 1));
        auto it = setters.find(key);
        if (it == setters.end()) {
            throw std::runtime_error(origin + ":" + std::to_string(lineno) +
                                     ": unknown key \"" + key + "\"");
        }
        it->second(key, value);
    }

    validate(cfg);
    return cfg;
}

Config load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("cannot open config " + path.string());
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_config(buf.str(), path.string());
}

void validate(const Config& cfg) {
    const auto known = known_methods();
    for (const auto& m : cfg.methods) {
        if (std::find(known.begin(), known.end(), m) == known.end()) {
            throw std::runtime_error("config: unknown method \"" + m + "\"");
        }
    }
    if (cfg.methods.empty()) throw std::runtime_error("config: methods is empty");
    if (cfg.cv_folds < 2) throw std::runtime_error("config: cv_folds must be >= 2");
    if (cfg.holdout_fraction <= 0.0 || cfg.holdout_fraction >= 1.0) {
        throw std::runtime_error("config: holdout_fraction must be in (0,1)");
    }
    if (cfg.spillover_hours < 0) throw std::runtime_error("config: spillover_hours must be >= 0");
    if (cfg.jobs < 1) throw std::runtime_error("config: jobs must be >= 1");
    if (cfg.entropy_bins < 1) throw std::runtime_error("config: entropy_bins must be >= 1");
    if (cfg.synth_c_dr < 0.0) throw std::runtime_error("config: synth_c_dr must be >= 0");
    if (cfg.synth_sigma < 0.0) throw std::runtime_error("config: synth_sigma must be >= 0");
    if (cfg.synth_n_days < 1) throw std::runtime_error("config: synth_n_days must be >= 1");
    if (cfg.synth_dr_fraction < 0.0 || cfg.synth_dr_fraction > 0.5) {
        throw std::runtime_error("config: synth_dr_fraction must be in [0,0.5]");
    }
    for (int k : cfg.kmeans_ks) {
        if (k < 1) throw std::runtime_error("config: kmeans_ks entries must be >= 1");
    }
    for (int k : cfg.knn_grid) {
        if (k < 1) throw std::runtime_error("config: knn_grid entries must be >= 1");
    }
    for (int d : cfg.tree_depths) {
        if (d < 1) throw std::runtime_error("config: tree_depths entries must be >= 1");
    }
    for (double l : cfg.lambda_grid) {
        if (l < 0.0) throw std::runtime_error("config: lambda_grid entries must be >= 0");
    }
    for (const auto& day : cfg.holidays) {
        if (!timeutil::parse_date_days(day)) {
            throw std::runtime_error("config: bad holiday date \"" + day + "\"");
        }
    }
    if (cfg.recovery_seeds < 1) throw std::runtime_error("config: recovery_seeds must be >= 1");
    for (const auto& m : cfg.recovery_methods) {
        if (std::find(known.begin(), known.end(), m) == known.end()) {
            throw std::runtime_error("config: unknown recovery method \"" + m + "\"");
        }
    }
    for (double r : cfg.recovery_mixtures) {
        if (r <= 0.0) throw std::runtime_error("config: recovery_mixtures entries must be > 0");
    }
    for (double s : cfg.recovery_sigmas) {
        if (s < 0.0) throw std::runtime_error("config: recovery_sigmas entries must be >= 0");
    }
    if (cfg.synth_mixture_ratio <= 0.0) {
        throw std::runtime_error("config: synth_mixture_ratio must be > 0");
    }
    if (cfg.synth_daily_energy <= 0.0) {
        throw std::runtime_error("config: synth_daily_energy must be > 0");
    }
}

std::string Config::serialize() const {
    std::ostringstream out;
    out << "meter_csv=" << meter_csv << '\n'
        << "temperature_csv=" << temperature_csv << '\n'
        << "dr_events_csv=" << dr_events_csv << '\n'
        << "flags_csv=" << flags_csv << '\n'
        << "strict_csv=" << (strict_csv ? "true" : "false") << '\n'
        << "excessive_kwh=" << util::fmt_double(excessive_kwh) << '\n'
        << "spillover_hours=" << spillover_hours << '\n'
        << "min_train_rows=" << min_train_rows << '\n'
        << "min_dr_rows=" << min_dr_rows << '\n'
        << "adf_max_lag=" << adf_max_lag << '\n'
        << "holidays=" << list_str(holidays) << '\n'
        << "cv_folds=" << cv_folds << '\n'
        << "lambda_grid=" << list_str(lambda_grid) << '\n'
        << "knn_grid=" << list_str(knn_grid) << '\n'
        << "svr_c=" << list_str(svr_c) << '\n'
        << "svr_gamma=" << list_str(svr_gamma) << '\n'
        << "svr_eps=" << list_str(svr_eps) << '\n'
        << "svr_subset_cap=" << svr_subset_cap << '\n'
        << "tree_depths=" << list_str(tree_depths) << '\n'
        << "tree_min_samples=" << tree_min_samples << '\n'
        << "holdout_fraction=" << util::fmt_double(holdout_fraction) << '\n'
        << "mape_floor_kwh=" << util::fmt_double(mape_floor_kwh) << '\n'
        << "methods=" << list_str(methods) << '\n'
        << "mpr_floor=" << util::fmt_double(mpr_floor) << '\n'
        << "significance_levels=" << list_str(significance_levels) << '\n'
        << "kmeans_ks=" << list_str(kmeans_ks) << '\n'
        << "kmeans_restarts=" << kmeans_restarts << '\n'
        << "kmeans_max_iter=" << kmeans_max_iter << '\n'
        << "entropy_bins=" << entropy_bins << '\n'
        << "hourly_std_raw=" << (hourly_std_raw ? "true" : "false") << '\n'
        << "synth_n_days=" << synth_n_days << '\n'
        << "synth_n_users=" << synth_n_users << '\n'
        << "synth_sigma=" << util::fmt_double(synth_sigma) << '\n'
        << "synth_c_dr=" << util::fmt_double(synth_c_dr) << '\n'
        << "synth_dr_fraction=" << util::fmt_double(synth_dr_fraction) << '\n'
        << "synth_c_t=" << util::fmt_double(synth_c_t) << '\n'
        << "synth_daily_energy=" << util::fmt_double(synth_daily_energy) << '\n'
        << "synth_mixture_ratio=" << util::fmt_double(synth_mixture_ratio) << '\n'
        << "synth_temp_mean=" << util::fmt_double(synth_temp_mean) << '\n'
        << "synth_temp_seasonal_amp=" << util::fmt_double(synth_temp_seasonal_amp) << '\n'
        << "synth_temp_daily_amp=" << util::fmt_double(synth_temp_daily_amp) << '\n'
        << "synth_temp_noise=" << util::fmt_double(synth_temp_noise) << '\n'
        << "recovery_mixtures=" << list_str(recovery_mixtures) << '\n'
        << "recovery_sigmas=" << list_str(recovery_sigmas) << '\n'
        << "recovery_seeds=" << recovery_seeds << '\n'
        << "recovery_methods=" << list_str(recovery_methods) << '\n'
        << "seed=" << seed << '\n'
        << "jobs=" << jobs << '\n'
        << "out_dir=" << out_dir << '\n';
    return out.str();
}

std::uint64_t Config::content_hash() const { return util::fnv1a64(serialize()); }

}  // namespace loadshift::config
