#include "loadshift/report.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <stdexcept>

#include "loadshift/util.hpp"

namespace loadshift::report {

MapeRecord mape(std::span<const double> y_true, std::span<const double> y_pred,
                double floor) {
    if (y_true.size() != y_pred.size())
        throw std::invalid_argument("mape: length mismatch");
    MapeRecord rec;
    double sum = 0.0;
    std::size_t used = 0;
    for (std::size_t i = 0; i < y_true.size(); ++i) {
        if (std::abs(y_true[i]) < floor) {
            ++rec.excluded;
            continue;
        }
        sum += std::abs(y_true[i] - y_pred[i]) / std::abs(y_true[i]);
        ++used;
    }
    if (used == 0) {
        rec.flagged = true;
        return rec;
    }
    rec.percent = sum / static_cast<double>(used) * 100.0;
    return rec;
}

DistributionSummary summarize(std::string method, std::string metric,
                              std::vector<double> values) {
    DistributionSummary s;
    s.method = std::move(method);
    s.metric = std::move(metric);
    std::erase_if(values, [](double v) { return !std::isfinite(v); });
    std::sort(values.begin(), values.end());
    s.n = values.size();
    if (values.empty()) return s;

    s.min = values.front();
    s.max = values.back();
    s.q1 = util::quantile_sorted(values, 0.25);
    s.median = util::quantile_sorted(values, 0.5);
    s.q3 = util::quantile_sorted(values, 0.75);
    const double iqr = s.q3 - s.q1;
    const double lo_fence = s.q1 - 1.5 * iqr;
    const double hi_fence = s.q3 + 1.5 * iqr;

    s.whisker_lo = s.q1;
    s.whisker_hi = s.q3;
    for (double v : values) {
        if (v >= lo_fence) {
            s.whisker_lo = v;
            break;
        }
    }
    for (auto it = values.rbegin(); it != values.rend(); ++it) {
        if (*it <= hi_fence) {
            s.whisker_hi = *it;
            break;
        }
    }
    for (double v : values)
        if (v < lo_fence || v > hi_fence) s.outliers.push_back(v);
    return s;
}

RejectionTable rejection_rates(
    const std::vector<effects::TreatmentEstimate>& estimates,
    const std::vector<segment::VariabilityScore>& scores, int k_setting,
    std::span<const double> significances, std::size_t n_bins) {
    const std::vector<std::vector<std::size_t>> bins =
        segment::percentile_bins(scores, n_bins, k_setting);
    std::map<std::string, std::size_t> user_bin;
    for (std::size_t b = 0; b < bins.size(); ++b)
        for (std::size_t idx : bins[b]) user_bin.emplace(scores[idx].user_id, b);

    // cells[method][bin] -> p-values of that bin's estimates
    std::map<std::string, std::map<std::size_t, std::vector<double>>> grouped;
    std::set<std::string> excluded;
    for (const auto& est : estimates) {
        const auto it = user_bin.find(est.user_id);
        if (it == user_bin.end()) {
            excluded.insert(est.user_id);
            continue;
        }
        grouped[est.method][it->second].push_back(est.wilcoxon.p_value);
    }

    RejectionTable table;
    table.excluded_users.assign(excluded.begin(), excluded.end());
    for (const auto& [method, per_bin] : grouped) {
        for (std::size_t b = 0; b < n_bins; ++b) {
            const auto bit = per_bin.find(b);
            for (double sig : significances) {
                RejectionCell cell;
                cell.method = method;
                cell.bin = b;
                cell.significance = sig;
                if (bit != per_bin.end()) {
                    cell.n = bit->second.size();
                    for (double p : bit->second)
                        if (p < 1.0 - sig) ++cell.rejected;
                    cell.rate = static_cast<double>(cell.rejected) /
                                static_cast<double>(cell.n);
                }
                table.cells.push_back(std::move(cell));
            }
        }
    }
    return table;
}

}  // namespace loadshift::report
