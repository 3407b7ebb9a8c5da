#include "loadshift/segment.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <stdexcept>

#include "loadshift/util.hpp"

namespace loadshift::segment {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double sq_dist(const Shape& a, const Shape& b) {
    double s = 0.0;
    for (std::size_t h = 0; h < 24; ++h) {
        const double d = a[h] - b[h];
        s += d * d;
    }
    return s;
}

// Collects complete midnight-to-midnight weekday profiles in day order.
// pair.first is the day index, pair.second the 24 raw values.
std::vector<std::pair<timeutil::DayIndex, Shape>> complete_weekdays(
    const HourlySeries& cons) {
    std::vector<std::pair<timeutil::DayIndex, Shape>> out;
    if (cons.empty()) return out;
    const timeutil::DayIndex first = timeutil::day_of_hour(cons.hour(0));
    const timeutil::DayIndex last = timeutil::day_of_hour(cons.hour(cons.size() - 1));
    for (timeutil::DayIndex d = first; d <= last; ++d) {
        if (timeutil::weekday_from_days(d) >= 5) continue;
        const auto idx = cons.index_of(d * 24);
        if (!idx) continue;
        // Hours are strictly increasing, so matching endpoints pins all 24.
        if (*idx + 23 >= cons.size() || cons.hour(*idx + 23) != d * 24 + 23) continue;
        Shape s{};
        for (std::size_t h = 0; h < 24; ++h) s[h] = cons.value(*idx + h);
        out.emplace_back(d, s);
    }
    return out;
}

}  // namespace

std::vector<Shape> per_day_shapes(const HourlySeries& cons) {
    std::vector<Shape> out;
    for (auto& [day, raw] : complete_weekdays(cons)) {
        const double total = std::accumulate(raw.begin(), raw.end(), 0.0);
        if (total <= 0.0) continue;
        Shape s{};
        for (std::size_t h = 0; h < 24; ++h) s[h] = raw[h] / total;
        out.push_back(s);
    }
    return out;
}

std::vector<Shape> per_day_profiles_raw(const HourlySeries& cons) {
    std::vector<Shape> out;
    for (auto& [day, raw] : complete_weekdays(cons)) out.push_back(raw);
    return out;
}

std::vector<LoadShape> daily_shapes(const HourlySeries& cons) {
    std::vector<LoadShape> out;
    std::vector<std::pair<timeutil::DayIndex, Shape>> days;
    for (auto& [day, raw] : complete_weekdays(cons)) {
        const double total = std::accumulate(raw.begin(), raw.end(), 0.0);
        if (total <= 0.0) continue;
        Shape s{};
        for (std::size_t h = 0; h < 24; ++h) s[h] = raw[h] / total;
        days.emplace_back(day, s);
    }
    for (std::size_t g = 0; g + 5 <= days.size(); g += 5) {
        LoadShape shape;
        shape.first_day = days[g].first;
        shape.last_day = days[g + 4].first;
        for (std::size_t d = g; d < g + 5; ++d)
            for (std::size_t h = 0; h < 24; ++h) shape.values[h] += days[d].second[h];
        double total = std::accumulate(shape.values.begin(), shape.values.end(), 0.0);
        for (double& v : shape.values) v /= total;
        out.push_back(std::move(shape));
    }
    return out;
}

namespace {

std::vector<Shape> kmeanspp_init(const std::vector<Shape>& pts, int k,
                                 std::mt19937_64& rng) {
    std::vector<Shape> centroids;
    centroids.reserve(static_cast<std::size_t>(k));
    const std::size_t n = pts.size();
    std::vector<double> weight(n, kInf);

    const std::size_t first = static_cast<std::size_t>(util::uniform01(rng) *
                                                       static_cast<double>(n));
    centroids.push_back(pts[std::min(first, n - 1)]);
    while (centroids.size() < static_cast<std::size_t>(k)) {
        double total = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            weight[i] = std::min(weight[i], sq_dist(pts[i], centroids.back()));
            total += weight[i];
        }
        std::size_t pick = n;
        if (total > 0.0) {
            const double r = util::uniform01(rng) * total;
            double acc = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                acc += weight[i];
                if (acc > r) {
                    pick = i;
                    break;
                }
            }
            if (pick == n) pick = n - 1;  // r landed on accumulated rounding
        } else {
            // Every point coincides with a centroid; any choice is equivalent.
            pick = centroids.size() % n;
        }
        centroids.push_back(pts[pick]);
    }
    return centroids;
}

struct LloydRun {
    std::vector<Shape> centroids;
    std::vector<int> assignments;
    double se = kInf;
    int n_iter = 0;
    std::vector<double> se_history;
};

LloydRun lloyd(const std::vector<Shape>& pts, int k, int max_iter,
               std::mt19937_64& rng) {
    LloydRun run;
    run.centroids = kmeanspp_init(pts, k, rng);
    const std::size_t n = pts.size();
    run.assignments.assign(n, -1);
    std::vector<int> prev(n, -1);

    for (int iter = 1; iter <= max_iter; ++iter) {
        double se = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            int best = 0;
            double best_d = sq_dist(pts[i], run.centroids[0]);
            for (int c = 1; c < k; ++c) {
                const double d = sq_dist(pts[i], run.centroids[static_cast<std::size_t>(c)]);
                if (d < best_d) {
                    best_d = d;
                    best = c;
                }
            }
            run.assignments[i] = best;
            se += best_d;
        }
        run.se_history.push_back(se);
        run.se = se;
        run.n_iter = iter;
        if (run.assignments == prev) break;
        prev = run.assignments;

        std::vector<Shape> sums(static_cast<std::size_t>(k), Shape{});
        std::vector<std::size_t> counts(static_cast<std::size_t>(k), 0);
        for (std::size_t i = 0; i < n; ++i) {
            const auto c = static_cast<std::size_t>(run.assignments[i]);
            ++counts[c];
            for (std::size_t h = 0; h < 24; ++h) sums[c][h] += pts[i][h];
        }
        std::vector<bool> stolen(n, false);
        for (int c = 0; c < k; ++c) {
            const auto cu = static_cast<std::size_t>(c);
            if (counts[cu] > 0) {
                for (std::size_t h = 0; h < 24; ++h)
                    run.centroids[cu][h] = sums[cu][h] / static_cast<double>(counts[cu]);
                continue;
            }
            // Empty cluster: reseed at the point farthest from its own
            // centroid, skipping points already claimed this pass.
            std::size_t worst = n;
            double worst_d = -1.0;
            for (std::size_t i = 0; i < n; ++i) {
                if (stolen[i]) continue;
                const double d =
                    sq_dist(pts[i], run.centroids[static_cast<std::size_t>(
                                        run.assignments[i])]);
                if (d > worst_d) {
                    worst_d = d;
                    worst = i;
                }
            }
            if (worst == n) continue;  // fewer points than clusters, leave as is
            stolen[worst] = true;
            run.centroids[cu] = pts[worst];
        }
    }
    return run;
}

}  // namespace

ClusterModel kmeans(const std::vector<LoadShape>& shapes, const KmeansConfig& cfg) {
    if (cfg.k < 1) throw std::invalid_argument("kmeans: k must be >= 1");
    if (shapes.size() < static_cast<std::size_t>(cfg.k))
        throw std::invalid_argument("kmeans: " + std::to_string(shapes.size()) +
                                    " shapes for k=" + std::to_string(cfg.k));
    if (cfg.restarts < 1 || cfg.max_iter < 1)
        throw std::invalid_argument("kmeans: restarts and max_iter must be >= 1");

    std::vector<Shape> pts(shapes.size());
    for (std::size_t i = 0; i < shapes.size(); ++i) pts[i] = shapes[i].values;

    LloydRun best;
    for (int r = 0; r < cfg.restarts; ++r) {
        std::mt19937_64 rng(util::mix_seed(cfg.seed, static_cast<std::uint64_t>(r)));
        LloydRun run = lloyd(pts, cfg.k, cfg.max_iter, rng);
        if (run.se < best.se) best = std::move(run);
    }

    // Both checks run on every invocation: Lloyd's error never increases,
    // and the stored SE must reproduce from the final assignments.
    for (std::size_t i = 1; i < best.se_history.size(); ++i)
        if (best.se_history[i] > best.se_history[i - 1] +
                                     1e-9 * std::max(1.0, best.se_history[i - 1]))
            throw std::logic_error("kmeans: squared error increased between iterations");
    double recomputed = 0.0;
    for (std::size_t i = 0; i < pts.size(); ++i)
        recomputed += sq_dist(pts[i], best.centroids[static_cast<std::size_t>(
                                          best.assignments[i])]);
    if (std::abs(recomputed - best.se) > 1e-9 * std::max(1.0, std::abs(best.se)))
        throw std::logic_error("kmeans: stored SE does not match recomputation");

    ClusterModel model;
    model.k = cfg.k;
    model.centroids = std::move(best.centroids);
    model.assignments = std::move(best.assignments);
    model.se = recomputed;
    model.seed = cfg.seed;
    model.n_iter = best.n_iter;
    model.se_history = std::move(best.se_history);
    return model;
}

double entropy(std::span<const int> assignments, int k) {
    if (assignments.empty()) throw std::invalid_argument("entropy: no assignments");
    if (k < 1) throw std::invalid_argument("entropy: k must be >= 1");
    std::vector<std::size_t> counts(static_cast<std::size_t>(k), 0);
    for (int a : assignments) {
        if (a < 0 || a >= k) throw std::invalid_argument("entropy: assignment out of range");
        ++counts[static_cast<std::size_t>(a)];
    }
    const double total = static_cast<double>(assignments.size());
    double h = 0.0;
    for (std::size_t c : counts) {
        if (c == 0) continue;
        const double p = static_cast<double>(c) / total;
        h -= p * std::log(p);
    }
    return std::max(0.0, h);
}

double hourly_std(const HourlySeries& cons, bool raw_kwh) {
    const std::vector<Shape> days =
        raw_kwh ? per_day_profiles_raw(cons) : per_day_shapes(cons);
    if (days.size() < 2)
        throw std::invalid_argument("hourly_std: need at least 2 complete weekdays, have " +
                                    std::to_string(days.size()));
    double total = 0.0;
    std::vector<double> column(days.size());
    for (std::size_t h = 0; h < 24; ++h) {
        for (std::size_t d = 0; d < days.size(); ++d) column[d] = days[d][h];
        total += util::stddev_population(column);
    }
    return total;
}

std::vector<std::vector<std::size_t>> percentile_bins(
    const std::vector<VariabilityScore>& scores, std::size_t n_bins, int k) {
    if (n_bins < 1) throw std::invalid_argument("percentile_bins: need at least 1 bin");
    if (scores.size() < n_bins)
        throw std::invalid_argument("percentile_bins: " + std::to_string(scores.size()) +
                                    " users for " + std::to_string(n_bins) + " bins");
    for (const auto& s : scores) {
        if (!s.entropy_by_k.count(k))
            throw std::out_of_range("percentile_bins: no entropy at k=" +
                                    std::to_string(k) + " for " + s.user_id);
    }
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        const double ea = scores[a].entropy_by_k.at(k);
        const double eb = scores[b].entropy_by_k.at(k);
        if (ea != eb) return ea < eb;
        return scores[a].user_id < scores[b].user_id;
    });
    std::vector<std::vector<std::size_t>> bins(n_bins);
    const std::size_t base = scores.size() / n_bins;
    const std::size_t extra = scores.size() % n_bins;
    std::size_t pos = 0;
    for (std::size_t b = 0; b < n_bins; ++b) {
        const std::size_t len = base + (b < extra ? 1 : 0);
        for (std::size_t i = 0; i < len; ++i) bins[b].push_back(order[pos++]);
    }
    return bins;
}

}  // namespace loadshift::segment
