#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "loadshift/series.hpp"
#include "loadshift/timeutil.hpp"

namespace loadshift::segment {

using Shape = std::array<double, 24>;

struct LoadShape {
    Shape values{};  // non-negative, sums to 1
    std::string source_user;
    timeutil::DayIndex first_day = 0;
    timeutil::DayIndex last_day = 0;
};

// Complete midnight-to-midnight weekdays, each normalized by its daily
// total; zero-total days are skipped.
std::vector<Shape> per_day_shapes(const HourlySeries& cons);

// Same day selection without normalization (raw kWh profiles).
std::vector<Shape> per_day_profiles_raw(const HourlySeries& cons);

// Tiles the per-day shapes into consecutive non-overlapping groups of five,
// averages each group elementwise, and renormalizes. A trailing partial
// group is dropped; fewer than five usable weekdays yields no shapes.
std::vector<LoadShape> daily_shapes(const HourlySeries& cons);

struct KmeansConfig {
    int k = 12;
    std::uint64_t seed = 0;
    int restarts = 10;
    int max_iter = 300;
};

struct ClusterModel {
    int k = 0;
    std::vector<Shape> centroids;
    std::vector<int> assignments;  // shape index -> centroid index
    double se = 0.0;               // total squared error, recomputed at the end
    std::uint64_t seed = 0;
    int n_iter = 0;                // assignment passes of the winning restart
    std::vector<double> se_history;  // post-assignment SE per iteration
};

// Lloyd's algorithm from k-means++ seeding; best SE over the configured
// restarts wins (ties keep the earlier restart). An empty cluster is reseeded
// to the point currently farthest from its own centroid.
ClusterModel kmeans(const std::vector<LoadShape>& shapes, const KmeansConfig& cfg);

// Shannon entropy of the user's cluster membership distribution, natural log.
double entropy(std::span<const int> assignments, int k);

// Sum over the 24 clock hours of the population standard deviation across
// the user's per-day shapes; raw_kwh switches to unnormalized profiles.
double hourly_std(const HourlySeries& cons, bool raw_kwh = false);

struct VariabilityScore {
    std::string user_id;
    std::map<int, double> entropy_by_k;
    double hourly_std = 0.0;
    double percentile = 0.0;  // rank on the reference k's entropy, 100 = top
};

// Equal-count bins of users ranked by entropy at the given k (ties broken by
// user_id); the first size mod n_bins bins take one extra user. Returns
// indices into the input.
std::vector<std::vector<std::size_t>> percentile_bins(
    const std::vector<VariabilityScore>& scores, std::size_t n_bins, int k);

}  // namespace loadshift::segment
