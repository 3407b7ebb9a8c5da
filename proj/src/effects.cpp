#include "loadshift/effects.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "loadshift/util.hpp"

namespace loadshift::effects {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void require_paired(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size())
        throw std::invalid_argument("paired samples differ in length");
    if (a.empty()) throw std::invalid_argument("paired samples are empty");
}

std::vector<double> paired_diffs(std::span<const double> y_hat,
                                 std::span<const double> y_dr) {
    require_paired(y_hat, y_dr);
    std::vector<double> d(y_hat.size());
    for (std::size_t i = 0; i < d.size(); ++i) d[i] = y_hat[i] - y_dr[i];
    return d;
}

}  // namespace

double delta_hat(std::span<const double> y_dr, std::span<const double> y_hat) {
    require_paired(y_dr, y_hat);
    double sum = 0.0;
    for (std::size_t i = 0; i < y_dr.size(); ++i) sum += y_hat[i] - y_dr[i];
    return sum / static_cast<double>(y_dr.size());
}

MprResult mpr(std::span<const double> y_dr, std::span<const double> y_hat,
              double floor) {
    require_paired(y_dr, y_hat);
    MprResult res;
    double sum = 0.0;
    std::size_t used = 0;
    for (std::size_t i = 0; i < y_dr.size(); ++i) {
        const double denom = std::abs(y_hat[i]);
        if (denom < floor) {
            ++res.excluded;
            continue;
        }
        sum += (y_dr[i] - y_hat[i]) / denom;
        ++used;
    }
    res.divergence = res.excluded > 0;
    res.percent = used > 0 ? sum / static_cast<double>(used) * 100.0
                           : std::numeric_limits<double>::quiet_NaN();
    return res;
}

namespace {

// Midranks of |d| for the nonzero differences. Ranks are multiples of 0.5,
// so doubling them yields exact integers for the enumeration below.
std::vector<double> abs_midranks(const std::vector<double>& d) {
    const std::size_t n = d.size();
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return std::abs(d[a]) < std::abs(d[b]);
    });
    std::vector<double> ranks(n, 0.0);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && std::abs(d[order[j + 1]]) == std::abs(d[order[i]])) ++j;
        const double mid = (static_cast<double>(i + 1) + static_cast<double>(j + 1)) / 2.0;
        for (std::size_t t = i; t <= j; ++t) ranks[order[t]] = mid;
        i = j + 1;
    }
    return ranks;
}

// Exact tail probabilities by dynamic programming over the doubled ranks,
// equivalent to enumerating all 2^n sign patterns. Pattern counts stay below
// 2^n <= 2^30, which doubles represent exactly.
std::pair<double, double> exact_tails(const std::vector<double>& ranks,
                                      double w_plus) {
    std::int64_t total2 = 0;
    std::vector<std::int64_t> r2(ranks.size());
    for (std::size_t i = 0; i < ranks.size(); ++i) {
        r2[i] = std::llround(2.0 * ranks[i]);
        total2 += r2[i];
    }
    std::vector<double> dp(static_cast<std::size_t>(total2) + 1, 0.0);
    dp[0] = 1.0;
    std::int64_t reach = 0;
    for (std::int64_t r : r2) {
        reach += r;
        for (std::int64_t s = reach; s >= r; --s)
            dp[static_cast<std::size_t>(s)] += dp[static_cast<std::size_t>(s - r)];
    }
    const std::int64_t obs2 = std::llround(2.0 * w_plus);
    double ge = 0.0, le = 0.0;
    for (std::int64_t s = 0; s <= total2; ++s) {
        if (s >= obs2) ge += dp[static_cast<std::size_t>(s)];
        if (s <= obs2) le += dp[static_cast<std::size_t>(s)];
    }
    const double denom = std::ldexp(1.0, static_cast<int>(ranks.size()));
    return {ge / denom, le / denom};
}

}  // namespace

WilcoxonResult wilcoxon_signed_rank(std::span<const double> diffs, WilcoxonMode mode,
                                    bool two_sided) {
    std::vector<double> d;
    d.reserve(diffs.size());
    for (double v : diffs) {
        if (!std::isfinite(v)) throw std::invalid_argument("wilcoxon: non-finite difference");
        if (v != 0.0) d.push_back(v);
    }

    WilcoxonResult res;
    res.n_effective = d.size();
    if (d.empty()) {
        // All differences zero: degenerate, no evidence against H0.
        res.statistic = 0.0;
        res.w_plus = 0.0;
        res.p_value = 1.0;
        res.exact = true;
        return res;
    }
    if (d.size() < 5)
        throw std::invalid_argument("wilcoxon: need at least 5 nonzero differences, have " +
                                    std::to_string(d.size()));

    const std::vector<double> ranks = abs_midranks(d);
    double w_plus = 0.0, w_minus = 0.0;
    double sum_r2 = 0.0;
    for (std::size_t i = 0; i < d.size(); ++i) {
        if (d[i] > 0.0)
            w_plus += ranks[i];
        else
            w_minus += ranks[i];
        sum_r2 += ranks[i] * ranks[i];
    }
    res.w_plus = w_plus;
    res.statistic = w_plus - w_minus;

    bool exact = d.size() <= 25;
    if (mode == WilcoxonMode::Exact) exact = true;
    if (mode == WilcoxonMode::Normal) exact = false;
    if (exact && d.size() > 30)
        throw std::invalid_argument("wilcoxon: exact mode limited to 30 pairs");

    if (exact) {
        const auto [ge, le] = exact_tails(ranks, w_plus);
        res.p_value = two_sided ? std::min(1.0, 2.0 * std::min(ge, le)) : ge;
        res.exact = true;
    } else {
        const double n = static_cast<double>(d.size());
        const double mean = n * (n + 1.0) / 4.0;
        const double sigma = std::sqrt(sum_r2 / 4.0);
        if (two_sided) {
            const double z = std::max(0.0, std::abs(w_plus - mean) - 0.5) / sigma;
            res.p_value = std::min(1.0, 2.0 * (1.0 - util::normal_cdf(z)));
        } else {
            const double z = (w_plus - mean - 0.5) / sigma;
            res.p_value = 1.0 - util::normal_cdf(z);
        }
        res.exact = false;
    }
    return res;
}

WilcoxonResult wilcoxon_signed_rank_paired(std::span<const double> y_hat,
                                           std::span<const double> y_dr,
                                           WilcoxonMode mode, bool two_sided) {
    const std::vector<double> d = paired_diffs(y_hat, y_dr);
    return wilcoxon_signed_rank(d, mode, two_sided);
}

namespace {

struct ScanResult {
    std::size_t count = 0;   // pairwise sums (i <= j) not exceeding the probe
    double max_le = -kInf;   // largest sum <= probe
    double min_gt = kInf;    // smallest sum > probe
};

// Counts pairs i <= j with d[i] + d[j] <= t over sorted data. Sums are
// compared directly so the float semantics match a brute-force enumeration.
ScanResult scan_sums(const std::vector<double>& d, double t) {
    ScanResult r;
    const std::size_t n = d.size();
    std::size_t b = n;
    for (std::size_t j = 0; j < n; ++j) {
        while (b > 0 && d[b - 1] + d[j] > t) --b;
        const std::size_t le = std::min(b, j + 1);
        r.count += le;
        if (le > 0) r.max_le = std::max(r.max_le, d[le - 1] + d[j]);
        if (le <= j) r.min_gt = std::min(r.min_gt, d[le] + d[j]);
    }
    return r;
}

// k-th smallest (1-based) of the implicit multiset {d[i]+d[j] : i <= j}.
double select_sum(const std::vector<double>& d, std::size_t k) {
    const std::size_t n = d.size();
    double lo = d.front() + d.front();
    double hi = d.back() + d.back();
    if (scan_sums(d, lo).count >= k) return lo;
    // Invariant: count(lo) < k <= count(hi), hi always an achievable sum.
    while (true) {
        const double t = lo + (hi - lo) * 0.5;
        if (!(t > lo) || !(t < hi)) return hi;
        const ScanResult s = scan_sums(d, t);
        if (s.count >= k)
            hi = s.max_le;
        else
            lo = t;
    }
}

}  // namespace

double hodges_lehmann(std::span<const double> diffs) {
    if (diffs.empty()) throw std::invalid_argument("hodges_lehmann: empty input");
    std::vector<double> d(diffs.begin(), diffs.end());
    for (double v : d)
        if (!std::isfinite(v))
            throw std::invalid_argument("hodges_lehmann: non-finite difference");
    std::sort(d.begin(), d.end());
    const std::size_t n = d.size();
    const std::size_t m = n * (n + 1) / 2;
    if (m % 2 == 1) {
        const double s = select_sum(d, (m + 1) / 2);
        return s * 0.5;
    }
    const double s1 = select_sum(d, m / 2);
    const ScanResult at = scan_sums(d, s1);
    const double s2 = at.count >= m / 2 + 1 ? s1 : at.min_gt;
    return (s1 * 0.5 + s2 * 0.5) / 2.0;
}

double hodges_lehmann_paired(std::span<const double> y_hat,
                             std::span<const double> y_dr) {
    const std::vector<double> d = paired_diffs(y_hat, y_dr);
    return hodges_lehmann(d);
}

TreatmentEstimate estimate_from_counterfactual(std::span<const double> y_hat,
                                               std::span<const double> y_dr,
                                               double bias, double mpr_floor) {
    require_paired(y_hat, y_dr);
    TreatmentEstimate est;
    est.n_events = y_dr.size();
    est.delta_hat = delta_hat(y_dr, y_hat);
    est.mpr = mpr(y_dr, y_hat, mpr_floor);
    est.wilcoxon = wilcoxon_signed_rank_paired(y_hat, y_dr);
    est.hl_shift = hodges_lehmann_paired(y_hat, y_dr);
    est.bias = bias;
    return est;
}

TreatmentEstimate estimate_user(const prep::FeatureSet& fs,
                                const forecast::ForecastModel& model,
                                double mpr_floor) {
    if (fs.Y1.size() == 0) throw std::invalid_argument("estimate_user: no DR rows");
    const linalg::Vector y_hat = model.predict(fs.X1);
    const linalg::Vector y0_hat = model.predict(fs.X0);
    double bias = 0.0;
    for (Eigen::Index i = 0; i < fs.Y0.size(); ++i) bias += fs.Y0(i) - y0_hat(i);
    bias /= static_cast<double>(fs.Y0.size());
    return estimate_from_counterfactual(
        {y_hat.data(), static_cast<std::size_t>(y_hat.size())},
        {fs.Y1.data(), static_cast<std::size_t>(fs.Y1.size())}, bias, mpr_floor);
}

}  // namespace loadshift::effects
