#pragma once

// Reference computations used to check the OPF independently of the conic
// formulation.

#include <cmath>
#include <complex>
#include <algorithm>
#include <cstdint>
#include <limits>
#include <numeric>
#include <vector>

namespace oracle {

struct LineFlow {
    bool ok = false;
    double l = 0.0;    // squared current
    double p01 = 0.0;  // sending-end flow
    double q01 = 0.0;
    double v1 = 0.0;   // receiving-end squared voltage
};

// Exact single-line power flow. p1, q1 is the net consumption at the
// receiving bus; the sending bus is held at squared voltage v0.
inline LineFlow single_line(double v0, double r, double x, double p1, double q1) {
    const double a = r * r + x * x;
    const double b = 2.0 * (r * p1 + x * q1) - v0;
    const double c = p1 * p1 + q1 * q1;
    const double disc = b * b - 4.0 * a * c;
    LineFlow f;
    if (disc < 0.0 || b >= 0.0) return f;
    // Smaller root, written to avoid cancellation.
    f.l = c == 0.0 ? 0.0 : 2.0 * c / (-b + std::sqrt(disc));
    f.p01 = p1 + r * f.l;
    f.q01 = q1 + x * f.l;
    f.v1 = v0 - 2.0 * (r * f.p01 + x * f.q01) + a * f.l;
    f.ok = true;
    return f;
}

struct TwoBusCase {
    double v0 = 1.0;
    double r = 0.02, x = 0.03;
    double s_max = 0.5;
    double v_min_sq = 0.81, v_max_sq = 1.21;
    double demand_p = 0.0, demand_q = 0.0;
    double wind = 0.0;
    double flex_ub = 0.0;
    double pi_flex = 1.0, pi_curtail = 150.0, loss_weight = 200.0;
    double export_max = std::numeric_limits<double>::infinity();
};

struct BruteForceResult {
    bool found = false;
    double flex = 0.0, curtail = 0.0, objective = std::numeric_limits<double>::infinity();
};

inline double objective(const TwoBusCase& k, double flex, double curtail, const LineFlow& f) {
    return k.pi_flex * flex + k.pi_curtail * curtail + k.loss_weight * std::hypot(k.r, k.x) * f.l;
}

// Exhaustive search over a (flex, curtail) grid with an exact power flow at
// every point.
inline BruteForceResult brute_force(const TwoBusCase& k, double step) {
    BruteForceResult best;
    const long nf = static_cast<long>(std::floor(k.flex_ub / step + 1e-9));
    const long nc = static_cast<long>(std::floor(k.wind / step + 1e-9));
    for (long i = 0; i <= nf; ++i) {
        const double flex = static_cast<double>(i) * step;
        for (long j = 0; j <= nc; ++j) {
            const double curtail = static_cast<double>(j) * step;
            const LineFlow f = single_line(k.v0, k.r, k.x, k.demand_p + flex - (k.wind - curtail), k.demand_q);
            if (!f.ok) continue;
            if (-f.p01 > k.export_max) continue;
            if (f.v1 > k.v_max_sq || f.v1 < k.v_min_sq) continue;
            if (f.p01 * f.p01 + f.q01 * f.q01 > k.s_max * k.s_max) continue;
            const double obj = objective(k, flex, curtail, f);
            if (obj < best.objective) best = {true, flex, curtail, obj};
        }
    }
    return best;
}

// Minimum within-cluster sum of squares over every 2-partition with both
// sides non-empty.
inline double exhaustive_two_means(const std::vector<std::vector<double>>& pts) {
    const std::size_t n = pts.size();
    const std::size_t dim = pts.front().size();
    double best = std::numeric_limits<double>::infinity();
    // Point 0 is always on side 0, which removes the label-swap duplicate.
    for (std::uint32_t mask = 1; mask < (1u << (n - 1)); ++mask) {
        double total = 0.0;
        for (int side = 0; side < 2; ++side) {
            std::vector<double> mean(dim, 0.0);
            int count = 0;
            for (std::size_t i = 0; i < n; ++i) {
                const bool in1 = i > 0 && ((mask >> (i - 1)) & 1u);
                if (static_cast<int>(in1) != side) continue;
                for (std::size_t d = 0; d < dim; ++d) mean[d] += pts[i][d];
                ++count;
            }
            for (auto& m : mean) m /= count;
            for (std::size_t i = 0; i < n; ++i) {
                const bool in1 = i > 0 && ((mask >> (i - 1)) & 1u);
                if (static_cast<int>(in1) != side) continue;
                for (std::size_t d = 0; d < dim; ++d) total += (pts[i][d] - mean[d]) * (pts[i][d] - mean[d]);
            }
        }
        best = std::min(best, total);
    }
    return best;
}

// Textbook silhouette straight from pairwise distances.
inline double silhouette_direct(const std::vector<std::vector<double>>& pts, const std::vector<int>& label) {
    const std::size_t n = pts.size();
    const int k = *std::max_element(label.begin(), label.end()) + 1;
    auto dist = [&](std::size_t a, std::size_t b) {
        double s = 0.0;
        for (std::size_t d = 0; d < pts[a].size(); ++d) s += (pts[a][d] - pts[b][d]) * (pts[a][d] - pts[b][d]);
        return std::sqrt(s);
    };
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<double> sum(static_cast<std::size_t>(k), 0.0);
        std::vector<int> cnt(static_cast<std::size_t>(k), 0);
        for (std::size_t j = 0; j < n; ++j) {
            if (j == i) continue;
            sum[static_cast<std::size_t>(label[j])] += dist(i, j);
            ++cnt[static_cast<std::size_t>(label[j])];
        }
        const auto own = static_cast<std::size_t>(label[i]);
        if (cnt[own] == 0) continue;
        const double a = sum[own] / cnt[own];
        double b = std::numeric_limits<double>::infinity();
        for (std::size_t c = 0; c < sum.size(); ++c)
            if (c != own && cnt[c] > 0) b = std::min(b, sum[c] / cnt[c]);
        const double m = std::max(a, b);
        if (m > 0.0) total += (b - a) / m;
    }
    return total / static_cast<double>(n);
}

// Hamilton's method, handing out the leftover seats one at a time to the
// largest remaining fractional part (lowest index on ties).
inline std::vector<std::int64_t> hamilton(const std::vector<double>& w, std::int64_t total) {
    const double sum = std::accumulate(w.begin(), w.end(), 0.0);
    std::vector<std::int64_t> seats(w.size(), 0);
    std::vector<double> frac(w.size(), 0.0);
    std::int64_t left = total;
    for (std::size_t i = 0; i < w.size(); ++i) {
        const double q = static_cast<double>(total) * w[i] / sum;
        seats[i] = static_cast<std::int64_t>(std::floor(q));
        frac[i] = q - std::floor(q);
        left -= seats[i];
    }
    for (; left > 0; --left) {
        std::size_t best = 0;
        for (std::size_t i = 1; i < w.size(); ++i)
            if (frac[i] > frac[best]) best = i;
        ++seats[best];
        frac[best] = -1.0;
    }
    return seats;
}

}  // namespace oracle
