#include "v2r/similarity.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "v2r/error.hpp"

namespace v2r {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double distance(const Point2& p, const Point2& q) noexcept {
    return std::hypot(p.x - q.x, p.y - q.y);
}

// Inclusive column range [lo, hi] of row i that the windowed solver visits.
struct RowRange {
    std::size_t lo = 0;
    std::size_t hi = 0;
};

std::vector<Point2> shrink_by_half(std::span<const Point2> s) {
    std::vector<Point2> out;
    out.reserve((s.size() + 1) / 2);
    std::size_t i = 0;
    for (; i + 1 < s.size(); i += 2) {
        out.push_back({(s[i].x + s[i + 1].x) * 0.5, (s[i].y + s[i + 1].y) * 0.5});
    }
    if (i < s.size()) out.push_back(s[i]);
    return out;
}

std::vector<RowRange> project_window(const WarpPath& coarse, std::size_t n, std::size_t m,
                                     std::size_t radius) {
    std::vector<RowRange> rows(n, RowRange{m, 0});
    const auto r = static_cast<long long>(radius);
    const auto ln = static_cast<long long>(n);
    const auto lm = static_cast<long long>(m);
    // Each coarse cell is grown by `radius` coarse cells, then mapped onto the
    // 2x2 block of fine cells it covers.
    for (const auto& [ci, cj] : coarse.pairs) {
        const auto i0 = static_cast<long long>(ci);
        const auto j0 = static_cast<long long>(cj);
        const long long row_lo = std::max(0LL, 2 * (i0 - r));
        const long long row_hi = std::min(ln - 1, 2 * (i0 + r) + 1);
        const long long col_lo = std::max(0LL, 2 * (j0 - r));
        const long long col_hi = std::min(lm - 1, 2 * (j0 + r) + 1);
        for (long long i = row_lo; i <= row_hi; ++i) {
            auto& row = rows[static_cast<std::size_t>(i)];
            row.lo = std::min(row.lo, static_cast<std::size_t>(col_lo));
            row.hi = std::max(row.hi, static_cast<std::size_t>(col_hi));
        }
    }
    return rows;
}

WarpPath windowed_dtw(std::span<const Point2> a, std::span<const Point2> b,
                      const std::vector<RowRange>& rows) {
    const std::size_t n = a.size();
    std::vector<std::vector<double>> acc(n);
    auto at = [&](std::size_t i, std::size_t j) -> double {
        const auto& rr = rows[i];
        if (j < rr.lo || j > rr.hi) return kInf;
        return acc[i][j - rr.lo];
    };

    for (std::size_t i = 0; i < n; ++i) {
        const auto& rr = rows[i];
        acc[i].assign(rr.hi - rr.lo + 1, kInf);
        for (std::size_t j = rr.lo; j <= rr.hi; ++j) {
            const double d = distance(a[i], b[j]);
            double best;
            if (i == 0 && j == 0) {
                best = 0.0;
            } else {
                const double diag = (i > 0 && j > 0) ? at(i - 1, j - 1) : kInf;
                const double up = i > 0 ? at(i - 1, j) : kInf;
                const double left = j > 0 ? at(i, j - 1) : kInf;
                best = std::min({diag, up, left});
            }
            acc[i][j - rr.lo] = d + best;
        }
    }

    WarpPath path;
    std::size_t i = n - 1;
    std::size_t j = b.size() - 1;
    path.cost = at(i, j);
    path.pairs.emplace_back(i, j);
    while (i > 0 || j > 0) {
        if (i == 0) {
            --j;
        } else if (j == 0) {
            --i;
        } else {
            const double diag = at(i - 1, j - 1);
            const double up = at(i - 1, j);
            const double left = at(i, j - 1);
            if (diag <= up && diag <= left) {
                --i;
                --j;
            } else if (up <= left) {
                --i;
            } else {
                --j;
            }
        }
        path.pairs.emplace_back(i, j);
    }
    std::reverse(path.pairs.begin(), path.pairs.end());
    return path;
}

double variance(std::span<const double> xs) {
    if (xs.empty()) return 0.0;
    const double mean = std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
    double acc = 0.0;
    for (double x : xs) acc += (x - mean) * (x - mean);
    return acc / static_cast<double>(xs.size());
}

std::vector<double> period_signal(const Trajectory& traj, double flat_variance) {
    std::vector<double> ys, xs;
    ys.reserve(traj.size());
    xs.reserve(traj.size());
    for (const auto& p : traj.points) {
        ys.push_back(p.y);
        xs.push_back(p.x);
    }
    return variance(ys) < flat_variance ? xs : ys;
}

}  // namespace

std::string_view to_string(CostMode mode) noexcept {
    return mode == CostMode::Sum ? "sum" : "path_mean";
}

CostMode cost_mode_from_string(std::string_view name) {
    if (name == "sum") return CostMode::Sum;
    if (name == "path_mean") return CostMode::PathMean;
    throw Error(ErrorCode::InvalidArgument, "unknown cost mode '" + std::string(name) + "'");
}

std::size_t autocorr_period(std::span<const double> signal, double threshold) {
    const std::size_t n = signal.size();
    if (n < 8) {
        throw Error(ErrorCode::TooShort, "period detection needs at least 8 samples, got " +
                                             std::to_string(n));
    }
    const double mean = std::accumulate(signal.begin(), signal.end(), 0.0) / static_cast<double>(n);
    std::vector<double> c(n);
    for (std::size_t t = 0; t < n; ++t) c[t] = signal[t] - mean;

    double energy = 0.0;
    for (double v : c) energy += v * v;
    if (!(energy > 0.0) || energy < 1e-300) {
        throw Error(ErrorCode::NoPeriod, "signal has zero variance; no period");
    }

    const std::size_t max_lag = n / 2;
    const std::size_t last = std::min(n - 1, max_lag + 1);
    std::vector<double> r(last + 1);
    r[0] = 1.0;
    for (std::size_t lag = 1; lag <= last; ++lag) {
        double acc = 0.0;
        for (std::size_t t = 0; t + lag < n; ++t) acc += c[t] * c[t + lag];
        r[lag] = acc / energy;
    }
    for (std::size_t lag = 1; lag <= max_lag; ++lag) {
        const bool left = r[lag] > r[lag - 1];
        const bool right = lag + 1 > last || r[lag] > r[lag + 1];
        if (left && right && r[lag] >= threshold) return lag;
    }
    throw Error(ErrorCode::NoPeriod, "no autocorrelation peak at or above threshold");
}

std::vector<Trajectory> segment_two_periods(const Trajectory& traj, std::size_t period) {
    if (period < 2) throw Error(ErrorCode::InvalidArgument, "period must be >= 2");
    const std::size_t window = 2 * period;
    if (traj.size() < window) {
        throw Error(ErrorCode::TooShort, "trajectory of " + std::to_string(traj.size()) +
                                             " points is shorter than one window of " +
                                             std::to_string(window));
    }
    std::vector<Trajectory> out;
    for (std::size_t start = 0; start + window <= traj.size(); start += window) {
        Trajectory seg;
        seg.joint_name = traj.joint_name;
        seg.sample_period = traj.sample_period;
        seg.points.assign(traj.points.begin() + static_cast<std::ptrdiff_t>(start),
                          traj.points.begin() + static_cast<std::ptrdiff_t>(start + window));
        out.push_back(std::move(seg));
    }
    return out;
}

WarpPath dtw_exact(std::span<const Point2> a, std::span<const Point2> b) {
    if (a.empty() || b.empty()) throw Error(ErrorCode::InvalidArgument, "DTW of an empty sequence");
    const std::size_t n = a.size();
    const std::size_t m = b.size();
    // (n+1) x (m+1) table with an infinite border row and column.
    std::vector<double> acc((n + 1) * (m + 1), kInf);
    auto cell = [&](std::size_t i, std::size_t j) -> double& { return acc[i * (m + 1) + j]; };
    cell(0, 0) = 0.0;
    for (std::size_t i = 1; i <= n; ++i) {
        for (std::size_t j = 1; j <= m; ++j) {
            const double best = std::min({cell(i - 1, j - 1), cell(i - 1, j), cell(i, j - 1)});
            cell(i, j) = distance(a[i - 1], b[j - 1]) + best;
        }
    }

    WarpPath path;
    path.cost = cell(n, m);
    std::size_t i = n;
    std::size_t j = m;
    while (true) {
        path.pairs.emplace_back(i - 1, j - 1);
        if (i == 1 && j == 1) break;
        const double diag = cell(i - 1, j - 1);
        const double up = cell(i - 1, j);
        const double left = cell(i, j - 1);
        if (diag <= up && diag <= left) {
            --i;
            --j;
        } else if (up <= left) {
            --i;
        } else {
            --j;
        }
    }
    std::reverse(path.pairs.begin(), path.pairs.end());
    return path;
}

WarpPath fastdtw(std::span<const Point2> a, std::span<const Point2> b, std::size_t radius) {
    if (a.empty() || b.empty()) throw Error(ErrorCode::InvalidArgument, "DTW of an empty sequence");
    const std::size_t base = std::max<std::size_t>(radius + 2, 10);
    if (a.size() <= base || b.size() <= base) return dtw_exact(a, b);

    const auto coarse_a = shrink_by_half(a);
    const auto coarse_b = shrink_by_half(b);
    const WarpPath coarse = fastdtw(coarse_a, coarse_b, radius);
    return windowed_dtw(a, b, project_window(coarse, a.size(), b.size(), radius));
}

bool is_valid_warp_path(const WarpPath& path, std::size_t len_a, std::size_t len_b) {
    if (path.pairs.empty() || len_a == 0 || len_b == 0) return false;
    if (path.pairs.front() != std::pair<std::size_t, std::size_t>{0, 0}) return false;
    if (path.pairs.back() != std::pair<std::size_t, std::size_t>{len_a - 1, len_b - 1}) return false;
    for (std::size_t k = 1; k < path.pairs.size(); ++k) {
        const auto [pi, pj] = path.pairs[k - 1];
        const auto [i, j] = path.pairs[k];
        const std::size_t di = i - pi;
        const std::size_t dj = j - pj;
        if (i < pi || j < pj || di > 1 || dj > 1 || (di == 0 && dj == 0)) return false;
    }
    return true;
}

std::vector<Point2> to_points(const Trajectory& traj) {
    std::vector<Point2> out;
    out.reserve(traj.size());
    for (const auto& p : traj.points) out.push_back({p.x, p.y});
    return out;
}

double joint_similarity(const Trajectory& robot, const Trajectory& reference,
                        const SimilarityOptions& options) {
    const std::string& name = reference.joint_name;
    try {
        const auto robot_signal = period_signal(robot, options.flat_variance);
        const auto robot_period = autocorr_period(robot_signal, options.autocorr_threshold);
        const auto segments = segment_two_periods(robot, robot_period);

        const auto ref_signal = period_signal(reference, options.flat_variance);
        const auto ref_period = autocorr_period(ref_signal, options.autocorr_threshold);
        const auto ref_window = segment_two_periods(reference, ref_period).front();
        const auto ref_points = to_points(ref_window);

        double total = 0.0;
        for (const auto& seg : segments) {
            const auto path = fastdtw(to_points(seg), ref_points, options.radius);
            total += options.cost_mode == CostMode::Sum
                         ? path.cost
                         : path.cost / static_cast<double>(path.pairs.size());
        }
        return total / static_cast<double>(segments.size());
    } catch (const Error& e) {
        throw Error(e.code(), "joint '" + name + "': " + e.what());
    }
}

double FeedbackScores::mean() const {
    if (per_joint.empty()) return 0.0;
    double acc = 0.0;
    for (const auto& [_, v] : per_joint) acc += v;
    return acc / static_cast<double>(per_joint.size());
}

FeedbackScores aggregate_feedback(const std::vector<std::map<std::string, double>>& per_rollout) {
    if (per_rollout.empty()) throw Error(ErrorCode::InvalidArgument, "no rollouts to aggregate");
    const auto& keys = per_rollout.front();
    for (const auto& m : per_rollout) {
        const bool same = m.size() == keys.size() &&
                          std::equal(m.begin(), m.end(), keys.begin(),
                                     [](const auto& x, const auto& y) { return x.first == y.first; });
        if (!same) throw Error(ErrorCode::KeyMismatch, "rollout score maps have different joints");
    }

    FeedbackScores out;
    out.rollout_count = per_rollout.size();
    for (const auto& [joint, _] : keys) {
        // Sorted summation keeps the mean independent of rollout order.
        std::vector<double> values;
        values.reserve(per_rollout.size());
        for (const auto& m : per_rollout) values.push_back(m.at(joint));
        std::sort(values.begin(), values.end());
        double acc = 0.0;
        for (double v : values) acc += v;
        out.per_joint[joint] = acc / static_cast<double>(values.size());
    }
    return out;
}

}  // namespace v2r
