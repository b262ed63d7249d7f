#pragma once

// Video-assisted behavioral similarity: period detection, two-period
// segmentation, exact and multiresolution DTW, per-joint scoring.

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "v2r/trajectory.hpp"

namespace v2r {

struct Point2 {
    double x = 0.0;
    double y = 0.0;

    friend bool operator==(const Point2&, const Point2&) = default;
};

struct WarpPath {
    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    double cost = 0.0;  // sum of Euclidean distances over aligned pairs
};

enum class CostMode {
    Sum,       // raw summed path cost
    PathMean,  // summed cost divided by the number of aligned pairs
};

std::string_view to_string(CostMode mode) noexcept;
CostMode cost_mode_from_string(std::string_view name);

struct SimilarityOptions {
    std::size_t radius = 2;
    double autocorr_threshold = 0.2;
    CostMode cost_mode = CostMode::Sum;
    // Vertical variance below this falls back to the horizontal signal.
    double flat_variance = 1e-12;
};

/// Smallest lag in 1..len/2 that is a strict local maximum of the
/// normalized autocorrelation with r >= threshold.
std::size_t autocorr_period(std::span<const double> signal, double threshold = 0.2);

/// Consecutive non-overlapping windows of exactly 2*period points; a shorter
/// tail is dropped.
std::vector<Trajectory> segment_two_periods(const Trajectory& traj, std::size_t period);

/// Full-matrix DTW, Euclidean point distance. Backtracking prefers the
/// diagonal predecessor on ties.
WarpPath dtw_exact(std::span<const Point2> a, std::span<const Point2> b);

/// FastDTW: coarsen by pair averaging, solve, project and refine inside a
/// window grown by `radius` cells at each finer level.
WarpPath fastdtw(std::span<const Point2> a, std::span<const Point2> b, std::size_t radius = 2);

/// True when the path starts at (0,0), ends at (|a|-1,|b|-1) and advances
/// each index by at most one per step.
bool is_valid_warp_path(const WarpPath& path, std::size_t len_a, std::size_t len_b);

std::vector<Point2> to_points(const Trajectory& traj);

/// Mean FastDTW cost between the robot's two-period segments and the
/// reference trimmed to its first two periods. Errors are re-raised with
/// the joint name attached.
double joint_similarity(const Trajectory& robot, const Trajectory& reference,
                        const SimilarityOptions& options = {});

struct FeedbackScores {
    std::map<std::string, double> per_joint;  // lower = more similar
    std::size_t rollout_count = 0;

    [[nodiscard]] double mean() const;
};

FeedbackScores aggregate_feedback(const std::vector<std::map<std::string, double>>& per_rollout);

}  // namespace v2r
