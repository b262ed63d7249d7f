#pragma once

// Keypoint trajectories: ingestion, normalization, subsampling, sagittal
// projection and prompt serialization.

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace v2r {

enum class Space {
    Image2d,     // pixel coordinates (y grows downward) or normalized [0,1] (y up)
    Sim3d,       // simulator world coordinates in meters, z up
    Sagittal2d,  // (forward distance, height) after projecting along travel
};

std::string_view to_string(Space space) noexcept;
Space space_from_string(std::string_view name);

struct Keypoint {
    double x = 0.0;
    double y = 0.0;
    std::optional<double> z;

    friend bool operator==(const Keypoint&, const Keypoint&) = default;
};

struct Trajectory {
    std::string joint_name;
    std::vector<Keypoint> points;
    double sample_period = 0.0;  // seconds per point

    [[nodiscard]] std::size_t size() const noexcept { return points.size(); }

    friend bool operator==(const Trajectory&, const Trajectory&) = default;
};

struct FrameSize {
    double width = 0.0;
    double height = 0.0;

    friend bool operator==(const FrameSize&, const FrameSize&) = default;
};

struct TrajectorySet {
    std::vector<Trajectory> joints;
    Space space = Space::Image2d;
    std::string source;
    std::optional<FrameSize> frame_size;
    // Image-space sets carry a frame size until normalized to [0,1]; sagittal
    // sets become normalized after bbox normalization.
    bool normalized = false;

    [[nodiscard]] std::size_t joint_count() const noexcept { return joints.size(); }
    [[nodiscard]] std::size_t length() const noexcept {
        return joints.empty() ? 0 : joints.front().size();
    }
    [[nodiscard]] double sample_period() const noexcept {
        return joints.empty() ? 0.0 : joints.front().sample_period;
    }
    [[nodiscard]] const Trajectory* find(std::string_view joint) const noexcept;
    [[nodiscard]] const Trajectory& at(std::string_view joint) const;

    friend bool operator==(const TrajectorySet&, const TrajectorySet&) = default;
};

/// Throws Error(MalformedRecord / RaggedLength / InvalidArgument) when a set
/// violates its structural invariants.
void validate(const TrajectorySet& set);

/// Reads the line-delimited trajectory format: a header object with `space`,
/// `fps` and optionally `frame_w`/`frame_h`, then one object per point with
/// `joint`, `t`, `x`, `y` and optional `z`.
TrajectorySet load_trajectories(const std::filesystem::path& path);
/// `source` is the fallback provenance when the header carries none.
TrajectorySet parse_trajectories(std::string_view text, std::string source = {});

void write_trajectories(const TrajectorySet& set, const std::filesystem::path& path);
std::string format_trajectories(const TrajectorySet& set);

/// Keeps points 0, stride, 2*stride, ... and scales the sample period.
TrajectorySet subsample(const TrajectorySet& set, std::size_t stride);

/// x' = x / width, y' = 1 - y / height. Clears the frame size.
TrajectorySet normalize_frame(const TrajectorySet& set);

/// Per-frame bounding-box normalization. Raw pixel sets are flipped
/// vertically; frame-normalized and sagittal sets already have height growing
/// upward and are not.
TrajectorySet normalize_bbox(const TrajectorySet& set);

/// Projects sim3d points onto the vertical plane containing the root joint's
/// net horizontal displacement: u = (x, y) . d, v = z.
TrajectorySet project_sagittal(const TrajectorySet& set, std::string_view root_joint = "root",
                               double min_displacement = 1e-9);

/// Keeps only the named joints, in the order given.
TrajectorySet select_joints(const TrajectorySet& set, const std::vector<std::string>& names);

/// One line per joint: `name: [(x1,y1), (x2,y2), ...]`, rounded half away
/// from zero to `precision` decimals.
std::string serialize_for_prompt(const TrajectorySet& set, int precision = 2);

/// Decimal rendering used by the prompt serializer; exposed for reuse in
/// feedback formatting.
std::string format_fixed(double value, int precision);

}  // namespace v2r
