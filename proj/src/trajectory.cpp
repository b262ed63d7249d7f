#include "v2r/trajectory.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <set>

#include "v2r/error.hpp"

namespace v2r {

std::string_view to_string(Space space) noexcept {
    switch (space) {
        case Space::Image2d: return "image2d";
        case Space::Sim3d: return "sim3d";
        case Space::Sagittal2d: return "sagittal2d";
    }
    return "unknown";
}

Space space_from_string(std::string_view name) {
    if (name == "image2d") return Space::Image2d;
    if (name == "sim3d") return Space::Sim3d;
    if (name == "sagittal2d") return Space::Sagittal2d;
    throw Error(ErrorCode::MalformedRecord, "unknown space '" + std::string(name) + "'");
}

const Trajectory* TrajectorySet::find(std::string_view joint) const noexcept {
    for (const auto& traj : joints) {
        if (traj.joint_name == joint) return &traj;
    }
    return nullptr;
}

const Trajectory& TrajectorySet::at(std::string_view joint) const {
    if (const auto* traj = find(joint)) return *traj;
    throw Error(ErrorCode::InvalidArgument, "no joint named '" + std::string(joint) + "'");
}

void validate(const TrajectorySet& set) {
    if (set.joints.empty()) {
        throw Error(ErrorCode::MalformedRecord, "trajectory set has an empty joint list");
    }
    std::size_t expected = 0;
    for (const auto& traj : set.joints) expected = std::max(expected, traj.points.size());

    std::set<std::string> names;
    const double period = set.joints.front().sample_period;
    for (const auto& traj : set.joints) {
        if (traj.joint_name.empty()) {
            throw Error(ErrorCode::MalformedRecord, "joint with empty name");
        }
        if (!names.insert(traj.joint_name).second) {
            throw Error(ErrorCode::MalformedRecord, "duplicate joint '" + traj.joint_name + "'");
        }
        if (traj.points.empty()) {
            throw Error(ErrorCode::MalformedRecord, "joint '" + traj.joint_name + "' has no points");
        }
        if (traj.points.size() != expected) {
            throw Error(ErrorCode::RaggedLength,
                        "joint '" + traj.joint_name + "' has " + std::to_string(traj.points.size()) +
                            " points, expected " + std::to_string(expected));
        }
        if (!(traj.sample_period > 0.0) || !std::isfinite(traj.sample_period)) {
            throw Error(ErrorCode::InvalidArgument,
                        "joint '" + traj.joint_name + "' has non-positive sample period");
        }
        if (traj.sample_period != period) {
            throw Error(ErrorCode::InvalidArgument,
                        "joint '" + traj.joint_name + "' sample period differs from the set");
        }
        const bool want_z = set.space == Space::Sim3d;
        for (const auto& p : traj.points) {
            if (p.z.has_value() != want_z) {
                throw Error(ErrorCode::MalformedRecord,
                            "joint '" + traj.joint_name + "': z must be present iff space is sim3d");
            }
        }
    }
    const bool want_frame = set.space == Space::Image2d && !set.normalized;
    if (set.frame_size.has_value() != want_frame) {
        throw Error(want_frame ? ErrorCode::MissingFrameSize : ErrorCode::MalformedRecord,
                    want_frame ? "pixel-space image2d set requires a frame size"
                               : "frame size is only valid on un-normalized image2d sets");
    }
}

TrajectorySet subsample(const TrajectorySet& set, std::size_t stride) {
    if (stride == 0) throw Error(ErrorCode::InvalidArgument, "stride must be >= 1");
    if (stride >= set.length()) {
        throw Error(ErrorCode::InvalidArgument, "stride " + std::to_string(stride) +
                                                    " leaves fewer than 2 of " +
                                                    std::to_string(set.length()) + " points");
    }
    TrajectorySet out = set;
    for (auto& traj : out.joints) {
        std::vector<Keypoint> kept;
        kept.reserve(traj.points.size() / stride + 1);
        for (std::size_t i = 0; i < traj.points.size(); i += stride) kept.push_back(traj.points[i]);
        traj.points = std::move(kept);
        traj.sample_period *= static_cast<double>(stride);
    }
    return out;
}

TrajectorySet normalize_frame(const TrajectorySet& set) {
    if (set.space != Space::Image2d) {
        throw Error(ErrorCode::InvalidArgument, "frame normalization requires an image2d set");
    }
    if (!set.frame_size) throw Error(ErrorCode::MissingFrameSize, "set has no frame size");
    const auto [width, height] = *set.frame_size;
    if (!(width > 0.0) || !(height > 0.0)) {
        throw Error(ErrorCode::ZeroDimension, "frame width and height must be positive");
    }
    TrajectorySet out = set;
    for (auto& traj : out.joints) {
        for (auto& p : traj.points) {
            p.x = p.x / width;
            p.y = 1.0 - p.y / height;
        }
    }
    out.frame_size.reset();
    out.normalized = true;
    return out;
}

TrajectorySet normalize_bbox(const TrajectorySet& set) {
    if (set.space != Space::Image2d && set.space != Space::Sagittal2d) {
        throw Error(ErrorCode::InvalidArgument,
                    "bbox normalization requires an image2d or sagittal2d set");
    }
    // Frame-normalized image sets already have y growing upward.
    const bool flip = set.space == Space::Image2d && !set.normalized;
    TrajectorySet out = set;
    const std::size_t frames = set.length();
    for (std::size_t l = 0; l < frames; ++l) {
        double min_x = set.joints.front().points[l].x, max_x = min_x;
        double min_y = set.joints.front().points[l].y, max_y = min_y;
        for (const auto& traj : set.joints) {
            const auto& p = traj.points[l];
            min_x = std::min(min_x, p.x);
            max_x = std::max(max_x, p.x);
            min_y = std::min(min_y, p.y);
            max_y = std::max(max_y, p.y);
        }
        const double w = max_x - min_x;
        const double h = max_y - min_y;
        for (auto& traj : out.joints) {
            auto& p = traj.points[l];
            p.x = w > 0.0 ? (p.x - min_x) / w : 0.5;
            const double ry = h > 0.0 ? (p.y - min_y) / h : 0.5;
            p.y = flip ? 1.0 - ry : ry;
        }
    }
    out.frame_size.reset();
    out.normalized = true;
    return out;
}

TrajectorySet project_sagittal(const TrajectorySet& set, std::string_view root_joint,
                               double min_displacement) {
    if (set.space != Space::Sim3d) {
        throw Error(ErrorCode::InvalidArgument, "sagittal projection requires a sim3d set");
    }
    const auto* root = set.find(root_joint);
    if (root == nullptr) {
        throw Error(ErrorCode::InvalidArgument,
                    "root joint '" + std::string(root_joint) + "' not in set");
    }
    const auto& first = root->points.front();
    const auto& last = root->points.back();
    const double dx = last.x - first.x;
    const double dy = last.y - first.y;
    const double norm = std::hypot(dx, dy);
    if (!(norm >= min_displacement)) {
        throw Error(ErrorCode::UndefinedDirection,
                    "root horizontal displacement is below epsilon; motion direction undefined");
    }
    const double ux = dx / norm;
    const double uy = dy / norm;

    TrajectorySet out = set;
    out.space = Space::Sagittal2d;
    out.normalized = false;
    for (auto& traj : out.joints) {
        for (auto& p : traj.points) {
            const double u = p.x * ux + p.y * uy;
            const double v = p.z.value_or(0.0);
            p = Keypoint{u, v, std::nullopt};
        }
    }
    return out;
}

TrajectorySet select_joints(const TrajectorySet& set, const std::vector<std::string>& names) {
    TrajectorySet out = set;
    out.joints.clear();
    for (const auto& name : names) out.joints.push_back(set.at(name));
    return out;
}

std::string format_fixed(double value, int precision) {
    precision = std::clamp(precision, 0, 15);
    const double scale = std::pow(10.0, precision);
    const double scaled = std::round(value * scale);  // std::round is half-away-from-zero
    if (!std::isfinite(scaled) || std::fabs(scaled) >= 9.0e18) {
        char buf[64];
        std::snprintf(buf, sizeof buf, "%.*f", precision, value);
        return buf;
    }
    const auto n = static_cast<std::int64_t>(scaled);
    const auto magnitude = static_cast<std::uint64_t>(n < 0 ? -n : n);
    std::uint64_t unit = 1;
    for (int i = 0; i < precision; ++i) unit *= 10;

    std::string out;
    if (n < 0) out.push_back('-');
    out += std::to_string(magnitude / unit);
    if (precision > 0) {
        std::string frac = std::to_string(magnitude % unit);
        out.push_back('.');
        out.append(static_cast<std::size_t>(precision) - frac.size(), '0');
        out += frac;
    }
    return out;
}

std::string serialize_for_prompt(const TrajectorySet& set, int precision) {
    const bool ok_space = (set.space == Space::Image2d && set.normalized) ||
                          set.space == Space::Sagittal2d;
    if (!ok_space) {
        throw Error(ErrorCode::InvalidArgument,
                    "prompt serialization needs a normalized image2d or a sagittal2d set");
    }
    std::string out;
    for (const auto& traj : set.joints) {
        out += traj.joint_name;
        out += ": [";
        bool first = true;
        for (const auto& p : traj.points) {
            if (!first) out += ", ";
            first = false;
            out += '(';
            out += format_fixed(p.x, precision);
            out += ',';
            out += format_fixed(p.y, precision);
            out += ')';
        }
        out += "]\n";
    }
    return out;
}

}  // namespace v2r
