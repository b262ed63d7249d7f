#pragma once

// Synthetic "video" references: a rollout of known gait parameters rendered
// to pixel keypoints as seen by a side camera that tracks the body.

#include <cstdint>
#include <string>
#include <vector>

#include "v2r/gait_env.hpp"
#include "v2r/trajectory.hpp"

namespace v2r {

struct RenderOptions {
    double fps = 25.0;               // must divide evenly into the env step rate
    FrameSize frame{640.0, 480.0};
    double pixels_per_meter = 300.0;
    double ground_row = 420.0;       // pixel row of height 0
    std::vector<std::string> joints{"root", "knee_l", "foot_l", "knee_r", "foot_r"};
};

/// image2d set in raw pixels, y growing downward.
TrajectorySet render_reference(const env::GaitParams& params, env::Task task,
                               const env::EnvConfig& config, std::uint64_t seed,
                               const RenderOptions& options = {});

/// A hand-picked alternating gait used by examples and tests.
env::GaitParams demo_gait();

}  // namespace v2r
