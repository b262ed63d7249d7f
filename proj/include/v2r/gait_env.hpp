#pragma once

// A kinematic legged-gait environment. A gait parameter vector is rolled out
// into per-step state variables (exposed to reward programs) and 3D keypoint
// trajectories (consumed by the similarity feedback).
//
// Skeleton: a root body carrying two hips; each hip drives a knee and a foot.
// Every driven joint (root, knees, feet) oscillates vertically at the common
// gait frequency. Knee and foot drops are relative to the parent joint and
// the forward/backward offset is solved from the fixed link length, so all
// skeleton segments keep their length exactly.
//
// The body moves along the commanded velocity: (target_x + base_speed,
// target_y) on velocity_tracking, (base_speed, 0) on run_fast. An unbalanced
// duty factor modulates speed within the cycle by 2 * (duty - 0.5) *
// sin(2 * omega * t).

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "v2r/reward_dsl.hpp"
#include "v2r/trajectory.hpp"

namespace v2r::env {

enum class Task { VelocityTracking, RunFast };

std::string_view to_string(Task task) noexcept;
Task task_from_string(std::string_view name);

struct Variable {
    std::string name;
    std::string description;
    std::string unit;
};

struct EnvSchema {
    Task task = Task::VelocityTracking;
    std::vector<Variable> variables;
    std::vector<std::string> joint_names;

    [[nodiscard]] std::vector<std::string> names() const;
    [[nodiscard]] std::size_t index_of(std::string_view name) const;
    /// Catalog text used as the environment description in prompts.
    [[nodiscard]] std::string describe() const;
};

EnvSchema schema(Task task);

dsl::RewardProgram check(const dsl::ParsedProgram& program, const EnvSchema& schema);

// Driven joints, in parameter order.
inline constexpr std::array<std::string_view, 5> kDrivenJoints{"root", "knee_l", "foot_l",
                                                               "knee_r", "foot_r"};
inline constexpr std::array<std::string_view, 7> kJointNames{
    "root", "hip_l", "knee_l", "foot_l", "hip_r", "knee_r", "foot_r"};

struct Oscillation {
    double amplitude = 0.0;  // m
    double phase = 0.0;      // rad
    double offset = 0.0;     // m: body height for the root, drop below parent otherwise
};

struct GaitParams {
    std::array<Oscillation, kDrivenJoints.size()> joints{};
    double frequency = 1.0;   // Hz
    double base_speed = 0.0;  // m/s; forward speed, added to the target when one is commanded
    double duty = 0.5;        // stance share of the cycle; != 0.5 makes the body surge

    static constexpr std::size_t kDims = 3 * kDrivenJoints.size() + 3;

    [[nodiscard]] std::array<double, kDims> to_vector() const;
    static GaitParams from_vector(std::span<const double> v);
    /// Center of the parameter box.
    static GaitParams center();
};

struct ParamBox {
    std::array<double, GaitParams::kDims> lo{};
    std::array<double, GaitParams::kDims> hi{};
    std::array<std::string, GaitParams::kDims> names{};
};

const ParamBox& param_box();

/// Throws Error(InvalidArgument) when any parameter is outside the box.
void validate(const GaitParams& params);

struct EnvConfig {
    std::size_t steps = 300;
    double dt = 0.01;
    double noise_sigma = 0.01;  // relative speed perturbation per step
    double target_vx_min = 0.5;
    double target_vx_max = 1.5;
    double target_vy_min = -0.3;
    double target_vy_max = 0.3;
};

// Fixed skeleton geometry (m).
inline constexpr double kHipHalfWidth = 0.1;
inline constexpr double kHipDrop = 0.1;
inline constexpr double kThighLength = 0.4;
inline constexpr double kShinLength = 0.4;

/// Pairs of joints joined by a rigid segment.
std::vector<std::pair<std::string, std::string>> rigid_segments();

struct Rollout {
    Task task = Task::VelocityTracking;
    std::vector<std::vector<double>> states;  // per step, aligned with schema(task).variables
    TrajectorySet keypoints;                  // sim3d
    double episode_reward = 0.0;
    double sparse_reward = 0.0;
};

/// Deterministic in (params, task, config, seed). When `program` is given its
/// per-step value is summed into episode_reward; evaluation errors propagate
/// with the step index attached.
Rollout rollout(const GaitParams& params, Task task, const EnvConfig& config, std::uint64_t seed,
                const dsl::RewardProgram* program = nullptr);

/// Same episode as `rollout`, returning only the summed reward.
double episode_return(const GaitParams& params, Task task, const EnvConfig& config,
                      std::uint64_t seed, const dsl::RewardProgram& program);

/// velocity_tracking: -mean|vx - tx| - mean|vy - ty| (no yaw term: the model
/// is planar). run_fast: mean forward velocity along +x.
double sparse_reward(const Rollout& rollout, Task task);

/// Mean sparse reward over episodes seeded derive_seed(seed, {episode}).
double h_mts(const GaitParams& params, Task task, std::size_t n_episodes, std::uint64_t seed,
             const EnvConfig& config = {});

}  // namespace v2r::env
