#include "v2r/gait_env.hpp"

#include <cmath>
#include <numbers>
#include <random>

#include "v2r/error.hpp"
#include "v2r/seed.hpp"

namespace v2r::env {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

// State layout shared by schema() and the simulator.
struct Layout {
    std::size_t root_vel_x = 0, root_vel_y = 0, root_height = 0;
    std::size_t target_vel_x = 0, target_vel_y = 0;
    std::size_t step_dt = 0;
    std::size_t joints = 0;  // first joint variable; 4 per joint (x, y, z, vz)
    bool has_target = false;
    std::size_t size = 0;
};

Layout layout(Task task) {
    Layout l;
    std::size_t i = 0;
    l.root_vel_x = i++;
    l.root_vel_y = i++;
    l.root_height = i++;
    l.has_target = task == Task::VelocityTracking;
    if (l.has_target) {
        l.target_vel_x = i++;
        l.target_vel_y = i++;
    }
    l.step_dt = i++;
    l.joints = i;
    l.size = i + 4 * kJointNames.size();
    return l;
}

struct Vec3 {
    double x, y, z;
};

// One simulated step handed to the visitor.
struct StepView {
    std::size_t step;
    std::span<const double> state;
    std::span<const Vec3> joints;  // kJointNames order
};

template <class Visitor>
void simulate(const GaitParams& params, Task task, const EnvConfig& cfg, std::uint64_t seed,
              Visitor&& visit) {
    validate(params);
    if (cfg.steps < 2) throw Error(ErrorCode::InvalidArgument, "episode needs at least 2 steps");
    if (!(cfg.dt > 0.0)) throw Error(ErrorCode::InvalidArgument, "dt must be positive");
    if (!(cfg.noise_sigma >= 0.0)) throw Error(ErrorCode::InvalidArgument, "noise sigma must be >= 0");

    const Layout lay = layout(task);
    std::mt19937_64 rng(seed);
    double target_x = 0.0;
    double target_y = 0.0;
    if (lay.has_target) {
        target_x = std::uniform_real_distribution<double>(cfg.target_vx_min, cfg.target_vx_max)(rng);
        target_y = std::uniform_real_distribution<double>(cfg.target_vy_min, cfg.target_vy_max)(rng);
    }
    std::normal_distribution<double> noise(0.0, 1.0);

    const double cmd_x = target_x + params.base_speed;
    const double cmd_y = target_y;
    const double cmd_speed = std::hypot(cmd_x, cmd_y);
    const double head_x = cmd_speed > 1e-12 ? cmd_x / cmd_speed : 1.0;
    const double head_y = cmd_speed > 1e-12 ? cmd_y / cmd_speed : 0.0;
    const double lat_x = -head_y;
    const double lat_y = head_x;

    const double omega = kTwoPi * params.frequency;
    std::vector<double> state(lay.size, 0.0);
    std::array<Vec3, kJointNames.size()> pos{};
    std::array<double, kJointNames.size()> vz{};
    double root_x = 0.0;
    double root_y = 0.0;

    for (std::size_t k = 0; k < cfg.steps; ++k) {
        const double t = static_cast<double>(k) * cfg.dt;
        const double surge = 2.0 * (params.duty - 0.5) * std::sin(2.0 * omega * t);
        const double scale = (1.0 + surge) * (1.0 + cfg.noise_sigma * noise(rng));
        const double vx = cmd_x * scale;
        const double vy = cmd_y * scale;

        // Height (or drop) and its time derivative for driven joint j.
        auto wave = [&](std::size_t j) {
            const auto& o = params.joints[j];
            const double arg = omega * t + o.phase;
            return std::pair{o.offset + o.amplitude * std::sin(arg), o.amplitude * omega * std::cos(arg)};
        };

        const auto [root_z, root_vz] = wave(0);
        pos[0] = {root_x, root_y, root_z};
        vz[0] = root_vz;
        for (int side = 0; side < 2; ++side) {
            const double sign = side == 0 ? 1.0 : -1.0;
            const std::size_t hip = side == 0 ? 1 : 4;
            const auto [knee_drop, knee_drop_rate] = wave(side == 0 ? 1 : 3);
            const auto [foot_drop, foot_drop_rate] = wave(side == 0 ? 2 : 4);

            pos[hip] = {root_x + sign * kHipHalfWidth * lat_x, root_y + sign * kHipHalfWidth * lat_y,
                        root_z - kHipDrop};
            vz[hip] = root_vz;

            const double knee_fwd = std::sqrt(kThighLength * kThighLength - knee_drop * knee_drop);
            pos[hip + 1] = {pos[hip].x + knee_fwd * head_x, pos[hip].y + knee_fwd * head_y,
                            pos[hip].z - knee_drop};
            vz[hip + 1] = vz[hip] - knee_drop_rate;

            const double foot_back = std::sqrt(kShinLength * kShinLength - foot_drop * foot_drop);
            pos[hip + 2] = {pos[hip + 1].x - foot_back * head_x, pos[hip + 1].y - foot_back * head_y,
                            pos[hip + 1].z - foot_drop};
            vz[hip + 2] = vz[hip + 1] - foot_drop_rate;
        }

        state[lay.root_vel_x] = vx;
        state[lay.root_vel_y] = vy;
        state[lay.root_height] = root_z;
        if (lay.has_target) {
            state[lay.target_vel_x] = target_x;
            state[lay.target_vel_y] = target_y;
        }
        state[lay.step_dt] = cfg.dt;
        for (std::size_t j = 0; j < kJointNames.size(); ++j) {
            state[lay.joints + 4 * j + 0] = pos[j].x;
            state[lay.joints + 4 * j + 1] = pos[j].y;
            state[lay.joints + 4 * j + 2] = pos[j].z;
            state[lay.joints + 4 * j + 3] = vz[j];
        }
        visit(StepView{k, state, pos});

        root_x += vx * cfg.dt;
        root_y += vy * cfg.dt;
    }
}

double reward_at(const dsl::RewardProgram& program, std::size_t step, std::span<const double> state) {
    try {
        return program.evaluate(state);
    } catch (const Error& e) {
        throw Error(e.code(), "step " + std::to_string(step) + ": " + e.what());
    }
}

}  // namespace

std::string_view to_string(Task task) noexcept {
    return task == Task::VelocityTracking ? "velocity_tracking" : "run_fast";
}

Task task_from_string(std::string_view name) {
    if (name == "velocity_tracking") return Task::VelocityTracking;
    if (name == "run_fast") return Task::RunFast;
    throw Error(ErrorCode::InvalidArgument, "unknown task '" + std::string(name) + "'");
}

std::vector<std::string> EnvSchema::names() const {
    std::vector<std::string> out;
    out.reserve(variables.size());
    for (const auto& v : variables) out.push_back(v.name);
    return out;
}

std::size_t EnvSchema::index_of(std::string_view name) const {
    for (std::size_t i = 0; i < variables.size(); ++i) {
        if (variables[i].name == name) return i;
    }
    throw Error(ErrorCode::UnknownVariable, "schema has no variable '" + std::string(name) + "'");
}

std::string EnvSchema::describe() const {
    std::string out = "Task: " + std::string(to_string(task)) + "\n";
    out += "Joints (root first): ";
    for (std::size_t i = 0; i < joint_names.size(); ++i) {
        if (i > 0) out += ", ";
        out += joint_names[i];
    }
    out += "\nState variables available to the reward program (one value per simulation step):\n";
    for (const auto& v : variables) {
        out += "  " + v.name + " [" + v.unit + "]: " + v.description + "\n";
    }
    return out;
}

EnvSchema schema(Task task) {
    EnvSchema s;
    s.task = task;
    for (auto j : kJointNames) s.joint_names.emplace_back(j);

    auto add = [&](std::string name, std::string desc, std::string unit) {
        s.variables.push_back({std::move(name), std::move(desc), std::move(unit)});
    };
    add("root_vel_x", "root (body) velocity along world x", "m/s");
    add("root_vel_y", "root (body) velocity along world y", "m/s");
    add("root_height", "root (body) height above the ground plane", "m");
    if (task == Task::VelocityTracking) {
        add("target_vel_x", "commanded target velocity along x, fixed per episode", "m/s");
        add("target_vel_y", "commanded target velocity along y, fixed per episode", "m/s");
    }
    add("step_dt", "simulation step length", "s");
    for (auto j : kJointNames) {
        const std::string n(j);
        add("joint_" + n + "_x", n + " position along world x", "m");
        add("joint_" + n + "_y", n + " position along world y", "m");
        add("joint_" + n + "_z", n + " height", "m");
        add("joint_" + n + "_vz", n + " vertical velocity", "m/s");
    }
    return s;
}

dsl::RewardProgram check(const dsl::ParsedProgram& program, const EnvSchema& schema) {
    const auto names = schema.names();
    return dsl::check(program, names);
}

std::array<double, GaitParams::kDims> GaitParams::to_vector() const {
    std::array<double, kDims> v{};
    for (std::size_t j = 0; j < joints.size(); ++j) {
        v[3 * j + 0] = joints[j].amplitude;
        v[3 * j + 1] = joints[j].phase;
        v[3 * j + 2] = joints[j].offset;
    }
    v[kDims - 3] = frequency;
    v[kDims - 2] = base_speed;
    v[kDims - 1] = duty;
    return v;
}

GaitParams GaitParams::from_vector(std::span<const double> v) {
    if (v.size() != kDims) {
        throw Error(ErrorCode::InvalidArgument,
                    "gait parameter vector needs " + std::to_string(kDims) + " values");
    }
    GaitParams p;
    for (std::size_t j = 0; j < p.joints.size(); ++j) {
        p.joints[j] = {v[3 * j + 0], v[3 * j + 1], v[3 * j + 2]};
    }
    p.frequency = v[kDims - 3];
    p.base_speed = v[kDims - 2];
    p.duty = v[kDims - 1];
    return p;
}

GaitParams GaitParams::center() {
    const auto& box = param_box();
    std::array<double, kDims> v{};
    for (std::size_t i = 0; i < kDims; ++i) v[i] = 0.5 * (box.lo[i] + box.hi[i]);
    return from_vector(v);
}

const ParamBox& param_box() {
    static const ParamBox box = [] {
        ParamBox b;
        for (std::size_t j = 0; j < kDrivenJoints.size(); ++j) {
            const std::string n(kDrivenJoints[j]);
            const bool root = j == 0;
            b.names[3 * j + 0] = n + ".amplitude";
            b.lo[3 * j + 0] = 0.0;
            b.hi[3 * j + 0] = root ? 0.05 : 0.08;
            b.names[3 * j + 1] = n + ".phase";
            b.lo[3 * j + 1] = -std::numbers::pi;
            b.hi[3 * j + 1] = std::numbers::pi;
            b.names[3 * j + 2] = n + ".offset";
            b.lo[3 * j + 2] = root ? 0.85 : 0.10;
            b.hi[3 * j + 2] = root ? 1.10 : 0.30;
        }
        constexpr auto d = GaitParams::kDims;
        b.names[d - 3] = "frequency";
        b.lo[d - 3] = 0.5;
        b.hi[d - 3] = 3.0;
        b.names[d - 2] = "base_speed";
        b.lo[d - 2] = -1.0;
        b.hi[d - 2] = 3.0;
        b.names[d - 1] = "duty";
        b.lo[d - 1] = 0.3;
        b.hi[d - 1] = 0.7;
        return b;
    }();
    return box;
}

void validate(const GaitParams& params) {
    const auto v = params.to_vector();
    const auto& box = param_box();
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (!(v[i] >= box.lo[i] && v[i] <= box.hi[i])) {
            throw Error(ErrorCode::InvalidArgument, "gait parameter " + box.names[i] + " = " +
                                                        std::to_string(v[i]) + " is outside [" +
                                                        std::to_string(box.lo[i]) + ", " +
                                                        std::to_string(box.hi[i]) + "]");
        }
    }
}

std::vector<std::pair<std::string, std::string>> rigid_segments() {
    return {{"root", "hip_l"},  {"root", "hip_r"},   {"hip_l", "knee_l"},
            {"knee_l", "foot_l"}, {"hip_r", "knee_r"}, {"knee_r", "foot_r"}};
}

Rollout rollout(const GaitParams& params, Task task, const EnvConfig& config, std::uint64_t seed,
                const dsl::RewardProgram* program) {
    Rollout out;
    out.task = task;
    out.states.reserve(config.steps);
    out.keypoints.space = Space::Sim3d;
    out.keypoints.source = "gait_env " + std::string(to_string(task)) + " seed " + std::to_string(seed);
    for (auto j : kJointNames) {
        Trajectory traj;
        traj.joint_name = std::string(j);
        traj.sample_period = config.dt;
        traj.points.reserve(config.steps);
        out.keypoints.joints.push_back(std::move(traj));
    }

    double total = 0.0;
    simulate(params, task, config, seed, [&](const StepView& s) {
        out.states.emplace_back(s.state.begin(), s.state.end());
        for (std::size_t j = 0; j < s.joints.size(); ++j) {
            out.keypoints.joints[j].points.push_back({s.joints[j].x, s.joints[j].y, s.joints[j].z});
        }
        if (program != nullptr) total += reward_at(*program, s.step, s.state);
    });
    out.episode_reward = total;
    out.sparse_reward = sparse_reward(out, task);
    return out;
}

double episode_return(const GaitParams& params, Task task, const EnvConfig& config,
                      std::uint64_t seed, const dsl::RewardProgram& program) {
    double total = 0.0;
    simulate(params, task, config, seed,
             [&](const StepView& s) { total += reward_at(program, s.step, s.state); });
    return total;
}

double sparse_reward(const Rollout& rollout, Task task) {
    const Layout lay = layout(task);
    if (rollout.states.empty()) return 0.0;
    const auto n = static_cast<double>(rollout.states.size());
    if (task == Task::VelocityTracking) {
        double ex = 0.0;
        double ey = 0.0;
        for (const auto& s : rollout.states) {
            ex += std::fabs(s[lay.root_vel_x] - s[lay.target_vel_x]);
            ey += std::fabs(s[lay.root_vel_y] - s[lay.target_vel_y]);
        }
        return -(ex / n) - (ey / n);
    }
    double progress = 0.0;
    for (const auto& s : rollout.states) progress += s[lay.root_vel_x];
    return progress / n;
}

double h_mts(const GaitParams& params, Task task, std::size_t n_episodes, std::uint64_t seed,
             const EnvConfig& config) {
    if (n_episodes == 0) throw Error(ErrorCode::InvalidArgument, "h_mts needs at least one episode");
    double total = 0.0;
    for (std::size_t e = 0; e < n_episodes; ++e) {
        total += rollout(params, task, config, derive_seed(seed, {e})).sparse_reward;
    }
    return total / static_cast<double>(n_episodes);
}

}  // namespace v2r::env
