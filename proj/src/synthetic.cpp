#include "v2r/synthetic.hpp"

#include <cmath>
#include <numbers>

#include "v2r/error.hpp"

namespace v2r {

TrajectorySet render_reference(const env::GaitParams& params, env::Task task,
                               const env::EnvConfig& config, std::uint64_t seed,
                               const RenderOptions& options) {
    if (!(options.fps > 0.0) || !(options.pixels_per_meter > 0.0)) {
        throw Error(ErrorCode::InvalidArgument, "fps and pixel scale must be positive");
    }
    const double ratio = 1.0 / (options.fps * config.dt);
    const auto stride = static_cast<std::size_t>(std::llround(ratio));
    if (stride == 0 || std::abs(ratio - static_cast<double>(stride)) > 1e-9) {
        throw Error(ErrorCode::InvalidArgument, "fps must divide the simulation step rate");
    }
    const auto r = env::rollout(params, task, config, seed);
    TrajectorySet sagittal = project_sagittal(r.keypoints);
    if (stride > 1) sagittal = subsample(sagittal, stride);
    const Trajectory root = sagittal.at("root");
    sagittal = select_joints(sagittal, options.joints);

    TrajectorySet out;
    out.space = Space::Image2d;
    out.source = "synthetic";
    out.frame_size = options.frame;
    out.normalized = false;
    const double cx = 0.5 * options.frame.width;
    for (const auto& traj : sagittal.joints) {
        Trajectory t{traj.joint_name, {}, traj.sample_period};
        for (std::size_t l = 0; l < traj.points.size(); ++l) {
            const auto& p = traj.points[l];
            t.points.push_back({cx + options.pixels_per_meter * (p.x - root.points[l].x),
                                options.ground_row - options.pixels_per_meter * p.y, std::nullopt});
        }
        out.joints.push_back(std::move(t));
    }
    validate(out);
    return out;
}

env::GaitParams demo_gait() {
    using std::numbers::pi;
    env::GaitParams g;
    g.joints[0] = {0.03, 0.0, 0.95};        // root
    g.joints[1] = {0.06, 0.0, 0.20};        // knee_l
    g.joints[2] = {0.08, 1.0, 0.18};        // foot_l
    g.joints[3] = {0.06, pi, 0.20};         // knee_r, half a cycle behind
    g.joints[4] = {0.08, 1.0 - pi, 0.18};   // foot_r
    g.frequency = 1.5;
    g.base_speed = 0.0;
    g.duty = 0.5;
    return g;
}

}  // namespace v2r
