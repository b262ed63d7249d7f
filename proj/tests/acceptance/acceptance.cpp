// Acceptance checks: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <bit>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "../dsl_oracle.hpp"
#include "v2r/orchestrator.hpp"
#include "v2r/synthetic.hpp"

namespace fs = std::filesystem;
using namespace v2r;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

struct Criterion {
    std::string name;
    double time_limit_s;  // <= 0 means no runtime bound
    std::function<Outcome()> check;
};

std::string fmt(double v, int precision = 4) { return format_fixed(v, precision); }

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

fs::path scratch_dir(const std::string& name) {
    const auto dir = fs::temp_directory_path() / ("v2r_acceptance_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

void write_script(const fs::path& path, const std::vector<std::tuple<int, std::size_t, std::string>>& entries) {
    std::ofstream out(path);
    for (const auto& [round, index, src] : entries) {
        out << nlohmann::json{{"round", round}, {"index", index}, {"response_text", "```reward\n" + src + "\n```"}}.dump()
            << "\n";
    }
}

// --- 1: FastDTW against the exact solver --------------------------------------

Outcome fastdtw_equivalence() {
    std::mt19937_64 rng(1);
    std::uniform_int_distribution<std::size_t> len(8, 64);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    auto seq = [&](std::size_t n) {
        std::vector<Point2> s(n);
        for (auto& p : s) p = {u(rng), u(rng)};
        return s;
    };
    std::size_t within = 0, exact_full = 0;
    double worst = 0.0;
    constexpr std::size_t kPairs = 200;
    for (std::size_t i = 0; i < kPairs; ++i) {
        const auto a = seq(len(rng));
        const auto b = seq(len(rng));
        const double exact = dtw_exact(a, b).cost;
        const double approx = fastdtw(a, b, 2).cost;
        const double rel = (approx - exact) / exact;
        worst = std::max(worst, rel);
        if (rel <= 0.05) ++within;
        if (fastdtw(a, b, std::max(a.size(), b.size())).cost == exact) ++exact_full;
    }
    const bool pass = within * 100 >= 95 * kPairs && exact_full == kPairs;
    return {pass, std::to_string(within) + "/200 within 5% at radius 2 (need 190), worst +" + fmt(100 * worst, 1) +
                      "%; full radius exact on " + std::to_string(exact_full) + "/200"};
}

// --- 2: period detection on noisy sinusoids ---------------------------------

Outcome period_detection() {
    std::size_t worst_hits = 101, total_hits = 0, total = 0;
    std::size_t worst_period = 0;
    for (std::size_t p = 10; p <= 50; ++p) {
        std::size_t hits = 0;
        for (std::uint64_t trial = 0; trial < 100; ++trial) {
            std::mt19937_64 rng(1000 * p + trial);
            std::uniform_real_distribution<double> noise(-0.05, 0.05);
            std::vector<double> s(10 * p);
            for (std::size_t t = 0; t < s.size(); ++t) {
                s[t] = std::sin(2.0 * std::numbers::pi * double(t) / double(p)) + noise(rng);
            }
            std::size_t got = 0;
            try {
                got = autocorr_period(s);
            } catch (const Error&) {
            }
            if (got + 1 >= p && got <= p + 1) ++hits;
        }
        total_hits += hits;
        total += 100;
        if (hits < worst_hits) {
            worst_hits = hits;
            worst_period = p;
        }
    }
    return {worst_hits >= 95, "worst period P=" + std::to_string(worst_period) + ": " + std::to_string(worst_hits) +
                                  "/100 within +-1 (need 95); overall " + std::to_string(total_hits) + "/" +
                                  std::to_string(total)};
}

// --- 3: reward language round trip, oracle and error cases -------------------

Outcome dsl_round_trip_and_oracle() {
    const std::vector<std::string> vars{"root_vel_x", "root_vel_y", "root_height", "target_vel_x"};
    testing::AstGen gen(2024, vars);
    std::size_t round_trip = 0;
    for (int i = 0; i < 1000; ++i) {
        const auto p = gen.program();
        try {
            if (dsl::structurally_equal(dsl::parse(dsl::pretty_print(p)), p)) ++round_trip;
        } catch (const Error&) {
        }
    }

    std::size_t agree = 0, raised = 0;
    std::uniform_real_distribution<double> u(-3.0, 3.0);
    for (int i = 0; i < 1000; ++i) {
        const auto p = gen.program();
        const auto program = dsl::check(p, vars);
        std::map<std::string, double> state;
        for (const auto& v : vars) state[v] = u(gen.rng);
        testing::Oracle oracle{state};
        const auto want = oracle.run(p);
        std::optional<ErrorCode> err;
        double got = 0.0;
        try {
            got = program.evaluate(state);
        } catch (const Error& e) {
            err = e.code();
        }
        if (err) ++raised;
        if (err == want.error && (err || std::bit_cast<std::uint64_t>(got) == std::bit_cast<std::uint64_t>(want.value))) {
            ++agree;
        }
    }

    // Each listed source must raise the listed error.
    const std::vector<std::pair<std::string, ErrorCode>> cases{
        {"1.0 / (root_vel_x - root_vel_x)", ErrorCode::GuardedDivision},
        {"root_height / 0", ErrorCode::GuardedDivision},
        {"1 / 1e-10", ErrorCode::GuardedDivision},
        {"if(root_vel_x > -100, 2 / (root_vel_y - root_vel_y), 0)", ErrorCode::GuardedDivision},
        {"exp(1, 2)", ErrorCode::Arity},
        {"clamp(root_vel_x, 0)", ErrorCode::Arity},
        {"min(root_vel_x)", ErrorCode::Arity},
        {"if(root_vel_x < 1, 2)", ErrorCode::Arity},
        {"tanh()", ErrorCode::Arity},
    };
    std::size_t raised_as_specified = 0;
    for (const auto& [src, code] : cases) {
        try {
            const auto prog = dsl::compile_reward(src, vars);
            (void)prog.evaluate(std::map<std::string, double>{
                {"root_vel_x", 0.5}, {"root_vel_y", 0.25}, {"root_height", 0.9}, {"target_vel_x", 1.0}});
        } catch (const Error& e) {
            if (e.code() == code) ++raised_as_specified;
        }
    }
    const bool pass = round_trip == 1000 && agree == 1000 && raised_as_specified == cases.size();
    return {pass, "round trip " + std::to_string(round_trip) + "/1000, oracle agreement " + std::to_string(agree) +
                      "/1000 (" + std::to_string(raised) + " matching errors), error cases " +
                      std::to_string(raised_as_specified) + "/" + std::to_string(cases.size())};
}

// --- 4: human normalized score -------------------------------------------------

Outcome normalized_score_exactness() {
    // Dyadic baselines so the midpoint itself is exact.
    const std::vector<std::pair<double, double>> baselines{{1.0, 3.0}, {-2.5, 0.5}, {-0.75, -0.25}, {0.0, 1024.0}};
    std::size_t ok = 0, checks = 0;
    for (const auto& [sparse, human] : baselines) {
        const double mid = (sparse + human) / 2.0;
        ok += orch::human_normalized_score(human, sparse, human) == 1.0;
        ok += orch::human_normalized_score(sparse, sparse, human) == 0.0;
        ok += orch::human_normalized_score(mid, sparse, human) == 0.5;
        checks += 3;
    }
    bool raised = false;
    try {
        (void)orch::human_normalized_score(0.3, 0.7, 0.7);
    } catch (const Error& e) {
        raised = e.code() == ErrorCode::UndefinedDenominator;
    }
    return {ok == checks && raised, std::to_string(ok) + "/" + std::to_string(checks) +
                                        " exact values; equal baselines " + (raised ? "raise" : "do not raise")};
}

// --- 5: trainer reaches the tracking optimum ---------------------------------

Outcome trainer_sanity() {
    env::EnvConfig cfg;
    cfg.noise_sigma = 0.0;
    double grid_best = -std::numeric_limits<double>::infinity(), grid_arg = 0.0;
    for (int i = 0; i <= 400; ++i) {
        auto p = env::GaitParams::center();
        p.base_speed = -1.0 + 0.01 * i;
        const double h = env::h_mts(p, env::Task::VelocityTracking, 4, 5, cfg);
        if (h > grid_best) {
            grid_best = h;
            grid_arg = p.base_speed;
        }
    }
    const auto program = dsl::compile_reward("-abs(root_vel_x - target_vel_x)",
                                             env::schema(env::Task::VelocityTracking).names());
    const auto pol = train::CemTrainer(cfg).train(program, env::Task::VelocityTracking, 2000, 0);
    const bool pass = pol.h_mts >= -0.05 && std::abs(grid_best) <= 0.01 && pol.evals_used <= 2000;
    return {pass, "CEM h_mts " + fmt(pol.h_mts) + " (need >= -0.05) after " + std::to_string(pol.evals_used) +
                      " rollouts; grid optimum " + fmt(grid_best) + " at base speed " + fmt(grid_arg, 2)};
}

// --- 6: loop determinism, argmax and strict update --------------------------

Outcome loop_determinism() {
    const auto dir = scratch_dir("loop");
    write_trajectories(render_reference(demo_gait(), env::Task::VelocityTracking, {}, 7), dir / "ref.jsonl");
    const std::string track = "-abs(root_vel_x - target_vel_x) - abs(root_vel_y - target_vel_y)";
    write_script(dir / "script.jsonl", {
                                           {1, 0, "root_vel_x"},
                                           {1, 1, track},
                                           {2, 0, "-root_vel_x"},
                                           {2, 1, "root_vel_x + root_vel_y"},
                                           {3, 0, track + " - 0.1 * abs(joint_root_vz)"},
                                           {3, 1, "0.0"},
                                       });
    RunConfig c;
    c.reference = dir / "ref.jsonl";
    c = test_profile(c);
    c.seed = 3;
    c.eval_rollouts = 4;
    c.train_budget = 640;
    c.backend = "mock";
    c.mock_script = dir / "script.jsonl";

    orch::RunManifest m;
    for (const char* out : {"a", "b"}) {
        auto backend = orch::make_backend(c);
        m = orch::run(c, *backend, dir / out);
    }
    const bool identical = slurp(dir / "a/manifest.json") == slurp(dir / "b/manifest.json");

    bool argmax_ok = true, update_ok = true, monotone = true, saw_hold = false;
    double best_so_far = -std::numeric_limits<double>::infinity();
    int best_round = 0;
    for (const auto& r : m.rounds) {
        const orch::CandidateResult* best = nullptr;
        for (const auto& cand : r.candidates) {
            if (cand.status == orch::CandidateStatus::Ok && (!best || *cand.h_mts > *best->h_mts)) best = &cand;
        }
        argmax_ok = argmax_ok && best && best->index == r.best_index && *best->h_mts == r.best_score;
        if (r.best_score > best_so_far) {
            best_so_far = r.best_score;
            best_round = r.round;
        } else {
            saw_hold = true;
        }
        update_ok = update_ok && r.best_so_far_score == best_so_far && r.best_so_far_round == best_round;
        if (r.round > 1) monotone = monotone && r.best_so_far_score >= m.rounds[r.round - 2].best_so_far_score;
    }
    const bool final_ok = m.final_score == best_so_far && m.final_reward_source == m.rounds[best_round - 1].best_source;
    const bool pass = m.complete() && identical && argmax_ok && update_ok && monotone && saw_hold && final_ok;
    fs::remove_all(dir);
    std::string trace;
    for (const auto& r : m.rounds) {
        trace += (trace.empty() ? "" : ", ") + std::string("r") + std::to_string(r.round) + " best #" +
                 std::to_string(r.best_index) + " " + fmt(r.best_score) + "/so far " + fmt(r.best_so_far_score);
    }
    return {pass, std::string(identical ? "byte-identical" : "DIFFERENT") + " manifests; argmax " +
                      (argmax_ok ? "ok" : "WRONG") + ", strict update " + (update_ok ? "ok" : "WRONG") +
                      (saw_hold ? " (held in a worse round)" : " (no held round exercised)") + "; " + trace};
}

// --- 7: scripted feedback efficacy -------------------------------------------

// Each round's good candidate captures more of the reference gait: speed only,
// then root and knee oscillation, then every joint with phase coupling.
const char* kSpeedOnly = "-abs(root_vel_x - target_vel_x) - abs(root_vel_y - target_vel_y)";
const char* kRootKnee = R"(let track = abs(root_vel_x - target_vel_x) + abs(root_vel_y - target_vel_y)
let rz = (joint_root_z - 0.95) / 0.03
let rv = joint_root_vz / (9.42478 * 0.03)
let kl = (joint_hip_l_z - joint_knee_l_z - 0.2) / 0.06
let klv = (joint_hip_l_vz - joint_knee_l_vz) / (9.42478 * 0.06)
let kr = (joint_hip_r_z - joint_knee_r_z - 0.2) / 0.06
let krv = (joint_hip_r_vz - joint_knee_r_vz) / (9.42478 * 0.06)
-10 * track - abs(rz * rz + rv * rv - 1) - abs(kl * kl + klv * klv - 1) - abs(kr * kr + krv * krv - 1))";
const char* kFullGait = R"(let track = abs(root_vel_x - target_vel_x) + abs(root_vel_y - target_vel_y)
let rz = (joint_root_z - 0.95) / 0.03
let rv = joint_root_vz / (9.42478 * 0.03)
let kl = (joint_hip_l_z - joint_knee_l_z - 0.2) / 0.06
let klv = (joint_hip_l_vz - joint_knee_l_vz) / (9.42478 * 0.06)
let kr = (joint_hip_r_z - joint_knee_r_z - 0.2) / 0.06
let krv = (joint_hip_r_vz - joint_knee_r_vz) / (9.42478 * 0.06)
let fl = (joint_knee_l_z - joint_foot_l_z - 0.18) / 0.08
let flv = (joint_knee_l_vz - joint_foot_l_vz) / (9.42478 * 0.08)
let fr = (joint_knee_r_z - joint_foot_r_z - 0.18) / 0.08
let frv = (joint_knee_r_vz - joint_foot_r_vz) / (9.42478 * 0.08)
let shape = abs(rz * rz + rv * rv - 1) + abs(kl * kl + klv * klv - 1) + abs(kr * kr + krv * krv - 1) + abs(fl * fl + flv * flv - 1) + abs(fr * fr + frv * frv - 1)
let sync = abs(rz - kl) + abs(kl + kr) + abs(kl * fl + klv * flv - 0.5403) + abs(klv * fl - kl * flv - 0.8415) + abs(kr * fr + krv * frv - 0.5403) + abs(krv * fr - kr * frv - 0.8415)
-10 * track - shape - sync)";

Outcome feedback_efficacy() {
    const auto dir = scratch_dir("efficacy");
    write_trajectories(render_reference(demo_gait(), env::Task::VelocityTracking, {}, 7), dir / "ref.jsonl");
    // The second candidate of each round sprints past the target, so the
    // intended candidate is the round's argmax.
    write_script(dir / "script.jsonl", {
                                           {1, 0, kSpeedOnly},
                                           {1, 1, "root_vel_x"},
                                           {2, 0, kRootKnee},
                                           {2, 1, "root_vel_x"},
                                           {3, 0, kFullGait},
                                           {3, 1, "root_vel_x"},
                                       });
    RunConfig c;
    c.reference = dir / "ref.jsonl";
    c = test_profile(c);
    c.seed = 7;
    c.backend = "mock";
    c.mock_script = dir / "script.jsonl";
    auto backend = orch::make_backend(c);
    const auto m = orch::run(c, *backend, dir / "run");

    // Read the round means back from the exported score table.
    const auto rep = orch::report(orch::load_manifest(dir / "run/manifest.json"), {-1.0, 0.0});
    std::vector<double> csv_means;
    std::istringstream csv(rep.score_table_csv);
    std::string line;
    std::getline(csv, line);
    while (std::getline(csv, line)) {
        std::vector<std::string> cells;
        std::istringstream row(line);
        for (std::string cell; std::getline(row, cell, ',');) cells.push_back(cell);
        csv_means.push_back(cells.size() > 5 && !cells[5].empty() ? std::stod(cells[5]) : std::nan(""));
    }
    fs::remove_all(dir);

    if (m.rounds.size() != 3 || csv_means.size() != 3) return {false, "run did not complete three rounds"};
    const double first = m.rounds.front().dtw_feedback.mean();
    const double last = m.rounds.back().dtw_feedback.mean();
    const bool intended = m.rounds[0].best_index == 0 && m.rounds[1].best_index == 0 && m.rounds[2].best_index == 0;
    const bool reported = csv_means[2] < csv_means[0] && rep.text.find(fmt(last)) != std::string::npos;
    const bool pass = m.rounds.back().feedback_error.empty() && last < first && reported && intended;
    return {pass, "mean per-joint DTW by round " + fmt(first) + " -> " + fmt(m.rounds[1].dtw_feedback.mean()) +
                      " -> " + fmt(last) + "; report table " + fmt(csv_means[0]) + " -> " + fmt(csv_means[2]) +
                      (intended ? "" : "; unexpected round best")};
}

// --- 8: trajectory pipeline invariants ---------------------------------------

TrajectorySet random_image_set(std::mt19937_64& rng, std::size_t joints, std::size_t frames) {
    std::uniform_real_distribution<double> u(0.0, 400.0);
    TrajectorySet s;
    s.space = Space::Image2d;
    s.frame_size = FrameSize{640, 480};
    for (std::size_t j = 0; j < joints; ++j) {
        Trajectory t{"j" + std::to_string(j), {}, 0.04};
        for (std::size_t l = 0; l < frames; ++l) t.points.push_back({std::round(u(rng)), std::round(u(rng)), std::nullopt});
        s.joints.push_back(std::move(t));
    }
    return s;
}

Outcome trajectory_invariants() {
    std::mt19937_64 rng(8);
    std::size_t bbox = 0, frame = 0, strides = 0, heights = 0;

    // Per-frame translation and scale invariance of bbox normalization (exact
    // with power-of-two scales and integer shifts).
    std::uniform_int_distribution<int> shift(-64, 64), expo(-3, 3);
    for (int trial = 0; trial < 200; ++trial) {
        const auto base = random_image_set(rng, 5, 8);
        auto moved = base;
        for (std::size_t l = 0; l < 8; ++l) {
            const double k = std::ldexp(1.0, expo(rng)), dx = 4.0 * shift(rng), dy = 4.0 * shift(rng);
            for (auto& j : moved.joints) j.points[l] = {j.points[l].x * k + dx, j.points[l].y * k + dy, std::nullopt};
        }
        if (normalize_bbox(base).joints != normalize_bbox(moved).joints) ++bbox;
    }

    // Frame normalization corners and the unit-frame flip.
    TrajectorySet corners;
    corners.space = Space::Image2d;
    corners.frame_size = FrameSize{640, 480};
    const std::vector<std::pair<Keypoint, Keypoint>> expect{{{0, 0, std::nullopt}, {0, 1, std::nullopt}},
                                                            {{640, 0, std::nullopt}, {1, 1, std::nullopt}},
                                                            {{0, 480, std::nullopt}, {0, 0, std::nullopt}},
                                                            {{640, 480, std::nullopt}, {1, 0, std::nullopt}},
                                                            {{320, 240, std::nullopt}, {0.5, 0.5, std::nullopt}}};
    for (std::size_t i = 0; i < expect.size(); ++i) corners.joints.push_back({"c" + std::to_string(i), {expect[i].first}, 0.04});
    const auto framed = normalize_frame(corners);
    for (std::size_t i = 0; i < expect.size(); ++i) frame += framed.joints[i].points[0] != expect[i].second;
    for (double w : {0.0, -1.0}) {
        auto bad = corners;
        bad.frame_size = FrameSize{w, 480};
        try {
            (void)normalize_frame(bad);
            ++frame;
        } catch (const Error&) {
        }
    }

    // Subsample composition: stride a then b equals stride a*b.
    for (std::size_t a = 1; a <= 5; ++a) {
        for (std::size_t b = 1; b <= 5; ++b) {
            const auto s = random_image_set(rng, 2, 120);
            const auto twice = subsample(subsample(s, a), b);
            const auto once = subsample(s, a * b);
            // Frames must match exactly; the period is a float product, so allow rounding.
            for (std::size_t j = 0; j < once.joints.size(); ++j) {
                const auto& x = twice.joints[j];
                const auto& y = once.joints[j];
                strides += x.points != y.points ||
                           std::fabs(x.sample_period - y.sample_period) > 1e-12 * y.sample_period;
            }
        }
    }

    // Sagittal projection keeps heights bit for bit.
    std::uniform_real_distribution<double> w(-3.0, 3.0);
    for (int trial = 0; trial < 50; ++trial) {
        TrajectorySet s;
        s.space = Space::Sim3d;
        for (int j = 0; j < 4; ++j) {
            Trajectory t{j == 0 ? "root" : "j" + std::to_string(j), {}, 0.01};
            for (int l = 0; l < 20; ++l) t.points.push_back({w(rng), w(rng), w(rng)});
            s.joints.push_back(std::move(t));
        }
        const auto p = project_sagittal(s);
        for (std::size_t j = 0; j < s.joints.size(); ++j) {
            for (std::size_t l = 0; l < 20; ++l) heights += p.joints[j].points[l].y != *s.joints[j].points[l].z;
        }
    }
    const std::size_t failures = bbox + frame + strides + heights;
    return {failures == 0, "violations: bbox invariance " + std::to_string(bbox) + "/200 sets, frame corners " +
                               std::to_string(frame) + ", subsample composition " + std::to_string(strides) +
                               " in 25 stride pairs, projection heights " + std::to_string(heights) + " points"};
}

}  // namespace

int main() {
    const std::vector<Criterion> criteria{
        {"fastdtw matches exact DTW", 10.0, fastdtw_equivalence},
        {"period detection on noisy sinusoids", 5.0, period_detection},
        {"reward language round trip, oracle and errors", 0.0, dsl_round_trip_and_oracle},
        {"human normalized score exactness", 0.0, normalized_score_exactness},
        {"trainer reaches tracking optimum", 30.0, trainer_sanity},
        {"loop determinism and monotone best-so-far", 60.0, loop_determinism},
        {"scripted feedback lowers DTW", 120.0, feedback_efficacy},
        {"trajectory pipeline invariants", 0.0, trajectory_invariants},
    };
    int failed = 0;
    for (const auto& c : criteria) {
        const auto start = std::chrono::steady_clock::now();
        Outcome out;
        try {
            out = c.check();
        } catch (const std::exception& e) {
            out = {false, std::string("threw: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        const bool in_time = c.time_limit_s <= 0.0 || secs < c.time_limit_s;
        const bool pass = out.pass && in_time;
        failed += !pass;
        std::string timing = fmt(secs, 2) + " s";
        if (c.time_limit_s > 0.0) timing += " of " + fmt(c.time_limit_s, 0) + " s";
        std::printf("%s  %s: %s [%s]\n", pass ? "PASS" : "FAIL", c.name.c_str(), out.detail.c_str(), timing.c_str());
        std::fflush(stdout);
    }
    std::printf("%d/%zu criteria passed\n", int(criteria.size()) - failed, criteria.size());
    return failed == 0 ? 0 : 1;
}
