// Command-line front end: run / score / report / validate-reward / synth-reference.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>

#include "v2r/config.hpp"
#include "v2r/error.hpp"
#include "v2r/orchestrator.hpp"
#include "v2r/synthetic.hpp"

namespace fs = std::filesystem;
using namespace v2r;

namespace {

std::string slurp(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::FileNotFound, "cannot open " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void spit(const fs::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
    out << content;
}

struct RunArgs {
    std::string config;
    std::string out;
    std::string resume;
    std::optional<std::size_t> rounds;
    std::optional<std::size_t> samples;
    std::optional<std::uint64_t> seed;
    std::string backend;
    std::string mock_script;
    bool test_profile = false;
    bool quiet = false;
};

int cmd_run(const RunArgs& a) {
    orch::RunControl control;
    if (!a.quiet) control.log = [](std::string_view msg) { std::cerr << msg << "\n"; };

    orch::RunManifest manifest;
    if (!a.resume.empty()) {
        const RunConfig config = parse_config(slurp(fs::path(a.resume) / "config.txt"));
        auto backend = orch::make_backend(config);
        manifest = orch::resume(a.resume, *backend, control);
    } else {
        RunConfig config = load_config(a.config);
        if (a.test_profile) config = test_profile(config);
        if (a.rounds) config.rounds = *a.rounds;
        if (a.samples) config.samples = *a.samples;
        if (a.seed) config.seed = *a.seed;
        if (!a.backend.empty()) config.backend = a.backend;
        if (!a.mock_script.empty()) config.mock_script = fs::absolute(a.mock_script);
        // Re-validate after overrides.
        config = parse_config(format_config(config));
        auto backend = orch::make_backend(config);
        manifest = orch::run(config, *backend, a.out, control);
    }
    std::cout << "rounds: " << manifest.rounds.size() << "/" << manifest.planned_rounds << "\n";
    if (!manifest.rounds.empty()) {
        std::cout << "final score: " << format_fixed(manifest.final_score, 4) << " (round "
                  << manifest.final_round << ")\n";
        std::cout << "final reward:\n" << manifest.final_reward_source << "\n";
    }
    return 0;
}

int cmd_score(const std::string& robot_path, const std::string& ref_path, const SimilarityOptions& opts) {
    const auto reference = orch::prepare_reference(load_trajectories(ref_path));
    const auto robot_raw = load_trajectories(robot_path);
    const auto robot = robot_raw.space == Space::Sim3d ? orch::prepare_robot(robot_raw, reference)
                                                       : orch::prepare_reference(robot_raw);
    std::map<std::string, double> scores;
    for (const auto& ref : reference.joints) {
        const auto* r = robot.find(ref.joint_name);
        if (!r) throw Error(ErrorCode::InvalidArgument, "robot set lacks joint '" + ref.joint_name + "'");
        scores[ref.joint_name] = joint_similarity(*r, ref, opts);
    }
    const auto agg = aggregate_feedback({scores});
    for (const auto& [name, v] : agg.per_joint) std::cout << name << ": " << format_fixed(v, 4) << "\n";
    std::cout << "mean: " << format_fixed(agg.mean(), 4) << "\n";
    return 0;
}

int cmd_report(const std::string& manifest_path, double sparse, double human, const std::string& out_dir) {
    const auto manifest = orch::load_manifest(manifest_path);
    const auto rep = orch::report(manifest, {sparse, human});
    const fs::path dir = out_dir.empty() ? fs::path(manifest_path).parent_path() : fs::path(out_dir);
    if (!dir.empty()) fs::create_directories(dir);
    spit(dir / "report.txt", rep.text);
    spit(dir / "scores.csv", rep.score_table_csv);
    std::cout << rep.text;
    return 0;
}

int cmd_validate(const std::string& task_name, const std::string& file, const std::string& inline_src) {
    const auto task = env::task_from_string(task_name);
    const std::string source = inline_src.empty() ? slurp(file) : inline_src;
    try {
        const auto program = env::check(dsl::parse(source), env::schema(task));
        std::cout << "ok\n";
        std::cout << "variables:";
        for (const auto& v : program.referenced_vars()) std::cout << " " << v;
        std::cout << "\n";
        if (program.guarded_divisions() > 0) {
            std::cout << "guarded divisions: " << program.guarded_divisions() << "\n";
        }
        std::cout << dsl::pretty_print(program.parsed()) << "\n";
        return 0;
    } catch (const Error& e) {
        std::cout << e.what() << "\n";
        return 1;
    }
}

int cmd_synth(const std::string& out, const std::string& task_name, std::uint64_t seed, double fps) {
    RenderOptions opts;
    opts.fps = fps;
    const auto set = render_reference(demo_gait(), env::task_from_string(task_name), {}, seed, opts);
    write_trajectories(set, out);
    std::cout << "wrote " << set.joints.size() << " joints x " << set.length() << " frames to " << out << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Reward search from reference gait trajectories"};
    app.require_subcommand(1);

    RunArgs run_args;
    auto* run = app.add_subcommand("run", "Run (or resume) the reward search loop");
    auto* config_opt = run->add_option("--config", run_args.config, "Config file")->check(CLI::ExistingFile);
    auto* out_opt = run->add_option("--out", run_args.out, "Output directory");
    auto* resume_opt = run->add_option("--resume", run_args.resume, "Resume the run in this directory")
                           ->check(CLI::ExistingDirectory);
    run->add_option("--rounds", run_args.rounds, "Number of rounds N")->check(CLI::PositiveNumber);
    run->add_option("--samples", run_args.samples, "Reward samples per round K")->check(CLI::PositiveNumber);
    run->add_option("--seed", run_args.seed, "Run seed");
    run->add_option("--backend", run_args.backend, "LLM backend")->check(CLI::IsMember({"http", "mock"}));
    run->add_option("--mock-script", run_args.mock_script, "Mock response script")->check(CLI::ExistingFile);
    run->add_flag("--test-profile", run_args.test_profile, "Use 3 rounds of 2 samples");
    run->add_flag("--quiet", run_args.quiet, "No progress output");
    config_opt->excludes(resume_opt);
    out_opt->excludes(resume_opt);

    std::string robot_path, ref_path;
    SimilarityOptions sim;
    std::string cost_mode = "sum";
    auto* score = app.add_subcommand("score", "Per-joint DTW between two trajectory files");
    score->add_option("--robot", robot_path, "Robot trajectories")->required()->check(CLI::ExistingFile);
    score->add_option("--reference", ref_path, "Reference trajectories")->required()->check(CLI::ExistingFile);
    score->add_option("--radius", sim.radius, "FastDTW radius");
    score->add_option("--threshold", sim.autocorr_threshold, "Autocorrelation peak threshold");
    score->add_option("--cost-mode", cost_mode, "sum or path_mean")->check(CLI::IsMember({"sum", "path_mean"}));

    std::string manifest_path, report_out;
    double sparse = 0.0, human = 0.0;
    auto* rep = app.add_subcommand("report", "Summarize a run manifest");
    rep->add_option("--manifest", manifest_path, "manifest.json")->required()->check(CLI::ExistingFile);
    rep->add_option("--sparse", sparse, "Sparse-reward baseline score")->required();
    rep->add_option("--human", human, "Human-designed reward baseline score")->required();
    rep->add_option("--out", report_out, "Directory for report.txt and scores.csv (default: manifest dir)");

    std::string task_name = "velocity_tracking", reward_file, reward_src;
    auto* val = app.add_subcommand("validate-reward", "Parse and check a reward program");
    val->add_option("--task", task_name, "Task schema")->check(CLI::IsMember({"velocity_tracking", "run_fast"}));
    auto* file_opt = val->add_option("file", reward_file, "Reward source file")->check(CLI::ExistingFile);
    auto* src_opt = val->add_option("--source", reward_src, "Reward source text");
    file_opt->excludes(src_opt);

    std::string synth_out, synth_task = "velocity_tracking";
    std::uint64_t synth_seed = 7;
    double synth_fps = 25.0;
    auto* synth = app.add_subcommand("synth-reference", "Render the demo gait as pixel keypoints");
    synth->add_option("--out", synth_out, "Output trajectory file")->required();
    synth->add_option("--task", synth_task, "Task")->check(CLI::IsMember({"velocity_tracking", "run_fast"}));
    synth->add_option("--seed", synth_seed, "Episode seed");
    synth->add_option("--fps", synth_fps, "Frame rate");

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed()) {
            if (run_args.resume.empty() && (run_args.config.empty() || run_args.out.empty())) {
                std::cerr << "run: --config and --out are required unless --resume is given\n";
                return 2;
            }
            return cmd_run(run_args);
        }
        if (score->parsed()) {
            sim.cost_mode = cost_mode_from_string(cost_mode);
            return cmd_score(robot_path, ref_path, sim);
        }
        if (rep->parsed()) return cmd_report(manifest_path, sparse, human, report_out);
        if (val->parsed()) {
            if (reward_file.empty() && reward_src.empty()) {
                std::cerr << "validate-reward: give a file or --source\n";
                return 2;
            }
            return cmd_validate(task_name, reward_file, reward_src);
        }
        if (synth->parsed()) return cmd_synth(synth_out, synth_task, synth_seed, synth_fps);
    } catch (const Error& e) {
        std::cerr << "error [" << to_string(e.code()) << "]: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
