#include "v2r/orchestrator.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "v2r/error.hpp"
#include "v2r/parallel.hpp"
#include "v2r/seed.hpp"

namespace v2r::orch {

namespace fs = std::filesystem;

namespace {

constexpr std::uint64_t kTrainStream = 1;
constexpr std::uint64_t kFeedbackStream = 2;

void write_file(const fs::path& path, std::string_view content) {
    // Write-then-rename so an interrupted run never leaves a torn file.
    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error(ErrorCode::Io, "cannot write " + tmp.string());
        out << content;
        if (!out) throw Error(ErrorCode::Io, "write failed for " + tmp.string());
    }
    fs::rename(tmp, path);
}

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::FileNotFound, "cannot open " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

std::string utc_now() {
    const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

std::string two_digits(std::size_t n) {
    return (n < 10 ? "0" : "") + std::to_string(n);
}

fs::path round_dir(const fs::path& out, int round) {
    return out / "rounds" / ("round_" + two_digits(static_cast<std::size_t>(round)));
}

std::string messages_json(const std::vector<llm::Message>& messages) {
    nlohmann::ordered_json j = nlohmann::ordered_json::array();
    for (const auto& m : messages) j.push_back({{"role", m.role}, {"content", m.content}});
    return j.dump(2) + "\n";
}

void touch_metadata(const fs::path& out, const std::string& event, int round) {
    const fs::path path = out / "metadata.json";
    nlohmann::ordered_json j = nlohmann::ordered_json::object();
    if (fs::exists(path)) j = nlohmann::ordered_json::parse(read_file(path));
    if (!j.contains("events")) j["events"] = nlohmann::ordered_json::array();
    nlohmann::ordered_json e{{"event", event}, {"time", utc_now()}};
    if (round > 0) e["round"] = round;
    j["events"].push_back(std::move(e));
    write_file(path, j.dump(2) + "\n");
}

struct Session {
    RunConfig config;
    TrajectorySet reference;
    llm::PromptContext context;
    env::EnvSchema schema;
    std::vector<std::string> variables;
    RunManifest manifest;
    fs::path out;
};

Session open_session(const RunConfig& config, const fs::path& out) {
    Session s;
    s.config = config;
    s.out = out;
    s.reference = prepare_reference(load_trajectories(config.reference));
    for (const auto& traj : s.reference.joints) {
        if (std::find(env::kJointNames.begin(), env::kJointNames.end(), traj.joint_name) ==
            env::kJointNames.end()) {
            throw Error(ErrorCode::Config, "reference joint '" + traj.joint_name +
                                               "' has no counterpart on the robot");
        }
    }
    s.context = llm::make_context(config.task, s.reference, config.prompt_precision);
    s.schema = env::schema(config.task);
    s.variables = s.schema.names();
    return s;
}

void log(const RunControl& control, const std::string& msg) {
    if (control.log) control.log(msg);
}

std::vector<CandidateResult> evaluate_batch(const Session& s, llm::ChatBackend& backend,
                                            const std::vector<llm::Message>& messages, int round,
                                            std::size_t first_index, std::ofstream& transcript) {
    auto sources = llm::sample_rewards(messages, s.config.samples, backend, s.variables, round,
                                       first_index, s.config.llm_parallelism);
    const fs::path dir = round_dir(s.out, round);
    for (const auto& src : sources) {
        transcript << nlohmann::ordered_json{{"index", src.index}, {"response_text", src.raw_response}}.dump()
                   << "\n";
        if (src.extracted_source) {
            write_file(dir / ("candidate_" + two_digits(src.index) + ".reward"), *src.extracted_source + "\n");
        }
    }
    transcript.flush();

    auto cem = s.config.cem;
    cem.workers = 1;  // parallelism is across candidates
    const train::CemTrainer trainer(s.config.env, cem);

    std::vector<CandidateResult> results(sources.size());
    parallel_for(sources.size(), s.config.train_workers, [&](std::size_t i) {
        const auto& src = sources[i];
        auto& c = results[i];
        c.index = src.index;
        c.source = src.extracted_source.value_or("");
        c.parse_status = std::string(llm::to_string(src.parse_status));
        c.error_detail = src.error_detail;
        if (src.parse_status != llm::ParseStatus::Ok) {
            c.status = CandidateStatus::ParseFailed;
            return;
        }
        const auto seed = derive_seed(s.config.seed, {kTrainStream, static_cast<std::uint64_t>(round), src.index});
        const auto policy = trainer.train(*src.program, s.config.task, s.config.train_budget, seed);
        PolicyRecord rec;
        const auto v = policy.params.to_vector();
        rec.params.assign(v.begin(), v.end());
        rec.train_curve = policy.train_curve;
        rec.evals_used = policy.evals_used;
        rec.train_status = std::string(train::to_string(policy.status));
        c.policy = std::move(rec);
        if (policy.status == train::TrainStatus::RewardError) {
            c.status = CandidateStatus::TrainFailed;
            c.error_detail = policy.error_detail;
        } else {
            c.status = CandidateStatus::Ok;
            c.h_mts = policy.h_mts;
        }
    });
    return results;
}

bool any_ok(const std::vector<CandidateResult>& batch) {
    return std::any_of(batch.begin(), batch.end(),
                       [](const CandidateResult& c) { return c.status == CandidateStatus::Ok; });
}

std::string failure_summary(const std::vector<CandidateResult>& batch) {
    std::string out;
    for (const auto& c : batch) {
        if (!out.empty()) out += "; ";
        out += "#" + std::to_string(c.index) + " " + std::string(to_string(c.status)) + " (" +
               c.parse_status + (c.error_detail.empty() ? "" : ": " + c.error_detail) + ")";
    }
    return out;
}

llm::FeedbackBlock feedback_block(const RoundRecord& r) {
    llm::FeedbackBlock b;
    b.round = r.round;
    b.best_reward_source = r.best_source;
    b.best_score = r.best_score;
    b.dtw_scores = r.dtw_feedback.per_joint;
    b.feedback_error = r.feedback_error;
    return b;
}

void persist(const Session& s, const RoundRecord* record) {
    if (record) {
        nlohmann::ordered_json j = nlohmann::ordered_json::parse(manifest_to_json(s.manifest));
        write_file(round_dir(s.out, record->round) / "record.json",
                   j.at("rounds").back().dump(2) + "\n");
    }
    write_file(s.out / "manifest.json", manifest_to_json(s.manifest));
}

RunManifest drive(Session& s, llm::ChatBackend& backend, const RunControl& control) {
    const auto& cfg = s.config;
    for (int n = static_cast<int>(s.manifest.rounds.size()) + 1; n <= static_cast<int>(cfg.rounds); ++n) {
        const auto messages = s.context.feedback_history.empty() ? llm::build_initial_prompt(s.context)
                                                                 : llm::build_feedback_prompt(s.context);
        const fs::path dir = round_dir(s.out, n);
        fs::create_directories(dir);
        const std::string prompt = messages_json(messages);
        write_file(dir / "prompt.json", prompt);

        RoundRecord record;
        record.round = n;
        record.prompt_digest = sha256_hex(prompt);

        std::ofstream transcript(dir / "responses.jsonl", std::ios::trunc);
        log(control, "round " + std::to_string(n) + ": sampling " + std::to_string(cfg.samples) + " rewards");
        auto batch = evaluate_batch(s, backend, messages, n, 0, transcript);
        if (!any_ok(batch)) {
            log(control, "round " + std::to_string(n) + ": every candidate failed, requesting a new batch");
            auto retry = evaluate_batch(s, backend, messages, n, cfg.samples, transcript);
            if (!any_ok(retry)) {
                throw Error(ErrorCode::RoundFailure,
                            "round " + std::to_string(n) + ": all candidates failed twice: " +
                                failure_summary(batch) + "; " + failure_summary(retry));
            }
            record.discarded_candidates = std::move(batch);
            batch = std::move(retry);
        }
        record.candidates = std::move(batch);

        // Lowest index wins ties: strict comparison while scanning in index order.
        const CandidateResult* best = nullptr;
        for (const auto& c : record.candidates) {
            if (c.status == CandidateStatus::Ok && (!best || *c.h_mts > *best->h_mts)) best = &c;
        }
        record.best_index = best->index;
        record.best_score = *best->h_mts;
        record.best_source = best->source;

        try {
            const auto params = env::GaitParams::from_vector(best->policy->params);
            record.dtw_feedback = gait_feedback(params, cfg.task, cfg.env, s.reference, cfg.similarity,
                                                cfg.eval_rollouts,
                                                derive_seed(cfg.seed, {kFeedbackStream, static_cast<std::uint64_t>(n)}));
        } catch (const Error& e) {
            record.feedback_error = e.what();
        }

        const bool improved = s.manifest.rounds.empty() ||
                              record.best_score > s.manifest.rounds.back().best_so_far_score;
        if (improved) {
            record.best_so_far_score = record.best_score;
            record.best_so_far_source = record.best_source;
            record.best_so_far_round = n;
        } else {
            const auto& prev = s.manifest.rounds.back();
            record.best_so_far_score = prev.best_so_far_score;
            record.best_so_far_source = prev.best_so_far_source;
            record.best_so_far_round = prev.best_so_far_round;
        }

        s.context.feedback_history.push_back(feedback_block(record));
        s.manifest.rounds.push_back(std::move(record));
        const auto& done = s.manifest.rounds.back();
        s.manifest.final_score = done.best_so_far_score;
        s.manifest.final_reward_source = done.best_so_far_source;
        s.manifest.final_round = done.best_so_far_round;
        persist(s, &done);
        touch_metadata(s.out, "round_persisted", n);
        log(control, "round " + std::to_string(n) + ": best #" + std::to_string(done.best_index) +
                         " h_mts " + format_fixed(done.best_score, 4) + ", best so far " +
                         format_fixed(done.best_so_far_score, 4));

        if (control.stop_after_rounds && s.manifest.rounds.size() >= *control.stop_after_rounds) break;
    }
    if (s.manifest.complete()) touch_metadata(s.out, "finished", 0);
    return s.manifest;
}

}  // namespace

TrajectorySet prepare_reference(const TrajectorySet& raw) {
    validate(raw);
    if (raw.space == Space::Sim3d) return normalize_bbox(project_sagittal(raw));
    return normalize_bbox(raw);
}

TrajectorySet prepare_robot(const TrajectorySet& sim3d, const TrajectorySet& reference) {
    TrajectorySet set = sim3d;
    const double robot_dt = sim3d.sample_period();
    const double ref_dt = reference.sample_period();
    if (robot_dt > 0.0 && ref_dt > robot_dt) {
        const auto stride = static_cast<std::size_t>(std::llround(ref_dt / robot_dt));
        if (stride > 1) set = subsample(set, stride);
    }
    set = project_sagittal(set);
    std::vector<std::string> names;
    for (const auto& traj : reference.joints) names.push_back(traj.joint_name);
    return normalize_bbox(select_joints(set, names));
}

FeedbackScores gait_feedback(const env::GaitParams& params, env::Task task,
                             const env::EnvConfig& env, const TrajectorySet& reference,
                             const SimilarityOptions& options, std::size_t n_eval,
                             std::uint64_t seed) {
    std::vector<std::map<std::string, double>> per_rollout;
    per_rollout.reserve(n_eval);
    for (std::size_t e = 0; e < n_eval; ++e) {
        const auto r = env::rollout(params, task, env, derive_seed(seed, {e}));
        const auto robot = prepare_robot(r.keypoints, reference);
        std::map<std::string, double> scores;
        for (const auto& ref : reference.joints) {
            scores[ref.joint_name] = joint_similarity(robot.at(ref.joint_name), ref, options);
        }
        per_rollout.push_back(std::move(scores));
    }
    return aggregate_feedback(per_rollout);
}

std::unique_ptr<llm::ChatBackend> make_backend(const RunConfig& config) {
    if (config.backend == "mock") {
        if (config.mock_script.empty()) throw Error(ErrorCode::Config, "mock backend needs llm.mock_script");
        return std::make_unique<llm::MockBackend>(llm::MockBackend::load_script(config.mock_script));
    }
    return std::make_unique<llm::HttpBackend>(config.http);
}

RunManifest run(const RunConfig& input, llm::ChatBackend& backend, const fs::path& out_dir,
                const RunControl& control) {
    if (fs::exists(out_dir / "manifest.json")) {
        throw Error(ErrorCode::Config, out_dir.string() + " already holds a run; resume it instead");
    }
    RunConfig config = input;
    config.reference = fs::absolute(config.reference).lexically_normal();
    if (!config.mock_script.empty()) config.mock_script = fs::absolute(config.mock_script).lexically_normal();

    fs::create_directories(out_dir / "rounds");
    Session s = open_session(config, out_dir);
    const std::string snapshot = format_config(config);
    write_file(out_dir / "config.txt", snapshot);

    auto& m = s.manifest;
    m.config = config_entries(config);
    m.config_hash = sha256_hex(snapshot);
    m.seed = config.seed;
    m.task = config.task;
    m.backend = backend.name();
    m.temperature = backend.temperature();
    m.similarity = config.similarity;
    m.eval_rollouts = config.eval_rollouts;
    m.planned_rounds = config.rounds;
    persist(s, nullptr);
    touch_metadata(out_dir, "started", 0);
    return drive(s, backend, control);
}

RunManifest resume(const fs::path& out_dir, llm::ChatBackend& backend, const RunControl& control) {
    const std::string snapshot = read_file(out_dir / "config.txt");
    const RunConfig config = parse_config(snapshot);
    RunManifest manifest = load_manifest(out_dir / "manifest.json");
    if (manifest.config_hash != sha256_hex(snapshot)) {
        throw Error(ErrorCode::Config, "config snapshot does not match the manifest's config hash");
    }
    Session s = open_session(config, out_dir);
    s.manifest = std::move(manifest);
    for (const auto& r : s.manifest.rounds) s.context.feedback_history.push_back(feedback_block(r));
    touch_metadata(out_dir, "resumed", static_cast<int>(s.manifest.rounds.size()) + 1);
    return drive(s, backend, control);
}

double human_normalized_score(double method, double sparse, double human) {
    if (human == sparse) {
        throw Error(ErrorCode::UndefinedDenominator,
                    "human normalized score is undefined when the human and sparse baselines are equal");
    }
    return (method - sparse) / std::abs(human - sparse);
}

}  // namespace v2r::orch
