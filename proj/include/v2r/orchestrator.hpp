#pragma once

// The generate -> train -> select -> gait feedback -> refine loop, with
// per-round persistence under an output directory and resume support.
//
// Output directory layout:
//   config.txt                      settings snapshot (parse_config accepts it)
//   manifest.json                   deterministic run record, rewritten every round
//   metadata.json                   wall-clock timestamps
//   rounds/round_NN/prompt.json     messages sent
//   rounds/round_NN/responses.jsonl raw responses by sample index
//   rounds/round_NN/candidate_KK.reward
//   rounds/round_NN/record.json     the RoundRecord

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "v2r/config.hpp"
#include "v2r/gait_env.hpp"
#include "v2r/llm_bridge.hpp"
#include "v2r/similarity.hpp"
#include "v2r/trainer.hpp"
#include "v2r/trajectory.hpp"

namespace v2r::orch {

enum class CandidateStatus { Ok, ParseFailed, TrainFailed };

std::string_view to_string(CandidateStatus status) noexcept;
CandidateStatus candidate_status_from_string(std::string_view name);

struct PolicyRecord {
    std::vector<double> params;  // GaitParams::to_vector order
    std::vector<double> train_curve;
    std::size_t evals_used = 0;
    std::string train_status;
};

struct CandidateResult {
    std::size_t index = 0;
    std::string source;  // extracted program text, empty without a code block
    CandidateStatus status = CandidateStatus::ParseFailed;
    std::string parse_status;  // llm::ParseStatus name
    std::string error_detail;
    std::optional<double> h_mts;  // present iff status == Ok
    std::optional<PolicyRecord> policy;
};

struct RoundRecord {
    int round = 1;
    std::string prompt_digest;  // SHA-256 of the serialized prompt messages
    std::vector<CandidateResult> candidates;
    std::vector<CandidateResult> discarded_candidates;  // first batch when it failed entirely
    std::size_t best_index = 0;  // sample index of the round's best candidate
    double best_score = 0.0;     // its h_mts
    std::string best_source;
    FeedbackScores dtw_feedback;
    std::string feedback_error;  // set when similarity could not be computed
    double best_so_far_score = 0.0;
    std::string best_so_far_source;
    int best_so_far_round = 1;
};

struct RunManifest {
    std::vector<std::pair<std::string, std::string>> config;
    std::string config_hash;
    std::uint64_t seed = 0;
    env::Task task = env::Task::VelocityTracking;
    std::string backend;
    double temperature = 0.0;
    SimilarityOptions similarity;
    std::size_t eval_rollouts = 0;
    std::size_t planned_rounds = 0;
    std::vector<RoundRecord> rounds;
    std::string final_reward_source;
    double final_score = 0.0;
    int final_round = 0;

    [[nodiscard]] bool complete() const noexcept { return rounds.size() == planned_rounds; }
};

/// Serialized manifest; stable key order and number formatting.
std::string manifest_to_json(const RunManifest& manifest);
RunManifest manifest_from_json(std::string_view text);
RunManifest load_manifest(const std::filesystem::path& path);

/// Hex SHA-256 digest.
std::string sha256_hex(std::string_view data);

/// Reference ready for prompting and DTW: sim3d is projected to the
/// sagittal plane, then every set is bbox-normalized per frame.
TrajectorySet prepare_reference(const TrajectorySet& raw);

/// Robot keypoints from one rollout brought into the reference's sampling
/// rate, joint subset and normalization.
TrajectorySet prepare_robot(const TrajectorySet& sim3d, const TrajectorySet& reference);

/// Per-joint similarity of a policy against the reference, aggregated over
/// `n_eval` rollouts seeded derive_seed(seed, {e}).
FeedbackScores gait_feedback(const env::GaitParams& params, env::Task task,
                             const env::EnvConfig& env, const TrajectorySet& reference,
                             const SimilarityOptions& options, std::size_t n_eval,
                             std::uint64_t seed);

struct RunControl {
    /// Stop (as if interrupted) once this many rounds are persisted.
    std::optional<std::size_t> stop_after_rounds;
    std::function<void(std::string_view)> log;
};

/// Runs all rounds into `out_dir` (created; must not already hold a manifest).
RunManifest run(const RunConfig& config, llm::ChatBackend& backend,
                const std::filesystem::path& out_dir, const RunControl& control = {});

/// Continues a run from its last persisted round using the snapshot config.
RunManifest resume(const std::filesystem::path& out_dir, llm::ChatBackend& backend,
                   const RunControl& control = {});

/// Builds the backend named by the config.
std::unique_ptr<llm::ChatBackend> make_backend(const RunConfig& config);

/// (method - sparse) / |human - sparse|. Throws Error(UndefinedDenominator)
/// when human == sparse.
double human_normalized_score(double method, double sparse, double human);

struct Baselines {
    double sparse = 0.0;
    double human = 0.0;
};

struct Report {
    std::string text;
    std::string score_table_csv;
};

Report report(const RunManifest& manifest, const Baselines& baselines);

}  // namespace v2r::orch
