#pragma once

// Prompt assembly, reward sampling and response extraction for a
// chat-completion model. Backends: OpenAI-compatible HTTP and a scripted
// mock keyed by (round, sample index).

#include <chrono>
#include <cstddef>
#include <filesystem>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "v2r/gait_env.hpp"
#include "v2r/reward_dsl.hpp"
#include "v2r/trajectory.hpp"

namespace v2r::llm {

struct Message {
    std::string role;  // "system", "user" or "assistant"
    std::string content;

    friend bool operator==(const Message&, const Message&) = default;
};

struct FeedbackBlock {
    int round = 1;
    std::string best_reward_source;
    double best_score = 0.0;
    std::map<std::string, double> dtw_scores;  // empty iff feedback_error is set
    std::string feedback_error;
};

struct PromptContext {
    std::string task_description;  // what the behavior should achieve
    std::string env_schema_text;   // variable catalog + reward grammar
    std::string generation_rules;  // how rewards must be written
    std::string trajectory_text;   // serialized reference keypoints
    double reference_sample_period = 0.0;  // seconds per reference sample, 0 if unknown
    std::vector<FeedbackBlock> feedback_history;
};

std::string task_description(env::Task task);
std::string default_generation_rules();

/// Context for round 1 from a task and a normalized reference set.
PromptContext make_context(env::Task task, const TrajectorySet& reference, int precision = 2);

/// System message (rules, grammar, schema) + user message (task, reference
/// trajectories, output-format instruction). Requires an empty history.
std::vector<Message> build_initial_prompt(const PromptContext& ctx);

/// Initial prompt plus an assistant/user pair per completed round. Requires
/// a non-empty history.
std::vector<Message> build_feedback_prompt(const PromptContext& ctx);

/// Contents of the first fenced block tagged `reward`, else of the first
/// untagged fenced block, trimmed. Throws Error(NoCodeBlock).
std::string extract_code(std::string_view response);

enum class ParseStatus { Ok, NoCodeBlock, ParseError, CheckError };

std::string_view to_string(ParseStatus status) noexcept;

struct CandidateSource {
    std::size_t index = 0;
    std::string raw_response;
    std::optional<std::string> extracted_source;
    ParseStatus parse_status = ParseStatus::NoCodeBlock;
    std::string error_detail;
    std::optional<dsl::RewardProgram> program;  // set iff parse_status == Ok
};

/// Extracts, parses and checks one response.
CandidateSource interpret_response(std::size_t index, std::string raw_response,
                                   std::span<const std::string> variables);

struct RequestTag {
    int round = 1;
    std::size_t index = 0;
};

class ChatBackend {
public:
    virtual ~ChatBackend() = default;
    /// Returns the assistant message text. Throws Error(Transport) or
    /// Error(MalformedEnvelope).
    virtual std::string complete(const std::vector<Message>& messages, const RequestTag& tag) = 0;
    [[nodiscard]] virtual std::string name() const = 0;
    [[nodiscard]] virtual double temperature() const { return 0.0; }
};

/// Canned responses keyed by (round, sample index).
class MockBackend final : public ChatBackend {
public:
    struct Entry {
        int round = 1;
        std::size_t index = 0;
        std::string response_text;
    };

    explicit MockBackend(std::vector<Entry> entries);

    /// Line-delimited records {"round", "index", "response_text"}.
    static std::vector<Entry> parse_script(std::string_view text);
    static std::vector<Entry> load_script(const std::filesystem::path& path);

    std::string complete(const std::vector<Message>& messages, const RequestTag& tag) override;
    [[nodiscard]] std::string name() const override { return "mock"; }

    /// Requests seen so far, in arrival order.
    [[nodiscard]] std::vector<RequestTag> requests() const;

private:
    std::map<std::pair<int, std::size_t>, std::string> responses_;
    mutable std::mutex mu_;
    std::vector<RequestTag> requests_;
};

struct RetryPolicy {
    int max_retries = 3;
    std::chrono::milliseconds initial_delay{500};
    double backoff_factor = 2.0;
};

struct HttpBackendConfig {
    std::string base_url = "https://api.openai.com";
    std::string path = "/v1/chat/completions";
    std::string model = "gpt-4o";
    double temperature = 1.0;
    std::string api_key_env = "OPENAI_API_KEY";
    RetryPolicy retry;
    int timeout_seconds = 120;
};

/// Request body for one completion (sample count 1).
std::string build_request_body(const HttpBackendConfig& config, const std::vector<Message>& messages);
/// First choice's message content. Throws Error(MalformedEnvelope).
std::string parse_response_body(std::string_view body);

class HttpBackend final : public ChatBackend {
public:
    using Sleeper = std::function<void(std::chrono::milliseconds)>;

    explicit HttpBackend(HttpBackendConfig config, Sleeper sleeper = {});

    std::string complete(const std::vector<Message>& messages, const RequestTag& tag) override;
    [[nodiscard]] std::string name() const override { return "http"; }
    [[nodiscard]] double temperature() const override { return config_.temperature; }

private:
    HttpBackendConfig config_;
    Sleeper sleeper_;
};

/// Requests K independent completions (indices first_index .. first_index+K-1)
/// and interprets each. Succeeds even when every candidate fails to parse;
/// transport failures propagate.
std::vector<CandidateSource> sample_rewards(const std::vector<Message>& messages, std::size_t k,
                                            ChatBackend& backend,
                                            std::span<const std::string> variables, int round,
                                            std::size_t first_index = 0,
                                            std::size_t parallelism = 4);

}  // namespace v2r::llm
