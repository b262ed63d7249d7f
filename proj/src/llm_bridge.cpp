#include "v2r/llm_bridge.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <utility>

#include <json.hpp>

#include "v2r/error.hpp"
#include "v2r/parallel.hpp"

namespace v2r::llm {

namespace {

constexpr std::string_view kFence = "```";
constexpr std::size_t kWorstJointsShown = 2;

std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r\n");
    return s.substr(first, last - first + 1);
}

std::string fenced(std::string_view source) {
    std::string out = "```reward\n";
    out += source;
    out += "\n```";
    return out;
}

std::string format_score(double v) { return format_fixed(v, 4); }

std::string feedback_message(const FeedbackBlock& block) {
    std::ostringstream os;
    os << "Round " << block.round << " result.\n";
    os << "The reward program above was the best of this round. A policy trained on it reached "
          "H_mts = "
       << format_score(block.best_score) << " on the task metric (higher is better).\n\n";
    if (!block.feedback_error.empty() || block.dtw_scores.empty()) {
        os << "Gait similarity to the reference could not be computed: " << block.feedback_error
           << "\n\n";
        os << "Revise the reward program so the policy produces a regular, periodic gait that "
              "follows the reference motion while keeping the task score high.\n";
    } else {
        os << "Per-joint DTW distance between the policy's gait and the reference (lower is "
              "closer):\n";
        // std::map iterates in name order.
        for (const auto& [joint, score] : block.dtw_scores) {
            os << joint << ": " << format_fixed(score, 2) << "\n";
        }
        std::vector<std::pair<std::string, double>> ranked(block.dtw_scores.begin(),
                                                           block.dtw_scores.end());
        std::stable_sort(ranked.begin(), ranked.end(),
                         [](const auto& a, const auto& b) { return a.second > b.second; });
        ranked.resize(std::min(ranked.size(), kWorstJointsShown));
        os << "\nLargest distances: ";
        for (std::size_t i = 0; i < ranked.size(); ++i) {
            if (i) os << ", ";
            os << ranked[i].first;
        }
        os << ".\n";
        os << "Revise the reward program to reduce the DTW distance of the joints with the "
              "highest scores while keeping the task score high.\n";
    }
    os << "Reply with exactly one fenced code block tagged `reward`.";
    return os.str();
}

}  // namespace

std::string task_description(env::Task task) {
    switch (task) {
        case env::Task::VelocityTracking:
            return "The legged robot must walk so that its horizontal body velocity matches a "
                   "commanded target velocity (target_vel_x, target_vel_y), sampled at the start "
                   "of each episode. Performance is measured by the mean absolute velocity "
                   "error over the episode. The gait should resemble the reference motion.";
        case env::Task::RunFast:
            return "The legged robot must run forward along +x as fast as possible. Performance "
                   "is measured by the mean forward body velocity over the episode. The gait "
                   "should resemble the reference motion.";
    }
    return {};
}

std::string default_generation_rules() {
    return "- Write the reward in the reward language below; no other language is accepted.\n"
           "- The program is evaluated once per simulation step and the values are summed "
           "over the episode.\n"
           "- Use only the state variables listed in the environment description.\n"
           "- Division by a value whose magnitude is below 1e-9 is an error; guard divisors.\n"
           "- Keep individual terms bounded (for example with exp(-x), tanh or clamp) so that "
           "no single term dominates.\n"
           "- Respond with a single fenced code block tagged `reward` containing the program.";
}

PromptContext make_context(env::Task task, const TrajectorySet& reference, int precision) {
    PromptContext ctx;
    ctx.task_description = task_description(task);
    ctx.env_schema_text = env::schema(task).describe() + "\nReward language grammar:\n" +
                          std::string(dsl::grammar_text());
    ctx.generation_rules = default_generation_rules();
    ctx.trajectory_text = serialize_for_prompt(reference, precision);
    ctx.reference_sample_period = reference.sample_period();
    return ctx;
}

std::vector<Message> build_initial_prompt(const PromptContext& ctx) {
    if (!ctx.feedback_history.empty()) {
        throw Error(ErrorCode::Precondition, "initial prompt requires an empty feedback history");
    }
    std::string system =
        "You design reward functions for reinforcement learning of legged locomotion. A policy "
        "is optimized to maximize the summed per-step reward you write.\n\nRules:\n";
    system += ctx.generation_rules;
    system += "\n\nEnvironment:\n";
    system += ctx.env_schema_text;

    std::ostringstream user;
    user << "Task:\n" << ctx.task_description << "\n\n";
    user << "Reference motion, extracted from a video of the desired gait. Each line lists one "
            "joint's (x, y) positions over time in the sagittal plane, normalized to [0, 1] "
            "(x forward, y up)";
    if (ctx.reference_sample_period > 0.0) {
        user << ", one sample every " << format_fixed(ctx.reference_sample_period, 4) << " s";
    }
    user << ":\n" << ctx.trajectory_text << "\n";
    user << "Write a reward program that makes the robot solve the task with a gait like the "
            "reference. Reply with exactly one fenced code block tagged `reward`, for example:\n"
         << fenced("let e = abs(root_height - 0.9)\nexp(-e)");
    return {{"system", std::move(system)}, {"user", user.str()}};
}

std::vector<Message> build_feedback_prompt(const PromptContext& ctx) {
    if (ctx.feedback_history.empty()) {
        throw Error(ErrorCode::Precondition, "feedback prompt requires at least one feedback block");
    }
    PromptContext base = ctx;
    base.feedback_history.clear();
    auto messages = build_initial_prompt(base);
    for (const auto& block : ctx.feedback_history) {
        messages.push_back({"assistant", fenced(block.best_reward_source)});
        messages.push_back({"user", feedback_message(block)});
    }
    return messages;
}

std::string extract_code(std::string_view response) {
    std::optional<std::string_view> untagged;
    std::size_t pos = 0;
    while (true) {
        const auto open = response.find(kFence, pos);
        if (open == std::string_view::npos) break;
        const auto eol = response.find('\n', open);
        if (eol == std::string_view::npos) break;
        const auto close = response.find(kFence, eol + 1);
        if (close == std::string_view::npos) break;
        const auto tag = trim(response.substr(open + kFence.size(), eol - open - kFence.size()));
        const auto body = trim(response.substr(eol + 1, close - eol - 1));
        if (tag == "reward") return std::string(body);
        if (tag.empty() && !untagged) untagged = body;
        pos = close + kFence.size();
    }
    if (untagged) return std::string(*untagged);
    throw Error(ErrorCode::NoCodeBlock, "response contains no fenced code block");
}

std::string_view to_string(ParseStatus status) noexcept {
    switch (status) {
        case ParseStatus::Ok: return "ok";
        case ParseStatus::NoCodeBlock: return "no_code_block";
        case ParseStatus::ParseError: return "parse_error";
        case ParseStatus::CheckError: return "check_error";
    }
    return "unknown";
}

CandidateSource interpret_response(std::size_t index, std::string raw_response,
                                   std::span<const std::string> variables) {
    CandidateSource c;
    c.index = index;
    c.raw_response = std::move(raw_response);
    try {
        c.extracted_source = extract_code(c.raw_response);
    } catch (const Error& e) {
        c.parse_status = ParseStatus::NoCodeBlock;
        c.error_detail = e.what();
        return c;
    }
    dsl::ParsedProgram parsed;
    try {
        parsed = dsl::parse(*c.extracted_source);
    } catch (const Error& e) {
        c.parse_status = ParseStatus::ParseError;
        c.error_detail = e.what();
        return c;
    }
    try {
        c.program = dsl::check(parsed, variables);
        c.parse_status = ParseStatus::Ok;
    } catch (const Error& e) {
        c.parse_status = ParseStatus::CheckError;
        c.error_detail = e.what();
    }
    return c;
}

MockBackend::MockBackend(std::vector<Entry> entries) {
    for (auto& e : entries) {
        const auto key = std::make_pair(e.round, e.index);
        if (responses_.contains(key)) {
            throw Error(ErrorCode::MalformedRecord,
                        "mock script has two responses for round " + std::to_string(e.round) +
                            " index " + std::to_string(e.index));
        }
        responses_.emplace(key, std::move(e.response_text));
    }
}

std::vector<MockBackend::Entry> MockBackend::parse_script(std::string_view text) {
    std::vector<Entry> entries;
    std::istringstream in{std::string(text)};
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        try {
            const auto j = nlohmann::json::parse(line);
            Entry e;
            e.round = j.at("round").get<int>();
            e.index = j.at("index").get<std::size_t>();
            e.response_text = j.at("response_text").get<std::string>();
            entries.push_back(std::move(e));
        } catch (const nlohmann::json::exception& ex) {
            throw Error(ErrorCode::MalformedRecord,
                        "mock script line " + std::to_string(line_no) + ": " + ex.what());
        }
    }
    return entries;
}

std::vector<MockBackend::Entry> MockBackend::load_script(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::FileNotFound, "cannot open mock script " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_script(buf.str());
}

std::string MockBackend::complete(const std::vector<Message>&, const RequestTag& tag) {
    {
        std::lock_guard lock(mu_);
        requests_.push_back(tag);
    }
    const auto it = responses_.find({tag.round, tag.index});
    if (it == responses_.end()) {
        throw Error(ErrorCode::Transport, "mock script has no response for round " +
                                              std::to_string(tag.round) + " index " +
                                              std::to_string(tag.index));
    }
    return it->second;
}

std::vector<RequestTag> MockBackend::requests() const {
    std::lock_guard lock(mu_);
    return requests_;
}

std::vector<CandidateSource> sample_rewards(const std::vector<Message>& messages, std::size_t k,
                                            ChatBackend& backend,
                                            std::span<const std::string> variables, int round,
                                            std::size_t first_index, std::size_t parallelism) {
    if (k == 0) throw Error(ErrorCode::InvalidArgument, "sample count K must be >= 1");
    std::vector<CandidateSource> out(k);
    parallel_for(k, std::max<std::size_t>(1, parallelism), [&](std::size_t i) {
        const std::size_t index = first_index + i;
        out[i] = interpret_response(index, backend.complete(messages, {round, index}), variables);
    });
    return out;
}

}  // namespace v2r::llm
