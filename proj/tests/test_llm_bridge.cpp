#include <gtest/gtest.h>

#include <atomic>
#include <cstdlib>
#include <random>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "v2r/llm_bridge.hpp"

using namespace v2r;
using namespace v2r::llm;

namespace {

TrajectorySet tiny_reference() {
    TrajectorySet set;
    set.space = Space::Image2d;
    set.normalized = true;
    for (const char* name : {"root", "knee_l"}) {
        Trajectory t{name, {}, 0.04};
        for (int i = 0; i < 5; ++i) t.points.push_back({0.1 * i, 0.5 + 0.05 * i, std::nullopt});
        set.joints.push_back(t);
    }
    return set;
}

PromptContext context() { return make_context(env::Task::VelocityTracking, tiny_reference()); }

FeedbackBlock block(int round, std::map<std::string, double> scores) {
    return {round, "root_vel_x", -0.25, std::move(scores), {}};
}

const std::vector<std::string>& vt_vars() {
    static const auto names = env::schema(env::Task::VelocityTracking).names();
    return names;
}

// Local chat-completions stand-in that fails a configurable number of times first.
class FakeServer {
public:
    explicit FakeServer(int fail_status, int failures) : fail_status_(fail_status), failures_(failures) {
        server_.Post("/v1/chat/completions", [this](const httplib::Request& req, httplib::Response& res) {
            last_auth_ = req.get_header_value("Authorization");
            last_body_ = req.body;
            if (calls_++ < failures_) {
                res.status = fail_status_;
                return;
            }
            res.set_content(reply_, "application/json");
        });
        port_ = server_.bind_to_any_port("127.0.0.1");
        thread_ = std::thread([this] { server_.listen_after_bind(); });
        server_.wait_until_ready();
    }
    ~FakeServer() {
        server_.stop();
        thread_.join();
    }

    [[nodiscard]] std::string url() const { return "http://127.0.0.1:" + std::to_string(port_); }

    std::string reply_ = R"({"choices":[{"message":{"role":"assistant","content":"```reward\nroot_vel_x\n```"}}]})";
    std::atomic<int> calls_{0};
    std::string last_auth_;
    std::string last_body_;

private:
    httplib::Server server_;
    int fail_status_;
    int failures_;
    int port_ = 0;
    std::thread thread_;
};

HttpBackendConfig local_config(const FakeServer& s) {
    HttpBackendConfig cfg;
    cfg.base_url = s.url();
    cfg.api_key_env = "V2R_TEST_API_KEY";
    cfg.timeout_seconds = 5;
    return cfg;
}

}  // namespace

TEST(InitialPrompt, DeterministicAndContainsParts) {
    const auto ctx = context();
    const auto a = build_initial_prompt(ctx);
    const auto b = build_initial_prompt(ctx);
    EXPECT_EQ(a, b);
    ASSERT_EQ(a.size(), 2u);
    EXPECT_EQ(a[0].role, "system");
    EXPECT_EQ(a[1].role, "user");
    EXPECT_NE(a[0].content.find(std::string(dsl::grammar_text())), std::string::npos);
    EXPECT_NE(a[0].content.find(env::schema(env::Task::VelocityTracking).describe()), std::string::npos);
    EXPECT_NE(a[0].content.find(ctx.generation_rules), std::string::npos);
    EXPECT_NE(a[1].content.find(ctx.trajectory_text), std::string::npos);
    EXPECT_NE(a[1].content.find(ctx.task_description), std::string::npos);
    EXPECT_NE(a[1].content.find("```reward"), std::string::npos);
    EXPECT_NE(a[1].content.find("0.0400 s"), std::string::npos);
}

TEST(InitialPrompt, TaskDescriptionsDiffer) {
    EXPECT_NE(task_description(env::Task::VelocityTracking), task_description(env::Task::RunFast));
    EXPECT_FALSE(default_generation_rules().empty());
}

TEST(InitialPrompt, RejectsHistory) {
    auto ctx = context();
    ctx.feedback_history.push_back(block(1, {{"hip", 1.0}}));
    try {
        build_initial_prompt(ctx);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::Precondition);
    }
}

TEST(FeedbackPrompt, ScoresInNameOrder) {
    auto ctx = context();
    ctx.feedback_history.push_back(block(1, {{"knee", 2.0}, {"hip", 5.0}}));
    const auto msgs = build_feedback_prompt(ctx);
    ASSERT_EQ(msgs.size(), 4u);
    EXPECT_EQ(msgs[2].role, "assistant");
    EXPECT_EQ(msgs[2].content, "```reward\nroot_vel_x\n```");
    const auto& fb = msgs[3].content;
    const auto hip = fb.find("hip: 5.00");
    const auto knee = fb.find("knee: 2.00");
    ASSERT_NE(hip, std::string::npos);
    ASSERT_NE(knee, std::string::npos);
    EXPECT_LT(hip, knee);
    EXPECT_NE(fb.find("-0.2500"), std::string::npos);
    EXPECT_NE(fb.find("hip"), fb.rfind("hip"));  // worst joint is named again in the instruction
}

TEST(FeedbackPrompt, OnePairPerRound) {
    auto ctx = context();
    ctx.feedback_history.push_back(block(1, {{"hip", 1.0}}));
    ctx.feedback_history.push_back(block(2, {{"hip", 0.5}}));
    const auto msgs = build_feedback_prompt(ctx);
    ASSERT_EQ(msgs.size(), 6u);
    const auto initial = build_initial_prompt(context());
    EXPECT_EQ(msgs[0], initial[0]);
    EXPECT_EQ(msgs[1], initial[1]);
    for (std::size_t i = 2; i < 6; i += 2) {
        EXPECT_EQ(msgs[i].role, "assistant");
        EXPECT_EQ(msgs[i + 1].role, "user");
    }
    EXPECT_NE(msgs[3].content.find("hip: 1.00"), std::string::npos);
    EXPECT_NE(msgs[5].content.find("hip: 0.50"), std::string::npos);
}

TEST(FeedbackPrompt, ErrorReplacesScores) {
    auto ctx = context();
    ctx.feedback_history.push_back({1, "root_vel_x", -1.0, {}, "no period in joint 'hip'"});
    const auto msgs = build_feedback_prompt(ctx);
    EXPECT_NE(msgs[3].content.find("no period in joint 'hip'"), std::string::npos);
}

TEST(FeedbackPrompt, EmptyHistoryIsPreconditionError) {
    try {
        build_feedback_prompt(context());
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::Precondition);
    }
}

TEST(ExtractCode, Examples) {
    EXPECT_EQ(extract_code("here you go\n```reward\nvx\n```"), "vx");
    EXPECT_EQ(extract_code("```reward\nfirst\n```\n```reward\nsecond\n```"), "first");
    EXPECT_EQ(extract_code("```\nplain\n```\n```reward\ntagged\n```"), "tagged");
    EXPECT_EQ(extract_code("```python\nx = 1\n```\n```\nplain\n```"), "plain");
    EXPECT_EQ(extract_code("```reward\n  \n  vx + 1  \n\n```"), "vx + 1");
    EXPECT_THROW(extract_code("just prose, no code"), Error);
    EXPECT_THROW(extract_code("```reward\nunterminated"), Error);
    EXPECT_THROW(extract_code("```python\nx = 1\n```"), Error);
}

TEST(ExtractCode, FenceThenExtractIsIdentity) {
    std::mt19937_64 rng(61);
    const std::string alphabet = "abcxyz019 +-*/()=_.,\n\t<>";
    for (int trial = 0; trial < 500; ++trial) {
        std::string s;
        const auto len = 1 + rng() % 40;
        for (std::size_t i = 0; i < len; ++i) s += alphabet[rng() % alphabet.size()];
        const auto first = s.find_first_not_of(" \t\n");
        if (first == std::string::npos) continue;
        s = s.substr(first, s.find_last_not_of(" \t\n") - first + 1);
        EXPECT_EQ(extract_code("Sure:\n```reward\n" + s + "\n```\nDone."), s);
    }
}

TEST(InterpretResponse, StatusesAndDetails) {
    const auto ok = interpret_response(0, "```reward\nroot_vel_x\n```", vt_vars());
    EXPECT_EQ(ok.parse_status, ParseStatus::Ok);
    ASSERT_TRUE(ok.program);
    EXPECT_EQ(ok.program->referenced_vars(), std::set<std::string>{"root_vel_x"});

    const auto none = interpret_response(1, "I cannot help.", vt_vars());
    EXPECT_EQ(none.parse_status, ParseStatus::NoCodeBlock);
    EXPECT_FALSE(none.extracted_source);
    EXPECT_FALSE(none.program);

    const auto syntax = interpret_response(2, "```reward\n1 +\n```", vt_vars());
    EXPECT_EQ(syntax.parse_status, ParseStatus::ParseError);
    ASSERT_TRUE(syntax.extracted_source);
    EXPECT_NE(syntax.error_detail.find("1:4"), std::string::npos) << syntax.error_detail;

    const auto unknown = interpret_response(3, "```reward\nvq\n```", vt_vars());
    EXPECT_EQ(unknown.parse_status, ParseStatus::CheckError);
    EXPECT_NE(unknown.error_detail.find("vq"), std::string::npos);
    EXPECT_EQ(to_string(ParseStatus::CheckError), "check_error");
}

TEST(MockBackendTest, SampleRewardsStatuses) {
    MockBackend mock({{1, 0, "```reward\nroot_vel_x\n```"},
                      {1, 1, "```reward\n-abs(root_vel_x - target_vel_x)\n```"},
                      {1, 2, "no code here"},
                      {1, 3, "```reward\n1 +\n```"}});
    const auto msgs = build_initial_prompt(context());
    const auto two = sample_rewards(msgs, 2, mock, vt_vars(), 1);
    ASSERT_EQ(two.size(), 2u);
    for (std::size_t i = 0; i < 2; ++i) {
        EXPECT_EQ(two[i].index, i);
        EXPECT_EQ(two[i].parse_status, ParseStatus::Ok);
    }
    const auto rest = sample_rewards(msgs, 2, mock, vt_vars(), 1, 2);
    EXPECT_EQ(rest[0].index, 2u);
    EXPECT_EQ(rest[0].parse_status, ParseStatus::NoCodeBlock);
    EXPECT_EQ(rest[1].parse_status, ParseStatus::ParseError);
    EXPECT_EQ(mock.requests().size(), 4u);
}

TEST(MockBackendTest, DeterministicAcrossParallelism) {
    std::vector<MockBackend::Entry> entries;
    for (std::size_t i = 0; i < 8; ++i) {
        entries.push_back({2, i, "```reward\nroot_vel_x * " + std::to_string(i + 1) + "\n```"});
    }
    MockBackend a(entries), b(entries);
    const auto msgs = build_initial_prompt(context());
    const auto ra = sample_rewards(msgs, 8, a, vt_vars(), 2, 0, 1);
    const auto rb = sample_rewards(msgs, 8, b, vt_vars(), 2, 0, 8);
    for (std::size_t i = 0; i < 8; ++i) {
        EXPECT_EQ(ra[i].index, i);
        EXPECT_EQ(ra[i].raw_response, rb[i].raw_response);
        EXPECT_EQ(ra[i].extracted_source, rb[i].extracted_source);
    }
}

TEST(MockBackendTest, MissingEntryAndBadK) {
    MockBackend mock({{1, 0, "```reward\nroot_vel_x\n```"}});
    const auto msgs = build_initial_prompt(context());
    try {
        sample_rewards(msgs, 2, mock, vt_vars(), 1);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::Transport);
    }
    EXPECT_THROW(sample_rewards(msgs, 0, mock, vt_vars(), 1), Error);
}

TEST(MockBackendTest, ScriptParsing) {
    const auto entries = MockBackend::parse_script(
        "{\"round\": 1, \"index\": 0, \"response_text\": \"a\"}\n\n"
        "{\"round\": 2, \"index\": 1, \"response_text\": \"b\\nc\"}\n");
    ASSERT_EQ(entries.size(), 2u);
    EXPECT_EQ(entries[1].round, 2);
    EXPECT_EQ(entries[1].response_text, "b\nc");
    EXPECT_THROW(MockBackend::parse_script("{\"round\": 1}\n"), Error);
    EXPECT_THROW(MockBackend::parse_script("not json\n"), Error);
    EXPECT_THROW(MockBackend({{1, 0, "a"}, {1, 0, "b"}}), Error);
    EXPECT_THROW(MockBackend::load_script("/nonexistent/script.jsonl"), Error);
}

TEST(HttpEnvelope, RequestBodyAndResponseParsing) {
    HttpBackendConfig cfg;
    cfg.model = "local-model";
    cfg.temperature = 0.7;
    const auto body = nlohmann::json::parse(build_request_body(cfg, {{"system", "s"}, {"user", "u"}}));
    EXPECT_EQ(body["model"], "local-model");
    EXPECT_EQ(body["n"], 1);
    EXPECT_DOUBLE_EQ(body["temperature"].get<double>(), 0.7);
    ASSERT_EQ(body["messages"].size(), 2u);
    EXPECT_EQ(body["messages"][1]["role"], "user");
    EXPECT_EQ(body["messages"][1]["content"], "u");

    EXPECT_EQ(parse_response_body(R"({"choices":[{"message":{"content":"hi"}}]})"), "hi");
    for (const char* bad : {"not json", "{}", R"({"choices":[]})", R"({"choices":[{"message":{}}]})",
                            R"({"choices":[{"message":{"content":3}}]})"}) {
        try {
            parse_response_body(bad);
            ADD_FAILURE() << bad;
        } catch (const Error& e) {
            EXPECT_EQ(e.code(), ErrorCode::MalformedEnvelope) << bad;
        }
    }
}

TEST(HttpBackendTest, SendsBearerAndReturnsContent) {
    FakeServer server(500, 0);
    ::setenv("V2R_TEST_API_KEY", "sk-test", 1);
    HttpBackend backend(local_config(server), [](std::chrono::milliseconds) {});
    const auto reply = backend.complete({{"user", "hello"}}, {1, 0});
    EXPECT_EQ(reply, "```reward\nroot_vel_x\n```");
    EXPECT_EQ(server.last_auth_, "Bearer sk-test");
    EXPECT_EQ(nlohmann::json::parse(server.last_body_)["n"], 1);
    EXPECT_EQ(backend.temperature(), 1.0);
}

TEST(HttpBackendTest, RetriesServerErrorsWithBackoff) {
    for (int status : {500, 429, 503}) {
        FakeServer server(status, 2);
        std::vector<std::chrono::milliseconds> sleeps;
        HttpBackend backend(local_config(server), [&](std::chrono::milliseconds d) { sleeps.push_back(d); });
        EXPECT_NO_THROW(backend.complete({{"user", "x"}}, {1, 0}));
        EXPECT_EQ(server.calls_.load(), 3);
        ASSERT_EQ(sleeps.size(), 2u);
        EXPECT_EQ(sleeps[0].count(), 500);
        EXPECT_EQ(sleeps[1].count(), 1000);
    }
}

TEST(HttpBackendTest, GivesUpAfterRetries) {
    FakeServer server(500, 100);
    auto cfg = local_config(server);
    cfg.retry.max_retries = 2;
    HttpBackend backend(cfg, [](std::chrono::milliseconds) {});
    try {
        backend.complete({{"user", "x"}}, {3, 7});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::Transport);
        EXPECT_NE(std::string(e.what()).find("round 3 sample 7"), std::string::npos);
    }
    EXPECT_EQ(server.calls_.load(), 3);
}

TEST(HttpBackendTest, ClientErrorIsNotRetried) {
    FakeServer server(401, 100);
    HttpBackend backend(local_config(server), [](std::chrono::milliseconds) { ADD_FAILURE() << "slept"; });
    EXPECT_THROW(backend.complete({{"user", "x"}}, {1, 0}), Error);
    EXPECT_EQ(server.calls_.load(), 1);
}

TEST(HttpBackendTest, MalformedEnvelopeSurfaces) {
    FakeServer server(500, 0);
    server.reply_ = R"({"choices":"nope"})";
    HttpBackend backend(local_config(server), [](std::chrono::milliseconds) {});
    try {
        backend.complete({{"user", "x"}}, {1, 0});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::MalformedEnvelope);
    }
}

TEST(HttpBackendTest, UnreachableServerIsTransportError) {
    HttpBackendConfig cfg;
    cfg.base_url = "http://127.0.0.1:1";
    cfg.retry.max_retries = 1;
    cfg.timeout_seconds = 2;
    HttpBackend backend(cfg, [](std::chrono::milliseconds) {});
    try {
        backend.complete({{"user", "x"}}, {1, 0});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::Transport);
        EXPECT_NE(std::string(e.what()).find("2 attempt"), std::string::npos);
    }
    cfg.retry.max_retries = -1;
    EXPECT_THROW(HttpBackend{cfg}, Error);
}

TEST(HttpBackendTest, SampleRewardsOverHttp) {
    FakeServer server(500, 0);
    HttpBackend backend(local_config(server), [](std::chrono::milliseconds) {});
    const auto out = sample_rewards(build_initial_prompt(context()), 3, backend, vt_vars(), 1);
    ASSERT_EQ(out.size(), 3u);
    for (const auto& c : out) EXPECT_EQ(c.parse_status, ParseStatus::Ok);
    EXPECT_EQ(server.calls_.load(), 3);
}
