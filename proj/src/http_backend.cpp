#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include <cmath>
#include <cstdlib>
#include <thread>

#include <json.hpp>

#include "v2r/error.hpp"
#include "v2r/llm_bridge.hpp"

namespace v2r::llm {

namespace {

struct Attempt {
    bool retryable = false;
    std::string body;
    std::string failure;  // empty on success
};

// Splits "scheme://host[:port][/prefix]" so a path prefix in the base URL is kept.
std::pair<std::string, std::string> split_base_url(const std::string& url) {
    const auto scheme_end = url.find("://");
    const auto host_start = scheme_end == std::string::npos ? 0 : scheme_end + 3;
    const auto slash = url.find('/', host_start);
    if (slash == std::string::npos) return {url, ""};
    std::string prefix = url.substr(slash);
    while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
    return {url.substr(0, slash), prefix};
}

}  // namespace

std::string build_request_body(const HttpBackendConfig& config, const std::vector<Message>& messages) {
    nlohmann::json j;
    j["model"] = config.model;
    j["temperature"] = config.temperature;
    j["n"] = 1;
    auto& msgs = j["messages"] = nlohmann::json::array();
    for (const auto& m : messages) msgs.push_back({{"role", m.role}, {"content", m.content}});
    return j.dump();
}

std::string parse_response_body(std::string_view body) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(body);
    } catch (const nlohmann::json::parse_error& e) {
        throw Error(ErrorCode::MalformedEnvelope, std::string("response is not JSON: ") + e.what());
    }
    const auto* choices = j.is_object() && j.contains("choices") ? &j["choices"] : nullptr;
    if (!choices || !choices->is_array() || choices->empty()) {
        throw Error(ErrorCode::MalformedEnvelope, "response has no choices");
    }
    const auto& first = (*choices)[0];
    if (!first.is_object() || !first.contains("message") || !first["message"].is_object() ||
        !first["message"].contains("content") || !first["message"]["content"].is_string()) {
        throw Error(ErrorCode::MalformedEnvelope, "first choice has no message content");
    }
    return first["message"]["content"].get<std::string>();
}

HttpBackend::HttpBackend(HttpBackendConfig config, Sleeper sleeper)
    : config_(std::move(config)), sleeper_(std::move(sleeper)) {
    if (!sleeper_) sleeper_ = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
    if (config_.retry.max_retries < 0) {
        throw Error(ErrorCode::Config, "llm retry count must be >= 0");
    }
}

std::string HttpBackend::complete(const std::vector<Message>& messages, const RequestTag& tag) {
    const auto [host, prefix] = split_base_url(config_.base_url);
    const std::string path = prefix + config_.path;
    const std::string body = build_request_body(config_, messages);

    httplib::Headers headers;
    if (!config_.api_key_env.empty()) {
        if (const char* key = std::getenv(config_.api_key_env.c_str()); key && *key) {
            headers.emplace("Authorization", std::string("Bearer ") + key);
        }
    }

    auto attempt = [&]() -> Attempt {
        httplib::Client client(host);
        client.set_connection_timeout(config_.timeout_seconds, 0);
        client.set_read_timeout(config_.timeout_seconds, 0);
        client.set_write_timeout(config_.timeout_seconds, 0);
        auto res = client.Post(path, headers, body, "application/json");
        if (!res) return {true, {}, "request failed: " + httplib::to_string(res.error())};
        if (res->status == 200) return {false, res->body, {}};
        const bool retryable = res->status == 429 || res->status >= 500;
        return {retryable, {}, "HTTP " + std::to_string(res->status)};
    };

    auto delay = config_.retry.initial_delay;
    for (int i = 0;; ++i) {
        auto result = attempt();
        if (result.failure.empty()) return parse_response_body(result.body);
        if (!result.retryable || i >= config_.retry.max_retries) {
            throw Error(ErrorCode::Transport,
                        "round " + std::to_string(tag.round) + " sample " +
                            std::to_string(tag.index) + ": " + result.failure + " after " +
                            std::to_string(i + 1) + " attempt(s)");
        }
        sleeper_(delay);
        delay = std::chrono::milliseconds(static_cast<long long>(
            std::llround(static_cast<double>(delay.count()) * config_.retry.backoff_factor)));
    }
}

}  // namespace v2r::llm
