#pragma once

// Run configuration: a `key = value` text file, `#` starts a comment.
// Relative paths resolve against the config file's directory.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "v2r/gait_env.hpp"
#include "v2r/llm_bridge.hpp"
#include "v2r/similarity.hpp"
#include "v2r/trainer.hpp"

namespace v2r {

struct RunConfig {
    env::Task task = env::Task::VelocityTracking;
    std::filesystem::path reference;
    std::size_t rounds = 5;
    std::size_t samples = 16;
    std::size_t eval_rollouts = 8;
    std::uint64_t seed = 0;

    env::EnvConfig env;
    train::CemOptions cem;
    std::size_t train_budget = 2000;
    std::size_t train_workers = 1;  // candidates trained concurrently

    SimilarityOptions similarity;
    int prompt_precision = 2;

    std::string backend = "http";  // "http" or "mock"
    std::filesystem::path mock_script;
    llm::HttpBackendConfig http;
    std::size_t llm_parallelism = 4;
};

/// Throws Error(Config) on unknown keys, malformed values or duplicates.
RunConfig parse_config(std::string_view text, const std::filesystem::path& base_dir = {});
RunConfig load_config(const std::filesystem::path& path);

/// Every setting as ordered (key, value) pairs; parse_config accepts the
/// rendered form back unchanged.
std::vector<std::pair<std::string, std::string>> config_entries(const RunConfig& config);
std::string format_config(const RunConfig& config);

/// Test profile: 3 rounds of 2 samples.
RunConfig test_profile(RunConfig config);

}  // namespace v2r
