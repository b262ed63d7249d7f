#pragma once

// Policy training against a candidate reward program. The policy is a gait
// parameter vector; the default backend is the cross-entropy method.

#include <cstddef>
#include <cstdint>
#include <string_view>
#include <vector>

#include "v2r/gait_env.hpp"
#include "v2r/reward_dsl.hpp"

namespace v2r::train {

enum class TrainStatus { Ok, RewardError, BudgetExhausted };

std::string_view to_string(TrainStatus status) noexcept;

struct TrainedPolicy {
    env::GaitParams params;
    double h_mts = 0.0;
    std::vector<double> train_curve;  // best-so-far objective after each generation
    std::size_t evals_used = 0;       // rollouts consumed
    TrainStatus status = TrainStatus::Ok;
    std::string error_detail;         // first evaluation error, if any
};

struct CemOptions {
    std::size_t population = 32;
    double elite_fraction = 0.25;
    double init_sigma_fraction = 0.25;  // of each box width
    double sigma_floor = 1e-3;
    std::size_t rollouts_per_eval = 2;
    std::size_t h_mts_episodes = 10;
    double broken_fraction = 0.5;  // first-generation failure share that rejects a reward
    std::size_t workers = 1;
};

/// Interface so another optimizer can stand in for CEM.
class Trainer {
public:
    virtual ~Trainer() = default;
    virtual TrainedPolicy train(const dsl::RewardProgram& program, env::Task task,
                                std::size_t budget, std::uint64_t seed) const = 0;
};

class CemTrainer final : public Trainer {
public:
    explicit CemTrainer(env::EnvConfig env = {}, CemOptions options = {})
        : env_(env), options_(options) {}

    /// `budget` counts rollouts and must cover one full generation.
    TrainedPolicy train(const dsl::RewardProgram& program, env::Task task, std::size_t budget,
                        std::uint64_t seed) const override;

    [[nodiscard]] const env::EnvConfig& env_config() const noexcept { return env_; }
    [[nodiscard]] const CemOptions& options() const noexcept { return options_; }

private:
    env::EnvConfig env_;
    CemOptions options_;
};

/// Seed stream used for held-out h_mts evaluation of a trained policy.
std::uint64_t holdout_seed(std::uint64_t train_seed) noexcept;

}  // namespace v2r::train
