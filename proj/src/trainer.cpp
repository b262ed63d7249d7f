#include "v2r/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <random>

#include "v2r/error.hpp"
#include "v2r/parallel.hpp"
#include "v2r/seed.hpp"

namespace v2r::train {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr std::uint64_t kSampleStream = 0;
constexpr std::uint64_t kEpisodeStream = 1;
constexpr std::uint64_t kHoldoutStream = 2;

using Vec = std::array<double, env::GaitParams::kDims>;

}  // namespace

std::string_view to_string(TrainStatus status) noexcept {
    switch (status) {
        case TrainStatus::Ok: return "ok";
        case TrainStatus::RewardError: return "reward_error";
        case TrainStatus::BudgetExhausted: return "budget_exhausted";
    }
    return "unknown";
}

std::uint64_t holdout_seed(std::uint64_t train_seed) noexcept {
    return derive_seed(train_seed, {kHoldoutStream});
}

TrainedPolicy CemTrainer::train(const dsl::RewardProgram& program, env::Task task,
                                std::size_t budget, std::uint64_t seed) const {
    const auto& box = env::param_box();
    const std::size_t pop = options_.population;
    const std::size_t per_eval = std::max<std::size_t>(1, options_.rollouts_per_eval);
    const std::size_t gen_cost = pop * per_eval;
    if (pop < 2) throw Error(ErrorCode::InvalidArgument, "CEM population must be >= 2");
    if (budget < gen_cost) {
        throw Error(ErrorCode::InvalidArgument,
                    "budget of " + std::to_string(budget) + " rollouts is below one generation (" +
                        std::to_string(gen_cost) + ")");
    }
    const auto n_elite = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::ceil(options_.elite_fraction * static_cast<double>(pop))));

    Vec mean{};
    Vec sigma{};
    for (std::size_t d = 0; d < mean.size(); ++d) {
        mean[d] = 0.5 * (box.lo[d] + box.hi[d]);
        sigma[d] = options_.init_sigma_fraction * (box.hi[d] - box.lo[d]);
    }

    TrainedPolicy out;
    out.params = env::GaitParams::from_vector(mean);
    double best = kNegInf;
    bool collapsed = false;

    std::mt19937_64 rng(derive_seed(seed, {kSampleStream}));
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<Vec> samples(pop);
    std::vector<double> scores(pop);
    std::vector<std::optional<std::string>> errors(pop);

    for (std::size_t gen = 0; out.evals_used + gen_cost <= budget; ++gen) {
        for (auto& x : samples) {
            for (std::size_t d = 0; d < x.size(); ++d) {
                x[d] = std::clamp(mean[d] + sigma[d] * normal(rng), box.lo[d], box.hi[d]);
            }
        }
        // Common episode seeds within a generation so ranking compares like with like.
        std::vector<std::uint64_t> episode_seeds(per_eval);
        for (std::size_t r = 0; r < per_eval; ++r) {
            episode_seeds[r] = derive_seed(seed, {kEpisodeStream, gen, r});
        }

        parallel_for(pop, options_.workers, [&](std::size_t i) {
            errors[i].reset();
            try {
                const auto params = env::GaitParams::from_vector(samples[i]);
                double total = 0.0;
                for (auto s : episode_seeds) total += env::episode_return(params, task, env_, s, program);
                scores[i] = total / static_cast<double>(per_eval);
            } catch (const Error& e) {
                scores[i] = kNegInf;
                errors[i] = e.what();
            }
        });
        out.evals_used += gen_cost;

        std::size_t failures = 0;
        for (const auto& e : errors) {
            if (!e) continue;
            if (out.error_detail.empty()) out.error_detail = *e;
            ++failures;
        }
        if (gen == 0 && static_cast<double>(failures) >= options_.broken_fraction * static_cast<double>(pop)) {
            out.status = TrainStatus::RewardError;
            out.train_curve.push_back(best);
            return out;
        }

        std::vector<std::size_t> order(pop);
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(),
                         [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

        if (scores[order[0]] > best) {
            best = scores[order[0]];
            out.params = env::GaitParams::from_vector(samples[order[0]]);
        }
        out.train_curve.push_back(best);

        collapsed = true;
        for (std::size_t d = 0; d < mean.size(); ++d) {
            double m = 0.0;
            for (std::size_t e = 0; e < n_elite; ++e) m += samples[order[e]][d];
            m /= static_cast<double>(n_elite);
            double var = 0.0;
            for (std::size_t e = 0; e < n_elite; ++e) {
                const double diff = samples[order[e]][d] - m;
                var += diff * diff;
            }
            const double sd = std::sqrt(var / static_cast<double>(n_elite));
            mean[d] = m;
            sigma[d] = std::max(sd, options_.sigma_floor);
            if (sd > options_.sigma_floor) collapsed = false;
        }
        if (collapsed) break;
    }

    if (best == kNegInf) {
        out.status = TrainStatus::RewardError;
        return out;
    }
    out.status = collapsed ? TrainStatus::Ok : TrainStatus::BudgetExhausted;
    out.h_mts = env::h_mts(out.params, task, options_.h_mts_episodes, holdout_seed(seed), env_);
    return out;
}

}  // namespace v2r::train
