#include <algorithm>
#include <iomanip>
#include <set>
#include <sstream>

#include "v2r/error.hpp"
#include "v2r/orchestrator.hpp"

namespace v2r::orch {

namespace {

std::string normalized_or_undefined(double method, const Baselines& b) {
    if (b.human == b.sparse) return "undefined";
    return format_fixed(human_normalized_score(method, b.sparse, b.human), 4);
}

std::string pad_left(const std::string& s, std::size_t width) {
    return s.size() >= width ? s : std::string(width - s.size(), ' ') + s;
}

std::string pad_right(const std::string& s, std::size_t width) {
    return s.size() >= width ? s : s + std::string(width - s.size(), ' ');
}

}  // namespace

Report report(const RunManifest& m, const Baselines& baselines) {
    std::set<std::string> joints;
    for (const auto& r : m.rounds) {
        for (const auto& [name, v] : r.dtw_feedback.per_joint) joints.insert(name);
    }

    std::ostringstream t;
    t << "Reward search report\n";
    t << "task: " << env::to_string(m.task) << "\n";
    t << "seed: " << m.seed << "\n";
    t << "config hash: " << m.config_hash << "\n";
    t << "rounds completed: " << m.rounds.size() << " of " << m.planned_rounds << "\n";
    t << "similarity: cost " << to_string(m.similarity.cost_mode) << ", radius " << m.similarity.radius
      << ", autocorrelation threshold " << format_fixed(m.similarity.autocorr_threshold, 2) << ", "
      << m.eval_rollouts << " evaluation rollouts\n\n";

    t << "round  best_index  ok/total  best_h_mts  best_so_far  dtw_mean\n";
    for (const auto& r : m.rounds) {
        const auto ok = std::count_if(r.candidates.begin(), r.candidates.end(),
                                      [](const CandidateResult& c) { return c.status == CandidateStatus::Ok; });
        const std::string ratio = std::to_string(ok) + "/" + std::to_string(r.candidates.size());
        const std::string dtw = r.dtw_feedback.per_joint.empty() ? "n/a" : format_fixed(r.dtw_feedback.mean(), 4);
        t << pad_left(std::to_string(r.round), 5) << pad_left(std::to_string(r.best_index), 12)
          << pad_left(ratio, 10) << pad_left(format_fixed(r.best_score, 4), 12)
          << pad_left(format_fixed(r.best_so_far_score, 4), 13) << pad_left(dtw, 10) << "\n";
        if (!r.feedback_error.empty()) t << "       feedback error: " << r.feedback_error << "\n";
    }
    t << "\n";

    if (!m.rounds.empty()) {
        t << "final score (h_mts): " << format_fixed(m.final_score, 4) << " from round " << m.final_round << "\n";
        t << "baselines: sparse " << format_fixed(baselines.sparse, 4) << ", human "
          << format_fixed(baselines.human, 4) << "\n";
        t << "human normalized score: " << normalized_or_undefined(m.final_score, baselines) << "\n\n";
    }

    if (!joints.empty()) {
        std::size_t name_width = 5;
        for (const auto& j : joints) name_width = std::max(name_width, j.size());
        t << "per-joint DTW (lower is closer)\n";
        t << pad_right("joint", name_width);
        for (const auto& r : m.rounds) t << pad_left("round_" + std::to_string(r.round), 10);
        t << "\n";
        for (const auto& j : joints) {
            t << pad_right(j, name_width);
            for (const auto& r : m.rounds) {
                const auto it = r.dtw_feedback.per_joint.find(j);
                t << pad_left(it == r.dtw_feedback.per_joint.end() ? "n/a" : format_fixed(it->second, 4), 10);
            }
            t << "\n";
        }
        t << pad_right("mean", name_width);
        for (const auto& r : m.rounds) {
            t << pad_left(r.dtw_feedback.per_joint.empty() ? "n/a" : format_fixed(r.dtw_feedback.mean(), 4), 10);
        }
        t << "\n\n";
    }

    if (!m.rounds.empty()) {
        t << "final reward program:\n";
        std::istringstream src(m.final_reward_source);
        for (std::string line; std::getline(src, line);) t << "    " << line << "\n";
    }

    std::ostringstream csv;
    csv << "round,best_index,best_h_mts,best_so_far,human_normalized_best_so_far,dtw_mean";
    for (const auto& j : joints) csv << ",dtw_" << j;
    csv << "\n";
    for (const auto& r : m.rounds) {
        csv << r.round << "," << r.best_index << "," << format_fixed(r.best_score, 6) << ","
            << format_fixed(r.best_so_far_score, 6) << ","
            << (baselines.human == baselines.sparse
                    ? std::string()
                    : format_fixed(human_normalized_score(r.best_so_far_score, baselines.sparse, baselines.human), 6))
            << "," << (r.dtw_feedback.per_joint.empty() ? std::string() : format_fixed(r.dtw_feedback.mean(), 6));
        for (const auto& j : joints) {
            const auto it = r.dtw_feedback.per_joint.find(j);
            csv << "," << (it == r.dtw_feedback.per_joint.end() ? std::string() : format_fixed(it->second, 6));
        }
        csv << "\n";
    }
    return {t.str(), csv.str()};
}

}  // namespace v2r::orch
