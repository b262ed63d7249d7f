#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include <openssl/evp.h>

#include <json.hpp>

#include "v2r/error.hpp"
#include "v2r/orchestrator.hpp"

namespace v2r::orch {

namespace {

using ojson = nlohmann::ordered_json;

constexpr std::string_view kFormat = "v2r-run-manifest/1";

// JSON has no infinities; a failed first generation leaves -inf in the curve.
ojson number_or_null(double v) { return std::isfinite(v) ? ojson(v) : ojson(nullptr); }

double number_or_neg_inf(const ojson& j) {
    return j.is_null() ? -std::numeric_limits<double>::infinity() : j.get<double>();
}

ojson candidate_json(const CandidateResult& c) {
    ojson j;
    j["index"] = c.index;
    j["status"] = to_string(c.status);
    j["parse_status"] = c.parse_status;
    j["error_detail"] = c.error_detail;
    j["source"] = c.source;
    j["h_mts"] = c.h_mts ? ojson(*c.h_mts) : ojson(nullptr);
    if (c.policy) {
        const auto& box = env::param_box();
        ojson params = ojson::object();
        for (std::size_t d = 0; d < c.policy->params.size(); ++d) params[box.names[d]] = c.policy->params[d];
        ojson curve = ojson::array();
        for (double v : c.policy->train_curve) curve.push_back(number_or_null(v));
        j["policy"] = {{"train_status", c.policy->train_status},
                       {"evals_used", c.policy->evals_used},
                       {"params", std::move(params)},
                       {"train_curve", std::move(curve)}};
    } else {
        j["policy"] = nullptr;
    }
    return j;
}

CandidateResult candidate_from(const ojson& j) {
    CandidateResult c;
    c.index = j.at("index").get<std::size_t>();
    c.status = candidate_status_from_string(j.at("status").get<std::string>());
    c.parse_status = j.at("parse_status").get<std::string>();
    c.error_detail = j.at("error_detail").get<std::string>();
    c.source = j.at("source").get<std::string>();
    if (!j.at("h_mts").is_null()) c.h_mts = j.at("h_mts").get<double>();
    if (const auto& p = j.at("policy"); !p.is_null()) {
        PolicyRecord rec;
        rec.train_status = p.at("train_status").get<std::string>();
        rec.evals_used = p.at("evals_used").get<std::size_t>();
        const auto& box = env::param_box();
        for (const auto& name : box.names) rec.params.push_back(p.at("params").at(name).get<double>());
        for (const auto& v : p.at("train_curve")) rec.train_curve.push_back(number_or_neg_inf(v));
        c.policy = std::move(rec);
    }
    return c;
}

ojson round_json(const RoundRecord& r) {
    ojson j;
    j["round"] = r.round;
    j["prompt_digest"] = r.prompt_digest;
    j["best_index"] = r.best_index;
    j["best_score"] = r.best_score;
    j["best_source"] = r.best_source;
    ojson per_joint = ojson::object();
    for (const auto& [name, v] : r.dtw_feedback.per_joint) per_joint[name] = v;
    j["dtw_feedback"] = {{"rollout_count", r.dtw_feedback.rollout_count},
                         {"per_joint", std::move(per_joint)}};
    j["feedback_error"] = r.feedback_error;
    j["best_so_far"] = {{"score", r.best_so_far_score},
                        {"round", r.best_so_far_round},
                        {"source", r.best_so_far_source}};
    ojson cands = ojson::array();
    for (const auto& c : r.candidates) cands.push_back(candidate_json(c));
    j["candidates"] = std::move(cands);
    ojson discarded = ojson::array();
    for (const auto& c : r.discarded_candidates) discarded.push_back(candidate_json(c));
    j["discarded_candidates"] = std::move(discarded);
    return j;
}

RoundRecord round_from(const ojson& j) {
    RoundRecord r;
    r.round = j.at("round").get<int>();
    r.prompt_digest = j.at("prompt_digest").get<std::string>();
    r.best_index = j.at("best_index").get<std::size_t>();
    r.best_score = j.at("best_score").get<double>();
    r.best_source = j.at("best_source").get<std::string>();
    const auto& fb = j.at("dtw_feedback");
    r.dtw_feedback.rollout_count = fb.at("rollout_count").get<std::size_t>();
    for (const auto& [name, v] : fb.at("per_joint").items()) r.dtw_feedback.per_joint[name] = v.get<double>();
    r.feedback_error = j.at("feedback_error").get<std::string>();
    const auto& best = j.at("best_so_far");
    r.best_so_far_score = best.at("score").get<double>();
    r.best_so_far_round = best.at("round").get<int>();
    r.best_so_far_source = best.at("source").get<std::string>();
    for (const auto& c : j.at("candidates")) r.candidates.push_back(candidate_from(c));
    for (const auto& c : j.at("discarded_candidates")) r.discarded_candidates.push_back(candidate_from(c));
    return r;
}

}  // namespace

std::string_view to_string(CandidateStatus status) noexcept {
    switch (status) {
        case CandidateStatus::Ok: return "ok";
        case CandidateStatus::ParseFailed: return "parse_failed";
        case CandidateStatus::TrainFailed: return "train_failed";
    }
    return "unknown";
}

CandidateStatus candidate_status_from_string(std::string_view name) {
    if (name == "ok") return CandidateStatus::Ok;
    if (name == "parse_failed") return CandidateStatus::ParseFailed;
    if (name == "train_failed") return CandidateStatus::TrainFailed;
    throw Error(ErrorCode::MalformedRecord, "unknown candidate status '" + std::string(name) + "'");
}

std::string sha256_hex(std::string_view data) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
        throw Error(ErrorCode::Io, "SHA-256 computation failed");
    }
    static constexpr char kHex[] = "0123456789abcdef";
    std::string out;
    out.reserve(2 * len);
    for (unsigned int i = 0; i < len; ++i) {
        out += kHex[digest[i] >> 4];
        out += kHex[digest[i] & 0xf];
    }
    return out;
}

std::string manifest_to_json(const RunManifest& m) {
    ojson j;
    j["format"] = kFormat;
    j["task"] = env::to_string(m.task);
    j["seed"] = m.seed;
    j["config_hash"] = m.config_hash;
    ojson config = ojson::object();
    for (const auto& [k, v] : m.config) config[k] = v;
    j["config"] = std::move(config);
    j["backend"] = {{"name", m.backend}, {"temperature", m.temperature}};
    j["similarity"] = {{"cost_mode", to_string(m.similarity.cost_mode)},
                       {"radius", m.similarity.radius},
                       {"autocorr_threshold", m.similarity.autocorr_threshold},
                       {"normalization", "per-frame bbox on reference and robot"}};
    j["eval_rollouts"] = m.eval_rollouts;
    // Each prompt carries that round's best reward, which may differ from the
    // best-so-far reward returned at the end.
    j["feedback_reward"] = "round_best";
    j["planned_rounds"] = m.planned_rounds;
    ojson rounds = ojson::array();
    for (const auto& r : m.rounds) rounds.push_back(round_json(r));
    j["rounds"] = std::move(rounds);
    if (m.rounds.empty()) {
        j["final"] = nullptr;
    } else {
        j["final"] = {{"round", m.final_round},
                      {"score", m.final_score},
                      {"reward_source", m.final_reward_source}};
    }
    return j.dump(2) + "\n";
}

RunManifest manifest_from_json(std::string_view text) {
    try {
        const auto j = ojson::parse(text);
        if (j.at("format").get<std::string>() != kFormat) {
            throw Error(ErrorCode::MalformedRecord, "unsupported manifest format");
        }
        RunManifest m;
        m.task = env::task_from_string(j.at("task").get<std::string>());
        m.seed = j.at("seed").get<std::uint64_t>();
        m.config_hash = j.at("config_hash").get<std::string>();
        for (const auto& [k, v] : j.at("config").items()) m.config.emplace_back(k, v.get<std::string>());
        m.backend = j.at("backend").at("name").get<std::string>();
        m.temperature = j.at("backend").at("temperature").get<double>();
        const auto& sim = j.at("similarity");
        m.similarity.cost_mode = cost_mode_from_string(sim.at("cost_mode").get<std::string>());
        m.similarity.radius = sim.at("radius").get<std::size_t>();
        m.similarity.autocorr_threshold = sim.at("autocorr_threshold").get<double>();
        m.eval_rollouts = j.at("eval_rollouts").get<std::size_t>();
        m.planned_rounds = j.at("planned_rounds").get<std::size_t>();
        for (const auto& r : j.at("rounds")) m.rounds.push_back(round_from(r));
        if (const auto& fin = j.at("final"); !fin.is_null()) {
            m.final_round = fin.at("round").get<int>();
            m.final_score = fin.at("score").get<double>();
            m.final_reward_source = fin.at("reward_source").get<std::string>();
        }
        return m;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::MalformedRecord, std::string("malformed manifest: ") + e.what());
    }
}

RunManifest load_manifest(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::FileNotFound, "cannot open manifest " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return manifest_from_json(buf.str());
}

}  // namespace v2r::orch
