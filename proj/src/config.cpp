#include "v2r/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>

#include "v2r/error.hpp"

namespace v2r {

namespace {

std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

std::string fmt_double(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return {buf, res.ptr};
}

[[noreturn]] void bad_value(std::string_view key, std::string_view value, std::string_view what) {
    throw Error(ErrorCode::Config, "config key '" + std::string(key) + "': " + std::string(what) +
                                       ", got '" + std::string(value) + "'");
}

double to_double(std::string_view key, std::string_view v) {
    double out = 0.0;
    const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
    if (res.ec != std::errc{} || res.ptr != v.data() + v.size()) bad_value(key, v, "expected a number");
    return out;
}

template <class Int>
Int to_uint(std::string_view key, std::string_view v) {
    Int out = 0;
    const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
    if (res.ec != std::errc{} || res.ptr != v.data() + v.size()) {
        bad_value(key, v, "expected a non-negative integer");
    }
    return out;
}

struct Field {
    std::string key;
    std::function<std::string(const RunConfig&)> get;
    std::function<void(RunConfig&, std::string_view, const std::filesystem::path&)> set;
};

template <class T>
Field size_field(std::string key, T RunConfig::*member) {
    return {key, [member](const RunConfig& c) { return std::to_string(c.*member); },
            [member, key](RunConfig& c, std::string_view v, const auto&) {
                c.*member = to_uint<T>(key, v);
            }};
}

template <class Getter>
Field double_field(std::string key, Getter ref) {
    return {key, [ref](const RunConfig& c) { return fmt_double(ref(c)); },
            [ref, key](RunConfig& c, std::string_view v, const auto&) { ref(c) = to_double(key, v); }};
}

template <class Getter>
Field count_field(std::string key, Getter ref) {
    return {key, [ref](const RunConfig& c) { return std::to_string(ref(c)); },
            [ref, key](RunConfig& c, std::string_view v, const auto&) {
                ref(c) = to_uint<std::remove_cvref_t<decltype(ref(c))>>(key, v);
            }};
}

template <class Getter>
Field string_field(std::string key, Getter ref) {
    return {key, [ref](const RunConfig& c) { return ref(c); },
            [ref](RunConfig& c, std::string_view v, const auto&) { ref(c) = std::string(v); }};
}

template <class Getter>
Field path_field(std::string key, Getter ref) {
    return {key, [ref](const RunConfig& c) { return ref(c).string(); },
            [ref](RunConfig& c, std::string_view v, const std::filesystem::path& base) {
                std::filesystem::path p{std::string(v)};
                if (p.is_relative() && !base.empty() && !v.empty()) p = base / p;
                ref(c) = p.lexically_normal();
            }};
}

const std::vector<Field>& fields() {
    static const std::vector<Field> table = [] {
        std::vector<Field> f;
        f.push_back({"task", [](const RunConfig& c) { return std::string(env::to_string(c.task)); },
                     [](RunConfig& c, std::string_view v, const auto&) {
                         try {
                             c.task = env::task_from_string(v);
                         } catch (const Error&) {
                             bad_value("task", v, "expected velocity_tracking or run_fast");
                         }
                     }});
        f.push_back(path_field("reference", [](auto& c) -> auto& { return c.reference; }));
        f.push_back(size_field("rounds", &RunConfig::rounds));
        f.push_back(size_field("samples", &RunConfig::samples));
        f.push_back(size_field("eval_rollouts", &RunConfig::eval_rollouts));
        f.push_back(size_field("seed", &RunConfig::seed));

        f.push_back(count_field("env.steps", [](auto& c) -> auto& { return c.env.steps; }));
        f.push_back(double_field("env.dt", [](auto& c) -> auto& { return c.env.dt; }));
        f.push_back(double_field("env.noise_sigma", [](auto& c) -> auto& { return c.env.noise_sigma; }));
        f.push_back(double_field("env.target_vx_min", [](auto& c) -> auto& { return c.env.target_vx_min; }));
        f.push_back(double_field("env.target_vx_max", [](auto& c) -> auto& { return c.env.target_vx_max; }));
        f.push_back(double_field("env.target_vy_min", [](auto& c) -> auto& { return c.env.target_vy_min; }));
        f.push_back(double_field("env.target_vy_max", [](auto& c) -> auto& { return c.env.target_vy_max; }));

        f.push_back(size_field("trainer.budget", &RunConfig::train_budget));
        f.push_back(size_field("trainer.workers", &RunConfig::train_workers));
        f.push_back(count_field("trainer.population", [](auto& c) -> auto& { return c.cem.population; }));
        f.push_back(double_field("trainer.elite_fraction", [](auto& c) -> auto& { return c.cem.elite_fraction; }));
        f.push_back(double_field("trainer.init_sigma_fraction", [](auto& c) -> auto& { return c.cem.init_sigma_fraction; }));
        f.push_back(double_field("trainer.sigma_floor", [](auto& c) -> auto& { return c.cem.sigma_floor; }));
        f.push_back(count_field("trainer.rollouts_per_eval", [](auto& c) -> auto& { return c.cem.rollouts_per_eval; }));
        f.push_back(count_field("trainer.h_mts_episodes", [](auto& c) -> auto& { return c.cem.h_mts_episodes; }));

        f.push_back(count_field("similarity.radius", [](auto& c) -> auto& { return c.similarity.radius; }));
        f.push_back(double_field("similarity.autocorr_threshold", [](auto& c) -> auto& { return c.similarity.autocorr_threshold; }));
        f.push_back({"similarity.cost_mode",
                     [](const RunConfig& c) { return std::string(to_string(c.similarity.cost_mode)); },
                     [](RunConfig& c, std::string_view v, const auto&) {
                         try {
                             c.similarity.cost_mode = cost_mode_from_string(v);
                         } catch (const Error&) {
                             bad_value("similarity.cost_mode", v, "expected sum or path_mean");
                         }
                     }});

        f.push_back({"prompt.precision", [](const RunConfig& c) { return std::to_string(c.prompt_precision); },
                     [](RunConfig& c, std::string_view v, const auto&) {
                         const auto p = to_uint<unsigned>("prompt.precision", v);
                         if (p > 10) bad_value("prompt.precision", v, "expected 0..10");
                         c.prompt_precision = static_cast<int>(p);
                     }});

        f.push_back({"llm.backend", [](const RunConfig& c) { return c.backend; },
                     [](RunConfig& c, std::string_view v, const auto&) {
                         if (v != "http" && v != "mock") bad_value("llm.backend", v, "expected http or mock");
                         c.backend = std::string(v);
                     }});
        f.push_back(path_field("llm.mock_script", [](auto& c) -> auto& { return c.mock_script; }));
        f.push_back(string_field("llm.base_url", [](auto& c) -> auto& { return c.http.base_url; }));
        f.push_back(string_field("llm.path", [](auto& c) -> auto& { return c.http.path; }));
        f.push_back(string_field("llm.model", [](auto& c) -> auto& { return c.http.model; }));
        f.push_back(double_field("llm.temperature", [](auto& c) -> auto& { return c.http.temperature; }));
        f.push_back(string_field("llm.api_key_env", [](auto& c) -> auto& { return c.http.api_key_env; }));
        f.push_back({"llm.max_retries", [](const RunConfig& c) { return std::to_string(c.http.retry.max_retries); },
                     [](RunConfig& c, std::string_view v, const auto&) {
                         c.http.retry.max_retries = static_cast<int>(to_uint<unsigned>("llm.max_retries", v));
                     }});
        f.push_back({"llm.initial_backoff_ms",
                     [](const RunConfig& c) { return std::to_string(c.http.retry.initial_delay.count()); },
                     [](RunConfig& c, std::string_view v, const auto&) {
                         c.http.retry.initial_delay =
                             std::chrono::milliseconds(to_uint<unsigned long long>("llm.initial_backoff_ms", v));
                     }});
        f.push_back(double_field("llm.backoff_factor", [](auto& c) -> auto& { return c.http.retry.backoff_factor; }));
        f.push_back({"llm.timeout_s", [](const RunConfig& c) { return std::to_string(c.http.timeout_seconds); },
                     [](RunConfig& c, std::string_view v, const auto&) {
                         c.http.timeout_seconds = static_cast<int>(to_uint<unsigned>("llm.timeout_s", v));
                     }});
        f.push_back(size_field("llm.parallelism", &RunConfig::llm_parallelism));
        return f;
    }();
    return table;
}

void check_ranges(const RunConfig& c) {
    auto fail = [](const std::string& msg) { throw Error(ErrorCode::Config, msg); };
    if (c.rounds == 0) fail("rounds must be >= 1");
    if (c.samples == 0) fail("samples must be >= 1");
    if (c.eval_rollouts == 0) fail("eval_rollouts must be >= 1");
    if (c.env.steps < 2) fail("env.steps must be >= 2");
    if (!(c.env.dt > 0.0)) fail("env.dt must be positive");
    if (c.env.noise_sigma < 0.0) fail("env.noise_sigma must be >= 0");
    if (c.env.target_vx_min > c.env.target_vx_max || c.env.target_vy_min > c.env.target_vy_max) {
        fail("env target velocity ranges must have min <= max");
    }
    if (c.cem.population < 2) fail("trainer.population must be >= 2");
    if (!(c.cem.elite_fraction > 0.0 && c.cem.elite_fraction <= 1.0)) {
        fail("trainer.elite_fraction must be in (0, 1]");
    }
    if (c.cem.rollouts_per_eval == 0 || c.cem.h_mts_episodes == 0) {
        fail("trainer rollout counts must be >= 1");
    }
    if (c.train_budget < c.cem.population * c.cem.rollouts_per_eval) {
        fail("trainer.budget must cover one generation (population * rollouts_per_eval)");
    }
    if (c.similarity.autocorr_threshold <= 0.0 || c.similarity.autocorr_threshold >= 1.0) {
        fail("similarity.autocorr_threshold must be in (0, 1)");
    }
    if (c.llm_parallelism == 0) fail("llm.parallelism must be >= 1");
    if (c.http.retry.backoff_factor < 1.0) fail("llm.backoff_factor must be >= 1");
}

}  // namespace

RunConfig parse_config(std::string_view text, const std::filesystem::path& base_dir) {
    std::map<std::string_view, const Field*> by_key;
    for (const auto& f : fields()) by_key.emplace(f.key, &f);

    RunConfig config;
    std::set<std::string> seen;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const auto eol = std::min(text.find('\n', pos), text.size());
        auto line = text.substr(pos, eol - pos);
        pos = eol + 1;
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string_view::npos) {
            throw Error(ErrorCode::Config, "config line " + std::to_string(line_no) + ": expected key = value");
        }
        const auto key = trim(line.substr(0, eq));
        const auto value = trim(line.substr(eq + 1));
        const auto it = by_key.find(key);
        if (it == by_key.end()) {
            throw Error(ErrorCode::Config,
                        "config line " + std::to_string(line_no) + ": unknown key '" + std::string(key) + "'");
        }
        if (!seen.insert(std::string(key)).second) {
            throw Error(ErrorCode::Config,
                        "config line " + std::to_string(line_no) + ": duplicate key '" + std::string(key) + "'");
        }
        it->second->set(config, value, base_dir);
    }
    check_ranges(config);
    return config;
}

RunConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::FileNotFound, "cannot open config " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_config(buf.str(), path.parent_path());
}

std::vector<std::pair<std::string, std::string>> config_entries(const RunConfig& config) {
    std::vector<std::pair<std::string, std::string>> out;
    for (const auto& f : fields()) out.emplace_back(f.key, f.get(config));
    return out;
}

std::string format_config(const RunConfig& config) {
    std::string out;
    for (const auto& [k, v] : config_entries(config)) out += k + " = " + v + "\n";
    return out;
}

RunConfig test_profile(RunConfig config) {
    config.rounds = 3;
    config.samples = 2;
    return config;
}

}  // namespace v2r
