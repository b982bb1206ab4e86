#include "preferthinker/config.hpp"

#include <cstdio>
#include <fstream>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "preferthinker/hash.hpp"

namespace preferthinker::config {

namespace {

std::string trim(const std::string& s) {
    size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value,
                            const std::string& expected) {
    throw std::invalid_argument("config: key '" + key + "' got '" + value + "', expected " +
                                expected);
}

long long parse_integer(const std::string& key, const std::string& value) {
    size_t used = 0;
    long long v = 0;
    try {
        v = std::stoll(value, &used);
    } catch (const std::exception&) {
        bad_value(key, value, "an integer");
    }
    if (used != value.size()) bad_value(key, value, "an integer");
    return v;
}

uint64_t parse_u64(const std::string& key, const std::string& value) {
    size_t used = 0;
    uint64_t v = 0;
    try {
        v = std::stoull(value, &used);
    } catch (const std::exception&) {
        bad_value(key, value, "a non-negative integer");
    }
    if (used != value.size() || (!value.empty() && value[0] == '-'))
        bad_value(key, value, "a non-negative integer");
    return v;
}

double parse_double(const std::string& key, const std::string& value) {
    size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(value, &used);
    } catch (const std::exception&) {
        bad_value(key, value, "a number");
    }
    if (used != value.size()) bad_value(key, value, "a number");
    return v;
}

bool parse_bool(const std::string& key, const std::string& value) {
    if (value == "true") return true;
    if (value == "false") return false;
    bad_value(key, value, "true or false");
}

std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

struct KeyDef {
    std::string key;
    std::function<std::string(const RunConfig&)> get;
    std::function<void(RunConfig&, const std::string&)> set;
};

KeyDef int_key(std::string k, int RunConfig::* m) {
    return {k, [m](const RunConfig& c) { return std::to_string(c.*m); },
            [m, k](RunConfig& c, const std::string& v) {
                long long x = parse_integer(k, v);
                if (x < INT32_MIN || x > INT32_MAX) bad_value(k, v, "a 32-bit integer");
                c.*m = static_cast<int>(x);
            }};
}

KeyDef long_key(std::string k, long RunConfig::* m) {
    return {k, [m](const RunConfig& c) { return std::to_string(c.*m); },
            [m, k](RunConfig& c, const std::string& v) {
                c.*m = static_cast<long>(parse_integer(k, v));
            }};
}

KeyDef u64_key(std::string k, uint64_t RunConfig::* m) {
    return {k, [m](const RunConfig& c) { return std::to_string(c.*m); },
            [m, k](RunConfig& c, const std::string& v) { c.*m = parse_u64(k, v); }};
}

KeyDef double_key(std::string k, double RunConfig::* m) {
    return {k, [m](const RunConfig& c) { return format_double(c.*m); },
            [m, k](RunConfig& c, const std::string& v) { c.*m = parse_double(k, v); }};
}

KeyDef bool_key(std::string k, bool RunConfig::* m) {
    return {k, [m](const RunConfig& c) { return std::string(c.*m ? "true" : "false"); },
            [m, k](RunConfig& c, const std::string& v) { c.*m = parse_bool(k, v); }};
}

// free-form strings must survive the line format: no newlines, no '#'
KeyDef string_key(std::string k, std::string RunConfig::* m) {
    return {k, [m](const RunConfig& c) { return c.*m; },
            [m, k](RunConfig& c, const std::string& v) {
                if (v.find('#') != std::string::npos || v.find('\n') != std::string::npos)
                    bad_value(k, v, "a value without '#' or newlines");
                c.*m = v;
            }};
}

KeyDef choice_key(std::string k, std::string RunConfig::* m, std::vector<std::string> allowed) {
    std::string expected = "one of ";
    for (size_t i = 0; i < allowed.size(); ++i) expected += (i ? " | " : "") + allowed[i];
    return {k, [m](const RunConfig& c) { return c.*m; },
            [m, k, allowed, expected](RunConfig& c, const std::string& v) {
                for (const auto& a : allowed) {
                    if (v == a) {
                        c.*m = v;
                        return;
                    }
                }
                bad_value(k, v, expected);
            }};
}

// "mock" or "remote:<endpoint>"-shaped backend selector
KeyDef backend_key(std::string k, std::string RunConfig::* m, std::string bare) {
    return {k, [m](const RunConfig& c) { return c.*m; },
            [m, k, bare](RunConfig& c, const std::string& v) {
                if (v != bare && v.rfind("remote:", 0) != 0)
                    bad_value(k, v, bare + " or remote:<endpoint>");
                c.*m = v;
            }};
}

const std::vector<KeyDef>& registry() {
    static const std::vector<KeyDef> defs = {
        string_key("paths.vocab", &RunConfig::paths_vocab),
        string_key("paths.prompts", &RunConfig::paths_prompts),
        string_key("paths.data_dir", &RunConfig::paths_data_dir),
        string_key("paths.checkpoint_dir", &RunConfig::paths_checkpoint_dir),
        string_key("paths.report_dir", &RunConfig::paths_report_dir),

        int_key("data.n_users", &RunConfig::data_n_users),
        double_key("data.multi_fraction", &RunConfig::data_multi_fraction),
        double_key("data.unseen_fraction", &RunConfig::data_unseen_fraction),
        int_key("data.k_refs", &RunConfig::data_k_refs),

        double_key("reward.w_p", &RunConfig::reward_w_p),
        double_key("reward.w_f", &RunConfig::reward_w_f),
        double_key("reward.w_a", &RunConfig::reward_w_a),
        double_key("reward.w_img", &RunConfig::reward_w_img),
        double_key("reward.w_text", &RunConfig::reward_w_text),
        double_key("reward.tau", &RunConfig::reward_tau),
        bool_key("reward.normalize_similarities", &RunConfig::reward_normalize_similarities),
        choice_key("reward.probe_prompt_policy", &RunConfig::reward_probe_prompt_policy,
                   {"first_initial", "fixed"}),
        string_key("reward.fixed_probe_prompt", &RunConfig::reward_fixed_probe_prompt),
        u64_key("reward.probe_seed", &RunConfig::reward_probe_seed),

        int_key("grpo.group_size", &RunConfig::grpo_group_size),
        double_key("grpo.temperature", &RunConfig::grpo_temperature),
        double_key("grpo.beta", &RunConfig::grpo_beta),
        double_key("grpo.eps_clip", &RunConfig::grpo_eps_clip),
        choice_key("grpo.advantage_mode", &RunConfig::grpo_advantage_mode, {"mean", "max"}),
        double_key("grpo.sigma_floor", &RunConfig::grpo_sigma_floor),
        double_key("grpo.lr", &RunConfig::grpo_lr),
        choice_key("grpo.kl_estimator", &RunConfig::grpo_kl_estimator, {"exact", "k3"}),
        int_key("grpo.max_len", &RunConfig::grpo_max_len),
        int_key("grpo.old_refresh_every", &RunConfig::grpo_old_refresh_every),
        choice_key("grpo.context_draw", &RunConfig::grpo_context_draw,
                   {"round_robin", "uniform"}),
        long_key("grpo.steps", &RunConfig::grpo_steps),

        int_key("sft.epochs", &RunConfig::sft_epochs),
        double_key("sft.lr", &RunConfig::sft_lr),

        int_key("eval.seen_sp", &RunConfig::eval_seen_sp),
        int_key("eval.seen_mp", &RunConfig::eval_seen_mp),
        int_key("eval.unseen_sp", &RunConfig::eval_unseen_sp),
        int_key("eval.unseen_mp", &RunConfig::eval_unseen_mp),
        int_key("eval.k_refs", &RunConfig::eval_k_refs),
        double_key("eval.temperature", &RunConfig::eval_temperature),

        u64_key("run.seed", &RunConfig::run_seed),
        int_key("run.jobs", &RunConfig::run_jobs),

        backend_key("backend.t2i", &RunConfig::backend_t2i, "mock"),
        backend_key("backend.annotator", &RunConfig::backend_annotator, "oracle"),
    };
    return defs;
}

const KeyDef* find_key(const std::string& key) {
    for (const auto& d : registry()) {
        if (d.key == key) return &d;
    }
    return nullptr;
}

}  // namespace

RunConfig load_config(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("config: cannot open " + path);
    RunConfig cfg;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        size_t hash = line.find('#');
        if (hash != std::string::npos) line.resize(hash);
        std::string stripped = trim(line);
        if (stripped.empty()) continue;
        size_t eq = stripped.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument("config: " + path + ":" + std::to_string(lineno) +
                                        ": expected 'key = value', got '" + stripped + "'");
        std::string key = trim(stripped.substr(0, eq));
        std::string value = trim(stripped.substr(eq + 1));
        try {
            apply_override(cfg, key, value);
        } catch (const std::invalid_argument& e) {
            throw std::invalid_argument("config: " + path + ":" + std::to_string(lineno) + ": " +
                                        e.what());
        }
    }
    return cfg;
}

void apply_override(RunConfig& cfg, const std::string& key, const std::string& value) {
    const KeyDef* def = find_key(key);
    if (def == nullptr) throw std::invalid_argument("config: unknown key '" + key + "'");
    def->set(cfg, value);
}

void apply_override_kv(RunConfig& cfg, const std::string& key_eq_value) {
    size_t eq = key_eq_value.find('=');
    if (eq == std::string::npos)
        throw std::invalid_argument("config: override '" + key_eq_value +
                                    "' must look like key=value");
    apply_override(cfg, trim(key_eq_value.substr(0, eq)), trim(key_eq_value.substr(eq + 1)));
}

const std::vector<std::string>& known_keys() {
    static const std::vector<std::string> keys = [] {
        std::vector<std::string> k;
        for (const auto& d : registry()) k.push_back(d.key);
        return k;
    }();
    return keys;
}

std::string canonical_config_text(const RunConfig& cfg) {
    std::string out;
    for (const auto& d : registry()) out += d.key + " = " + d.get(cfg) + "\n";
    return out;
}

uint64_t config_hash(const RunConfig& cfg) { return fnv1a(canonical_config_text(cfg)); }

void save_config(const std::string& path, const RunConfig& cfg) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("config: cannot write " + path);
    out << canonical_config_text(cfg);
    if (!out) throw std::runtime_error("config: failed while writing " + path);
}

datagen::DatasetConfig dataset_config(const RunConfig& cfg) {
    datagen::DatasetConfig d;
    d.n_users = cfg.data_n_users;
    d.multi_fraction = cfg.data_multi_fraction;
    d.unseen_fraction = cfg.data_unseen_fraction;
    d.k_refs = cfg.data_k_refs;
    d.seed = cfg.run_seed;
    return d;
}

reward::RewardConfig reward_config(const RunConfig& cfg) {
    reward::RewardConfig r;
    r.w_p = cfg.reward_w_p;
    r.w_f = cfg.reward_w_f;
    r.w_a = cfg.reward_w_a;
    r.w_img = cfg.reward_w_img;
    r.w_text = cfg.reward_w_text;
    r.tau = cfg.reward_tau;
    r.normalize_similarities = cfg.reward_normalize_similarities;
    r.probe_prompt_policy = cfg.reward_probe_prompt_policy == "fixed"
                                ? reward::ProbePromptPolicy::fixed
                                : reward::ProbePromptPolicy::first_initial;
    r.fixed_probe_prompt = cfg.reward_fixed_probe_prompt;
    r.probe_seed = cfg.reward_probe_seed;
    r.validate();
    return r;
}

trainer::GRPOConfig grpo_config(const RunConfig& cfg) {
    trainer::GRPOConfig g;
    g.group_size = cfg.grpo_group_size;
    g.temperature = cfg.grpo_temperature;
    g.beta = cfg.grpo_beta;
    g.eps_clip = cfg.grpo_eps_clip;
    g.advantage_mode = cfg.grpo_advantage_mode == "max" ? trainer::AdvantageMode::max
                                                        : trainer::AdvantageMode::mean;
    g.sigma_floor = cfg.grpo_sigma_floor;
    g.lr = cfg.grpo_lr;
    g.kl_estimator = cfg.grpo_kl_estimator == "k3" ? trainer::KLEstimator::sampled_k3
                                                   : trainer::KLEstimator::exact_categorical;
    g.max_len = cfg.grpo_max_len;
    g.old_refresh_every = cfg.grpo_old_refresh_every;
    g.context_draw = cfg.grpo_context_draw == "uniform" ? trainer::ContextDraw::uniform
                                                        : trainer::ContextDraw::round_robin;
    g.validate();
    return g;
}

eval::BenchmarkSpec benchmark_spec(const RunConfig& cfg) {
    eval::BenchmarkSpec b;
    b.seen_sp = cfg.eval_seen_sp;
    b.seen_mp = cfg.eval_seen_mp;
    b.unseen_sp = cfg.eval_unseen_sp;
    b.unseen_mp = cfg.eval_unseen_mp;
    b.k_refs = cfg.eval_k_refs;
    b.seed = cfg.run_seed;
    b.validate();
    return b;
}

}  // namespace preferthinker::config
