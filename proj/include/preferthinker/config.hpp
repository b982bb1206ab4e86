#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "preferthinker/datagen.hpp"
#include "preferthinker/eval.hpp"
#include "preferthinker/reward.hpp"
#include "preferthinker/trainer.hpp"

namespace preferthinker::config {

// One flat dotted-key configuration drives every tool command; the canonical
// serialization (fixed key order) is what the printed config hash covers, so
// a run is replayable from its hash plus the seed.
struct RunConfig {
    // paths ("" selects the bundled asset)
    std::string paths_vocab;
    std::string paths_prompts;
    std::string paths_data_dir = "artifacts/dataset";
    std::string paths_checkpoint_dir = "artifacts/checkpoints";
    std::string paths_report_dir = "artifacts/reports";

    // dataset generation
    int data_n_users = 512;
    double data_multi_fraction = 0.25;
    double data_unseen_fraction = 0.5;
    int data_k_refs = 5;

    // hybrid reward
    double reward_w_p = 0.7;
    double reward_w_f = 0.3;
    double reward_w_a = 1.0;
    double reward_w_img = 0.5;
    double reward_w_text = 0.5;
    double reward_tau = 0.8;
    bool reward_normalize_similarities = true;
    std::string reward_probe_prompt_policy = "first_initial";  // first_initial | fixed
    std::string reward_fixed_probe_prompt = "a scenic landscape";
    uint64_t reward_probe_seed = 0;

    // GRPO
    int grpo_group_size = 6;
    double grpo_temperature = 0.9;
    double grpo_beta = 0.04;
    double grpo_eps_clip = 0.2;
    std::string grpo_advantage_mode = "mean";  // mean | max
    double grpo_sigma_floor = 1e-8;
    double grpo_lr = 1e-6;
    std::string grpo_kl_estimator = "exact";  // exact | k3
    int grpo_max_len = 64;
    int grpo_old_refresh_every = 1;
    std::string grpo_context_draw = "round_robin";  // round_robin | uniform
    long grpo_steps = 1000;

    // supervised fine-tuning
    int sft_epochs = 1;
    double sft_lr = 0.5;

    // benchmark
    int eval_seen_sp = 50;
    int eval_seen_mp = 25;
    int eval_unseen_sp = 50;
    int eval_unseen_mp = 25;
    int eval_k_refs = 5;
    double eval_temperature = 0.9;

    // execution
    uint64_t run_seed = 0;
    int run_jobs = 1;

    // backend selection: "mock" | "remote:<endpoint>" for t2i,
    // "oracle" | "remote:<endpoint>" for the annotator
    std::string backend_t2i = "mock";
    std::string backend_annotator = "oracle";

    bool operator==(const RunConfig&) const = default;
};

// Parses `key = value` lines; '#' starts a comment, blank lines are skipped;
// an unknown key or a malformed value is an error naming the line.
RunConfig load_config(const std::string& path);

// Applies one override; key must be a known dotted key.
void apply_override(RunConfig& cfg, const std::string& key, const std::string& value);
// "key=value" form used by the --set flag
void apply_override_kv(RunConfig& cfg, const std::string& key_eq_value);

const std::vector<std::string>& known_keys();

// every key in fixed order, `key = value` per line; load_config inverts it
std::string canonical_config_text(const RunConfig& cfg);
uint64_t config_hash(const RunConfig& cfg);
void save_config(const std::string& path, const RunConfig& cfg);

// validated projections onto the module configs
datagen::DatasetConfig dataset_config(const RunConfig& cfg);
reward::RewardConfig reward_config(const RunConfig& cfg);
trainer::GRPOConfig grpo_config(const RunConfig& cfg);
eval::BenchmarkSpec benchmark_spec(const RunConfig& cfg);

}  // namespace preferthinker::config
