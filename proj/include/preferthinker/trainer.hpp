#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "preferthinker/policy.hpp"
#include "preferthinker/rng.hpp"

namespace preferthinker::trainer {

enum class AdvantageMode {
    mean,  // (r_i - mean) / std — default
    max,   // (r_i - max) / std — literal published form, all advantages <= 0
};

enum class KLEstimator {
    exact_categorical,  // full-distribution KL per step (small vocabularies)
    sampled_k3,         // per-token r - log r - 1, pointwise >= 0
};

enum class ContextDraw {
    round_robin,  // cycle through contexts in order — even coverage
    uniform,      // draw a context uniformly at random each step
};

struct GRPOConfig {
    int group_size = 6;
    double temperature = 0.9;
    double beta = 0.04;      // KL penalty toward the frozen reference
    double eps_clip = 0.2;   // clipped-surrogate band
    AdvantageMode advantage_mode = AdvantageMode::mean;
    double sigma_floor = 1e-8;  // degenerate-group guard: std below this zeroes advantages
    double lr = 1e-6;
    KLEstimator kl_estimator = KLEstimator::exact_categorical;
    int max_len = 64;
    int old_refresh_every = 1;  // steps between rollout-policy snapshots
    ContextDraw context_draw = ContextDraw::round_robin;

    void validate() const;
};

struct SFTExample {
    std::string context;
    std::string target_text;
};

struct LossGrad {
    double loss = 0.0;
    std::vector<double> grad;  // d loss / d params
};

// loss = −mean over the batch of Σ_t log P(y_t | x, y_<t); analytic gradient
// alongside. Errors on an empty batch or a target the policy cannot tokenize.
LossGrad sft_loss(const policy::Policy& p, const std::vector<SFTExample>& batch);

struct RolloutGroup {
    std::string context;
    std::vector<policy::Generation> outputs;  // per-token log-probs are the π_old record
    std::vector<double> rewards;              // filled by the caller
    std::vector<double> advantages;           // via compute_advantages
};

// G independent temperature samples with recorded temperature-1 log-probs
RolloutGroup rollout_group(const policy::Policy& p, const std::string& context,
                           const GRPOConfig& cfg, Rng& rng);

// Group-relative advantages with population std; a group whose std falls
// below sigma_floor yields all zeros. Requires >= 2 rewards.
std::vector<double> compute_advantages(const std::vector<double>& rewards, AdvantageMode mode,
                                       double sigma_floor);

// KL(p ‖ ref) accumulated along one output sequence. exact_categorical sums
// the full per-step distribution; sampled_k3 uses the pointwise-nonnegative
// r − log r − 1 form at the sampled tokens.
double kl_term(const policy::Policy& p, const policy::Policy& ref, const std::string& context,
               const policy::TokenSeq& tokens, KLEstimator estimator);

struct ObjectiveGrad {
    double objective = 0.0;      // maximized by ascent
    double kl = 0.0;             // mean per-output KL to the reference
    double clip_fraction = 0.0;  // fraction of outputs where the clipped branch won
    std::vector<double> grad;    // d objective / d params
};

// mean_i min(ρ_i·A_i, clip(ρ_i, 1±ε)·A_i) − β·KL, with the sequence-level
// ratio ρ_i = exp(Σ new log-probs − Σ recorded old log-probs).
ObjectiveGrad grpo_objective(const policy::Policy& p, const policy::Policy& ref,
                             const RolloutGroup& group, const GRPOConfig& cfg);

// One training-log line; absent fields serialize as null.
struct TrainLogRow {
    long step = 0;
    std::optional<double> mean_reward;
    std::optional<double> mean_advantage_abs;
    std::optional<double> kl;
    std::optional<double> clip_fraction;
    std::optional<double> loss;

    bool operator==(const TrainLogRow&) const = default;
};

std::string train_log_row_json(const TrainLogRow& row);
void save_train_log(const std::string& path, const std::vector<TrainLogRow>& rows);

// Plain SGD on sft_loss, one example per update, per-epoch shuffle; the log
// holds one row per epoch with the mean loss observed during that epoch.
std::vector<TrainLogRow> train_sft(policy::Policy& p, const std::vector<SFTExample>& dataset,
                                   int epochs, double lr, Rng& rng);

// reward for one generated output: (context index, generation, decoded text)
using RewardFn =
    std::function<double(size_t context_index, const policy::Generation& gen, const std::string& text)>;

// Per step: draw a context, roll out a group under the (possibly stale)
// rollout snapshot, score, normalize to advantages, one ascent update on the
// live policy. ref stays frozen throughout. Deterministic given rng.
std::vector<TrainLogRow> train_grpo(policy::Policy& p, const policy::Policy& ref,
                                    const std::vector<std::string>& contexts,
                                    const RewardFn& reward_fn, const GRPOConfig& cfg, long steps,
                                    Rng& rng);

}  // namespace preferthinker::trainer
