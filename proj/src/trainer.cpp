#include "preferthinker/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include "json.hpp"

using ordered_json = nlohmann::ordered_json;

namespace preferthinker::trainer {

void GRPOConfig::validate() const {
    if (group_size < 2) throw std::invalid_argument("trainer: group size must be >= 2");
    if (beta < 0.0) throw std::invalid_argument("trainer: beta must be >= 0");
    if (eps_clip <= 0.0 || eps_clip >= 1.0) {
        throw std::invalid_argument("trainer: eps_clip must lie in (0, 1)");
    }
    if (temperature < 0.0) throw std::invalid_argument("trainer: temperature must be >= 0");
    if (sigma_floor <= 0.0) throw std::invalid_argument("trainer: sigma_floor must be > 0");
    if (max_len < 1) throw std::invalid_argument("trainer: max_len must be >= 1");
    if (old_refresh_every < 1) {
        throw std::invalid_argument("trainer: old_refresh_every must be >= 1");
    }
    if (lr < 0.0) throw std::invalid_argument("trainer: learning rate must be >= 0");
}

LossGrad sft_loss(const policy::Policy& p, const std::vector<SFTExample>& batch) {
    if (batch.empty()) throw std::invalid_argument("trainer: sft batch is empty");
    LossGrad out;
    out.grad.assign(p.parameters().size(), 0.0);
    const double inv_b = 1.0 / static_cast<double>(batch.size());
    for (const SFTExample& ex : batch) {
        std::optional<policy::TokenSeq> tokens = p.tokenize(ex.context, ex.target_text);
        if (!tokens) {
            throw std::invalid_argument(
                "trainer: target is not tokenizable by this policy (context '" + ex.context + "')");
        }
        std::vector<double> lps = p.sequence_logprobs(ex.context, *tokens);
        for (double lp : lps) out.loss -= inv_b * lp;
        std::vector<double> coeffs(tokens->size(), -inv_b);  // d(−Σlp)/dθ
        p.add_logprob_grad(ex.context, *tokens, coeffs, out.grad);
    }
    return out;
}

RolloutGroup rollout_group(const policy::Policy& p, const std::string& context,
                           const GRPOConfig& cfg, Rng& rng) {
    cfg.validate();
    RolloutGroup group;
    group.context = context;
    group.outputs.reserve(static_cast<size_t>(cfg.group_size));
    for (int i = 0; i < cfg.group_size; ++i) {
        group.outputs.push_back(p.generate(context, cfg.temperature, cfg.max_len, rng));
    }
    return group;
}

std::vector<double> compute_advantages(const std::vector<double>& rewards, AdvantageMode mode,
                                       double sigma_floor) {
    const size_t n = rewards.size();
    if (n < 2) throw std::invalid_argument("trainer: advantage groups need >= 2 rewards");
    if (sigma_floor <= 0.0) throw std::invalid_argument("trainer: sigma_floor must be > 0");
    double mean = 0.0;
    for (double r : rewards) mean += r;
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (double r : rewards) var += (r - mean) * (r - mean);
    var /= static_cast<double>(n);  // population variance
    double std_dev = std::sqrt(var);
    if (std_dev < sigma_floor) return std::vector<double>(n, 0.0);  // degenerate group
    double center = mean;
    if (mode == AdvantageMode::max) {
        center = *std::max_element(rewards.begin(), rewards.end());
    }
    std::vector<double> adv(n);
    for (size_t i = 0; i < n; ++i) adv[i] = (rewards[i] - center) / std_dev;
    return adv;
}

double kl_term(const policy::Policy& p, const policy::Policy& ref, const std::string& context,
               const policy::TokenSeq& tokens, KLEstimator estimator) {
    if (p.vocab_size() != ref.vocab_size()) {
        throw std::invalid_argument("trainer: policy and reference vocabularies differ");
    }
    double kl = 0.0;
    if (estimator == KLEstimator::exact_categorical) {
        policy::TokenSeq prefix;
        prefix.reserve(tokens.size());
        for (int tok : tokens) {
            std::vector<double> lp = p.next_logprobs(context, prefix);
            std::vector<double> lq = ref.next_logprobs(context, prefix);
            for (size_t v = 0; v < lp.size(); ++v) kl += std::exp(lp[v]) * (lp[v] - lq[v]);
            prefix.push_back(tok);
        }
    } else {
        std::vector<double> lp = p.sequence_logprobs(context, tokens);
        std::vector<double> lq = ref.sequence_logprobs(context, tokens);
        for (size_t t = 0; t < lp.size(); ++t) {
            double r = std::exp(lq[t] - lp[t]);  // π_ref / π_θ at the sampled token
            kl += r - std::log(r) - 1.0;         // pointwise >= 0
        }
    }
    return kl;
}

ObjectiveGrad grpo_objective(const policy::Policy& p, const policy::Policy& ref,
                             const RolloutGroup& group, const GRPOConfig& cfg) {
    cfg.validate();
    const size_t g = group.outputs.size();
    if (g < 2 || group.rewards.size() != g || group.advantages.size() != g) {
        throw std::invalid_argument(
            "trainer: rollout group needs G >= 2 outputs with rewards and advantages filled");
    }
    ObjectiveGrad out;
    out.grad.assign(p.parameters().size(), 0.0);
    const double inv_g = 1.0 / static_cast<double>(g);
    int clipped = 0;

    for (size_t i = 0; i < g; ++i) {
        const policy::Generation& gen = group.outputs[i];
        double old_sum = 0.0;
        for (double lp : gen.logprobs) old_sum += lp;
        std::vector<double> new_lps = p.sequence_logprobs(group.context, gen.tokens);
        double new_sum = 0.0;
        for (double lp : new_lps) new_sum += lp;
        double ratio = std::exp(new_sum - old_sum);
        double a = group.advantages[i];

        double clipped_ratio = std::clamp(ratio, 1.0 - cfg.eps_clip, 1.0 + cfg.eps_clip);
        double unclipped_val = ratio * a;
        double clipped_val = clipped_ratio * a;
        if (unclipped_val <= clipped_val) {
            out.objective += inv_g * unclipped_val;
            // ∇(ρA) = ρA·∇Σlog p
            std::vector<double> coeffs(gen.tokens.size(), inv_g * unclipped_val);
            p.add_logprob_grad(group.context, gen.tokens, coeffs, out.grad);
        } else {
            out.objective += inv_g * clipped_val;  // flat in θ: no gradient
            ++clipped;
        }

        // KL penalty toward the frozen reference
        double kl_i = kl_term(p, ref, group.context, gen.tokens, cfg.kl_estimator);
        out.kl += inv_g * kl_i;
        if (cfg.beta != 0.0) {
            if (cfg.kl_estimator == KLEstimator::exact_categorical) {
                policy::TokenSeq prefix;
                for (int tok : gen.tokens) {
                    std::vector<double> lp = p.next_logprobs(group.context, prefix);
                    std::vector<double> lq = ref.next_logprobs(group.context, prefix);
                    std::vector<double> coeffs(lp.size());
                    // d KL/dθ = Σ_v p_v (log p_v − log q_v) ∇log p_v
                    for (size_t v = 0; v < lp.size(); ++v) {
                        coeffs[v] = -cfg.beta * inv_g * std::exp(lp[v]) * (lp[v] - lq[v]);
                    }
                    p.add_step_dist_grad(group.context, prefix, coeffs, out.grad);
                    prefix.push_back(tok);
                }
            } else {
                std::vector<double> lp = p.sequence_logprobs(group.context, gen.tokens);
                std::vector<double> lq = ref.sequence_logprobs(group.context, gen.tokens);
                std::vector<double> coeffs(gen.tokens.size());
                // d(r − log r − 1)/d log p = 1 − r, with r = q/p
                for (size_t t = 0; t < coeffs.size(); ++t) {
                    coeffs[t] = -cfg.beta * inv_g * (1.0 - std::exp(lq[t] - lp[t]));
                }
                p.add_logprob_grad(group.context, gen.tokens, coeffs, out.grad);
            }
        }
    }
    out.objective -= cfg.beta * out.kl;
    out.clip_fraction = static_cast<double>(clipped) / static_cast<double>(g);
    return out;
}

std::string train_log_row_json(const TrainLogRow& row) {
    ordered_json obj = ordered_json::object();
    obj["step"] = row.step;
    auto put = [&](const char* key, const std::optional<double>& v) {
        if (v) {
            obj[key] = *v;
        } else {
            obj[key] = nullptr;
        }
    };
    put("mean_reward", row.mean_reward);
    put("mean_advantage_abs", row.mean_advantage_abs);
    put("kl", row.kl);
    put("clip_fraction", row.clip_fraction);
    put("loss", row.loss);
    return obj.dump();
}

void save_train_log(const std::string& path, const std::vector<TrainLogRow>& rows) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("trainer: cannot write training log " + path);
    for (const TrainLogRow& row : rows) out << train_log_row_json(row) << "\n";
}

std::vector<TrainLogRow> train_sft(policy::Policy& p, const std::vector<SFTExample>& dataset,
                                   int epochs, double lr, Rng& rng) {
    if (dataset.empty()) throw std::invalid_argument("trainer: sft dataset is empty");
    if (epochs < 0) throw std::invalid_argument("trainer: epochs must be >= 0");
    if (lr < 0.0) throw std::invalid_argument("trainer: learning rate must be >= 0");
    std::vector<TrainLogRow> log;
    std::vector<size_t> order(dataset.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    for (int epoch = 1; epoch <= epochs; ++epoch) {
        rng.shuffle(order);
        double epoch_loss = 0.0;
        for (size_t idx : order) {
            LossGrad lg = sft_loss(p, {dataset[idx]});
            epoch_loss += lg.loss;
            std::span<double> params = p.parameters();
            for (size_t k = 0; k < params.size(); ++k) params[k] -= lr * lg.grad[k];
        }
        TrainLogRow row;
        row.step = epoch;
        row.loss = epoch_loss / static_cast<double>(dataset.size());
        log.push_back(row);
    }
    return log;
}

std::vector<TrainLogRow> train_grpo(policy::Policy& p, const policy::Policy& ref,
                                    const std::vector<std::string>& contexts,
                                    const RewardFn& reward_fn, const GRPOConfig& cfg, long steps,
                                    Rng& rng) {
    cfg.validate();
    if (contexts.empty()) throw std::invalid_argument("trainer: no training contexts");
    if (steps < 0) throw std::invalid_argument("trainer: steps must be >= 0");
    if (!reward_fn) throw std::invalid_argument("trainer: reward function is required");

    std::vector<TrainLogRow> log;
    log.reserve(static_cast<size_t>(steps));
    std::unique_ptr<policy::Policy> rollout_policy;
    for (long step = 1; step <= steps; ++step) {
        if ((step - 1) % cfg.old_refresh_every == 0) rollout_policy = p.clone();
        size_t ci = cfg.context_draw == ContextDraw::round_robin
                        ? static_cast<size_t>((step - 1) % static_cast<long>(contexts.size()))
                        : static_cast<size_t>(rng.uniform(contexts.size()));
        const std::string& context = contexts[ci];

        RolloutGroup group;
        try {
            group = rollout_group(*rollout_policy, context, cfg, rng);
            group.rewards.reserve(group.outputs.size());
            for (const policy::Generation& gen : group.outputs) {
                group.rewards.push_back(reward_fn(ci, gen, p.decode(context, gen.tokens)));
            }
        } catch (const std::exception& e) {
            throw std::runtime_error("trainer: step " + std::to_string(step) + " failed: " +
                                     e.what());
        }
        group.advantages = compute_advantages(group.rewards, cfg.advantage_mode, cfg.sigma_floor);

        ObjectiveGrad og = grpo_objective(p, ref, group, cfg);
        std::span<double> params = p.parameters();
        for (size_t k = 0; k < params.size(); ++k) params[k] += cfg.lr * og.grad[k];

        TrainLogRow row;
        row.step = step;
        double mean_r = 0.0, mean_a = 0.0;
        for (double r : group.rewards) mean_r += r;
        for (double a : group.advantages) mean_a += std::abs(a);
        row.mean_reward = mean_r / static_cast<double>(group.rewards.size());
        row.mean_advantage_abs = mean_a / static_cast<double>(group.advantages.size());
        row.kl = og.kl;
        row.clip_fraction = og.clip_fraction;
        row.loss = -og.objective;
        log.push_back(row);
    }
    return log;
}

}  // namespace preferthinker::trainer
