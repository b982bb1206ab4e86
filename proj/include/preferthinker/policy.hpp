#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "preferthinker/rng.hpp"

namespace preferthinker::policy {

using TokenSeq = std::vector<int>;

struct Generation {
    TokenSeq tokens;
    std::vector<double> logprobs;  // per token, at temperature 1
    bool truncated = false;

    bool operator==(const Generation&) const = default;
};

// Abstract autoregressive policy over integer tokens. All log-probability
// accounting happens at temperature 1 (the policy's true distribution);
// temperature only reshapes sampling inside generate. Consequently the
// log-probs generate reports equal sequence_logprobs recomputed on its own
// output, at any sampling temperature.
class Policy {
public:
    virtual ~Policy() = default;

    virtual int vocab_size() const = 0;

    // temperature >= 0 (0 = greedy argmax); max_len > 0. Outputs that hit
    // max_len without finishing are flagged truncated.
    virtual Generation generate(const std::string& context, double temperature, int max_len,
                                Rng& rng) const = 0;

    // per-token log P(token_t | context, tokens_<t) under the current parameters
    virtual std::vector<double> sequence_logprobs(const std::string& context,
                                                  const TokenSeq& tokens) const = 0;

    // full next-token log-distribution after the prefix; exp sums to 1
    virtual std::vector<double> next_logprobs(const std::string& context,
                                              const TokenSeq& prefix) const = 0;

    // grad += Σ_t coeffs[t] · ∇_θ log P(token_t | context, tokens_<t)
    virtual void add_logprob_grad(const std::string& context, const TokenSeq& tokens,
                                  std::span<const double> coeffs,
                                  std::vector<double>& grad) const = 0;

    // grad += Σ_v coeffs[v] · ∇_θ log P(v | context, prefix) over the whole
    // vocabulary (used by the exact KL gradient)
    virtual void add_step_dist_grad(const std::string& context, const TokenSeq& prefix,
                                    std::span<const double> coeffs,
                                    std::vector<double>& grad) const = 0;

    virtual std::span<double> parameters() = 0;
    virtual std::span<const double> parameters() const = 0;
    size_t n_params() const { return const_cast<const Policy*>(this)->parameters().size(); }

    // deep copy (used for frozen reference policies and stale rollout policies)
    virtual std::unique_ptr<Policy> clone() const = 0;

    virtual std::string decode(const std::string& context, const TokenSeq& tokens) const = 0;
    // inverse of decode where possible; nullopt when the text is not
    // representable (out-of-vocabulary)
    virtual std::optional<TokenSeq> tokenize(const std::string& context,
                                             const std::string& text) const = 0;

    // short id written into checkpoints
    virtual std::string kind() const = 0;
};

// Softmax catalog policy: per context, a categorical distribution over K
// catalog entries; each emitted token is one catalog choice and decodes to
// that entry's full response text. Log-probs are closed-form, gradients are
// hand-derived — the reference policy for gradient oracles.
class CatalogPolicy : public Policy {
public:
    using EntryTextFn = std::function<std::string(const std::string& context, int entry)>;

    CatalogPolicy(std::vector<std::string> contexts, int n_entries, EntryTextFn entry_text);

    int vocab_size() const override { return n_entries_; }
    Generation generate(const std::string& context, double temperature, int max_len,
                        Rng& rng) const override;
    std::vector<double> sequence_logprobs(const std::string& context,
                                          const TokenSeq& tokens) const override;
    std::vector<double> next_logprobs(const std::string& context,
                                      const TokenSeq& prefix) const override;
    void add_logprob_grad(const std::string& context, const TokenSeq& tokens,
                          std::span<const double> coeffs, std::vector<double>& grad) const override;
    void add_step_dist_grad(const std::string& context, const TokenSeq& prefix,
                            std::span<const double> coeffs,
                            std::vector<double>& grad) const override;
    std::span<double> parameters() override { return logits_; }
    std::span<const double> parameters() const override { return logits_; }
    std::unique_ptr<Policy> clone() const override;
    std::string decode(const std::string& context, const TokenSeq& tokens) const override;
    std::optional<TokenSeq> tokenize(const std::string& context,
                                     const std::string& text) const override;
    std::string kind() const override { return "catalog"; }

    const std::vector<std::string>& contexts() const { return contexts_; }
    // maps a context onto its logit row; virtual so subclasses can pool many
    // concrete contexts onto shared rows. Throws on an unknown context.
    virtual int context_index(const std::string& context) const;
    std::string entry_text(const std::string& context, int entry) const;
    // probabilities over entries for one context, at temperature 1
    std::vector<double> entry_probs(const std::string& context) const;

private:
    std::vector<double> log_softmax(int ctx_index) const;

    std::vector<std::string> contexts_;
    std::unordered_map<std::string, int> context_index_;
    int n_entries_ = 0;
    EntryTextFn entry_text_;
    std::vector<double> logits_;  // [context][entry], row-major
};

// Tiny bigram language model over a symbol vocabulary that covers the
// response grammar (tags, score-line fragments, digits, lowercase text).
// Context-independent: the symbol transition table is the whole model. It
// exists to exercise token-level ratio/KL mechanics, not to model language.
class TinyLMPolicy : public Policy {
public:
    TinyLMPolicy();

    int vocab_size() const override { return n_symbols_; }
    Generation generate(const std::string& context, double temperature, int max_len,
                        Rng& rng) const override;
    std::vector<double> sequence_logprobs(const std::string& context,
                                          const TokenSeq& tokens) const override;
    std::vector<double> next_logprobs(const std::string& context,
                                      const TokenSeq& prefix) const override;
    void add_logprob_grad(const std::string& context, const TokenSeq& tokens,
                          std::span<const double> coeffs, std::vector<double>& grad) const override;
    void add_step_dist_grad(const std::string& context, const TokenSeq& prefix,
                            std::span<const double> coeffs,
                            std::vector<double>& grad) const override;
    std::span<double> parameters() override { return logits_; }
    std::span<const double> parameters() const override { return logits_; }
    std::unique_ptr<Policy> clone() const override;
    std::string decode(const std::string& context, const TokenSeq& tokens) const override;
    std::optional<TokenSeq> tokenize(const std::string& context,
                                     const std::string& text) const override;
    std::string kind() const override { return "tiny-lm"; }

    int eos_token() const { return kEos; }
    const std::vector<std::string>& symbols() const { return symbols_; }

private:
    static constexpr int kEos = 0;  // also the start-of-sequence row

    int prev_row(const TokenSeq& prefix) const;

    std::vector<std::string> symbols_;  // symbols_[0] reserved for EOS
    int n_symbols_ = 0;
    std::vector<double> logits_;  // [prev symbol][next symbol], row-major
};

// Checkpoint files: JSON with the policy kind, a config fingerprint, the flat
// parameter vector and free-form metadata.
void save_checkpoint(const std::string& path, const Policy& policy, uint64_t config_hash,
                     const std::vector<std::pair<std::string, std::string>>& meta = {});
struct CheckpointInfo {
    std::string kind;
    uint64_t config_hash = 0;
    std::vector<std::pair<std::string, std::string>> meta;
};
// loads parameters into policy (kind and parameter count must match)
CheckpointInfo load_checkpoint(const std::string& path, Policy& policy);

}  // namespace preferthinker::policy
