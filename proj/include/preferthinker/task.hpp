#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "preferthinker/datagen.hpp"
#include "preferthinker/policy.hpp"
#include "preferthinker/profile.hpp"
#include "preferthinker/trainer.hpp"

namespace preferthinker::task {

// ---------------------------------------------------------------------------
// Synthetic catalog task: a 64-context, 8-entry bandit with a deterministic
// reward table (exactly one rewarded entry per context). Ships with a tuned
// trainer configuration; used as the convergence oracle for the GRPO loop.

struct SyntheticCatalogTask {
    std::vector<std::string> contexts;         // "ctx00".."ctx63"
    int n_entries = 8;
    std::vector<std::vector<double>> rewards;  // [context][entry]: 1 on the best entry, else 0
    std::vector<int> best_entry;               // argmax per context
    trainer::GRPOConfig config;                // tuned step size + draw strategy

    std::unique_ptr<policy::CatalogPolicy> make_policy() const;
    trainer::RewardFn reward_fn() const;  // reads the table; ignores the decoded text
};

SyntheticCatalogTask make_synthetic_catalog_task(uint64_t seed = 4242);

// ---------------------------------------------------------------------------
// Assessment task: the personalized image-assessment problem itself. The
// policy observes only what an assessor could see — profiles decoded from the
// reference images plus the two candidates — never the stored ground truth.

struct AssessmentObservation {
    PreferenceProfile candidate_1;
    PreferenceProfile candidate_2;
    std::vector<PreferenceProfile> preferences;      // distinct, first-appearance order
    std::vector<PreferenceProfile> non_preferences;  // distinct, first-appearance order

    // best per-candidate agreement with any observed preference profile
    int match_1() const;
    int match_2() const;
    bool first_is_better() const { return match_1() >= match_2(); }

    // canonical one-line serialization; parse() inverts it
    std::string context_string() const;
    static AssessmentObservation parse(const std::string& context);
    static bool looks_like_context(const std::string& context);

    // logit-row key: observations pool onto (match_1, match_2) cells
    std::string key() const;
    static std::vector<std::string> all_keys();  // 36 cells, row-major

    bool operator==(const AssessmentObservation&) const = default;
};

// Builds the observation for one sample by reading and decoding its images.
AssessmentObservation observe_sample(const datagen::UserSample& sample,
                                     const std::string& dataset_dir, const Vocabulary& vocab);

// Contexts for a whole dataset slice, aligned with `samples`.
std::vector<std::string> observation_contexts(const std::vector<datagen::UserSample>& samples,
                                              const std::string& dataset_dir,
                                              const Vocabulary& vocab, int jobs = 1);

// Catalog policy over eight behaviorally distinct response templates. Logits
// are pooled per (match_1, match_2) cell, so what is learned on one user
// transfers to every user whose observation lands in the same cell; the
// emitted text is always expanded against the concrete observation.
class AssessmentPolicy : public policy::CatalogPolicy {
public:
    static constexpr int kNumEntries = 8;

    enum Entry : int {
        faithful = 0,        // observed profiles, consistent scores, best-matching answer
        flipped = 1,         // consistent scores but argued for the other image
        sloppy = 2,          // correct answer, but profiles reported only partially
        swapped_sides = 3,   // correct answer, preference sides interchanged
        flipped_sloppy = 4,  // wrong answer and partial profiles
        missing_answer = 5,  // stops before the answer block
        tied_scores = 6,     // all-fives scoring, tied totals, defaults to Image 1
        freeform_prose = 7,  // free prose, no structured blocks at all
    };

    AssessmentPolicy();

    int context_index(const std::string& context) const override;
    std::optional<policy::TokenSeq> tokenize(const std::string& context,
                                             const std::string& text) const override;
    std::unique_ptr<policy::Policy> clone() const override;
    std::string kind() const override { return "assessment"; }

    // template expansion against a concrete observation context
    static std::string entry_response(const std::string& context, int entry);

    // structural classification: which template class does this text realize
    // under this observation? nullopt when none does.
    static std::optional<int> classify_response(const AssessmentObservation& obs,
                                                const std::string& text);
};

}  // namespace preferthinker::task
