#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "preferthinker/datagen.hpp"
#include "preferthinker/image.hpp"
#include "preferthinker/profile.hpp"

namespace preferthinker::reward {

// Text semantic similarity in [0,1]; a real deployment would wrap a sentence
// embedder here.
class TextSimilarityFn {
public:
    virtual ~TextSimilarityFn() = default;
    virtual double sim(const std::string& a, const std::string& b) const = 0;
};

// Jaccard overlap of canonicalized vocabulary terms extracted from each text
// (element-qualified, whole-phrase matches). Two texts with no vocabulary
// terms at all count as identical.
class MockTextSimilarity final : public TextSimilarityFn {
public:
    explicit MockTextSimilarity(Vocabulary vocab) : vocab_(std::move(vocab)) {}
    double sim(const std::string& a, const std::string& b) const override;

    // "art_style:cubism"-style canonical ids of every mentioned term, sorted
    static std::vector<std::string> extract_terms(const std::string& text, const Vocabulary& vocab);

private:
    Vocabulary vocab_;
};

// Perceptual image similarity in [0,1]; a real deployment would wrap a
// perceptual embedding model here.
class ImageSimilarityFn {
public:
    virtual ~ImageSimilarityFn() = default;
    virtual double sim(const Image& a, const Image& b) const = 0;
};

// Decodes the stripe-encoded element states of both mock images and returns
// (matching elements) / 5; two "none" states match.
class MockImageSimilarity final : public ImageSimilarityFn {
public:
    double sim(const Image& a, const Image& b) const override;
};

enum class ProbePromptPolicy {
    first_initial,  // the sample's first initial prompt
    fixed,          // one global probe prompt for every sample
};

struct RewardConfig {
    double w_p = 0.7;  // prediction reward weight
    double w_f = 0.3;  // format reward weight
    double w_a = 1.0;  // accuracy reward weight
    double w_img = 0.5;
    double w_text = 0.5;
    double tau = 0.8;  // profile-similarity filter threshold (shared default)
    // averaged pair similarity (true) keeps s_text/s_img in [0,1]; false
    // restores the raw two-term sum in [0,2]
    bool normalize_similarities = true;
    ProbePromptPolicy probe_prompt_policy = ProbePromptPolicy::first_initial;
    std::string fixed_probe_prompt = "a scenic landscape";
    uint64_t probe_seed = 0;

    void validate() const;  // weights >= 0, w_img + w_text = 1, tau in [0,1]
};

struct RewardBreakdown {
    double r_format = 0.0;    // {0,1}
    double r_accuracy = 0.0;  // {0,1}
    double s_text = 0.0;
    double s_img = 0.0;
    double r_predict = 0.0;
    double total = 0.0;  // exactly w_p*r_predict + w_f*r_format + w_a*r_accuracy
};

// 1 iff the text strict-parses per the response grammar
int format_reward(const std::string& resp_text);

// 1 iff answer is present and equals gt_answer
int accuracy_reward(const std::optional<std::string>& answer, const std::string& gt_answer);

// Similarity of predicted to ground-truth profiles on their serialized text.
// Each side greedily pair-matches predicted to ground-truth profiles
// (best-pair first, unmatched ground truth scores 0, surplus predictions are
// ignored) and averages over ground-truth profiles; the two sides are then
// averaged (normalize=true) or summed (false).
double text_similarity_score(const std::vector<PreferenceProfile>& pred_pos,
                             const std::vector<PreferenceProfile>& pred_neg,
                             const std::vector<PreferenceProfile>& gt_pos,
                             const std::vector<PreferenceProfile>& gt_neg,
                             const TextSimilarityFn& sim, bool normalize = true);

// Renders the probe prompt recaptioned with predicted vs ground-truth
// profiles (shared render seed) and compares the images; pair matching and
// aggregation mirror text_similarity_score.
double image_similarity_score(const std::vector<PreferenceProfile>& pred_pos,
                              const std::vector<PreferenceProfile>& pred_neg,
                              const std::vector<PreferenceProfile>& gt_pos,
                              const std::vector<PreferenceProfile>& gt_neg,
                              const std::string& initial_prompt, const datagen::T2IBackend& t2i,
                              const ImageSimilarityFn& sim, uint64_t seed, bool normalize = true);

double prediction_reward(double s_text, double s_img, const RewardConfig& cfg);

struct RewardBackends {
    const datagen::T2IBackend* t2i = nullptr;
    const TextSimilarityFn* text_sim = nullptr;
    const ImageSimilarityFn* img_sim = nullptr;
};

// the probe prompt this config selects for this sample
std::string probe_prompt_for(const datagen::UserSample& sample, const RewardConfig& cfg);

// Full hybrid reward for one response. A strict-parse failure zeroes every
// component. The render seed for image probes derives from (cfg.probe_seed,
// sample.user_id), so groups of responses for one sample share their probes.
RewardBreakdown total_reward(const std::string& resp_text, const datagen::UserSample& sample,
                             const RewardConfig& cfg, const RewardBackends& backends);

// single-response debug record for the CLI
std::string reward_debug_json(const RewardBreakdown& b, const RewardConfig& cfg,
                              const std::string& probe_prompt, uint64_t seed);

}  // namespace preferthinker::reward
