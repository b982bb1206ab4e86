#include "preferthinker/reward.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <unordered_set>

#include "json.hpp"
#include "preferthinker/cot.hpp"
#include "preferthinker/hash.hpp"
#include "preferthinker/textmatch.hpp"

using ordered_json = nlohmann::ordered_json;

namespace preferthinker::reward {

namespace {

// greedy best-pair matching; returns the mean pair score over ground-truth
// entries, unmatched ground truth scoring 0
double greedy_set_similarity(size_t n_pred, size_t n_gt,
                             const std::function<double(size_t, size_t)>& pair_score) {
    if (n_gt == 0) throw std::invalid_argument("reward: ground-truth profile list is empty");
    struct Candidate {
        double score;
        size_t gi, pi;
    };
    std::vector<Candidate> candidates;
    candidates.reserve(n_pred * n_gt);
    for (size_t gi = 0; gi < n_gt; ++gi) {
        for (size_t pi = 0; pi < n_pred; ++pi) candidates.push_back({pair_score(pi, gi), gi, pi});
    }
    std::sort(candidates.begin(), candidates.end(), [](const Candidate& a, const Candidate& b) {
        if (a.score != b.score) return a.score > b.score;
        if (a.gi != b.gi) return a.gi < b.gi;
        return a.pi < b.pi;
    });
    std::vector<bool> gt_used(n_gt, false), pred_used(n_pred, false);
    double sum = 0.0;
    for (const Candidate& c : candidates) {
        if (gt_used[c.gi] || pred_used[c.pi]) continue;
        gt_used[c.gi] = true;
        pred_used[c.pi] = true;
        sum += c.score;
    }
    return sum / static_cast<double>(n_gt);
}

double side_text_similarity(const std::vector<PreferenceProfile>& pred,
                            const std::vector<PreferenceProfile>& gt,
                            const TextSimilarityFn& sim) {
    return greedy_set_similarity(pred.size(), gt.size(), [&](size_t pi, size_t gi) {
        return sim.sim(profile_to_text(pred[pi]), profile_to_text(gt[gi]));
    });
}

double side_image_similarity(const std::vector<PreferenceProfile>& pred,
                             const std::vector<PreferenceProfile>& gt,
                             const std::string& initial_prompt, const datagen::T2IBackend& t2i,
                             const ImageSimilarityFn& sim, uint64_t seed) {
    std::vector<Image> pred_imgs, gt_imgs;
    pred_imgs.reserve(pred.size());
    gt_imgs.reserve(gt.size());
    try {
        for (const auto& p : pred) pred_imgs.push_back(t2i.render(datagen::recaption(initial_prompt, p), seed));
        for (const auto& g : gt) gt_imgs.push_back(t2i.render(datagen::recaption(initial_prompt, g), seed));
    } catch (const std::exception& e) {
        throw std::runtime_error(std::string("reward: text-to-image backend failed while probing: ") +
                                 e.what());
    }
    return greedy_set_similarity(pred.size(), gt.size(), [&](size_t pi, size_t gi) {
        return sim.sim(pred_imgs[pi], gt_imgs[gi]);
    });
}

}  // namespace

std::vector<std::string> MockTextSimilarity::extract_terms(const std::string& text,
                                                           const Vocabulary& vocab) {
    const std::string text_lower = lower_ascii(text);
    std::vector<std::string> ids;
    for (VisualElement e : kAllElements) {
        const auto& terms = vocab.terms(e);
        for (const std::string& t : terms) {
            if (mentions_phrase(text_lower, t)) ids.push_back(element_key(e) + ":" + t);
        }
    }
    std::sort(ids.begin(), ids.end());
    return ids;
}

double MockTextSimilarity::sim(const std::string& a, const std::string& b) const {
    std::vector<std::string> ta = extract_terms(a, vocab_);
    std::vector<std::string> tb = extract_terms(b, vocab_);
    if (ta.empty() && tb.empty()) return 1.0;
    std::vector<std::string> inter, uni;
    std::set_intersection(ta.begin(), ta.end(), tb.begin(), tb.end(), std::back_inserter(inter));
    std::set_union(ta.begin(), ta.end(), tb.begin(), tb.end(), std::back_inserter(uni));
    return static_cast<double>(inter.size()) / static_cast<double>(uni.size());
}

double MockImageSimilarity::sim(const Image& a, const Image& b) const {
    datagen::StripeCode ca = datagen::decode_stripes(a);
    datagen::StripeCode cb = datagen::decode_stripes(b);
    int match = 0;
    for (int e = 0; e < kNumElements; ++e) {
        if (ca[static_cast<size_t>(e)] == cb[static_cast<size_t>(e)]) ++match;
    }
    return static_cast<double>(match) / kNumElements;
}

void RewardConfig::validate() const {
    if (w_p < 0 || w_f < 0 || w_a < 0 || w_img < 0 || w_text < 0) {
        throw std::invalid_argument("reward: weights must be non-negative");
    }
    if (std::abs(w_img + w_text - 1.0) > 1e-12) {
        throw std::invalid_argument("reward: w_img + w_text must equal 1");
    }
    if (tau < 0.0 || tau > 1.0) throw std::invalid_argument("reward: tau must lie in [0, 1]");
}

int format_reward(const std::string& resp_text) {
    return cot::parse_response(resp_text, cot::ParseMode::strict).ok ? 1 : 0;
}

int accuracy_reward(const std::optional<std::string>& answer, const std::string& gt_answer) {
    return answer && *answer == gt_answer ? 1 : 0;
}

double text_similarity_score(const std::vector<PreferenceProfile>& pred_pos,
                             const std::vector<PreferenceProfile>& pred_neg,
                             const std::vector<PreferenceProfile>& gt_pos,
                             const std::vector<PreferenceProfile>& gt_neg,
                             const TextSimilarityFn& sim, bool normalize) {
    double both = side_text_similarity(pred_pos, gt_pos, sim) +
                  side_text_similarity(pred_neg, gt_neg, sim);
    return normalize ? 0.5 * both : both;
}

double image_similarity_score(const std::vector<PreferenceProfile>& pred_pos,
                              const std::vector<PreferenceProfile>& pred_neg,
                              const std::vector<PreferenceProfile>& gt_pos,
                              const std::vector<PreferenceProfile>& gt_neg,
                              const std::string& initial_prompt, const datagen::T2IBackend& t2i,
                              const ImageSimilarityFn& sim, uint64_t seed, bool normalize) {
    if (initial_prompt.empty()) {
        throw std::invalid_argument("reward: probe prompt must be non-empty");
    }
    double both = side_image_similarity(pred_pos, gt_pos, initial_prompt, t2i, sim, seed) +
                  side_image_similarity(pred_neg, gt_neg, initial_prompt, t2i, sim, seed);
    return normalize ? 0.5 * both : both;
}

double prediction_reward(double s_text, double s_img, const RewardConfig& cfg) {
    return cfg.w_img * s_img + cfg.w_text * s_text;
}

std::string probe_prompt_for(const datagen::UserSample& sample, const RewardConfig& cfg) {
    if (cfg.probe_prompt_policy == ProbePromptPolicy::fixed) return cfg.fixed_probe_prompt;
    if (sample.initial_prompts.empty()) {
        throw std::invalid_argument("reward: sample has no initial prompts to probe with");
    }
    return sample.initial_prompts.front();
}

RewardBreakdown total_reward(const std::string& resp_text, const datagen::UserSample& sample,
                             const RewardConfig& cfg, const RewardBackends& backends) {
    cfg.validate();
    if (!backends.t2i || !backends.text_sim || !backends.img_sim) {
        throw std::invalid_argument("reward: all three backends must be wired");
    }
    RewardBreakdown b;
    cot::ParseOutcome po = cot::parse_response(resp_text, cot::ParseMode::strict);
    if (!po.ok) {
        // parse failure zeroes every component; total stays the exact weighted sum
        b.total = cfg.w_p * b.r_predict + cfg.w_f * b.r_format + cfg.w_a * b.r_accuracy;
        return b;
    }
    const cot::CoTResponse& r = po.response;
    b.r_format = 1.0;
    b.r_accuracy = accuracy_reward(r.answer, sample.gt_answer);
    const auto& gt = sample.profile_set;
    b.s_text = text_similarity_score(r.predicted_preferences, r.predicted_non_preferences,
                                     gt.preferences, gt.non_preferences, *backends.text_sim,
                                     cfg.normalize_similarities);
    uint64_t seed = mix_seed(cfg.probe_seed, sample.user_id);
    b.s_img = image_similarity_score(r.predicted_preferences, r.predicted_non_preferences,
                                     gt.preferences, gt.non_preferences,
                                     probe_prompt_for(sample, cfg), *backends.t2i,
                                     *backends.img_sim, seed, cfg.normalize_similarities);
    b.r_predict = prediction_reward(b.s_text, b.s_img, cfg);
    b.total = cfg.w_p * b.r_predict + cfg.w_f * b.r_format + cfg.w_a * b.r_accuracy;
    return b;
}

std::string reward_debug_json(const RewardBreakdown& b, const RewardConfig& cfg,
                              const std::string& probe_prompt, uint64_t seed) {
    ordered_json obj = ordered_json::object();
    obj["r_format"] = b.r_format;
    obj["r_accuracy"] = b.r_accuracy;
    obj["s_text"] = b.s_text;
    obj["s_img"] = b.s_img;
    obj["r_predict"] = b.r_predict;
    obj["total"] = b.total;
    obj["weights"] = ordered_json::object();
    obj["weights"]["w_p"] = cfg.w_p;
    obj["weights"]["w_f"] = cfg.w_f;
    obj["weights"]["w_a"] = cfg.w_a;
    obj["weights"]["w_img"] = cfg.w_img;
    obj["weights"]["w_text"] = cfg.w_text;
    obj["probe_prompt"] = probe_prompt;
    obj["seed"] = seed;
    return obj.dump(2);
}

}  // namespace preferthinker::reward
