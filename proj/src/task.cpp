#include "preferthinker/task.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <stdexcept>

#include "preferthinker/cot.hpp"
#include "preferthinker/image.hpp"
#include "preferthinker/parallel.hpp"

namespace fs = std::filesystem;

namespace preferthinker::task {

// ---------------------------------------------------------------------------
// Synthetic catalog task

std::unique_ptr<policy::CatalogPolicy> SyntheticCatalogTask::make_policy() const {
    return std::make_unique<policy::CatalogPolicy>(
        contexts, n_entries, [](const std::string& context, int entry) {
            return "For " + context + " the assessor argues line " + std::to_string(entry) +
                   " and stands by it.";
        });
}

trainer::RewardFn SyntheticCatalogTask::reward_fn() const {
    std::vector<std::vector<double>> table = rewards;
    return [table](size_t context_index, const policy::Generation& gen, const std::string&) {
        if (context_index >= table.size()) {
            throw std::out_of_range("task: synthetic reward context out of range");
        }
        const auto& row = table[context_index];
        double r = 0.0;
        for (int tok : gen.tokens) {
            if (tok < 0 || tok >= static_cast<int>(row.size())) {
                throw std::out_of_range("task: synthetic reward token out of range");
            }
            r += row[static_cast<size_t>(tok)];
        }
        return r;
    };
}

SyntheticCatalogTask make_synthetic_catalog_task(uint64_t seed) {
    SyntheticCatalogTask t;
    const int n_ctx = 64;
    t.contexts.reserve(n_ctx);
    for (int i = 0; i < n_ctx; ++i) {
        char buf[8];
        std::snprintf(buf, sizeof(buf), "ctx%02d", i);
        t.contexts.emplace_back(buf);
    }
    t.rewards.assign(n_ctx, std::vector<double>(static_cast<size_t>(t.n_entries), 0.0));
    t.best_entry.resize(n_ctx);
    Rng rng(seed);
    for (int c = 0; c < n_ctx; ++c) {
        int b = static_cast<int>(rng.uniform(static_cast<uint64_t>(t.n_entries)));
        t.rewards[static_cast<size_t>(c)][static_cast<size_t>(b)] = 1.0;
        t.best_entry[static_cast<size_t>(c)] = b;
    }
    // step size tuned so round-robin visits converge well inside 500 steps
    t.config.lr = 16.0;
    t.config.context_draw = trainer::ContextDraw::round_robin;
    return t;
}

// ---------------------------------------------------------------------------
// AssessmentObservation

namespace {

constexpr const char* kContextSentinel = "assess-v1|";

int best_match(const std::vector<PreferenceProfile>& prefs, const PreferenceProfile& cand) {
    int best = 0;
    for (const auto& p : prefs) best = std::max(best, p.matching_elements(cand));
    return best;
}

std::string safe_profile_text(const PreferenceProfile& p) {
    std::string t = profile_to_text(p);
    if (t.find('|') != std::string::npos || t.find('~') != std::string::npos) {
        throw std::invalid_argument("task: profile text collides with context delimiters: " + t);
    }
    return t;
}

std::vector<std::string> split_on(const std::string& s, char sep) {
    std::vector<std::string> out;
    size_t start = 0;
    while (true) {
        size_t pos = s.find(sep, start);
        if (pos == std::string::npos) {
            out.push_back(s.substr(start));
            return out;
        }
        out.push_back(s.substr(start, pos - start));
        start = pos + 1;
    }
}

std::string expect_field(const std::string& part, const std::string& name) {
    const std::string head = name + "=";
    if (part.rfind(head, 0) != 0) {
        throw std::invalid_argument("task: malformed observation context, expected field '" +
                                    name + "' in '" + part + "'");
    }
    return part.substr(head.size());
}

std::vector<PreferenceProfile> parse_profile_list(const std::string& value,
                                                  const std::string& what) {
    std::vector<PreferenceProfile> out;
    for (const std::string& chunk : split_on(value, '~')) {
        out.push_back(parse_profile_text(chunk).profile);
    }
    if (out.empty()) {
        throw std::invalid_argument("task: observation context has no " + what + " profiles");
    }
    return out;
}

}  // namespace

int AssessmentObservation::match_1() const { return best_match(preferences, candidate_1); }
int AssessmentObservation::match_2() const { return best_match(preferences, candidate_2); }

std::string AssessmentObservation::context_string() const {
    if (preferences.empty() || non_preferences.empty()) {
        throw std::invalid_argument("task: observation needs at least one profile per side");
    }
    std::string out = kContextSentinel;
    out += "cand1=" + safe_profile_text(candidate_1);
    out += "|cand2=" + safe_profile_text(candidate_2);
    out += "|prefs=";
    for (size_t i = 0; i < preferences.size(); ++i) {
        if (i) out += "~";
        out += safe_profile_text(preferences[i]);
    }
    out += "|nonprefs=";
    for (size_t i = 0; i < non_preferences.size(); ++i) {
        if (i) out += "~";
        out += safe_profile_text(non_preferences[i]);
    }
    return out;
}

bool AssessmentObservation::looks_like_context(const std::string& context) {
    return context.rfind(kContextSentinel, 0) == 0;
}

AssessmentObservation AssessmentObservation::parse(const std::string& context) {
    if (!looks_like_context(context)) {
        throw std::invalid_argument("task: not an observation context: " + context);
    }
    std::vector<std::string> parts =
        split_on(context.substr(std::string(kContextSentinel).size()), '|');
    if (parts.size() != 4) {
        throw std::invalid_argument("task: observation context needs exactly 4 fields, got " +
                                    std::to_string(parts.size()));
    }
    AssessmentObservation obs;
    obs.candidate_1 = parse_profile_text(expect_field(parts[0], "cand1")).profile;
    obs.candidate_2 = parse_profile_text(expect_field(parts[1], "cand2")).profile;
    obs.preferences = parse_profile_list(expect_field(parts[2], "prefs"), "preference");
    obs.non_preferences = parse_profile_list(expect_field(parts[3], "nonprefs"), "non-preference");
    return obs;
}

std::string AssessmentObservation::key() const {
    return "m1=" + std::to_string(match_1()) + ";m2=" + std::to_string(match_2());
}

std::vector<std::string> AssessmentObservation::all_keys() {
    std::vector<std::string> keys;
    keys.reserve(static_cast<size_t>((kNumElements + 1) * (kNumElements + 1)));
    for (int a = 0; a <= kNumElements; ++a) {
        for (int b = 0; b <= kNumElements; ++b) {
            keys.push_back("m1=" + std::to_string(a) + ";m2=" + std::to_string(b));
        }
    }
    return keys;
}

AssessmentObservation observe_sample(const datagen::UserSample& sample,
                                     const std::string& dataset_dir, const Vocabulary& vocab) {
    auto decode_at = [&](const std::string& rel_path) {
        Image img = read_png((fs::path(dataset_dir) / rel_path).string());
        return datagen::decode_stripes_to_profile(img, vocab);
    };
    auto collect = [&](const std::vector<datagen::ImageRef>& refs) {
        std::vector<PreferenceProfile> out;
        for (const datagen::ImageRef& r : refs) {
            PreferenceProfile p = decode_at(r.path);
            if (std::find(out.begin(), out.end(), p) == out.end()) out.push_back(p);
        }
        return out;
    };
    AssessmentObservation obs;
    obs.candidate_1 = decode_at(sample.candidate_1.path);
    obs.candidate_2 = decode_at(sample.candidate_2.path);
    obs.preferences = collect(sample.preferred_refs);
    obs.non_preferences = collect(sample.non_preferred_refs);
    if (obs.preferences.empty() || obs.non_preferences.empty()) {
        throw std::runtime_error("task: sample " + sample.user_id +
                                 " has no decodable reference profiles");
    }
    return obs;
}

std::vector<std::string> observation_contexts(const std::vector<datagen::UserSample>& samples,
                                              const std::string& dataset_dir,
                                              const Vocabulary& vocab, int jobs) {
    std::vector<std::string> out(samples.size());
    run_indexed(static_cast<int>(samples.size()), jobs, [&](int i) {
        out[static_cast<size_t>(i)] =
            observe_sample(samples[static_cast<size_t>(i)], dataset_dir, vocab)
                .context_string();
    });
    return out;
}

// ---------------------------------------------------------------------------
// AssessmentPolicy

namespace {

PreferenceProfile degrade_profile(const PreferenceProfile& p) {
    // keep alternating elements only: a recognizable but lossy report
    PreferenceProfile out;
    for (size_t i = 0; i < kAllElements.size(); i += 2) {
        const auto& t = p.term(kAllElements[i]);
        if (t) out.set(kAllElements[i], *t);
    }
    return out;
}

std::vector<PreferenceProfile> degrade_set(const std::vector<PreferenceProfile>& ps) {
    std::vector<PreferenceProfile> out;
    out.reserve(ps.size());
    for (const auto& p : ps) out.push_back(degrade_profile(p));
    return out;
}

struct ScoreTable {
    std::array<std::array<int, 2>, static_cast<size_t>(kNumElements)> scores{};
    std::array<int, 2> totals{};
    int best_image = 1;  // 1-based; the side the observation favors
};

// Scores each candidate element-wise against the preference profile that best
// matches the favored candidate; a tie in totals is broken toward the favored
// side so the table always names a unique leader.
ScoreTable build_score_table(const AssessmentObservation& obs) {
    ScoreTable t;
    const int m1 = obs.match_1(), m2 = obs.match_2();
    t.best_image = m1 >= m2 ? 1 : 2;
    const PreferenceProfile& best_cand = t.best_image == 1 ? obs.candidate_1 : obs.candidate_2;
    const PreferenceProfile* anchor = &obs.preferences.front();
    int anchor_match = -1;
    for (const auto& p : obs.preferences) {
        int m = p.matching_elements(best_cand);
        if (m > anchor_match) {
            anchor_match = m;
            anchor = &p;
        }
    }
    auto element_score = [&](const PreferenceProfile& cand, VisualElement e) {
        const auto& ct = cand.term(e);
        const auto& at = anchor->term(e);
        return (ct && at && *ct == *at) ? 9 : 2;
    };
    for (size_t ei = 0; ei < kAllElements.size(); ++ei) {
        t.scores[ei][0] = element_score(obs.candidate_1, kAllElements[ei]);
        t.scores[ei][1] = element_score(obs.candidate_2, kAllElements[ei]);
        t.totals[0] += t.scores[ei][0];
        t.totals[1] += t.scores[ei][1];
    }
    if (t.totals[0] == t.totals[1]) {
        size_t side = static_cast<size_t>(t.best_image - 1);
        t.scores[kAllElements.size() - 1][side] += 1;
        t.totals[side] += 1;
    }
    return t;
}

cot::CoTResponse aligned_response(const AssessmentObservation& obs, const ScoreTable& t,
                                  bool flip_answer) {
    cot::CoTResponse r;
    r.predicted_preferences = obs.preferences;
    r.predicted_non_preferences = obs.non_preferences;
    for (size_t ei = 0; ei < kAllElements.size(); ++ei) {
        r.scores[ei][0] = t.scores[ei][0];
        r.scores[ei][1] = t.scores[ei][1];
    }
    r.totals[0] = t.totals[0];
    r.totals[1] = t.totals[1];
    if (flip_answer) {
        for (size_t ei = 0; ei < kAllElements.size(); ++ei) {
            std::swap(r.scores[ei][0], r.scores[ei][1]);
        }
        std::swap(r.totals[0], r.totals[1]);
        r.answer = t.best_image == 1 ? "Image 2" : "Image 1";
    } else {
        r.answer = t.best_image == 1 ? "Image 1" : "Image 2";
    }
    return r;
}

std::string profile_block_text(const std::vector<PreferenceProfile>& profiles) {
    if (profiles.size() == 1) return profile_to_text(profiles[0]);
    std::string out;
    for (size_t i = 0; i < profiles.size(); ++i) {
        if (i) out += "\n";
        out += std::to_string(i + 1) + ". " + profile_to_text(profiles[i]);
    }
    return out;
}

// The one response shape render_response refuses to produce: a fence-sitting
// scorecard with tied totals. Mirrors the canonical layout exactly.
std::string tied_response_text(const AssessmentObservation& obs) {
    std::string out;
    out += cot::kPrefOpen;
    out += "\n" + profile_block_text(obs.preferences) + "\n";
    out += cot::kPrefClose;
    out += "\n";
    out += cot::kNonPrefOpen;
    out += "\n" + profile_block_text(obs.non_preferences) + "\n";
    out += cot::kNonPrefClose;
    out += "\n";
    out += cot::kThinkOpen;
    out += "\n";
    for (VisualElement e : kAllElements) {
        out += "Dimension: " + element_display_name(e) + " | Image 1: 5/10 | Image 2: 5/10\n";
    }
    out += "Total | Image 1: 25/50 | Image 2: 25/50\n";
    out += cot::kThinkClose;
    out += "\n";
    out += cot::kAnswerOpen;
    out += "\nImage 1\n";
    out += cot::kAnswerClose;
    return out;
}

constexpr const char* kProseResponse =
    "Both pictures respond to the brief with real confidence. The first leans into bolder "
    "shapes while the second keeps things quieter, and either could plausibly delight the "
    "viewer. On balance it feels premature to commit, so the comparison remains open.";

}  // namespace

AssessmentPolicy::AssessmentPolicy()
    : policy::CatalogPolicy(AssessmentObservation::all_keys(), kNumEntries,
                            [](const std::string& context, int entry) {
                                return entry_response(context, entry);
                            }) {}

int AssessmentPolicy::context_index(const std::string& context) const {
    if (AssessmentObservation::looks_like_context(context)) {
        return policy::CatalogPolicy::context_index(AssessmentObservation::parse(context).key());
    }
    return policy::CatalogPolicy::context_index(context);
}

std::unique_ptr<policy::Policy> AssessmentPolicy::clone() const {
    auto copy = std::make_unique<AssessmentPolicy>();
    std::span<const double> src = parameters();
    std::span<double> dst = copy->parameters();
    std::copy(src.begin(), src.end(), dst.begin());
    return copy;
}

std::string AssessmentPolicy::entry_response(const std::string& context, int entry) {
    AssessmentObservation obs = AssessmentObservation::parse(context);
    ScoreTable table = build_score_table(obs);
    switch (entry) {
        case faithful: return cot::render_response(aligned_response(obs, table, false));
        case flipped: return cot::render_response(aligned_response(obs, table, true));
        case sloppy: {
            cot::CoTResponse r = aligned_response(obs, table, false);
            r.predicted_preferences = degrade_set(obs.preferences);
            r.predicted_non_preferences = degrade_set(obs.non_preferences);
            return cot::render_response(r);
        }
        case swapped_sides: {
            cot::CoTResponse r = aligned_response(obs, table, false);
            std::swap(r.predicted_preferences, r.predicted_non_preferences);
            return cot::render_response(r);
        }
        case flipped_sloppy: {
            cot::CoTResponse r = aligned_response(obs, table, true);
            r.predicted_preferences = degrade_set(obs.preferences);
            r.predicted_non_preferences = degrade_set(obs.non_preferences);
            return cot::render_response(r);
        }
        case missing_answer: {
            std::string full = cot::render_response(aligned_response(obs, table, false));
            size_t pos = full.rfind(std::string("\n") + cot::kAnswerOpen);
            return full.substr(0, pos);
        }
        case tied_scores: return tied_response_text(obs);
        case freeform_prose: return kProseResponse;
        default: throw std::invalid_argument("task: assessment entry out of range");
    }
}

std::optional<int> AssessmentPolicy::classify_response(const AssessmentObservation& obs,
                                                       const std::string& text) {
    cot::ParseOutcome outcome = cot::parse_response(text, cot::ParseMode::strict);
    if (!outcome.ok) {
        if (text == entry_response(obs.context_string(), missing_answer)) return missing_answer;
        if (text == kProseResponse) return freeform_prose;
        return std::nullopt;
    }
    const cot::CoTResponse& r = outcome.response;
    int sum1 = 0, sum2 = 0;
    for (size_t ei = 0; ei < kAllElements.size(); ++ei) {
        sum1 += r.scores[ei][0];
        sum2 += r.scores[ei][1];
    }
    if (r.totals[0] != sum1 || r.totals[1] != sum2) return std::nullopt;

    const bool faithful_profiles = r.predicted_preferences == obs.preferences &&
                                   r.predicted_non_preferences == obs.non_preferences;
    if (r.totals[0] == r.totals[1]) {
        return (faithful_profiles && r.answer == "Image 1") ? std::optional<int>(tied_scores)
                                                            : std::nullopt;
    }
    const char* argmax = r.totals[0] > r.totals[1] ? "Image 1" : "Image 2";
    if (r.answer != argmax) return std::nullopt;

    const std::string favored = obs.first_is_better() ? "Image 1" : "Image 2";
    const bool answer_favored = r.answer == favored;
    if (faithful_profiles) return answer_favored ? faithful : flipped;
    if (r.predicted_preferences == degrade_set(obs.preferences) &&
        r.predicted_non_preferences == degrade_set(obs.non_preferences)) {
        return answer_favored ? sloppy : flipped_sloppy;
    }
    if (r.predicted_preferences == obs.non_preferences &&
        r.predicted_non_preferences == obs.preferences && answer_favored) {
        return swapped_sides;
    }
    return std::nullopt;
}

std::optional<policy::TokenSeq> AssessmentPolicy::tokenize(const std::string& context,
                                                           const std::string& text) const {
    if (!AssessmentObservation::looks_like_context(context)) return std::nullopt;
    std::optional<int> entry =
        classify_response(AssessmentObservation::parse(context), text);
    if (!entry) return std::nullopt;
    return policy::TokenSeq{*entry};
}

}  // namespace preferthinker::task
