#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "preferthinker/rng.hpp"

namespace preferthinker {

// The five visual elements, in canonical order. This ordering is load-bearing:
// serialization, score lines, recaption clauses and the mock image stripes all
// follow it.
enum class VisualElement : int {
    art_style = 0,
    color = 1,
    detail = 2,
    art_medium = 3,
    saturation = 4,
};

inline constexpr int kNumElements = 5;

inline constexpr std::array<VisualElement, kNumElements> kAllElements = {
    VisualElement::art_style, VisualElement::color, VisualElement::detail,
    VisualElement::art_medium, VisualElement::saturation};

// "art style" — used in text serialization and prompts
const std::string& element_display_name(VisualElement e);
// "art_style" — used in JSON keys and config
const std::string& element_key(VisualElement e);
// accepts display name, key, or any case variant; nullopt for unknown names
std::optional<VisualElement> element_from_name(const std::string& name);

// Per-element ordered term lists.
class Vocabulary {
public:
    Vocabulary() = default;
    Vocabulary(std::array<std::vector<std::string>, kNumElements> terms, std::string source);

    // Parses the sectioned text format ([art style] headers, one term per
    // line, # comments) and enforces the invariants: every element present,
    // >= 2 unique non-empty terms each. Errors carry file/line context.
    static Vocabulary load(const std::string& path);
    static Vocabulary parse(const std::string& text, const std::string& source);

    // Built-in seed vocabulary, ~10 terms per element. These are artifact
    // configuration, not measured data; data/vocabulary.txt carries the same
    // terms in editable form.
    static const Vocabulary& bundled();

    const std::vector<std::string>& terms(VisualElement e) const;
    // index of term within its element, nullopt if absent
    std::optional<int> term_index(VisualElement e, const std::string& term) const;
    const std::string& source() const { return source_; }
    uint64_t hash() const;

    // largest term count over the five elements
    int max_terms() const;

private:
    std::array<std::vector<std::string>, kNumElements> terms_;
    std::string source_;
};

// One term per element. Model-predicted profiles may be partial (missing
// elements) or carry out-of-vocabulary terms; sampled profiles are always
// full and in-vocabulary.
struct PreferenceProfile {
    std::array<std::optional<std::string>, kNumElements> terms;

    const std::optional<std::string>& term(VisualElement e) const {
        return terms[static_cast<size_t>(e)];
    }
    void set(VisualElement e, std::string t) { terms[static_cast<size_t>(e)] = std::move(t); }
    bool partial() const;
    bool empty() const;
    size_t present_count() const;
    // count of elements whose terms are present in both and equal
    int matching_elements(const PreferenceProfile& other) const;
    bool operator==(const PreferenceProfile&) const = default;
};

struct UserProfileSet {
    std::vector<PreferenceProfile> preferences;
    std::vector<PreferenceProfile> non_preferences;  // paired, same length
    std::string user_id;
    bool multi = false;

    bool operator==(const UserProfileSet&) const = default;
};

// Deterministic in (vocab, rng_seed, n_profiles). Guarantees: per pair and
// element, preference term != non-preference term; multi-profile sets are
// pairwise distinct in at least one element.
UserProfileSet sample_profile_set(const Vocabulary& vocab, uint64_t rng_seed, int n_profiles);

// Canonical form "art style: <t>; color: <t>; ...", canonical element order,
// absent elements omitted. parse_profile_text inverts it.
std::string profile_to_text(const PreferenceProfile& p);

struct ParsedProfile {
    PreferenceProfile profile;
    int dropped_clauses = 0;  // clauses naming unknown elements
};

// Total over text: extracts "element: term" clauses case-insensitively and
// never throws; an unparseable input yields an empty partial profile.
ParsedProfile parse_profile_text(const std::string& text);

// lowercase, trimmed, inner whitespace collapsed
std::string normalize_term(const std::string& raw);

}  // namespace preferthinker
