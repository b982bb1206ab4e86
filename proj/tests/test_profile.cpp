#include <set>
#include <string>

#include "doctest.h"
#include "preferthinker/profile.hpp"
#include "preferthinker/rng.hpp"

using namespace preferthinker;

TEST_SUITE("profile") {

TEST_CASE("canonical element order is fixed and complete") {
    REQUIRE(kNumElements == 5);
    CHECK(element_display_name(kAllElements[0]) == "art style");
    CHECK(element_display_name(kAllElements[1]) == "color");
    CHECK(element_display_name(kAllElements[2]) == "detail");
    CHECK(element_display_name(kAllElements[3]) == "art medium");
    CHECK(element_display_name(kAllElements[4]) == "saturation");
    CHECK(element_key(kAllElements[0]) == "art_style");
    CHECK(element_from_name("Art Style") == kAllElements[0]);
    CHECK(element_from_name("art_medium") == kAllElements[3]);
    CHECK(!element_from_name("texture").has_value());
}

TEST_CASE("editable vocabulary file carries the bundled terms") {
    Vocabulary from_file = Vocabulary::load(PT_VOCAB_PATH);
    const Vocabulary& built_in = Vocabulary::bundled();
    for (VisualElement e : kAllElements) CHECK(from_file.terms(e) == built_in.terms(e));
    CHECK(from_file.hash() == built_in.hash());
}

TEST_CASE("vocabulary invariants are enforced") {
    CHECK_THROWS(Vocabulary::parse("[art style]\nonly-one\n", "inline"));
    CHECK_THROWS(Vocabulary::parse("no header\n", "inline"));
    Vocabulary ok = Vocabulary::parse(
        "[art style]\na\nb\n[color]\nc\nd\n[detail]\ne\nf\n[art medium]\ng\nh\n"
        "[saturation]\ni\nj\n",
        "inline");
    CHECK(ok.terms(VisualElement::color).size() == 2);
    CHECK(ok.term_index(VisualElement::color, "d") == 1);
    CHECK(!ok.term_index(VisualElement::color, "z").has_value());
}

TEST_CASE("normalize_term lowercases, trims and collapses whitespace") {
    CHECK(normalize_term("  Oil   Painting ") == "oil painting");
    CHECK(normalize_term("PASTEL") == "pastel");
    CHECK(normalize_term("") == "");
}

TEST_CASE("profile text round trip") {
    PreferenceProfile p;
    p.set(VisualElement::art_style, "cubism");
    p.set(VisualElement::detail, "minimal");
    std::string text = profile_to_text(p);
    CHECK(text == "art style: cubism; detail: minimal");
    ParsedProfile back = parse_profile_text(text);
    CHECK(back.profile == p);
    CHECK(back.dropped_clauses == 0);
}

TEST_CASE("profile text parsing is total and reports dropped clauses") {
    ParsedProfile junk = parse_profile_text("complete nonsense with no clauses");
    CHECK(junk.profile.empty());
    ParsedProfile partial = parse_profile_text("art style: cubism; texture: rough");
    CHECK(partial.profile.term(VisualElement::art_style) == "cubism");
    CHECK(partial.dropped_clauses == 1);
}

TEST_CASE("sampled profile sets honor their guarantees") {
    const Vocabulary& vocab = Vocabulary::bundled();
    for (uint64_t seed = 1; seed <= 50; ++seed) {
        for (int n : {1, 2, 3}) {
            UserProfileSet set = sample_profile_set(vocab, seed, n);
            REQUIRE(set.preferences.size() == static_cast<size_t>(n));
            REQUIRE(set.non_preferences.size() == static_cast<size_t>(n));
            CHECK(set.multi == (n > 1));
            for (int i = 0; i < n; ++i) {
                const auto& pos = set.preferences[static_cast<size_t>(i)];
                const auto& neg = set.non_preferences[static_cast<size_t>(i)];
                CHECK(pos.present_count() == static_cast<size_t>(kNumElements));
                CHECK(neg.present_count() == static_cast<size_t>(kNumElements));
                // paired profiles disagree on every element
                CHECK(pos.matching_elements(neg) == 0);
                for (VisualElement e : kAllElements) {
                    CHECK(vocab.term_index(e, *pos.term(e)).has_value());
                    CHECK(vocab.term_index(e, *neg.term(e)).has_value());
                }
            }
            // multi-profile sets are pairwise distinct
            for (int i = 0; i < n; ++i) {
                for (int j = i + 1; j < n; ++j) {
                    CHECK(set.preferences[static_cast<size_t>(i)] !=
                          set.preferences[static_cast<size_t>(j)]);
                }
            }
            // deterministic in the seed
            CHECK(set == sample_profile_set(vocab, seed, n));
        }
    }
}

TEST_CASE("matching_elements counts only shared present-and-equal terms") {
    PreferenceProfile a, b;
    a.set(VisualElement::color, "pastel");
    a.set(VisualElement::detail, "ornate");
    b.set(VisualElement::color, "pastel");
    b.set(VisualElement::saturation, "rich");
    CHECK(a.matching_elements(b) == 1);
    CHECK(b.matching_elements(a) == 1);
    CHECK(a.matching_elements(a) == 2);
}

}  // TEST_SUITE
