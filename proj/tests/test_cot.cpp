#include <algorithm>
#include <array>
#include <cctype>
#include <map>
#include <string>
#include <vector>

#include "doctest.h"
#include "filter_oracle.hpp"
#include "helpers.hpp"
#include "preferthinker/cot.hpp"

using namespace preferthinker;
using cot::ParseErrorCode;
using cot::ParseMode;
using cot::RejectCode;

namespace {

const Vocabulary& vocab() { return Vocabulary::bundled(); }

std::string oracle_text(uint64_t sample_seed, int n_profiles, uint64_t anno_seed) {
    return cot::oracle_annotate(testutil::make_sample(vocab(), sample_seed, n_profiles),
                                anno_seed);
}

}  // namespace

TEST_SUITE("cot") {

TEST_CASE("rendered responses strict-parse back to themselves") {
    Rng rng(2024);
    for (int i = 0; i < 1000; ++i) {
        cot::CoTResponse r = testutil::random_valid_response(rng, vocab());
        std::string text = cot::render_response(r);
        cot::ParseOutcome out = cot::parse_response(text, ParseMode::strict);
        REQUIRE(out.ok);
        CHECK(out.response == r);
        // and the lenient parser agrees on strict-grammar input
        cot::ParseOutcome len = cot::parse_response(text, ParseMode::lenient);
        REQUIRE(len.ok);
        CHECK(len.response == r);
    }
}

TEST_CASE("render_response rejects invariant violations") {
    Rng rng(5);
    cot::CoTResponse good = testutil::random_valid_response(rng, vocab());
    CHECK_NOTHROW(cot::render_response(good));

    cot::CoTResponse r = good;
    r.predicted_preferences.clear();
    CHECK_THROWS_AS(cot::render_response(r), std::invalid_argument);

    r = good;
    r.answer = "Image 3";
    CHECK_THROWS_AS(cot::render_response(r), std::invalid_argument);

    r = good;
    r.scores[0][0] = 11;
    CHECK_THROWS_AS(cot::render_response(r), std::invalid_argument);

    r = good;
    r.totals[0] += 1;
    CHECK_THROWS_AS(cot::render_response(r), std::invalid_argument);

    r = good;  // answer at the wrong side
    r.answer = r.answer == "Image 1" ? "Image 2" : "Image 1";
    CHECK_THROWS_AS(cot::render_response(r), std::invalid_argument);
}

TEST_CASE("strict parse errors carry the expected codes") {
    std::string text = oracle_text(11, 1, 99);
    auto code_of = [](const std::string& t) {
        return cot::parse_response(t, ParseMode::strict).code;
    };

    CHECK(code_of("") == ParseErrorCode::MISSING_TAG);
    {
        std::string t = text;
        t.replace(t.find("<answer>"), 8, "<answrr>");
        CHECK(code_of(t) == ParseErrorCode::MISSING_TAG);
    }
    CHECK(code_of(text + "\n<think>") == ParseErrorCode::DUPLICATE_TAG);
    {
        // move the think block in front of the profile blocks
        size_t think_at = text.find("<think>");
        std::string think_part = text.substr(think_at, text.find("</think>") + 8 - think_at);
        std::string t = think_part + "\n" + text.substr(0, think_at) +
                        text.substr(text.find("<answer>"));
        CHECK(code_of(t) == ParseErrorCode::MISORDERED_TAGS);
    }
    CHECK(code_of("I think:\n" + text) == ParseErrorCode::MALFORMED_BLOCK);
    CHECK(code_of(text + " done") == ParseErrorCode::MALFORMED_BLOCK);
    {
        std::string t = text;
        t.replace(t.find("Dimension: color"), 16, "Dimension: colour");
        CHECK(code_of(t) == ParseErrorCode::BAD_SCORES);
    }
    {
        std::string t = text;
        size_t at = t.find("/10");
        t.replace(at, 3, "/10 (approx.)");
        CHECK(code_of(t) == ParseErrorCode::BAD_SCORES);
    }
    {
        std::string t = text;
        t.replace(t.find("Total | Image 1: "), 17, "Total | Image 1:  ");
        CHECK(code_of(t) == ParseErrorCode::BAD_TOTALS);
    }
    {
        std::string t = text;
        size_t at = t.find("<answer>\nImage");
        t.replace(at + 9, 7, "Imagen ");
        CHECK(code_of(t) == ParseErrorCode::BAD_ANSWER);
    }
}

TEST_CASE("lenient parse recovers structure from prose-heavy text") {
    std::string text =
        "Sure! Based on the references I infer the following.\n"
        "<visual preference profile>\n"
        "The user clearly likes\n"
        "art style: cubism; color: pastel\n"
        "</visual preference profile>\n"
        "Now the dislikes.\n"
        "<visual non-preference profile>\n"
        "art style: photorealism; saturation: neon\n"
        "</visual non-preference profile>\n"
        "<think>\n"
        "Let me grade each dimension carefully.\n"
        "For art style I give Image 1: 8/10 and Image 2: 3/10 because cubism dominates.\n"
        "color — Image 1: 7/10, Image 2: 2/10.\n"
        "detail: Image 1: 5/10 vs Image 2: 5/10, a wash.\n"
        "art medium scores Image 1: 6/10, Image 2: 4/10.\n"
        "saturation, finally: Image 1: 9/10 over Image 2: 1/10.\n"
        "</think>\n"
        "So my verdict:\n"
        "<answer>\n"
        "  Image 1\n"
        "</answer>\n"
        "Hope that helps!";
    cot::ParseOutcome out = cot::parse_response(text, ParseMode::lenient);
    REQUIRE(out.ok);
    const cot::CoTResponse& r = out.response;
    REQUIRE(r.predicted_preferences.size() == 1);
    CHECK(r.predicted_preferences[0].term(VisualElement::art_style) == "cubism");
    CHECK(r.predicted_preferences[0].term(VisualElement::color) == "pastel");
    REQUIRE(r.predicted_non_preferences.size() == 1);
    CHECK(r.predicted_non_preferences[0].term(VisualElement::saturation) == "neon");
    CHECK(r.scores[0] == std::array<int, 2>{8, 3});
    CHECK(r.scores[2] == std::array<int, 2>{5, 5});
    CHECK(r.scores[4] == std::array<int, 2>{9, 1});
    // no explicit totals line: lenient recomputes the column sums
    CHECK(r.totals == std::array<int, 2>{35, 15});
    CHECK(r.answer == "Image 1");

    // but the same text fails the strict grammar
    CHECK_FALSE(cot::parse_response(text, ParseMode::strict).ok);
}

TEST_CASE("oracle annotations always pass the filter") {
    Rng rng(31);
    for (int i = 0; i < 40; ++i) {
        auto sample = testutil::make_sample(vocab(), 1000 + static_cast<uint64_t>(i),
                                            1 + static_cast<int>(rng.uniform(3)));
        std::string text = cot::oracle_annotate(sample, rng.next_u64());
        cot::FilterVerdict v =
            cot::filter_response(text, sample, cot::exact_term_similarity, 0.8);
        CHECK(v.accepted);
        CHECK(v.reasons.empty());
        cot::ParseOutcome out = cot::parse_response(text, ParseMode::strict);
        REQUIRE(out.ok);
        CHECK(out.response.answer == sample.gt_answer);
        CHECK(out.response.predicted_preferences == sample.profile_set.preferences);
        CHECK(out.response.predicted_non_preferences == sample.profile_set.non_preferences);
    }
}

TEST_CASE("filter flags each screening rule") {
    auto sample = testutil::make_sample(vocab(), 77, 1);
    std::string text = cot::oracle_annotate(sample, 8);
    auto run = [&](const std::string& t) {
        return cot::filter_response(t, sample, cot::exact_term_similarity, 0.8);
    };

    CHECK(run(text).accepted);

    SUBCASE("threshold outside [0,1] throws") {
        CHECK_THROWS_AS(cot::filter_response(text, sample, cot::exact_term_similarity, -0.1),
                        std::invalid_argument);
        CHECK_THROWS_AS(cot::filter_response(text, sample, cot::exact_term_similarity, 1.5),
                        std::invalid_argument);
    }
    SUBCASE("unparseable text yields exactly PARSE_FAIL") {
        cot::FilterVerdict v = run("nonsense");
        CHECK_FALSE(v.accepted);
        CHECK(v.reasons == std::vector<RejectCode>{RejectCode::PARSE_FAIL});
    }
    SUBCASE("written totals that are not the column sums") {
        std::string t = text;
        size_t at = t.find("Total | Image 1: ");
        size_t digits = at + 17;
        size_t end = digits;
        while (isdigit(static_cast<unsigned char>(t[end]))) ++end;
        int vtot = std::stoi(t.substr(digits, end - digits));
        t.replace(digits, end - digits, std::to_string(vtot > 25 ? vtot - 1 : vtot + 1));
        cot::FilterVerdict v = run(t);
        CHECK_FALSE(v.accepted);
        CHECK(std::count(v.reasons.begin(), v.reasons.end(), RejectCode::TOTAL_MISMATCH) == 1);
    }
    SUBCASE("tied written totals trigger TIE, not ANSWER_NOT_ARGMAX") {
        std::string t = text;
        size_t at = t.find("Total | Image 1: ");
        size_t eol = t.find('\n', at);
        t.replace(at, eol - at, "Total | Image 1: 25/50 | Image 2: 25/50");
        cot::FilterVerdict v = run(t);
        CHECK_FALSE(v.accepted);
        CHECK(std::count(v.reasons.begin(), v.reasons.end(), RejectCode::TIE) == 1);
        CHECK(std::count(v.reasons.begin(), v.reasons.end(), RejectCode::ANSWER_NOT_ARGMAX) == 0);
    }
    SUBCASE("answer off the argmax plus the wrong ground truth") {
        std::string t = text;
        size_t at = t.find("<answer>");
        std::string flipped = sample.gt_answer == "Image 1" ? "Image 2" : "Image 1";
        t.replace(t.find(sample.gt_answer, at), sample.gt_answer.size(), flipped);
        cot::FilterVerdict v = run(t);
        CHECK_FALSE(v.accepted);
        CHECK(v.reasons == std::vector<RejectCode>{RejectCode::ANSWER_NOT_ARGMAX,
                                                   RejectCode::WRONG_ANSWER});
    }
    SUBCASE("predicted profiles far from ground truth") {
        // swap the two profile sides: non-preferences are element-wise
        // disjoint from preferences, so similarity collapses to zero
        cot::CoTResponse r = cot::parse_response(text, ParseMode::strict).response;
        std::swap(r.predicted_preferences, r.predicted_non_preferences);
        cot::FilterVerdict v = run(cot::render_response(r));
        CHECK_FALSE(v.accepted);
        CHECK(v.reasons == std::vector<RejectCode>{RejectCode::PROFILE_MISMATCH});
    }
}

TEST_CASE("filter agrees with an independent re-extraction over fuzzed responses") {
    Rng rng(907);
    const double tau = 0.8;
    std::map<std::vector<int>, int> seen_outcomes;
    int checked = 0;
    for (int i = 0; i < 1000; ++i) {
        auto sample = testutil::make_sample(vocab(), 3000 + rng.uniform(40),
                                            1 + static_cast<int>(rng.uniform(3)));
        std::string text;
        if (rng.bernoulli(0.7)) {
            text = cot::oracle_annotate(sample, rng.next_u64());
        } else {
            text = cot::render_response(testutil::random_valid_response(rng, vocab()));
        }
        int mutations = static_cast<int>(rng.uniform(3));
        for (int m = 0; m < mutations; ++m) {
            text = testutil::mutate_response(text, rng, vocab());
        }

        testutil::FoVerdict expected = testutil::expected_verdict(text, sample, tau);
        REQUIRE_FALSE(expected.extraction_failed);
        cot::FilterVerdict got =
            cot::filter_response(text, sample, cot::exact_term_similarity, tau);
        CHECK(got.accepted == expected.accepted);
        CHECK(testutil::verdict_to_ints(got) == expected.reasons);
        seen_outcomes[expected.reasons] += 1;
        ++checked;
    }
    CHECK(checked == 1000);
    // the fuzz run must actually exercise the rules, not just accept everything
    CHECK(seen_outcomes.count({}) == 1);
    CHECK(seen_outcomes.count({testutil::FO_PARSE_FAIL}) == 1);
    int with_total_mismatch = 0, with_tie = 0, with_profile_mismatch = 0, with_wrong = 0,
        with_not_argmax = 0;
    for (const auto& [reasons, n] : seen_outcomes) {
        for (int code : reasons) {
            if (code == testutil::FO_TOTAL_MISMATCH) with_total_mismatch += n;
            if (code == testutil::FO_TIE) with_tie += n;
            if (code == testutil::FO_PROFILE_MISMATCH) with_profile_mismatch += n;
            if (code == testutil::FO_WRONG_ANSWER) with_wrong += n;
            if (code == testutil::FO_ANSWER_NOT_ARGMAX) with_not_argmax += n;
        }
    }
    CHECK(with_total_mismatch > 10);
    CHECK(with_tie > 5);
    CHECK(with_profile_mismatch > 10);
    CHECK(with_wrong > 10);
    CHECK(with_not_argmax > 10);
}

TEST_CASE("profile set similarity follows the documented matching rules") {
    auto sim = cot::exact_term_similarity;
    PreferenceProfile a, b, half;
    a.set(VisualElement::art_style, "cubism");
    a.set(VisualElement::color, "pastel");
    b.set(VisualElement::art_style, "baroque");
    b.set(VisualElement::color, "neon");
    half.set(VisualElement::art_style, "cubism");
    half.set(VisualElement::color, "neon");

    CHECK(cot::profile_set_similarity({}, {}, sim) == 1.0);   // empty ground truth
    CHECK(cot::profile_set_similarity({a}, {}, sim) == 1.0);  // surplus predictions ignored
    CHECK(cot::profile_set_similarity({}, {a}, sim) == 0.0);  // unmatched ground truth
    CHECK(cot::profile_set_similarity({a}, {a}, sim) == 1.0);
    CHECK(cot::profile_set_similarity({b}, {a}, sim) == 0.0);
    CHECK(cot::profile_set_similarity({half}, {a}, sim) == doctest::Approx(0.5));
    // the greedy pairing grabs the exact b<->b pair first, then half<->a,
    // regardless of the order the predictions arrive in
    CHECK(cot::profile_set_similarity({half, b}, {a, b}, sim) == doctest::Approx(0.75));
    CHECK(cot::profile_set_similarity({b, half}, {a, b}, sim) == doctest::Approx(0.75));

    // a prediction missing an element scores 0 on it but stays matched
    PreferenceProfile missing;
    missing.set(VisualElement::art_style, "cubism");
    CHECK(cot::profile_set_similarity({missing}, {a}, sim) == doctest::Approx(0.5));
}

TEST_CASE("annotated rows survive the JSONL round trip") {
    cot::AnnotatedRow plain;
    plain.user_id = "u00042";
    plain.prompt_text_hash = "00ff00ff00ff00ff";
    plain.response_text = "<answer>\nImage 1\n</answer>\nwith \"quotes\" and\nnewlines";
    CHECK(cot::annotated_row_from_json(cot::annotated_row_to_json(plain)) == plain);

    cot::AnnotatedRow verdicted = plain;
    verdicted.verdict = cot::FilterVerdict{
        false, {RejectCode::TOTAL_MISMATCH, RejectCode::WRONG_ANSWER}};
    CHECK(cot::annotated_row_from_json(cot::annotated_row_to_json(verdicted)) == verdicted);

    CHECK_THROWS(cot::annotated_row_from_json("not json"));
    CHECK_THROWS(cot::annotated_row_from_json("{\"user_id\": \"x\"}"));
}

TEST_CASE("annotate_dataset keeps input order and ignores scheduling") {
    std::vector<datagen::UserSample> samples;
    for (uint64_t i = 0; i < 12; ++i) {
        samples.push_back(testutil::make_sample(vocab(), 500 + i, 1 + static_cast<int>(i % 3)));
    }
    auto rows1 = cot::annotate_dataset(samples, cot::oracle_annotate, 9, 1);
    auto rows4 = cot::annotate_dataset(samples, cot::oracle_annotate, 9, 4);
    REQUIRE(rows1.size() == samples.size());
    CHECK(rows1 == rows4);
    for (size_t i = 0; i < samples.size(); ++i) {
        CHECK(rows1[i].user_id == samples[i].user_id);
        CHECK(rows1[i].prompt_text_hash ==
              hex64(fnv1a(cot::build_annotation_prompt(samples[i]))));
        CHECK(cot::filter_response(rows1[i].response_text, samples[i],
                                   cot::exact_term_similarity, 0.8)
                  .accepted);
    }

    // a sample's annotation depends on its user id, not its position
    std::vector<datagen::UserSample> reversed(samples.rbegin(), samples.rend());
    auto rows_rev = cot::annotate_dataset(reversed, cot::oracle_annotate, 9, 2);
    for (size_t i = 0; i < samples.size(); ++i) {
        CHECK(rows_rev[samples.size() - 1 - i].response_text == rows1[i].response_text);
    }

    CHECK_THROWS_AS(cot::annotate_dataset(samples, cot::oracle_annotate, 9, 0),
                    std::invalid_argument);
}

TEST_CASE("save and load annotated files round trip") {
    testutil::ScratchDir scratch("annot");
    std::vector<datagen::UserSample> samples;
    for (uint64_t i = 0; i < 6; ++i) samples.push_back(testutil::make_sample(vocab(), 40 + i, 1));
    auto rows = cot::annotate_dataset(samples, cot::oracle_annotate, 3, 2);
    rows[2].verdict = cot::FilterVerdict{true, {}};
    std::string path = scratch.file("rows.jsonl");
    cot::save_annotated(path, rows);
    CHECK(cot::load_annotated(path) == rows);
    CHECK_THROWS(cot::load_annotated(scratch.file("missing.jsonl")));
}

}  // TEST_SUITE
