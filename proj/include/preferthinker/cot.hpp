#pragma once

#include <array>
#include <chrono>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "preferthinker/datagen.hpp"
#include "preferthinker/profile.hpp"

namespace preferthinker::cot {

// Tag strings are bit-exact: lowercase, space-separated words inside angle
// brackets.
inline constexpr const char* kPrefOpen = "<visual preference profile>";
inline constexpr const char* kPrefClose = "</visual preference profile>";
inline constexpr const char* kNonPrefOpen = "<visual non-preference profile>";
inline constexpr const char* kNonPrefClose = "</visual non-preference profile>";
inline constexpr const char* kThinkOpen = "<think>";
inline constexpr const char* kThinkClose = "</think>";
inline constexpr const char* kAnswerOpen = "<answer>";
inline constexpr const char* kAnswerClose = "</answer>";

// A structured assessment response: predicted profiles, a per-element score
// pair, column totals and the final answer.
struct CoTResponse {
    std::vector<PreferenceProfile> predicted_preferences;
    std::vector<PreferenceProfile> predicted_non_preferences;
    // scores[element][candidate], each 0..10
    std::array<std::array<int, 2>, kNumElements> scores{};
    std::array<int, 2> totals{};  // 0..50 per candidate
    std::string answer;           // "Image 1" | "Image 2"
    std::string raw_text;         // original text; ignored by comparisons

    // semantic equality: raw_text deliberately excluded so that
    // parse(render(r)) == r holds regardless of how r was produced
    bool operator==(const CoTResponse& o) const {
        return predicted_preferences == o.predicted_preferences &&
               predicted_non_preferences == o.predicted_non_preferences && scores == o.scores &&
               totals == o.totals && answer == o.answer;
    }
};

enum class ParseMode { strict, lenient };

enum class ParseErrorCode {
    NONE = 0,
    MISSING_TAG,
    DUPLICATE_TAG,
    MISORDERED_TAGS,
    MALFORMED_BLOCK,  // strict framing violated (stray prose, wrong line count)
    BAD_SCORES,       // dimension line malformed / scores unextractable / out of range
    BAD_TOTALS,       // totals line malformed or out of range
    BAD_ANSWER,       // answer text not exactly "Image 1"/"Image 2" after trimming
};

const std::string& parse_error_name(ParseErrorCode c);

struct ParseOutcome {
    bool ok = false;
    CoTResponse response;  // valid only when ok
    ParseErrorCode code = ParseErrorCode::NONE;
    std::string message;
};

// Emits the four tag blocks in canonical order. The think block carries one
// line per element, canonical order:
//   Dimension: <element> | Image 1: <s>/10 | Image 2: <s>/10
// then: Total | Image 1: <t>/50 | Image 2: <t>/50
// Multiple profiles render as a numbered list inside their tag.
// Throws std::invalid_argument when r violates its invariants (totals must
// equal column sums, answer must be the strict argmax, scores in range,
// at least one profile per side).
std::string render_response(const CoTResponse& r);

// Strict mode accepts exactly the render_response grammar (tags in canonical
// order, each once, no stray prose). Lenient mode locates the four tag blocks
// anywhere, tolerates prose, extracts per-element scores by scanning for the
// element name followed by two "<n>/10" patterns, and recomputes totals when
// no explicit totals line exists. Scores/totals are stored as written; cross-
// field consistency is the filter's job, not the parser's.
ParseOutcome parse_response(const std::string& text, ParseMode mode);

enum class RejectCode {
    PARSE_FAIL = 0,
    TOTAL_MISMATCH,
    ANSWER_NOT_ARGMAX,
    TIE,
    PROFILE_MISMATCH,
    WRONG_ANSWER,
};

const std::string& reject_code_name(RejectCode c);
std::optional<RejectCode> reject_code_from_name(const std::string& name);

struct FilterVerdict {
    bool accepted = false;
    std::vector<RejectCode> reasons;  // canonical enum order; accepted ⇔ empty

    bool operator==(const FilterVerdict&) const = default;
};

// similarity of two single terms in [0,1]
using TermSimilarity = std::function<double(const std::string&, const std::string&)>;

// mock similarity: 1 when the normalized terms are equal, else 0
double exact_term_similarity(const std::string& a, const std::string& b);

// Mean over ground-truth profiles of the best greedy pairing with predicted
// profiles. A pair's score is the mean of per-element term similarities over
// elements present in the ground-truth profile; elements the prediction lacks
// score 0, unmatched ground-truth profiles score 0, surplus predictions are
// ignored.
double profile_set_similarity(const std::vector<PreferenceProfile>& predicted,
                              const std::vector<PreferenceProfile>& ground_truth,
                              const TermSimilarity& sim);

// Screens one response against its sample: strict-parse failure, totals that
// are not column sums, answer not the strict argmax, tied totals, predicted
// profiles too far from ground truth (mean of preference-side and
// non-preference-side set similarity < tau), wrong final answer. Never
// throws; every input yields a verdict.
FilterVerdict filter_response(const std::string& resp_text, const datagen::UserSample& sample,
                              const TermSimilarity& sim, double tau);

// Deterministic annotation request: instructions, the user's ground-truth
// profiles, the candidate prompt, the correct answer and the response
// template. Multi-profile samples get the enumerated variant.
std::string build_annotation_prompt(const datagen::UserSample& sample);

// Stand-in for an external annotator: emits a strict-grammar response whose
// predicted profiles equal ground truth, whose per-element scores favor the
// ground-truth candidate (7..10 vs 1..4, drawn from the seed) and whose
// answer is gt_answer. Always passes filter_response.
std::string oracle_annotate(const datagen::UserSample& sample, uint64_t rng_seed);

// One line of the annotated-response JSONL. verdict/reasons appear once the
// filter has run; plain annotation output omits them.
struct AnnotatedRow {
    std::string user_id;
    std::string prompt_text_hash;  // hex of the annotation prompt's hash
    std::string response_text;
    std::optional<FilterVerdict> verdict;

    bool operator==(const AnnotatedRow&) const = default;
};

std::string annotated_row_to_json(const AnnotatedRow& row);
AnnotatedRow annotated_row_from_json(const std::string& line);
void save_annotated(const std::string& path, const std::vector<AnnotatedRow>& rows);
std::vector<AnnotatedRow> load_annotated(const std::string& path);

// External annotation service interface. Implementations may be called from
// several driver threads at once and should be reentrant.
class AnnotatorClient {
public:
    virtual ~AnnotatorClient() = default;
    virtual std::string annotate(const std::string& prompt_text,
                                 const std::vector<Image>& images) = 0;
};

// Documented integration point; annotate always reports that no remote
// service is configured (the ANNOTATOR_API_KEY env var is reserved for a
// real deployment).
class RemoteAnnotatorClient : public AnnotatorClient {
public:
    explicit RemoteAnnotatorClient(std::string endpoint) : endpoint_(std::move(endpoint)) {}
    std::string annotate(const std::string& prompt_text, const std::vector<Image>& images) override;

private:
    std::string endpoint_;
};

struct RetryPolicy {
    int max_attempts = 4;
    std::chrono::milliseconds base_delay{5};  // doubles per failed attempt
};

// Annotates every sample with bounded concurrency (jobs workers). Output
// order always equals input order; per-sample seeds derive from (seed,
// user_id) so results are independent of scheduling.
std::vector<AnnotatedRow> annotate_dataset(
    const std::vector<datagen::UserSample>& samples,
    const std::function<std::string(const datagen::UserSample&, uint64_t)>& annotate_fn,
    uint64_t seed, int jobs);

// Adapts an AnnotatorClient for annotate_dataset: builds the annotation
// prompt, loads the sample's reference and candidate images from dataset_dir
// and retries failed calls with exponential backoff before giving up.
std::function<std::string(const datagen::UserSample&, uint64_t)> make_client_annotator(
    AnnotatorClient& client, const std::string& dataset_dir, const RetryPolicy& retry = {});

}  // namespace preferthinker::cot
