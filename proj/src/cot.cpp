#include "preferthinker/cot.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <regex>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "json.hpp"
#include "preferthinker/hash.hpp"
#include "preferthinker/parallel.hpp"
#include "preferthinker/rng.hpp"

using ordered_json = nlohmann::ordered_json;

namespace preferthinker::cot {

namespace {

const std::array<std::string, 8> kParseErrorNames = {
    "NONE",           "MISSING_TAG", "DUPLICATE_TAG", "MISORDERED_TAGS",
    "MALFORMED_BLOCK", "BAD_SCORES",  "BAD_TOTALS",    "BAD_ANSWER"};

const std::array<std::string, 6> kRejectNames = {"PARSE_FAIL", "TOTAL_MISMATCH",
                                                 "ANSWER_NOT_ARGMAX", "TIE", "PROFILE_MISMATCH",
                                                 "WRONG_ANSWER"};

std::string lower_ascii(const std::string& s) {
    std::string out = s;
    for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

std::vector<std::string> split_lines(const std::string& body) {
    std::vector<std::string> lines;
    size_t start = 0;
    for (;;) {
        size_t nl = body.find('\n', start);
        if (nl == std::string::npos) {
            lines.push_back(body.substr(start));
            return lines;
        }
        lines.push_back(body.substr(start, nl - start));
        start = nl + 1;
    }
}

// "3. art style: cubism" -> item text after the list number, if the line is numbered
std::optional<std::string> strip_list_number(const std::string& line) {
    size_t i = line.find_first_not_of(" \t");
    if (i == std::string::npos) return std::nullopt;
    size_t d = i;
    while (d < line.size() && std::isdigit(static_cast<unsigned char>(line[d]))) ++d;
    if (d == i || d >= line.size() || line[d] != '.') return std::nullopt;
    size_t rest = line.find_first_not_of(" \t", d + 1);
    return rest == std::string::npos ? std::string() : line.substr(rest);
}

// numbered lines each start a profile; a body without numbering is one
// profile; prose before the first numbered item is ignored
std::vector<PreferenceProfile> parse_profile_block(const std::string& body) {
    std::vector<std::string> lines = split_lines(body);
    bool numbered = std::any_of(lines.begin(), lines.end(),
                                [](const std::string& l) { return strip_list_number(l).has_value(); });
    std::vector<std::string> chunks;
    if (!numbered) {
        chunks.push_back(body);
    } else {
        for (const std::string& line : lines) {
            if (auto item = strip_list_number(line)) {
                chunks.push_back(*item);
            } else if (!chunks.empty()) {
                chunks.back() += "\n" + line;
            }
        }
    }
    std::vector<PreferenceProfile> profiles;
    profiles.reserve(chunks.size());
    for (const std::string& c : chunks) profiles.push_back(parse_profile_text(c).profile);
    return profiles;
}

ParseOutcome fail(ParseErrorCode code, std::string message) {
    ParseOutcome out;
    out.ok = false;
    out.code = code;
    out.message = std::move(message);
    return out;
}

// strict-mode literal scanner
struct Cursor {
    const std::string& s;
    size_t pos = 0;

    bool lit(const std::string& l) {
        if (s.compare(pos, l.size(), l) != 0) return false;
        pos += l.size();
        return true;
    }
    bool number(int& out, int max_digits) {
        size_t d = pos;
        while (d < s.size() && std::isdigit(static_cast<unsigned char>(s[d])) &&
               d - pos < static_cast<size_t>(max_digits)) {
            ++d;
        }
        if (d == pos) return false;
        out = std::stoi(s.substr(pos, d - pos));
        pos = d;
        return true;
    }
    bool done() const { return pos == s.size(); }
};

bool parse_dimension_line_strict(const std::string& line, VisualElement e, int& s1, int& s2) {
    Cursor c{line};
    return c.lit("Dimension: ") && c.lit(element_display_name(e)) && c.lit(" | Image 1: ") &&
           c.number(s1, 2) && c.lit("/10 | Image 2: ") && c.number(s2, 2) && c.lit("/10") &&
           c.done();
}

bool parse_total_line_strict(const std::string& line, int& t1, int& t2) {
    Cursor c{line};
    return c.lit("Total | Image 1: ") && c.number(t1, 2) && c.lit("/50 | Image 2: ") &&
           c.number(t2, 2) && c.lit("/50") && c.done();
}

struct TagLayout {
    // body text of the four blocks, in canonical order
    std::string pref, non_pref, think, answer;
};

const std::array<std::string, 8> kTagSequence = {kPrefOpen, kPrefClose,  kNonPrefOpen,
                                                 kNonPrefClose, kThinkOpen, kThinkClose,
                                                 kAnswerOpen, kAnswerClose};

std::optional<ParseOutcome> check_tags_strict(const std::string& text, TagLayout& layout) {
    std::array<size_t, 8> first{};
    for (size_t t = 0; t < 8; ++t) {
        const std::string& tag = kTagSequence[t];
        size_t pos = text.find(tag);
        if (pos == std::string::npos) {
            return fail(ParseErrorCode::MISSING_TAG, "missing tag " + tag);
        }
        if (text.find(tag, pos + 1) != std::string::npos) {
            return fail(ParseErrorCode::DUPLICATE_TAG, "tag " + tag + " appears more than once");
        }
        first[t] = pos;
    }
    for (size_t t = 1; t < 8; ++t) {
        if (first[t] <= first[t - 1]) {
            return fail(ParseErrorCode::MISORDERED_TAGS,
                        "tag " + kTagSequence[t] + " out of canonical order");
        }
    }
    if (first[0] != 0 || first[7] + kTagSequence[7].size() != text.size()) {
        return fail(ParseErrorCode::MALFORMED_BLOCK, "text around the tag blocks");
    }
    std::array<std::string, 4> bodies;
    for (int b = 0; b < 4; ++b) {
        size_t open_end = first[static_cast<size_t>(2 * b)] + kTagSequence[static_cast<size_t>(2 * b)].size();
        size_t close_start = first[static_cast<size_t>(2 * b + 1)];
        if (close_start < open_end + 2 || text[open_end] != '\n' || text[close_start - 1] != '\n') {
            return fail(ParseErrorCode::MALFORMED_BLOCK,
                        "block " + kTagSequence[static_cast<size_t>(2 * b)] +
                            " must hold newline-framed content");
        }
        bodies[static_cast<size_t>(b)] = text.substr(open_end + 1, close_start - 1 - (open_end + 1));
        if (b < 3) {
            size_t close_end = close_start + kTagSequence[static_cast<size_t>(2 * b + 1)].size();
            if (first[static_cast<size_t>(2 * b + 2)] != close_end + 1 || text[close_end] != '\n') {
                return fail(ParseErrorCode::MALFORMED_BLOCK,
                            "blocks must be separated by exactly one newline");
            }
        }
    }
    layout = {bodies[0], bodies[1], bodies[2], bodies[3]};
    return std::nullopt;
}

// strict profile body: one unnumbered line, or a sequential numbered list
std::optional<std::vector<PreferenceProfile>> parse_profile_block_strict(const std::string& body) {
    std::vector<std::string> lines = split_lines(body);
    if (lines.size() == 1 && !strip_list_number(lines[0])) {
        return std::vector<PreferenceProfile>{parse_profile_text(lines[0]).profile};
    }
    std::vector<PreferenceProfile> profiles;
    for (size_t i = 0; i < lines.size(); ++i) {
        auto item = strip_list_number(lines[i]);
        if (!item) return std::nullopt;
        size_t num_start = lines[i].find_first_not_of(" \t");
        size_t dot = lines[i].find('.', num_start);
        int num = std::stoi(lines[i].substr(num_start, dot - num_start));
        if (num != static_cast<int>(i) + 1) return std::nullopt;
        profiles.push_back(parse_profile_text(*item).profile);
    }
    return profiles;
}

ParseOutcome parse_strict(const std::string& text) {
    TagLayout layout;
    if (auto err = check_tags_strict(text, layout)) return *err;

    CoTResponse r;
    r.raw_text = text;

    auto prefs = parse_profile_block_strict(layout.pref);
    if (!prefs) return fail(ParseErrorCode::MALFORMED_BLOCK, "preference profile list malformed");
    r.predicted_preferences = std::move(*prefs);
    auto nons = parse_profile_block_strict(layout.non_pref);
    if (!nons) {
        return fail(ParseErrorCode::MALFORMED_BLOCK, "non-preference profile list malformed");
    }
    r.predicted_non_preferences = std::move(*nons);

    std::vector<std::string> think_lines = split_lines(layout.think);
    if (think_lines.size() != static_cast<size_t>(kNumElements) + 1) {
        return fail(ParseErrorCode::MALFORMED_BLOCK,
                    "think block must hold exactly " + std::to_string(kNumElements) +
                        " dimension lines plus a totals line");
    }
    for (int e = 0; e < kNumElements; ++e) {
        int s1 = 0, s2 = 0;
        const std::string& line = think_lines[static_cast<size_t>(e)];
        if (!parse_dimension_line_strict(line, kAllElements[static_cast<size_t>(e)], s1, s2)) {
            return fail(ParseErrorCode::BAD_SCORES, "dimension line malformed: " + line);
        }
        if (s1 > 10 || s2 > 10) {
            return fail(ParseErrorCode::BAD_SCORES, "score above 10 in line: " + line);
        }
        r.scores[static_cast<size_t>(e)] = {s1, s2};
    }
    int t1 = 0, t2 = 0;
    if (!parse_total_line_strict(think_lines.back(), t1, t2)) {
        return fail(ParseErrorCode::BAD_TOTALS, "totals line malformed: " + think_lines.back());
    }
    if (t1 > 50 || t2 > 50) return fail(ParseErrorCode::BAD_TOTALS, "total above 50");
    r.totals = {t1, t2};

    if (layout.answer.find('\n') != std::string::npos) {
        return fail(ParseErrorCode::BAD_ANSWER, "answer block must hold a single line");
    }
    std::string ans = trim(layout.answer);
    if (ans != "Image 1" && ans != "Image 2") {
        return fail(ParseErrorCode::BAD_ANSWER, "answer must be exactly Image 1 or Image 2");
    }
    r.answer = ans;

    ParseOutcome out;
    out.ok = true;
    out.response = std::move(r);
    return out;
}

struct Block {
    std::string body;
};

std::optional<Block> locate_block(const std::string& text, const std::string& open,
                                  const std::string& close) {
    size_t o = text.find(open);
    if (o == std::string::npos) return std::nullopt;
    size_t c = text.find(close, o + open.size());
    if (c == std::string::npos) return std::nullopt;
    return Block{text.substr(o + open.size(), c - o - open.size())};
}

// first two "<n>/<denom>" ratios at or after `from`
std::vector<int> scan_ratios(const std::string& body, size_t from, const std::string& denom,
                             size_t want) {
    static const std::regex ten(R"((\d{1,3})\s*/\s*10(?!\d))");
    static const std::regex fifty(R"((\d{1,3})\s*/\s*50(?!\d))");
    const std::regex& re = denom == "10" ? ten : fifty;
    std::vector<int> out;
    auto begin = std::sregex_iterator(body.begin() + static_cast<long>(from), body.end(), re);
    for (auto it = begin; it != std::sregex_iterator() && out.size() < want; ++it) {
        out.push_back(std::stoi((*it)[1].str()));
    }
    return out;
}

ParseOutcome parse_lenient(const std::string& text) {
    auto pref = locate_block(text, kPrefOpen, kPrefClose);
    if (!pref) return fail(ParseErrorCode::MISSING_TAG, std::string("cannot locate ") + kPrefOpen);
    auto non = locate_block(text, kNonPrefOpen, kNonPrefClose);
    if (!non) {
        return fail(ParseErrorCode::MISSING_TAG, std::string("cannot locate ") + kNonPrefOpen);
    }
    auto think = locate_block(text, kThinkOpen, kThinkClose);
    if (!think) {
        return fail(ParseErrorCode::MISSING_TAG, std::string("cannot locate ") + kThinkOpen);
    }
    auto answer = locate_block(text, kAnswerOpen, kAnswerClose);
    if (!answer) {
        return fail(ParseErrorCode::MISSING_TAG, std::string("cannot locate ") + kAnswerOpen);
    }

    CoTResponse r;
    r.raw_text = text;
    r.predicted_preferences = parse_profile_block(trim(pref->body));
    r.predicted_non_preferences = parse_profile_block(trim(non->body));

    const std::string body = think->body;
    const std::string body_lower = lower_ascii(body);
    for (int e = 0; e < kNumElements; ++e) {
        VisualElement el = kAllElements[static_cast<size_t>(e)];
        size_t pos = body_lower.find(element_display_name(el));
        if (pos == std::string::npos) pos = body_lower.find(element_key(el));
        if (pos == std::string::npos) {
            return fail(ParseErrorCode::BAD_SCORES,
                        "cannot locate element '" + element_display_name(el) + "' in think block");
        }
        std::vector<int> found = scan_ratios(body, pos, "10", 2);
        if (found.size() < 2) {
            return fail(ParseErrorCode::BAD_SCORES,
                        "cannot extract two scores for element '" + element_display_name(el) + "'");
        }
        if (found[0] > 10 || found[1] > 10) {
            return fail(ParseErrorCode::BAD_SCORES,
                        "score above 10 for element '" + element_display_name(el) + "'");
        }
        r.scores[static_cast<size_t>(e)] = {found[0], found[1]};
    }

    size_t total_pos = body_lower.find("total");
    std::vector<int> totals;
    if (total_pos != std::string::npos) totals = scan_ratios(body, total_pos, "50", 2);
    if (totals.size() == 2) {
        if (totals[0] > 50 || totals[1] > 50) {
            return fail(ParseErrorCode::BAD_TOTALS, "total above 50");
        }
        r.totals = {totals[0], totals[1]};
    } else {
        r.totals = {0, 0};
        for (int e = 0; e < kNumElements; ++e) {
            r.totals[0] += r.scores[static_cast<size_t>(e)][0];
            r.totals[1] += r.scores[static_cast<size_t>(e)][1];
        }
    }

    std::string ans = trim(answer->body);
    if (ans != "Image 1" && ans != "Image 2") {
        return fail(ParseErrorCode::BAD_ANSWER, "answer must be exactly Image 1 or Image 2");
    }
    r.answer = ans;

    ParseOutcome out;
    out.ok = true;
    out.response = std::move(r);
    return out;
}

std::string render_profile_block(const std::vector<PreferenceProfile>& profiles) {
    if (profiles.size() == 1) return profile_to_text(profiles[0]);
    std::string out;
    for (size_t i = 0; i < profiles.size(); ++i) {
        if (i) out += "\n";
        out += std::to_string(i + 1) + ". " + profile_to_text(profiles[i]);
    }
    return out;
}

}  // namespace

const std::string& parse_error_name(ParseErrorCode c) {
    return kParseErrorNames[static_cast<size_t>(c)];
}

const std::string& reject_code_name(RejectCode c) { return kRejectNames[static_cast<size_t>(c)]; }

std::optional<RejectCode> reject_code_from_name(const std::string& name) {
    for (size_t i = 0; i < kRejectNames.size(); ++i) {
        if (kRejectNames[i] == name) return static_cast<RejectCode>(i);
    }
    return std::nullopt;
}

std::string render_response(const CoTResponse& r) {
    if (r.predicted_preferences.empty() || r.predicted_non_preferences.empty()) {
        throw std::invalid_argument("cot: render_response needs at least one profile per side");
    }
    if (r.answer != "Image 1" && r.answer != "Image 2") {
        throw std::invalid_argument("cot: render_response answer must be Image 1 or Image 2");
    }
    int sum1 = 0, sum2 = 0;
    for (int e = 0; e < kNumElements; ++e) {
        int s1 = r.scores[static_cast<size_t>(e)][0];
        int s2 = r.scores[static_cast<size_t>(e)][1];
        if (s1 < 0 || s1 > 10 || s2 < 0 || s2 > 10) {
            throw std::invalid_argument("cot: render_response scores must lie in 0..10");
        }
        sum1 += s1;
        sum2 += s2;
    }
    if (r.totals[0] != sum1 || r.totals[1] != sum2) {
        throw std::invalid_argument("cot: render_response totals must equal column sums");
    }
    if (r.totals[0] == r.totals[1]) {
        throw std::invalid_argument("cot: render_response cannot emit tied totals");
    }
    const char* argmax = r.totals[0] > r.totals[1] ? "Image 1" : "Image 2";
    if (r.answer != argmax) {
        throw std::invalid_argument("cot: render_response answer must be the totals argmax");
    }

    std::string out;
    out += kPrefOpen;
    out += "\n" + render_profile_block(r.predicted_preferences) + "\n";
    out += kPrefClose;
    out += "\n";
    out += kNonPrefOpen;
    out += "\n" + render_profile_block(r.predicted_non_preferences) + "\n";
    out += kNonPrefClose;
    out += "\n";
    out += kThinkOpen;
    out += "\n";
    for (int e = 0; e < kNumElements; ++e) {
        out += "Dimension: " + element_display_name(kAllElements[static_cast<size_t>(e)]) +
               " | Image 1: " + std::to_string(r.scores[static_cast<size_t>(e)][0]) +
               "/10 | Image 2: " + std::to_string(r.scores[static_cast<size_t>(e)][1]) + "/10\n";
    }
    out += "Total | Image 1: " + std::to_string(r.totals[0]) +
           "/50 | Image 2: " + std::to_string(r.totals[1]) + "/50\n";
    out += kThinkClose;
    out += "\n";
    out += kAnswerOpen;
    out += "\n" + r.answer + "\n";
    out += kAnswerClose;
    return out;
}

ParseOutcome parse_response(const std::string& text, ParseMode mode) {
    return mode == ParseMode::strict ? parse_strict(text) : parse_lenient(text);
}

double exact_term_similarity(const std::string& a, const std::string& b) {
    return normalize_term(a) == normalize_term(b) ? 1.0 : 0.0;
}

double profile_set_similarity(const std::vector<PreferenceProfile>& predicted,
                              const std::vector<PreferenceProfile>& ground_truth,
                              const TermSimilarity& sim) {
    if (ground_truth.empty()) return 1.0;
    auto pair_score = [&](const PreferenceProfile& pred, const PreferenceProfile& gt) {
        int present = 0;
        double total = 0.0;
        for (VisualElement e : kAllElements) {
            if (!gt.term(e)) continue;
            ++present;
            if (pred.term(e)) total += sim(*pred.term(e), *gt.term(e));
        }
        return present == 0 ? 0.0 : total / present;
    };

    struct Candidate {
        double score;
        size_t gi, pi;
    };
    std::vector<Candidate> candidates;
    for (size_t gi = 0; gi < ground_truth.size(); ++gi) {
        for (size_t pi = 0; pi < predicted.size(); ++pi) {
            candidates.push_back({pair_score(predicted[pi], ground_truth[gi]), gi, pi});
        }
    }
    // greedy best-pair matching, deterministic tie-break by index
    std::sort(candidates.begin(), candidates.end(), [](const Candidate& a, const Candidate& b) {
        if (a.score != b.score) return a.score > b.score;
        if (a.gi != b.gi) return a.gi < b.gi;
        return a.pi < b.pi;
    });
    std::vector<bool> gt_used(ground_truth.size(), false), pred_used(predicted.size(), false);
    double sum = 0.0;
    for (const Candidate& c : candidates) {
        if (gt_used[c.gi] || pred_used[c.pi]) continue;
        gt_used[c.gi] = true;
        pred_used[c.pi] = true;
        sum += c.score;
    }
    return sum / static_cast<double>(ground_truth.size());  // unmatched ground truth scores 0
}

FilterVerdict filter_response(const std::string& resp_text, const datagen::UserSample& sample,
                              const TermSimilarity& sim, double tau) {
    if (tau < 0.0 || tau > 1.0) {
        throw std::invalid_argument("cot: filter threshold must lie in [0, 1]");
    }
    ParseOutcome po = parse_response(resp_text, ParseMode::strict);
    if (!po.ok) return {false, {RejectCode::PARSE_FAIL}};
    const CoTResponse& r = po.response;

    std::vector<RejectCode> reasons;
    int sum1 = 0, sum2 = 0;
    for (int e = 0; e < kNumElements; ++e) {
        sum1 += r.scores[static_cast<size_t>(e)][0];
        sum2 += r.scores[static_cast<size_t>(e)][1];
    }
    if (r.totals[0] != sum1 || r.totals[1] != sum2) reasons.push_back(RejectCode::TOTAL_MISMATCH);
    if (r.totals[0] == r.totals[1]) {
        reasons.push_back(RejectCode::TIE);
    } else {
        const char* argmax = r.totals[0] > r.totals[1] ? "Image 1" : "Image 2";
        if (r.answer != argmax) reasons.push_back(RejectCode::ANSWER_NOT_ARGMAX);
    }
    double profile_sim =
        0.5 * (profile_set_similarity(r.predicted_preferences, sample.profile_set.preferences, sim) +
               profile_set_similarity(r.predicted_non_preferences,
                                      sample.profile_set.non_preferences, sim));
    if (profile_sim < tau) reasons.push_back(RejectCode::PROFILE_MISMATCH);
    if (r.answer != sample.gt_answer) reasons.push_back(RejectCode::WRONG_ANSWER);

    std::sort(reasons.begin(), reasons.end());
    return {reasons.empty(), std::move(reasons)};
}

std::string build_annotation_prompt(const datagen::UserSample& sample) {
    const auto& set = sample.profile_set;
    std::string fresh = sample.initial_prompts.empty() ? "" : sample.initial_prompts.back();
    std::string out;
    out +=
        "You are annotating a personalized image assessment. Two candidate images were "
        "generated for one prompt; decide which one this user prefers and explain the "
        "assessment per visual element.\n\n";
    out += "User meta-information:\n";
    if (set.multi || set.preferences.size() > 1) {
        out += "The user holds " + std::to_string(set.preferences.size()) +
               " preference profiles. Score each dimension against the best-matching "
               "profile.\n";
        out += "Preference profiles:\n";
        for (size_t i = 0; i < set.preferences.size(); ++i) {
            out += std::to_string(i + 1) + ". " + profile_to_text(set.preferences[i]) + "\n";
        }
        out += "Non-preference profiles:\n";
        for (size_t i = 0; i < set.non_preferences.size(); ++i) {
            out += std::to_string(i + 1) + ". " + profile_to_text(set.non_preferences[i]) + "\n";
        }
    } else {
        out += "Preference profile: " + profile_to_text(set.preferences.at(0)) + "\n";
        out += "Non-preference profile: " + profile_to_text(set.non_preferences.at(0)) + "\n";
    }
    out += "Candidate prompt: " + fresh + "\n";
    out += "Correct answer: " + sample.gt_answer + "\n\n";
    out += "Reply in exactly this format:\n";
    out += std::string(kPrefOpen) + "\n<predicted preference profiles>\n" + kPrefClose + "\n";
    out += std::string(kNonPrefOpen) + "\n<predicted non-preference profiles>\n" + kNonPrefClose +
           "\n";
    out += std::string(kThinkOpen) + "\n";
    for (VisualElement e : kAllElements) {
        out += "Dimension: " + element_display_name(e) +
               " | Image 1: <s>/10 | Image 2: <s>/10\n";
    }
    out += "Total | Image 1: <t>/50 | Image 2: <t>/50\n";
    out += std::string(kThinkClose) + "\n";
    out += std::string(kAnswerOpen) + "\nImage 1 or Image 2\n" + kAnswerClose + "\n";
    return out;
}

std::string oracle_annotate(const datagen::UserSample& sample, uint64_t rng_seed) {
    Rng rng(rng_seed);
    CoTResponse r;
    r.predicted_preferences = sample.profile_set.preferences;
    r.predicted_non_preferences = sample.profile_set.non_preferences;
    size_t win = sample.gt_answer == "Image 1" ? 0 : 1;
    r.totals = {0, 0};
    for (int e = 0; e < kNumElements; ++e) {
        int win_score = rng.uniform_int(7, 10);
        int lose_score = rng.uniform_int(1, 4);
        r.scores[static_cast<size_t>(e)][win] = win_score;
        r.scores[static_cast<size_t>(e)][1 - win] = lose_score;
        r.totals[win] += win_score;
        r.totals[1 - win] += lose_score;
    }
    r.answer = sample.gt_answer;
    return render_response(r);
}

std::string annotated_row_to_json(const AnnotatedRow& row) {
    ordered_json obj = ordered_json::object();
    obj["user_id"] = row.user_id;
    obj["prompt_text_hash"] = row.prompt_text_hash;
    obj["response_text"] = row.response_text;
    if (row.verdict) {
        obj["verdict"] = row.verdict->accepted ? "accepted" : "rejected";
        obj["reasons"] = ordered_json::array();
        for (RejectCode c : row.verdict->reasons) obj["reasons"].push_back(reject_code_name(c));
    }
    return obj.dump();
}

AnnotatedRow annotated_row_from_json(const std::string& line) {
    try {
        ordered_json obj = ordered_json::parse(line);
        AnnotatedRow row;
        row.user_id = obj.at("user_id").get<std::string>();
        row.prompt_text_hash = obj.at("prompt_text_hash").get<std::string>();
        row.response_text = obj.at("response_text").get<std::string>();
        if (obj.contains("verdict")) {
            FilterVerdict v;
            v.accepted = obj.at("verdict").get<std::string>() == "accepted";
            for (const auto& name : obj.at("reasons")) {
                auto code = reject_code_from_name(name.get<std::string>());
                if (!code) {
                    throw std::runtime_error("unknown rejection code " + name.get<std::string>());
                }
                v.reasons.push_back(*code);
            }
            row.verdict = std::move(v);
        }
        return row;
    } catch (const std::exception& e) {
        throw std::runtime_error(std::string("cot: bad annotated row: ") + e.what());
    }
}

void save_annotated(const std::string& path, const std::vector<AnnotatedRow>& rows) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cot: cannot write annotated file " + path);
    for (const AnnotatedRow& row : rows) out << annotated_row_to_json(row) << "\n";
}

std::vector<AnnotatedRow> load_annotated(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cot: cannot open annotated file " + path);
    std::vector<AnnotatedRow> rows;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        rows.push_back(annotated_row_from_json(line));
    }
    return rows;
}

std::string RemoteAnnotatorClient::annotate(const std::string&, const std::vector<Image>&) {
    throw std::runtime_error(
        "cot: remote annotator is not configured in this build; set up an HTTP adapter for "
        "endpoint " +
        endpoint_ + " (ANNOTATOR_API_KEY is reserved for it) or use the oracle annotator");
}

std::vector<AnnotatedRow> annotate_dataset(
    const std::vector<datagen::UserSample>& samples,
    const std::function<std::string(const datagen::UserSample&, uint64_t)>& annotate_fn,
    uint64_t seed, int jobs) {
    if (jobs < 1) throw std::invalid_argument("cot: jobs must be at least 1");
    std::vector<AnnotatedRow> rows(samples.size());
    // seeds keyed by user id, so scheduling cannot shift results
    run_indexed(static_cast<int>(samples.size()), jobs, [&](int i) {
        const datagen::UserSample& s = samples[static_cast<size_t>(i)];
        AnnotatedRow row;
        row.user_id = s.user_id;
        row.prompt_text_hash = hex64(fnv1a(build_annotation_prompt(s)));
        row.response_text = annotate_fn(s, mix_seed(seed, s.user_id));
        rows[static_cast<size_t>(i)] = std::move(row);
    });
    return rows;
}

std::function<std::string(const datagen::UserSample&, uint64_t)> make_client_annotator(
    AnnotatorClient& client, const std::string& dataset_dir, const RetryPolicy& retry) {
    if (retry.max_attempts < 1) {
        throw std::invalid_argument("cot: retry policy needs at least one attempt");
    }
    return [&client, dataset_dir, retry](const datagen::UserSample& s, uint64_t) {
        std::string prompt = build_annotation_prompt(s);
        std::vector<Image> images;
        auto load = [&](const datagen::ImageRef& ref) {
            images.push_back(read_png(dataset_dir + "/" + ref.path));
        };
        for (const auto& ref : s.preferred_refs) load(ref);
        for (const auto& ref : s.non_preferred_refs) load(ref);
        load(s.candidate_1);
        load(s.candidate_2);

        std::chrono::milliseconds delay = retry.base_delay;
        for (int attempt = 1;; ++attempt) {
            try {
                return client.annotate(prompt, images);
            } catch (...) {
                if (attempt >= retry.max_attempts) throw;
                std::this_thread::sleep_for(delay);
                delay *= 2;
            }
        }
    };
}

}  // namespace preferthinker::cot
