#include "preferthinker/profile.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include "preferthinker/hash.hpp"

namespace preferthinker {

namespace {

const std::array<std::string, kNumElements> kDisplayNames = {
    "art style", "color", "detail", "art medium", "saturation"};
const std::array<std::string, kNumElements> kKeys = {
    "art_style", "color", "detail", "art_medium", "saturation"};

}  // namespace

const std::string& element_display_name(VisualElement e) {
    return kDisplayNames[static_cast<size_t>(e)];
}

const std::string& element_key(VisualElement e) { return kKeys[static_cast<size_t>(e)]; }

std::optional<VisualElement> element_from_name(const std::string& name) {
    std::string n = normalize_term(name);
    std::replace(n.begin(), n.end(), '_', ' ');
    for (int i = 0; i < kNumElements; ++i) {
        if (n == kDisplayNames[static_cast<size_t>(i)]) return static_cast<VisualElement>(i);
    }
    return std::nullopt;
}

std::string normalize_term(const std::string& raw) {
    std::string out;
    out.reserve(raw.size());
    bool pending_space = false;
    for (unsigned char c : raw) {
        if (std::isspace(c)) {
            if (!out.empty()) pending_space = true;
            continue;
        }
        if (pending_space) {
            out.push_back(' ');
            pending_space = false;
        }
        out.push_back(static_cast<char>(std::tolower(c)));
    }
    return out;
}

Vocabulary::Vocabulary(std::array<std::vector<std::string>, kNumElements> terms,
                       std::string source)
    : terms_(std::move(terms)), source_(std::move(source)) {}

Vocabulary Vocabulary::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("vocabulary: cannot open file: " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    return parse(buf.str(), path);
}

Vocabulary Vocabulary::parse(const std::string& text, const std::string& source) {
    std::array<std::vector<std::string>, kNumElements> terms;
    std::array<bool, kNumElements> seen{};
    std::optional<VisualElement> current;

    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    auto where = [&](int n) { return source + ":" + std::to_string(n); };
    while (std::getline(in, line)) {
        ++lineno;
        auto hash_pos = line.find('#');
        if (hash_pos != std::string::npos) line.erase(hash_pos);
        std::string stripped = normalize_term(line);
        if (stripped.empty()) continue;
        if (stripped.front() == '[') {
            if (stripped.back() != ']')
                throw std::runtime_error("vocabulary: malformed section header at " +
                                         where(lineno));
            std::string name = stripped.substr(1, stripped.size() - 2);
            auto e = element_from_name(name);
            if (!e)
                throw std::runtime_error("vocabulary: unknown element \"" + name + "\" at " +
                                         where(lineno));
            current = *e;
            seen[static_cast<size_t>(*e)] = true;
            continue;
        }
        if (!current)
            throw std::runtime_error("vocabulary: term before any section header at " +
                                     where(lineno));
        auto& list = terms[static_cast<size_t>(*current)];
        if (std::find(list.begin(), list.end(), stripped) != list.end())
            throw std::runtime_error("vocabulary: duplicate term \"" + stripped + "\" under [" +
                                     element_display_name(*current) + "] at " + where(lineno));
        list.push_back(stripped);
    }

    for (int i = 0; i < kNumElements; ++i) {
        auto e = static_cast<VisualElement>(i);
        if (!seen[static_cast<size_t>(i)])
            throw std::runtime_error("vocabulary: missing element [" + element_display_name(e) +
                                     "] in " + source);
        if (terms[static_cast<size_t>(i)].size() < 2)
            throw std::runtime_error("vocabulary: element [" + element_display_name(e) +
                                     "] needs at least 2 terms in " + source);
    }
    return Vocabulary(std::move(terms), source);
}

const Vocabulary& Vocabulary::bundled() {
    static const Vocabulary v = [] {
        std::array<std::vector<std::string>, kNumElements> t;
        t[0] = {"impressionism", "cubism", "surrealism", "minimalism", "baroque",
                "art deco",      "pop art", "realism",    "anime",      "pixel art"};
        t[1] = {"warm",  "cool",        "monochrome", "pastel", "earthy",
                "neon",  "jewel toned", "muted",      "golden", "crimson"};
        t[2] = {"intricate", "simple",   "ornate", "clean", "elaborate",
                "sparse",    "textured", "refined", "busy",  "plain"};
        t[3] = {"oil painting", "watercolor", "charcoal", "digital render", "ink drawing",
                "acrylic",      "gouache",    "fresco",   "collage",        "woodcut"};
        t[4] = {"vibrant", "washed out", "rich", "faded",   "intense",
                "soft",    "bold",       "subdued", "luminous", "dull"};
        return Vocabulary(std::move(t), "<bundled>");
    }();
    return v;
}

const std::vector<std::string>& Vocabulary::terms(VisualElement e) const {
    return terms_[static_cast<size_t>(e)];
}

std::optional<int> Vocabulary::term_index(VisualElement e, const std::string& term) const {
    const auto& list = terms_[static_cast<size_t>(e)];
    auto it = std::find(list.begin(), list.end(), normalize_term(term));
    if (it == list.end()) return std::nullopt;
    return static_cast<int>(it - list.begin());
}

uint64_t Vocabulary::hash() const {
    uint64_t h = 0xcbf29ce484222325ull;
    for (int i = 0; i < kNumElements; ++i) {
        h = fnv1a(kKeys[static_cast<size_t>(i)], h);
        h = fnv1a("\x1f", h);
        for (const auto& t : terms_[static_cast<size_t>(i)]) {
            h = fnv1a(t, h);
            h = fnv1a("\x1e", h);
        }
    }
    return h;
}

int Vocabulary::max_terms() const {
    size_t m = 0;
    for (const auto& list : terms_) m = std::max(m, list.size());
    return static_cast<int>(m);
}

bool PreferenceProfile::partial() const {
    return std::any_of(terms.begin(), terms.end(), [](const auto& t) { return !t.has_value(); });
}

bool PreferenceProfile::empty() const {
    return std::none_of(terms.begin(), terms.end(), [](const auto& t) { return t.has_value(); });
}

size_t PreferenceProfile::present_count() const {
    return static_cast<size_t>(
        std::count_if(terms.begin(), terms.end(), [](const auto& t) { return t.has_value(); }));
}

int PreferenceProfile::matching_elements(const PreferenceProfile& other) const {
    int n = 0;
    for (size_t i = 0; i < terms.size(); ++i) {
        if (terms[i] && other.terms[i] && *terms[i] == *other.terms[i]) ++n;
    }
    return n;
}

namespace {

PreferenceProfile sample_one(const Vocabulary& vocab, Rng& rng) {
    PreferenceProfile p;
    for (auto e : kAllElements) {
        const auto& list = vocab.terms(e);
        p.set(e, list[rng.uniform(list.size())]);
    }
    return p;
}

PreferenceProfile sample_disjoint(const Vocabulary& vocab, const PreferenceProfile& avoid,
                                  Rng& rng) {
    // non-preference: uniform over the element's remaining terms
    PreferenceProfile p;
    for (auto e : kAllElements) {
        const auto& list = vocab.terms(e);
        const std::string& taken = *avoid.term(e);
        std::vector<const std::string*> rest;
        rest.reserve(list.size());
        for (const auto& t : list)
            if (t != taken) rest.push_back(&t);
        p.set(e, *rest[rng.uniform(rest.size())]);
    }
    return p;
}

}  // namespace

UserProfileSet sample_profile_set(const Vocabulary& vocab, uint64_t rng_seed, int n_profiles) {
    if (n_profiles < 1 || n_profiles > 3)
        throw std::invalid_argument("sample_profile_set: n_profiles must be in 1..3");
    for (auto e : kAllElements) {
        if (vocab.terms(e).size() < 2)
            throw std::invalid_argument("sample_profile_set: vocabulary too small for element [" +
                                        element_display_name(e) + "]");
    }

    Rng rng(rng_seed);
    UserProfileSet set;
    set.multi = n_profiles > 1;
    constexpr int kMaxTries = 1000;
    for (int i = 0; i < n_profiles; ++i) {
        PreferenceProfile pref;
        bool distinct = false;
        for (int attempt = 0; attempt < kMaxTries && !distinct; ++attempt) {
            pref = sample_one(vocab, rng);
            distinct = std::none_of(set.preferences.begin(), set.preferences.end(),
                                    [&](const PreferenceProfile& q) { return q == pref; });
        }
        if (!distinct)
            throw std::runtime_error(
                "sample_profile_set: vocabulary too small to guarantee distinct profiles");
        set.preferences.push_back(pref);
        set.non_preferences.push_back(sample_disjoint(vocab, pref, rng));
    }
    return set;
}

std::string profile_to_text(const PreferenceProfile& p) {
    std::string out;
    for (auto e : kAllElements) {
        const auto& t = p.term(e);
        if (!t) continue;
        if (!out.empty()) out += "; ";
        out += element_display_name(e) + ": " + *t;
    }
    return out;
}

ParsedProfile parse_profile_text(const std::string& text) {
    ParsedProfile result;
    size_t pos = 0;
    while (pos < text.size()) {
        size_t end = text.find_first_of(";\n", pos);
        if (end == std::string::npos) end = text.size();
        std::string clause = text.substr(pos, end - pos);
        pos = end + 1;

        auto colon = clause.find(':');
        if (colon == std::string::npos) continue;
        std::string name = clause.substr(0, colon);
        // strip list numbering like "1. art style"
        std::string norm_name = normalize_term(name);
        while (!norm_name.empty() &&
               (std::isdigit(static_cast<unsigned char>(norm_name.front())) ||
                norm_name.front() == '.' || norm_name.front() == ')' || norm_name.front() == ' '))
            norm_name.erase(norm_name.begin());
        std::string term = normalize_term(clause.substr(colon + 1));
        if (norm_name.empty() || term.empty()) continue;
        auto e = element_from_name(norm_name);
        if (!e) {
            ++result.dropped_clauses;
            continue;
        }
        result.profile.set(*e, term);
    }
    return result;
}

}  // namespace preferthinker
