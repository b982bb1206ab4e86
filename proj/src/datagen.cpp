#include "preferthinker/datagen.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <stdexcept>
#include <thread>
#include <unordered_set>

#include "json.hpp"
#include "preferthinker/hash.hpp"
#include "preferthinker/parallel.hpp"
#include "preferthinker/rng.hpp"
#include "preferthinker/textmatch.hpp"

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

namespace preferthinker::datagen {

namespace {

constexpr int kStripeRows = 6;       // rows per element stripe
constexpr int kCodeColumns = 16;     // left half of each stripe carries the code
constexpr uint8_t kCodeBlue = 0xA5;  // marker byte distinguishing code from noise

uint8_t stripe_red(int element) { return static_cast<uint8_t>(20 * (element + 1)); }

// index of the single mentioned term of this element, or nullopt when the
// prompt names zero or several of them
std::optional<int> single_mention(const std::string& prompt_lower, const Vocabulary& vocab,
                                  VisualElement e) {
    std::optional<int> found;
    const auto& terms = vocab.terms(e);
    for (size_t i = 0; i < terms.size(); ++i) {
        if (!mentions_phrase(prompt_lower, terms[i])) continue;
        if (found) return std::nullopt;  // ambiguous
        found = static_cast<int>(i);
    }
    return found;
}

std::string join_path(const std::string& dir, const std::string& rel) {
    return (fs::path(dir) / rel).string();
}

ordered_json profile_to_json(const PreferenceProfile& p) {
    ordered_json obj = ordered_json::object();
    for (VisualElement e : kAllElements) {
        if (p.term(e)) obj[element_key(e)] = *p.term(e);
    }
    return obj;
}

PreferenceProfile profile_from_json(const ordered_json& obj) {
    PreferenceProfile p;
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        auto e = element_from_name(it.key());
        if (!e) throw std::runtime_error("unknown visual element key '" + it.key() + "'");
        p.set(*e, it.value().get<std::string>());
    }
    return p;
}

ordered_json ref_to_json(const ImageRef& r) {
    ordered_json obj = ordered_json::object();
    obj["path"] = r.path;
    obj["width"] = r.width;
    obj["height"] = r.height;
    obj["backend_id"] = r.backend_id;
    obj["render_seed"] = r.render_seed;
    return obj;
}

ImageRef ref_from_json(const ordered_json& obj) {
    ImageRef r;
    r.path = obj.at("path").get<std::string>();
    r.width = obj.at("width").get<int>();
    r.height = obj.at("height").get<int>();
    r.backend_id = obj.at("backend_id").get<std::string>();
    r.render_seed = obj.at("render_seed").get<uint64_t>();
    return r;
}

// a user's preference combination, order-insensitive over profiles
std::string combination_key(const UserProfileSet& set) {
    std::vector<std::string> parts;
    parts.reserve(set.preferences.size());
    for (const auto& p : set.preferences) parts.push_back(profile_to_text(p));
    std::sort(parts.begin(), parts.end());
    std::string key;
    for (const auto& s : parts) {
        if (!key.empty()) key += "|";
        key += s;
    }
    return key;
}

}  // namespace

Image MockT2IBackend::render(const std::string& prompt, uint64_t seed) const {
    Image img;
    img.width = kMockImageSize;
    img.height = kMockImageSize;
    img.pixels.resize(static_cast<size_t>(kMockImageSize) * kMockImageSize * 3);

    // everything starts as noise, a pure function of (hash(prompt), seed)
    Rng noise(mix_seed(fnv1a(prompt), seed));
    for (auto& b : img.pixels) b = static_cast<uint8_t>(noise.next_u64() & 0xff);

    const std::string prompt_lower = lower_ascii(prompt);
    for (int ei = 0; ei < kNumElements; ++ei) {
        std::optional<int> idx = single_mention(prompt_lower, vocab_, kAllElements[static_cast<size_t>(ei)]);
        // G carries index+1; 0 means "no single term". Indices past 254 do not
        // fit the byte and degrade to "none" (far beyond any sane vocabulary).
        uint8_t g = 0;
        if (idx && *idx < 255) g = static_cast<uint8_t>(*idx + 1);
        for (int y = ei * kStripeRows; y < (ei + 1) * kStripeRows; ++y) {
            for (int x = 0; x < kCodeColumns; ++x) {
                uint8_t* px = img.at(x, y);
                px[0] = stripe_red(ei);
                px[1] = g;
                px[2] = kCodeBlue;
            }
        }
    }
    return img;
}

Image RemoteT2IBackend::render(const std::string&, uint64_t) const {
    throw std::runtime_error(
        "datagen: remote text-to-image backend is not configured in this build; "
        "use the mock backend or wire an HTTP adapter to endpoint " +
        endpoint_);
}

StripeCode decode_stripes(const Image& img) {
    if (img.width != kMockImageSize || img.height != kMockImageSize) {
        throw std::invalid_argument("datagen: decode_stripes expects a " +
                                    std::to_string(kMockImageSize) + "x" +
                                    std::to_string(kMockImageSize) + " mock image");
    }
    StripeCode code;
    for (int ei = 0; ei < kNumElements; ++ei) {
        // interior pixel of the code region; never touched by noise
        const uint8_t* px = img.at(2, ei * kStripeRows + 2);
        if (px[0] != stripe_red(ei) || px[2] != kCodeBlue || px[1] == 0) {
            code[static_cast<size_t>(ei)] = std::nullopt;
        } else {
            code[static_cast<size_t>(ei)] = static_cast<int>(px[1]) - 1;
        }
    }
    return code;
}

PreferenceProfile decode_stripes_to_profile(const Image& img, const Vocabulary& vocab) {
    StripeCode code = decode_stripes(img);
    PreferenceProfile p;
    for (int ei = 0; ei < kNumElements; ++ei) {
        const auto& idx = code[static_cast<size_t>(ei)];
        if (!idx) continue;
        VisualElement e = kAllElements[static_cast<size_t>(ei)];
        const auto& terms = vocab.terms(e);
        if (*idx < static_cast<int>(terms.size())) p.set(e, terms[static_cast<size_t>(*idx)]);
    }
    return p;
}

std::string recaption(const std::string& initial_prompt, const PreferenceProfile& p) {
    std::string out = initial_prompt;
    for (VisualElement e : kAllElements) {
        const auto& t = p.term(e);
        if (!t) continue;
        out += ", ";
        switch (e) {
            case VisualElement::art_style: out += "in " + *t + " style"; break;
            case VisualElement::color: out += "with " + *t + " colors"; break;
            case VisualElement::detail: out += *t + " detail"; break;
            case VisualElement::art_medium: out += "rendered as " + *t; break;
            case VisualElement::saturation: out += *t + " saturation"; break;
        }
    }
    return out;
}

UserSample build_user_sample(const UserProfileSet& profile_set,
                             const std::vector<std::string>& prompts, int k_refs,
                             const T2IBackend& backend, uint64_t rng_seed,
                             const std::string& out_dir) {
    if (k_refs < 1) throw std::invalid_argument("datagen: k_refs must be at least 1");
    if (profile_set.preferences.empty() ||
        profile_set.preferences.size() != profile_set.non_preferences.size()) {
        throw std::invalid_argument("datagen: profile set must hold paired preference lists");
    }
    if (static_cast<int>(prompts.size()) < k_refs + 1) {
        throw std::invalid_argument("datagen: need at least k_refs+1 prompts, got " +
                                    std::to_string(prompts.size()));
    }
    fs::create_directories(fs::path(out_dir) / "img");

    UserSample s;
    s.user_id = profile_set.user_id.empty() ? "user" : profile_set.user_id;
    s.profile_set = profile_set;
    s.profile_set.user_id = s.user_id;
    s.initial_prompts.assign(prompts.begin(), prompts.begin() + k_refs + 1);

    Rng rng(rng_seed);
    const size_t n_profiles = profile_set.preferences.size();
    auto render_to = [&](const std::string& prompt, uint64_t seed,
                         const std::string& rel_path) -> ImageRef {
        Image img = backend.render(prompt, seed);
        write_png(join_path(out_dir, rel_path), img);
        return ImageRef{rel_path, img.width, img.height, backend.backend_id(), seed};
    };

    for (int i = 0; i < k_refs; ++i) {
        size_t pi = static_cast<size_t>(i) % n_profiles;
        uint64_t seed_pref = rng.next_u64();
        uint64_t seed_non = rng.next_u64();
        s.preferred_refs.push_back(
            render_to(recaption(prompts[static_cast<size_t>(i)], profile_set.preferences[pi]),
                      seed_pref, "img/" + s.user_id + "_pref" + std::to_string(i) + ".png"));
        s.non_preferred_refs.push_back(
            render_to(recaption(prompts[static_cast<size_t>(i)], profile_set.non_preferences[pi]),
                      seed_non, "img/" + s.user_id + "_non" + std::to_string(i) + ".png"));
    }

    // both candidates share one fresh prompt; only the applied profile differs
    const std::string& fresh = prompts[static_cast<size_t>(k_refs)];
    size_t j = n_profiles == 1 ? 0 : static_cast<size_t>(rng.uniform(n_profiles));
    uint64_t seed_cand_pref = rng.next_u64();
    uint64_t seed_cand_non = rng.next_u64();
    bool pref_is_first = rng.uniform(2) == 0;

    std::string pref_prompt = recaption(fresh, profile_set.preferences[j]);
    std::string non_prompt = recaption(fresh, profile_set.non_preferences[j]);
    if (pref_is_first) {
        s.candidate_1 = render_to(pref_prompt, seed_cand_pref, "img/" + s.user_id + "_cand1.png");
        s.candidate_2 = render_to(non_prompt, seed_cand_non, "img/" + s.user_id + "_cand2.png");
        s.gt_answer = "Image 1";
    } else {
        s.candidate_1 = render_to(non_prompt, seed_cand_non, "img/" + s.user_id + "_cand1.png");
        s.candidate_2 = render_to(pref_prompt, seed_cand_pref, "img/" + s.user_id + "_cand2.png");
        s.gt_answer = "Image 2";
    }
    return s;
}

int DatasetManifest::total() const {
    int t = 0;
    for (const auto& [_, n] : counts) t += n;
    return t;
}

DatasetManifest generate_dataset(const Vocabulary& vocab, const DatasetConfig& cfg,
                                 const std::vector<std::string>& prompts,
                                 const T2IBackend& backend, const std::string& out_dir,
                                 int jobs) {
    if (cfg.n_users < 4) {
        throw std::invalid_argument(
            "datagen: n_users must be at least 4 to populate all four splits");
    }
    if (cfg.multi_fraction < 0.0 || cfg.multi_fraction > 1.0 || cfg.unseen_fraction < 0.0 ||
        cfg.unseen_fraction > 1.0) {
        throw std::invalid_argument("datagen: fractions must lie in [0, 1]");
    }
    if (cfg.k_refs < 1) throw std::invalid_argument("datagen: k_refs must be at least 1");
    if (static_cast<int>(prompts.size()) < cfg.k_refs + 1) {
        throw std::invalid_argument("datagen: prompt pool smaller than k_refs+1");
    }
    if (jobs < 1) throw std::invalid_argument("datagen: jobs must be at least 1");

    const int n = cfg.n_users;
    const int n_mp = static_cast<int>(std::llround(n * cfg.multi_fraction));
    const int n_sp = n - n_mp;
    const int sp_unseen = static_cast<int>(std::llround(n_sp * cfg.unseen_fraction));
    const int mp_unseen = static_cast<int>(std::llround(n_mp * cfg.unseen_fraction));
    const int sp_seen = n_sp - sp_unseen;
    const int mp_seen = n_mp - mp_unseen;

    struct Block {
        const char* split;
        bool multi;
        bool unseen;
        int count;
    };
    // seen blocks first so the seen combination set is complete before any
    // unseen user is rejection-sampled against it
    const Block blocks[] = {
        {"seen-SP", false, false, sp_seen},
        {"seen-MP", true, false, mp_seen},
        {"unseen-SP", false, true, sp_unseen},
        {"unseen-MP", true, true, mp_unseen},
    };

    std::vector<UserProfileSet> sets;
    std::vector<std::string> splits;
    std::vector<uint64_t> sample_seeds;
    std::vector<std::vector<std::string>> user_prompts;
    sets.reserve(static_cast<size_t>(n));
    std::unordered_set<std::string> seen_keys;

    int user_index = 0;
    for (const Block& b : blocks) {
        for (int c = 0; c < b.count; ++c, ++user_index) {
            uint64_t user_stream = mix_seed(cfg.seed, static_cast<uint64_t>(user_index) + 1);
            int n_profiles = 1;
            if (b.multi) {
                Rng nr(mix_seed(user_stream, "nprof"));
                n_profiles = 2 + static_cast<int>(nr.uniform(2));
            }
            UserProfileSet set;
            if (!b.unseen) {
                set = sample_profile_set(vocab, mix_seed(user_stream, "profiles"), n_profiles);
                seen_keys.insert(combination_key(set));
            } else {
                bool ok = false;
                for (uint64_t attempt = 0; attempt < 1000; ++attempt) {
                    set = sample_profile_set(
                        vocab, mix_seed(mix_seed(user_stream, "profiles"), attempt), n_profiles);
                    if (!seen_keys.count(combination_key(set))) {
                        ok = true;
                        break;
                    }
                }
                if (!ok) {
                    throw std::runtime_error(
                        "datagen: could not sample a preference combination disjoint from the "
                        "seen splits; enlarge the vocabulary or lower n_users");
                }
            }
            char uid[16];
            std::snprintf(uid, sizeof uid, "u%05d", user_index);
            set.user_id = uid;
            set.multi = b.multi;

            // k_refs+1 distinct prompts per user, drawn from the pool
            Rng pr(mix_seed(user_stream, "prompts"));
            std::vector<size_t> order(prompts.size());
            for (size_t t = 0; t < order.size(); ++t) order[t] = t;
            std::vector<std::string> chosen;
            for (int t = 0; t <= cfg.k_refs; ++t) {
                size_t pick = static_cast<size_t>(t) +
                              static_cast<size_t>(pr.uniform(order.size() - static_cast<size_t>(t)));
                std::swap(order[static_cast<size_t>(t)], order[pick]);
                chosen.push_back(prompts[order[static_cast<size_t>(t)]]);
            }

            sets.push_back(std::move(set));
            splits.emplace_back(b.split);
            sample_seeds.push_back(mix_seed(user_stream, "sample"));
            user_prompts.push_back(std::move(chosen));
        }
    }

    fs::create_directories(fs::path(out_dir) / "img");
    std::vector<UserSample> samples(static_cast<size_t>(n));
    // every per-user seed is fixed above, so parallel order cannot change results
    run_indexed(n, jobs, [&](int i) {
        size_t ui = static_cast<size_t>(i);
        UserSample s = build_user_sample(sets[ui], user_prompts[ui], cfg.k_refs, backend,
                                         sample_seeds[ui], out_dir);
        s.split = splits[ui];
        samples[ui] = std::move(s);
    });

    std::ofstream rows(join_path(out_dir, "dataset.jsonl"), std::ios::binary);
    if (!rows) throw std::runtime_error("datagen: cannot write dataset.jsonl under " + out_dir);
    for (const auto& s : samples) rows << sample_to_json(s) << "\n";
    rows.close();

    DatasetManifest manifest;
    for (const Block& b : blocks) manifest.counts.emplace_back(b.split, b.count);
    manifest.seed = cfg.seed;
    manifest.vocab_hash = hex64(vocab.hash());
    manifest.backend_id = backend.backend_id();

    ordered_json mj = ordered_json::object();
    mj["counts"] = ordered_json::object();
    for (const auto& [split, count] : manifest.counts) mj["counts"][split] = count;
    mj["seed"] = manifest.seed;
    mj["vocab_hash"] = manifest.vocab_hash;
    mj["backend_id"] = manifest.backend_id;
    std::ofstream mf(join_path(out_dir, "manifest.json"), std::ios::binary);
    if (!mf) throw std::runtime_error("datagen: cannot write manifest.json under " + out_dir);
    mf << mj.dump(2) << "\n";
    return manifest;
}

std::string sample_to_json(const UserSample& s) {
    ordered_json row = ordered_json::object();
    row["user_id"] = s.user_id;
    row["split"] = s.split;
    row["multi"] = s.profile_set.multi;
    row["preferences"] = ordered_json::array();
    for (const auto& p : s.profile_set.preferences) row["preferences"].push_back(profile_to_json(p));
    row["non_preferences"] = ordered_json::array();
    for (const auto& p : s.profile_set.non_preferences) {
        row["non_preferences"].push_back(profile_to_json(p));
    }
    row["prompts"] = s.initial_prompts;
    row["preferred_refs"] = ordered_json::array();
    for (const auto& r : s.preferred_refs) row["preferred_refs"].push_back(ref_to_json(r));
    row["non_preferred_refs"] = ordered_json::array();
    for (const auto& r : s.non_preferred_refs) row["non_preferred_refs"].push_back(ref_to_json(r));
    row["candidate_1"] = ref_to_json(s.candidate_1);
    row["candidate_2"] = ref_to_json(s.candidate_2);
    row["gt_answer"] = s.gt_answer;
    return row.dump();
}

UserSample sample_from_json(const std::string& line) {
    try {
        ordered_json row = ordered_json::parse(line);
        UserSample s;
        s.user_id = row.at("user_id").get<std::string>();
        s.split = row.at("split").get<std::string>();
        s.profile_set.user_id = s.user_id;
        s.profile_set.multi = row.at("multi").get<bool>();
        for (const auto& p : row.at("preferences")) {
            s.profile_set.preferences.push_back(profile_from_json(p));
        }
        for (const auto& p : row.at("non_preferences")) {
            s.profile_set.non_preferences.push_back(profile_from_json(p));
        }
        s.initial_prompts = row.at("prompts").get<std::vector<std::string>>();
        for (const auto& r : row.at("preferred_refs")) s.preferred_refs.push_back(ref_from_json(r));
        for (const auto& r : row.at("non_preferred_refs")) {
            s.non_preferred_refs.push_back(ref_from_json(r));
        }
        s.candidate_1 = ref_from_json(row.at("candidate_1"));
        s.candidate_2 = ref_from_json(row.at("candidate_2"));
        s.gt_answer = row.at("gt_answer").get<std::string>();
        return s;
    } catch (const std::exception& e) {
        throw std::runtime_error(std::string("datagen: bad dataset row: ") + e.what());
    }
}

std::vector<UserSample> load_dataset(const std::string& dir) {
    std::ifstream in(join_path(dir, "dataset.jsonl"), std::ios::binary);
    if (!in) throw std::runtime_error("datagen: no dataset.jsonl under " + dir);
    std::vector<UserSample> samples;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        samples.push_back(sample_from_json(line));
    }
    return samples;
}

DatasetManifest load_manifest(const std::string& dir) {
    std::ifstream in(join_path(dir, "manifest.json"), std::ios::binary);
    if (!in) throw std::runtime_error("datagen: no manifest.json under " + dir);
    std::stringstream buf;
    buf << in.rdbuf();
    try {
        ordered_json mj = ordered_json::parse(buf.str());
        DatasetManifest m;
        for (auto it = mj.at("counts").begin(); it != mj.at("counts").end(); ++it) {
            m.counts.emplace_back(it.key(), it.value().get<int>());
        }
        m.seed = mj.at("seed").get<uint64_t>();
        m.vocab_hash = mj.at("vocab_hash").get<std::string>();
        m.backend_id = mj.at("backend_id").get<std::string>();
        return m;
    } catch (const std::exception& e) {
        throw std::runtime_error(std::string("datagen: bad manifest.json: ") + e.what());
    }
}

const std::vector<std::string>& bundled_prompts() {
    static const std::vector<std::string> prompts = [] {
        const char* subjects[] = {
            "a red fox",        "an old lighthouse",   "a street market",
            "a mountain village", "a sailing ship",    "a quiet library",
            "a clockwork robot", "a hidden waterfall", "a desert caravan",
            "a snowy cabin",    "a city rooftop",      "a garden maze",
            "a fishing harbor", "a forest shrine",     "a night train",
            "a hot air balloon", "a stone bridge",     "a windmill on a hill",
            "a tide pool",      "a lantern festival"};
        const char* settings[] = {"at dawn",      "under a full moon", "in heavy rain",
                                  "during autumn", "beside a river",   "in the fog",
                                  "at sunset",    "after a storm",     "in early spring",
                                  "under starlight"};
        std::vector<std::string> out;
        out.reserve(200);
        for (const char* s : subjects) {
            for (const char* t : settings) out.push_back(std::string(s) + " " + t);
        }
        return out;
    }();
    return prompts;
}

std::vector<std::string> load_prompts(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("datagen: cannot open prompt file " + path);
    std::vector<std::string> prompts;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        size_t a = line.find_first_not_of(" \t");
        if (a == std::string::npos) continue;
        size_t b = line.find_last_not_of(" \t");
        std::string trimmed = line.substr(a, b - a + 1);
        if (trimmed[0] == '#') continue;
        prompts.push_back(std::move(trimmed));
    }
    if (prompts.empty()) throw std::runtime_error("datagen: prompt file " + path + " has no prompts");
    return prompts;
}

}  // namespace preferthinker::datagen
