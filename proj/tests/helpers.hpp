#pragma once

// Shared fixtures for the test binaries: disk-free sample construction,
// random valid responses, and one lazily generated on-disk dataset reused by
// every test that needs real image files.

#include <unistd.h>

#include <filesystem>
#include <string>
#include <vector>

#include "preferthinker/cot.hpp"
#include "preferthinker/datagen.hpp"
#include "preferthinker/hash.hpp"
#include "preferthinker/profile.hpp"
#include "preferthinker/rng.hpp"

namespace testutil {

using namespace preferthinker;

// A dataset row without any backing files: enough for reward/filter/grammar
// tests, which never touch the reference images.
inline datagen::UserSample make_sample(const Vocabulary& vocab, uint64_t seed, int n_profiles) {
    datagen::UserSample s;
    Rng rng(mix_seed(seed, std::string_view("make-sample")));
    s.user_id = "t" + std::to_string(seed);
    s.profile_set = sample_profile_set(vocab, seed, n_profiles);
    s.initial_prompts = {"a lighthouse on a cliff", "a paper boat in a puddle"};
    s.gt_answer = rng.bernoulli(0.5) ? "Image 1" : "Image 2";
    s.split = n_profiles > 1 ? "seen-MP" : "seen-SP";
    return s;
}

// A random structurally valid response: profiles drawn from the vocabulary,
// scores with untied totals, answer at the argmax. Satisfies every
// render_response invariant by construction.
inline cot::CoTResponse random_valid_response(Rng& rng, const Vocabulary& vocab) {
    cot::CoTResponse r;
    auto random_profile = [&] {
        PreferenceProfile p;
        for (;;) {
            int present = 0;
            for (int e = 0; e < kNumElements; ++e) {
                p.terms[static_cast<size_t>(e)].reset();
                if (rng.bernoulli(0.75)) {
                    const auto& terms = vocab.terms(kAllElements[static_cast<size_t>(e)]);
                    p.terms[static_cast<size_t>(e)] = terms[rng.uniform(terms.size())];
                    ++present;
                }
            }
            if (present > 0) return p;
        }
    };
    int n_pos = 1 + static_cast<int>(rng.uniform(3));
    int n_neg = 1 + static_cast<int>(rng.uniform(3));
    for (int i = 0; i < n_pos; ++i) r.predicted_preferences.push_back(random_profile());
    for (int i = 0; i < n_neg; ++i) r.predicted_non_preferences.push_back(random_profile());
    for (;;) {
        int t1 = 0, t2 = 0;
        for (int e = 0; e < kNumElements; ++e) {
            int a = static_cast<int>(rng.uniform(11));
            int b = static_cast<int>(rng.uniform(11));
            r.scores[static_cast<size_t>(e)] = {a, b};
            t1 += a;
            t2 += b;
        }
        if (t1 == t2) continue;
        r.totals = {t1, t2};
        r.answer = t1 > t2 ? "Image 1" : "Image 2";
        return r;
    }
}

// One 64-user on-disk dataset per test-binary run, generated on first use.
class SharedDataset {
public:
    static const SharedDataset& get() {
        static SharedDataset instance;
        return instance;
    }

    const std::string& dir() const { return dir_; }
    const std::vector<datagen::UserSample>& samples() const { return samples_; }

    SharedDataset(const SharedDataset&) = delete;
    SharedDataset& operator=(const SharedDataset&) = delete;

private:
    SharedDataset() {
        namespace fs = std::filesystem;
        fs::path base = fs::temp_directory_path() /
                        ("preferthinker-tests-" + std::to_string(::getpid()));
        dir_ = (base / "dataset64").string();
        fs::remove_all(dir_);
        fs::create_directories(dir_);
        Vocabulary vocab = Vocabulary::bundled();
        datagen::MockT2IBackend backend(vocab);
        datagen::DatasetConfig cfg;
        cfg.n_users = 64;
        cfg.multi_fraction = 1.0 / 3.0;
        cfg.unseen_fraction = 0.5;
        cfg.seed = 404;
        datagen::generate_dataset(vocab, cfg, datagen::bundled_prompts(), backend, dir_, 4);
        samples_ = datagen::load_dataset(dir_);
    }

    std::string dir_;
    std::vector<datagen::UserSample> samples_;
};

// fresh scratch directory for a single test case
class ScratchDir {
public:
    explicit ScratchDir(const std::string& tag) {
        namespace fs = std::filesystem;
        path_ = (fs::temp_directory_path() /
                 ("preferthinker-scratch-" + tag + "-" + std::to_string(::getpid())))
                    .string();
        fs::remove_all(path_);
        fs::create_directories(path_);
    }
    ~ScratchDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    const std::string& path() const { return path_; }
    std::string file(const std::string& name) const {
        return (std::filesystem::path(path_) / name).string();
    }

private:
    std::string path_;
};

}  // namespace testutil
