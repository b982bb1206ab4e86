#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "preferthinker/image.hpp"
#include "preferthinker/profile.hpp"

namespace preferthinker::datagen {

struct ImageRef {
    std::string path;  // relative to the dataset directory
    int width = 0;
    int height = 0;
    std::string backend_id;
    uint64_t render_seed = 0;

    bool operator==(const ImageRef&) const = default;
};

// One dataset row: a simulated user with reference images, two candidates
// and the ground-truth answer.
struct UserSample {
    std::string user_id;
    UserProfileSet profile_set;
    std::vector<std::string> initial_prompts;
    std::vector<ImageRef> preferred_refs;
    std::vector<ImageRef> non_preferred_refs;
    ImageRef candidate_1;
    ImageRef candidate_2;
    std::string gt_answer;  // "Image 1" | "Image 2"
    std::string split;      // "seen-SP" | "seen-MP" | "unseen-SP" | "unseen-MP"

    bool operator==(const UserSample&) const = default;
};

// Text-to-image backend. The mock is deterministic in (prompt, seed); a
// remote adapter would wrap a real diffusion service behind the same calls.
class T2IBackend {
public:
    virtual ~T2IBackend() = default;
    virtual Image render(const std::string& prompt, uint64_t seed) const = 0;
    virtual std::string backend_id() const = 0;
};

// Deterministic 32x32 stand-in for a real T2I model. The image is split into
// five horizontal stripes, one per element in canonical order. When the
// prompt mentions exactly one vocabulary term for an element, that stripe
// encodes the term's index; zero or several mentions encode a reserved
// "none" state. Everything else is hash-driven noise, so decode_stripes
// recovers the term indices exactly while the picture still varies by
// prompt and seed.
class MockT2IBackend : public T2IBackend {
public:
    explicit MockT2IBackend(Vocabulary vocab) : vocab_(std::move(vocab)) {}
    Image render(const std::string& prompt, uint64_t seed) const override;
    std::string backend_id() const override { return "mock-stripe-v1"; }
    const Vocabulary& vocabulary() const { return vocab_; }

private:
    Vocabulary vocab_;
};

// Documented integration point for a real service. Not implemented: every
// call reports that no remote backend is configured.
class RemoteT2IBackend : public T2IBackend {
public:
    explicit RemoteT2IBackend(std::string endpoint) : endpoint_(std::move(endpoint)) {}
    Image render(const std::string& prompt, uint64_t seed) const override;
    std::string backend_id() const override { return "remote:" + endpoint_; }

private:
    std::string endpoint_;
};

inline constexpr int kMockImageSize = 32;

// per-element encoded state: term index, or nullopt for "none"
using StripeCode = std::array<std::optional<int>, kNumElements>;

StripeCode decode_stripes(const Image& img);
// stripe codes as a profile; "none" stripes and out-of-range indices are omitted
PreferenceProfile decode_stripes_to_profile(const Image& img, const Vocabulary& vocab);

// Appends one style clause per present element to the prompt:
//   "in <t> style", "with <t> colors", "<t> detail", "rendered as <t>",
//   "<t> saturation", joined with ", " in canonical order.
// Not idempotent: recaptioning twice appends twice.
std::string recaption(const std::string& initial_prompt, const PreferenceProfile& p);

struct SampleConfig {
    int k_refs = 5;
    uint64_t rng_seed = 0;
};

UserSample build_user_sample(const UserProfileSet& profile_set,
                             const std::vector<std::string>& prompts, int k_refs,
                             const T2IBackend& backend, uint64_t rng_seed,
                             const std::string& out_dir);

struct DatasetConfig {
    int n_users = 512;
    double multi_fraction = 0.25;
    double unseen_fraction = 0.5;
    int k_refs = 5;
    uint64_t seed = 0;
};

struct DatasetManifest {
    // counts keyed by split name, canonical order seen-SP, seen-MP, unseen-SP, unseen-MP
    std::vector<std::pair<std::string, int>> counts;
    uint64_t seed = 0;
    std::string vocab_hash;
    std::string backend_id;

    int total() const;
};

DatasetManifest generate_dataset(const Vocabulary& vocab, const DatasetConfig& cfg,
                                 const std::vector<std::string>& prompts,
                                 const T2IBackend& backend, const std::string& out_dir,
                                 int jobs = 1);

// dataset files
std::string sample_to_json(const UserSample& s);
UserSample sample_from_json(const std::string& line);
std::vector<UserSample> load_dataset(const std::string& dir);
DatasetManifest load_manifest(const std::string& dir);

// 200 bundled initial prompts; none of them mention a bundled vocabulary term
const std::vector<std::string>& bundled_prompts();
std::vector<std::string> load_prompts(const std::string& path);

}  // namespace preferthinker::datagen
