#include <string>

#include "doctest.h"
#include "helpers.hpp"
#include "preferthinker/datagen.hpp"
#include "preferthinker/image.hpp"
#include "preferthinker/rng.hpp"

using namespace preferthinker;

TEST_SUITE("image") {

TEST_CASE("png encode/decode round trip preserves every pixel") {
    Rng rng(91);
    Image img;
    img.width = 23;  // deliberately not a power of two
    img.height = 17;
    img.pixels.resize(static_cast<size_t>(img.width) * img.height * 3);
    for (auto& b : img.pixels) b = static_cast<uint8_t>(rng.uniform(256));
    Image back = decode_png(encode_png(img));
    CHECK(back == img);
}

TEST_CASE("png file round trip") {
    testutil::ScratchDir scratch("png");
    Image img = Image::solid(8, 6, 200, 10, 30);
    img.at(3, 2)[1] = 255;
    std::string path = scratch.file("t.png");
    write_png(path, img);
    CHECK(read_png(path) == img);
}

TEST_CASE("encoding is deterministic") {
    Image img = Image::solid(16, 16, 1, 2, 3);
    CHECK(encode_png(img) == encode_png(img));
}

TEST_CASE("mock renderer is deterministic in prompt and seed") {
    const Vocabulary& vocab = Vocabulary::bundled();
    datagen::MockT2IBackend backend(vocab);
    Image a = backend.render("a harbor, in cubism style", 9);
    Image b = backend.render("a harbor, in cubism style", 9);
    Image c = backend.render("a harbor, in cubism style", 10);
    Image d = backend.render("a harbor at noon, in cubism style", 9);
    CHECK(a == b);
    CHECK(a != c);
    CHECK(a != d);
    CHECK(a.width == datagen::kMockImageSize);
    CHECK(a.height == datagen::kMockImageSize);
}

TEST_CASE("stripes encode exactly the singly mentioned terms") {
    const Vocabulary& vocab = Vocabulary::bundled();
    datagen::MockT2IBackend backend(vocab);

    PreferenceProfile p;
    for (VisualElement e : kAllElements) p.set(e, vocab.terms(e)[1]);
    std::string prompt = datagen::recaption("a quiet valley", p);
    datagen::StripeCode code = datagen::decode_stripes(backend.render(prompt, 3));
    for (int e = 0; e < kNumElements; ++e) CHECK(code[static_cast<size_t>(e)] == 1);

    // no style clauses at all -> every stripe reads "none"
    datagen::StripeCode none = datagen::decode_stripes(backend.render("a quiet valley", 3));
    for (int e = 0; e < kNumElements; ++e) CHECK(!none[static_cast<size_t>(e)].has_value());

    // two terms of the same element -> that stripe reads "none"
    std::string two = "a quiet valley, in " + vocab.terms(kAllElements[0])[0] + " style, in " +
                      vocab.terms(kAllElements[0])[1] + " style";
    datagen::StripeCode mixed = datagen::decode_stripes(backend.render(two, 3));
    CHECK(!mixed[0].has_value());
}

TEST_CASE("decode_stripes_to_profile inverts recaption through the renderer") {
    const Vocabulary& vocab = Vocabulary::bundled();
    datagen::MockT2IBackend backend(vocab);
    for (uint64_t seed = 0; seed < 20; ++seed) {
        UserProfileSet set = sample_profile_set(vocab, seed + 1000, 1);
        const PreferenceProfile& p = set.preferences[0];
        std::string prompt = datagen::recaption("a train crossing a bridge", p);
        PreferenceProfile decoded =
            datagen::decode_stripes_to_profile(backend.render(prompt, seed), vocab);
        CHECK(decoded == p);
    }
}

}  // TEST_SUITE
