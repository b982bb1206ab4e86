#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "doctest.h"
#include "helpers.hpp"
#include "preferthinker/policy.hpp"

using namespace preferthinker;
using policy::CatalogPolicy;
using policy::TinyLMPolicy;
using policy::TokenSeq;

namespace {

CatalogPolicy make_catalog(int n_ctx = 3, int n_entries = 4) {
    std::vector<std::string> contexts;
    for (int i = 0; i < n_ctx; ++i) contexts.push_back("ctx" + std::to_string(i));
    return CatalogPolicy(contexts, n_entries, [](const std::string& c, int e) {
        return c + ":entry" + std::to_string(e);
    });
}

void randomize(policy::Policy& p, uint64_t seed, double scale = 1.5) {
    Rng rng(seed);
    for (double& w : p.parameters()) w = (rng.uniform_real() * 2.0 - 1.0) * scale;
}

}  // namespace

TEST_SUITE("policy") {

TEST_CASE("catalog probabilities are an exact softmax of the logits") {
    CatalogPolicy pol = make_catalog();
    randomize(pol, 21);
    for (const std::string& ctx : pol.contexts()) {
        std::vector<double> probs = pol.entry_probs(ctx);
        REQUIRE(probs.size() == 4);
        double sum = std::accumulate(probs.begin(), probs.end(), 0.0);
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));

        // recompute the softmax directly from the parameter row
        int row = pol.context_index(ctx);
        std::span<const double> w = std::as_const(pol).parameters();
        double denom = 0.0;
        for (int e = 0; e < 4; ++e) denom += std::exp(w[static_cast<size_t>(row * 4 + e)]);
        for (int e = 0; e < 4; ++e) {
            CHECK(probs[static_cast<size_t>(e)] ==
                  doctest::Approx(std::exp(w[static_cast<size_t>(row * 4 + e)]) / denom)
                      .epsilon(1e-12));
        }

        // next_logprobs agrees and exponentiates to the same distribution
        std::vector<double> lp = pol.next_logprobs(ctx, {});
        for (int e = 0; e < 4; ++e) {
            CHECK(std::exp(lp[static_cast<size_t>(e)]) ==
                  doctest::Approx(probs[static_cast<size_t>(e)]).epsilon(1e-12));
        }
    }
    CHECK_THROWS(pol.entry_probs("no-such-context"));
}

TEST_CASE("generation is deterministic, greedy at temperature zero and reports true logprobs") {
    CatalogPolicy pol = make_catalog();
    randomize(pol, 22);

    Rng r1(5), r2(5);
    policy::Generation g1 = pol.generate("ctx1", 0.9, 4, r1);
    policy::Generation g2 = pol.generate("ctx1", 0.9, 4, r2);
    CHECK(g1 == g2);
    REQUIRE(g1.tokens.size() == 1);  // one catalog choice per generation
    CHECK_FALSE(g1.truncated);

    // generate's reported logprobs equal sequence_logprobs on its output,
    // regardless of sampling temperature
    std::vector<double> lp = pol.sequence_logprobs("ctx1", g1.tokens);
    REQUIRE(lp.size() == g1.logprobs.size());
    for (size_t i = 0; i < lp.size(); ++i) {
        CHECK(lp[i] == doctest::Approx(g1.logprobs[i]).epsilon(1e-12));
    }

    // temperature 0 picks the argmax entry
    std::vector<double> probs = pol.entry_probs("ctx1");
    int argmax = static_cast<int>(std::max_element(probs.begin(), probs.end()) - probs.begin());
    Rng r3(7);
    policy::Generation greedy = pol.generate("ctx1", 0.0, 4, r3);
    REQUIRE(greedy.tokens.size() == 1);
    CHECK(greedy.tokens[0] == argmax);

    // high temperature flattens sampling but never changes the accounting
    Rng r4(8);
    policy::Generation hot = pol.generate("ctx1", 5.0, 4, r4);
    std::vector<double> hot_lp = pol.sequence_logprobs("ctx1", hot.tokens);
    CHECK(hot.logprobs[0] == doctest::Approx(hot_lp[0]).epsilon(1e-12));
}

TEST_CASE("sampling frequencies track the softmax distribution") {
    CatalogPolicy pol = make_catalog(1, 3);
    randomize(pol, 23, 1.0);
    std::vector<double> probs = pol.entry_probs("ctx0");
    std::vector<int> counts(3, 0);
    Rng rng(9);
    const int n = 20000;
    for (int i = 0; i < n; ++i) {
        counts[static_cast<size_t>(pol.generate("ctx0", 1.0, 2, rng).tokens[0])] += 1;
    }
    for (int e = 0; e < 3; ++e) {
        double freq = static_cast<double>(counts[static_cast<size_t>(e)]) / n;
        CHECK(freq == doctest::Approx(probs[static_cast<size_t>(e)]).epsilon(0.08));
    }
}

TEST_CASE("decode and tokenize invert each other on catalog entries") {
    CatalogPolicy pol = make_catalog();
    for (int e = 0; e < 4; ++e) {
        std::string text = pol.decode("ctx2", {e});
        CHECK(text == "ctx2:entry" + std::to_string(e));
        auto back = pol.tokenize("ctx2", text);
        REQUIRE(back.has_value());
        CHECK(*back == TokenSeq{e});
    }
    CHECK_FALSE(pol.tokenize("ctx2", "not a catalog entry").has_value());
}

TEST_CASE("clone copies parameters and then diverges independently") {
    CatalogPolicy pol = make_catalog();
    randomize(pol, 24);
    auto copy = pol.clone();
    CHECK(copy->kind() == "catalog");
    REQUIRE(copy->n_params() == pol.n_params());
    std::span<const double> a = std::as_const(pol).parameters();
    std::span<const double> b = std::as_const(*copy).parameters();
    for (size_t i = 0; i < a.size(); ++i) CHECK(a[i] == b[i]);

    copy->parameters()[0] += 1.0;
    CHECK(std::as_const(pol).parameters()[0] != std::as_const(*copy).parameters()[0]);
}

TEST_CASE("checkpoints round trip and reject mismatched policies") {
    testutil::ScratchDir scratch("ckpt");
    CatalogPolicy pol = make_catalog();
    randomize(pol, 25);
    std::string path = scratch.file("p.ckpt.json");
    policy::save_checkpoint(path, pol, 0xabcdef1234ull, {{"phase", "unit-test"}});

    CatalogPolicy fresh = make_catalog();
    policy::CheckpointInfo info = policy::load_checkpoint(path, fresh);
    CHECK(info.kind == "catalog");
    CHECK(info.config_hash == 0xabcdef1234ull);
    REQUIRE(info.meta.size() >= 1);
    bool found = false;
    for (const auto& [k, v] : info.meta) found = found || (k == "phase" && v == "unit-test");
    CHECK(found);
    std::span<const double> a = std::as_const(pol).parameters();
    std::span<const double> b = std::as_const(fresh).parameters();
    REQUIRE(a.size() == b.size());
    for (size_t i = 0; i < a.size(); ++i) CHECK(a[i] == b[i]);  // bit-exact

    TinyLMPolicy lm;
    CHECK_THROWS(policy::load_checkpoint(path, lm));  // kind mismatch

    CatalogPolicy wider = make_catalog(3, 5);
    CHECK_THROWS(policy::load_checkpoint(path, wider));  // parameter count mismatch

    CHECK_THROWS(policy::load_checkpoint(scratch.file("missing.json"), fresh));
}

TEST_CASE("tiny LM generates token sequences with consistent accounting") {
    TinyLMPolicy lm;
    randomize(lm, 26, 0.5);
    CHECK(lm.vocab_size() > 10);
    CHECK(lm.vocab_size() == static_cast<int>(lm.symbols().size()));

    Rng rng(11);
    policy::Generation g = lm.generate("ignored-context", 1.0, 40, rng);
    REQUIRE(!g.tokens.empty());
    CHECK(g.tokens.size() <= 40);
    if (!g.truncated) CHECK(g.tokens.back() == lm.eos_token());
    std::vector<double> lp = lm.sequence_logprobs("ignored-context", g.tokens);
    REQUIRE(lp.size() == g.tokens.size());
    for (size_t i = 0; i < lp.size(); ++i) {
        CHECK(lp[i] == doctest::Approx(g.logprobs[i]).epsilon(1e-12));
        CHECK(lp[i] <= 0.0);
    }

    // next_logprobs normalizes at every step
    TokenSeq prefix;
    for (int t : g.tokens) {
        std::vector<double> nl = lm.next_logprobs("ignored-context", prefix);
        double mass = 0.0;
        for (double v : nl) mass += std::exp(v);
        CHECK(mass == doctest::Approx(1.0).epsilon(1e-9));
        prefix.push_back(t);
    }

    // decode(tokenize(text)) == text for representable text
    std::string text = lm.decode("c", g.tokens);
    auto toks = lm.tokenize("c", text);
    REQUIRE(toks.has_value());
    CHECK(lm.decode("c", *toks) == text);
}

TEST_CASE("generate validates its arguments") {
    CatalogPolicy pol = make_catalog();
    Rng rng(1);
    CHECK_THROWS(pol.generate("ctx0", -0.5, 4, rng));
    CHECK_THROWS(pol.generate("ctx0", 1.0, 0, rng));
    CHECK_THROWS(pol.generate("unknown", 1.0, 4, rng));
}

}  // TEST_SUITE
