#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <stdexcept>
#include <string>
#include <vector>

#include "doctest.h"
#include "helpers.hpp"
#include "preferthinker/eval.hpp"

using namespace preferthinker;
using eval::BenchmarkSpec;

namespace {

BenchmarkSpec small_spec() {
    BenchmarkSpec spec;
    spec.seen_sp = 20;
    spec.seen_mp = 10;
    spec.unseen_sp = 20;
    spec.unseen_mp = 10;
    spec.k_refs = 5;
    return spec;
}

// Independent scorer for the profile-prediction metric, written against the
// documented contract: each side paired separately by repeatedly committing
// the (gt, predicted) profile pair with the most threshold-passing elements
// (ties: lowest gt index, then lowest predicted index); every ground-truth
// element present on either side counts in the denominator.
double brute_force_prediction_score(const cot::CoTResponse* parsed, const UserProfileSet& gt,
                                    const cot::TermSimilarity& sim, double tau) {
    int gt_elements = 0;
    auto count_elements = [&](const std::vector<PreferenceProfile>& ps) {
        for (const auto& p : ps) gt_elements += static_cast<int>(p.present_count());
    };
    count_elements(gt.preferences);
    count_elements(gt.non_preferences);
    if (gt_elements == 0) return 0.0;
    if (parsed == nullptr) return 0.0;

    auto pair_hits = [&](const PreferenceProfile& pred, const PreferenceProfile& g) {
        int m = 0;
        for (size_t e = 0; e < static_cast<size_t>(kNumElements); ++e) {
            if (!g.terms[e]) continue;
            if (pred.terms[e] && sim(*pred.terms[e], *g.terms[e]) >= tau) ++m;
        }
        return m;
    };

    int hits = 0;
    auto side = [&](const std::vector<PreferenceProfile>& pred,
                    const std::vector<PreferenceProfile>& gtp) {
        std::vector<bool> gt_used(gtp.size(), false), pred_used(pred.size(), false);
        size_t rounds = std::min(gtp.size(), pred.size());
        for (size_t r = 0; r < rounds; ++r) {
            int best = -1;
            size_t bg = 0, bp = 0;
            for (size_t g = 0; g < gtp.size(); ++g) {
                if (gt_used[g]) continue;
                for (size_t p = 0; p < pred.size(); ++p) {
                    if (pred_used[p]) continue;
                    int m = pair_hits(pred[p], gtp[g]);
                    if (m > best) {
                        best = m;
                        bg = g;
                        bp = p;
                    }
                }
            }
            gt_used[bg] = true;
            pred_used[bp] = true;
            hits += best;
        }
    };
    side(parsed->predicted_preferences, gt.preferences);
    side(parsed->predicted_non_preferences, gt.non_preferences);
    return static_cast<double>(hits) / static_cast<double>(gt_elements);
}

}  // namespace

TEST_SUITE("eval") {

TEST_CASE("profile prediction score agrees with an independent matcher on fuzzed inputs") {
    const Vocabulary& vocab = Vocabulary::bundled();
    Rng rng(2718);
    int nontrivial = 0;
    for (int i = 0; i < 500; ++i) {
        UserProfileSet gt =
            sample_profile_set(vocab, 9000 + static_cast<uint64_t>(i),
                               1 + static_cast<int>(rng.uniform(3)));
        cot::CoTResponse r = testutil::random_valid_response(rng, vocab);
        // sometimes hand the scorer the ground truth itself, partially erased
        if (rng.bernoulli(0.3)) {
            r.predicted_preferences = gt.preferences;
            r.predicted_non_preferences = gt.non_preferences;
            for (auto& p : r.predicted_preferences) {
                for (int e = 0; e < kNumElements; ++e) {
                    if (rng.bernoulli(0.25)) p.terms[static_cast<size_t>(e)].reset();
                }
            }
        }
        double got =
            eval::profile_prediction_score(&r, gt, cot::exact_term_similarity, 0.95);
        double want = brute_force_prediction_score(&r, gt, cot::exact_term_similarity, 0.95);
        CHECK(got == doctest::Approx(want).epsilon(1e-12));
        if (want > 0.0 && want < 1.0) ++nontrivial;
    }
    CHECK(nontrivial > 50);  // the fuzz actually explored partial credit

    UserProfileSet gt = sample_profile_set(vocab, 1, 2);
    CHECK(eval::profile_prediction_score(nullptr, gt, cot::exact_term_similarity, 0.8) == 0.0);

    // exact prediction scores 1
    cot::CoTResponse exact;
    exact.predicted_preferences = gt.preferences;
    exact.predicted_non_preferences = gt.non_preferences;
    CHECK(eval::profile_prediction_score(&exact, gt, cot::exact_term_similarity, 0.8) == 1.0);
}

TEST_CASE("oracle, random and policy assessors hit their expected bands") {
    const auto& ds = testutil::SharedDataset::get();
    BenchmarkSpec spec = small_spec();

    eval::MetricsReport oracle = eval::evaluate(eval::OracleAssessor(1), ds.samples(), spec,
                                                cot::exact_term_similarity, 0.8, 0, 4);
    for (const char* split : eval::kSplitOrder) {
        CHECK(oracle.at(split).assessment_accuracy() == 1.0);
        CHECK(oracle.at(split).prediction_accuracy() == 1.0);
        CHECK(oracle.at(split).n == spec.size(split));
    }
    CHECK(oracle.at(eval::kOverallSplit).n == spec.total());
    CHECK(oracle.at(eval::kOverallSplit).assessment_accuracy() == 1.0);

    eval::MetricsReport random = eval::evaluate(eval::RandomAssessor(2), ds.samples(), spec,
                                                cot::exact_term_similarity, 0.8, 0, 4);
    double acc = random.at(eval::kOverallSplit).assessment_accuracy();
    CHECK(acc > 0.25);  // a fair coin on 60 samples stays well inside these walls
    CHECK(acc < 0.75);
    CHECK(random.at(eval::kOverallSplit).prediction_accuracy() == 0.0);  // placeholder profiles

    // an untrained policy assessor samples uniformly over the catalog
    task::AssessmentPolicy pol;
    eval::PolicyAssessor assessor(pol, ds.dir(), Vocabulary::bundled(), 0.9, 3);
    eval::MetricsReport fresh = eval::evaluate(assessor, ds.samples(), spec,
                                               cot::exact_term_similarity, 0.8, 0, 4);
    double fresh_acc = fresh.at(eval::kOverallSplit).assessment_accuracy();
    CHECK(fresh_acc < 0.75);
    CHECK(fresh_acc > 0.10);
}

TEST_CASE("evaluation is deterministic and independent of the jobs bound") {
    const auto& ds = testutil::SharedDataset::get();
    BenchmarkSpec spec = small_spec();
    task::AssessmentPolicy pol;
    eval::PolicyAssessor assessor(pol, ds.dir(), Vocabulary::bundled(), 0.9, 7);
    eval::MetricsReport a = eval::evaluate(assessor, ds.samples(), spec,
                                           cot::exact_term_similarity, 0.8, 99, 1);
    eval::MetricsReport b = eval::evaluate(assessor, ds.samples(), spec,
                                           cot::exact_term_similarity, 0.8, 99, 4);
    CHECK(eval::render_metrics_report(a, eval::ReportFormat::csv) ==
          eval::render_metrics_report(b, eval::ReportFormat::csv));
    CHECK(a.config_hash == 99);

    // the prediction-only projection agrees with the full report
    auto pp = eval::profile_prediction_accuracy(assessor, ds.samples(), spec,
                                                cot::exact_term_similarity, 0.8, 4);
    REQUIRE(pp.size() == a.splits.size());
    for (const auto& [split, value] : pp) {
        CHECK(value == doctest::Approx(a.at(split).prediction_accuracy()).epsilon(1e-12));
    }
}

TEST_CASE("evaluate validates the spec against the available samples") {
    const auto& ds = testutil::SharedDataset::get();
    BenchmarkSpec spec = small_spec();
    spec.seen_sp = 5000;  // more than the dataset holds
    CHECK_THROWS_AS(eval::evaluate(eval::OracleAssessor(), ds.samples(), spec,
                                   cot::exact_term_similarity, 0.8),
                    std::runtime_error);

    BenchmarkSpec bad = small_spec();
    bad.k_refs = 0;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    CHECK_THROWS_AS(small_spec().size("no-such-split"), std::invalid_argument);
    CHECK(small_spec().size("seen-SP") == 20);
    CHECK(small_spec().total() == 60);
}

TEST_CASE("robustness sweep emits one pooled row per k and validates k") {
    const auto& ds = testutil::SharedDataset::get();
    BenchmarkSpec spec = small_spec();
    std::vector<int> ks{1, 3, 5};
    auto rows = eval::robustness_sweep(eval::OracleAssessor(4), ds.samples(), spec, ks, 4);
    REQUIRE(rows.size() == 3);
    for (size_t i = 0; i < ks.size(); ++i) {
        CHECK(rows[i].k == ks[static_cast<size_t>(i)]);
        CHECK(rows[i].split == eval::kOverallSplit);
        CHECK(rows[i].n == spec.total());
        CHECK(rows[i].correct == rows[i].n);  // the oracle ignores the references
    }

    CHECK_THROWS_AS(eval::robustness_sweep(eval::OracleAssessor(), ds.samples(), spec, {0}, 1),
                    std::invalid_argument);
    CHECK_THROWS_AS(eval::robustness_sweep(eval::OracleAssessor(), ds.samples(), spec, {6}, 1),
                    std::invalid_argument);
}

TEST_CASE("reports render deterministically in all three formats") {
    eval::MetricsReport report;
    report.config_hash = 7;
    for (const char* split : eval::kSplitOrder) {
        eval::SplitMetrics m;
        m.split = split;
        m.ass_correct = 9;
        m.n = 10;
        m.pred_sum = 8.5;
        report.splits.push_back(m);
    }
    eval::SplitMetrics overall;
    overall.split = eval::kOverallSplit;
    overall.ass_correct = 36;
    overall.n = 40;
    overall.pred_sum = 34.0;
    report.splits.push_back(overall);

    std::string table = eval::render_metrics_report(report, eval::ReportFormat::text_table);
    CHECK(table.find("seen-SP") != std::string::npos);
    CHECK(table.find("overall") != std::string::npos);
    CHECK(table.find("0.900000") != std::string::npos);

    std::string csv = eval::render_metrics_report(report, eval::ReportFormat::csv);
    CHECK(csv.rfind("split,metric,value,n", 0) == 0);
    CHECK(csv.find("overall,ass_accuracy,0.900000,40") != std::string::npos);

    std::string plot = eval::render_metrics_report(report, eval::ReportFormat::plot_data);
    CHECK(plot.rfind("split,ass_accuracy,pred_accuracy,n", 0) == 0);

    // empty split rows refuse to render rather than divide by zero
    report.splits[0].n = 0;
    CHECK_THROWS(eval::render_metrics_report(report, eval::ReportFormat::csv));

    std::vector<eval::RobustnessRow> rrows{{1, "overall", 50, 60}, {2, "overall", 55, 60}};
    std::string rcsv = eval::render_robustness_rows(rrows, eval::ReportFormat::csv);
    CHECK(rcsv.rfind("k,split,accuracy,n", 0) == 0);
    CHECK(rcsv.find("\n1,overall,0.833333,60") != std::string::npos);

    std::vector<eval::AblationRow> arows;
    eval::AblationRow ar;
    ar.name = "sft+rl";
    ar.sft = true;
    ar.rl = true;
    ar.prediction_reward = false;
    ar.ass_accuracy = 0.95;
    ar.pred_accuracy = 0.9;
    ar.n = 30;
    arows.push_back(ar);
    std::string acsv = eval::render_ablation_rows(arows, eval::ReportFormat::csv);
    CHECK(acsv.rfind("variant,sft,rl,prediction_reward,ass_accuracy,pred_accuracy,n", 0) == 0);
    std::string atable = eval::render_ablation_rows(arows, eval::ReportFormat::text_table);
    CHECK(atable.find("sft+rl") != std::string::npos);
}

TEST_CASE("BenchmarkSpec::size covers each split and the default ablation variants are sound") {
    BenchmarkSpec spec;
    CHECK(spec.size("seen-SP") == 50);
    CHECK(spec.size("seen-MP") == 25);
    CHECK(spec.size("unseen-SP") == 50);
    CHECK(spec.size("unseen-MP") == 25);
    CHECK(spec.total() == 150);
    CHECK_NOTHROW(spec.validate());

    auto variants = eval::default_ablation_variants();
    REQUIRE(variants.size() >= 4);
    bool has_base = false, has_full = false;
    for (const auto& v : variants) {
        if (!v.sft && !v.rl) has_base = true;
        if (v.sft && v.rl && v.prediction_reward) has_full = true;
        if (v.prediction_reward) CHECK(v.rl);  // PR only matters under RL
    }
    CHECK(has_base);
    CHECK(has_full);
}

TEST_CASE("write_text_file writes exact bytes") {
    testutil::ScratchDir scratch("report");
    std::string path = scratch.file("out.csv");
    eval::write_text_file(path, "a,b\n1,2\n");
    std::ifstream in(path, std::ios::binary);
    std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    CHECK(content == "a,b\n1,2\n");
    CHECK_THROWS(eval::write_text_file(scratch.file("no-such-dir") + "/x/y.csv", "z"));
}

}  // TEST_SUITE
