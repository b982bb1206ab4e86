#include "preferthinker/eval.hpp"

#include <algorithm>
#include <array>
#include <cstdio>
#include <fstream>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>

#include "preferthinker/hash.hpp"
#include "preferthinker/parallel.hpp"
#include "preferthinker/rng.hpp"

namespace preferthinker::eval {

namespace {

std::string fmt6(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return buf;
}

int split_order_index(const std::string& split) {
    for (size_t i = 0; i < kSplitOrder.size(); ++i) {
        if (split == kSplitOrder[i]) return static_cast<int>(i);
    }
    return -1;
}

// the first spec-many samples of each split, dataset order, grouped by split
struct BenchmarkSelection {
    // per split (canonical order): indices into the sample vector
    std::array<std::vector<size_t>, 4> by_split;
    // flattened (sample index, split order index) work list
    std::vector<std::pair<size_t, int>> work;
};

BenchmarkSelection select_benchmark(const std::vector<datagen::UserSample>& samples,
                                    const BenchmarkSpec& spec) {
    spec.validate();
    std::array<std::vector<size_t>, 4> available;
    for (size_t i = 0; i < samples.size(); ++i) {
        int si = split_order_index(samples[i].split);
        if (si >= 0) available[static_cast<size_t>(si)].push_back(i);
    }
    BenchmarkSelection sel;
    for (size_t si = 0; si < kSplitOrder.size(); ++si) {
        size_t need = static_cast<size_t>(spec.size(kSplitOrder[si]));
        if (available[si].size() < need) {
            throw std::runtime_error("eval: split '" + std::string(kSplitOrder[si]) + "' has " +
                                     std::to_string(available[si].size()) +
                                     " samples; the benchmark requires " + std::to_string(need));
        }
        sel.by_split[si].assign(available[si].begin(),
                                available[si].begin() + static_cast<std::ptrdiff_t>(need));
        for (size_t idx : sel.by_split[si]) sel.work.emplace_back(idx, static_cast<int>(si));
    }
    return sel;
}

// per-profile pair score under the thresholded element rule: over elements the
// ground-truth profile carries, count 1 when the predicted term reaches tau
int matched_elements_thresholded(const PreferenceProfile& pred, const PreferenceProfile& gt,
                                 const cot::TermSimilarity& sim, double tau) {
    int matched = 0;
    for (int e = 0; e < kNumElements; ++e) {
        if (!gt.terms[static_cast<size_t>(e)].has_value()) continue;
        const auto& pt = pred.terms[static_cast<size_t>(e)];
        if (!pt.has_value()) continue;
        if (sim(*pt, *gt.terms[static_cast<size_t>(e)]) >= tau) ++matched;
    }
    return matched;
}

int present_elements(const PreferenceProfile& p) {
    int n = 0;
    for (const auto& t : p.terms) {
        if (t.has_value()) ++n;
    }
    return n;
}

// Greedy one-side pairing: repeatedly commit the (gt, predicted) pair with the
// highest matched-element count (ties: lowest gt index, then lowest predicted
// index), never reusing either profile. Returns total matched elements.
int greedy_side_matches(const std::vector<PreferenceProfile>& predicted,
                        const std::vector<PreferenceProfile>& gt, const cot::TermSimilarity& sim,
                        double tau) {
    std::vector<bool> pred_used(predicted.size(), false);
    std::vector<bool> gt_used(gt.size(), false);
    int total = 0;
    size_t rounds = std::min(predicted.size(), gt.size());
    for (size_t r = 0; r < rounds; ++r) {
        int best = -1;
        size_t best_g = 0, best_p = 0;
        for (size_t g = 0; g < gt.size(); ++g) {
            if (gt_used[g]) continue;
            for (size_t p = 0; p < predicted.size(); ++p) {
                if (pred_used[p]) continue;
                int m = matched_elements_thresholded(predicted[p], gt[g], sim, tau);
                if (m > best) {
                    best = m;
                    best_g = g;
                    best_p = p;
                }
            }
        }
        if (best < 0) break;
        gt_used[best_g] = true;
        pred_used[best_p] = true;
        total += best;
    }
    return total;
}

datagen::UserSample truncate_references(const datagen::UserSample& s, int k) {
    datagen::UserSample t = s;
    size_t keep = static_cast<size_t>(k);
    if (keep < t.preferred_refs.size()) t.preferred_refs.resize(keep);
    if (keep < t.non_preferred_refs.size()) t.non_preferred_refs.resize(keep);
    return t;
}

struct SampleOutcome {
    bool ass_correct = false;
    double pred_score = 0.0;
};

SampleOutcome grade_sample(const Assessor& assessor, const datagen::UserSample& sample,
                           int k_refs_visible, const cot::TermSimilarity& sim, double tau) {
    std::string text = assessor.assess(sample, k_refs_visible);
    auto out = cot::parse_response(text, cot::ParseMode::lenient);
    SampleOutcome oc;
    oc.ass_correct = out.ok && out.response.answer == sample.gt_answer;
    oc.pred_score =
        profile_prediction_score(out.ok ? &out.response : nullptr, sample.profile_set, sim, tau);
    return oc;
}

void require_rows(bool have, const char* what) {
    if (!have) throw std::runtime_error(std::string("report: no ") + what + " rows to emit");
}

}  // namespace

// ---------------------------------------------------------------------------
// BenchmarkSpec

int BenchmarkSpec::size(const std::string& split) const {
    if (split == "seen-SP") return seen_sp;
    if (split == "seen-MP") return seen_mp;
    if (split == "unseen-SP") return unseen_sp;
    if (split == "unseen-MP") return unseen_mp;
    throw std::invalid_argument("benchmark: unknown split '" + split + "'");
}

void BenchmarkSpec::validate() const {
    if (seen_sp < 1 || seen_mp < 1 || unseen_sp < 1 || unseen_mp < 1)
        throw std::invalid_argument("benchmark: every split size must be >= 1");
    if (k_refs < 1) throw std::invalid_argument("benchmark: k_refs must be >= 1");
}

// ---------------------------------------------------------------------------
// Assessors

PolicyAssessor::PolicyAssessor(const policy::Policy& pol, std::string dataset_dir, Vocabulary vocab,
                               double temperature, uint64_t seed)
    : policy_(pol),
      dataset_dir_(std::move(dataset_dir)),
      vocab_(std::move(vocab)),
      temperature_(temperature),
      seed_(seed) {
    if (temperature_ < 0.0)
        throw std::invalid_argument("assessor: temperature must be >= 0");
}

std::string PolicyAssessor::assess(const datagen::UserSample& sample, int k_refs_visible) const {
    if (k_refs_visible < 1)
        throw std::invalid_argument("assessor: must see at least one reference pair");
    datagen::UserSample visible = truncate_references(sample, k_refs_visible);
    task::AssessmentObservation obs = task::observe_sample(visible, dataset_dir_, vocab_);
    std::string context = obs.context_string();
    Rng rng(mix_seed(seed_, std::string_view(sample.user_id)));
    policy::Generation gen = policy_.generate(context, temperature_, 8, rng);
    return policy_.decode(context, gen.tokens);
}

std::string OracleAssessor::assess(const datagen::UserSample& sample, int) const {
    return cot::oracle_annotate(sample, mix_seed(seed_, std::string_view(sample.user_id)));
}

std::string RandomAssessor::assess(const datagen::UserSample& sample, int) const {
    Rng rng(mix_seed(seed_, std::string_view(sample.user_id)));
    bool first = rng.bernoulli(0.5);
    cot::CoTResponse r;
    PreferenceProfile placeholder;
    placeholder.terms[0] = "unspecified";
    r.predicted_preferences = {placeholder};
    r.predicted_non_preferences = {placeholder};
    for (int e = 0; e < kNumElements; ++e) {
        r.scores[static_cast<size_t>(e)] = first ? std::array<int, 2>{6, 4}
                                                 : std::array<int, 2>{4, 6};
    }
    r.totals = first ? std::array<int, 2>{30, 20} : std::array<int, 2>{20, 30};
    r.answer = first ? "Image 1" : "Image 2";
    return cot::render_response(r);
}

// ---------------------------------------------------------------------------
// Metrics

double SplitMetrics::assessment_accuracy() const {
    return n > 0 ? static_cast<double>(ass_correct) / static_cast<double>(n) : 0.0;
}

double SplitMetrics::prediction_accuracy() const {
    return n > 0 ? pred_sum / static_cast<double>(n) : 0.0;
}

const SplitMetrics& MetricsReport::at(const std::string& split) const {
    for (const auto& row : splits) {
        if (row.split == split) return row;
    }
    throw std::out_of_range("report: no row for split '" + split + "'");
}

double profile_prediction_score(const cot::CoTResponse* parsed, const UserProfileSet& gt,
                                const cot::TermSimilarity& sim, double tau) {
    if (tau < 0.0 || tau > 1.0)
        throw std::invalid_argument("prediction score: tau must lie in [0,1]");
    int denom = 0;
    for (const auto& p : gt.preferences) denom += present_elements(p);
    for (const auto& p : gt.non_preferences) denom += present_elements(p);
    if (denom == 0) return 0.0;
    if (parsed == nullptr) return 0.0;
    int matched = greedy_side_matches(parsed->predicted_preferences, gt.preferences, sim, tau) +
                  greedy_side_matches(parsed->predicted_non_preferences, gt.non_preferences, sim,
                                      tau);
    return static_cast<double>(matched) / static_cast<double>(denom);
}

MetricsReport evaluate(const Assessor& assessor, const std::vector<datagen::UserSample>& samples,
                       const BenchmarkSpec& spec, const cot::TermSimilarity& sim, double tau,
                       uint64_t config_hash, int jobs) {
    BenchmarkSelection sel = select_benchmark(samples, spec);
    std::vector<SampleOutcome> outcomes(sel.work.size());
    run_indexed(static_cast<int>(sel.work.size()), jobs, [&](int i) {
        const auto& [sample_idx, split_idx] = sel.work[static_cast<size_t>(i)];
        outcomes[static_cast<size_t>(i)] =
            grade_sample(assessor, samples[sample_idx], spec.k_refs, sim, tau);
    });

    MetricsReport rep;
    rep.config_hash = config_hash;
    std::array<SplitMetrics, 4> rows;
    for (size_t si = 0; si < kSplitOrder.size(); ++si) rows[si].split = kSplitOrder[si];
    SplitMetrics overall;
    overall.split = kOverallSplit;
    for (size_t i = 0; i < sel.work.size(); ++i) {
        auto& row = rows[static_cast<size_t>(sel.work[i].second)];
        row.n += 1;
        overall.n += 1;
        if (outcomes[i].ass_correct) {
            row.ass_correct += 1;
            overall.ass_correct += 1;
        }
        row.pred_sum += outcomes[i].pred_score;
        overall.pred_sum += outcomes[i].pred_score;
    }
    rep.splits.assign(rows.begin(), rows.end());
    rep.splits.push_back(overall);
    return rep;
}

std::vector<std::pair<std::string, double>> profile_prediction_accuracy(
    const Assessor& assessor, const std::vector<datagen::UserSample>& samples,
    const BenchmarkSpec& spec, const cot::TermSimilarity& sim, double tau, int jobs) {
    MetricsReport rep = evaluate(assessor, samples, spec, sim, tau, 0, jobs);
    std::vector<std::pair<std::string, double>> out;
    out.reserve(rep.splits.size());
    for (const auto& row : rep.splits) out.emplace_back(row.split, row.prediction_accuracy());
    return out;
}

std::vector<RobustnessRow> robustness_sweep(const Assessor& assessor,
                                            const std::vector<datagen::UserSample>& samples,
                                            const BenchmarkSpec& spec,
                                            const std::vector<int>& k_values, int jobs) {
    BenchmarkSelection sel = select_benchmark(samples, spec);
    if (k_values.empty()) throw std::invalid_argument("sweep: k_values must be non-empty");
    for (int k : k_values) {
        if (k <= 0 || k > spec.k_refs) {
            throw std::invalid_argument("sweep: k=" + std::to_string(k) +
                                        " outside the stored reference range [1, " +
                                        std::to_string(spec.k_refs) + "]");
        }
    }
    size_t per_k = sel.work.size();
    std::vector<unsigned char> correct(per_k * k_values.size(), 0);
    run_indexed(static_cast<int>(per_k * k_values.size()), jobs, [&](int i) {
        size_t ki = static_cast<size_t>(i) / per_k;
        size_t wi = static_cast<size_t>(i) % per_k;
        const datagen::UserSample& s = samples[sel.work[wi].first];
        std::string text = assessor.assess(s, k_values[ki]);
        auto out = cot::parse_response(text, cot::ParseMode::lenient);
        correct[static_cast<size_t>(i)] =
            (out.ok && out.response.answer == s.gt_answer) ? 1 : 0;
    });
    std::vector<RobustnessRow> rows;
    rows.reserve(k_values.size());
    for (size_t ki = 0; ki < k_values.size(); ++ki) {
        RobustnessRow row;
        row.k = k_values[ki];
        row.split = kOverallSplit;
        row.n = static_cast<int>(per_k);
        for (size_t wi = 0; wi < per_k; ++wi) row.correct += correct[ki * per_k + wi];
        rows.push_back(std::move(row));
    }
    return rows;
}

// ---------------------------------------------------------------------------
// Ablation harness

std::vector<AblationVariant> default_ablation_variants() {
    return {
        {"base", false, false, false},
        {"sft", true, false, false},
        {"rl", false, true, false},
        {"rl+pr", false, true, true},
        {"sft+rl", true, true, false},
        {"sft+rl+pr", true, true, true},
    };
}

std::vector<AblationRow> ablation_run(const std::vector<datagen::UserSample>& samples,
                                      const std::string& dataset_dir, const Vocabulary& vocab,
                                      const std::vector<AblationVariant>& variants,
                                      const AblationConfig& cfg) {
    if (variants.empty()) throw std::invalid_argument("ablation: no variants given");
    std::vector<datagen::UserSample> train, heldout;
    for (const auto& s : samples) {
        if (s.split.rfind("unseen", 0) == 0) {
            heldout.push_back(s);
        } else {
            train.push_back(s);
        }
    }
    if (train.empty()) throw std::runtime_error("ablation: no seen-* training samples");
    if (heldout.empty()) throw std::runtime_error("ablation: no unseen-* held-out samples");

    std::vector<std::string> train_ctxs =
        task::observation_contexts(train, dataset_dir, vocab, cfg.jobs);

    // shared supervision: annotate + filter once, reused by every SFT variant
    std::vector<trainer::SFTExample> sft_set;
    {
        auto annotated = cot::annotate_dataset(
            train,
            [](const datagen::UserSample& s, uint64_t seed) {
                return cot::oracle_annotate(s, seed);
            },
            mix_seed(cfg.seed, std::string_view("annotate")), cfg.jobs);
        for (size_t i = 0; i < train.size(); ++i) {
            auto verdict = cot::filter_response(annotated[i].response_text, train[i],
                                                cot::exact_term_similarity, cfg.reward.tau);
            if (verdict.accepted) sft_set.push_back({train_ctxs[i], annotated[i].response_text});
        }
        if (sft_set.empty()) throw std::runtime_error("ablation: the filter rejected every row");
    }

    datagen::MockT2IBackend t2i(vocab);
    reward::MockTextSimilarity text_sim(vocab);
    reward::MockImageSimilarity img_sim;
    reward::RewardBackends backends{&t2i, &text_sim, &img_sim};

    std::vector<AblationRow> rows;
    rows.reserve(variants.size());
    for (const auto& variant : variants) {
        task::AssessmentPolicy pol;
        if (variant.sft) {
            Rng rng(mix_seed(cfg.seed, std::string_view("sft")));
            trainer::train_sft(pol, sft_set, cfg.sft_epochs, cfg.sft_lr, rng);
        }
        if (variant.rl) {
            reward::RewardConfig rcfg = cfg.reward;
            rcfg.w_p = variant.prediction_reward ? cfg.reward.w_p : 0.0;
            rcfg.validate();
            trainer::RewardFn rf = [&](size_t ci, const policy::Generation&,
                                       const std::string& text) {
                return reward::total_reward(text, train[ci], rcfg, backends).total;
            };
            auto ref = pol.clone();
            Rng rng(mix_seed(cfg.seed, std::string_view("grpo")));
            trainer::train_grpo(pol, *ref, train_ctxs, rf, cfg.grpo, cfg.grpo_steps, rng);
        }

        PolicyAssessor assessor(pol, dataset_dir, vocab, cfg.eval_temperature,
                                mix_seed(cfg.seed, std::string_view("eval")));
        std::vector<SampleOutcome> outcomes(heldout.size());
        run_indexed(static_cast<int>(heldout.size()), cfg.jobs, [&](int i) {
            const auto& s = heldout[static_cast<size_t>(i)];
            int k_all = static_cast<int>(s.preferred_refs.size());
            outcomes[static_cast<size_t>(i)] =
                grade_sample(assessor, s, std::max(1, k_all), cot::exact_term_similarity,
                             cfg.reward.tau);
        });

        AblationRow row;
        row.name = variant.name;
        row.sft = variant.sft;
        row.rl = variant.rl;
        row.prediction_reward = variant.prediction_reward;
        row.n = static_cast<int>(heldout.size());
        double pred_sum = 0.0;
        int correct = 0;
        for (const auto& oc : outcomes) {
            if (oc.ass_correct) ++correct;
            pred_sum += oc.pred_score;
        }
        row.ass_accuracy = static_cast<double>(correct) / static_cast<double>(heldout.size());
        row.pred_accuracy = pred_sum / static_cast<double>(heldout.size());
        rows.push_back(std::move(row));
    }
    return rows;
}

// ---------------------------------------------------------------------------
// Report emission

std::string render_metrics_report(const MetricsReport& report, ReportFormat format) {
    require_rows(!report.splits.empty(), "metrics");
    for (const auto& row : report.splits) {
        if (row.n <= 0)
            throw std::runtime_error("report: split '" + row.split + "' is empty");
    }
    std::string out;
    char line[256];
    switch (format) {
        case ReportFormat::text_table: {
            size_t w = 5;
            for (const auto& row : report.splits) w = std::max(w, row.split.size());
            std::snprintf(line, sizeof line, "%-*s  %13s  %13s  %6s\n", static_cast<int>(w),
                          "split", "ass_accuracy", "pred_accuracy", "n");
            out += line;
            for (const auto& row : report.splits) {
                std::snprintf(line, sizeof line, "%-*s  %13s  %13s  %6d\n", static_cast<int>(w),
                              row.split.c_str(), fmt6(row.assessment_accuracy()).c_str(),
                              fmt6(row.prediction_accuracy()).c_str(), row.n);
                out += line;
            }
            break;
        }
        case ReportFormat::csv:
            out += "split,metric,value,n\n";
            for (const auto& row : report.splits) {
                out += row.split + ",ass_accuracy," + fmt6(row.assessment_accuracy()) + "," +
                       std::to_string(row.n) + "\n";
                out += row.split + ",pred_accuracy," + fmt6(row.prediction_accuracy()) + "," +
                       std::to_string(row.n) + "\n";
            }
            break;
        case ReportFormat::plot_data:
            out += "split,ass_accuracy,pred_accuracy,n\n";
            for (const auto& row : report.splits) {
                out += row.split + "," + fmt6(row.assessment_accuracy()) + "," +
                       fmt6(row.prediction_accuracy()) + "," + std::to_string(row.n) + "\n";
            }
            break;
    }
    return out;
}

std::string render_robustness_rows(const std::vector<RobustnessRow>& rows, ReportFormat format) {
    require_rows(!rows.empty(), "sweep");
    for (const auto& row : rows) {
        if (row.n <= 0) throw std::runtime_error("report: sweep row k=" + std::to_string(row.k) +
                                                 " is empty");
    }
    std::string out;
    char line[256];
    auto acc = [](const RobustnessRow& r) {
        return static_cast<double>(r.correct) / static_cast<double>(r.n);
    };
    switch (format) {
        case ReportFormat::text_table: {
            size_t w = 5;
            for (const auto& row : rows) w = std::max(w, row.split.size());
            std::snprintf(line, sizeof line, "%3s  %-*s  %9s  %6s\n", "k", static_cast<int>(w),
                          "split", "accuracy", "n");
            out += line;
            for (const auto& row : rows) {
                std::snprintf(line, sizeof line, "%3d  %-*s  %9s  %6d\n", row.k,
                              static_cast<int>(w), row.split.c_str(), fmt6(acc(row)).c_str(),
                              row.n);
                out += line;
            }
            break;
        }
        case ReportFormat::csv:
            out += "k,split,accuracy,n\n";
            for (const auto& row : rows) {
                out += std::to_string(row.k) + "," + row.split + "," + fmt6(acc(row)) + "," +
                       std::to_string(row.n) + "\n";
            }
            break;
        case ReportFormat::plot_data:
            out += "k,accuracy,n\n";
            for (const auto& row : rows) {
                out += std::to_string(row.k) + "," + fmt6(acc(row)) + "," +
                       std::to_string(row.n) + "\n";
            }
            break;
    }
    return out;
}

std::string render_ablation_rows(const std::vector<AblationRow>& rows, ReportFormat format) {
    require_rows(!rows.empty(), "ablation");
    for (const auto& row : rows) {
        if (row.n <= 0)
            throw std::runtime_error("report: ablation row '" + row.name + "' is empty");
    }
    std::string out;
    char line[256];
    auto flag = [](bool b) { return b ? "on" : "-"; };
    switch (format) {
        case ReportFormat::text_table: {
            size_t w = 7;
            for (const auto& row : rows) w = std::max(w, row.name.size());
            std::snprintf(line, sizeof line, "%-*s  %4s  %4s  %11s  %13s  %13s  %6s\n",
                          static_cast<int>(w), "variant", "sft", "rl", "pred_reward",
                          "ass_accuracy", "pred_accuracy", "n");
            out += line;
            for (const auto& row : rows) {
                std::snprintf(line, sizeof line, "%-*s  %4s  %4s  %11s  %13s  %13s  %6d\n",
                              static_cast<int>(w), row.name.c_str(), flag(row.sft), flag(row.rl),
                              flag(row.prediction_reward), fmt6(row.ass_accuracy).c_str(),
                              fmt6(row.pred_accuracy).c_str(), row.n);
                out += line;
            }
            break;
        }
        case ReportFormat::csv:
        case ReportFormat::plot_data:
            out += "variant,sft,rl,prediction_reward,ass_accuracy,pred_accuracy,n\n";
            for (const auto& row : rows) {
                out += row.name + "," + (row.sft ? "1" : "0") + "," + (row.rl ? "1" : "0") + "," +
                       (row.prediction_reward ? "1" : "0") + "," + fmt6(row.ass_accuracy) + "," +
                       fmt6(row.pred_accuracy) + "," + std::to_string(row.n) + "\n";
            }
            break;
    }
    return out;
}

void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("report: cannot write " + path);
    out << content;
    if (!out) throw std::runtime_error("report: failed while writing " + path);
}

}  // namespace preferthinker::eval
