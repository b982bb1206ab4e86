#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "preferthinker/cot.hpp"
#include "preferthinker/datagen.hpp"
#include "preferthinker/reward.hpp"
#include "preferthinker/task.hpp"
#include "preferthinker/trainer.hpp"

namespace preferthinker::eval {

// canonical split order used everywhere reports are emitted
inline constexpr std::array<const char*, 4> kSplitOrder = {"seen-SP", "seen-MP", "unseen-SP",
                                                           "unseen-MP"};
inline constexpr const char* kOverallSplit = "overall";

struct BenchmarkSpec {
    int seen_sp = 50;
    int seen_mp = 25;
    int unseen_sp = 50;
    int unseen_mp = 25;
    int k_refs = 5;
    uint64_t seed = 0;

    int size(const std::string& split) const;  // throws on unknown split
    int total() const { return seen_sp + seen_mp + unseen_sp + unseen_mp; }
    void validate() const;  // all sizes >= 1, k_refs >= 1
};

// One assessor judgment of one sample while seeing only the first
// k_refs_visible reference pairs. Returns the full response text.
class Assessor {
public:
    virtual ~Assessor() = default;
    virtual std::string assess(const datagen::UserSample& sample, int k_refs_visible) const = 0;
    virtual std::string name() const = 0;
};

// Wraps a policy: observation from the visible references, one seeded draw at
// the configured temperature (0 = greedy argmax). The sampling default keeps
// an untrained uniform policy honestly uniform instead of letting greedy
// tie-breaking pick a fixed catalog entry.
class PolicyAssessor : public Assessor {
public:
    PolicyAssessor(const policy::Policy& pol, std::string dataset_dir, Vocabulary vocab,
                   double temperature = 0.9, uint64_t seed = 0);
    std::string assess(const datagen::UserSample& sample, int k_refs_visible) const override;
    std::string name() const override { return "policy"; }

private:
    const policy::Policy& policy_;
    std::string dataset_dir_;
    Vocabulary vocab_;
    double temperature_;
    uint64_t seed_;
};

// Upper bound: reads the stored ground truth, ignores the references.
class OracleAssessor : public Assessor {
public:
    explicit OracleAssessor(uint64_t seed = 0) : seed_(seed) {}
    std::string assess(const datagen::UserSample& sample, int k_refs_visible) const override;
    std::string name() const override { return "oracle"; }

private:
    uint64_t seed_;
};

// Lower bound: well-formed response, uniformly random answer, placeholder
// profiles that match nothing.
class RandomAssessor : public Assessor {
public:
    explicit RandomAssessor(uint64_t seed = 0) : seed_(seed) {}
    std::string assess(const datagen::UserSample& sample, int k_refs_visible) const override;
    std::string name() const override { return "random"; }

private:
    uint64_t seed_;
};

struct SplitMetrics {
    std::string split;
    int ass_correct = 0;
    int n = 0;
    double pred_sum = 0.0;  // sum of per-sample profile-prediction scores

    double assessment_accuracy() const;
    double prediction_accuracy() const;
};

struct MetricsReport {
    std::vector<SplitMetrics> splits;  // kSplitOrder rows, then overall
    uint64_t config_hash = 0;

    const SplitMetrics& at(const std::string& split) const;  // throws on unknown
};

// Per-sample profile prediction score: predicted profiles greedily paired to
// ground-truth profiles; each gt element scores 1 when the paired predicted
// term reaches similarity tau, else 0; the sample score is the mean over gt
// elements. An unparseable response scores 0.
double profile_prediction_score(const cot::CoTResponse* parsed, const UserProfileSet& gt,
                                const cot::TermSimilarity& sim, double tau);

// Runs the assessor over every sample (first spec-many per split, full k_refs
// visibility), grading answers via lenient parsing (unparseable -> wrong) and
// profile predictions via profile_prediction_score.
MetricsReport evaluate(const Assessor& assessor, const std::vector<datagen::UserSample>& samples,
                       const BenchmarkSpec& spec, const cot::TermSimilarity& sim, double tau,
                       uint64_t config_hash = 0, int jobs = 1);

// Per-split profile-prediction scores alone (same protocol as evaluate).
std::vector<std::pair<std::string, double>> profile_prediction_accuracy(
    const Assessor& assessor, const std::vector<datagen::UserSample>& samples,
    const BenchmarkSpec& spec, const cot::TermSimilarity& sim, double tau, int jobs = 1);

struct RobustnessRow {
    int k = 0;
    std::string split;
    int correct = 0;
    int n = 0;
};

// Assessment accuracy as a function of how many reference pairs the assessor
// may see. k values must lie in [1, spec.k_refs].
std::vector<RobustnessRow> robustness_sweep(const Assessor& assessor,
                                            const std::vector<datagen::UserSample>& samples,
                                            const BenchmarkSpec& spec,
                                            const std::vector<int>& k_values, int jobs = 1);

// ---------------------------------------------------------------------------
// Ablation harness: trains {SFT, RL, prediction-reward} on/off variants from
// one shared seed and evaluates both metrics on the held-out (unseen) splits.

struct AblationVariant {
    std::string name;
    bool sft = false;
    bool rl = false;
    bool prediction_reward = false;  // only meaningful when rl is on
};

std::vector<AblationVariant> default_ablation_variants();

struct AblationConfig {
    uint64_t seed = 0;
    int sft_epochs = 1;
    double sft_lr = 0.5;
    long grpo_steps = 1000;
    trainer::GRPOConfig grpo;      // grpo.lr should be desk-scale (see CLI defaults)
    reward::RewardConfig reward;   // w_p is overridden per variant
    double eval_temperature = 0.9;
    int jobs = 1;
};

struct AblationRow {
    std::string name;
    bool sft = false;
    bool rl = false;
    bool prediction_reward = false;
    double ass_accuracy = 0.0;
    double pred_accuracy = 0.0;
    int n = 0;
};

std::vector<AblationRow> ablation_run(const std::vector<datagen::UserSample>& samples,
                                      const std::string& dataset_dir, const Vocabulary& vocab,
                                      const std::vector<AblationVariant>& variants,
                                      const AblationConfig& cfg);

// ---------------------------------------------------------------------------
// Report emission: deterministic bytes for every format.

enum class ReportFormat { text_table, csv, plot_data };

std::string render_metrics_report(const MetricsReport& report, ReportFormat format);
std::string render_robustness_rows(const std::vector<RobustnessRow>& rows, ReportFormat format);
std::string render_ablation_rows(const std::vector<AblationRow>& rows, ReportFormat format);

void write_text_file(const std::string& path, const std::string& content);

}  // namespace preferthinker::eval
