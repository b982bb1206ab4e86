// Command-line entry point: wires dataset generation, annotation, filtering,
// SFT, GRPO, evaluation, sweeps, ablations and single-response debugging into
// reproducible commands driven by one flat config file. Every command prints
// the resolved config hash and seed; artifact paths are never overwritten.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "preferthinker/config.hpp"
#include "preferthinker/cot.hpp"
#include "preferthinker/datagen.hpp"
#include "preferthinker/eval.hpp"
#include "preferthinker/hash.hpp"
#include "preferthinker/image.hpp"
#include "preferthinker/policy.hpp"
#include "preferthinker/profile.hpp"
#include "preferthinker/reward.hpp"
#include "preferthinker/task.hpp"
#include "preferthinker/trainer.hpp"

namespace fs = std::filesystem;
using namespace preferthinker;
namespace cfgns = preferthinker::config;

namespace {

struct GlobalOpts {
    std::string config_path;
    std::vector<std::string> sets;
    std::optional<uint64_t> seed;
    std::optional<int> jobs;
};

cfgns::RunConfig resolve_config(const GlobalOpts& g) {
    cfgns::RunConfig cfg;
    if (!g.config_path.empty()) cfg = cfgns::load_config(g.config_path);
    for (const auto& kv : g.sets) cfgns::apply_override_kv(cfg, kv);
    if (g.seed) cfg.run_seed = *g.seed;
    if (g.jobs) cfg.run_jobs = *g.jobs;
    if (cfg.run_jobs < 1) throw std::invalid_argument("run.jobs must be >= 1");
    return cfg;
}

void print_banner(const cfgns::RunConfig& cfg) {
    std::printf("config_hash=%s seed=%llu\n", hex64(cfgns::config_hash(cfg)).c_str(),
                static_cast<unsigned long long>(cfg.run_seed));
}

Vocabulary resolve_vocab(const cfgns::RunConfig& cfg) {
    return cfg.paths_vocab.empty() ? Vocabulary::bundled() : Vocabulary::load(cfg.paths_vocab);
}

std::vector<std::string> resolve_prompts(const cfgns::RunConfig& cfg) {
    return cfg.paths_prompts.empty() ? datagen::bundled_prompts()
                                     : datagen::load_prompts(cfg.paths_prompts);
}

std::unique_ptr<datagen::T2IBackend> make_t2i(const cfgns::RunConfig& cfg,
                                              const Vocabulary& vocab) {
    if (cfg.backend_t2i == "mock") return std::make_unique<datagen::MockT2IBackend>(vocab);
    return std::make_unique<datagen::RemoteT2IBackend>(cfg.backend_t2i.substr(7));
}

// the dataset must have been generated with the vocabulary this run resolves
void check_vocab_matches(const Vocabulary& vocab, const std::string& data_dir) {
    datagen::DatasetManifest m = datagen::load_manifest(data_dir);
    std::string h = hex64(vocab.hash());
    if (h != m.vocab_hash) {
        throw std::runtime_error("vocabulary hash " + h + " does not match the dataset manifest (" +
                                 m.vocab_hash + ") under " + data_dir);
    }
}

void require_fresh(const std::string& path) {
    if (fs::exists(path))
        throw std::runtime_error("refusing to overwrite existing artifact: " + path);
}

void ensure_parent_dir(const std::string& path) {
    fs::path parent = fs::path(path).parent_path();
    if (!parent.empty()) fs::create_directories(parent);
}

std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return content;
}

eval::ReportFormat parse_format(const std::string& name) {
    if (name == "text-table") return eval::ReportFormat::text_table;
    if (name == "csv") return eval::ReportFormat::csv;
    if (name == "plot-data") return eval::ReportFormat::plot_data;
    throw std::invalid_argument("unknown report format '" + name +
                                "' (expected text-table | csv | plot-data)");
}

void write_report_file(const std::string& path, const std::string& content) {
    require_fresh(path);
    ensure_parent_dir(path);
    eval::write_text_file(path, content);
    std::printf("wrote %s\n", path.c_str());
}

const datagen::UserSample& find_sample(const std::vector<datagen::UserSample>& samples,
                                       const std::string& user_id) {
    for (const auto& s : samples) {
        if (s.user_id == user_id) return s;
    }
    throw std::runtime_error("no sample with user id '" + user_id + "' in the dataset");
}

// dataset rows for the train splits, in dataset order
std::vector<datagen::UserSample> seen_samples(const std::vector<datagen::UserSample>& samples) {
    std::vector<datagen::UserSample> out;
    for (const auto& s : samples) {
        if (s.split.rfind("seen", 0) == 0) out.push_back(s);
    }
    if (out.empty()) throw std::runtime_error("dataset has no seen-* samples to train on");
    return out;
}

struct AssessorBundle {
    std::unique_ptr<task::AssessmentPolicy> policy;  // kept alive for PolicyAssessor
    std::unique_ptr<eval::Assessor> assessor;
};

AssessorBundle make_assessor(const std::string& kind, const std::string& ckpt_path,
                             const std::string& data_dir, const Vocabulary& vocab,
                             const cfgns::RunConfig& cfg) {
    AssessorBundle b;
    uint64_t seed = mix_seed(cfg.run_seed, std::string_view("eval"));
    if (kind == "oracle") {
        b.assessor = std::make_unique<eval::OracleAssessor>(seed);
    } else if (kind == "random") {
        b.assessor = std::make_unique<eval::RandomAssessor>(seed);
    } else if (kind == "policy") {
        if (ckpt_path.empty())
            throw std::invalid_argument("--assessor policy requires --ckpt <checkpoint>");
        b.policy = std::make_unique<task::AssessmentPolicy>();
        policy::CheckpointInfo info = policy::load_checkpoint(ckpt_path, *b.policy);
        std::printf("loaded checkpoint %s (kind=%s, config_hash=%s)\n", ckpt_path.c_str(),
                    info.kind.c_str(), hex64(info.config_hash).c_str());
        b.assessor = std::make_unique<eval::PolicyAssessor>(*b.policy, data_dir, vocab,
                                                            cfg.eval_temperature, seed);
    } else {
        throw std::invalid_argument("unknown assessor '" + kind +
                                    "' (expected policy | oracle | random)");
    }
    return b;
}

std::vector<std::pair<std::string, std::string>> checkpoint_meta(const cfgns::RunConfig& cfg,
                                                                 const std::string& command,
                                                                 const std::string& data_dir) {
    return {{"command", command},
            {"seed", std::to_string(cfg.run_seed)},
            {"data_dir", data_dir}};
}

// ---------------------------------------------------------------------------
// subcommand bodies

void cmd_gen_data(const cfgns::RunConfig& cfg) {
    Vocabulary vocab = resolve_vocab(cfg);
    auto prompts = resolve_prompts(cfg);
    auto t2i = make_t2i(cfg, vocab);
    const std::string& out = cfg.paths_data_dir;
    require_fresh((fs::path(out) / "dataset.jsonl").string());
    fs::create_directories(out);
    datagen::DatasetManifest m = datagen::generate_dataset(vocab, cfgns::dataset_config(cfg),
                                                           prompts, *t2i, out, cfg.run_jobs);
    std::printf("dataset written to %s (backend=%s, vocab_hash=%s)\n", out.c_str(),
                m.backend_id.c_str(), m.vocab_hash.c_str());
    for (const auto& [split, count] : m.counts) std::printf("  %-10s %d\n", split.c_str(), count);
    std::printf("  %-10s %d\n", "total", m.total());
}

void cmd_annotate(const cfgns::RunConfig& cfg, const std::string& out_file,
                  const std::string& split) {
    Vocabulary vocab = resolve_vocab(cfg);
    const std::string& data = cfg.paths_data_dir;
    check_vocab_matches(vocab, data);
    auto all = datagen::load_dataset(data);
    std::vector<datagen::UserSample> subset;
    for (const auto& s : all) {
        bool unseen = s.split.rfind("unseen", 0) == 0;
        if (split == "all" || (split == "unseen") == unseen) subset.push_back(s);
    }
    if (subset.empty()) throw std::runtime_error("no samples in the requested split group");

    std::function<std::string(const datagen::UserSample&, uint64_t)> fn;
    std::unique_ptr<cot::RemoteAnnotatorClient> client;
    if (cfg.backend_annotator == "oracle") {
        fn = [](const datagen::UserSample& s, uint64_t seed) {
            return cot::oracle_annotate(s, seed);
        };
    } else {
        client = std::make_unique<cot::RemoteAnnotatorClient>(cfg.backend_annotator.substr(7));
        fn = cot::make_client_annotator(*client, data);
    }
    auto rows = cot::annotate_dataset(subset, fn, mix_seed(cfg.run_seed, std::string_view("annotate")),
                                      cfg.run_jobs);
    std::string out = out_file.empty() ? (fs::path(data) / "annotated.jsonl").string() : out_file;
    require_fresh(out);
    ensure_parent_dir(out);
    cot::save_annotated(out, rows);
    std::printf("annotated %zu samples (%s split group) -> %s\n", rows.size(), split.c_str(),
                out.c_str());
}

void cmd_filter(const cfgns::RunConfig& cfg, const std::string& in_file,
                const std::string& out_file) {
    Vocabulary vocab = resolve_vocab(cfg);
    const std::string& data = cfg.paths_data_dir;
    check_vocab_matches(vocab, data);
    auto samples = datagen::load_dataset(data);
    std::map<std::string, const datagen::UserSample*> by_user;
    for (const auto& s : samples) by_user[s.user_id] = &s;

    std::string in = in_file.empty() ? (fs::path(data) / "annotated.jsonl").string() : in_file;
    auto rows = cot::load_annotated(in);
    if (rows.empty()) throw std::runtime_error("no annotated rows in " + in);

    int accepted = 0;
    std::map<std::string, int> reasons;
    for (auto& row : rows) {
        auto it = by_user.find(row.user_id);
        if (it == by_user.end())
            throw std::runtime_error("annotated row references unknown user '" + row.user_id +
                                     "'");
        cot::FilterVerdict v = cot::filter_response(row.response_text, *it->second,
                                                    cot::exact_term_similarity, cfg.reward_tau);
        if (v.accepted) {
            ++accepted;
        } else {
            for (auto r : v.reasons) reasons[cot::reject_code_name(r)] += 1;
        }
        row.verdict = std::move(v);
    }
    std::string out = out_file.empty() ? (fs::path(data) / "filtered.jsonl").string() : out_file;
    require_fresh(out);
    ensure_parent_dir(out);
    cot::save_annotated(out, rows);
    std::printf("filtered %zu rows: %d accepted, %zu rejected -> %s\n", rows.size(), accepted,
                rows.size() - static_cast<size_t>(accepted), out.c_str());
    for (const auto& [name, count] : reasons) std::printf("  %-16s %d\n", name.c_str(), count);
}

void cmd_train_sft(const cfgns::RunConfig& cfg, const std::string& in_file,
                   const std::string& out_ckpt, const std::string& log_file) {
    Vocabulary vocab = resolve_vocab(cfg);
    const std::string& data = cfg.paths_data_dir;
    check_vocab_matches(vocab, data);
    auto samples = datagen::load_dataset(data);
    std::map<std::string, const datagen::UserSample*> by_user;
    for (const auto& s : samples) by_user[s.user_id] = &s;

    std::string in = in_file.empty() ? (fs::path(data) / "filtered.jsonl").string() : in_file;
    auto rows = cot::load_annotated(in);
    std::vector<datagen::UserSample> accepted_samples;
    std::vector<std::string> accepted_texts;
    for (const auto& row : rows) {
        if (!row.verdict.has_value())
            throw std::runtime_error("row for user '" + row.user_id +
                                     "' carries no filter verdict; run the filter command first");
        if (!row.verdict->accepted) continue;
        auto it = by_user.find(row.user_id);
        if (it == by_user.end())
            throw std::runtime_error("filtered row references unknown user '" + row.user_id + "'");
        accepted_samples.push_back(*it->second);
        accepted_texts.push_back(row.response_text);
    }
    if (accepted_samples.empty())
        throw std::runtime_error("no accepted rows in " + in + "; nothing to fine-tune on");

    auto contexts = task::observation_contexts(accepted_samples, data, vocab, cfg.run_jobs);
    std::vector<trainer::SFTExample> examples;
    examples.reserve(contexts.size());
    for (size_t i = 0; i < contexts.size(); ++i)
        examples.push_back({contexts[i], accepted_texts[i]});

    task::AssessmentPolicy pol;
    Rng rng(mix_seed(cfg.run_seed, std::string_view("sft")));
    auto log = trainer::train_sft(pol, examples, cfg.sft_epochs, cfg.sft_lr, rng);

    std::string ckpt = out_ckpt.empty()
                           ? (fs::path(cfg.paths_checkpoint_dir) / "sft.ckpt.json").string()
                           : out_ckpt;
    std::string logp = log_file.empty()
                           ? (fs::path(cfg.paths_checkpoint_dir) / "sft_log.jsonl").string()
                           : log_file;
    require_fresh(ckpt);
    require_fresh(logp);
    ensure_parent_dir(ckpt);
    ensure_parent_dir(logp);
    trainer::save_train_log(logp, log);
    policy::save_checkpoint(ckpt, pol, cfgns::config_hash(cfg),
                            checkpoint_meta(cfg, "train-sft", data));
    double final_loss = log.empty() || !log.back().loss ? 0.0 : *log.back().loss;
    std::printf("fine-tuned on %zu examples for %d epoch(s); final loss %.6f\n", examples.size(),
                cfg.sft_epochs, final_loss);
    std::printf("checkpoint -> %s\nlog -> %s\n", ckpt.c_str(), logp.c_str());
}

void cmd_train_grpo(const cfgns::RunConfig& cfg, const std::string& init_ckpt,
                    const std::string& out_ckpt, const std::string& log_file) {
    Vocabulary vocab = resolve_vocab(cfg);
    const std::string& data = cfg.paths_data_dir;
    check_vocab_matches(vocab, data);
    auto train = seen_samples(datagen::load_dataset(data));
    auto contexts = task::observation_contexts(train, data, vocab, cfg.run_jobs);

    auto t2i = make_t2i(cfg, vocab);
    reward::MockTextSimilarity text_sim(vocab);
    reward::MockImageSimilarity img_sim;
    reward::RewardBackends backends{t2i.get(), &text_sim, &img_sim};
    reward::RewardConfig rcfg = cfgns::reward_config(cfg);

    task::AssessmentPolicy pol;
    if (!init_ckpt.empty()) {
        policy::CheckpointInfo info = policy::load_checkpoint(init_ckpt, pol);
        std::printf("initialized from %s (kind=%s, config_hash=%s)\n", init_ckpt.c_str(),
                    info.kind.c_str(), hex64(info.config_hash).c_str());
    }
    auto ref = pol.clone();

    trainer::RewardFn rf = [&](size_t ci, const policy::Generation&, const std::string& text) {
        return reward::total_reward(text, train[ci], rcfg, backends).total;
    };
    trainer::GRPOConfig gcfg = cfgns::grpo_config(cfg);
    Rng rng(mix_seed(cfg.run_seed, std::string_view("grpo")));
    auto log = trainer::train_grpo(pol, *ref, contexts, rf, gcfg, cfg.grpo_steps, rng);

    std::string ckpt = out_ckpt.empty()
                           ? (fs::path(cfg.paths_checkpoint_dir) / "grpo.ckpt.json").string()
                           : out_ckpt;
    std::string logp = log_file.empty()
                           ? (fs::path(cfg.paths_checkpoint_dir) / "grpo_log.jsonl").string()
                           : log_file;
    require_fresh(ckpt);
    require_fresh(logp);
    ensure_parent_dir(ckpt);
    ensure_parent_dir(logp);
    trainer::save_train_log(logp, log);
    policy::save_checkpoint(ckpt, pol, cfgns::config_hash(cfg),
                            checkpoint_meta(cfg, "train-grpo", data));
    double final_reward = log.empty() || !log.back().mean_reward ? 0.0 : *log.back().mean_reward;
    std::printf("%ld optimization steps over %zu contexts; final mean reward %.6f\n",
                cfg.grpo_steps, contexts.size(), final_reward);
    std::printf("checkpoint -> %s\nlog -> %s\n", ckpt.c_str(), logp.c_str());
}

void cmd_eval(const cfgns::RunConfig& cfg, const std::string& assessor_kind,
              const std::string& ckpt, const std::string& report_file,
              const std::string& format_name) {
    Vocabulary vocab = resolve_vocab(cfg);
    const std::string& data = cfg.paths_data_dir;
    check_vocab_matches(vocab, data);
    auto samples = datagen::load_dataset(data);
    AssessorBundle b = make_assessor(assessor_kind, ckpt, data, vocab, cfg);
    eval::BenchmarkSpec spec = cfgns::benchmark_spec(cfg);
    eval::MetricsReport rep =
        eval::evaluate(*b.assessor, samples, spec, cot::exact_term_similarity, cfg.reward_tau,
                       cfgns::config_hash(cfg), cfg.run_jobs);
    std::printf("%s", eval::render_metrics_report(rep, eval::ReportFormat::text_table).c_str());
    if (!report_file.empty())
        write_report_file(report_file, eval::render_metrics_report(rep, parse_format(format_name)));
}

void cmd_sweep_refs(const cfgns::RunConfig& cfg, const std::string& assessor_kind,
                    const std::string& ckpt, const std::string& k_list,
                    const std::string& report_file, const std::string& format_name) {
    Vocabulary vocab = resolve_vocab(cfg);
    const std::string& data = cfg.paths_data_dir;
    check_vocab_matches(vocab, data);
    auto samples = datagen::load_dataset(data);
    AssessorBundle b = make_assessor(assessor_kind, ckpt, data, vocab, cfg);
    eval::BenchmarkSpec spec = cfgns::benchmark_spec(cfg);

    std::vector<int> ks;
    if (k_list.empty()) {
        for (int k = 1; k <= spec.k_refs; ++k) ks.push_back(k);
    } else {
        size_t pos = 0;
        while (pos <= k_list.size()) {
            size_t comma = k_list.find(',', pos);
            std::string piece = k_list.substr(pos, comma == std::string::npos ? std::string::npos
                                                                              : comma - pos);
            try {
                size_t used = 0;
                int k = std::stoi(piece, &used);
                if (used != piece.size()) throw std::invalid_argument(piece);
                ks.push_back(k);
            } catch (const std::exception&) {
                throw std::invalid_argument("--k expects a comma-separated integer list, got '" +
                                            k_list + "'");
            }
            if (comma == std::string::npos) break;
            pos = comma + 1;
        }
    }
    auto rows = eval::robustness_sweep(*b.assessor, samples, spec, ks, cfg.run_jobs);
    std::printf("%s", eval::render_robustness_rows(rows, eval::ReportFormat::text_table).c_str());
    if (!report_file.empty())
        write_report_file(report_file,
                          eval::render_robustness_rows(rows, parse_format(format_name)));
}

void cmd_ablate(const cfgns::RunConfig& cfg, const std::string& report_file,
                const std::string& format_name) {
    Vocabulary vocab = resolve_vocab(cfg);
    const std::string& data = cfg.paths_data_dir;
    check_vocab_matches(vocab, data);
    auto samples = datagen::load_dataset(data);
    eval::AblationConfig acfg;
    acfg.seed = cfg.run_seed;
    acfg.sft_epochs = cfg.sft_epochs;
    acfg.sft_lr = cfg.sft_lr;
    acfg.grpo_steps = cfg.grpo_steps;
    acfg.grpo = cfgns::grpo_config(cfg);
    acfg.reward = cfgns::reward_config(cfg);
    acfg.eval_temperature = cfg.eval_temperature;
    acfg.jobs = cfg.run_jobs;
    auto rows = eval::ablation_run(samples, data, vocab, eval::default_ablation_variants(), acfg);
    std::printf("%s", eval::render_ablation_rows(rows, eval::ReportFormat::text_table).c_str());
    if (!report_file.empty())
        write_report_file(report_file, eval::render_ablation_rows(rows, parse_format(format_name)));
}

void cmd_reward(const cfgns::RunConfig& cfg, const std::string& response_file,
                const std::string& sample_file, const std::string& user_id) {
    std::string resp_text = read_text_file(response_file);
    Vocabulary vocab = resolve_vocab(cfg);

    datagen::UserSample sample;
    if (!sample_file.empty()) {
        std::ifstream in(sample_file, std::ios::binary);
        if (!in) throw std::runtime_error("cannot open " + sample_file);
        std::string line;
        while (std::getline(in, line) && line.empty()) {
        }
        if (line.empty()) throw std::runtime_error("no sample row in " + sample_file);
        sample = datagen::sample_from_json(line);
    } else if (!user_id.empty()) {
        check_vocab_matches(vocab, cfg.paths_data_dir);
        auto samples = datagen::load_dataset(cfg.paths_data_dir);
        sample = find_sample(samples, user_id);
    } else {
        throw std::invalid_argument("reward needs --sample <file> or --user <id>");
    }

    auto t2i = make_t2i(cfg, vocab);
    reward::MockTextSimilarity text_sim(vocab);
    reward::MockImageSimilarity img_sim;
    reward::RewardBackends backends{t2i.get(), &text_sim, &img_sim};
    reward::RewardConfig rcfg = cfgns::reward_config(cfg);
    reward::RewardBreakdown br = reward::total_reward(resp_text, sample, rcfg, backends);
    std::string probe = reward::probe_prompt_for(sample, rcfg);
    uint64_t seed = mix_seed(rcfg.probe_seed, std::string_view(sample.user_id));
    std::printf("%s\n", reward::reward_debug_json(br, rcfg, probe, seed).c_str());
}

void cmd_personalize(const cfgns::RunConfig& cfg, const std::string& user_id,
                     const std::string& assessor_kind, const std::string& ckpt,
                     const std::string& prompt_override, const std::string& render_path) {
    Vocabulary vocab = resolve_vocab(cfg);
    const std::string& data = cfg.paths_data_dir;
    check_vocab_matches(vocab, data);
    auto samples = datagen::load_dataset(data);
    const datagen::UserSample& sample = find_sample(samples, user_id);

    std::string kind = assessor_kind.empty() ? (ckpt.empty() ? "oracle" : "policy")
                                             : assessor_kind;
    AssessorBundle b = make_assessor(kind, ckpt, data, vocab, cfg);
    int k_all = static_cast<int>(sample.preferred_refs.size());
    std::string text = b.assessor->assess(sample, std::max(1, k_all));
    auto out = cot::parse_response(text, cot::ParseMode::lenient);
    if (!out.ok || out.response.predicted_preferences.empty())
        throw std::runtime_error("the assessor's response did not yield a preference profile (" +
                                 cot::parse_error_name(out.code) + ")");

    const PreferenceProfile& profile = out.response.predicted_preferences.front();
    std::string base = prompt_override.empty()
                           ? (sample.initial_prompts.empty() ? std::string("a scenic landscape")
                                                             : sample.initial_prompts.front())
                           : prompt_override;
    std::string personalized = datagen::recaption(base, profile);
    std::printf("user: %s\n", sample.user_id.c_str());
    std::printf("predicted profile: %s\n", profile_to_text(profile).c_str());
    std::printf("initial prompt: %s\n", base.c_str());
    std::printf("personalized prompt: %s\n", personalized.c_str());

    if (!render_path.empty()) {
        auto t2i = make_t2i(cfg, vocab);
        Image img = t2i->render(personalized, mix_seed(cfg.run_seed, std::string_view("render")));
        require_fresh(render_path);
        ensure_parent_dir(render_path);
        write_png(render_path, img);
        std::printf("rendered: %s\n", render_path.c_str());
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"personalized preference assessment pipeline"};
    app.require_subcommand(1);
    app.fallthrough();

    GlobalOpts g;
    app.add_option("--config", g.config_path, "config file with flat dotted keys");
    app.add_option("--set", g.sets, "override a config key (key=value, repeatable)");
    app.add_option("--seed", g.seed, "override run.seed");
    app.add_option("--jobs", g.jobs, "override run.jobs (worker thread bound)");

    // per-command locals; strings default empty = "use the config/default path"
    std::string out_file, in_file, split = "seen", ckpt, init_ckpt, log_file;
    std::string assessor_kind, report_file, format_name = "csv", k_list;
    std::string response_file, sample_file, user_id, prompt_override, render_path;
    std::optional<int> n_users, k_refs, epochs;
    std::optional<long> steps;
    std::optional<double> multi_fraction, unseen_fraction, lr, tau;

    auto* gen = app.add_subcommand("gen-data", "generate a synthetic preference dataset");
    gen->add_option("--out", out_file, "dataset directory (default paths.data_dir)");
    gen->add_option("--n", n_users, "number of simulated users");
    gen->add_option("--multi-fraction", multi_fraction, "fraction of multi-preference users");
    gen->add_option("--unseen-fraction", unseen_fraction, "fraction of held-out users");
    gen->add_option("--k-refs", k_refs, "reference image pairs per user");
    gen->callback([&] {
        cfgns::RunConfig cfg = resolve_config(g);
        if (!out_file.empty()) cfg.paths_data_dir = out_file;
        if (n_users) cfg.data_n_users = *n_users;
        if (multi_fraction) cfg.data_multi_fraction = *multi_fraction;
        if (unseen_fraction) cfg.data_unseen_fraction = *unseen_fraction;
        if (k_refs) cfg.data_k_refs = *k_refs;
        print_banner(cfg);
        cmd_gen_data(cfg);
    });

    auto* ann = app.add_subcommand("annotate", "produce structured responses for dataset samples");
    ann->add_option("--data", in_file, "dataset directory (default paths.data_dir)");
    ann->add_option("--out", out_file, "output JSONL (default <data>/annotated.jsonl)");
    ann->add_option("--split", split, "seen | unseen | all (default seen)");
    ann->callback([&] {
        cfgns::RunConfig cfg = resolve_config(g);
        if (!in_file.empty()) cfg.paths_data_dir = in_file;
        if (split != "seen" && split != "unseen" && split != "all")
            throw std::invalid_argument("--split must be seen | unseen | all");
        print_banner(cfg);
        cmd_annotate(cfg, out_file, split);
    });

    auto* fil = app.add_subcommand("filter", "screen annotated responses against their samples");
    std::string filter_data;
    fil->add_option("--data", filter_data, "dataset directory (default paths.data_dir)");
    fil->add_option("--in", in_file, "annotated JSONL (default <data>/annotated.jsonl)");
    fil->add_option("--out", out_file, "output JSONL with verdicts (default <data>/filtered.jsonl)");
    fil->add_option("--tau", tau, "profile-similarity threshold (default reward.tau)");
    fil->callback([&] {
        cfgns::RunConfig cfg = resolve_config(g);
        if (!filter_data.empty()) cfg.paths_data_dir = filter_data;
        if (tau) cfg.reward_tau = *tau;
        print_banner(cfg);
        cmd_filter(cfg, in_file, out_file);
    });

    auto* sft = app.add_subcommand("train-sft", "cold-start fine-tuning on filtered responses");
    std::string sft_data;
    sft->add_option("--data", sft_data, "dataset directory (default paths.data_dir)");
    sft->add_option("--in", in_file, "filtered JSONL (default <data>/filtered.jsonl)");
    sft->add_option("--out", ckpt, "checkpoint path (default <checkpoint_dir>/sft.ckpt.json)");
    sft->add_option("--log", log_file, "training log path (default <checkpoint_dir>/sft_log.jsonl)");
    sft->add_option("--epochs", epochs, "training epochs (default sft.epochs)");
    sft->add_option("--lr", lr, "learning rate (default sft.lr)");
    sft->callback([&] {
        cfgns::RunConfig cfg = resolve_config(g);
        if (!sft_data.empty()) cfg.paths_data_dir = sft_data;
        if (epochs) cfg.sft_epochs = *epochs;
        if (lr) cfg.sft_lr = *lr;
        print_banner(cfg);
        cmd_train_sft(cfg, in_file, ckpt, log_file);
    });

    auto* grpo = app.add_subcommand("train-grpo", "group-relative policy optimization");
    std::string grpo_data;
    grpo->add_option("--data", grpo_data, "dataset directory (default paths.data_dir)");
    grpo->add_option("--init", init_ckpt, "checkpoint to start from (default: fresh policy)");
    grpo->add_option("--out", ckpt, "checkpoint path (default <checkpoint_dir>/grpo.ckpt.json)");
    grpo->add_option("--log", log_file,
                     "training log path (default <checkpoint_dir>/grpo_log.jsonl)");
    grpo->add_option("--steps", steps, "optimization steps (default grpo.steps)");
    grpo->add_option("--lr", lr, "learning rate (default grpo.lr)");
    grpo->callback([&] {
        cfgns::RunConfig cfg = resolve_config(g);
        if (!grpo_data.empty()) cfg.paths_data_dir = grpo_data;
        if (steps) cfg.grpo_steps = *steps;
        if (lr) cfg.grpo_lr = *lr;
        print_banner(cfg);
        cmd_train_grpo(cfg, init_ckpt, ckpt, log_file);
    });

    auto* ev = app.add_subcommand("eval", "benchmark an assessor on the dataset splits");
    std::string eval_data;
    ev->add_option("--data", eval_data, "dataset directory (default paths.data_dir)");
    ev->add_option("--assessor", assessor_kind, "policy | oracle | random (default policy)");
    ev->add_option("--ckpt", ckpt, "policy checkpoint (required for --assessor policy)");
    ev->add_option("--report", report_file, "write the report to this path");
    ev->add_option("--format", format_name, "text-table | csv | plot-data (default csv)");
    ev->callback([&] {
        cfgns::RunConfig cfg = resolve_config(g);
        if (!eval_data.empty()) cfg.paths_data_dir = eval_data;
        print_banner(cfg);
        cmd_eval(cfg, assessor_kind.empty() ? "policy" : assessor_kind, ckpt, report_file,
                 format_name);
    });

    auto* sweep = app.add_subcommand("sweep-refs",
                                     "assessment accuracy vs visible reference pairs");
    std::string sweep_data;
    sweep->add_option("--data", sweep_data, "dataset directory (default paths.data_dir)");
    sweep->add_option("--assessor", assessor_kind, "policy | oracle | random (default policy)");
    sweep->add_option("--ckpt", ckpt, "policy checkpoint (required for --assessor policy)");
    sweep->add_option("--k", k_list, "comma-separated k values (default 1..eval.k_refs)");
    sweep->add_option("--report", report_file, "write the sweep to this path");
    sweep->add_option("--format", format_name, "text-table | csv | plot-data (default csv)");
    sweep->callback([&] {
        cfgns::RunConfig cfg = resolve_config(g);
        if (!sweep_data.empty()) cfg.paths_data_dir = sweep_data;
        print_banner(cfg);
        cmd_sweep_refs(cfg, assessor_kind.empty() ? "policy" : assessor_kind, ckpt, k_list,
                       report_file, format_name);
    });

    auto* abl = app.add_subcommand("ablate", "train and compare SFT/RL/prediction-reward variants");
    std::string abl_data;
    abl->add_option("--data", abl_data, "dataset directory (default paths.data_dir)");
    abl->add_option("--steps", steps, "optimization steps per RL variant (default grpo.steps)");
    abl->add_option("--lr", lr, "RL learning rate (default grpo.lr)");
    abl->add_option("--report", report_file, "write the comparison to this path");
    abl->add_option("--format", format_name, "text-table | csv | plot-data (default csv)");
    abl->callback([&] {
        cfgns::RunConfig cfg = resolve_config(g);
        if (!abl_data.empty()) cfg.paths_data_dir = abl_data;
        if (steps) cfg.grpo_steps = *steps;
        if (lr) cfg.grpo_lr = *lr;
        print_banner(cfg);
        cmd_ablate(cfg, report_file, format_name);
    });

    auto* rew = app.add_subcommand("reward", "score one response and print the breakdown");
    std::string reward_data;
    rew->add_option("--response", response_file, "file holding the response text")->required();
    rew->add_option("--sample", sample_file, "file holding one dataset row (JSON line)");
    rew->add_option("--data", reward_data, "dataset directory (with --user)");
    rew->add_option("--user", user_id, "user id to look up in the dataset");
    rew->callback([&] {
        cfgns::RunConfig cfg = resolve_config(g);
        if (!reward_data.empty()) cfg.paths_data_dir = reward_data;
        print_banner(cfg);
        cmd_reward(cfg, response_file, sample_file, user_id);
    });

    auto* per = app.add_subcommand("personalize",
                                   "predict a user's profile and personalize a prompt");
    std::string per_data;
    per->add_option("--data", per_data, "dataset directory (default paths.data_dir)");
    per->add_option("--user", user_id, "user id to personalize for")->required();
    per->add_option("--assessor", assessor_kind,
                    "policy | oracle (default: policy when --ckpt is given, else oracle)");
    per->add_option("--ckpt", ckpt, "policy checkpoint");
    per->add_option("--prompt", prompt_override, "initial prompt (default: the user's first)");
    per->add_option("--render", render_path, "render the personalized prompt to this PNG");
    per->callback([&] {
        cfgns::RunConfig cfg = resolve_config(g);
        if (!per_data.empty()) cfg.paths_data_dir = per_data;
        print_banner(cfg);
        cmd_personalize(cfg, user_id, assessor_kind, ckpt, prompt_override, render_path);
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    } catch (const std::invalid_argument& e) {
        std::fprintf(stderr, "error (invalid argument): %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
