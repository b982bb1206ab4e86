#include "preferthinker/policy.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"
#include "preferthinker/hash.hpp"

using ordered_json = nlohmann::ordered_json;

namespace preferthinker::policy {

namespace {

// numerically stable log-softmax of one logit row
std::vector<double> row_log_softmax(std::span<const double> row) {
    double mx = *std::max_element(row.begin(), row.end());
    double z = 0.0;
    for (double v : row) z += std::exp(v - mx);
    double log_z = mx + std::log(z);
    std::vector<double> out(row.size());
    for (size_t i = 0; i < row.size(); ++i) out[i] = row[i] - log_z;
    return out;
}

// temperature sample / greedy argmax over one logit row
int sample_row(std::span<const double> row, double temperature, Rng& rng) {
    if (temperature < 0.0) throw std::invalid_argument("policy: temperature must be >= 0");
    size_t n = row.size();
    if (temperature == 0.0) {
        // argmax, first index on ties
        size_t best = 0;
        for (size_t i = 1; i < n; ++i) {
            if (row[i] > row[best]) best = i;
        }
        return static_cast<int>(best);
    }
    double mx = *std::max_element(row.begin(), row.end());
    std::vector<double> w(n);
    double z = 0.0;
    for (size_t i = 0; i < n; ++i) {
        w[i] = std::exp((row[i] - mx) / temperature);
        z += w[i];
    }
    double u = rng.uniform_real() * z;
    double acc = 0.0;
    for (size_t i = 0; i < n; ++i) {
        acc += w[i];
        if (u < acc) return static_cast<int>(i);
    }
    return static_cast<int>(n - 1);  // floating belt-and-braces
}

}  // namespace

// ---------------------------------------------------------------------------
// CatalogPolicy

CatalogPolicy::CatalogPolicy(std::vector<std::string> contexts, int n_entries,
                             EntryTextFn entry_text)
    : contexts_(std::move(contexts)), n_entries_(n_entries), entry_text_(std::move(entry_text)) {
    if (contexts_.empty()) throw std::invalid_argument("policy: catalog needs >= 1 context");
    if (n_entries_ < 2) throw std::invalid_argument("policy: catalog needs >= 2 entries");
    if (!entry_text_) throw std::invalid_argument("policy: catalog needs an entry-text function");
    for (size_t i = 0; i < contexts_.size(); ++i) {
        if (!context_index_.emplace(contexts_[i], static_cast<int>(i)).second) {
            throw std::invalid_argument("policy: duplicate catalog context " + contexts_[i]);
        }
    }
    logits_.assign(contexts_.size() * static_cast<size_t>(n_entries_), 0.0);
}

int CatalogPolicy::context_index(const std::string& context) const {
    auto it = context_index_.find(context);
    if (it == context_index_.end()) {
        throw std::invalid_argument("policy: unknown catalog context " + context);
    }
    return it->second;
}

std::string CatalogPolicy::entry_text(const std::string& context, int entry) const {
    if (entry < 0 || entry >= n_entries_) {
        throw std::invalid_argument("policy: catalog entry out of range");
    }
    context_index(context);  // validate
    return entry_text_(context, entry);
}

std::vector<double> CatalogPolicy::log_softmax(int ctx_index) const {
    return row_log_softmax(std::span<const double>(
        logits_.data() + static_cast<size_t>(ctx_index) * static_cast<size_t>(n_entries_),
        static_cast<size_t>(n_entries_)));
}

std::vector<double> CatalogPolicy::entry_probs(const std::string& context) const {
    std::vector<double> lp = log_softmax(context_index(context));
    for (double& v : lp) v = std::exp(v);
    return lp;
}

Generation CatalogPolicy::generate(const std::string& context, double temperature, int max_len,
                                   Rng& rng) const {
    if (max_len < 1) throw std::invalid_argument("policy: max_len must be >= 1");
    int ci = context_index(context);
    std::span<const double> row(
        logits_.data() + static_cast<size_t>(ci) * static_cast<size_t>(n_entries_),
        static_cast<size_t>(n_entries_));
    int tok = sample_row(row, temperature, rng);
    Generation g;
    g.tokens = {tok};
    g.logprobs = {log_softmax(ci)[static_cast<size_t>(tok)]};
    g.truncated = false;  // catalog outputs are single complete choices
    return g;
}

std::vector<double> CatalogPolicy::sequence_logprobs(const std::string& context,
                                                     const TokenSeq& tokens) const {
    std::vector<double> lp = log_softmax(context_index(context));
    std::vector<double> out;
    out.reserve(tokens.size());
    for (int t : tokens) {
        if (t < 0 || t >= n_entries_) {
            throw std::invalid_argument("policy: catalog token out of range");
        }
        out.push_back(lp[static_cast<size_t>(t)]);
    }
    return out;
}

std::vector<double> CatalogPolicy::next_logprobs(const std::string& context,
                                                 const TokenSeq&) const {
    return log_softmax(context_index(context));  // memoryless categorical
}

void CatalogPolicy::add_logprob_grad(const std::string& context, const TokenSeq& tokens,
                                     std::span<const double> coeffs,
                                     std::vector<double>& grad) const {
    if (coeffs.size() != tokens.size()) {
        throw std::invalid_argument("policy: one gradient coefficient per token required");
    }
    if (grad.size() != logits_.size()) {
        throw std::invalid_argument("policy: gradient buffer size mismatch");
    }
    int ci = context_index(context);
    std::vector<double> lp = log_softmax(ci);
    size_t base = static_cast<size_t>(ci) * static_cast<size_t>(n_entries_);
    // ∂ log p_j / ∂ l_k = δ_jk − p_k
    for (size_t t = 0; t < tokens.size(); ++t) {
        int tok = tokens[t];
        if (tok < 0 || tok >= n_entries_) {
            throw std::invalid_argument("policy: catalog token out of range");
        }
        double c = coeffs[t];
        if (c == 0.0) continue;
        for (int k = 0; k < n_entries_; ++k) {
            grad[base + static_cast<size_t>(k)] -= c * std::exp(lp[static_cast<size_t>(k)]);
        }
        grad[base + static_cast<size_t>(tok)] += c;
    }
}

void CatalogPolicy::add_step_dist_grad(const std::string& context, const TokenSeq&,
                                       std::span<const double> coeffs,
                                       std::vector<double>& grad) const {
    if (static_cast<int>(coeffs.size()) != n_entries_) {
        throw std::invalid_argument("policy: step-distribution coefficients must cover the vocabulary");
    }
    if (grad.size() != logits_.size()) {
        throw std::invalid_argument("policy: gradient buffer size mismatch");
    }
    int ci = context_index(context);
    std::vector<double> lp = log_softmax(ci);
    size_t base = static_cast<size_t>(ci) * static_cast<size_t>(n_entries_);
    double coeff_sum = 0.0;
    for (double c : coeffs) coeff_sum += c;
    // Σ_v c_v ∂ log p_v / ∂ l_k = c_k − p_k Σ_v c_v
    for (int k = 0; k < n_entries_; ++k) {
        grad[base + static_cast<size_t>(k)] +=
            coeffs[static_cast<size_t>(k)] - std::exp(lp[static_cast<size_t>(k)]) * coeff_sum;
    }
}

std::unique_ptr<Policy> CatalogPolicy::clone() const {
    auto copy = std::make_unique<CatalogPolicy>(contexts_, n_entries_, entry_text_);
    copy->logits_ = logits_;
    return copy;
}

std::string CatalogPolicy::decode(const std::string& context, const TokenSeq& tokens) const {
    std::string out;
    for (size_t t = 0; t < tokens.size(); ++t) {
        if (t) out += "\n";
        out += entry_text(context, tokens[t]);
    }
    return out;
}

std::optional<TokenSeq> CatalogPolicy::tokenize(const std::string& context,
                                                const std::string& text) const {
    for (int j = 0; j < n_entries_; ++j) {
        if (entry_text_(context, j) == text) return TokenSeq{j};
    }
    return std::nullopt;
}

// ---------------------------------------------------------------------------
// TinyLMPolicy

TinyLMPolicy::TinyLMPolicy() {
    symbols_.push_back("");  // slot 0: EOS marker, never printed
    auto add = [&](const std::string& s) { symbols_.push_back(s); };
    add("<visual preference profile>");
    add("</visual preference profile>");
    add("<visual non-preference profile>");
    add("</visual non-preference profile>");
    add("<think>");
    add("</think>");
    add("<answer>");
    add("</answer>");
    add("Dimension: ");
    add("Total");
    add(" | Image 1: ");
    add(" | Image 2: ");
    add("Image 1");
    add("Image 2");
    add("/10");
    add("/50");
    add("art style");
    add("color");
    add("detail");
    add("art medium");
    add("saturation");
    add(": ");
    add("; ");
    add("\n");
    add(" ");
    add(".");
    add(",");
    add("-");
    for (char c = '0'; c <= '9'; ++c) add(std::string(1, c));
    for (char c = 'a'; c <= 'z'; ++c) add(std::string(1, c));
    n_symbols_ = static_cast<int>(symbols_.size());
    // rows: previous symbol (row kEos doubles as start-of-sequence)
    logits_.assign(static_cast<size_t>(n_symbols_) * static_cast<size_t>(n_symbols_), 0.0);
}

int TinyLMPolicy::prev_row(const TokenSeq& prefix) const {
    if (prefix.empty()) return kEos;
    int last = prefix.back();
    if (last < 0 || last >= n_symbols_) {
        throw std::invalid_argument("policy: tiny-lm token out of range");
    }
    return last;
}

Generation TinyLMPolicy::generate(const std::string&, double temperature, int max_len,
                                  Rng& rng) const {
    if (max_len < 1) throw std::invalid_argument("policy: max_len must be >= 1");
    Generation g;
    int prev = kEos;
    for (int step = 0; step < max_len; ++step) {
        std::span<const double> row(
            logits_.data() + static_cast<size_t>(prev) * static_cast<size_t>(n_symbols_),
            static_cast<size_t>(n_symbols_));
        int tok = sample_row(row, temperature, rng);
        g.logprobs.push_back(row_log_softmax(row)[static_cast<size_t>(tok)]);
        g.tokens.push_back(tok);
        if (tok == kEos) return g;
        prev = tok;
    }
    g.truncated = true;  // ran out of budget before EOS
    return g;
}

std::vector<double> TinyLMPolicy::sequence_logprobs(const std::string&,
                                                    const TokenSeq& tokens) const {
    std::vector<double> out;
    out.reserve(tokens.size());
    int prev = kEos;
    for (int t : tokens) {
        if (t < 0 || t >= n_symbols_) {
            throw std::invalid_argument("policy: tiny-lm token out of range");
        }
        std::span<const double> row(
            logits_.data() + static_cast<size_t>(prev) * static_cast<size_t>(n_symbols_),
            static_cast<size_t>(n_symbols_));
        out.push_back(row_log_softmax(row)[static_cast<size_t>(t)]);
        prev = t;
    }
    return out;
}

std::vector<double> TinyLMPolicy::next_logprobs(const std::string&, const TokenSeq& prefix) const {
    int prev = prev_row(prefix);
    return row_log_softmax(std::span<const double>(
        logits_.data() + static_cast<size_t>(prev) * static_cast<size_t>(n_symbols_),
        static_cast<size_t>(n_symbols_)));
}

void TinyLMPolicy::add_logprob_grad(const std::string&, const TokenSeq& tokens,
                                    std::span<const double> coeffs,
                                    std::vector<double>& grad) const {
    if (coeffs.size() != tokens.size()) {
        throw std::invalid_argument("policy: one gradient coefficient per token required");
    }
    if (grad.size() != logits_.size()) {
        throw std::invalid_argument("policy: gradient buffer size mismatch");
    }
    int prev = kEos;
    for (size_t t = 0; t < tokens.size(); ++t) {
        int tok = tokens[t];
        if (tok < 0 || tok >= n_symbols_) {
            throw std::invalid_argument("policy: tiny-lm token out of range");
        }
        double c = coeffs[t];
        if (c != 0.0) {
            size_t base = static_cast<size_t>(prev) * static_cast<size_t>(n_symbols_);
            std::vector<double> lp = row_log_softmax(std::span<const double>(
                logits_.data() + base, static_cast<size_t>(n_symbols_)));
            for (int k = 0; k < n_symbols_; ++k) {
                grad[base + static_cast<size_t>(k)] -= c * std::exp(lp[static_cast<size_t>(k)]);
            }
            grad[base + static_cast<size_t>(tok)] += c;
        }
        prev = tok;
    }
}

void TinyLMPolicy::add_step_dist_grad(const std::string&, const TokenSeq& prefix,
                                      std::span<const double> coeffs,
                                      std::vector<double>& grad) const {
    if (static_cast<int>(coeffs.size()) != n_symbols_) {
        throw std::invalid_argument("policy: step-distribution coefficients must cover the vocabulary");
    }
    if (grad.size() != logits_.size()) {
        throw std::invalid_argument("policy: gradient buffer size mismatch");
    }
    int prev = prev_row(prefix);
    size_t base = static_cast<size_t>(prev) * static_cast<size_t>(n_symbols_);
    std::vector<double> lp = row_log_softmax(
        std::span<const double>(logits_.data() + base, static_cast<size_t>(n_symbols_)));
    double coeff_sum = 0.0;
    for (double c : coeffs) coeff_sum += c;
    for (int k = 0; k < n_symbols_; ++k) {
        grad[base + static_cast<size_t>(k)] +=
            coeffs[static_cast<size_t>(k)] - std::exp(lp[static_cast<size_t>(k)]) * coeff_sum;
    }
}

std::unique_ptr<Policy> TinyLMPolicy::clone() const { return std::make_unique<TinyLMPolicy>(*this); }

std::string TinyLMPolicy::decode(const std::string&, const TokenSeq& tokens) const {
    std::string out;
    for (int t : tokens) {
        if (t < 0 || t >= n_symbols_) {
            throw std::invalid_argument("policy: tiny-lm token out of range");
        }
        if (t == kEos) break;
        out += symbols_[static_cast<size_t>(t)];
    }
    return out;
}

std::optional<TokenSeq> TinyLMPolicy::tokenize(const std::string&, const std::string& text) const {
    // greedy longest match over the symbol table; terminated by EOS
    TokenSeq tokens;
    size_t pos = 0;
    while (pos < text.size()) {
        int best = -1;
        size_t best_len = 0;
        for (int s = 1; s < n_symbols_; ++s) {
            const std::string& sym = symbols_[static_cast<size_t>(s)];
            if (sym.size() > best_len && text.compare(pos, sym.size(), sym) == 0) {
                best = s;
                best_len = sym.size();
            }
        }
        if (best < 0) return std::nullopt;
        tokens.push_back(best);
        pos += best_len;
    }
    tokens.push_back(kEos);
    return tokens;
}

// ---------------------------------------------------------------------------
// checkpoints

void save_checkpoint(const std::string& path, const Policy& policy, uint64_t config_hash,
                     const std::vector<std::pair<std::string, std::string>>& meta) {
    ordered_json obj = ordered_json::object();
    obj["policy_kind"] = policy.kind();
    obj["config_hash"] = hex64(config_hash);
    obj["n_params"] = policy.parameters().size();
    obj["params"] = ordered_json::array();
    for (double v : policy.parameters()) obj["params"].push_back(v);
    obj["meta"] = ordered_json::object();
    for (const auto& [k, v] : meta) obj["meta"][k] = v;
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("policy: cannot write checkpoint " + path);
    out << obj.dump(2) << "\n";
}

CheckpointInfo load_checkpoint(const std::string& path, Policy& policy) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("policy: cannot open checkpoint " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    try {
        ordered_json obj = ordered_json::parse(buf.str());
        CheckpointInfo info;
        info.kind = obj.at("policy_kind").get<std::string>();
        if (info.kind != policy.kind()) {
            throw std::runtime_error("checkpoint holds a '" + info.kind +
                                     "' policy but a '" + policy.kind() + "' policy was supplied");
        }
        info.config_hash = std::stoull(obj.at("config_hash").get<std::string>(), nullptr, 16);
        const auto& params = obj.at("params");
        std::span<double> dst = policy.parameters();
        if (params.size() != dst.size()) {
            throw std::runtime_error("checkpoint parameter count " + std::to_string(params.size()) +
                                     " does not match policy parameter count " +
                                     std::to_string(dst.size()));
        }
        for (size_t i = 0; i < dst.size(); ++i) dst[i] = params[i].get<double>();
        if (obj.contains("meta")) {
            for (auto it = obj.at("meta").begin(); it != obj.at("meta").end(); ++it) {
                info.meta.emplace_back(it.key(), it.value().get<std::string>());
            }
        }
        return info;
    } catch (const std::exception& e) {
        throw std::runtime_error(std::string("policy: bad checkpoint ") + path + ": " + e.what());
    }
}

}  // namespace preferthinker::policy
