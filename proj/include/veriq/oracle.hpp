#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "veriq/sha256.hpp"
#include "veriq/text.hpp"
#include "veriq/value.hpp"

namespace veriq {

enum class ReturnType { Bool, Int, Real, Enum, Text };

struct ReturnSpec {
    ReturnType type = ReturnType::Bool;
    std::vector<std::string> labels;  // Enum only

    friend bool operator==(const ReturnSpec&, const ReturnSpec&) = default;
};

// One question inside a request. Plain semantic evaluations carry a single
// part; fused operators carry one part per packed prompt.
struct PromptPart {
    std::string key;                            // answer key in the response
    std::string template_id;                    // prompt template before substitution
    std::map<std::string, std::string> fields;  // placeholder -> substituted value
    ReturnSpec ret;
};

struct OracleRequest {
    std::string model;
    double temperature = 0.0;
    std::string rendered_prompt;  // exact cache-key component
    std::vector<PromptPart> parts;

    std::string cache_key() const {
        std::string t = std::to_string(temperature);
        return model + "\x1f" + t + "\x1f" + rendered_prompt;
    }
};

struct BackendReply {
    std::string text;
    std::int64_t input_tokens = 0;
    std::int64_t output_tokens = 0;
};

struct OracleResponse {
    std::string raw;
    bool from_cache = false;
    std::int64_t input_tokens = 0;
    std::int64_t output_tokens = 0;
};

struct OracleValue {
    ReturnType type = ReturnType::Bool;
    bool b = false;
    std::int64_t i = 0;
    double r = 0.0;
    std::string s;

    static OracleValue boolean(bool v) { OracleValue x; x.type = ReturnType::Bool; x.b = v; return x; }
    static OracleValue integer(std::int64_t v) { OracleValue x; x.type = ReturnType::Int; x.i = v; return x; }
    static OracleValue real(double v) { OracleValue x; x.type = ReturnType::Real; x.r = v; return x; }
    static OracleValue label(std::string v, ReturnType t = ReturnType::Enum) {
        OracleValue x; x.type = t; x.s = std::move(v); return x;
    }
};

inline std::optional<OracleValue> parse_typed(const std::string& text, const ReturnSpec& spec) {
    std::string t = trim(text);
    switch (spec.type) {
        case ReturnType::Bool: {
            std::string low = to_lower(t);
            if (low == "true" || low == "yes") return OracleValue::boolean(true);
            if (low == "false" || low == "no") return OracleValue::boolean(false);
            return std::nullopt;
        }
        case ReturnType::Int: {
            try {
                size_t idx = 0;
                long long v = std::stoll(t, &idx);
                if (idx != t.size()) return std::nullopt;
                return OracleValue::integer(v);
            } catch (...) { return std::nullopt; }
        }
        case ReturnType::Real: {
            try {
                size_t idx = 0;
                double v = std::stod(t, &idx);
                if (idx != t.size()) return std::nullopt;
                return OracleValue::real(v);
            } catch (...) { return std::nullopt; }
        }
        case ReturnType::Enum: {
            for (const auto& l : spec.labels)
                if (to_lower(l) == to_lower(t)) return OracleValue::label(l);
            return std::nullopt;
        }
        case ReturnType::Text:
            return OracleValue::label(text, ReturnType::Text);
    }
    return std::nullopt;
}

// Parses the keyed JSON reply of a fused request into typed values.
inline std::optional<std::map<std::string, OracleValue>> parse_fused(
    const std::string& raw, const std::vector<PromptPart>& parts) {
    nlohmann::json j = nlohmann::json::parse(raw, nullptr, false);
    if (j.is_discarded() || !j.is_object()) return std::nullopt;
    std::map<std::string, OracleValue> out;
    for (const auto& p : parts) {
        auto it = j.find(p.key);
        if (it == j.end()) return std::nullopt;
        std::string as_text;
        if (it->is_string()) as_text = it->get<std::string>();
        else as_text = it->dump();
        auto v = parse_typed(as_text, p.ret);
        if (!v) return std::nullopt;
        out.emplace(p.key, *v);
    }
    return out;
}

class OracleBackend {
public:
    virtual ~OracleBackend() = default;
    virtual std::string name() const = 0;
    // Replies must come back in request order. Implementations may process
    // the batch concurrently internally.
    virtual std::vector<BackendReply> complete(const std::vector<OracleRequest>& requests) = 0;
};

// ---- scripted backend ----------------------------------------------------

// Deterministic stand-in for an LLM. Boolean/enum/int answers come from
// keyword rule tables over a named field; free-text completions come from
// exact-match lookup tables. Every template used at runtime must be covered.
struct ScriptedRule {
    enum class Kind { Bool, Enum, Int, Completion };
    Kind kind = Kind::Bool;
    std::string field;  // which placeholder the rule inspects

    // Bool
    std::vector<std::string> any_of;
    bool negate = false;

    // Enum: first matching case wins, else fallback.
    struct EnumCase { std::vector<std::string> any_of; std::string value; };
    std::vector<EnumCase> cases;
    std::string fallback;

    // Int
    std::int64_t const_int = 0;
    bool count_matches = false;

    // Completion: exact field value -> canned text.
    std::map<std::string, std::string> completions;
    std::string completion_default;  // empty means: missing case is an error

    nlohmann::json to_json() const {
        nlohmann::json j;
        switch (kind) {
            case Kind::Bool: j["kind"] = "bool"; break;
            case Kind::Enum: j["kind"] = "enum"; break;
            case Kind::Int: j["kind"] = "int"; break;
            case Kind::Completion: j["kind"] = "completion"; break;
        }
        j["field"] = field;
        if (kind == Kind::Bool) {
            j["any_of"] = any_of;
            j["negate"] = negate;
        } else if (kind == Kind::Enum) {
            nlohmann::json cs = nlohmann::json::array();
            for (const auto& c : cases) cs.push_back({{"any_of", c.any_of}, {"value", c.value}});
            j["cases"] = cs;
            j["fallback"] = fallback;
        } else if (kind == Kind::Int) {
            j["const"] = const_int;
            j["count_matches"] = count_matches;
            j["any_of"] = any_of;
        } else {
            j["completions"] = completions;
            j["default"] = completion_default;
        }
        return j;
    }

    static ScriptedRule from_json(const nlohmann::json& j) {
        ScriptedRule r;
        std::string k = j.at("kind").get<std::string>();
        r.field = j.value("field", "");
        if (k == "bool") {
            r.kind = Kind::Bool;
            r.any_of = j.at("any_of").get<std::vector<std::string>>();
            r.negate = j.value("negate", false);
        } else if (k == "enum") {
            r.kind = Kind::Enum;
            for (const auto& c : j.at("cases"))
                r.cases.push_back({c.at("any_of").get<std::vector<std::string>>(),
                                   c.at("value").get<std::string>()});
            r.fallback = j.value("fallback", "");
        } else if (k == "int") {
            r.kind = Kind::Int;
            r.const_int = j.value("const", 0);
            r.count_matches = j.value("count_matches", false);
            if (j.contains("any_of")) r.any_of = j.at("any_of").get<std::vector<std::string>>();
        } else if (k == "completion") {
            r.kind = Kind::Completion;
            r.completions = j.at("completions").get<std::map<std::string, std::string>>();
            r.completion_default = j.value("default", "");
        } else {
            throw Error("scripted rule: unknown kind '" + k + "'");
        }
        return r;
    }
};

class ScriptedBackend final : public OracleBackend {
public:
    ScriptedBackend() = default;

    void add_rule(std::string template_id, ScriptedRule rule) {
        rules_[std::move(template_id)] = std::move(rule);
    }
    bool has_rule(const std::string& template_id) const { return rules_.count(template_id) > 0; }

    std::string name() const override { return "scripted"; }

    std::vector<BackendReply> complete(const std::vector<OracleRequest>& requests) override {
        std::vector<BackendReply> out;
        out.reserve(requests.size());
        for (const auto& req : requests) {
            std::string text;
            if (req.parts.size() == 1) {
                text = answer(req.parts[0]);
            } else {
                nlohmann::json j = nlohmann::json::object();
                for (const auto& p : req.parts) j[p.key] = typed_json(p);
                text = j.dump();
            }
            BackendReply r;
            r.text = std::move(text);
            r.input_tokens = synth_tokens(req.rendered_prompt);
            r.output_tokens = synth_tokens(r.text);
            out.push_back(std::move(r));
        }
        return out;
    }

    nlohmann::json to_json() const {
        nlohmann::json rules = nlohmann::json::object();
        for (const auto& [tid, rule] : rules_) rules[tid] = rule.to_json();
        return {{"rules", rules}};
    }

    static std::shared_ptr<ScriptedBackend> from_json(const nlohmann::json& j) {
        auto b = std::make_shared<ScriptedBackend>();
        for (auto it = j.at("rules").begin(); it != j.at("rules").end(); ++it)
            b->add_rule(it.key(), ScriptedRule::from_json(it.value()));
        return b;
    }

    static std::int64_t synth_tokens(const std::string& s) {
        return static_cast<std::int64_t>((s.size() + 3) / 4);
    }

private:
    const ScriptedRule& rule_for(const std::string& template_id) const {
        auto it = rules_.find(template_id);
        if (it == rules_.end())
            throw Error("scripted oracle: no rule for template: " + template_id);
        return it->second;
    }

    static const std::string& field_of(const PromptPart& p, const std::string& name) {
        auto it = p.fields.find(name);
        if (it == p.fields.end()) {
            static const std::string empty;
            return empty;
        }
        return it->second;
    }

    nlohmann::json typed_json(const PromptPart& p) const {
        std::string a = answer(p);
        switch (p.ret.type) {
            case ReturnType::Bool: return a == "true";
            case ReturnType::Int: return std::stoll(a);
            case ReturnType::Real: return std::stod(a);
            default: return a;
        }
    }

    std::string answer(const PromptPart& p) const {
        const ScriptedRule& r = rule_for(p.template_id);
        const std::string& value = field_of(p, r.field);
        switch (r.kind) {
            case ScriptedRule::Kind::Bool: {
                bool hit = false;
                for (const auto& k : r.any_of)
                    if (contains_ci(value, k)) { hit = true; break; }
                if (r.negate) hit = !hit;
                return hit ? "true" : "false";
            }
            case ScriptedRule::Kind::Enum: {
                for (const auto& c : r.cases)
                    for (const auto& k : c.any_of)
                        if (contains_ci(value, k)) return c.value;
                return r.fallback;
            }
            case ScriptedRule::Kind::Int: {
                if (!r.count_matches) return std::to_string(r.const_int);
                std::int64_t n = 0;
                for (const auto& k : r.any_of)
                    if (contains_ci(value, k)) ++n;
                return std::to_string(n);
            }
            case ScriptedRule::Kind::Completion: {
                auto it = r.completions.find(value);
                if (it != r.completions.end()) return it->second;
                if (!r.completion_default.empty()) return r.completion_default;
                throw Error("scripted oracle: no completion case for value: " + value);
            }
        }
        throw Error("scripted oracle: bad rule");
    }

    std::map<std::string, ScriptedRule> rules_;
};

// Cache-only backend: any call that reaches it is a bug in replay mode.
class ReplayBackend final : public OracleBackend {
public:
    std::string name() const override { return "replay"; }
    std::vector<BackendReply> complete(const std::vector<OracleRequest>& requests) override {
        throw Error("replay backend: cache miss for prompt: " +
                    (requests.empty() ? std::string() : requests[0].rendered_prompt));
    }
};

// ---- prompt cache ----------------------------------------------------------

// Disk-backed response cache, keyed by (model, temperature, prompt). Entries
// live in append-only JSONL segments under the cache directory; an in-memory
// SHA-256 index resolves lookups, with collisions settled by full key
// comparison. Corrupt lines are skipped on load.
class PromptCache {
public:
    explicit PromptCache(std::filesystem::path dir) : dir_(std::move(dir)) {
        std::filesystem::create_directories(dir_);
        load();
    }

    std::optional<BackendReply> get(const OracleRequest& req) {
        std::lock_guard<std::mutex> lk(mu_);
        auto it = index_.find(digest_key(req.cache_key()));
        if (it == index_.end()) return std::nullopt;
        for (const auto& slot : it->second) {
            if (entries_[slot].key == req.cache_key()) return entries_[slot].reply;
        }
        return std::nullopt;
    }

    void put(const OracleRequest& req, const BackendReply& reply) {
        std::lock_guard<std::mutex> lk(mu_);
        std::string key = req.cache_key();
        auto dk = digest_key(key);
        auto it = index_.find(dk);
        if (it != index_.end()) {
            for (auto slot : it->second)
                if (entries_[slot].key == key) return;  // already cached
        }
        nlohmann::json j = {{"m", req.model},
                            {"t", req.temperature},
                            {"p", req.rendered_prompt},
                            {"r", reply.text},
                            {"ti", reply.input_tokens},
                            {"to", reply.output_tokens}};
        {
            std::ofstream out(segment_path(), std::ios::app);
            out << j.dump() << "\n";
        }
        entries_.push_back({std::move(key), reply});
        index_[dk].push_back(entries_.size() - 1);
    }

    size_t entry_count() const {
        std::lock_guard<std::mutex> lk(mu_);
        return entries_.size();
    }

    void clear() {
        std::lock_guard<std::mutex> lk(mu_);
        entries_.clear();
        index_.clear();
        std::error_code ec;
        for (const auto& e : std::filesystem::directory_iterator(dir_, ec))
            if (e.path().extension() == ".jsonl") std::filesystem::remove(e.path(), ec);
    }

    const std::filesystem::path& directory() const { return dir_; }

private:
    struct Entry {
        std::string key;
        BackendReply reply;
    };

    static std::string digest_key(const std::string& key) { return Sha256::hex(key); }

    std::filesystem::path segment_path() const { return dir_ / "segment-000.jsonl"; }

    void load() {
        std::error_code ec;
        std::vector<std::filesystem::path> segs;
        for (const auto& e : std::filesystem::directory_iterator(dir_, ec))
            if (e.path().extension() == ".jsonl") segs.push_back(e.path());
        std::sort(segs.begin(), segs.end());
        for (const auto& seg : segs) {
            std::ifstream in(seg);
            std::string line;
            size_t line_no = 0;
            while (std::getline(in, line)) {
                ++line_no;
                if (trim(line).empty()) continue;
                nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
                if (j.is_discarded() || !j.is_object() || !j.contains("m") || !j.contains("p") ||
                    !j.contains("r")) {
                    std::cerr << "[veriq] cache: skipping corrupt entry at " << seg.string() << ":"
                              << line_no << "\n";
                    continue;
                }
                OracleRequest probe;
                probe.model = j["m"].get<std::string>();
                probe.temperature = j.value("t", 0.0);
                probe.rendered_prompt = j["p"].get<std::string>();
                BackendReply reply;
                reply.text = j["r"].get<std::string>();
                reply.input_tokens = j.value("ti", 0);
                reply.output_tokens = j.value("to", 0);
                std::string key = probe.cache_key();
                auto dk = digest_key(key);
                bool dup = false;
                auto it = index_.find(dk);
                if (it != index_.end())
                    for (auto slot : it->second)
                        if (entries_[slot].key == key) dup = true;
                if (dup) continue;
                entries_.push_back({std::move(key), std::move(reply)});
                index_[dk].push_back(entries_.size() - 1);
            }
        }
    }

    std::filesystem::path dir_;
    mutable std::mutex mu_;
    std::vector<Entry> entries_;
    std::unordered_map<std::string, std::vector<size_t>> index_;
};

// ---- cost ledger -----------------------------------------------------------

struct ModelRate {
    double input_per_million = 5.0;
    double output_per_million = 25.0;
};

class CostLedger {
public:
    void set_rate(const std::string& model, ModelRate rate) { rates_[model] = rate; }

    void load_rates(const nlohmann::json& j) {
        for (auto it = j.begin(); it != j.end(); ++it)
            rates_[it.key()] = {it.value().at("input_per_million").get<double>(),
                                it.value().at("output_per_million").get<double>()};
    }

    void add(const std::string& model, std::int64_t in_tokens, std::int64_t out_tokens,
             std::int64_t calls) {
        std::lock_guard<std::mutex> lk(mu_);
        auto& e = per_model_[model];
        e.input_tokens += in_tokens;
        e.output_tokens += out_tokens;
        e.call_count += calls;
    }

    double cost() const {
        std::lock_guard<std::mutex> lk(mu_);
        double total = 0.0;
        for (const auto& [model, e] : per_model_) {
            ModelRate r = rate_for(model);
            total += (static_cast<double>(e.input_tokens) * r.input_per_million +
                      static_cast<double>(e.output_tokens) * r.output_per_million) /
                     1e6;
        }
        return total;
    }

    std::int64_t call_count() const {
        std::lock_guard<std::mutex> lk(mu_);
        std::int64_t n = 0;
        for (const auto& [_, e] : per_model_) n += e.call_count;
        return n;
    }

    std::int64_t input_tokens() const {
        std::lock_guard<std::mutex> lk(mu_);
        std::int64_t n = 0;
        for (const auto& [_, e] : per_model_) n += e.input_tokens;
        return n;
    }

    std::int64_t output_tokens() const {
        std::lock_guard<std::mutex> lk(mu_);
        std::int64_t n = 0;
        for (const auto& [_, e] : per_model_) n += e.output_tokens;
        return n;
    }

private:
    struct Entry {
        std::int64_t input_tokens = 0;
        std::int64_t output_tokens = 0;
        std::int64_t call_count = 0;
    };

    ModelRate rate_for(const std::string& model) const {
        auto it = rates_.find(model);
        return it == rates_.end() ? ModelRate{} : it->second;
    }

    mutable std::mutex mu_;
    std::map<std::string, Entry> per_model_;
    std::map<std::string, ModelRate> rates_;
};

// ---- oracle front ----------------------------------------------------------

// Batching front over a backend: consults the cache first, dispatches unique
// misses, writes replies back, and keeps the cost ledger. One evaluate_batch
// call never puts more requests in flight than it receives, so callers bound
// concurrency by bounding their batch size.
class Oracle {
public:
    Oracle(std::shared_ptr<OracleBackend> backend, std::shared_ptr<PromptCache> cache,
           std::shared_ptr<CostLedger> ledger, bool caching_enabled = true)
        : backend_(std::move(backend)),
          cache_(std::move(cache)),
          ledger_(std::move(ledger)),
          caching_(caching_enabled) {}

    std::vector<OracleResponse> evaluate_batch(const std::vector<OracleRequest>& requests) {
        std::vector<OracleResponse> out(requests.size());
        std::vector<size_t> miss_idx;
        std::map<std::string, size_t> miss_by_key;  // dedup identical prompts in a batch
        std::vector<OracleRequest> miss_reqs;

        for (size_t i = 0; i < requests.size(); ++i) {
            ++stats_.oracle_calls;
            if (caching_ && cache_) {
                if (auto hit = cache_->get(requests[i])) {
                    out[i].raw = hit->text;
                    out[i].from_cache = true;
                    continue;
                }
            }
            auto it = miss_by_key.find(requests[i].cache_key());
            if (it == miss_by_key.end()) {
                miss_by_key.emplace(requests[i].cache_key(), miss_reqs.size());
                miss_reqs.push_back(requests[i]);
            }
            miss_idx.push_back(i);
        }

        if (!miss_reqs.empty()) {
            auto replies = backend_->complete(miss_reqs);
            if (replies.size() != miss_reqs.size())
                throw Error("oracle backend returned wrong reply count");
            ++stats_.batch_rounds;
            stats_.backend_calls += static_cast<std::int64_t>(miss_reqs.size());
            stats_.max_inflight =
                std::max<std::int64_t>(stats_.max_inflight, static_cast<std::int64_t>(miss_reqs.size()));
            for (size_t k = 0; k < miss_reqs.size(); ++k) {
                stats_.input_tokens += replies[k].input_tokens;
                stats_.output_tokens += replies[k].output_tokens;
                if (ledger_)
                    ledger_->add(miss_reqs[k].model, replies[k].input_tokens,
                                 replies[k].output_tokens, 1);
                if (caching_ && cache_) cache_->put(miss_reqs[k], replies[k]);
            }
            for (size_t i : miss_idx) {
                size_t k = miss_by_key.at(requests[i].cache_key());
                out[i].raw = replies[k].text;
                out[i].input_tokens = replies[k].input_tokens;
                out[i].output_tokens = replies[k].output_tokens;
            }
        }
        return out;
    }

    OracleResponse evaluate_one(const OracleRequest& request) {
        return evaluate_batch({request})[0];
    }

    // Bypasses the cache read (a cached reply may be the malformed one being
    // retried) but still records and writes back the fresh reply.
    OracleResponse evaluate_one_fresh(const OracleRequest& request) {
        ++stats_.oracle_calls;
        auto replies = backend_->complete({request});
        if (replies.size() != 1) throw Error("oracle backend returned wrong reply count");
        ++stats_.batch_rounds;
        ++stats_.backend_calls;
        stats_.max_inflight = std::max<std::int64_t>(stats_.max_inflight, 1);
        stats_.input_tokens += replies[0].input_tokens;
        stats_.output_tokens += replies[0].output_tokens;
        if (ledger_) ledger_->add(request.model, replies[0].input_tokens, replies[0].output_tokens, 1);
        if (caching_ && cache_) cache_->put(request, replies[0]);
        OracleResponse out;
        out.raw = replies[0].text;
        out.input_tokens = replies[0].input_tokens;
        out.output_tokens = replies[0].output_tokens;
        return out;
    }

    struct Stats {
        std::int64_t oracle_calls = 0;   // requests seen (cache hits included)
        std::int64_t backend_calls = 0;  // requests that reached the backend
        std::int64_t batch_rounds = 0;   // backend round-trips
        std::int64_t max_inflight = 0;   // largest single dispatch
        std::int64_t input_tokens = 0;
        std::int64_t output_tokens = 0;
    };

    const Stats& stats() const { return stats_; }
    void reset_stats() { stats_ = Stats{}; }
    OracleBackend& backend() { return *backend_; }
    std::shared_ptr<CostLedger> ledger() const { return ledger_; }

private:
    std::shared_ptr<OracleBackend> backend_;
    std::shared_ptr<PromptCache> cache_;
    std::shared_ptr<CostLedger> ledger_;
    bool caching_;
    Stats stats_;
};

}  // namespace veriq
