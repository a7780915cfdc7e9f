#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>

#include "veriq/oracle.hpp"

using namespace veriq;

namespace {

OracleRequest bool_request(const std::string& text) {
    OracleRequest req;
    req.model = "scripted";
    req.rendered_prompt = "Is " + text + " a complaint?";
    PromptPart part;
    part.key = "a1";
    part.template_id = "Is {text} a complaint?";
    part.fields = {{"text", text}};
    part.ret.type = ReturnType::Bool;
    req.parts.push_back(std::move(part));
    return req;
}

std::shared_ptr<ScriptedBackend> complaint_backend() {
    auto b = std::make_shared<ScriptedBackend>();
    ScriptedRule r;
    r.kind = ScriptedRule::Kind::Bool;
    r.field = "text";
    r.any_of = {"rude"};
    b->add_rule("Is {text} a complaint?", r);
    return b;
}

struct TempDir {
    std::filesystem::path path;
    explicit TempDir(const char* name)
        : path(std::filesystem::temp_directory_path() / name) {
        std::filesystem::remove_all(path);
    }
    ~TempDir() { std::filesystem::remove_all(path); }
};

}  // namespace

TEST_CASE("scripted rules answer from tuple fields deterministically") {
    Oracle oracle(complaint_backend(), nullptr, std::make_shared<CostLedger>(), false);
    auto r1 = oracle.evaluate_one(bool_request("the staff was rude"));
    auto r2 = oracle.evaluate_one(bool_request("the staff was rude"));
    CHECK(r1.raw == "true");
    CHECK(r1.raw == r2.raw);
    auto r3 = oracle.evaluate_one(bool_request("all fine"));
    CHECK(r3.raw == "false");
}

TEST_CASE("unknown templates are an error, forcing fixture coverage") {
    Oracle oracle(complaint_backend(), nullptr, std::make_shared<CostLedger>(), false);
    OracleRequest req = bool_request("x");
    req.parts[0].template_id = "Unknown {text} template";
    CHECK_THROWS_AS(oracle.evaluate_one(req), Error);
}

TEST_CASE("typed parsing covers the return types") {
    CHECK(parse_typed("true", {ReturnType::Bool, {}})->b);
    CHECK(parse_typed(" FALSE ", {ReturnType::Bool, {}})->b == false);
    CHECK_FALSE(parse_typed("banana", {ReturnType::Bool, {}}).has_value());
    CHECK(parse_typed("42", {ReturnType::Int, {}})->i == 42);
    CHECK_FALSE(parse_typed("42x", {ReturnType::Int, {}}).has_value());
    CHECK(parse_typed("0.5", {ReturnType::Real, {}})->r == 0.5);
    CHECK(parse_typed("POSITIVE", {ReturnType::Enum, {"POSITIVE", "NEGATIVE"}})->s == "POSITIVE");
    CHECK_FALSE(parse_typed("MEH", {ReturnType::Enum, {"POSITIVE", "NEGATIVE"}}).has_value());
}

TEST_CASE("fused responses parse as keyed JSON records") {
    std::vector<PromptPart> parts(2);
    parts[0].key = "a1";
    parts[0].ret.type = ReturnType::Bool;
    parts[1].key = "a2";
    parts[1].ret.type = ReturnType::Enum;
    parts[1].ret.labels = {"GOOD", "BAD"};
    auto parsed = parse_fused(R"({"a1": true, "a2": "GOOD"})", parts);
    REQUIRE(parsed.has_value());
    CHECK(parsed->at("a1").b);
    CHECK(parsed->at("a2").s == "GOOD");
    CHECK_FALSE(parse_fused(R"({"a1": true})", parts).has_value());  // missing key
    CHECK_FALSE(parse_fused(R"({"a1": 3, "a2": "GOOD"})", parts).has_value());  // mistyped
    CHECK_FALSE(parse_fused("nonsense", parts).has_value());
}

TEST_CASE("cache get/put round-trips and persists across reopen") {
    TempDir dir("veriq_cache_test");
    OracleRequest req = bool_request("the staff was rude");
    BackendReply reply{"true", 10, 1};
    {
        PromptCache cache(dir.path);
        CHECK_FALSE(cache.get(req).has_value());
        cache.put(req, reply);
        auto hit = cache.get(req);
        REQUIRE(hit.has_value());
        CHECK(hit->text == "true");
        CHECK_FALSE(cache.get(bool_request("different")).has_value());
    }
    {
        PromptCache cache(dir.path);  // reopen from disk
        auto hit = cache.get(req);
        REQUIRE(hit.has_value());
        CHECK(hit->text == "true");
        CHECK(cache.entry_count() == 1);
    }
}

TEST_CASE("corrupt cache entries are skipped as misses") {
    TempDir dir("veriq_cache_corrupt_test");
    {
        PromptCache cache(dir.path);
        cache.put(bool_request("the staff was rude"), {"true", 1, 1});
    }
    {
        std::ofstream seg(dir.path / "segment-000.jsonl", std::ios::app);
        seg << "{\"m\": \"trunc";  // torn write
    }
    PromptCache cache(dir.path);
    CHECK(cache.entry_count() == 1);
    CHECK(cache.get(bool_request("the staff was rude")).has_value());
}

TEST_CASE("cached keys are exact strings; temperature is part of the key") {
    TempDir dir("veriq_cache_key_test");
    PromptCache cache(dir.path);
    OracleRequest req = bool_request("x");
    cache.put(req, {"true", 1, 1});
    OracleRequest warm = req;
    warm.temperature = 0.7;
    CHECK_FALSE(cache.get(warm).has_value());
    OracleRequest other_model = req;
    other_model.model = "different-model";
    CHECK_FALSE(cache.get(other_model).has_value());
}

TEST_CASE("batch evaluation consults the cache first") {
    TempDir dir("veriq_cache_batch_test");
    auto cache = std::make_shared<PromptCache>(dir.path);
    Oracle oracle(complaint_backend(), cache, std::make_shared<CostLedger>(), true);

    std::vector<OracleRequest> first = {bool_request("rude a"), bool_request("fine b"),
                                        bool_request("rude c")};
    oracle.evaluate_batch(first);
    CHECK(oracle.stats().backend_calls == 3);

    // 3 requests, 1 new: exactly 2 hits
    std::vector<OracleRequest> second = {bool_request("rude a"), bool_request("fine b"),
                                         bool_request("brand new")};
    auto responses = oracle.evaluate_batch(second);
    CHECK(oracle.stats().backend_calls == 4);
    CHECK(responses[0].from_cache);
    CHECK(responses[1].from_cache);
    CHECK_FALSE(responses[2].from_cache);

    // fully cached batch: zero backend calls
    oracle.evaluate_batch(first);
    CHECK(oracle.stats().backend_calls == 4);

    // identical prompts inside one batch dispatch once
    Oracle fresh(complaint_backend(), nullptr, std::make_shared<CostLedger>(), false);
    std::vector<OracleRequest> dup = {bool_request("same"), bool_request("same")};
    fresh.evaluate_batch(dup);
    CHECK(fresh.stats().backend_calls == 1);
    CHECK(fresh.stats().oracle_calls == 2);
}

TEST_CASE("the replay backend refuses to go past the cache") {
    TempDir dir("veriq_replay_test");
    auto cache = std::make_shared<PromptCache>(dir.path);
    {
        Oracle warm(complaint_backend(), cache, std::make_shared<CostLedger>(), true);
        warm.evaluate_one(bool_request("the staff was rude"));
    }
    Oracle replay(std::make_shared<ReplayBackend>(), cache, std::make_shared<CostLedger>(), true);
    auto hit = replay.evaluate_one(bool_request("the staff was rude"));
    CHECK(hit.raw == "true");
    CHECK(replay.stats().backend_calls == 0);
    CHECK_THROWS_AS(replay.evaluate_one(bool_request("never seen")), Error);
}

TEST_CASE("ledger cost arithmetic matches hand computation") {
    CostLedger ledger;
    ledger.set_rate("large-v1", {5.0, 25.0});
    ledger.add("large-v1", 1000, 200, 3);
    CHECK(ledger.cost() == Catch::Approx(0.01).margin(1e-12));
    CHECK(ledger.call_count() == 3);
    CHECK(ledger.input_tokens() == 1000);
    CHECK(ledger.output_tokens() == 200);
}

TEST_CASE("synthetic token counts follow ceil(chars/4)") {
    CHECK(ScriptedBackend::synth_tokens("abcd") == 1);
    CHECK(ScriptedBackend::synth_tokens("abcde") == 2);
    CHECK(ScriptedBackend::synth_tokens("") == 0);
}

TEST_CASE("sha256 matches the published test vectors") {
    CHECK(Sha256::hex("abc") ==
          "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    CHECK(Sha256::hex("") ==
          "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    CHECK(Sha256::hex("abcdbcdecdefdefgefghfghighijhijkijkljklmklmnlmnomnopnopq") ==
          "248d6a61d20638b8e5c026930c3e6039a33ce45964ff2167f6ecedd419db06c1");
}

TEST_CASE("in-flight dispatch is bounded by the batch size handed in") {
    Oracle oracle(complaint_backend(), nullptr, std::make_shared<CostLedger>(), false);
    std::vector<OracleRequest> batch;
    for (int i = 0; i < 8; ++i) batch.push_back(bool_request("rude " + std::to_string(i)));
    oracle.evaluate_batch(batch);
    CHECK(oracle.stats().max_inflight <= 8);
    CHECK(oracle.stats().batch_rounds == 1);
}

// ---- remote backend over a loopback server ----

#include "veriq/http_backend.hpp"

#include <atomic>
#include <thread>

TEST_CASE("the remote backend speaks chat-completions and retries on 5xx") {
    httplib::Server server;
    std::atomic<int> hits{0};
    server.Post("/v1/chat/completions", [&](const httplib::Request& req, httplib::Response& res) {
        int n = ++hits;
        if (n == 1) {
            res.status = 500;  // first attempt fails, the client must retry
            return;
        }
        nlohmann::json body = nlohmann::json::parse(req.body);
        std::string content = body.at("messages").at(0).at("content").get<std::string>();
        nlohmann::json reply = {
            {"choices",
             nlohmann::json::array(
                 {{{"message",
                    {{"role", "assistant"},
                     {"content", content.find("rude") != std::string::npos ? "true" : "false"}}}}})},
            {"usage", {{"prompt_tokens", 12}, {"completion_tokens", 1}}}};
        res.set_content(reply.dump(), "application/json");
    });
    int port = server.bind_to_any_port("127.0.0.1");
    std::thread run([&] { server.listen_after_bind(); });
    server.wait_until_ready();

    RemoteBackendConfig cfg;
    cfg.port = port;
    cfg.backoff_ms = 1;
    RemoteBackend backend(cfg);
    OracleRequest req = bool_request("the staff was rude");
    auto replies = backend.complete({req});
    REQUIRE(replies.size() == 1);
    CHECK(replies[0].text == "true");
    CHECK(replies[0].input_tokens == 12);
    CHECK(replies[0].output_tokens == 1);
    CHECK(hits.load() == 2);

    server.stop();
    run.join();
}
