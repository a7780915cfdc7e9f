#pragma once

#include <chrono>
#include <cstdlib>
#include <string>
#include <thread>
#include <vector>

#include <httplib.h>
#include <json.hpp>

#include "veriq/oracle.hpp"

namespace veriq {

// Minimal chat-completions client. The endpoint and credentials come from
// configuration/environment; temperature rides along with each request.
// Transport failures and 5xx replies retry with exponential backoff.
struct RemoteBackendConfig {
    std::string host = "127.0.0.1";
    int port = 8080;
    std::string path = "/v1/chat/completions";
    std::string api_key_env = "VERIQ_API_KEY";
    int max_retries = 3;
    int backoff_ms = 200;
    int timeout_s = 60;

    static RemoteBackendConfig from_env() {
        RemoteBackendConfig cfg;
        if (const char* host = std::getenv("VERIQ_ENDPOINT_HOST")) cfg.host = host;
        if (const char* port = std::getenv("VERIQ_ENDPOINT_PORT")) cfg.port = std::atoi(port);
        if (const char* path = std::getenv("VERIQ_ENDPOINT_PATH")) cfg.path = path;
        return cfg;
    }
};

class RemoteBackend final : public OracleBackend {
public:
    explicit RemoteBackend(RemoteBackendConfig cfg) : cfg_(std::move(cfg)) {}

    std::string name() const override { return "remote"; }

    std::vector<BackendReply> complete(const std::vector<OracleRequest>& requests) override {
        std::vector<BackendReply> out;
        out.reserve(requests.size());
        for (const auto& req : requests) out.push_back(complete_one(req));
        return out;
    }

private:
    BackendReply complete_one(const OracleRequest& req) {
        nlohmann::json body = {
            {"model", req.model},
            {"temperature", req.temperature},
            {"messages", nlohmann::json::array({nlohmann::json{
                             {"role", "user"}, {"content", req.rendered_prompt}}})}};
        std::string payload = body.dump();

        httplib::Client client(cfg_.host, cfg_.port);
        client.set_read_timeout(cfg_.timeout_s, 0);
        httplib::Headers headers;
        if (const char* key = std::getenv(cfg_.api_key_env.c_str()))
            headers.emplace("Authorization", std::string("Bearer ") + key);

        std::string last_error;
        for (int attempt = 0; attempt <= cfg_.max_retries; ++attempt) {
            if (attempt > 0)
                std::this_thread::sleep_for(
                    std::chrono::milliseconds(cfg_.backoff_ms << (attempt - 1)));
            auto res = client.Post(cfg_.path, headers, payload, "application/json");
            if (!res) {
                last_error = "transport failure";
                continue;
            }
            if (res->status >= 500) {
                last_error = "server status " + std::to_string(res->status);
                continue;
            }
            if (res->status != 200)
                throw Error("remote backend: status " + std::to_string(res->status) + ": " +
                            res->body);
            nlohmann::json j = nlohmann::json::parse(res->body, nullptr, false);
            if (j.is_discarded())
                throw Error("remote backend: unparseable response body");
            BackendReply reply;
            reply.text = j.at("choices").at(0).at("message").at("content").get<std::string>();
            if (j.contains("usage")) {
                reply.input_tokens = j["usage"].value("prompt_tokens", 0);
                reply.output_tokens = j["usage"].value("completion_tokens", 0);
            }
            return reply;
        }
        throw Error("remote backend: giving up after " + std::to_string(cfg_.max_retries + 1) +
                    " attempts (" + last_error + ")");
    }

    RemoteBackendConfig cfg_;
};

}  // namespace veriq
