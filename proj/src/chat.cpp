#include "ueval/chat.hpp"

#include "ueval/error.hpp"
#include "ueval/http_util.hpp"

#include <httplib.h>
#include <nlohmann/json.hpp>

#include <chrono>
#include <cstdlib>
#include <thread>

namespace ueval {

void ChatBackendConfig::validate() const {
    if (base_url.empty()) throw ConfigError("chat.base_url must be set");
    if (max_retries < 0) throw ConfigError("chat.max_retries must be >= 0");
    if (timeout_ms <= 0) throw ConfigError("chat.timeout_ms must be > 0");
}

HttpChatClient::HttpChatClient(ChatBackendConfig config) : config_(std::move(config)) {
    config_.validate();
    if (!config_.api_key_env.empty()) {
        if (const char* key = std::getenv(config_.api_key_env.c_str())) api_key_ = key;
    }
}

HttpChatClient::~HttpChatClient() = default;

std::string HttpChatClient::complete(const ChatRequest& request) {
    nlohmann::json body;
    body["model"] = config_.model;
    body["temperature"] = request.temperature;
    auto& messages = body["messages"] = nlohmann::json::array();
    for (const auto& m : request.messages) {
        messages.push_back({{"role", m.role}, {"content", m.content}});
    }

    httplib::Headers headers;
    if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);

    // Transport retries (connection failures, 5xx) are separate from the
    // protocol-level re-ask loop; 3 attempts with linear backoff.
    std::string last_error;
    for (int attempt = 0; attempt < 3; ++attempt) {
        if (attempt > 0) std::this_thread::sleep_for(std::chrono::milliseconds(50 * attempt));
        auto client = make_http_client(config_.base_url, config_.timeout_ms);
        auto res = client->Post("/v1/chat/completions", headers, body.dump(),
                                "application/json");
        if (!res) {
            last_error = "connection failed: " + httplib::to_string(res.error());
            continue;
        }
        if (res->status >= 500) {
            last_error = "server error " + std::to_string(res->status);
            continue;
        }
        if (res->status != 200) {
            throw TransportError("chat endpoint returned HTTP " +
                                 std::to_string(res->status) + ": " + res->body);
        }
        nlohmann::json doc;
        try {
            doc = nlohmann::json::parse(res->body);
        } catch (const nlohmann::json::parse_error&) {
            throw ContractError("chat endpoint returned non-JSON body");
        }
        try {
            return doc.at("choices").at(0).at("message").at("content").get<std::string>();
        } catch (const nlohmann::json::exception&) {
            throw ContractError("chat response missing choices[0].message.content");
        }
    }
    throw TransportError("chat endpoint unreachable: " + last_error);
}

}  // namespace ueval
