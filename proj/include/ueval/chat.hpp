#pragma once

// ueval/chat.hpp — chat-completion backend client (OpenAI-compatible wire).

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

namespace ueval {

struct ChatMessage {
    std::string role;  // "system" | "user" | "assistant"
    std::string content;
};

struct ChatRequest {
    std::vector<ChatMessage> messages;
    double temperature = 0.0;
};

class ChatClient {
public:
    virtual ~ChatClient() = default;
    // Returns the assistant's reply text. Throws TransportError on network
    // failure and ContractError on an unusable response body.
    virtual std::string complete(const ChatRequest& request) = 0;
};

struct ChatBackendConfig {
    std::string base_url;  // e.g. "http://localhost:8000"
    std::string model;
    double temperature_brainstorm = 0.7;
    double temperature_rerank = 0.0;
    int max_retries = 1;     // protocol-level re-asks on schema violations
    int timeout_ms = 30000;
    std::string api_key_env = "UEVAL_CHAT_API_KEY";

    void validate() const;
};

// POST {base_url}/v1/chat/completions with {model, messages, temperature};
// reads choices[0].message.content. Bearer auth from the configured
// environment variable when set. Network errors and 5xx responses are
// retried with backoff before surfacing as TransportError.
class HttpChatClient : public ChatClient {
public:
    explicit HttpChatClient(ChatBackendConfig config);
    ~HttpChatClient() override;

    std::string complete(const ChatRequest& request) override;

private:
    ChatBackendConfig config_;
    std::string api_key_;
};

}  // namespace ueval
