#include "ueval/http_backends.hpp"

#include "ueval/error.hpp"
#include "ueval/http_util.hpp"

#include <httplib.h>

#include <cstdlib>

namespace ueval {

namespace {

std::string env_api_key(const std::string& env_name) {
    if (env_name.empty()) return {};
    const char* key = std::getenv(env_name.c_str());
    return key ? key : "";
}

httplib::Headers auth_headers(const std::string& api_key) {
    httplib::Headers headers;
    if (!api_key.empty()) headers.emplace("Authorization", "Bearer " + api_key);
    return headers;
}

httplib::Result post_json(const EndpointConfig& config, const std::string& api_key,
                          const std::string& path, const std::string& body) {
    auto client = make_http_client(config.base_url, config.timeout_ms);
    return client->Post(path, auth_headers(api_key), body, "application/json");
}

nlohmann::json parse_body(const httplib::Result& res, const std::string& endpoint) {
    if (!res) {
        throw TransportError(endpoint + ": connection failed: " +
                             httplib::to_string(res.error()));
    }
    if (res->status != 200) {
        throw TransportError(endpoint + ": HTTP " + std::to_string(res->status));
    }
    try {
        return nlohmann::json::parse(res->body);
    } catch (const nlohmann::json::parse_error&) {
        throw ContractError(endpoint + ": non-JSON response body");
    }
}

}  // namespace

void EndpointConfig::validate() const {
    if (base_url.empty()) throw ConfigError("endpoint base_url must be set");
    if (timeout_ms <= 0) throw ConfigError("endpoint timeout_ms must be > 0");
}

std::string base64_encode(std::span<const std::uint8_t> bytes) {
    static constexpr char table[] =
        "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
    std::string out;
    out.reserve((bytes.size() + 2) / 3 * 4);
    std::size_t i = 0;
    for (; i + 3 <= bytes.size(); i += 3) {
        const std::uint32_t v = (bytes[i] << 16) | (bytes[i + 1] << 8) | bytes[i + 2];
        out.push_back(table[(v >> 18) & 0x3F]);
        out.push_back(table[(v >> 12) & 0x3F]);
        out.push_back(table[(v >> 6) & 0x3F]);
        out.push_back(table[v & 0x3F]);
    }
    if (const std::size_t rest = bytes.size() - i; rest == 1) {
        const std::uint32_t v = bytes[i] << 16;
        out.push_back(table[(v >> 18) & 0x3F]);
        out.push_back(table[(v >> 12) & 0x3F]);
        out += "==";
    } else if (rest == 2) {
        const std::uint32_t v = (bytes[i] << 16) | (bytes[i + 1] << 8);
        out.push_back(table[(v >> 18) & 0x3F]);
        out.push_back(table[(v >> 12) & 0x3F]);
        out.push_back(table[(v >> 6) & 0x3F]);
        out.push_back('=');
    }
    return out;
}

HttpImageClient::HttpImageClient(EndpointConfig config) : config_(std::move(config)) {
    config_.validate();
    api_key_ = env_api_key(config_.api_key_env);
}

std::vector<std::uint8_t> HttpImageClient::generate(const std::string& prompt,
                                                    std::uint64_t seed,
                                                    const nlohmann::json& params) {
    nlohmann::json body;
    body["prompt"] = prompt;
    body["seed"] = seed;
    body["params"] = params;
    auto res = post_json(config_, api_key_, "/generate", body.dump());
    if (!res) {
        throw TransportError("image endpoint: connection failed: " +
                             httplib::to_string(res.error()));
    }
    if (res->status != 200) {
        throw TransportError("image endpoint: HTTP " + std::to_string(res->status));
    }
    if (res->body.empty()) throw ContractError("image endpoint returned an empty body");
    return std::vector<std::uint8_t>(res->body.begin(), res->body.end());
}

HttpEmbeddingClient::HttpEmbeddingClient(EndpointConfig config) : config_(std::move(config)) {
    config_.validate();
    api_key_ = env_api_key(config_.api_key_env);
}

std::vector<double> HttpEmbeddingClient::embed(std::span<const std::uint8_t> image) {
    nlohmann::json body;
    body["image_b64"] = base64_encode(image);
    const auto doc = parse_body(post_json(config_, api_key_, "/embed", body.dump()),
                                "embedding endpoint");
    try {
        return doc.at("embedding").get<std::vector<double>>();
    } catch (const nlohmann::json::exception&) {
        throw ContractError("embedding endpoint: response missing \"embedding\" array");
    }
}

HttpClassifierClient::HttpClassifierClient(EndpointConfig config) : config_(std::move(config)) {
    config_.validate();
    api_key_ = env_api_key(config_.api_key_env);
}

std::vector<double> HttpClassifierClient::classify(
    std::span<const std::uint8_t> image, const std::vector<std::string>& rendered_labels) {
    nlohmann::json body;
    body["image_b64"] = base64_encode(image);
    body["labels"] = rendered_labels;
    const auto doc = parse_body(post_json(config_, api_key_, "/classify", body.dump()),
                                "classification endpoint");
    try {
        return doc.at("scores").get<std::vector<double>>();
    } catch (const nlohmann::json::exception&) {
        throw ContractError("classification endpoint: response missing \"scores\" array");
    }
}

}  // namespace ueval
