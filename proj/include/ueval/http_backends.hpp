#pragma once

// ueval/http_backends.hpp — HTTP clients for the image and perception
// endpoints. Wire formats:
//   POST /generate  {"prompt", "seed", "params"}          -> PNG bytes
//   POST /embed     {"image_b64"}                         -> {"embedding": [..]}
//   POST /classify  {"image_b64", "labels": ["a photo of X", ..]} -> {"scores": [..]}
// Auth (optional) is a Bearer token read from an environment variable.

#include "ueval/generation.hpp"
#include "ueval/perception.hpp"

#include <string>

namespace ueval {

struct EndpointConfig {
    std::string base_url;
    int timeout_ms = 60000;
    std::string api_key_env;

    void validate() const;
};

class HttpImageClient : public ImageClient {
public:
    explicit HttpImageClient(EndpointConfig config);

    std::vector<std::uint8_t> generate(const std::string& prompt, std::uint64_t seed,
                                       const nlohmann::json& params) override;

private:
    EndpointConfig config_;
    std::string api_key_;
};

class HttpEmbeddingClient : public EmbeddingClient {
public:
    explicit HttpEmbeddingClient(EndpointConfig config);

    std::vector<double> embed(std::span<const std::uint8_t> image) override;

private:
    EndpointConfig config_;
    std::string api_key_;
};

class HttpClassifierClient : public ClassifierClient {
public:
    explicit HttpClassifierClient(EndpointConfig config);

    std::vector<double> classify(std::span<const std::uint8_t> image,
                                 const std::vector<std::string>& rendered_labels) override;

private:
    EndpointConfig config_;
    std::string api_key_;
};

std::string base64_encode(std::span<const std::uint8_t> bytes);

}  // namespace ueval
