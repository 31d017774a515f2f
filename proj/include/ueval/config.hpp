#pragma once

// ueval/config.hpp — run configuration: backends, plan parameters, sampling,
// and output location. A run's identity is the SHA-256 digest of the
// canonical config (out_dir excluded) plus the synthetic-world content when
// one is configured; stage outputs are named by that digest. Secrets never
// live in the config file, only names of environment variables.

#include "ueval/chat.hpp"
#include "ueval/generation.hpp"
#include "ueval/http_backends.hpp"
#include "ueval/plan.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <optional>
#include <string>

namespace ueval {

enum class BackendType { Http, Synthetic };

struct ImageEndpointConfig {
    BackendType type = BackendType::Http;
    EndpointConfig endpoint;
    nlohmann::json params = nlohmann::json::object();  // passed through opaquely
    int max_retries = 2;
};

struct PerceptionEndpointConfig {
    BackendType type = BackendType::Http;
    EndpointConfig endpoint;
};

struct RunConfig {
    std::filesystem::path out_dir;
    std::uint64_t master_seed = 42;
    int samples_per_prompt = 30;
    double failure_ceiling = 0.0;
    int max_in_flight = 4;
    std::string caption_template = "a photo of {concept}";
    std::string label_template = "a photo of {label}";
    CaptionStrategy caption_strategy = CaptionStrategy::Template;
    PlanConfig plan;

    BackendType chat_type = BackendType::Http;
    ChatBackendConfig chat;
    ImageEndpointConfig image_base;
    ImageEndpointConfig image_unlearned;
    PerceptionEndpointConfig embedding;
    PerceptionEndpointConfig classifier;

    std::optional<std::filesystem::path> world_path;  // resolved against the config file

    // Parse and validate a config document. Unknown keys anywhere are a
    // ConfigError naming the key.
    static RunConfig load(const std::filesystem::path& path);
    static RunConfig from_json(const nlohmann::json& doc,
                               const std::filesystem::path& base_dir = ".");

    void validate() const;

    // Run identity: canonical config JSON without out_dir, combined with the
    // world file's content digest when a world is configured.
    const std::string& digest() const { return digest_; }
    std::string digest12() const { return digest_.substr(0, 12); }

private:
    std::string digest_;
};

}  // namespace ueval
