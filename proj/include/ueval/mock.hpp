#pragma once

// ueval/mock.hpp — deterministic in-process stand-ins for the chat, image,
// and perception backends. A SyntheticWorld pins concept embedding centers,
// a per-concept drift schedule applied in the Unlearned role, and planted
// adversarial outcomes, so full-pipeline runs have exact expected metrics.

#include "ueval/chat.hpp"
#include "ueval/generation.hpp"
#include "ueval/perception.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <map>
#include <mutex>
#include <string>
#include <vector>

namespace ueval {

struct WorldConcept {
    std::string text;
    double drift = 0.0;  // embedding shift magnitude in the Unlearned role
};

struct WorldAdvPrompt {
    std::string text;
    std::string kind;     // "adv_miss" | "adv_evoke"
    int target_hits = 0;  // first N samples depict the target concept
};

struct SyntheticWorld {
    std::uint64_t seed = 0;
    std::size_t dim = 16;
    double noise_scale = 0.0;
    double center_scale = 4.0;
    WorldConcept target;
    std::vector<WorldConcept> nearby;            // order = similarity rank
    std::vector<WorldAdvPrompt> adv;
    std::map<std::string, std::string> unlearned_alias;  // concept -> depicted concept

    // Concepts occupy orthogonal axes (scaled basis vectors); drift moves
    // embeddings along a dedicated final axis, so KID grows strictly with
    // |drift| and classification argmax is drift-invariant. Unknown texts
    // fall back to a seeded Gaussian center.
    std::vector<double> center(const std::string& text) const;
    double drift_of(const std::string& concept_text) const;

    void validate() const;  // dim must cover all concepts plus the drift axis
    static SyntheticWorld from_json(const nlohmann::json& j);
    static SyntheticWorld load(const std::filesystem::path& path);
    nlohmann::json to_json() const;
};

// Replays canned replies in order and records every request. An exhausted
// fixture raises ProtocolError immediately.
class ReplayChatClient : public ChatClient {
public:
    explicit ReplayChatClient(std::vector<std::string> replies);

    std::string complete(const ChatRequest& request) override;

    const std::vector<ChatRequest>& requests() const { return requests_; }
    std::size_t remaining() const;

private:
    mutable std::mutex mu_;
    std::vector<std::string> replies_;
    std::size_t next_ = 0;
    std::vector<ChatRequest> requests_;
};

// Answers the protocol's prompts from the world: brainstorm replies are the
// world's lists (identical every round), re-rank replies restore world
// order. Deterministic, records requests.
class SyntheticChatClient : public ChatClient {
public:
    explicit SyntheticChatClient(SyntheticWorld world);

    std::string complete(const ChatRequest& request) override;

    std::size_t request_count() const;

private:
    SyntheticWorld world_;
    mutable std::mutex mu_;
    std::size_t request_count_ = 0;
};

// "Images" are canonical JSON blobs encoding what the perception mocks need:
// the depicted concept's center key, the drift applied, and a noise seed
// shared across roles for paired generation seeds.
class SyntheticImageClient : public ImageClient {
public:
    SyntheticImageClient(SyntheticWorld world, ModelRole role, std::uint64_t master_seed,
                         std::string caption_template = "a photo of {concept}");

    std::vector<std::uint8_t> generate(const std::string& prompt, std::uint64_t seed,
                                       const nlohmann::json& params) override;

private:
    SyntheticWorld world_;
    ModelRole role_;
    std::uint64_t master_seed_;
    std::string caption_template_;
};

class SyntheticEmbeddingClient : public EmbeddingClient {
public:
    explicit SyntheticEmbeddingClient(SyntheticWorld world);

    std::vector<double> embed(std::span<const std::uint8_t> image) override;

    std::size_t call_count() const;

private:
    SyntheticWorld world_;
    mutable std::mutex mu_;
    std::size_t calls_ = 0;
};

class SyntheticClassifierClient : public ClassifierClient {
public:
    SyntheticClassifierClient(SyntheticWorld world,
                              std::string caption_template = "a photo of {label}");

    std::vector<double> classify(std::span<const std::uint8_t> image,
                                 const std::vector<std::string>& rendered_labels) override;

    std::size_t call_count() const;

private:
    SyntheticWorld world_;
    std::string caption_template_;
    mutable std::mutex mu_;
    std::size_t calls_ = 0;
};

// Decode an embedding from synthetic image bytes (exposed for tests).
std::vector<double> synthetic_embedding(const SyntheticWorld& world,
                                        std::span<const std::uint8_t> image);

}  // namespace ueval
