#pragma once

// ueval/perception.hpp — scoring-backend client: image embeddings for KID
// and zero-shot classification over a label set. Results are pure functions
// of (content hash, backend, labels/template) and are cached by hash.

#include "ueval/generation.hpp"

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace ueval {

struct SourceKey {
    ModelRole role = ModelRole::Base;
    std::string prompt_id;
    std::uint64_t seed = 0;

    auto operator<=>(const SourceKey&) const = default;
};

struct FeatureMatrix {
    std::size_t dim = 0;
    std::vector<std::vector<double>> rows;  // one per image, manifest order
    std::vector<SourceKey> keys;
};

struct ZeroShotResult {
    std::vector<std::string> labels;               // raw label texts
    std::vector<std::vector<double>> scores;       // per image, one score per label
    std::vector<std::size_t> argmax;               // ties -> lowest label index
    std::vector<SourceKey> keys;
};

class EmbeddingClient {
public:
    virtual ~EmbeddingClient() = default;
    virtual std::vector<double> embed(std::span<const std::uint8_t> image) = 0;
};

class ClassifierClient {
public:
    virtual ~ClassifierClient() = default;
    // rendered_labels are the template-expanded texts sent over the wire.
    virtual std::vector<double> classify(std::span<const std::uint8_t> image,
                                         const std::vector<std::string>& rendered_labels) = 0;
};

// hash -> embedding vector. Owned by the caller so reruns can persist it.
using EmbedCache = std::map<std::string, std::vector<double>>;
// (hash, labels digest) -> score vector.
using ScoreCache = std::map<std::pair<std::string, std::string>, std::vector<double>>;

// One row per (successful) entry, in the order given. Rows are served from
// the cache by content hash when possible; misses are fetched concurrently
// up to max_in_flight, one request per unique hash, and assembled back in
// manifest order. Every file is re-verified against its recorded hash.
// Throws ContractError when the backend returns inconsistent dimensions,
// and SchemaError on a failed entry.
FeatureMatrix embed_images(const std::vector<ManifestEntry>& entries, EmbeddingClient& backend,
                           EmbedCache& cache, int max_in_flight = 4);

// Zero-shot scores for every entry over `labels` (unique under the dedup
// key, non-empty). Label texts are rendered via `caption_template` before
// hitting the wire; concurrency as in embed_images. Throws ContractError
// when the backend returns the wrong score arity.
ZeroShotResult classify_images(const std::vector<ManifestEntry>& entries,
                               const std::vector<std::string>& labels, ClassifierClient& backend,
                               const std::string& caption_template, ScoreCache& cache,
                               int max_in_flight = 4);

// Digest identifying a rendered label set (order-sensitive).
std::string labels_digest(const std::vector<std::string>& labels,
                          const std::string& caption_template);

}  // namespace ueval
