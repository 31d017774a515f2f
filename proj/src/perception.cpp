#include "ueval/perception.hpp"

#include "ueval/digest.hpp"
#include "ueval/error.hpp"
#include "ueval/text.hpp"

#include <atomic>
#include <exception>
#include <fstream>
#include <functional>
#include <iterator>
#include <mutex>
#include <thread>
#include <unordered_set>

namespace ueval {

namespace {

std::vector<std::uint8_t> load_verified(const ManifestEntry& entry) {
    if (entry.failed()) {
        throw SchemaError("entry " + entry.prompt_id + "/" + std::to_string(entry.seed) +
                          " has no image (generation failed)");
    }
    std::ifstream in(entry.image_path, std::ios::binary);
    if (!in) throw SchemaError("cannot read image: " + entry.image_path);
    std::vector<std::uint8_t> bytes{std::istreambuf_iterator<char>(in),
                                    std::istreambuf_iterator<char>()};
    if (sha256_hex(std::span<const std::uint8_t>(bytes)) != entry.content_hash) {
        throw ContractError("content hash mismatch for " + entry.image_path);
    }
    return bytes;
}

SourceKey key_of(const ManifestEntry& e) { return {e.role, e.prompt_id, e.seed}; }

// One backend request per unique content hash missing from the cache, up to
// max_in_flight concurrently; results land in the cache. The first worker
// exception is rethrown after all workers drain.
template <typename Fetch>
void fetch_misses(const std::vector<const ManifestEntry*>& misses, int max_in_flight,
                  Fetch&& fetch) {
    if (misses.empty()) return;
    std::atomic<std::size_t> next{0};
    std::mutex mu;
    std::exception_ptr first_error;

    auto worker = [&]() {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= misses.size()) return;
            {
                std::scoped_lock lock(mu);
                if (first_error) return;
            }
            try {
                fetch(*misses[i]);
            } catch (...) {
                std::scoped_lock lock(mu);
                if (!first_error) first_error = std::current_exception();
                return;
            }
        }
    };

    const std::size_t threads =
        std::min<std::size_t>(std::max(1, max_in_flight), misses.size());
    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
    if (first_error) std::rethrow_exception(first_error);
}

std::vector<const ManifestEntry*> unique_misses(const std::vector<ManifestEntry>& entries,
                                                const std::function<bool(const std::string&)>&
                                                    cached) {
    std::vector<const ManifestEntry*> misses;
    std::unordered_set<std::string> seen;
    for (const auto& entry : entries) {
        if (entry.failed()) {
            throw SchemaError("entry " + entry.prompt_id + "/" + std::to_string(entry.seed) +
                              " has no image (generation failed)");
        }
        if (cached(entry.content_hash)) continue;
        if (seen.insert(entry.content_hash).second) misses.push_back(&entry);
    }
    return misses;
}

}  // namespace

std::string labels_digest(const std::vector<std::string>& labels,
                          const std::string& caption_template) {
    std::string joined = caption_template;
    for (const auto& l : labels) {
        joined += '\x1f';
        joined += l;
    }
    return sha256_hex(joined);
}

FeatureMatrix embed_images(const std::vector<ManifestEntry>& entries, EmbeddingClient& backend,
                           EmbedCache& cache, int max_in_flight) {
    std::mutex cache_mu;
    const auto misses = unique_misses(
        entries, [&](const std::string& hash) { return cache.contains(hash); });
    fetch_misses(misses, max_in_flight, [&](const ManifestEntry& entry) {
        const auto bytes = load_verified(entry);
        auto vec = backend.embed(bytes);
        if (vec.empty()) throw ContractError("embedding backend returned an empty vector");
        std::scoped_lock lock(cache_mu);
        cache.emplace(entry.content_hash, std::move(vec));
    });

    FeatureMatrix m;
    m.rows.reserve(entries.size());
    m.keys.reserve(entries.size());
    for (const auto& entry : entries) {
        const auto& vec = cache.at(entry.content_hash);
        if (m.dim == 0) m.dim = vec.size();
        if (vec.size() != m.dim) {
            throw ContractError("embedding dimension changed mid-run: " +
                                std::to_string(vec.size()) + " vs " + std::to_string(m.dim));
        }
        m.rows.push_back(vec);
        m.keys.push_back(key_of(entry));
    }
    return m;
}

ZeroShotResult classify_images(const std::vector<ManifestEntry>& entries,
                               const std::vector<std::string>& labels, ClassifierClient& backend,
                               const std::string& caption_template, ScoreCache& cache,
                               int max_in_flight) {
    if (labels.empty()) throw ContractError("classify_images: empty label set");
    {
        std::unordered_set<std::string> keys;
        for (const auto& l : labels) {
            if (!keys.insert(normalize_concept(l)).second) {
                throw ContractError("classify_images: duplicate label under dedup key: " + l);
            }
        }
    }

    std::vector<std::string> rendered;
    rendered.reserve(labels.size());
    for (const auto& l : labels) rendered.push_back(render_template(caption_template, "label", l));
    const std::string digest = labels_digest(labels, caption_template);

    std::mutex cache_mu;
    const auto misses = unique_misses(entries, [&](const std::string& hash) {
        return cache.contains(std::make_pair(hash, digest));
    });
    fetch_misses(misses, max_in_flight, [&](const ManifestEntry& entry) {
        const auto bytes = load_verified(entry);
        auto scores = backend.classify(bytes, rendered);
        if (scores.size() != labels.size()) {
            throw ContractError("classifier returned " + std::to_string(scores.size()) +
                                " scores for " + std::to_string(labels.size()) + " labels");
        }
        std::scoped_lock lock(cache_mu);
        cache.emplace(std::make_pair(entry.content_hash, digest), std::move(scores));
    });

    ZeroShotResult result;
    result.labels = labels;
    result.scores.reserve(entries.size());
    result.argmax.reserve(entries.size());
    result.keys.reserve(entries.size());
    for (const auto& entry : entries) {
        const auto& scores = cache.at(std::make_pair(entry.content_hash, digest));
        std::size_t best = 0;
        for (std::size_t i = 1; i < scores.size(); ++i) {
            if (scores[i] > scores[best]) best = i;  // ties keep the lowest index
        }
        result.scores.push_back(scores);
        result.argmax.push_back(best);
        result.keys.push_back(key_of(entry));
    }
    return result;
}

}  // namespace ueval
