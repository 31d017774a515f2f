#pragma once

// ueval/generation.hpp — image-generation orchestration: prompt sets, paired
// seeding across model roles, content-addressed image storage, and the
// JSON-lines manifest.

#include "ueval/plan.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace ueval {

enum class ModelRole { Base, Unlearned };

std::string to_string(ModelRole role);
ModelRole role_from_string(std::string_view s);

enum class PromptKind { Target, Nearby, AdvMiss, AdvEvoke };

std::string to_string(PromptKind kind);

enum class CaptionStrategy { Template, Verbatim };

struct PromptSpec {
    std::string prompt_id;     // stable key, unique within a run
    std::string concept_text;  // empty for adversarial prompts
    PromptKind kind = PromptKind::Target;
    std::string prompt_text;
    int sample_count = 0;
};

struct ManifestEntry {
    std::string run_id;
    ModelRole role = ModelRole::Base;
    std::string prompt_id;
    std::uint64_t seed = 0;
    std::string image_path;     // empty when generation failed
    std::string content_hash;   // sha256 hex of the image bytes
    std::string params_digest;

    bool failed() const { return image_path.empty(); }

    nlohmann::json to_json() const;
    static ManifestEntry from_json(const nlohmann::json& j);
};

// Abstract image endpoint: POST {prompt, seed, params} -> PNG bytes.
class ImageClient {
public:
    virtual ~ImageClient() = default;
    virtual std::vector<std::uint8_t> generate(const std::string& prompt, std::uint64_t seed,
                                               const nlohmann::json& params) = 0;
};

// One prompt spec per plan entry. Target, nearby, and misspelling prompts
// are rendered with the caption template ("a photo of {concept}"); evocative
// prompts are used verbatim. Every spec carries `samples` samples.
std::vector<PromptSpec> make_prompt_set(const EvalPlan& plan, int samples,
                                        CaptionStrategy strategy = CaptionStrategy::Template,
                                        const std::string& caption_template = "a photo of {concept}");

struct GenerateOptions {
    std::string run_id;
    std::uint64_t master_seed = 0;
    double failure_ceiling = 0.0;      // abort when failures/total exceeds this
    int max_in_flight = 4;
    int max_retries = 2;               // per-entry endpoint retries
    std::filesystem::path image_dir;   // content-addressed storage root
    std::filesystem::path journal_path;  // optional append-only crash journal
    std::string params_digest;
    nlohmann::json params;             // passed through to the endpoint
};

// Generate images for every (spec, seed) pair against one role's endpoint.
// Seeds are master_seed + 0..sample_count-1 per spec, identical for both
// roles. Tuples already present in `prior` (matching prompt_id, seed, and
// params digest, with an intact image file) are skipped without a backend
// call. Entries that still fail after retries are recorded with an empty
// path; the run aborts with TransportError if the failure fraction exceeds
// the ceiling. The result is sorted by (prompt_id, seed).
std::vector<ManifestEntry> generate_images(const std::vector<PromptSpec>& specs,
                                           ImageClient& backend, ModelRole role,
                                           const GenerateOptions& opts,
                                           const std::vector<ManifestEntry>& prior = {});

// Content-addressed path for image bytes: <root>/ab/<sha256>.png.
std::filesystem::path image_path_for(const std::filesystem::path& root,
                                     const std::string& content_hash);

// Entries recovered from a crash journal; a torn final line is ignored.
std::vector<ManifestEntry> read_manifest_journal(const std::filesystem::path& path);

// Re-verify a manifest entry's content hash against its file.
bool verify_entry(const ManifestEntry& entry);

}  // namespace ueval
