#include "ueval/generation.hpp"

#include "ueval/digest.hpp"
#include "ueval/error.hpp"
#include "ueval/text.hpp"

#include <algorithm>
#include <atomic>
#include <fstream>
#include <iterator>
#include <map>
#include <mutex>
#include <span>
#include <thread>
#include <tuple>

namespace ueval {

namespace {

std::string pad2(std::size_t i) {
    std::string s = std::to_string(i);
    return s.size() < 2 ? "0" + s : s;
}

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw SchemaError("cannot read file: " + path.string());
    return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in),
                                     std::istreambuf_iterator<char>());
}

// Unique tmp name per writer: concurrent workers may race to persist the
// same content-addressed path, and rename() makes the last complete copy
// win.
void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
    std::filesystem::create_directories(path.parent_path());
    static std::atomic<std::uint64_t> counter{0};
    const auto tmp = path.string() + ".tmp." + std::to_string(counter.fetch_add(1));
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        out.write(reinterpret_cast<const char*>(bytes.data()),
                  static_cast<std::streamsize>(bytes.size()));
        if (!out) throw SchemaError("cannot write file: " + tmp);
    }
    std::filesystem::rename(tmp, path);
}

}  // namespace

std::string to_string(ModelRole role) {
    return role == ModelRole::Base ? "base" : "unlearned";
}

ModelRole role_from_string(std::string_view s) {
    if (s == "base") return ModelRole::Base;
    if (s == "unlearned") return ModelRole::Unlearned;
    throw SchemaError("unknown model role: " + std::string(s));
}

std::string to_string(PromptKind kind) {
    switch (kind) {
        case PromptKind::Target: return "target";
        case PromptKind::Nearby: return "nearby";
        case PromptKind::AdvMiss: return "adv_miss";
        case PromptKind::AdvEvoke: return "adv_evoke";
    }
    return "?";
}

nlohmann::json ManifestEntry::to_json() const {
    nlohmann::json j;
    j["run_id"] = run_id;
    j["role"] = to_string(role);
    j["prompt_id"] = prompt_id;
    j["seed"] = seed;
    j["image_path"] = image_path;
    j["content_hash"] = content_hash;
    j["params_digest"] = params_digest;
    return j;
}

ManifestEntry ManifestEntry::from_json(const nlohmann::json& j) {
    ManifestEntry e;
    e.run_id = j.at("run_id").get<std::string>();
    e.role = role_from_string(j.at("role").get<std::string>());
    e.prompt_id = j.at("prompt_id").get<std::string>();
    e.seed = j.at("seed").get<std::uint64_t>();
    e.image_path = j.at("image_path").get<std::string>();
    e.content_hash = j.at("content_hash").get<std::string>();
    e.params_digest = j.at("params_digest").get<std::string>();
    return e;
}

std::vector<PromptSpec> make_prompt_set(const EvalPlan& plan, int samples,
                                        CaptionStrategy strategy,
                                        const std::string& caption_template) {
    if (samples < 1) throw ConfigError("make_prompt_set: samples must be >= 1");
    if (const auto violations = validate_plan(plan); !violations.empty()) {
        throw SchemaError("make_prompt_set: plan is invalid: " + violations.front().str());
    }

    auto caption = [&](const std::string& concept_text) {
        if (strategy == CaptionStrategy::Verbatim) return concept_text;
        return render_template(caption_template, "concept", concept_text);
    };

    std::vector<PromptSpec> specs;
    specs.reserve(1 + plan.nearby.size() + plan.adv_miss.size() + plan.adv_evoke.size());
    specs.push_back({"target", plan.target, PromptKind::Target, caption(plan.target), samples});
    for (std::size_t i = 0; i < plan.nearby.size(); ++i) {
        specs.push_back({"nearby-" + pad2(i + 1), plan.nearby[i], PromptKind::Nearby,
                         caption(plan.nearby[i]), samples});
    }
    for (std::size_t i = 0; i < plan.adv_miss.size(); ++i) {
        specs.push_back({"adv_miss-" + pad2(i + 1), "", PromptKind::AdvMiss,
                         caption(plan.adv_miss[i]), samples});
    }
    for (std::size_t i = 0; i < plan.adv_evoke.size(); ++i) {
        // Evocative prompts are complete image prompts already.
        specs.push_back({"adv_evoke-" + pad2(i + 1), "", PromptKind::AdvEvoke,
                         plan.adv_evoke[i], samples});
    }
    return specs;
}

std::filesystem::path image_path_for(const std::filesystem::path& root,
                                     const std::string& content_hash) {
    return root / content_hash.substr(0, 2) / (content_hash + ".png");
}

std::vector<ManifestEntry> read_manifest_journal(const std::filesystem::path& path) {
    std::vector<ManifestEntry> entries;
    std::ifstream in(path, std::ios::binary);
    if (!in) return entries;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        try {
            entries.push_back(ManifestEntry::from_json(nlohmann::json::parse(line)));
        } catch (const std::exception&) {
            break;  // torn tail write
        }
    }
    return entries;
}

bool verify_entry(const ManifestEntry& entry) {
    if (entry.failed()) return false;
    std::error_code ec;
    if (!std::filesystem::exists(entry.image_path, ec)) return false;
    try {
        const auto bytes = read_file_bytes(entry.image_path);
        return sha256_hex(std::span<const std::uint8_t>(bytes)) == entry.content_hash;
    } catch (const Error&) {
        return false;
    }
}

std::vector<ManifestEntry> generate_images(const std::vector<PromptSpec>& specs,
                                           ImageClient& backend, ModelRole role,
                                           const GenerateOptions& opts,
                                           const std::vector<ManifestEntry>& prior) {
    if (opts.failure_ceiling < 0.0 || opts.failure_ceiling >= 1.0) {
        throw ConfigError("generate_images: failure_ceiling must be in [0, 1)");
    }

    // Cache of completed work from earlier runs: (prompt_id, seed) tuples
    // under the same params digest whose image file still verifies.
    std::map<std::pair<std::string, std::uint64_t>, ManifestEntry> cache;
    for (const auto& e : prior) {
        if (e.role != role || e.failed() || e.params_digest != opts.params_digest) continue;
        cache.emplace(std::make_pair(e.prompt_id, e.seed), e);
    }

    struct Job {
        const PromptSpec* spec;
        std::uint64_t seed;
    };
    std::vector<Job> jobs;
    std::vector<ManifestEntry> entries;
    for (const auto& spec : specs) {
        for (int s = 0; s < spec.sample_count; ++s) {
            const std::uint64_t seed = opts.master_seed + static_cast<std::uint64_t>(s);
            if (auto it = cache.find({spec.prompt_id, seed});
                it != cache.end() && verify_entry(it->second)) {
                entries.push_back(it->second);
            } else {
                jobs.push_back({&spec, seed});
            }
        }
    }

    std::mutex mu;
    std::atomic<std::size_t> next{0};
    std::atomic<std::size_t> failures{0};

    // Completed entries are journaled as they land (single writer) so a
    // killed run can resume without repeating endpoint calls.
    std::ofstream journal;
    if (!opts.journal_path.empty()) {
        std::filesystem::create_directories(opts.journal_path.parent_path());
        journal.open(opts.journal_path, std::ios::binary | std::ios::app);
    }

    auto worker = [&]() {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= jobs.size()) return;
            const Job& job = jobs[i];

            ManifestEntry entry;
            entry.run_id = opts.run_id;
            entry.role = role;
            entry.prompt_id = job.spec->prompt_id;
            entry.seed = job.seed;
            entry.params_digest = opts.params_digest;

            for (int attempt = 0; attempt <= opts.max_retries; ++attempt) {
                try {
                    const auto bytes = backend.generate(job.spec->prompt_text, job.seed,
                                                        opts.params);
                    entry.content_hash = sha256_hex(std::span<const std::uint8_t>(bytes));
                    const auto path = image_path_for(opts.image_dir, entry.content_hash);
                    if (!std::filesystem::exists(path)) write_file_bytes(path, bytes);
                    entry.image_path = path.string();
                    break;
                } catch (const Error&) {
                    if (attempt == opts.max_retries) {
                        entry.image_path.clear();
                        entry.content_hash.clear();
                        failures.fetch_add(1);
                    }
                }
            }
            std::scoped_lock lock(mu);
            if (journal.is_open()) journal << entry.to_json().dump() << "\n" << std::flush;
            entries.push_back(std::move(entry));
        }
    };

    const std::size_t thread_count =
        std::min<std::size_t>(std::max(1, opts.max_in_flight), std::max<std::size_t>(jobs.size(), 1));
    std::vector<std::thread> threads;
    threads.reserve(thread_count);
    for (std::size_t t = 0; t < thread_count; ++t) threads.emplace_back(worker);
    for (auto& t : threads) t.join();

    std::size_t total = 0;
    for (const auto& spec : specs) total += static_cast<std::size_t>(spec.sample_count);
    if (total > 0 &&
        static_cast<double>(failures.load()) / static_cast<double>(total) > opts.failure_ceiling) {
        throw TransportError("image generation failure fraction " +
                             std::to_string(static_cast<double>(failures.load()) /
                                            static_cast<double>(total)) +
                             " exceeds the configured ceiling");
    }

    std::sort(entries.begin(), entries.end(), [](const ManifestEntry& a, const ManifestEntry& b) {
        return std::tie(a.prompt_id, a.seed) < std::tie(b.prompt_id, b.seed);
    });
    return entries;
}

}  // namespace ueval
