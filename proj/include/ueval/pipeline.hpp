#pragma once

// ueval/pipeline.hpp — end-to-end stage driver: plan -> generate (x2 roles)
// -> score -> report. Every stage is a pure function of (persisted inputs,
// config digest); stage outputs are immutable files named by the config
// digest, so re-running a stage with unchanged inputs is a byte-identical
// no-op and a run can resume at any completed stage.

#include "ueval/config.hpp"
#include "ueval/metrics.hpp"
#include "ueval/mock.hpp"
#include "ueval/plan.hpp"

#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>

namespace ueval {

struct BackendSet {
    std::unique_ptr<ChatClient> chat;
    std::unique_ptr<ImageClient> image_base;
    std::unique_ptr<ImageClient> image_unlearned;
    std::unique_ptr<EmbeddingClient> embedding;
    std::unique_ptr<ClassifierClient> classifier;
};

// Construct clients per the config (HTTP or synthetic-world backed).
BackendSet make_backends(const RunConfig& cfg);

struct ManifestStats {
    std::size_t entries = 0;
    std::size_t failures = 0;
};

struct EvaluationReport {
    std::string target;
    std::string config_digest;
    std::string plan_digest;
    LocalityReport locality;
    std::optional<double> target_kid;
    ConfusionMatrix confusion_base;
    ConfusionMatrix confusion_unlearned;
    std::optional<AdversarialReport> adversarial;  // absent when the plan has no adv prompts
    ManifestStats stats_base;
    ManifestStats stats_unlearned;

    nlohmann::ordered_json to_json() const;
};

class Pipeline {
public:
    explicit Pipeline(RunConfig cfg);
    Pipeline(RunConfig cfg, BackendSet backends);  // injected backends (tests)

    void set_log(std::ostream* log) { log_ = log; }

    // Stage entry points. Each validates its inputs' digests and throws
    // ContractError when they were produced under a different config/plan.
    EvalPlan cmd_plan(const std::string& target, const std::filesystem::path& out_path);
    void cmd_generate(const std::filesystem::path& plan_path, ModelRole role);
    void cmd_score();
    EvaluationReport cmd_report(const std::filesystem::path& report_dir);
    EvaluationReport cmd_run(const std::string& target);

    // Stage file locations (digest-named, under out_dir).
    std::filesystem::path plan_path() const;
    std::filesystem::path image_dir() const;
    std::filesystem::path manifest_path(ModelRole role) const;
    std::filesystem::path features_path(ModelRole role) const;
    std::filesystem::path scores_path(ModelRole role) const;
    std::filesystem::path report_path(const std::filesystem::path& report_dir) const;

    const RunConfig& config() const { return cfg_; }

private:
    void log(const std::string& line) const;
    EvalPlan load_plan() const;
    std::string plan_digest() const;

    RunConfig cfg_;
    BackendSet backends_;
    std::ostream* log_ = nullptr;
};

}  // namespace ueval
