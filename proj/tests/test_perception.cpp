#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "ueval/error.hpp"
#include "ueval/generation.hpp"
#include "ueval/metrics.hpp"
#include "ueval/mock.hpp"
#include "ueval/perception.hpp"

#include <algorithm>
#include <filesystem>

using namespace ueval;

namespace {

SyntheticWorld tiny_world() {
    SyntheticWorld w;
    w.dim = 5;
    w.seed = 11;
    w.target = {"copper lantern", 0.75};
    w.nearby = {{"brass lantern", 0.5}, {"paper lamp", 0.25}};
    return w;
}

EvalPlan tiny_plan() {
    EvalPlan plan;
    plan.target = "copper lantern";
    plan.nearby = {"brass lantern", "paper lamp"};
    return plan;
}

struct Fixture {
    std::filesystem::path dir;
    std::vector<ManifestEntry> entries;

    explicit Fixture(const std::string& name, int samples = 3, ModelRole role = ModelRole::Base) {
        dir = std::filesystem::temp_directory_path() / ("ueval-percep-" + name);
        std::filesystem::remove_all(dir);
        std::filesystem::create_directories(dir);
        SyntheticImageClient client(tiny_world(), role, 50);
        GenerateOptions opts;
        opts.run_id = "t";
        opts.master_seed = 50;
        opts.image_dir = dir / "images";
        opts.params = nlohmann::json::object();
        opts.params_digest = "p";
        entries = generate_images(make_prompt_set(tiny_plan(), samples), client, role, opts);
    }
};

class WobblyEmbeddingClient : public EmbeddingClient {
public:
    std::vector<double> embed(std::span<const std::uint8_t>) override {
        ++calls;
        return std::vector<double>(calls % 2 == 1 ? 4 : 7, 0.5);
    }
    std::size_t calls = 0;
};

class WrongArityClassifier : public ClassifierClient {
public:
    std::vector<double> classify(std::span<const std::uint8_t>,
                                 const std::vector<std::string>& labels) override {
        return std::vector<double>(labels.size() + 1, 0.0);
    }
};

}  // namespace

TEST_CASE("embed_images: one row per entry in manifest order") {
    Fixture fx("rows");
    SyntheticEmbeddingClient backend(tiny_world());
    EmbedCache cache;
    const auto m = embed_images(fx.entries, backend, cache);
    CHECK(m.rows.size() == fx.entries.size());
    CHECK(m.dim == tiny_world().dim);
    for (std::size_t i = 0; i < m.keys.size(); ++i) {
        CHECK(m.keys[i].prompt_id == fx.entries[i].prompt_id);
        CHECK(m.keys[i].seed == fx.entries[i].seed);
    }
}

TEST_CASE("embed_images caches by content hash") {
    Fixture fx("cache");
    SyntheticEmbeddingClient backend(tiny_world());
    EmbedCache cache;
    const auto first = embed_images(fx.entries, backend, cache);
    const auto calls = backend.call_count();
    CHECK(calls <= fx.entries.size());

    const auto second = embed_images(fx.entries, backend, cache);
    CHECK(backend.call_count() == calls);  // served fully from cache
    CHECK(second.rows == first.rows);
}

TEST_CASE("embedding results are bit-stable across client instances") {
    Fixture fx("stable");
    SyntheticEmbeddingClient b1(tiny_world());
    SyntheticEmbeddingClient b2(tiny_world());
    EmbedCache c1, c2;
    CHECK(embed_images(fx.entries, b1, c1).rows == embed_images(fx.entries, b2, c2).rows);
}

TEST_CASE("dimension drift across batches is a contract error") {
    Fixture fx("dim");
    WobblyEmbeddingClient backend;
    EmbedCache cache;
    CHECK_THROWS_AS(embed_images(fx.entries, backend, cache), ContractError);
}

TEST_CASE("classify_images over target plus nearby labels") {
    Fixture fx("classify");
    SyntheticClassifierClient backend(tiny_world());
    ScoreCache cache;
    const std::vector<std::string> labels = {"copper lantern", "brass lantern", "paper lamp"};
    const auto result =
        classify_images(fx.entries, labels, backend, "a photo of {label}", cache);
    CHECK(result.labels == labels);
    REQUIRE(result.scores.size() == fx.entries.size());
    for (const auto& s : result.scores) CHECK(s.size() == labels.size());

    // Base role, no drift: every image classifies as its generating concept.
    for (std::size_t i = 0; i < fx.entries.size(); ++i) {
        const auto& id = fx.entries[i].prompt_id;
        if (id == "target") CHECK(result.argmax[i] == 0);
        if (id == "nearby-01") CHECK(result.argmax[i] == 1);
        if (id == "nearby-02") CHECK(result.argmax[i] == 2);
    }

    const auto calls = backend.call_count();
    classify_images(fx.entries, labels, backend, "a photo of {label}", cache);
    CHECK(backend.call_count() == calls);  // cache hit
}

TEST_CASE("single label always wins the argmax") {
    Fixture fx("single");
    SyntheticClassifierClient backend(tiny_world());
    ScoreCache cache;
    const auto result = classify_images(fx.entries, {"copper lantern"}, backend,
                                        "a photo of {label}", cache);
    for (std::size_t idx : result.argmax) CHECK(idx == 0);
}

TEST_CASE("wrong score arity is a contract error") {
    Fixture fx("arity");
    WrongArityClassifier backend;
    ScoreCache cache;
    CHECK_THROWS_AS(
        classify_images(fx.entries, {"copper lantern"}, backend, "a photo of {label}", cache),
        ContractError);
}

TEST_CASE("duplicate labels under the dedup key are rejected") {
    Fixture fx("dup-labels");
    SyntheticClassifierClient backend(tiny_world());
    ScoreCache cache;
    CHECK_THROWS_AS(classify_images(fx.entries, {"a", "A "}, backend, "x {label}", cache),
                    ContractError);
}

TEST_CASE("argmax ties break to the lowest label index") {
    // Classifying against the same label twice is rejected, so plant a tie
    // via a tiny custom backend instead.
    class TieClassifier : public ClassifierClient {
    public:
        std::vector<double> classify(std::span<const std::uint8_t>,
                                     const std::vector<std::string>& labels) override {
            return std::vector<double>(labels.size(), 0.25);
        }
    };
    Fixture fx("ties", 1);
    TieClassifier backend;
    ScoreCache cache;
    const auto result =
        classify_images(fx.entries, {"one", "two", "three"}, backend, "{label}", cache);
    for (std::size_t idx : result.argmax) CHECK(idx == 0);
}

TEST_CASE("row ordering follows the given entry order") {
    Fixture fx("order");
    SyntheticClassifierClient backend(tiny_world());
    ScoreCache cache;
    const std::vector<std::string> labels = {"copper lantern", "brass lantern"};
    const auto direct =
        classify_images(fx.entries, labels, backend, "a photo of {label}", cache);

    auto shuffled = fx.entries;
    std::reverse(shuffled.begin(), shuffled.end());
    const auto reversed =
        classify_images(shuffled, labels, backend, "a photo of {label}", cache);
    for (std::size_t i = 0; i < direct.scores.size(); ++i) {
        const std::size_t j = direct.scores.size() - 1 - i;
        CHECK(reversed.scores[j] == direct.scores[i]);
        CHECK(reversed.argmax[j] == direct.argmax[i]);
        CHECK(reversed.keys[j] == direct.keys[i]);
    }
}

TEST_CASE("failed manifest entries are rejected by perception") {
    Fixture fx("failed-entry", 1);
    auto broken = fx.entries;
    broken[0].image_path.clear();
    SyntheticEmbeddingClient backend(tiny_world());
    EmbedCache cache;
    CHECK_THROWS_AS(embed_images(broken, backend, cache), SchemaError);
}
