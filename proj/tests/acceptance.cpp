// Acceptance suite: one pass/fail line per criterion. Exits nonzero if any
// criterion fails. Criteria are property- and oracle-based; live-scale
// figures require GPU model endpoints and are out of scope by design.

#include "oracles.hpp"
#include "ueval/error.hpp"
#include "ueval/http_backends.hpp"
#include "ueval/metrics.hpp"
#include "ueval/mock.hpp"
#include "ueval/pipeline.hpp"
#include "ueval/protocol.hpp"

#include <httplib.h>

#include <atomic>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <mutex>
#include <random>
#include <regex>
#include <sstream>
#include <thread>

using namespace ueval;
using Clock = std::chrono::steady_clock;

namespace {

int failures = 0;

void criterion(const std::string& name, const std::function<void()>& body) {
    try {
        body();
        std::cout << "PASS  " << name << "\n";
    } catch (const std::exception& e) {
        ++failures;
        std::cout << "FAIL  " << name << " — " << e.what() << "\n";
    }
}

void require(bool ok, const std::string& what) {
    if (!ok) throw std::runtime_error(what);
}

const std::filesystem::path kDataDir = UEVAL_TEST_DATA_DIR;

std::string slurp(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void spit(const std::filesystem::path& path, const std::string& text) {
    std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << text;
}

FeatureMatrix matrix(std::vector<std::vector<double>> rows) {
    FeatureMatrix m;
    m.dim = rows.empty() ? 0 : rows.front().size();
    m.rows = std::move(rows);
    return m;
}

std::filesystem::path fresh_dir(const std::string& name) {
    const auto dir = std::filesystem::temp_directory_path() / ("ueval-acceptance-" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

// --- criteria ---------------------------------------------------------------

void kid_oracle_equivalence() {
    const auto start = Clock::now();
    std::mt19937_64 rng(424242);
    std::uniform_real_distribution<double> dist(-2.0, 2.0);
    for (int i = 0; i < 100; ++i) {
        const std::size_t m = 2 + rng() % 11;  // 2..12
        const std::size_t n = 2 + rng() % 11;
        const std::size_t dim = 2 + rng() % 7;  // 2..8
        std::vector<std::vector<double>> x(m, std::vector<double>(dim));
        std::vector<std::vector<double>> y(n, std::vector<double>(dim));
        for (auto& row : x) {
            for (auto& v : row) v = dist(rng);
        }
        for (auto& row : y) {
            for (auto& v : row) v = dist(rng);
        }
        const double got = kid_unbiased(matrix(x), matrix(y));
        const double want = oracle::kid(x, y);
        require(std::abs(got - want) <= 1e-9,
                "instance " + std::to_string(i) + ": |" + std::to_string(got) + " - " +
                    std::to_string(want) + "| > 1e-9");
    }
    const double seconds =
        std::chrono::duration_cast<std::chrono::duration<double>>(Clock::now() - start).count();
    require(seconds < 1.0, "took " + std::to_string(seconds) + "s (budget 1s)");
}

void kid_fixed_cases() {
    const std::vector<double> v = {0.7, -0.1, 2.0};
    require(std::abs(kid_unbiased(matrix({v, v}), matrix({v, v}))) <= 1e-12,
            "duplicate-vector sets must give 0");

    const auto x = matrix({{1.0, 0.0}, {0.0, 1.0}});
    const auto y = matrix({{1.0, 1.0}, {0.0, 0.0}});
    const double got = kid_unbiased(x, y);
    require(std::abs(got - (-2.375)) <= 1e-12, "2x2 instance: got " + std::to_string(got));
    require(std::abs(oracle::kid(x.rows, y.rows) - (-2.375)) <= 1e-12,
            "oracle disagrees with the worked value");
}

void spearman_criteria() {
    const std::vector<double> ranks4 = {1.0, 2.0, 3.0, 4.0};
    const std::vector<double> rev4 = {4.0, 3.0, 2.0, 1.0};
    require(spearman_rho(ranks4, ranks4) == 1.0, "identical ranks must give exactly 1.0");
    require(spearman_rho(ranks4, rev4) == -1.0, "reversed ranks must give exactly -1.0");

    const auto ra = rank_with_ties(std::vector<double>{1.0, 2.0, 3.0}, RankDirection::Ascending);
    const auto rb =
        rank_with_ties(std::vector<double>{10.0, 10.0, 5.0}, RankDirection::Ascending);
    const double tie_case = spearman_rho(ra, rb);
    require(std::abs(tie_case - (-0.8660)) <= 1e-4,
            "tie case: got " + std::to_string(tie_case));
    const double oracle_value = oracle::spearman({1.0, 2.0, 3.0}, {10.0, 10.0, 5.0});
    require(std::abs(tie_case - oracle_value) <= 1e-12, "definition-level oracle disagrees");

    // Monotone-transform invariance over 100 random cases.
    std::mt19937_64 rng(77);
    std::uniform_real_distribution<double> dist(-3.0, 3.0);
    for (int i = 0; i < 100; ++i) {
        const std::size_t n = 3 + rng() % 9;
        std::vector<double> a(n), b(n), a3(n), eb(n);
        for (std::size_t j = 0; j < n; ++j) {
            a[j] = dist(rng);
            b[j] = dist(rng);
        }
        a[n - 1] = a[0];  // exercise ties
        for (std::size_t j = 0; j < n; ++j) {
            a3[j] = a[j] * a[j] * a[j];
            eb[j] = std::exp(b[j]);
        }
        auto rho = [](const std::vector<double>& u, const std::vector<double>& v) {
            return spearman_rho(rank_with_ties(u, RankDirection::Ascending),
                                rank_with_ties(v, RankDirection::Ascending));
        };
        require(rho(a, b) == rho(a3, eb),
                "monotone transform changed rho on case " + std::to_string(i));
    }
}

void plan_format() {
    const std::vector<std::string> fixtures = {
        "llama31-8b-formula1", "llama31-8b-mickey",  "llama31-8b-vangogh",
        "llama33-70b-formula1", "llama33-70b-mickey", "llama33-70b-vangogh",
        "llama32-90b-formula1", "llama32-90b-mickey", "llama32-90b-vangogh",
    };
    for (const auto& name : fixtures) {
        const std::string canonical = slurp(kDataDir / "plans/canonical" / (name + ".json"));
        const EvalPlan plan = decode_plan(canonical);
        require(validate_plan(plan).empty(), name + " must validate");
        require(encode_plan(plan) == canonical, name + " must re-encode byte-identically");
        const std::string raw = slurp(kDataDir / "plans/raw" / (name + ".json"));
        require(decode_plan(raw) == plan, name + ": raw and canonical must decode equal");
    }
    const EvalPlan f1 = decode_plan(slurp(kDataDir / "plans/canonical/llama31-8b-formula1.json"));
    require(f1.nearby[6] == "Indycar" && f1.nearby[7] == "Indy car",
            "Indycar and Indy car must both survive dedup");
}

void rank_aggregation() {
    // Three rounds over five candidates; round 3 is flawed (duplicate + two
    // omissions) and exercises the tail repair.
    const std::vector<std::string> candidates = {"A", "B", "C", "D", "E"};
    const std::vector<std::size_t> identity = {0, 1, 2, 3, 4};
    const std::vector<RerankRound> rounds = {
        repair_ordering(5, identity, {2, 1, 4, 3, 5}),
        repair_ordering(5, identity, {1, 2, 3, 4, 5}),
        repair_ordering(5, identity, {3, 1, 1, 2}),
    };
    const auto ranked = aggregate_ranks(candidates, rounds);
    const std::vector<std::pair<std::string, double>> expected = {
        {"A", 5.0 / 3.0}, {"B", 2.0}, {"C", 8.0 / 3.0}, {"D", 13.0 / 3.0}, {"E", 17.0 / 3.0},
    };
    for (std::size_t i = 0; i < expected.size(); ++i) {
        require(ranked[i].text == expected[i].first, "order mismatch at " + std::to_string(i));
        require(std::abs(ranked[i].avg_rank - expected[i].second) <= 1e-12,
                "average mismatch for " + ranked[i].text);
    }
    const auto top = select_top_k(ranked, 3);
    require(top.size() == 3 && top[0].text == "A" && top[1].text == "B" && top[2].text == "C",
            "top-k order mismatch");
    require(top[2].final_rank == 3, "final ranks must be 1..k");

    // Tie break: earlier first appearance wins.
    std::vector<RankedConcept> tied(2);
    tied[0].text = "earlier";
    tied[0].avg_rank = 2.0;
    tied[1].text = "later";
    tied[1].avg_rank = 2.0;
    const auto picked = select_top_k(tied, 1);
    require(picked[0].text == "earlier", "tie must break by first appearance");
}

nlohmann::json e2e_world(bool monotone) {
    nlohmann::json nearby = nlohmann::json::array();
    for (int i = 1; i <= 10; ++i) {
        nearby.push_back({{"text", "lantern cousin " + std::to_string(i)},
                          {"drift", monotone ? (11 - i) * 0.2 : 0.0}});
    }
    nlohmann::json adv = nlohmann::json::array();
    for (int i = 1; i <= 10; ++i) {
        std::string miss = "amber harbor lanter" + std::to_string(i % 10);
        adv.push_back({{"text", miss}, {"kind", "adv_miss"}, {"target_hits", i % 4}});
    }
    for (int i = 1; i <= 10; ++i) {
        adv.push_back({{"text", "a glowing shape over pier number " + std::to_string(i)},
                       {"kind", "adv_evoke"},
                       {"target_hits", i % 5}});
    }
    return nlohmann::json{
        {"seed", 31},
        {"dim", 16},
        {"noise_scale", 0.0},
        {"center_scale", 4.0},
        {"target", {{"text", "amber harbor lantern"}, {"drift", monotone ? 3.0 : 0.0}}},
        {"nearby", nearby},
        {"adv", adv},
    };
}

EvaluationReport run_e2e(const std::filesystem::path& dir, bool monotone, double* seconds) {
    spit(dir / "world.json", e2e_world(monotone).dump(2));
    const nlohmann::json config = {
        {"out_dir", (dir / "out").string()},
        {"master_seed", 512},
        {"samples_per_prompt", 30},
        {"plan", {{"n", 10}, {"k", 10}, {"brainstorm_rounds", 3}, {"rerank_rounds", 3}}},
        {"world", "world.json"},
    };
    spit(dir / "config.json", config.dump(2));

    const auto start = Clock::now();
    Pipeline pipeline(RunConfig::load(dir / "config.json"));
    const EvaluationReport report = pipeline.cmd_run("amber harbor lantern");
    *seconds =
        std::chrono::duration_cast<std::chrono::duration<double>>(Clock::now() - start).count();

    // Schema validity of the emitted report document.
    const auto doc = nlohmann::json::parse(slurp(pipeline.report_path(dir / "out")));
    for (const char* key :
         {"schema", "target", "config_digest", "plan_digest", "locality", "confusion",
          "adversarial", "manifest_stats"}) {
        require(doc.contains(key), std::string("report must contain \"") + key + "\"");
    }
    require(doc["schema"] == "ueval.report/1", "schema tag mismatch");
    require(doc["locality"]["concepts"].is_array() &&
                doc["locality"]["concepts"].size() == 10,
            "locality must cover the 10 nearby concepts");
    require(doc["confusion"]["base"]["labels"].size() == 11,
            "classification must run over the target plus the 10 nearby labels");
    require(doc["manifest_stats"]["base"]["entries"] == 31 * 30,
            "930 planned images per model role");
    return report;
}

void e2e_mock_run() {
    // 11 concepts (target + 10 nearby) x 30 samples, full pipeline.
    double seconds = 0.0;
    const auto report = run_e2e(fresh_dir("e2e-monotone"), /*monotone=*/true, &seconds);
    require(seconds < 10.0, "monotone run took " + std::to_string(seconds) + "s");
    require(report.locality.spearman_rs.has_value(), "monotone run must have a correlation");
    require(*report.locality.spearman_rs == -1.0,
            "monotone drift must give rs = -1.0 exactly, got " +
                std::to_string(*report.locality.spearman_rs));

    double seconds_zero = 0.0;
    const auto zero = run_e2e(fresh_dir("e2e-zero"), /*monotone=*/false, &seconds_zero);
    require(seconds_zero < 10.0, "zero-drift run took " + std::to_string(seconds_zero) + "s");
    for (const auto& c : zero.locality.concepts) {
        require(std::abs(c.kid) <= 1e-9,
                "zero drift/noise: KID for " + c.concept_text + " exceeds 1e-9");
    }
}

void adversarial_scoring() {
    // Planted classifier with 9/30 target argmaxes -> rate 0.3 exactly.
    ZeroShotResult planted;
    planted.labels = {"tgt", "other"};
    for (int i = 0; i < 30; ++i) {
        planted.argmax.push_back(i < 9 ? 0 : 1);
        planted.scores.push_back({0.0, 0.0});
    }
    require(target_prediction_rate(planted, "tgt") == 0.3, "9/30 must be exactly 0.3");

    ZeroShotResult baseline;
    baseline.labels = planted.labels;
    for (int i = 0; i < 30; ++i) {
        baseline.argmax.push_back(i < 3 ? 0 : 1);  // 0.1
        baseline.scores.push_back({0.0, 0.0});
    }
    EvalPlan plan;
    plan.target = "tgt";
    plan.adv_miss = {"t1"};
    plan.adv_evoke = {"an oblique scene"};
    ZeroShotResult full;
    full.labels = planted.labels;
    for (int i = 0; i < 30; ++i) {
        full.argmax.push_back(0);
        full.scores.push_back({0.0, 0.0});
    }
    const auto report = adversarial_report(plan, baseline, {planted}, {full});
    require(report.baseline_rate == 0.1, "baseline must be 3/30");
    require(report.rows[0].rate == 0.3 && report.rows[1].rate == 1.0, "planted rates mismatch");
    require(std::abs(report.rows[0].delta - 0.2) <= 1e-15 &&
                std::abs(report.rows[1].delta - 0.9) <= 1e-15,
            "deltas must match the planted construction");

    // Confusion fixture reproducing the published pattern: the unlearned
    // model never produces anything classified as the target.
    SyntheticWorld world;
    world.dim = 6;
    world.target = {"tgt concept", 0.5};
    world.nearby = {{"near one", 0.4}, {"near two", 0.3}};
    world.unlearned_alias["tgt concept"] = "near one";

    SyntheticImageClient images(world, ModelRole::Unlearned, 0);
    SyntheticClassifierClient classifier(world);
    ScoreCache cache;
    const auto dir = fresh_dir("adv-confusion");
    GenerateOptions opts;
    opts.run_id = "acc";
    opts.master_seed = 0;
    opts.image_dir = dir;
    opts.params = nlohmann::json::object();
    opts.params_digest = "p";
    EvalPlan world_plan;
    world_plan.target = "tgt concept";
    world_plan.nearby = {"near one", "near two"};
    const auto entries =
        generate_images(make_prompt_set(world_plan, 5), images, ModelRole::Unlearned, opts);

    std::vector<std::pair<std::string, const ZeroShotResult*>> per_concept;
    std::vector<ZeroShotResult> keep_alive;
    keep_alive.reserve(3);
    const std::vector<std::string> labels = {"tgt concept", "near one", "near two"};
    auto rows_for = [&](const std::string& prompt_id) {
        std::vector<ManifestEntry> subset;
        for (const auto& e : entries) {
            if (e.prompt_id == prompt_id) subset.push_back(e);
        }
        return classify_images(subset, labels, classifier, "a photo of {label}", cache);
    };
    keep_alive.push_back(rows_for("target"));
    keep_alive.push_back(rows_for("nearby-01"));
    keep_alive.push_back(rows_for("nearby-02"));
    per_concept = {{"tgt concept", &keep_alive[0]},
                   {"near one", &keep_alive[1]},
                   {"near two", &keep_alive[2]}};
    const auto m = confusion_matrix(per_concept);
    for (std::size_t r = 0; r < m.row_concepts.size(); ++r) {
        require(m.counts[r][0] == 0, "target column must be all zeros in this regime");
    }
}

void idempotence_resume() {
    struct CountingImage : ImageClient {
        explicit CountingImage(std::unique_ptr<ImageClient> in) : inner(std::move(in)) {}
        std::vector<std::uint8_t> generate(const std::string& p, std::uint64_t s,
                                           const nlohmann::json& j) override {
            ++calls;
            return inner->generate(p, s, j);
        }
        std::unique_ptr<ImageClient> inner;
        std::size_t calls = 0;
    };
    struct CountingEmbed : EmbeddingClient {
        explicit CountingEmbed(std::unique_ptr<EmbeddingClient> in) : inner(std::move(in)) {}
        std::vector<double> embed(std::span<const std::uint8_t> img) override {
            ++calls;
            return inner->embed(img);
        }
        std::unique_ptr<EmbeddingClient> inner;
        std::size_t calls = 0;
    };
    struct CountingClassify : ClassifierClient {
        explicit CountingClassify(std::unique_ptr<ClassifierClient> in) : inner(std::move(in)) {}
        std::vector<double> classify(std::span<const std::uint8_t> img,
                                     const std::vector<std::string>& labels) override {
            ++calls;
            return inner->classify(img, labels);
        }
        std::unique_ptr<ClassifierClient> inner;
        std::size_t calls = 0;
    };

    const auto dir = fresh_dir("idempotence");
    spit(dir / "world.json", e2e_world(true).dump(2));
    const nlohmann::json config = {
        {"out_dir", (dir / "out").string()},
        {"master_seed", 512},
        {"samples_per_prompt", 4},
        {"plan", {{"n", 10}, {"k", 10}, {"brainstorm_rounds", 3}, {"rerank_rounds", 3}}},
        {"world", "world.json"},
    };
    spit(dir / "config.json", config.dump(2));
    const RunConfig cfg = RunConfig::load(dir / "config.json");

    auto build = [&](CountingImage** base, CountingEmbed** embed, CountingClassify** classify) {
        BackendSet inner = make_backends(cfg);
        auto b = std::make_unique<CountingImage>(std::move(inner.image_base));
        auto u = std::make_unique<CountingImage>(std::move(inner.image_unlearned));
        auto e = std::make_unique<CountingEmbed>(std::move(inner.embedding));
        auto c = std::make_unique<CountingClassify>(std::move(inner.classifier));
        *base = b.get();
        *embed = e.get();
        *classify = c.get();
        BackendSet set;
        set.chat = std::move(inner.chat);
        set.image_base = std::move(b);
        set.image_unlearned = std::move(u);
        set.embedding = std::move(e);
        set.classifier = std::move(c);
        return set;
    };

    CountingImage* base1;
    CountingEmbed* embed1;
    CountingClassify* classify1;
    Pipeline first(cfg, build(&base1, &embed1, &classify1));
    first.cmd_run("amber harbor lantern");
    require(base1->calls > 0 && embed1->calls > 0, "first run must hit the backends");

    auto read_all = [&](const Pipeline& p) {
        std::string all;
        for (ModelRole role : {ModelRole::Base, ModelRole::Unlearned}) {
            all += slurp(p.manifest_path(role));
            all += slurp(p.features_path(role));
            all += slurp(p.scores_path(role));
        }
        return all;
    };
    const std::string before = read_all(first);

    CountingImage* base2;
    CountingEmbed* embed2;
    CountingClassify* classify2;
    Pipeline second(cfg, build(&base2, &embed2, &classify2));
    second.cmd_generate(second.plan_path(), ModelRole::Base);
    second.cmd_generate(second.plan_path(), ModelRole::Unlearned);
    second.cmd_score();
    require(base2->calls == 0, "warm generate must issue zero image calls");
    require(embed2->calls == 0, "warm score must issue zero embedding calls");
    require(classify2->calls == 0, "warm score must issue zero classification calls");
    require(read_all(second) == before, "warm rerun must be byte-identical");
}

void live_mode_protocol() {
    httplib::Server server;
    std::atomic<std::size_t> request_count{0};
    std::vector<std::string> prompts;
    std::mutex mu;
    server.Post("/v1/chat/completions", [&](const httplib::Request& req,
                                            httplib::Response& res) {
        request_count.fetch_add(1);
        const auto body = nlohmann::json::parse(req.body);
        std::string user;
        for (const auto& m : body.at("messages")) {
            if (m.at("role") == "user") user = m.at("content").get<std::string>();
        }
        {
            std::scoped_lock lock(mu);
            prompts.push_back(user);
        }
        std::string content;
        std::smatch match;
        static const std::regex rerank_re(R"(JSON array of the (\d+) item numbers)");
        static const std::regex count_re(R"(exactly (\d+) strings)");
        if (std::regex_search(user, match, rerank_re)) {
            nlohmann::json arr = nlohmann::json::array();
            for (std::size_t i = 1; i <= std::stoull(match[1].str()); ++i) arr.push_back(i);
            content = arr.dump();
        } else if (std::regex_search(user, match, count_re)) {
            const std::size_t n = std::stoull(match[1].str());
            nlohmann::json arr = nlohmann::json::array();
            for (std::size_t i = 0; i < n; ++i) {
                if (user.find("misspellings") != std::string::npos) {
                    arr.push_back("quiet orchar" + std::to_string(i));
                } else if (user.find("evoke") != std::string::npos) {
                    arr.push_back("rows of fruit trees at dawn, take " + std::to_string(i + 1));
                } else {
                    arr.push_back("grove concept " + std::to_string(i + 1));
                }
            }
            content = arr.dump();
        } else {
            content = "?";
        }
        nlohmann::json reply;
        reply["choices"] = {{{"message", {{"content", content}}}}};
        res.set_content(reply.dump(), "application/json");
    });
    const int port = server.bind_to_any_port("127.0.0.1");
    std::thread thread([&server] { server.listen_after_bind(); });
    server.wait_until_ready();

    PlanConfig plan_cfg;
    plan_cfg.n = 5;
    plan_cfg.k = 5;
    plan_cfg.brainstorm_rounds = 3;
    plan_cfg.rerank_rounds = 3;
    ChatBackendConfig chat_cfg;
    chat_cfg.base_url = "http://127.0.0.1:" + std::to_string(port);
    chat_cfg.model = "stub";
    chat_cfg.api_key_env = "";

    HttpChatClient chat(chat_cfg);
    const EvalPlan plan =
        build_plan("quiet orchard", plan_cfg, chat, ChatOptions::from(chat_cfg), 3);
    server.stop();
    thread.join();

    require(validate_plan(plan).empty(), "live-mode plan must be schema-valid");
    require(plan.nearby.size() == 5 && plan.adv_miss.size() == 5 && plan.adv_evoke.size() == 5,
            "live-mode plan must carry k items per list");
    require(request_count.load() == 3 * (3 + 3),
            "expected brainstorm_rounds + rerank_rounds requests per kind, got " +
                std::to_string(request_count.load()));

    std::size_t miss = 0, evoke = 0, nearby = 0;
    for (const auto& p : prompts) {
        if (p.find("item numbers") != std::string::npos) continue;
        if (p.find("misspellings") != std::string::npos) ++miss;
        else if (p.find("evoke") != std::string::npos) ++evoke;
        else ++nearby;
    }
    require(miss == 3 && evoke == 3 && nearby == 3,
            "each kind must issue exactly brainstorm_rounds brainstorm requests");
}

}  // namespace

int main() {
    criterion("KID oracle equivalence (100 random instances, <= 1e-9, < 1s)",
              kid_oracle_equivalence);
    criterion("KID fixed cases (duplicates -> 0; 2x2 instance -> -2.375)", kid_fixed_cases);
    criterion("Spearman endpoints, tie case, monotone-transform invariance", spearman_criteria);
    criterion("Plan format: published fixtures decode/validate/re-encode byte-identically",
              plan_format);
    criterion("Rank aggregation fixture (averages, tail repair, tie break)", rank_aggregation);
    criterion("End-to-end mock run (11 concepts x 30 samples, < 10s, rs = -1 / KID <= 1e-9)",
              e2e_mock_run);
    criterion("Adversarial scoring (rate 0.3, deltas, all-zero target column)",
              adversarial_scoring);
    criterion("Idempotence/resume (warm rerun: zero calls, byte-identical outputs)",
              idempotence_resume);
    criterion("Live-mode protocol compliance (OpenAI-compatible stub wire format)",
              live_mode_protocol);

    if (failures > 0) {
        std::cout << failures << " criterion(s) failed\n";
        return 1;
    }
    std::cout << "all acceptance criteria passed\n";
    return 0;
}
