#include "ueval/pipeline.hpp"

#include "ueval/digest.hpp"
#include "ueval/error.hpp"
#include "ueval/http_backends.hpp"
#include "ueval/protocol.hpp"
#include "ueval/text.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>

namespace ueval {

namespace {

std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw SchemaError("cannot read file: " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

// Atomic write: stage outputs either exist complete or not at all.
void write_text_file(const std::filesystem::path& path, const std::string& text) {
    std::filesystem::create_directories(path.parent_path());
    const auto tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        out << text;
        if (!out) throw SchemaError("cannot write file: " + tmp);
    }
    std::filesystem::rename(tmp, path);
}

std::string csv_quote(const std::string& field) {
    if (field.find_first_of(",\"\n") == std::string::npos) return field;
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') out += "\"\"";
        else out.push_back(c);
    }
    out += "\"";
    return out;
}

// Shortest round-trip decimal form (what the JSON serializer emits).
std::string num(double v) { return nlohmann::json(v).dump(); }

struct StoreMeta {
    std::string schema;
    std::string config_digest;
    std::string plan_digest;
    std::string role;
    nlohmann::json extra;
};

StoreMeta parse_meta(const std::string& line, const std::filesystem::path& path) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error&) {
        throw SchemaError("corrupt store header in " + path.string());
    }
    StoreMeta meta;
    meta.schema = j.value("schema", "");
    meta.config_digest = j.value("config_digest", "");
    meta.plan_digest = j.value("plan_digest", "");
    meta.role = j.value("role", "");
    meta.extra = j;
    return meta;
}

// Read a JSON-lines store; first line is the meta header.
std::pair<StoreMeta, std::vector<nlohmann::json>> read_store(
    const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw SchemaError("cannot read store: " + path.string());
    std::string line;
    if (!std::getline(in, line)) throw SchemaError("empty store: " + path.string());
    StoreMeta meta = parse_meta(line, path);
    std::vector<nlohmann::json> rows;
    while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        try {
            rows.push_back(nlohmann::json::parse(line));
        } catch (const nlohmann::json::parse_error&) {
            throw SchemaError("corrupt row in " + path.string());
        }
    }
    return {std::move(meta), std::move(rows)};
}

}  // namespace

// ---------------------------------------------------------------------------
// Backends
// ---------------------------------------------------------------------------

BackendSet make_backends(const RunConfig& cfg) {
    BackendSet set;
    std::optional<SyntheticWorld> world;
    if (cfg.world_path) world = SyntheticWorld::load(*cfg.world_path);
    auto need_world = [&]() -> const SyntheticWorld& {
        if (!world) throw ConfigError("synthetic backend requires a world file");
        return *world;
    };

    if (cfg.chat_type == BackendType::Http) {
        set.chat = std::make_unique<HttpChatClient>(cfg.chat);
    } else {
        set.chat = std::make_unique<SyntheticChatClient>(need_world());
    }

    auto make_image = [&](const ImageEndpointConfig& img, ModelRole role)
        -> std::unique_ptr<ImageClient> {
        if (img.type == BackendType::Http) return std::make_unique<HttpImageClient>(img.endpoint);
        return std::make_unique<SyntheticImageClient>(need_world(), role, cfg.master_seed,
                                                      cfg.caption_template);
    };
    set.image_base = make_image(cfg.image_base, ModelRole::Base);
    set.image_unlearned = make_image(cfg.image_unlearned, ModelRole::Unlearned);

    if (cfg.embedding.type == BackendType::Http) {
        set.embedding = std::make_unique<HttpEmbeddingClient>(cfg.embedding.endpoint);
    } else {
        set.embedding = std::make_unique<SyntheticEmbeddingClient>(need_world());
    }
    if (cfg.classifier.type == BackendType::Http) {
        set.classifier = std::make_unique<HttpClassifierClient>(cfg.classifier.endpoint);
    } else {
        set.classifier = std::make_unique<SyntheticClassifierClient>(need_world(),
                                                                     cfg.label_template);
    }
    return set;
}

// ---------------------------------------------------------------------------
// Report serialization
// ---------------------------------------------------------------------------

nlohmann::ordered_json EvaluationReport::to_json() const {
    nlohmann::ordered_json j;
    j["schema"] = "ueval.report/1";
    j["target"] = target;
    j["config_digest"] = config_digest;
    j["plan_digest"] = plan_digest;

    nlohmann::ordered_json loc;
    loc["target"] = locality.target;
    if (locality.spearman_rs) {
        loc["spearman_rs"] = *locality.spearman_rs;
    } else {
        loc["spearman_rs"] = nullptr;
        loc["degenerate_reason"] = locality.degenerate_reason;
    }
    loc["concepts"] = nlohmann::ordered_json::array();
    for (const auto& c : locality.concepts) {
        nlohmann::ordered_json row;
        row["concept"] = c.concept_text;
        row["similarity_rank"] = c.similarity_rank;
        row["kid"] = c.kid;
        row["samples_base"] = c.samples_base;
        row["samples_unlearned"] = c.samples_unlearned;
        loc["concepts"].push_back(std::move(row));
    }
    j["locality"] = std::move(loc);
    if (target_kid) j["target_kid"] = *target_kid;

    auto confusion_json = [](const ConfusionMatrix& m) {
        nlohmann::ordered_json cj;
        cj["labels"] = m.labels;
        cj["rows"] = nlohmann::ordered_json::array();
        for (std::size_t r = 0; r < m.row_concepts.size(); ++r) {
            nlohmann::ordered_json row;
            row["concept"] = m.row_concepts[r];
            row["counts"] = m.counts[r];
            row["rates"] = m.rates[r];
            cj["rows"].push_back(std::move(row));
        }
        return cj;
    };
    j["confusion"] = nlohmann::ordered_json::object();
    j["confusion"]["base"] = confusion_json(confusion_base);
    j["confusion"]["unlearned"] = confusion_json(confusion_unlearned);

    if (adversarial) {
        nlohmann::ordered_json adv;
        adv["baseline_rate"] = adversarial->baseline_rate;
        adv["labels"] = adversarial->labels;
        adv["rows"] = nlohmann::ordered_json::array();
        for (const auto& row : adversarial->rows) {
            nlohmann::ordered_json rj;
            rj["prompt"] = row.prompt_text;
            rj["kind"] = row.kind;
            rj["rate"] = row.rate;
            rj["delta"] = row.delta;
            adv["rows"].push_back(std::move(rj));
        }
        j["adversarial"] = std::move(adv);
    }

    j["manifest_stats"] = nlohmann::ordered_json::object();
    j["manifest_stats"]["base"] = {{"entries", stats_base.entries},
                                   {"failures", stats_base.failures}};
    j["manifest_stats"]["unlearned"] = {{"entries", stats_unlearned.entries},
                                        {"failures", stats_unlearned.failures}};
    return j;
}

// ---------------------------------------------------------------------------
// Pipeline
// ---------------------------------------------------------------------------

Pipeline::Pipeline(RunConfig cfg) : cfg_(std::move(cfg)), backends_(make_backends(cfg_)) {}

Pipeline::Pipeline(RunConfig cfg, BackendSet backends)
    : cfg_(std::move(cfg)), backends_(std::move(backends)) {}

void Pipeline::log(const std::string& line) const {
    if (log_) *log_ << line << "\n";
}

std::filesystem::path Pipeline::plan_path() const { return cfg_.out_dir / "plan.json"; }

std::filesystem::path Pipeline::image_dir() const { return cfg_.out_dir / "images"; }

std::filesystem::path Pipeline::manifest_path(ModelRole role) const {
    return cfg_.out_dir / ("manifest-" + to_string(role) + "-" + cfg_.digest12() + ".jsonl");
}

std::filesystem::path Pipeline::features_path(ModelRole role) const {
    return cfg_.out_dir / ("features-" + to_string(role) + "-" + cfg_.digest12() + ".jsonl");
}

std::filesystem::path Pipeline::scores_path(ModelRole role) const {
    return cfg_.out_dir / ("scores-" + to_string(role) + "-" + cfg_.digest12() + ".jsonl");
}

std::filesystem::path Pipeline::report_path(const std::filesystem::path& report_dir) const {
    return report_dir / ("report-" + cfg_.digest12() + ".json");
}

EvalPlan Pipeline::load_plan() const {
    const auto path = plan_path();
    if (!std::filesystem::exists(path)) {
        throw ContractError("plan file missing: " + path.string() + " (run the plan stage)");
    }
    EvalPlan plan = decode_plan(read_text_file(path));
    if (const auto violations = validate_plan(plan); !violations.empty()) {
        throw SchemaError("plan file invalid: " + violations.front().str());
    }
    return plan;
}

std::string Pipeline::plan_digest() const { return sha256_hex(read_text_file(plan_path())); }

EvalPlan Pipeline::cmd_plan(const std::string& target, const std::filesystem::path& out_path) {
    const EvalPlan plan = build_plan(target, cfg_.plan, *backends_.chat,
                                     ChatOptions::from(cfg_.chat), cfg_.master_seed);
    write_text_file(out_path, encode_plan(plan));
    log("plan: target \"" + plan.target + "\", " + std::to_string(plan.nearby.size()) +
        " nearby, " + std::to_string(plan.adv_miss.size()) + " misspellings, " +
        std::to_string(plan.adv_evoke.size()) + " evocative prompts -> " + out_path.string());
    log("plan: validation clean");
    return plan;
}

void Pipeline::cmd_generate(const std::filesystem::path& source_plan, ModelRole role) {
    // The out_dir plan is the run's single source of truth; an explicit
    // --plan from elsewhere is installed on first use and must not silently
    // change afterwards.
    const std::string source_text = read_text_file(source_plan);
    {
        EvalPlan plan = decode_plan(source_text);
        if (const auto violations = validate_plan(plan); !violations.empty()) {
            throw SchemaError("plan file invalid: " + violations.front().str());
        }
    }
    if (!std::filesystem::exists(plan_path())) {
        write_text_file(plan_path(), source_text);
    } else if (read_text_file(plan_path()) != source_text) {
        throw ContractError("plan file " + source_plan.string() +
                            " differs from the run's installed plan " + plan_path().string());
    }

    const EvalPlan plan = load_plan();
    const auto specs = make_prompt_set(plan, cfg_.samples_per_prompt, cfg_.caption_strategy,
                                       cfg_.caption_template);

    const auto& img_cfg = role == ModelRole::Base ? cfg_.image_base : cfg_.image_unlearned;
    GenerateOptions opts;
    opts.run_id = cfg_.digest12();
    opts.master_seed = cfg_.master_seed;
    opts.failure_ceiling = cfg_.failure_ceiling;
    opts.max_in_flight = cfg_.max_in_flight;
    opts.max_retries = img_cfg.max_retries;
    opts.image_dir = image_dir();
    opts.params = img_cfg.params;
    opts.params_digest = sha256_hex(img_cfg.params.dump());

    // Warm cache: reuse the existing manifest when it was produced under the
    // same config digest and plan, plus anything a killed run journaled.
    std::vector<ManifestEntry> prior;
    const auto path = manifest_path(role);
    if (std::filesystem::exists(path)) {
        auto [meta, rows] = read_store(path);
        if (meta.schema == "ueval.manifest/1" && meta.config_digest == cfg_.digest() &&
            meta.plan_digest == plan_digest() && meta.role == to_string(role)) {
            for (const auto& row : rows) prior.push_back(ManifestEntry::from_json(row));
        }
    }
    // The journal name binds both digests, so entries can be trusted as-is.
    opts.journal_path = cfg_.out_dir / ("manifest-" + to_string(role) + "-" + cfg_.digest12() +
                                        "." + plan_digest().substr(0, 12) + ".journal");
    for (auto& e : read_manifest_journal(opts.journal_path)) prior.push_back(std::move(e));

    ImageClient& backend =
        role == ModelRole::Base ? *backends_.image_base : *backends_.image_unlearned;
    const auto entries = generate_images(specs, backend, role, opts, prior);

    nlohmann::json meta;
    meta["schema"] = "ueval.manifest/1";
    meta["config_digest"] = cfg_.digest();
    meta["plan_digest"] = plan_digest();
    meta["role"] = to_string(role);
    meta["params_digest"] = opts.params_digest;

    std::string text = meta.dump() + "\n";
    std::size_t failures = 0;
    for (const auto& e : entries) {
        text += e.to_json().dump() + "\n";
        failures += e.failed() ? 1 : 0;
    }
    write_text_file(path, text);
    std::error_code ec;
    std::filesystem::remove(opts.journal_path, ec);  // manifest is durable now
    log("generate[" + to_string(role) + "]: " + std::to_string(entries.size()) + " entries, " +
        std::to_string(failures) + " failures -> " + path.string());
}

void Pipeline::cmd_score() {
    const EvalPlan plan = load_plan();
    const std::string pdigest = plan_digest();

    std::vector<std::string> labels;
    labels.push_back(plan.target);
    labels.insert(labels.end(), plan.nearby.begin(), plan.nearby.end());
    const std::string ldigest = labels_digest(labels, cfg_.label_template);

    for (ModelRole role : {ModelRole::Base, ModelRole::Unlearned}) {
        const auto mpath = manifest_path(role);
        if (!std::filesystem::exists(mpath)) {
            throw ContractError("manifest missing for role " + to_string(role) +
                                ": run the generate stage first");
        }
        auto [meta, rows] = read_store(mpath);
        if (meta.schema != "ueval.manifest/1" || meta.config_digest != cfg_.digest() ||
            meta.plan_digest != pdigest) {
            throw ContractError("manifest " + mpath.string() +
                                " was produced under a different config or plan");
        }
        std::vector<ManifestEntry> entries;
        for (const auto& row : rows) {
            auto e = ManifestEntry::from_json(row);
            if (!e.failed()) entries.push_back(std::move(e));
        }

        // Serve reruns from the persisted stores.
        EmbedCache embed_cache;
        const auto fpath = features_path(role);
        if (std::filesystem::exists(fpath)) {
            auto [fmeta, frows] = read_store(fpath);
            if (fmeta.config_digest == cfg_.digest() && fmeta.plan_digest == pdigest) {
                for (const auto& row : frows) {
                    embed_cache[row.at("hash").get<std::string>()] =
                        row.at("vector").get<std::vector<double>>();
                }
            }
        }
        const FeatureMatrix features =
            embed_images(entries, *backends_.embedding, embed_cache, cfg_.max_in_flight);

        nlohmann::json fmeta;
        fmeta["schema"] = "ueval.features/1";
        fmeta["config_digest"] = cfg_.digest();
        fmeta["plan_digest"] = pdigest;
        fmeta["role"] = to_string(role);
        fmeta["dim"] = features.dim;
        std::string ftext = fmeta.dump() + "\n";
        for (std::size_t i = 0; i < features.rows.size(); ++i) {
            nlohmann::json row;
            row["prompt_id"] = features.keys[i].prompt_id;
            row["seed"] = features.keys[i].seed;
            row["hash"] = entries[i].content_hash;
            row["vector"] = features.rows[i];
            ftext += row.dump() + "\n";
        }
        write_text_file(fpath, ftext);

        ScoreCache score_cache;
        const auto spath = scores_path(role);
        if (std::filesystem::exists(spath)) {
            auto [smeta, srows] = read_store(spath);
            if (smeta.config_digest == cfg_.digest() && smeta.plan_digest == pdigest &&
                smeta.extra.value("labels_digest", "") == ldigest) {
                for (const auto& row : srows) {
                    score_cache[{row.at("hash").get<std::string>(), ldigest}] =
                        row.at("scores").get<std::vector<double>>();
                }
            }
        }
        const ZeroShotResult scored =
            classify_images(entries, labels, *backends_.classifier, cfg_.label_template,
                            score_cache, cfg_.max_in_flight);

        nlohmann::json smeta;
        smeta["schema"] = "ueval.scores/1";
        smeta["config_digest"] = cfg_.digest();
        smeta["plan_digest"] = pdigest;
        smeta["role"] = to_string(role);
        smeta["labels"] = labels;
        smeta["labels_digest"] = ldigest;
        std::string stext = smeta.dump() + "\n";
        for (std::size_t i = 0; i < scored.scores.size(); ++i) {
            nlohmann::json row;
            row["prompt_id"] = scored.keys[i].prompt_id;
            row["seed"] = scored.keys[i].seed;
            row["hash"] = entries[i].content_hash;
            row["scores"] = scored.scores[i];
            row["argmax"] = scored.argmax[i];
            stext += row.dump() + "\n";
        }
        write_text_file(spath, stext);
        log("score[" + to_string(role) + "]: " + std::to_string(entries.size()) +
            " images embedded and classified over " + std::to_string(labels.size()) + " labels");
    }
}

EvaluationReport Pipeline::cmd_report(const std::filesystem::path& report_dir) {
    const EvalPlan plan = load_plan();
    const std::string pdigest = plan_digest();
    const auto specs = make_prompt_set(plan, cfg_.samples_per_prompt, cfg_.caption_strategy,
                                       cfg_.caption_template);

    // Per-role, per-prompt feature matrices and zero-shot results.
    std::map<std::string, FeatureMatrix> features[2];
    std::map<std::string, ZeroShotResult> scores[2];
    ManifestStats stats[2];

    for (ModelRole role : {ModelRole::Base, ModelRole::Unlearned}) {
        const std::size_t r = role == ModelRole::Base ? 0 : 1;
        const auto fpath = features_path(role);
        const auto spath = scores_path(role);
        if (!std::filesystem::exists(fpath) || !std::filesystem::exists(spath)) {
            throw ContractError("stage outputs for config digest " + cfg_.digest12() +
                                " not found (config edited since score ran, or score not run)");
        }
        auto [fmeta, frows] = read_store(fpath);
        if (fmeta.config_digest != cfg_.digest() || fmeta.plan_digest != pdigest) {
            throw ContractError("feature store " + fpath.string() +
                                " was produced under a different config or plan; refusing");
        }
        const std::size_t dim = fmeta.extra.value("dim", std::size_t{0});
        for (const auto& row : frows) {
            const std::string prompt_id = row.at("prompt_id").get<std::string>();
            auto& m = features[r][prompt_id];
            m.dim = dim;
            m.rows.push_back(row.at("vector").get<std::vector<double>>());
            m.keys.push_back({role, prompt_id, row.at("seed").get<std::uint64_t>()});
        }

        auto [smeta, srows] = read_store(spath);
        if (smeta.config_digest != cfg_.digest() || smeta.plan_digest != pdigest) {
            throw ContractError("score store " + spath.string() +
                                " was produced under a different config or plan; refusing");
        }
        const auto labels = smeta.extra.at("labels").get<std::vector<std::string>>();
        for (const auto& row : srows) {
            const std::string prompt_id = row.at("prompt_id").get<std::string>();
            auto& z = scores[r][prompt_id];
            z.labels = labels;
            z.scores.push_back(row.at("scores").get<std::vector<double>>());
            z.argmax.push_back(row.at("argmax").get<std::size_t>());
            z.keys.push_back({role, prompt_id, row.at("seed").get<std::uint64_t>()});
        }

        auto [mmeta, mrows] = read_store(manifest_path(role));
        if (mmeta.config_digest != cfg_.digest() || mmeta.plan_digest != pdigest) {
            throw ContractError("manifest was produced under a different config or plan");
        }
        stats[r].entries = mrows.size();
        for (const auto& row : mrows) {
            stats[r].failures += row.at("image_path").get<std::string>().empty() ? 1 : 0;
        }
    }

    auto feature_of = [&](std::size_t r, const std::string& prompt_id) -> const FeatureMatrix& {
        const auto it = features[r].find(prompt_id);
        if (it == features[r].end()) {
            throw ContractError("feature store missing rows for prompt " + prompt_id);
        }
        return it->second;
    };
    auto scores_of = [&](std::size_t r, const std::string& prompt_id) -> const ZeroShotResult& {
        const auto it = scores[r].find(prompt_id);
        if (it == scores[r].end()) {
            throw ContractError("score store missing rows for prompt " + prompt_id);
        }
        return it->second;
    };

    EvaluationReport report;
    report.target = plan.target;
    report.config_digest = cfg_.digest();
    report.plan_digest = pdigest;

    // Locality: similarity rank i+1 for the i-th nearby concept (the plan
    // encodes final ranks by position).
    std::vector<RankedConcept> ranked;
    std::vector<FeatureMatrix> base_feats;
    std::vector<FeatureMatrix> unl_feats;
    std::map<std::string, std::string> prompt_id_of_concept;
    for (std::size_t i = 0; i < plan.nearby.size(); ++i) {
        RankedConcept rc;
        rc.text = plan.nearby[i];
        rc.positions = {static_cast<int>(i) + 1};
        rc.avg_rank = static_cast<double>(i + 1);
        rc.final_rank = static_cast<int>(i) + 1;
        ranked.push_back(rc);
        const auto it = std::find_if(specs.begin(), specs.end(), [&](const PromptSpec& s) {
            return s.kind == PromptKind::Nearby && s.concept_text == plan.nearby[i];
        });
        if (it == specs.end()) throw ContractError("prompt set missing a nearby concept");
        prompt_id_of_concept[plan.nearby[i]] = it->prompt_id;
        base_feats.push_back(feature_of(0, it->prompt_id));
        unl_feats.push_back(feature_of(1, it->prompt_id));
    }
    try {
        report.locality = locality_report(plan.target, ranked, base_feats, unl_feats);
    } catch (const UndefinedCorrelationError& e) {
        report.locality.target = plan.target;
        report.locality.concepts = concept_damages(ranked, base_feats, unl_feats);
        report.locality.spearman_rs = std::nullopt;
        report.locality.degenerate_reason = e.what();
        log("report: locality correlation undefined: " + std::string(e.what()));
    }
    report.target_kid = kid_unbiased(feature_of(0, "target"), feature_of(1, "target"));

    // Confusion matrices over {target} + nearby, per role.
    for (std::size_t r : {std::size_t{0}, std::size_t{1}}) {
        std::vector<std::pair<std::string, const ZeroShotResult*>> per_concept;
        per_concept.emplace_back(plan.target, &scores_of(r, "target"));
        for (const auto& c : plan.nearby) {
            per_concept.emplace_back(c, &scores_of(r, prompt_id_of_concept.at(c)));
        }
        auto m = confusion_matrix(per_concept);
        (r == 0 ? report.confusion_base : report.confusion_unlearned) = std::move(m);
    }

    // Adversarial robustness is measured against the unlearned model.
    if (!plan.adv_miss.empty() || !plan.adv_evoke.empty()) {
        std::vector<ZeroShotResult> miss_results;
        std::vector<ZeroShotResult> evoke_results;
        for (const auto& spec : specs) {
            if (spec.kind == PromptKind::AdvMiss) {
                miss_results.push_back(scores_of(1, spec.prompt_id));
            } else if (spec.kind == PromptKind::AdvEvoke) {
                evoke_results.push_back(scores_of(1, spec.prompt_id));
            }
        }
        report.adversarial =
            adversarial_report(plan, scores_of(1, "target"), miss_results, evoke_results);
    }

    report.stats_base = stats[0];
    report.stats_unlearned = stats[1];

    // Emit report JSON plus per-figure CSV data.
    write_text_file(report_path(report_dir), report.to_json().dump(4) + "\n");

    std::string kid_csv = "concept,similarity_rank,kid\n";
    for (const auto& c : report.locality.concepts) {
        kid_csv += csv_quote(c.concept_text) + "," + num(c.similarity_rank) + "," + num(c.kid) +
                   "\n";
    }
    write_text_file(report_dir / ("kid_vs_rank-" + cfg_.digest12() + ".csv"), kid_csv);

    auto confusion_csv = [&](const ConfusionMatrix& m) {
        std::string csv = "concept";
        for (const auto& l : m.labels) csv += "," + csv_quote(l);
        csv += "\n";
        for (std::size_t r = 0; r < m.row_concepts.size(); ++r) {
            csv += csv_quote(m.row_concepts[r]);
            for (double rate : m.rates[r]) csv += "," + num(rate);
            csv += "\n";
        }
        return csv;
    };
    write_text_file(report_dir / ("confusion-base-" + cfg_.digest12() + ".csv"),
                    confusion_csv(report.confusion_base));
    write_text_file(report_dir / ("confusion-unlearned-" + cfg_.digest12() + ".csv"),
                    confusion_csv(report.confusion_unlearned));

    if (report.adversarial) {
        std::string adv_csv = "prompt,kind,rate,delta\n";
        adv_csv += csv_quote(plan.target) + ",target," + num(report.adversarial->baseline_rate) +
                   ",0\n";
        for (const auto& row : report.adversarial->rows) {
            adv_csv += csv_quote(row.prompt_text) + "," + row.kind + "," + num(row.rate) + "," +
                       num(row.delta) + "\n";
        }
        write_text_file(report_dir / ("adversarial_rates-" + cfg_.digest12() + ".csv"), adv_csv);
    }

    log("report -> " + report_path(report_dir).string());
    return report;
}

EvaluationReport Pipeline::cmd_run(const std::string& target) {
    // Resume at any completed stage: the plan is reused when present, and
    // the generate/score stages serve themselves from their caches.
    if (std::filesystem::exists(plan_path())) {
        const EvalPlan existing = load_plan();
        if (existing.target != target) {
            throw ContractError("existing plan targets \"" + existing.target +
                                "\", not \"" + target + "\"; use a fresh out_dir");
        }
        log("run: reusing existing plan " + plan_path().string());
    } else {
        cmd_plan(target, plan_path());
    }
    cmd_generate(plan_path(), ModelRole::Base);
    cmd_generate(plan_path(), ModelRole::Unlearned);
    cmd_score();
    return cmd_report(cfg_.out_dir);
}

}  // namespace ueval
