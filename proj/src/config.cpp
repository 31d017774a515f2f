#include "ueval/config.hpp"

#include "ueval/digest.hpp"
#include "ueval/error.hpp"

#include <fstream>
#include <initializer_list>
#include <sstream>

namespace ueval {

namespace {

void check_keys(const nlohmann::json& obj, const std::string& where,
                std::initializer_list<const char*> allowed) {
    for (const auto& item : obj.items()) {
        bool known = false;
        for (const char* key : allowed) known = known || item.key() == key;
        if (!known) {
            throw ConfigError("unknown config key \"" + where + item.key() + "\"");
        }
    }
}

BackendType backend_type(const nlohmann::json& node, const std::string& where) {
    const std::string type = node.value("type", "http");
    if (type == "http") return BackendType::Http;
    if (type == "synthetic") return BackendType::Synthetic;
    throw ConfigError(where + "type must be \"http\" or \"synthetic\"");
}

EndpointConfig endpoint_from(const nlohmann::json& node, int default_timeout_ms) {
    EndpointConfig e;
    e.base_url = node.value("base_url", "");
    e.timeout_ms = node.value("timeout_ms", default_timeout_ms);
    e.api_key_env = node.value("api_key_env", "");
    return e;
}

template <typename T>
T get_checked(const nlohmann::json& node, const char* key, T fallback,
              const std::string& where) {
    if (!node.contains(key)) return fallback;
    try {
        return node.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
        throw ConfigError("config key \"" + where + key + "\" has the wrong type");
    }
}

}  // namespace

RunConfig RunConfig::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config file: " + path.string());
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError("config file is not valid JSON: " + std::string(e.what()));
    }
    return from_json(doc, path.parent_path());
}

RunConfig RunConfig::from_json(const nlohmann::json& doc,
                               const std::filesystem::path& base_dir) {
    if (!doc.is_object()) throw ConfigError("config must be a JSON object");
    check_keys(doc, "",
               {"out_dir", "master_seed", "samples_per_prompt", "failure_ceiling",
                "max_in_flight", "caption_template", "label_template", "caption_strategy",
                "plan", "world", "chat", "image_base", "image_unlearned", "embedding",
                "classifier"});

    RunConfig cfg;
    cfg.out_dir = get_checked<std::string>(doc, "out_dir", "out", "");
    cfg.master_seed = get_checked<std::uint64_t>(doc, "master_seed", 42, "");
    cfg.samples_per_prompt = get_checked<int>(doc, "samples_per_prompt", 30, "");
    cfg.failure_ceiling = get_checked<double>(doc, "failure_ceiling", 0.0, "");
    cfg.max_in_flight = get_checked<int>(doc, "max_in_flight", 4, "");
    cfg.caption_template =
        get_checked<std::string>(doc, "caption_template", "a photo of {concept}", "");
    cfg.label_template =
        get_checked<std::string>(doc, "label_template", "a photo of {label}", "");

    const std::string strategy = get_checked<std::string>(doc, "caption_strategy", "template", "");
    if (strategy == "template") {
        cfg.caption_strategy = CaptionStrategy::Template;
    } else if (strategy == "verbatim") {
        cfg.caption_strategy = CaptionStrategy::Verbatim;
    } else {
        throw ConfigError("caption_strategy must be \"template\" or \"verbatim\"");
    }

    if (doc.contains("plan")) {
        const auto& p = doc["plan"];
        check_keys(p, "plan.", {"n", "k", "brainstorm_rounds", "rerank_rounds"});
        cfg.plan.n = get_checked<int>(p, "n", 10, "plan.");
        cfg.plan.k = get_checked<int>(p, "k", 10, "plan.");
        cfg.plan.brainstorm_rounds = get_checked<int>(p, "brainstorm_rounds", 3, "plan.");
        cfg.plan.rerank_rounds = get_checked<int>(p, "rerank_rounds", 3, "plan.");
    }

    if (doc.contains("chat")) {
        const auto& c = doc["chat"];
        check_keys(c, "chat.",
                   {"type", "base_url", "model", "temperature_brainstorm", "temperature_rerank",
                    "max_retries", "timeout_ms", "api_key_env"});
        cfg.chat_type = backend_type(c, "chat.");
        cfg.chat.base_url = get_checked<std::string>(c, "base_url", "", "chat.");
        cfg.chat.model = get_checked<std::string>(c, "model", "", "chat.");
        cfg.chat.temperature_brainstorm =
            get_checked<double>(c, "temperature_brainstorm", 0.7, "chat.");
        cfg.chat.temperature_rerank = get_checked<double>(c, "temperature_rerank", 0.0, "chat.");
        cfg.chat.max_retries = get_checked<int>(c, "max_retries", 1, "chat.");
        cfg.chat.timeout_ms = get_checked<int>(c, "timeout_ms", 30000, "chat.");
        cfg.chat.api_key_env =
            get_checked<std::string>(c, "api_key_env", "UEVAL_CHAT_API_KEY", "chat.");
    } else {
        cfg.chat_type = BackendType::Synthetic;
    }

    auto image_from = [&](const char* key) {
        ImageEndpointConfig img;
        if (!doc.contains(key)) {
            img.type = BackendType::Synthetic;
            return img;
        }
        const auto& node = doc[key];
        const std::string where = std::string(key) + ".";
        check_keys(node, where,
                   {"type", "base_url", "timeout_ms", "api_key_env", "params", "max_retries"});
        img.type = backend_type(node, where);
        img.endpoint = endpoint_from(node, 60000);
        img.params = node.value("params", nlohmann::json::object());
        img.max_retries = get_checked<int>(node, "max_retries", 2, where);
        return img;
    };
    cfg.image_base = image_from("image_base");
    cfg.image_unlearned = image_from("image_unlearned");

    auto perception_from = [&](const char* key) {
        PerceptionEndpointConfig p;
        if (!doc.contains(key)) {
            p.type = BackendType::Synthetic;
            return p;
        }
        const auto& node = doc[key];
        const std::string where = std::string(key) + ".";
        check_keys(node, where, {"type", "base_url", "timeout_ms", "api_key_env"});
        p.type = backend_type(node, where);
        p.endpoint = endpoint_from(node, 60000);
        return p;
    };
    cfg.embedding = perception_from("embedding");
    cfg.classifier = perception_from("classifier");

    if (doc.contains("world")) {
        const std::string rel = get_checked<std::string>(doc, "world", "", "");
        cfg.world_path = base_dir / rel;
    }

    cfg.validate();

    // Run identity: config content (minus out_dir) + world content.
    nlohmann::json canonical = doc;
    canonical.erase("out_dir");
    std::string material = canonical.dump();
    if (cfg.world_path) {
        std::ifstream world(*cfg.world_path);
        if (!world) throw ConfigError("cannot read world file: " + cfg.world_path->string());
        std::stringstream buf;
        buf << world.rdbuf();
        material += '\x1f';
        material += sha256_hex(buf.str());
    }
    cfg.digest_ = sha256_hex(material);
    return cfg;
}

void RunConfig::validate() const {
    if (out_dir.empty()) throw ConfigError("out_dir must be set");
    if (samples_per_prompt < 1) throw ConfigError("samples_per_prompt must be >= 1");
    if (max_in_flight < 1) throw ConfigError("max_in_flight must be >= 1");
    if (failure_ceiling < 0.0 || failure_ceiling >= 1.0) {
        throw ConfigError("failure_ceiling must be in [0, 1)");
    }
    plan.validate();

    const bool any_synthetic =
        chat_type == BackendType::Synthetic || image_base.type == BackendType::Synthetic ||
        image_unlearned.type == BackendType::Synthetic ||
        embedding.type == BackendType::Synthetic || classifier.type == BackendType::Synthetic;
    if (any_synthetic && !world_path) {
        throw ConfigError("a synthetic backend is configured but no \"world\" file is set");
    }

    if (chat_type == BackendType::Http) chat.validate();
    if (image_base.type == BackendType::Http) image_base.endpoint.validate();
    if (image_unlearned.type == BackendType::Http) image_unlearned.endpoint.validate();
    if (embedding.type == BackendType::Http) embedding.endpoint.validate();
    if (classifier.type == BackendType::Http) classifier.endpoint.validate();

    // The two image roles must not silently point at the same service.
    if (image_base.type == BackendType::Http && image_unlearned.type == BackendType::Http &&
        image_base.endpoint.base_url == image_unlearned.endpoint.base_url) {
        throw ConfigError("image_base and image_unlearned must use distinct endpoints");
    }
    if (image_base.max_retries < 0 || image_unlearned.max_retries < 0) {
        throw ConfigError("image max_retries must be >= 0");
    }
}

}  // namespace ueval
