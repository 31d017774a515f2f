#include "ueval/plan.hpp"

#include "ueval/error.hpp"
#include "ueval/text.hpp"

#include <nlohmann/json.hpp>

#include <unordered_map>

namespace ueval {

namespace {

constexpr const char* kKeys[4] = {"target", "nearby", "adv_miss", "adv_evoke"};

std::vector<std::string> decode_list(const nlohmann::json& doc, const char* key) {
    const auto& node = doc.at(key);
    if (!node.is_array()) {
        throw SchemaError(std::string(key) + ": expected an array of strings");
    }
    std::vector<std::string> out;
    out.reserve(node.size());
    for (std::size_t i = 0; i < node.size(); ++i) {
        if (!node[i].is_string()) {
            throw SchemaError(std::string(key) + "[" + std::to_string(i) +
                              "]: expected a string");
        }
        std::string text = node[i].get<std::string>();
        if (trim(text).empty()) {
            throw SchemaError(std::string(key) + "[" + std::to_string(i) +
                              "]: empty after trimming");
        }
        out.push_back(std::move(text));
    }
    return out;
}

// Case-folded duplicate check. Misspelling lists are exempt: published plans
// keep case-variant (and even repeated) misspellings, so only nearby and
// adv_evoke carry the dedup invariant.
void check_duplicates(const std::vector<std::string>& list, const char* key) {
    std::unordered_map<std::string, std::size_t> seen;
    for (std::size_t i = 0; i < list.size(); ++i) {
        auto [it, inserted] = seen.emplace(normalize_concept(list[i]), i);
        if (!inserted) {
            throw SchemaError(std::string(key) + "[" + std::to_string(i) +
                              "]: duplicate of " + key + "[" + std::to_string(it->second) +
                              "] under the dedup key");
        }
    }
}

}  // namespace

void PlanConfig::validate() const {
    if (n < 1) throw ConfigError("plan.n must be >= 1");
    if (brainstorm_rounds < 1) throw ConfigError("plan.brainstorm_rounds must be >= 1");
    if (rerank_rounds < 1) throw ConfigError("plan.rerank_rounds must be >= 1");
    if (k < 1 || k > n * brainstorm_rounds) {
        throw ConfigError("plan.k must satisfy 1 <= k <= n * brainstorm_rounds");
    }
}

std::string Violation::str() const {
    std::string out = field;
    if (index >= 0) out += "[" + std::to_string(index) + "]";
    out += ": " + message;
    return out;
}

EvalPlan decode_plan(std::string_view text) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw SchemaError(std::string("plan document is not valid JSON: ") + e.what());
    }
    if (!doc.is_object()) throw SchemaError("plan document must be a JSON object");
    for (const auto& item : doc.items()) {
        bool known = false;
        for (const char* key : kKeys) known = known || item.key() == key;
        if (!known) throw SchemaError("unexpected key \"" + item.key() + "\"");
    }
    for (const char* key : kKeys) {
        if (!doc.contains(key)) throw SchemaError(std::string(key) + ": missing key");
    }
    if (!doc["target"].is_string()) throw SchemaError("target: expected a string");

    EvalPlan plan;
    plan.target = doc["target"].get<std::string>();
    if (trim(plan.target).empty()) throw SchemaError("target: empty after trimming");
    plan.nearby = decode_list(doc, "nearby");
    plan.adv_miss = decode_list(doc, "adv_miss");
    plan.adv_evoke = decode_list(doc, "adv_evoke");
    check_duplicates(plan.nearby, "nearby");
    check_duplicates(plan.adv_evoke, "adv_evoke");
    return plan;
}

std::string encode_plan(const EvalPlan& plan) {
    nlohmann::ordered_json doc;
    doc["target"] = plan.target;
    doc["nearby"] = plan.nearby;
    doc["adv_miss"] = plan.adv_miss;
    doc["adv_evoke"] = plan.adv_evoke;
    return doc.dump(4) + "\n";
}

std::vector<Violation> validate_plan(const EvalPlan& plan) {
    std::vector<Violation> out;
    if (trim(plan.target).empty()) {
        out.push_back({"target", -1, "empty after trimming"});
    }

    auto check_list = [&](const std::vector<std::string>& list, const char* field,
                          bool dedup) {
        std::unordered_map<std::string, int> seen;
        for (std::size_t i = 0; i < list.size(); ++i) {
            if (trim(list[i]).empty()) {
                out.push_back({field, static_cast<int>(i), "empty after trimming"});
                continue;
            }
            if (!dedup) continue;
            auto [it, inserted] = seen.emplace(normalize_concept(list[i]), static_cast<int>(i));
            if (!inserted) {
                out.push_back({field, static_cast<int>(i),
                               "duplicate of " + std::string(field) + "[" +
                                   std::to_string(it->second) + "] under the dedup key"});
            }
        }
    };
    check_list(plan.nearby, "nearby", true);
    check_list(plan.adv_miss, "adv_miss", false);
    check_list(plan.adv_evoke, "adv_evoke", true);

    if (!trim(plan.target).empty()) {
        for (std::size_t i = 0; i < plan.adv_evoke.size(); ++i) {
            if (contains_folded(plan.adv_evoke[i], plan.target)) {
                out.push_back(
                    {"adv_evoke", static_cast<int>(i), "contains the target concept verbatim"});
            }
        }
    }
    return out;
}

}  // namespace ueval
