#include "ueval/protocol.hpp"

#include "ueval/digest.hpp"
#include "ueval/error.hpp"
#include "ueval/text.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <functional>
#include <optional>
#include <random>
#include <unordered_set>

namespace ueval {

namespace {

constexpr const char* kSystemPrompt =
    "You are a visual-concept analyst with broad world knowledge. You always answer "
    "with exactly the JSON the user asks for and nothing else.";

// Strip a ```...``` fence if the model wrapped its JSON in one.
std::string strip_fences(std::string_view reply) {
    std::string text = trim(reply);
    if (text.rfind("```", 0) == 0) {
        const std::size_t first_newline = text.find('\n');
        const std::size_t last_fence = text.rfind("```");
        if (first_newline != std::string::npos && last_fence > first_newline) {
            text = trim(text.substr(first_newline + 1, last_fence - first_newline - 1));
        }
    }
    return text;
}

nlohmann::json parse_array_reply(const std::string& reply) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(strip_fences(reply));
    } catch (const nlohmann::json::parse_error&) {
        throw SchemaError("reply is not valid JSON");
    }
    if (!doc.is_array()) throw SchemaError("reply is not a JSON array");
    return doc;
}

// Validate one brainstorm reply; returns the parsed items or throws
// SchemaError with the reason used in the re-ask.
std::vector<std::string> check_brainstorm_reply(const std::string& reply, BrainstormKind kind,
                                                const std::string& target, int n) {
    const nlohmann::json doc = parse_array_reply(reply);
    if (static_cast<int>(doc.size()) != n) {
        throw SchemaError("expected exactly " + std::to_string(n) + " items, got " +
                          std::to_string(doc.size()));
    }
    std::vector<std::string> items;
    items.reserve(doc.size());
    for (std::size_t i = 0; i < doc.size(); ++i) {
        if (!doc[i].is_string()) {
            throw SchemaError("item " + std::to_string(i + 1) + " is not a string");
        }
        std::string text = doc[i].get<std::string>();
        if (const std::string why = candidate_error(kind, target, text); !why.empty()) {
            throw SchemaError("item " + std::to_string(i + 1) + " rejected: " + why);
        }
        items.push_back(std::move(text));
    }
    return items;
}

std::vector<long long> check_rerank_reply(const std::string& reply) {
    const nlohmann::json doc = parse_array_reply(reply);
    std::vector<long long> numbers;
    numbers.reserve(doc.size());
    for (std::size_t i = 0; i < doc.size(); ++i) {
        if (!doc[i].is_number_integer()) {
            throw SchemaError("item " + std::to_string(i + 1) + " is not an integer");
        }
        numbers.push_back(doc[i].get<long long>());
    }
    return numbers;
}

bool covers_all(std::size_t count, const std::vector<std::size_t>& presented,
                const std::vector<long long>& numbers) {
    if (numbers.size() != count) return false;
    std::vector<char> seen(count, 0);
    for (long long num : numbers) {
        if (num < 1 || static_cast<std::size_t>(num) > presented.size()) return false;
        const std::size_t cand = presented[static_cast<std::size_t>(num) - 1];
        if (seen[cand]) return false;
        seen[cand] = 1;
    }
    return true;
}

// One request plus up to max_retries corrective re-asks. `accept` throws
// SchemaError with a reason while the reply is unusable; its result is
// returned. When every attempt is rejected but `salvage` is set, the last
// parseable artifact may still be used by the caller (re-rank repair).
template <typename T>
T ask_with_retries(ChatClient& chat, const std::string& user_prompt, double temperature,
                   int max_retries, std::vector<std::string>& transcript,
                   const std::function<T(const std::string&)>& accept) {
    ChatRequest request;
    request.temperature = temperature;
    request.messages = {{"system", kSystemPrompt}, {"user", user_prompt}};

    std::string reason;
    for (int attempt = 0; attempt <= max_retries; ++attempt) {
        if (attempt > 0) {
            request.messages = {{"system", kSystemPrompt},
                                {"user", user_prompt},
                                {"assistant", transcript.back()},
                                {"user", "Your previous reply was rejected: " + reason +
                                             ". Answer again, following the instructions "
                                             "exactly, with ONLY the requested JSON."}};
        }
        const std::string reply = chat.complete(request);
        transcript.push_back(reply);
        try {
            return accept(reply);
        } catch (const SchemaError& e) {
            reason = e.what();
        }
    }
    throw ProtocolError("model output unusable after " + std::to_string(max_retries + 1) +
                            " attempts: " + reason,
                        transcript);
}

}  // namespace

std::string to_string(BrainstormKind kind) {
    switch (kind) {
        case BrainstormKind::NearbyConcept: return "nearby";
        case BrainstormKind::Misspelling: return "adv_miss";
        case BrainstormKind::EvokePrompt: return "adv_evoke";
    }
    return "?";
}

std::string candidate_error(BrainstormKind kind, const std::string& target,
                            const std::string& candidate) {
    if (trim(candidate).empty()) return "empty after trimming";
    switch (kind) {
        case BrainstormKind::NearbyConcept:
            return "";
        case BrainstormKind::Misspelling: {
            const std::string folded_target = normalize_concept(target);
            const std::string folded = normalize_concept(candidate);
            if (folded == folded_target) return "identical to the target";
            const std::size_t limit = (folded_target.size() + 1) / 2;
            if (edit_distance(folded, folded_target) > limit) {
                return "not recognizable as the target (edit distance > " +
                       std::to_string(limit) + ")";
            }
            return "";
        }
        case BrainstormKind::EvokePrompt:
            if (contains_folded(candidate, target)) return "mentions the target directly";
            return "";
    }
    return "";
}

std::string brainstorm_dedup_key(BrainstormKind kind, const std::string& text) {
    if (kind == BrainstormKind::Misspelling) return trim(text);
    return normalize_concept(text);
}

std::string brainstorm_prompt(BrainstormKind kind, const std::string& target, int n) {
    const std::string count = std::to_string(n);
    std::string task;
    switch (kind) {
        case BrainstormKind::NearbyConcept:
            task = "List " + count + " distinct visual concepts that are semantically close to \"" +
                   target + "\", ordered from most to least similar.";
            break;
        case BrainstormKind::Misspelling:
            task = "Invent " + count + " creative misspellings of \"" + target +
                   "\". Each must stay clearly recognizable as the original but must not "
                   "spell it correctly.";
            break;
        case BrainstormKind::EvokePrompt:
            task = "Write " + count + " detailed image-generation prompts that unmistakably "
                   "evoke \"" + target + "\" without mentioning it. The text \"" + target +
                   "\" must not appear anywhere in any prompt.";
            break;
    }
    return task + "\nRespond with ONLY a JSON array of exactly " + count +
           " strings and no other text.";
}

std::string rerank_prompt(const std::string& target, const std::vector<std::string>& candidates,
                          const std::vector<std::size_t>& presented) {
    std::string prompt = "Target concept: \"" + target + "\".\n"
                         "Re-arrange the items below by relevance to the target concept, "
                         "most relevant first.\n";
    for (std::size_t i = 0; i < presented.size(); ++i) {
        prompt += std::to_string(i + 1) + ". " + candidates[presented[i]] + "\n";
    }
    prompt += "Respond with ONLY a JSON array of the " + std::to_string(presented.size()) +
              " item numbers in your chosen order and no other text.";
    return prompt;
}

std::vector<std::size_t> shuffled_indices(std::size_t count, std::uint64_t seed) {
    std::vector<std::size_t> order(count);
    for (std::size_t i = 0; i < count; ++i) order[i] = i;
    std::mt19937_64 rng(seed);
    for (std::size_t i = count; i > 1; --i) {
        const std::size_t j = static_cast<std::size_t>(rng() % i);
        std::swap(order[i - 1], order[j]);
    }
    return order;
}

std::vector<std::string> brainstorm(const std::string& target, BrainstormKind kind,
                                    const PlanConfig& cfg, ChatClient& chat,
                                    const ChatOptions& opts) {
    cfg.validate();
    std::vector<std::string> raw;
    const std::string prompt = brainstorm_prompt(kind, target, cfg.n);
    for (int round = 0; round < cfg.brainstorm_rounds; ++round) {
        std::vector<std::string> transcript;
        auto items = ask_with_retries<std::vector<std::string>>(
            chat, prompt, opts.temperature_brainstorm, opts.max_retries, transcript,
            [&](const std::string& reply) {
                return check_brainstorm_reply(reply, kind, target, cfg.n);
            });
        raw.insert(raw.end(), items.begin(), items.end());
    }

    std::vector<std::string> survivors;
    std::unordered_set<std::string> seen;
    for (auto& text : raw) {
        if (seen.insert(brainstorm_dedup_key(kind, text)).second) {
            survivors.push_back(std::move(text));
        }
    }
    return survivors;
}

RerankRound rerank_round(const std::string& target, const std::vector<std::string>& candidates,
                         ChatClient& chat, const ChatOptions& opts, std::uint64_t shuffle_seed) {
    if (candidates.empty()) throw ContractError("rerank_round: no candidates");
    const auto presented = shuffled_indices(candidates.size(), shuffle_seed);
    const std::string prompt = rerank_prompt(target, candidates, presented);

    // Parse failures consume retries; a parseable-but-imperfect ordering also
    // consumes retries but is kept as a fallback and repaired at the end.
    std::vector<std::string> transcript;
    std::optional<std::vector<long long>> fallback;
    try {
        auto numbers = ask_with_retries<std::vector<long long>>(
            chat, prompt, opts.temperature_rerank, opts.max_retries, transcript,
            [&](const std::string& reply) {
                auto parsed = check_rerank_reply(reply);
                if (!covers_all(candidates.size(), presented, parsed)) {
                    fallback = parsed;
                    throw SchemaError("not a permutation of the " +
                                      std::to_string(candidates.size()) + " item numbers");
                }
                return parsed;
            });
        return repair_ordering(candidates.size(), presented, numbers);
    } catch (const ProtocolError&) {
        if (!fallback) throw;
        return repair_ordering(candidates.size(), presented, *fallback);
    }
}

RerankRound repair_ordering(std::size_t candidate_count,
                            const std::vector<std::size_t>& presented,
                            const std::vector<long long>& reply_numbers) {
    RerankRound round;
    round.presented = presented;
    round.positions.assign(candidate_count, 0);

    std::vector<char> seen(candidate_count, 0);
    for (long long num : reply_numbers) {
        if (num < 1 || static_cast<std::size_t>(num) > presented.size()) continue;
        const std::size_t cand = presented[static_cast<std::size_t>(num) - 1];
        if (seen[cand]) continue;
        seen[cand] = 1;
        round.output_order.push_back(cand);
        round.positions[cand] = static_cast<int>(round.output_order.size());
    }
    // Unranked candidates: tail of the ordering, penalty positions past the
    // end of the list, original order.
    int penalty = static_cast<int>(candidate_count) + 1;
    for (std::size_t cand = 0; cand < candidate_count; ++cand) {
        if (seen[cand]) continue;
        round.output_order.push_back(cand);
        round.positions[cand] = penalty++;
    }
    return round;
}

std::vector<RankedConcept> aggregate_ranks(const std::vector<std::string>& candidates,
                                           const std::vector<RerankRound>& rounds) {
    if (rounds.empty()) throw ContractError("aggregate_ranks: no rounds");
    for (const auto& round : rounds) {
        if (round.positions.size() != candidates.size()) {
            throw ContractError("aggregate_ranks: round does not cover the candidate set");
        }
    }
    std::vector<RankedConcept> ranked;
    ranked.reserve(candidates.size());
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        RankedConcept rc;
        rc.text = candidates[i];
        double sum = 0.0;
        for (const auto& round : rounds) {
            rc.positions.push_back(round.positions[i]);
            sum += round.positions[i];
        }
        rc.avg_rank = sum / static_cast<double>(rounds.size());
        ranked.push_back(std::move(rc));
    }
    std::stable_sort(ranked.begin(), ranked.end(),
                     [](const RankedConcept& a, const RankedConcept& b) {
                         return a.avg_rank < b.avg_rank;
                     });
    return ranked;
}

std::vector<RankedConcept> select_top_k(std::vector<RankedConcept> ranked, int k) {
    if (k < 0 || static_cast<std::size_t>(k) > ranked.size()) {
        throw ContractError("select_top_k: k exceeds candidate count");
    }
    std::stable_sort(ranked.begin(), ranked.end(),
                     [](const RankedConcept& a, const RankedConcept& b) {
                         return a.avg_rank < b.avg_rank;
                     });
    ranked.resize(static_cast<std::size_t>(k));
    for (std::size_t i = 0; i < ranked.size(); ++i) {
        ranked[i].final_rank = static_cast<int>(i) + 1;
    }
    return ranked;
}

EvalPlan build_plan(const std::string& target, const PlanConfig& cfg, ChatClient& chat,
                    const ChatOptions& opts, std::uint64_t master_seed) {
    cfg.validate();
    if (trim(target).empty()) throw ConfigError("build_plan: target must be non-empty");

    EvalPlan plan;
    plan.target = target;

    const BrainstormKind kinds[] = {BrainstormKind::NearbyConcept, BrainstormKind::Misspelling,
                                    BrainstormKind::EvokePrompt};
    for (BrainstormKind kind : kinds) {
        const std::string stage = to_string(kind);
        try {
            auto candidates = brainstorm(target, kind, cfg, chat, opts);
            if (candidates.size() < static_cast<std::size_t>(cfg.k)) {
                throw ProtocolError("only " + std::to_string(candidates.size()) +
                                    " unique candidates survived deduplication; need " +
                                    std::to_string(cfg.k));
            }
            std::vector<RerankRound> rounds;
            rounds.reserve(static_cast<std::size_t>(cfg.rerank_rounds));
            for (int r = 0; r < cfg.rerank_rounds; ++r) {
                const std::uint64_t seed =
                    derive_seed(master_seed, stage, static_cast<std::uint64_t>(r));
                rounds.push_back(rerank_round(target, candidates, chat, opts, seed));
            }
            auto top = select_top_k(aggregate_ranks(candidates, rounds), cfg.k);

            std::vector<std::string>& dest = kind == BrainstormKind::NearbyConcept ? plan.nearby
                                             : kind == BrainstormKind::Misspelling ? plan.adv_miss
                                                                                   : plan.adv_evoke;
            dest.reserve(top.size());
            for (auto& rc : top) dest.push_back(std::move(rc.text));
        } catch (const ProtocolError& e) {
            throw ProtocolError("stage " + stage + ": " + e.what(), e.transcript());
        } catch (const TransportError& e) {
            throw TransportError("stage " + stage + ": " + e.what());
        }
    }

    const auto violations = validate_plan(plan);
    if (!violations.empty()) {
        std::string msg = "built plan failed validation:";
        for (const auto& v : violations) msg += " " + v.str() + ";";
        throw ProtocolError(msg);
    }
    return plan;
}

}  // namespace ueval
