#pragma once

// ueval/protocol.hpp — the brainstorm → deduplicate → iterative re-rank →
// average-rank → top-k protocol against a chat backend, for nearby concepts,
// misspellings, and evocative prompts.
//
// Model replies must be strict JSON arrays (strings for brainstorm, item
// numbers for re-ranking); a bounded re-ask loop handles schema violations,
// after which imperfect re-rank replies are repaired deterministically and
// anything else is a ProtocolError carrying the raw transcript.

#include "ueval/chat.hpp"
#include "ueval/plan.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace ueval {

enum class BrainstormKind { NearbyConcept, Misspelling, EvokePrompt };

std::string to_string(BrainstormKind kind);

struct ChatOptions {
    double temperature_brainstorm = 0.7;
    double temperature_rerank = 0.0;
    int max_retries = 1;  // re-asks per request on schema/validation failure

    static ChatOptions from(const ChatBackendConfig& cfg) {
        return {cfg.temperature_brainstorm, cfg.temperature_rerank, cfg.max_retries};
    }
};

// One re-rank round over a fixed candidate set. `presented` is the seeded
// shuffle shown to the model; `output_order` is the model's ordering after
// repair (a permutation of all candidate indices); `positions` maps each
// candidate index to its recorded 1-based position. Candidates the model
// never ranked sit at the tail of output_order and carry penalty positions
// count+1, count+2, ... in original candidate order.
struct RerankRound {
    std::vector<std::size_t> presented;
    std::vector<std::size_t> output_order;
    std::vector<int> positions;
};

// Kind-specific candidate validation; returns an empty string when the
// candidate is acceptable, otherwise the rejection reason. Misspellings
// must differ from the target yet stay within a case-folded edit distance
// of ceil(len/2); evocative prompts must not contain the target verbatim.
std::string candidate_error(BrainstormKind kind, const std::string& target,
                            const std::string& candidate);

// Dedup key for brainstormed candidates. Misspellings key on the exact
// trimmed text (case matters for a misspelling); other kinds use
// normalize_concept.
std::string brainstorm_dedup_key(BrainstormKind kind, const std::string& text);

// Issue brainstorm_rounds independent requests for n items each, concatenate
// in round order, and deduplicate keeping first occurrences. Every survivor
// passes the kind's validation rule.
std::vector<std::string> brainstorm(const std::string& target, BrainstormKind kind,
                                    const PlanConfig& cfg, ChatClient& chat,
                                    const ChatOptions& opts);

// Present the candidates in a seeded-shuffle order and ask the model to
// re-arrange them by relevance to the target; repair the reply into a
// permutation. Candidates must be non-empty.
RerankRound rerank_round(const std::string& target, const std::vector<std::string>& candidates,
                         ChatClient& chat, const ChatOptions& opts, std::uint64_t shuffle_seed);

// Average each candidate's per-round positions and sort ascending by that
// average; ties keep the candidates' first-appearance order.
std::vector<RankedConcept> aggregate_ranks(const std::vector<std::string>& candidates,
                                           const std::vector<RerankRound>& rounds);

// First k by avg_rank ascending (stable, so ties keep the incoming order);
// assigns final_rank 1..k.
std::vector<RankedConcept> select_top_k(std::vector<RankedConcept> ranked, int k);

// Full protocol for all three kinds; the returned plan passes validate_plan.
// Protocol and transport errors are rethrown with the failing stage named.
EvalPlan build_plan(const std::string& target, const PlanConfig& cfg, ChatClient& chat,
                    const ChatOptions& opts, std::uint64_t master_seed);

// --- deterministic pieces exposed for fixtures ---

// Fisher-Yates order over [0, count) driven by mt19937_64; stable across
// platforms (std::shuffle is not).
std::vector<std::size_t> shuffled_indices(std::size_t count, std::uint64_t seed);

// Repair a parsed re-rank reply (1-based numbers into `presented`) into a
// RerankRound: out-of-range numbers are dropped, duplicates keep the first
// mention, missing candidates are appended at the tail.
RerankRound repair_ordering(std::size_t candidate_count,
                            const std::vector<std::size_t>& presented,
                            const std::vector<long long>& reply_numbers);

// Prompt texts (also used by the in-process stub and synthetic chat client).
std::string brainstorm_prompt(BrainstormKind kind, const std::string& target, int n);
std::string rerank_prompt(const std::string& target, const std::vector<std::string>& candidates,
                          const std::vector<std::size_t>& presented);

}  // namespace ueval
