#pragma once

// ueval/plan.hpp — eval-plan data model and its canonical on-disk JSON form.
//
// An eval plan drives one evaluation run: the target concept, the ranked
// nearby concepts, and the two adversarial prompt lists. The on-disk format
// is a UTF-8 JSON object with keys exactly {target, nearby, adv_miss,
// adv_evoke}; list position i encodes final rank i+1.

#include <string>
#include <vector>

namespace ueval {

struct PlanConfig {
    int n = 10;                 // concepts requested per brainstorm round
    int k = 10;                 // retained list size
    int brainstorm_rounds = 3;
    int rerank_rounds = 3;

    // Throws ConfigError unless n >= 1, 1 <= k <= n * brainstorm_rounds,
    // and both round counts are >= 1.
    void validate() const;
};

struct EvalPlan {
    std::string target;
    std::vector<std::string> nearby;
    std::vector<std::string> adv_miss;
    std::vector<std::string> adv_evoke;

    bool operator==(const EvalPlan&) const = default;
};

// One concept with its per-round rerank positions.
// avg_rank is the arithmetic mean of positions; final_rank is the 1-based
// index after sorting by avg_rank ascending (ties keep brainstorm order).
struct RankedConcept {
    std::string text;
    std::vector<int> positions;
    double avg_rank = 0.0;
    int final_rank = 0;
};

struct Violation {
    std::string field;   // "target", "nearby", "adv_miss", "adv_evoke"
    int index = -1;      // -1 when the violation is not element-level
    std::string message;

    std::string str() const;
};

// Parse the canonical JSON document. Unicode escapes are resolved to code
// points and list order is preserved exactly. Throws SchemaError on a
// missing/unknown key, a wrong value kind, an element that is empty after
// trimming, or (for nearby/adv_evoke) duplicate elements under the
// case-folded dedup key; the message names the offending key and index.
EvalPlan decode_plan(std::string_view text);

// Canonical encoding: keys in order target/nearby/adv_miss/adv_evoke,
// 4-space indentation, non-ASCII emitted as literal UTF-8, trailing
// newline. decode_plan(encode_plan(p)) == p for every valid plan.
std::string encode_plan(const EvalPlan& plan);

// Check every EvalPlan invariant; returns one entry per violation (empty
// means the plan is valid). Unlike decode_plan this also flags adv_evoke
// elements that contain the target verbatim (case-folded substring).
std::vector<Violation> validate_plan(const EvalPlan& plan);

}  // namespace ueval
