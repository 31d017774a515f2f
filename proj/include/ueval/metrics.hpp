#pragma once

// ueval/metrics.hpp — KID, tie-aware Spearman, confusion matrices, and
// target-prediction rates.
//
// KID here is the unbiased squared-MMD estimator with the degree-3
// polynomial kernel k(x, y) = ((x.y)/d + 1)^3. A single full estimate is
// computed (no block subsampling); summation order is fixed so results are
// bitwise reproducible.

#include "ueval/perception.hpp"
#include "ueval/plan.hpp"

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace ueval {

// ((x.y)/d + 1)^3 with d = |x| = |y|. Throws ContractError on empty or
// mismatched inputs.
double poly_kernel(std::span<const double> x, std::span<const double> y);

// Unbiased MMD^2 between the rows of X and Y:
//   mean_{i!=j} k(x_i,x_j) + mean_{i!=j} k(y_i,y_j) - 2 mean_{i,j} k(x_i,y_j)
// Requires matching dims and at least 2 rows on each side. May be negative.
double kid_unbiased(const FeatureMatrix& x, const FeatureMatrix& y);

enum class RankDirection { Ascending, Descending };

// 1-based fractional ranks; tied values share the average of the positions
// they occupy. Ascending means rank 1 goes to the smallest value.
std::vector<double> rank_with_ties(std::span<const double> values, RankDirection direction);

// Pearson correlation of two rank vectors. Throws UndefinedCorrelationError
// when either side is constant, and ContractError on length mismatch or
// fewer than 2 entries.
double spearman_rho(std::span<const double> a, std::span<const double> b);

// Unlearning damage for one concept: its similarity rank (avg_rank carried
// from the reranking protocol) paired with the KID between the base and
// unlearned image distributions for that concept.
struct ConceptDamage {
    std::string concept_text;
    double similarity_rank = 0.0;  // R[s_i]
    double kid = 0.0;              // m_i
    std::size_t samples_base = 0;
    std::size_t samples_unlearned = 0;
};

struct LocalityReport {
    std::string target;
    std::vector<ConceptDamage> concepts;
    std::optional<double> spearman_rs;   // engaged by locality_report
    std::string degenerate_reason;       // set when spearman_rs is absent
};

// Per-concept damage rows: kid_unbiased(base_i, unlearned_i) for every
// ranked concept. Feature matrices are aligned to `ranked` by index.
std::vector<ConceptDamage> concept_damages(const std::vector<RankedConcept>& ranked,
                                           const std::vector<FeatureMatrix>& features_base,
                                           const std::vector<FeatureMatrix>& features_unlearned);

// Full locality result: ranks the damage metric ascending (rank 1 = least
// damaged) and correlates it against the similarity ranks. Throws
// UndefinedCorrelationError when the damage metric is constant.
LocalityReport locality_report(const std::string& target,
                               const std::vector<RankedConcept>& ranked,
                               const std::vector<FeatureMatrix>& features_base,
                               const std::vector<FeatureMatrix>& features_unlearned);

// Row-normalized confusion matrix. Rows follow the given (concept, result)
// order; columns follow the labels of the first result. Every image's
// generating concept must be one of the labels.
struct ConfusionMatrix {
    std::vector<std::string> labels;         // columns
    std::vector<std::string> row_concepts;   // one per generating concept
    std::vector<std::vector<std::size_t>> counts;
    std::vector<std::vector<double>> rates;  // rows sum to 1 (empty rows stay 0)
};

ConfusionMatrix confusion_matrix(
    const std::vector<std::pair<std::string, const ZeroShotResult*>>& per_concept);

// Fraction of images whose argmax label equals `target`. Exact rational:
// count / images. Throws ContractError if target is not among the labels.
double target_prediction_rate(const ZeroShotResult& result, const std::string& target);

struct AdversarialRow {
    std::string prompt_text;
    std::string kind;  // "adv_miss" | "adv_evoke"
    double rate = 0.0;
    double delta = 0.0;  // rate - baseline
};

struct AdversarialReport {
    double baseline_rate = 0.0;  // direct target prompt
    std::vector<AdversarialRow> rows;
    std::vector<std::string> labels;
};

// Target-prediction rates for the direct target prompt (baseline) and every
// adversarial prompt, rows ordered by plan rank (misspellings first, then
// evocative prompts). Result vectors are aligned to the plan lists.
AdversarialReport adversarial_report(const EvalPlan& plan,
                                     const ZeroShotResult& target_result,
                                     const std::vector<ZeroShotResult>& miss_results,
                                     const std::vector<ZeroShotResult>& evoke_results);

}  // namespace ueval
