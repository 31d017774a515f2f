#include "ueval/metrics.hpp"

#include "ueval/error.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace ueval {

double poly_kernel(std::span<const double> x, std::span<const double> y) {
    if (x.empty() || x.size() != y.size()) {
        throw ContractError("poly_kernel: vectors must be non-empty and equally sized");
    }
    double dot = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) dot += x[i] * y[i];
    const double base = dot / static_cast<double>(x.size()) + 1.0;
    return base * base * base;
}

double kid_unbiased(const FeatureMatrix& x, const FeatureMatrix& y) {
    if (x.dim != y.dim) {
        throw ContractError("kid_unbiased: feature dimensions differ (" +
                            std::to_string(x.dim) + " vs " + std::to_string(y.dim) + ")");
    }
    const std::size_t m = x.rows.size();
    const std::size_t n = y.rows.size();
    if (m < 2 || n < 2) {
        throw ContractError("kid_unbiased: need at least 2 samples per side");
    }

    double sum_xx = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < m; ++j) {
            if (i == j) continue;
            sum_xx += poly_kernel(x.rows[i], x.rows[j]);
        }
    }
    double sum_yy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            if (i == j) continue;
            sum_yy += poly_kernel(y.rows[i], y.rows[j]);
        }
    }
    double sum_xy = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            sum_xy += poly_kernel(x.rows[i], y.rows[j]);
        }
    }

    const double mm = static_cast<double>(m);
    const double nn = static_cast<double>(n);
    return sum_xx / (mm * (mm - 1.0)) + sum_yy / (nn * (nn - 1.0)) -
           2.0 * sum_xy / (mm * nn);
}

std::vector<double> rank_with_ties(std::span<const double> values, RankDirection direction) {
    for (double v : values) {
        if (!std::isfinite(v)) throw ContractError("rank_with_ties: non-finite value");
    }
    const std::size_t n = values.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return direction == RankDirection::Ascending ? values[a] < values[b]
                                                     : values[a] > values[b];
    });

    std::vector<double> ranks(n, 0.0);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
        // positions i+1 .. j+1 are occupied by this tie group
        const double avg = (static_cast<double>(i + 1) + static_cast<double>(j + 1)) / 2.0;
        for (std::size_t t = i; t <= j; ++t) ranks[order[t]] = avg;
        i = j + 1;
    }
    return ranks;
}

double spearman_rho(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw ContractError("spearman_rho: length mismatch");
    if (a.size() < 2) throw ContractError("spearman_rho: need at least 2 pairs");
    const double n = static_cast<double>(a.size());

    double mean_a = 0.0;
    double mean_b = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        mean_a += a[i];
        mean_b += b[i];
    }
    mean_a /= n;
    mean_b /= n;

    double cov = 0.0;
    double var_a = 0.0;
    double var_b = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double da = a[i] - mean_a;
        const double db = b[i] - mean_b;
        cov += da * db;
        var_a += da * da;
        var_b += db * db;
    }
    if (var_a == 0.0 || var_b == 0.0) {
        throw UndefinedCorrelationError(
            "spearman_rho: correlation undefined over a constant rank vector");
    }
    return cov / std::sqrt(var_a * var_b);
}

std::vector<ConceptDamage> concept_damages(const std::vector<RankedConcept>& ranked,
                                           const std::vector<FeatureMatrix>& features_base,
                                           const std::vector<FeatureMatrix>& features_unlearned) {
    if (ranked.size() != features_base.size() || ranked.size() != features_unlearned.size()) {
        throw ContractError("concept_damages: features missing for some ranked concepts");
    }
    std::vector<ConceptDamage> out;
    out.reserve(ranked.size());
    for (std::size_t i = 0; i < ranked.size(); ++i) {
        ConceptDamage d;
        d.concept_text = ranked[i].text;
        d.similarity_rank = ranked[i].avg_rank;
        d.kid = kid_unbiased(features_base[i], features_unlearned[i]);
        d.samples_base = features_base[i].rows.size();
        d.samples_unlearned = features_unlearned[i].rows.size();
        out.push_back(std::move(d));
    }
    return out;
}

LocalityReport locality_report(const std::string& target,
                               const std::vector<RankedConcept>& ranked,
                               const std::vector<FeatureMatrix>& features_base,
                               const std::vector<FeatureMatrix>& features_unlearned) {
    LocalityReport report;
    report.target = target;
    report.concepts = concept_damages(ranked, features_base, features_unlearned);

    std::vector<double> similarity;
    std::vector<double> damage;
    similarity.reserve(report.concepts.size());
    damage.reserve(report.concepts.size());
    for (const auto& c : report.concepts) {
        similarity.push_back(c.similarity_rank);
        damage.push_back(c.kid);
    }
    const auto sim_ranks = rank_with_ties(similarity, RankDirection::Ascending);
    const auto damage_ranks = rank_with_ties(damage, RankDirection::Ascending);
    report.spearman_rs = spearman_rho(sim_ranks, damage_ranks);
    return report;
}

ConfusionMatrix confusion_matrix(
    const std::vector<std::pair<std::string, const ZeroShotResult*>>& per_concept) {
    ConfusionMatrix m;
    if (per_concept.empty()) return m;
    m.labels = per_concept.front().second->labels;

    for (const auto& [concept_text, result] : per_concept) {
        if (result->labels != m.labels) {
            throw ContractError("confusion_matrix: inconsistent label sets across concepts");
        }
        const bool known = std::find(m.labels.begin(), m.labels.end(), concept_text) !=
                           m.labels.end();
        if (!known) {
            throw ContractError("confusion_matrix: generating concept \"" + concept_text +
                                "\" is not in the label set");
        }
        std::vector<std::size_t> row(m.labels.size(), 0);
        for (std::size_t idx : result->argmax) row.at(idx) += 1;

        std::vector<double> rates(m.labels.size(), 0.0);
        const std::size_t total = result->argmax.size();
        if (total > 0) {
            for (std::size_t c = 0; c < row.size(); ++c) {
                rates[c] = static_cast<double>(row[c]) / static_cast<double>(total);
            }
        }
        m.row_concepts.push_back(concept_text);
        m.counts.push_back(std::move(row));
        m.rates.push_back(std::move(rates));
    }
    return m;
}

double target_prediction_rate(const ZeroShotResult& result, const std::string& target) {
    const auto it = std::find(result.labels.begin(), result.labels.end(), target);
    if (it == result.labels.end()) {
        throw ContractError("target_prediction_rate: target label not in label set");
    }
    const std::size_t target_idx = static_cast<std::size_t>(it - result.labels.begin());
    if (result.argmax.empty()) {
        throw ContractError("target_prediction_rate: no images scored");
    }
    std::size_t hits = 0;
    for (std::size_t idx : result.argmax) hits += idx == target_idx ? 1 : 0;
    return static_cast<double>(hits) / static_cast<double>(result.argmax.size());
}

AdversarialReport adversarial_report(const EvalPlan& plan,
                                     const ZeroShotResult& target_result,
                                     const std::vector<ZeroShotResult>& miss_results,
                                     const std::vector<ZeroShotResult>& evoke_results) {
    if (miss_results.size() != plan.adv_miss.size() ||
        evoke_results.size() != plan.adv_evoke.size()) {
        throw ContractError("adversarial_report: results not aligned to the plan lists");
    }
    AdversarialReport report;
    report.labels = target_result.labels;
    report.baseline_rate = target_prediction_rate(target_result, plan.target);

    auto add_rows = [&](const std::vector<std::string>& prompts,
                        const std::vector<ZeroShotResult>& results, const char* kind) {
        for (std::size_t i = 0; i < prompts.size(); ++i) {
            AdversarialRow row;
            row.prompt_text = prompts[i];
            row.kind = kind;
            row.rate = target_prediction_rate(results[i], plan.target);
            row.delta = row.rate - report.baseline_rate;
            report.rows.push_back(std::move(row));
        }
    };
    add_rows(plan.adv_miss, miss_results, "adv_miss");
    add_rows(plan.adv_evoke, evoke_results, "adv_evoke");
    return report;
}

}  // namespace ueval
