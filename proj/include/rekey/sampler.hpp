#pragma once
// Training-set construction (capped positives, quota-driven negatives) and
// distribution-preserving test-set sampling over episode corpora.

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "rekey/core.hpp"

namespace rekey::sampler {

enum class PairCategory { positive, neg_no_relation, neg_cross };
std::string_view to_string(PairCategory c);

// positive: same label, not no_relation. neg_no_relation: either side is
// no_relation. neg_cross: everything else.
PairCategory categorize(const Episode& ep);

// The label an episode is counted under: no_relation for neg_no_relation
// pairs, otherwise the labeled side (support first).
RelationLabel stratum_label(const Episode& ep);

struct CorpusSplit {
    std::vector<Episode> positives;
    std::vector<Episode> neg_no_relation;
    std::vector<Episode> neg_cross;
};

CorpusSplit split_corpus(const std::vector<Episode>& eps);

struct SamplerConfig {
    std::size_t K_max_positives_per_label = 10;
    // Per-label no_relation negative quotas. When empty, no_relation_total (if
    // set) is apportioned across labels in proportion to availability.
    std::map<RelationLabel, std::size_t> quotas;
    std::optional<std::size_t> no_relation_total;
    std::size_t cross_sample_count = 0;
    std::uint64_t seed = 0;
};

// Splits total across weights so each share is floor or ceil of its exact
// proportion. Leftover units go to the largest remainders, earlier index
// first on ties. Exact integer arithmetic.
std::vector<std::size_t> largest_remainder(const std::vector<std::size_t>& weights, std::size_t total);

// Config whose negatives keep the corpus's positive:negative ratio and its
// no_relation:cross mix once positives are capped at K per label.
SamplerConfig proportional_config(const CorpusSplit& split, std::size_t K, std::uint64_t seed);

// Sampled set, shuffled; deterministic for fixed (split, cfg).
std::vector<Episode> sample_training_set(const CorpusSplit& split, const SamplerConfig& cfg);

// Stratified by (category, stratum label). Throws std::invalid_argument when
// target_size exceeds the corpus.
std::vector<Episode> sample_test_set(const std::vector<Episode>& eps, std::size_t target_size, std::uint64_t seed);

struct Ratio {
    std::size_t positive = 0;  // reduced
    std::size_t negative = 0;
    std::optional<double> value;  // positive / negative; absent when undefined
};

struct CorpusStats {
    std::size_t total = 0;
    std::size_t positives = 0;
    std::size_t neg_no_relation = 0;
    std::size_t neg_cross = 0;
    std::size_t negatives = 0;
    Ratio ratio;
    double no_relation_share = 0;  // neg_no_relation / total, 0 for an empty corpus
    std::map<RelationLabel, std::size_t> per_label;
};

CorpusStats corpus_stats(const std::vector<Episode>& eps);

nlohmann::json to_json(const CorpusStats& s);

}  // namespace rekey::sampler
