#include "rekey/sampler.hpp"

#include <numeric>
#include <stdexcept>

#include "rekey/rng.hpp"

namespace rekey::sampler {

namespace {

// Label that owns a no_relation negative for quota purposes: the side that
// carries a relation, or no_relation when neither does.
RelationLabel quota_label(const Episode& ep) {
    if (!ep.support.relation.is_no_relation()) return ep.support.relation;
    return ep.test.relation;
}

template <class KeyFn>
std::map<RelationLabel, std::vector<const Episode*>> group_by(const std::vector<Episode>& eps, KeyFn key) {
    std::map<RelationLabel, std::vector<const Episode*>> groups;
    for (const auto& ep : eps) groups[key(ep)].push_back(&ep);
    return groups;
}

void take(std::vector<Episode>& out, const std::vector<const Episode*>& group, std::size_t k, Rng& rng) {
    for (auto i : rng.sample_indices(group.size(), k)) out.push_back(*group[i]);
}

// Apportions total across groups (in key order) by group size, then samples.
void take_apportioned(std::vector<Episode>& out, const std::map<RelationLabel, std::vector<const Episode*>>& groups,
                      std::size_t total, Rng& rng) {
    std::vector<std::size_t> sizes;
    std::size_t available = 0;
    for (const auto& [_, g] : groups) {
        sizes.push_back(g.size());
        available += g.size();
    }
    const auto shares = largest_remainder(sizes, std::min(total, available));
    std::size_t i = 0;
    for (const auto& [_, g] : groups) take(out, g, shares[i++], rng);
}

std::size_t gcd_size(std::size_t a, std::size_t b) { return std::gcd(a, b); }

}  // namespace

std::string_view to_string(PairCategory c) {
    switch (c) {
        case PairCategory::positive: return "positive";
        case PairCategory::neg_no_relation: return "neg_no_relation";
        case PairCategory::neg_cross: return "neg_cross";
    }
    return "?";
}

PairCategory categorize(const Episode& ep) {
    const auto& s = ep.support.relation;
    const auto& t = ep.test.relation;
    if (s.is_no_relation() || t.is_no_relation()) return PairCategory::neg_no_relation;
    if (s == t) return PairCategory::positive;
    return PairCategory::neg_cross;
}

RelationLabel stratum_label(const Episode& ep) {
    if (categorize(ep) == PairCategory::neg_no_relation) return RelationLabel(RelationLabel::kNoRelation);
    return ep.support.relation;
}

CorpusSplit split_corpus(const std::vector<Episode>& eps) {
    CorpusSplit s;
    for (const auto& ep : eps) {
        switch (categorize(ep)) {
            case PairCategory::positive: s.positives.push_back(ep); break;
            case PairCategory::neg_no_relation: s.neg_no_relation.push_back(ep); break;
            case PairCategory::neg_cross: s.neg_cross.push_back(ep); break;
        }
    }
    return s;
}

std::vector<std::size_t> largest_remainder(const std::vector<std::size_t>& weights, std::size_t total) {
    std::vector<std::size_t> shares(weights.size(), 0);
    const std::size_t sum = std::accumulate(weights.begin(), weights.end(), std::size_t{0});
    if (sum == 0 || total == 0) return shares;

    using u128 = unsigned __int128;
    std::vector<std::size_t> remainders(weights.size());
    std::size_t assigned = 0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        const u128 scaled = static_cast<u128>(weights[i]) * total;
        shares[i] = static_cast<std::size_t>(scaled / sum);
        remainders[i] = static_cast<std::size_t>(scaled % sum);
        assigned += shares[i];
    }
    std::vector<std::size_t> order(weights.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return remainders[a] > remainders[b]; });
    for (std::size_t k = 0; assigned < total; ++k, ++assigned) ++shares[order[k]];
    return shares;
}

SamplerConfig proportional_config(const CorpusSplit& split, std::size_t K, std::uint64_t seed) {
    SamplerConfig cfg;
    cfg.K_max_positives_per_label = K;
    cfg.seed = seed;
    std::size_t kept_positives = 0;
    for (const auto& [_, g] : group_by(split.positives, [](const Episode& e) { return e.support.relation; }))
        kept_positives += std::min(K, g.size());
    const std::size_t all_positives = split.positives.size();
    // Round-half-up of available * kept / all, capped by availability.
    auto scaled = [&](std::size_t available) -> std::size_t {
        if (all_positives == 0) return 0;
        using u128 = unsigned __int128;
        const u128 num = static_cast<u128>(available) * kept_positives * 2 + all_positives;
        return std::min(available, static_cast<std::size_t>(num / (static_cast<u128>(all_positives) * 2)));
    };
    cfg.no_relation_total = scaled(split.neg_no_relation.size());
    cfg.cross_sample_count = scaled(split.neg_cross.size());
    return cfg;
}

std::vector<Episode> sample_training_set(const CorpusSplit& split, const SamplerConfig& cfg) {
    Rng rng(cfg.seed);
    std::vector<Episode> out;

    for (const auto& [_, g] : group_by(split.positives, [](const Episode& e) { return e.support.relation; }))
        take(out, g, cfg.K_max_positives_per_label, rng);

    const auto nr_groups = group_by(split.neg_no_relation, quota_label);
    if (!cfg.quotas.empty()) {
        for (const auto& [label, g] : nr_groups) {
            auto q = cfg.quotas.find(label);
            take(out, g, q == cfg.quotas.end() ? 0 : q->second, rng);
        }
    } else if (cfg.no_relation_total) {
        take_apportioned(out, nr_groups, *cfg.no_relation_total, rng);
    }

    take_apportioned(out, group_by(split.neg_cross, [](const Episode& e) { return e.support.relation; }),
                     cfg.cross_sample_count, rng);

    rng.shuffle(out);
    return out;
}

std::vector<Episode> sample_test_set(const std::vector<Episode>& eps, std::size_t target_size, std::uint64_t seed) {
    if (target_size > eps.size())
        throw std::invalid_argument("target size " + std::to_string(target_size) + " exceeds corpus size " +
                                    std::to_string(eps.size()));
    std::map<std::pair<PairCategory, RelationLabel>, std::vector<const Episode*>> strata;
    for (const auto& ep : eps) strata[{categorize(ep), stratum_label(ep)}].push_back(&ep);

    std::vector<std::size_t> sizes;
    for (const auto& [_, g] : strata) sizes.push_back(g.size());
    const auto shares = largest_remainder(sizes, target_size);

    Rng rng(seed);
    std::vector<Episode> out;
    out.reserve(target_size);
    std::size_t i = 0;
    for (const auto& [_, g] : strata) take(out, g, shares[i++], rng);
    rng.shuffle(out);
    return out;
}

CorpusStats corpus_stats(const std::vector<Episode>& eps) {
    CorpusStats s;
    s.total = eps.size();
    for (const auto& ep : eps) {
        switch (categorize(ep)) {
            case PairCategory::positive: ++s.positives; break;
            case PairCategory::neg_no_relation: ++s.neg_no_relation; break;
            case PairCategory::neg_cross: ++s.neg_cross; break;
        }
        ++s.per_label[stratum_label(ep)];
    }
    s.negatives = s.neg_no_relation + s.neg_cross;
    if (s.positives != 0 || s.negatives != 0) {
        const auto g = gcd_size(s.positives, s.negatives);
        s.ratio.positive = s.positives / g;
        s.ratio.negative = s.negatives / g;
    }
    if (s.negatives != 0) s.ratio.value = static_cast<double>(s.positives) / static_cast<double>(s.negatives);
    if (s.total != 0) s.no_relation_share = static_cast<double>(s.neg_no_relation) / static_cast<double>(s.total);
    return s;
}

nlohmann::json to_json(const CorpusStats& s) {
    nlohmann::json labels = nlohmann::json::array();
    for (const auto& [label, n] : s.per_label) labels.push_back({{"relation", label.str()}, {"count", n}});
    nlohmann::json ratio;
    if (s.ratio.value)
        ratio = {{"text", std::to_string(s.ratio.positive) + ":" + std::to_string(s.ratio.negative)},
                 {"positive", s.ratio.positive},
                 {"negative", s.ratio.negative},
                 {"value", *s.ratio.value}};
    else
        ratio = {{"text", "undefined"}, {"positive", s.ratio.positive}, {"negative", s.ratio.negative}, {"value", nullptr}};
    return {
        {"total", s.total},
        {"categories",
         nlohmann::json::array({{{"category", "Positive items (r,r)"}, {"count", s.positives}},
                                {{"category", "Negative items with no_relation (r,no_relation)"}, {"count", s.neg_no_relation}},
                                {{"category", "Negative items without no_relation (r,r')"}, {"count", s.neg_cross}}})},
        {"positives", s.positives},
        {"negatives", s.negatives},
        {"ratio", ratio},
        {"no_relation_share", s.no_relation_share},
        {"labels", labels},
    };
}

}  // namespace rekey::sampler
