#include "rekey/reward.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "rekey/log.hpp"
#include "rekey/textnorm.hpp"

namespace rekey::reward {

std::map<std::pair<Decision, Answer>, double> RewardConfig::default_acc_table() {
    return {
        {{Decision::Yes, Answer::Yes}, 3.0},
        {{Decision::No, Answer::No}, 1.0},
        {{Decision::Yes, Answer::No}, -3.0},
        {{Decision::No, Answer::Yes}, -1.0},
        {{Decision::Unparseable, Answer::Yes}, 0.0},
        {{Decision::Unparseable, Answer::No}, 0.0},
    };
}

void RewardConfig::validate() const {
    if (!(w_entity >= 0)) throw std::invalid_argument("w_entity must be >= 0");
    if (!(w_relation >= 0)) throw std::invalid_argument("w_relation must be >= 0");
    if (!(N > 0)) throw std::invalid_argument("N must be > 0");
    if (!(std_epsilon > 0)) throw std::invalid_argument("std_epsilon must be > 0");
    for (auto d : {Decision::Yes, Decision::No, Decision::Unparseable})
        for (auto g : {Answer::Yes, Answer::No})
            if (!acc_table.contains({d, g}))
                throw std::invalid_argument("acc_table lacks (" + std::string(to_string(d)) + ", " +
                                            std::string(to_string(g)) + ")");
}

HitCounts hit_counts(std::string_view explanation, const dictionary::DictionaryEntry& entry) {
    const auto tokens = textnorm::normalize(explanation, /*drop_stopwords=*/false);
    HitCounts c;
    auto tally = [&](const std::vector<std::string>& keywords) {
        int hits = 0;
        std::vector<std::string> seen;
        for (const auto& k : keywords) {
            if (std::find(seen.begin(), seen.end(), k) != seen.end()) continue;
            seen.push_back(k);
            if (textnorm::match_keyword(k, tokens)) {
                ++hits;
                c.matched_keywords.push_back(k);
            }
        }
        return hits;
    };
    if (entry.label.is_no_relation()) {
        c.relation_hits = tally(entry.relation_keywords);
        c.entity_hits = c.relation_hits;
    } else {
        c.entity_hits = tally(entry.entity_keywords);
        c.relation_hits = tally(entry.relation_keywords);
    }
    return c;
}

double hit_score(const HitCounts& counts, std::size_t word_count, const RewardConfig& cfg) {
    if (word_count == 0) return 0.0;
    const double weighted = cfg.w_entity * counts.entity_hits + cfg.w_relation * counts.relation_hits;
    return weighted / (static_cast<double>(word_count) / cfg.N);
}

RewardBreakdown hit_at_dict_reward(std::string_view explanation, const RelationLabel& r1, const RelationLabel& r2,
                                   const dictionary::KeywordDictionary& dict, const RewardConfig& cfg) {
    RewardBreakdown b;
    b.word_count = whitespace_word_count(explanation);
    auto score_label = [&](const RelationLabel& r, HitCounts& counts) {
        const auto* entry = dict.find(r);
        if (!entry) {
            b.warnings.push_back("label \"" + r.str() + "\" not in dictionary; scored 0");
            log::warn(b.warnings.back());
            return 0.0;
        }
        counts = hit_counts(explanation, *entry);
        return hit_score(counts, b.word_count, cfg);
    };
    b.s1 = score_label(r1, b.counts_1);
    b.s2 = score_label(r2, b.counts_2);
    b.hit_reward = (b.s1 + b.s2) / 2.0;
    return b;
}

double accuracy_reward(Decision decision, Answer gold, const RewardConfig& cfg) {
    auto it = cfg.acc_table.find({decision, gold});
    return it == cfg.acc_table.end() ? 0.0 : it->second;
}

RewardBreakdown combined_reward(const ModelOutput& output, const Episode& ep,
                                const dictionary::KeywordDictionary& dict, const RewardConfig& cfg) {
    auto b = hit_at_dict_reward(output.explanation, ep.support.relation, ep.test.relation, dict, cfg);
    b.acc_reward = accuracy_reward(output.decision, effective_answer(ep), cfg);
    b.total = b.acc_reward + b.hit_reward;
    return b;
}

std::vector<double> group_advantages(const std::vector<double>& rewards, const RewardConfig& cfg) {
    if (rewards.empty()) throw std::invalid_argument("group_advantages needs at least one reward");
    const double n = static_cast<double>(rewards.size());
    double mean = 0;
    for (double r : rewards) mean += r;
    mean /= n;
    double var = 0;
    for (double r : rewards) var += (r - mean) * (r - mean);
    const double sd = std::sqrt(var / n);
    std::vector<double> adv(rewards.size(), 0.0);
    if (sd < cfg.std_epsilon) return adv;
    for (std::size_t i = 0; i < rewards.size(); ++i) adv[i] = (rewards[i] - mean) / sd;
    return adv;
}

nlohmann::json to_json(const HitCounts& c) {
    return {{"entity_hits", c.entity_hits}, {"relation_hits", c.relation_hits}, {"matched_keywords", c.matched_keywords}};
}

nlohmann::json to_json(const RewardBreakdown& b) {
    nlohmann::json j{{"s1", b.s1},
                     {"s2", b.s2},
                     {"hit_reward", b.hit_reward},
                     {"acc_reward", b.acc_reward},
                     {"total", b.total},
                     {"counts_1", to_json(b.counts_1)},
                     {"counts_2", to_json(b.counts_2)},
                     {"word_count", b.word_count}};
    if (!b.warnings.empty()) j["warnings"] = b.warnings;
    return j;
}

}  // namespace rekey::reward
