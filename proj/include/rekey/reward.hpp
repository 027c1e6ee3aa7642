#pragma once
// Explanation-aware reward: dictionary keyword hits normalized by explanation
// length, an asymmetric correctness payoff, and group-relative advantages.

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "rekey/core.hpp"
#include "rekey/dictionary.hpp"

namespace rekey::reward {

struct RewardConfig {
    double w_entity = 0.4;
    double w_relation = 1.0;
    double N = 5.0;  // length normalizer: an explanation of N words is scored at face value
    double std_epsilon = 1e-8;
    std::map<std::pair<Decision, Answer>, double> acc_table = default_acc_table();

    static std::map<std::pair<Decision, Answer>, double> default_acc_table();

    // Throws std::invalid_argument naming the offending field.
    void validate() const;
};

struct HitCounts {
    int entity_hits = 0;
    int relation_hits = 0;
    std::vector<std::string> matched_keywords;  // entity matches first, then relation

    friend bool operator==(const HitCounts&, const HitCounts&) = default;
};

struct RewardBreakdown {
    double s1 = 0;
    double s2 = 0;
    double hit_reward = 0;
    double acc_reward = 0;
    double total = 0;
    HitCounts counts_1;
    HitCounts counts_2;
    std::size_t word_count = 0;
    std::vector<std::string> warnings;
};

// Each distinct keyword counts at most once. For no_relation the entity count
// is replaced by the relation count.
HitCounts hit_counts(std::string_view explanation, const dictionary::DictionaryEntry& entry);

// 0 when word_count is 0.
double hit_score(const HitCounts& counts, std::size_t word_count, const RewardConfig& cfg);

// Fills s1, s2, hit_reward, counts and word_count. A label missing from the
// dictionary scores 0 and adds a warning; this never throws.
RewardBreakdown hit_at_dict_reward(std::string_view explanation, const RelationLabel& r1, const RelationLabel& r2,
                                   const dictionary::KeywordDictionary& dict, const RewardConfig& cfg);

double accuracy_reward(Decision decision, Answer gold, const RewardConfig& cfg);

RewardBreakdown combined_reward(const ModelOutput& output, const Episode& ep,
                                const dictionary::KeywordDictionary& dict, const RewardConfig& cfg);

// Population standard deviation; a group whose std is below cfg.std_epsilon
// gets all-zero advantages. Throws std::invalid_argument on an empty group.
std::vector<double> group_advantages(const std::vector<double>& rewards, const RewardConfig& cfg);

nlohmann::json to_json(const HitCounts& c);
nlohmann::json to_json(const RewardBreakdown& b);

}  // namespace rekey::reward
