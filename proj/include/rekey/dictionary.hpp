#pragma once
// Relational keyword dictionary: harvest correctly answered positive pairs
// from a vanilla model, have an extraction model pull trigger keywords from
// the explanations, merge with label tokens, normalize, persist.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "rekey/core.hpp"

namespace rekey::dictionary {

struct DictionaryEntry {
    RelationLabel label;
    std::vector<std::string> entity_keywords;
    std::vector<std::string> relation_keywords;
    std::vector<std::string> provenance;  // ids of the good cases shown to the extractor

    friend bool operator==(const DictionaryEntry&, const DictionaryEntry&) = default;
};

inline constexpr int kFormatVersion = 1;

struct DictionaryMeta {
    int version = kFormatVersion;
    std::string built_at;
    std::string vanilla_model_id;
    std::string extractor_model_id;
    int K = 5;
    std::uint64_t seed = 0;
    std::vector<std::string> degraded_labels;  // extraction failed; label tokens only

    friend bool operator==(const DictionaryMeta&, const DictionaryMeta&) = default;
};

struct KeywordDictionary {
    std::map<RelationLabel, DictionaryEntry> entries;
    DictionaryMeta meta;

    const DictionaryEntry* find(const RelationLabel& label) const {
        auto it = entries.find(label);
        return it == entries.end() ? nullptr : &it->second;
    }

    friend bool operator==(const KeywordDictionary&, const KeywordDictionary&) = default;
};

struct GoodCase {
    std::string case_id;
    SentenceInstance support;
    SentenceInstance test;
    RelationLabel label;
    std::string explanation;
};

struct BuilderConfig {
    int K = 5;  // good cases per label, 1..5
    std::uint64_t seed = 0;
    int max_parallel_labels = 4;
    int extraction_retries = 2;
    std::vector<std::string> no_relation_cues;

    void validate() const;
};

class DictionaryError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class KeywordParseError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

using InferFn = std::function<ModelOutput(const Episode&)>;
using ExtractFn = std::function<std::string(const std::string& prompt)>;

// Same label on both sides and an effective Yes answer; input order kept.
std::vector<Episode> collect_positive_pairs(const std::vector<Episode>& train);

struct FilterResult {
    std::vector<GoodCase> cases;
    std::size_t unparseable = 0;
};

// Keeps pairs the vanilla model answers Yes. Exceptions from infer propagate.
FilterResult filter_true_positives(const std::vector<Episode>& pairs, const InferFn& infer);

// min(K, available) cases per label without replacement, replayable per seed.
std::map<RelationLabel, std::vector<GoodCase>> sample_good_cases(const std::vector<GoodCase>& cases, int K,
                                                                 std::uint64_t seed);

// Throws std::invalid_argument for zero or more than five cases.
std::string build_extraction_prompt(const RelationLabel& label, std::span<const GoodCase> cases);

// First bracketed list of quoted strings in the response.
std::vector<std::string> parse_keyword_response(std::string_view raw);

// Unions extracted keywords with label tokens and normalizes them. Keywords
// whose stem is an entity-type expansion go to the entity list.
KeywordDictionary assemble_dictionary(const std::map<RelationLabel, std::vector<std::string>>& per_label_keywords,
                                      const BuilderConfig& config,
                                      const std::map<RelationLabel, std::vector<std::string>>& provenance = {});

struct BuildRequest {
    std::vector<Episode> train;
    InferFn infer;
    ExtractFn extract;
    BuilderConfig config;
    std::string vanilla_model_id;
    std::string extractor_model_id;
    std::string built_at;
};

struct BuildReport {
    KeywordDictionary dictionary;
    std::size_t positive_pairs = 0;
    std::size_t good_cases = 0;
    std::size_t unparseable = 0;
};

// End-to-end build. Every label seen in the training episodes gets an entry;
// extraction runs only for labels with good cases.
BuildReport build_dictionary(const BuildRequest& request);

nlohmann::json to_json(const KeywordDictionary& d);
KeywordDictionary from_json(const nlohmann::json& j);

// Canonical form: sorted keys, two-space indent, LF, trailing newline.
std::string to_canonical_string(const KeywordDictionary& d);
KeywordDictionary parse_dictionary(std::string_view text);

void save_dictionary(const KeywordDictionary& d, const std::filesystem::path& path);
KeywordDictionary load_dictionary(const std::filesystem::path& path);

}  // namespace rekey::dictionary
