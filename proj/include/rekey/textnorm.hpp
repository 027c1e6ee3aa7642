#pragma once
// Deterministic English text normalization: tokenization, Porter stemming and
// stopword removal. Shared by dictionary post-processing and keyword matching.

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "rekey/core.hpp"

namespace rekey::textnorm {

// Porter (1980) suffix stripper. Input is expected lowercase ASCII; words of
// two characters or fewer are returned unchanged.
std::string porter_stem(std::string_view word);

bool is_stopword(std::string_view lowercase_word);
const std::vector<std::string>& stopwords();

struct NormalizedToken {
    std::string surface;  // lowercased token
    std::string stem;

    friend bool operator==(const NormalizedToken&, const NormalizedToken&) = default;
};

// Splits on whitespace and punctuation, lowercases and stems. A hyphenated word
// yields its parts followed by the joined form ("co-founder" -> co, founder,
// cofound). No deduplication.
std::vector<NormalizedToken> normalize(std::string_view text, bool drop_stopwords);

std::vector<std::string> stems_of(std::span<const NormalizedToken> tokens);

// Canonical dictionary form of a keyword phrase: stopword-free stems joined by
// single spaces, hyphenated words collapsed to their joined form. Empty when
// the phrase has no content words.
std::string normalize_keyword(std::string_view phrase, bool drop_stopwords = true);

// Literal phrase kept in the no_relation entry.
inline constexpr std::string_view kNoRelationPhrase = "no relation";

struct LabelKeywords {
    std::vector<std::string> entity;
    std::vector<std::string> relation;

    friend bool operator==(const LabelKeywords&, const LabelKeywords&) = default;
};

// Entity-type prefixes and what they expand to.
struct EntityExpansion {
    std::string_view type;
    std::vector<std::string_view> expands_to;
};
const std::vector<EntityExpansion>& entity_expansion_table();

// Stems of every expansion target (person, organ, compani, locat, busi, film).
const std::vector<std::string>& entity_expansion_stems();

LabelKeywords tokenize_label(const RelationLabel& label);

// True iff the keyword's words occur as a contiguous run in tokens. A keyword
// word matches a token when it equals the token's stem or its surface form.
bool match_keyword(std::string_view keyword, std::span<const NormalizedToken> tokens);

// First-occurrence order; two entries are equal when normalize_keyword agrees.
std::vector<std::string> dedupe_keywords(std::span<const std::string> keywords);

}  // namespace rekey::textnorm
