#pragma once
// Domain model shared by every module: relation labels, one-shot episodes,
// parsed model outputs, and the confusion buckets used for evaluation.

#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace rekey {

// Relation label such as "per:schools_attended" or "/location/country/capital".
// Stored trimmed; equality is exact string equality.
class RelationLabel {
public:
    RelationLabel() = default;
    explicit RelationLabel(std::string_view raw);

    const std::string& str() const noexcept { return raw_; }
    bool empty() const noexcept { return raw_.empty(); }
    bool is_no_relation() const noexcept { return raw_ == kNoRelation; }

    friend bool operator==(const RelationLabel&, const RelationLabel&) = default;
    friend auto operator<=>(const RelationLabel&, const RelationLabel&) = default;

    static constexpr std::string_view kNoRelation = "no_relation";

private:
    std::string raw_;
};

struct SentenceInstance {
    std::string text;
    std::string subject;
    std::string object;
    RelationLabel relation;

    friend bool operator==(const SentenceInstance&, const SentenceInstance&) = default;
};

enum class GoldAnswer { Yes, No, Derived };
enum class Answer { Yes, No };
enum class Decision { Yes, No, Unparseable };

struct Episode {
    std::string id;
    SentenceInstance support;
    SentenceInstance test;
    GoldAnswer gold_answer = GoldAnswer::Derived;

    friend bool operator==(const Episode&, const Episode&) = default;
};

// Explicit gold answer wins; Derived is Yes iff both labels match and neither
// is no_relation.
Answer effective_answer(const Episode& ep);

struct ModelOutput {
    std::string raw_text;
    std::string explanation;  // raw_text minus the decision line
    std::optional<std::string> summary_1;
    std::optional<std::string> summary_2;
    Decision decision = Decision::Unparseable;
    std::optional<std::string> error;  // transport failure, if any
};

enum class ConfusionCategory { yes_yes, no_no, no_yes, yes_no, unparseable };

// Named gold-then-prediction: no_yes means gold No, predicted Yes.
ConfusionCategory classify(Answer gold, Decision decision);

std::string_view to_string(Answer a);
std::string_view to_string(Decision d);
std::string_view to_string(GoldAnswer g);
std::string_view to_string(ConfusionCategory c);
std::optional<ConfusionCategory> parse_category(std::string_view s);
std::optional<Decision> parse_decision_name(std::string_view s);

inline constexpr ConfusionCategory kAllCategories[] = {
    ConfusionCategory::yes_yes, ConfusionCategory::no_no, ConfusionCategory::no_yes,
    ConfusionCategory::yes_no, ConfusionCategory::unparseable};

// One problem found while reading an input file. line is 1-based; 0 means the
// problem is not tied to a line.
struct LineIssue {
    std::size_t line = 0;
    std::string message;
};

class LoadError : public std::runtime_error {
public:
    LoadError(std::string path, std::vector<LineIssue> issues);
    const std::string& path() const noexcept { return path_; }
    const std::vector<LineIssue>& issues() const noexcept { return issues_; }

private:
    std::string path_;
    std::vector<LineIssue> issues_;
};

struct EpisodeLoadResult {
    std::vector<Episode> episodes;
    std::vector<LineIssue> warnings;  // entity-span containment misses
};

// Reads episode JSONL. Blank lines are skipped. Every malformed line is
// collected before a LoadError is thrown, so one pass reports all problems.
EpisodeLoadResult load_episodes_with_warnings(const std::filesystem::path& path);
std::vector<Episode> load_episodes(const std::filesystem::path& path);

// Parses a single episode object. synthesized_id is used when "id" is absent.
Episode episode_from_json(const nlohmann::json& j, const std::string& synthesized_id);
nlohmann::json episode_to_json(const Episode& ep);
nlohmann::json sentence_to_json(const SentenceInstance& s);

void save_episodes(const std::filesystem::path& path, const std::vector<Episode>& eps);

// Splits text into lines, accepting both LF and CRLF endings.
std::vector<std::string> split_lines(std::string_view text);
std::string trim(std::string_view s);
std::string to_lower(std::string_view s);
std::size_t whitespace_word_count(std::string_view text);

}  // namespace rekey
