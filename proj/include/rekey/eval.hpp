#pragma once
// Positive-class precision/recall/F1, blinded human-evaluation sampling with
// CSV round-tripping, and Cohen's kappa between raters.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "rekey/core.hpp"

namespace rekey::eval {

using Prediction = std::pair<Episode, ModelOutput>;

struct MetricsReport {
    std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
    std::size_t unparseable = 0;  // also counted in fn or tn
    double precision = 0, recall = 0, f1 = 0;
    std::map<ConfusionCategory, std::size_t> per_category;

    std::size_t total() const { return tp + fp + fn + tn; }
};

// Unparseable decisions count as non-Yes. Zero denominators give 0.
MetricsReport score_predictions(const std::vector<Prediction>& pairs);
nlohmann::json to_json(const MetricsReport& m);

struct HumanEvalItem {
    std::string episode_id;
    ConfusionCategory category = ConfusionCategory::yes_yes;
    std::string explanation;
    std::optional<int> score;  // 0..3
    std::string rater_id;

    friend bool operator==(const HumanEvalItem&, const HumanEvalItem&) = default;
};

// The four rated buckets; unparseable outputs are never sampled.
inline constexpr ConfusionCategory kRatedCategories[] = {
    ConfusionCategory::yes_yes, ConfusionCategory::no_no, ConfusionCategory::no_yes, ConfusionCategory::yes_no};

struct HumanEvalSample {
    std::vector<HumanEvalItem> items;
    std::vector<std::string> warnings;  // one per category short of per_category
};

// Throws std::invalid_argument when per_category < 1.
HumanEvalSample sample_for_human_eval(const std::vector<Prediction>& pairs, std::size_t per_category,
                                      std::uint64_t seed);

// Columns: episode_id,category,explanation,score,rater_id. Gold labels are
// never written.
std::string to_csv(const std::vector<HumanEvalItem>& items);
// Throws LoadError listing every bad row.
std::vector<HumanEvalItem> parse_csv(std::string_view text, const std::string& source = "<csv>");
void save_csv(const std::filesystem::path& path, const std::vector<HumanEvalItem>& items);
std::vector<HumanEvalItem> load_csv(const std::filesystem::path& path);

class ScoreError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Per-category sums over all four rated buckets (absent ones are 0). Throws
// ScoreError on an unscored item or a score outside 0..3.
std::map<ConfusionCategory, int> aggregate_human_scores(const std::vector<HumanEvalItem>& items);

struct AgreementReport {
    double kappa = 0;
    double observed_agreement = 0;
    double expected_agreement = 0;
};

// Throws std::invalid_argument on empty input or a length mismatch. When
// expected agreement is 1 both raters used one identical rating, so kappa is 1.
AgreementReport cohen_kappa(const std::vector<int>& a, const std::vector<int>& b);
nlohmann::json to_json(const AgreementReport& r);

}  // namespace rekey::eval
