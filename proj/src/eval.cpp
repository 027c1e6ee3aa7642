#include "rekey/eval.hpp"

#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include "rekey/log.hpp"
#include "rekey/rng.hpp"

namespace rekey::eval {

namespace {

double safe_div(double num, double den) { return den == 0 ? 0.0 : num / den; }

void append_field(std::string& out, std::string_view field) {
    const bool quote = field.find_first_of(",\"\r\n") != std::string_view::npos;
    if (!quote) {
        out += field;
        return;
    }
    out.push_back('"');
    for (char c : field) {
        if (c == '"') out.push_back('"');
        out.push_back(c);
    }
    out.push_back('"');
}

struct CsvRecord {
    std::size_t line = 0;  // line on which the record starts
    std::vector<std::string> fields;
};

// RFC 4180 records; quoted fields may span lines. Accepts LF or CRLF.
std::vector<CsvRecord> read_records(std::string_view text, std::vector<LineIssue>& issues) {
    std::vector<CsvRecord> records;
    CsvRecord rec{1, {}};
    std::string field;
    std::size_t line = 1;
    bool in_quotes = false;
    bool record_has_content = false;
    for (std::size_t i = 0; i < text.size(); ++i) {
        const char c = text[i];
        if (in_quotes) {
            if (c == '"') {
                if (i + 1 < text.size() && text[i + 1] == '"') {
                    field.push_back('"');
                    ++i;
                } else {
                    in_quotes = false;
                }
            } else {
                if (c == '\n') ++line;
                field.push_back(c);
            }
            continue;
        }
        if (c == '"') {
            in_quotes = true;
            record_has_content = true;
        } else if (c == ',') {
            rec.fields.push_back(std::move(field));
            field.clear();
            record_has_content = true;
        } else if (c == '\r' && i + 1 < text.size() && text[i + 1] == '\n') {
            continue;
        } else if (c == '\n') {
            if (record_has_content || !field.empty()) {
                rec.fields.push_back(std::move(field));
                records.push_back(std::move(rec));
            }
            field.clear();
            ++line;
            rec = CsvRecord{line, {}};
            record_has_content = false;
        } else {
            field.push_back(c);
            record_has_content = true;
        }
    }
    if (in_quotes) issues.push_back({rec.line, "unterminated quoted field"});
    if (record_has_content || !field.empty()) {
        rec.fields.push_back(std::move(field));
        records.push_back(std::move(rec));
    }
    return records;
}

constexpr std::string_view kHeader[] = {"episode_id", "category", "explanation", "score", "rater_id"};

}  // namespace

MetricsReport score_predictions(const std::vector<Prediction>& pairs) {
    MetricsReport m;
    for (auto c : kAllCategories) m.per_category[c] = 0;
    for (const auto& [ep, out] : pairs) {
        const Answer gold = effective_answer(ep);
        const bool predicted_yes = out.decision == Decision::Yes;
        if (gold == Answer::Yes)
            ++(predicted_yes ? m.tp : m.fn);
        else
            ++(predicted_yes ? m.fp : m.tn);
        if (out.decision == Decision::Unparseable) ++m.unparseable;
        ++m.per_category[classify(gold, out.decision)];
    }
    m.precision = safe_div(static_cast<double>(m.tp), static_cast<double>(m.tp + m.fp));
    m.recall = safe_div(static_cast<double>(m.tp), static_cast<double>(m.tp + m.fn));
    m.f1 = safe_div(2 * m.precision * m.recall, m.precision + m.recall);
    return m;
}

nlohmann::json to_json(const MetricsReport& m) {
    nlohmann::json cats = nlohmann::json::object();
    for (const auto& [c, n] : m.per_category) cats[std::string(to_string(c))] = n;
    return {{"tp", m.tp},
            {"fp", m.fp},
            {"fn", m.fn},
            {"tn", m.tn},
            {"unparseable", m.unparseable},
            {"total", m.total()},
            {"precision", m.precision},
            {"recall", m.recall},
            {"f1", m.f1},
            {"per_category", cats}};
}

HumanEvalSample sample_for_human_eval(const std::vector<Prediction>& pairs, std::size_t per_category,
                                      std::uint64_t seed) {
    if (per_category < 1) throw std::invalid_argument("per_category must be >= 1");
    std::map<ConfusionCategory, std::vector<const Prediction*>> buckets;
    for (const auto& p : pairs) {
        const auto c = classify(effective_answer(p.first), p.second.decision);
        if (c != ConfusionCategory::unparseable) buckets[c].push_back(&p);
    }
    Rng rng(seed);
    HumanEvalSample sample;
    for (auto c : kRatedCategories) {
        const auto& bucket = buckets[c];
        if (bucket.size() < per_category) {
            sample.warnings.push_back("category " + std::string(to_string(c)) + ": only " +
                                      std::to_string(bucket.size()) + " of " + std::to_string(per_category) +
                                      " requested items available");
            log::warn(sample.warnings.back());
        }
        for (auto i : rng.sample_indices(bucket.size(), per_category)) {
            const auto& [ep, out] = *bucket[i];
            sample.items.push_back({ep.id, c, out.explanation, std::nullopt, ""});
        }
    }
    return sample;
}

std::string to_csv(const std::vector<HumanEvalItem>& items) {
    std::string out = "episode_id,category,explanation,score,rater_id\r\n";
    for (const auto& it : items) {
        append_field(out, it.episode_id);
        out.push_back(',');
        append_field(out, to_string(it.category));
        out.push_back(',');
        append_field(out, it.explanation);
        out.push_back(',');
        if (it.score) out += std::to_string(*it.score);
        out.push_back(',');
        append_field(out, it.rater_id);
        out += "\r\n";
    }
    return out;
}

std::vector<HumanEvalItem> parse_csv(std::string_view text, const std::string& source) {
    std::vector<LineIssue> issues;
    auto records = read_records(text, issues);
    std::vector<HumanEvalItem> items;
    if (records.empty()) {
        issues.push_back({0, "missing header row"});
        throw LoadError(source, std::move(issues));
    }
    const auto& header = records.front().fields;
    bool header_ok = header.size() == std::size(kHeader);
    for (std::size_t i = 0; header_ok && i < header.size(); ++i) header_ok = trim(header[i]) == kHeader[i];
    if (!header_ok) issues.push_back({records.front().line, "header must be episode_id,category,explanation,score,rater_id"});

    for (std::size_t r = 1; r < records.size(); ++r) {
        const auto& rec = records[r];
        if (rec.fields.size() != std::size(kHeader)) {
            issues.push_back({rec.line, "expected 5 fields, found " + std::to_string(rec.fields.size())});
            continue;
        }
        HumanEvalItem item;
        item.episode_id = rec.fields[0];
        item.explanation = rec.fields[2];
        item.rater_id = rec.fields[4];
        auto cat = parse_category(trim(rec.fields[1]));
        if (!cat) issues.push_back({rec.line, "unknown category \"" + rec.fields[1] + "\""});
        else item.category = *cat;
        const auto score_text = trim(rec.fields[3]);
        if (!score_text.empty()) {
            int v = 0;
            std::size_t used = 0;
            try {
                v = std::stoi(score_text, &used);
            } catch (const std::exception&) {
                used = 0;
            }
            if (used != score_text.size()) issues.push_back({rec.line, "score \"" + score_text + "\" is not an integer"});
            else item.score = v;
        }
        items.push_back(std::move(item));
    }
    if (!issues.empty()) throw LoadError(source, std::move(issues));
    return items;
}

void save_csv(const std::filesystem::path& path, const std::vector<HumanEvalItem>& items) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << to_csv(items);
}

std::vector<HumanEvalItem> load_csv(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_csv(ss.str(), path.string());
}

std::map<ConfusionCategory, int> aggregate_human_scores(const std::vector<HumanEvalItem>& items) {
    std::map<ConfusionCategory, int> totals;
    for (auto c : kRatedCategories) totals[c] = 0;
    for (const auto& it : items) {
        if (!it.score) throw ScoreError("item " + it.episode_id + " is unscored");
        if (*it.score < 0 || *it.score > 3)
            throw ScoreError("item " + it.episode_id + " has score " + std::to_string(*it.score) + " outside 0..3");
        totals[it.category] += *it.score;
    }
    return totals;
}

AgreementReport cohen_kappa(const std::vector<int>& a, const std::vector<int>& b) {
    if (a.size() != b.size())
        throw std::invalid_argument("rater vectors differ in length (" + std::to_string(a.size()) + " vs " +
                                    std::to_string(b.size()) + ")");
    if (a.empty()) throw std::invalid_argument("rater vectors are empty");
    const double n = static_cast<double>(a.size());
    std::map<int, std::size_t> ma, mb;
    std::size_t agree = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        ++ma[a[i]];
        ++mb[b[i]];
        if (a[i] == b[i]) ++agree;
    }
    AgreementReport r;
    r.observed_agreement = static_cast<double>(agree) / n;
    for (const auto& [v, ca] : ma)
        if (auto it = mb.find(v); it != mb.end())
            r.expected_agreement += (static_cast<double>(ca) / n) * (static_cast<double>(it->second) / n);
    if (r.expected_agreement >= 1.0)
        r.kappa = 1.0;
    else
        r.kappa = (r.observed_agreement - r.expected_agreement) / (1.0 - r.expected_agreement);
    return r;
}

nlohmann::json to_json(const AgreementReport& r) {
    return {{"kappa", r.kappa}, {"observed_agreement", r.observed_agreement}, {"expected_agreement", r.expected_agreement}};
}

}  // namespace rekey::eval
