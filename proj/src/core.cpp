#include "rekey/core.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>
#include <unordered_map>

#include "rekey/log.hpp"

namespace rekey {

namespace {

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }

std::string describe_issues(const std::string& path, const std::vector<LineIssue>& issues) {
    std::ostringstream os;
    os << path << ": " << issues.size() << " problem(s)";
    for (const auto& issue : issues) {
        os << "\n  ";
        if (issue.line > 0) os << "line " << issue.line << ": ";
        os << issue.message;
    }
    return os.str();
}

std::string require_string(const nlohmann::json& obj, const char* key, const std::string& where) {
    auto it = obj.find(key);
    if (it == obj.end()) throw std::invalid_argument("missing field \"" + where + key + "\"");
    if (!it->is_string()) throw std::invalid_argument("field \"" + where + key + "\" must be a string");
    return it->get<std::string>();
}

SentenceInstance sentence_from_json(const nlohmann::json& j, const char* name) {
    if (!j.is_object()) throw std::invalid_argument(std::string("field \"") + name + "\" must be an object");
    const std::string where = std::string(name) + ".";
    SentenceInstance s;
    s.text = require_string(j, "text", where);
    s.subject = require_string(j, "subject", where);
    s.object = require_string(j, "object", where);
    const std::string rel = require_string(j, "relation", where);
    if (trim(rel).empty()) throw std::invalid_argument("field \"" + where + "relation\" is empty");
    s.relation = RelationLabel(rel);
    return s;
}

void check_spans(const SentenceInstance& s, const char* name, std::size_t line,
                 std::vector<LineIssue>& warnings) {
    if (s.text.find(s.subject) == std::string::npos)
        warnings.push_back({line, std::string(name) + ".subject not found in text"});
    if (s.text.find(s.object) == std::string::npos)
        warnings.push_back({line, std::string(name) + ".object not found in text"});
}

}  // namespace

RelationLabel::RelationLabel(std::string_view raw) : raw_(trim(raw)) {}

Answer effective_answer(const Episode& ep) {
    switch (ep.gold_answer) {
        case GoldAnswer::Yes: return Answer::Yes;
        case GoldAnswer::No: return Answer::No;
        case GoldAnswer::Derived: break;
    }
    const auto& r1 = ep.support.relation;
    const auto& r2 = ep.test.relation;
    return (r1 == r2 && !r1.is_no_relation()) ? Answer::Yes : Answer::No;
}

ConfusionCategory classify(Answer gold, Decision decision) {
    if (decision == Decision::Unparseable) return ConfusionCategory::unparseable;
    const bool predicted_yes = decision == Decision::Yes;
    if (gold == Answer::Yes) return predicted_yes ? ConfusionCategory::yes_yes : ConfusionCategory::yes_no;
    return predicted_yes ? ConfusionCategory::no_yes : ConfusionCategory::no_no;
}

std::string_view to_string(Answer a) { return a == Answer::Yes ? "Yes" : "No"; }

std::string_view to_string(Decision d) {
    switch (d) {
        case Decision::Yes: return "Yes";
        case Decision::No: return "No";
        case Decision::Unparseable: break;
    }
    return "Unparseable";
}

std::string_view to_string(GoldAnswer g) {
    switch (g) {
        case GoldAnswer::Yes: return "Yes";
        case GoldAnswer::No: return "No";
        case GoldAnswer::Derived: break;
    }
    return "Derived";
}

std::string_view to_string(ConfusionCategory c) {
    switch (c) {
        case ConfusionCategory::yes_yes: return "yes_yes";
        case ConfusionCategory::no_no: return "no_no";
        case ConfusionCategory::no_yes: return "no_yes";
        case ConfusionCategory::yes_no: return "yes_no";
        case ConfusionCategory::unparseable: break;
    }
    return "unparseable";
}

std::optional<ConfusionCategory> parse_category(std::string_view s) {
    for (auto c : kAllCategories)
        if (to_string(c) == s) return c;
    return std::nullopt;
}

std::optional<Decision> parse_decision_name(std::string_view s) {
    for (auto d : {Decision::Yes, Decision::No, Decision::Unparseable})
        if (to_string(d) == s) return d;
    return std::nullopt;
}

LoadError::LoadError(std::string path, std::vector<LineIssue> issues)
    : std::runtime_error(describe_issues(path, issues)), path_(std::move(path)), issues_(std::move(issues)) {}

Episode episode_from_json(const nlohmann::json& j, const std::string& synthesized_id) {
    if (!j.is_object()) throw std::invalid_argument("episode must be a JSON object");
    Episode ep;
    if (auto it = j.find("id"); it != j.end() && !it->is_null()) {
        if (!it->is_string()) throw std::invalid_argument("field \"id\" must be a string");
        ep.id = it->get<std::string>();
    } else {
        ep.id = synthesized_id;
    }
    auto sup = j.find("support");
    if (sup == j.end()) throw std::invalid_argument("missing field \"support\"");
    auto tst = j.find("test");
    if (tst == j.end()) throw std::invalid_argument("missing field \"test\"");
    ep.support = sentence_from_json(*sup, "support");
    ep.test = sentence_from_json(*tst, "test");

    ep.gold_answer = GoldAnswer::Derived;
    if (auto it = j.find("gold_answer"); it != j.end() && !it->is_null()) {
        if (!it->is_string()) throw std::invalid_argument("field \"gold_answer\" must be \"Yes\", \"No\" or null");
        const auto v = it->get<std::string>();
        if (v == "Yes") ep.gold_answer = GoldAnswer::Yes;
        else if (v == "No") ep.gold_answer = GoldAnswer::No;
        else throw std::invalid_argument("field \"gold_answer\" must be \"Yes\", \"No\" or null, got \"" + v + "\"");
    }
    return ep;
}

nlohmann::json sentence_to_json(const SentenceInstance& s) {
    return {{"text", s.text}, {"subject", s.subject}, {"object", s.object}, {"relation", s.relation.str()}};
}

nlohmann::json episode_to_json(const Episode& ep) {
    nlohmann::json j{{"id", ep.id}, {"support", sentence_to_json(ep.support)}, {"test", sentence_to_json(ep.test)}};
    switch (ep.gold_answer) {
        case GoldAnswer::Yes: j["gold_answer"] = "Yes"; break;
        case GoldAnswer::No: j["gold_answer"] = "No"; break;
        case GoldAnswer::Derived: j["gold_answer"] = nullptr; break;
    }
    return j;
}

EpisodeLoadResult load_episodes_with_warnings(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw LoadError(path.string(), {{0, "cannot open file"}});

    EpisodeLoadResult result;
    std::vector<LineIssue> errors;
    std::unordered_map<std::string, std::size_t> seen;
    const std::string stem = path.stem().string();

    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (trim(line).empty()) continue;
        try {
            auto j = nlohmann::json::parse(line);
            Episode ep = episode_from_json(j, stem + ":" + std::to_string(line_no));
            if (auto [it, inserted] = seen.emplace(ep.id, line_no); !inserted) {
                errors.push_back({line_no, "duplicate id \"" + ep.id + "\" (first seen on line " +
                                               std::to_string(it->second) + ")"});
                continue;
            }
            check_spans(ep.support, "support", line_no, result.warnings);
            check_spans(ep.test, "test", line_no, result.warnings);
            result.episodes.push_back(std::move(ep));
        } catch (const nlohmann::json::parse_error& e) {
            errors.push_back({line_no, std::string("invalid JSON: ") + e.what()});
        } catch (const std::invalid_argument& e) {
            errors.push_back({line_no, e.what()});
        }
    }
    if (!errors.empty()) throw LoadError(path.string(), std::move(errors));
    return result;
}

std::vector<Episode> load_episodes(const std::filesystem::path& path) {
    auto result = load_episodes_with_warnings(path);
    for (const auto& w : result.warnings) log::warn(path.string() + ":" + std::to_string(w.line) + ": " + w.message);
    return std::move(result.episodes);
}

void save_episodes(const std::filesystem::path& path, const std::vector<Episode>& eps) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    for (const auto& ep : eps) out << episode_to_json(ep).dump() << '\n';
}

std::vector<std::string> split_lines(std::string_view text) {
    std::vector<std::string> lines;
    std::size_t start = 0;
    while (start <= text.size()) {
        auto nl = text.find('\n', start);
        if (nl == std::string_view::npos) {
            if (start < text.size()) lines.emplace_back(text.substr(start));
            break;
        }
        std::string_view l = text.substr(start, nl - start);
        if (!l.empty() && l.back() == '\r') l.remove_suffix(1);
        lines.emplace_back(l);
        start = nl + 1;
    }
    return lines;
}

std::string trim(std::string_view s) {
    auto b = std::find_if_not(s.begin(), s.end(), is_space);
    auto e = std::find_if_not(s.rbegin(), s.rend(), is_space).base();
    return b < e ? std::string(b, e) : std::string{};
}

std::string to_lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

std::size_t whitespace_word_count(std::string_view text) {
    std::size_t count = 0;
    bool in_word = false;
    for (char c : text) {
        if (is_space(c)) {
            in_word = false;
        } else if (!in_word) {
            in_word = true;
            ++count;
        }
    }
    return count;
}

}  // namespace rekey
