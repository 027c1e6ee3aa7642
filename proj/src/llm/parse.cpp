#include <cctype>

#include "rekey/llm.hpp"

namespace rekey::llm {
namespace {

struct LineSpan {
    std::size_t begin;  // first byte of the line
    std::size_t end;    // one past the last content byte (before \r\n)
    std::size_t next;   // first byte of the following line
};

std::vector<LineSpan> line_spans(std::string_view text) {
    std::vector<LineSpan> spans;
    std::size_t start = 0;
    while (start < text.size()) {
        auto nl = text.find('\n', start);
        std::size_t next = nl == std::string_view::npos ? text.size() : nl + 1;
        std::size_t end = nl == std::string_view::npos ? text.size() : nl;
        if (end > start && text[end - 1] == '\r') --end;
        spans.push_back({start, end, next});
        start = next;
    }
    return spans;
}

bool is_alpha(char c) { return std::isalpha(static_cast<unsigned char>(c)) != 0; }
bool is_alnum(char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0; }

// Drops markdown decoration such as "**", "- ", "> " or "### " from the front.
std::string_view strip_leading_marks(std::string_view s) {
    std::size_t i = 0;
    while (i < s.size() && !is_alnum(s[i])) ++i;
    return s.substr(i);
}

bool starts_with_ci(std::string_view s, std::string_view prefix) {
    if (s.size() < prefix.size()) return false;
    for (std::size_t i = 0; i < prefix.size(); ++i)
        if (std::tolower(static_cast<unsigned char>(s[i])) != std::tolower(static_cast<unsigned char>(prefix[i])))
            return false;
    return true;
}

std::optional<Decision> decision_word(std::string_view w) {
    const auto lw = to_lower(w);
    if (lw == "yes") return Decision::Yes;
    if (lw == "no") return Decision::No;
    return std::nullopt;
}

std::optional<Decision> decision_of_line(std::string_view line) {
    auto body = strip_leading_marks(line);
    if (body.empty()) return std::nullopt;

    if (starts_with_ci(body, "conclusion")) {
        auto rest = body.substr(std::string_view("conclusion").size());
        std::size_t i = 0;
        while (i < rest.size() && (rest[i] == ' ' || rest[i] == '\t' || rest[i] == '*')) ++i;
        // "**Conclusion**:" puts the colon after the closing marks.
        if (i >= rest.size() || rest[i] != ':') return std::nullopt;
        ++i;
        while (i < rest.size() && !is_alpha(rest[i])) ++i;
        std::size_t j = i;
        while (j < rest.size() && is_alpha(rest[j])) ++j;
        return decision_word(rest.substr(i, j - i));
    }

    std::string letters;
    for (char c : body) {
        if (is_alpha(c)) letters.push_back(c);
        if (letters.size() > 3) return std::nullopt;
    }
    return decision_word(letters);
}

// Position just past "Relation_Summarization_<n>" when the line opens with it.
std::optional<std::size_t> label_end(std::string_view line, int n) {
    auto body = strip_leading_marks(line);
    const std::string label = "Relation_Summarization_" + std::to_string(n);
    if (!starts_with_ci(body, label)) return std::nullopt;
    const std::size_t offset = static_cast<std::size_t>(body.data() - line.data()) + label.size();
    if (offset < line.size() && std::isdigit(static_cast<unsigned char>(line[offset]))) return std::nullopt;
    return offset;
}

bool is_any_label(std::string_view line) {
    auto body = strip_leading_marks(line);
    return starts_with_ci(body, "Relation_Summarization_");
}

// "Understanding Process:" style headings, or a "Conclusion:" line.
bool is_section_break(std::string_view line) {
    auto body = trim(strip_leading_marks(line));
    if (starts_with_ci(body, "conclusion") || starts_with_ci(body, "understanding process")) return true;
    while (!body.empty() && (body.back() == '*' || body.back() == ' ')) body.pop_back();
    if (body.empty() || body.back() != ':') return false;
    return whitespace_word_count(body) <= 4;
}

std::optional<std::string> extract_summary(std::string_view raw, int n) {
    const auto spans = line_spans(raw);
    for (std::size_t i = 0; i < spans.size(); ++i) {
        auto line = raw.substr(spans[i].begin, spans[i].end - spans[i].begin);
        auto after = label_end(line, n);
        if (!after) continue;

        auto rest = line.substr(*after);
        std::size_t k = 0;
        while (k < rest.size() && (rest[k] == ':' || rest[k] == '*' || rest[k] == ' ' || rest[k] == '\t')) ++k;
        std::string text = trim(rest.substr(k));

        for (std::size_t j = i + 1; j < spans.size(); ++j) {
            auto next = raw.substr(spans[j].begin, spans[j].end - spans[j].begin);
            const bool blank = trim(next).empty();
            if (blank && text.empty()) continue;  // label alone on its line
            if (blank || is_any_label(next) || is_section_break(next) || decision_of_line(next)) break;
            if (!text.empty()) text.push_back('\n');
            text += trim(next);
        }
        if (text.empty()) return std::nullopt;
        return text;
    }
    return std::nullopt;
}

}  // namespace

DecisionScan scan_decision(std::string_view raw) {
    const auto spans = line_spans(raw);
    for (std::size_t i = spans.size(); i-- > 0;) {
        auto line = raw.substr(spans[i].begin, spans[i].end - spans[i].begin);
        if (trim(line).empty()) continue;
        if (auto d = decision_of_line(line)) return {*d, i};
    }
    return {};
}

Decision parse_decision(std::string_view raw) { return scan_decision(raw).decision; }

std::pair<std::optional<std::string>, std::optional<std::string>> parse_summaries(std::string_view raw) {
    return {extract_summary(raw, 1), extract_summary(raw, 2)};
}

ModelOutput parse_model_output(std::string raw) {
    ModelOutput out;
    const auto scan = scan_decision(raw);
    out.decision = scan.decision;
    if (scan.line) {
        const auto spans = line_spans(raw);
        const auto& s = spans[*scan.line];
        out.explanation = raw.substr(0, s.begin) + raw.substr(s.next);
    } else {
        out.explanation = raw;
    }
    while (!out.explanation.empty() && std::isspace(static_cast<unsigned char>(out.explanation.back())))
        out.explanation.pop_back();
    auto [s1, s2] = parse_summaries(raw);
    out.summary_1 = std::move(s1);
    out.summary_2 = std::move(s2);
    out.raw_text = std::move(raw);
    return out;
}

}  // namespace rekey::llm
