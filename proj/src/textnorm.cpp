#include "rekey/textnorm.hpp"

#include <algorithm>
#include <cctype>
#include <sstream>
#include <unordered_set>

namespace rekey::textnorm {
namespace {

#include "stopwords_data.inc"  // defines kStopwordText

bool is_word_byte(char c) {
    const auto u = static_cast<unsigned char>(c);
    return std::isalnum(u) != 0 || u >= 0x80;
}

const std::unordered_set<std::string>& stopword_set() {
    static const std::unordered_set<std::string> set(stopwords().begin(), stopwords().end());
    return set;
}

void push_token(std::vector<NormalizedToken>& out, std::string surface, bool drop_stopwords) {
    if (surface.empty()) return;
    if (drop_stopwords && is_stopword(surface)) return;
    std::string stem = porter_stem(surface);
    out.push_back({std::move(surface), std::move(stem)});
}

std::vector<std::string> split_on(std::string_view s, std::string_view delims) {
    std::vector<std::string> parts;
    std::string cur;
    for (char c : s) {
        if (delims.find(c) != std::string_view::npos) {
            if (!cur.empty()) parts.push_back(std::move(cur));
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    if (!cur.empty()) parts.push_back(std::move(cur));
    return parts;
}

void append_unique(std::vector<std::string>& v, std::string s) {
    if (s.empty()) return;
    if (std::find(v.begin(), v.end(), s) == v.end()) v.push_back(std::move(s));
}

// Stems each content word of a label segment such as "schools_attended".
void append_segment_stems(std::vector<std::string>& out, std::string_view segment) {
    for (const auto& tok : normalize(segment, /*drop_stopwords=*/true)) append_unique(out, tok.stem);
}

}  // namespace

const std::vector<std::string>& stopwords() {
    static const std::vector<std::string> words = [] {
        std::vector<std::string> w;
        std::istringstream in{std::string(kStopwordText)};
        std::string line;
        while (std::getline(in, line)) {
            auto t = trim(line);
            if (!t.empty() && t.front() != '#') w.push_back(to_lower(t));
        }
        return w;
    }();
    return words;
}

bool is_stopword(std::string_view lowercase_word) {
    return stopword_set().contains(std::string(lowercase_word));
}

std::vector<NormalizedToken> normalize(std::string_view text, bool drop_stopwords) {
    std::vector<NormalizedToken> out;
    std::size_t i = 0;
    const std::size_t n = text.size();
    while (i < n) {
        if (!is_word_byte(text[i])) {
            ++i;
            continue;
        }
        // A compound is word runs joined by single hyphens.
        std::vector<std::string> parts;
        while (true) {
            std::size_t start = i;
            while (i < n && is_word_byte(text[i])) ++i;
            parts.push_back(to_lower(text.substr(start, i - start)));
            if (i + 1 < n && text[i] == '-' && is_word_byte(text[i + 1])) {
                ++i;
                continue;
            }
            break;
        }
        for (auto& p : parts) push_token(out, p, drop_stopwords);
        if (parts.size() > 1) {
            std::string joined;
            for (const auto& p : parts) joined += p;
            push_token(out, std::move(joined), drop_stopwords);
        }
    }
    return out;
}

std::vector<std::string> stems_of(std::span<const NormalizedToken> tokens) {
    std::vector<std::string> out;
    out.reserve(tokens.size());
    for (const auto& t : tokens) out.push_back(t.stem);
    return out;
}

std::string normalize_keyword(std::string_view phrase, bool drop_stopwords) {
    std::string out;
    for (const auto& word : split_on(phrase, " \t\r\n")) {
        // Collapse hyphens so "co-founder" and "cofounder" share one key.
        std::string collapsed;
        for (char c : word)
            if (c != '-') collapsed.push_back(c);
        for (const auto& tok : normalize(collapsed, drop_stopwords)) {
            if (!out.empty()) out.push_back(' ');
            out += tok.stem;
        }
    }
    return out;
}

const std::vector<EntityExpansion>& entity_expansion_table() {
    static const std::vector<EntityExpansion> table{
        {"per", {"person"}},
        {"org", {"organization", "company"}},
        {"loc", {"location"}},
        {"location", {"location"}},
        {"people", {"person"}},
        {"business", {"business"}},
        {"film", {"film"}},
    };
    return table;
}

const std::vector<std::string>& entity_expansion_stems() {
    static const std::vector<std::string> stems = [] {
        std::vector<std::string> s;
        for (const auto& e : entity_expansion_table())
            for (auto w : e.expands_to) append_unique(s, porter_stem(w));
        return s;
    }();
    return stems;
}

LabelKeywords tokenize_label(const RelationLabel& label) {
    LabelKeywords kw;
    const std::string raw = to_lower(label.str());
    if (label.is_no_relation()) {
        kw.relation = {porter_stem("relation"), std::string(kNoRelationPhrase)};
        return kw;
    }

    // "per:schools_attended" has one type segment before the colon;
    // "/location/country/capital" has domain and type as the first two path
    // segments. Anything else is all relation.
    std::vector<std::string> type_segments;
    std::vector<std::string> relation_segments;
    if (auto colon = raw.find(':'); colon != std::string::npos) {
        type_segments = split_on(std::string_view(raw).substr(0, colon), "/");
        relation_segments = split_on(std::string_view(raw).substr(colon + 1), ":/");
    } else if (!raw.empty() && raw.front() == '/') {
        auto segs = split_on(raw, "/");
        const std::size_t n_type = std::min<std::size_t>(2, segs.size() > 1 ? segs.size() - 1 : 0);
        type_segments.assign(segs.begin(), segs.begin() + static_cast<std::ptrdiff_t>(n_type));
        relation_segments.assign(segs.begin() + static_cast<std::ptrdiff_t>(n_type), segs.end());
    } else {
        relation_segments = split_on(raw, ":/");
    }

    for (const auto& seg : type_segments) {
        const auto& table = entity_expansion_table();
        auto it = std::find_if(table.begin(), table.end(), [&](const auto& e) { return e.type == seg; });
        if (it != table.end()) {
            for (auto w : it->expands_to) append_unique(kw.entity, porter_stem(w));
        } else {
            append_segment_stems(kw.entity, seg);
        }
    }
    for (const auto& seg : relation_segments) append_segment_stems(kw.relation, seg);
    return kw;
}

bool match_keyword(std::string_view keyword, std::span<const NormalizedToken> tokens) {
    const auto words = split_on(keyword, " ");
    if (words.empty() || words.size() > tokens.size()) return false;
    auto word_matches = [](const std::string& w, const NormalizedToken& t) {
        return w == t.stem || w == t.surface;
    };
    for (std::size_t start = 0; start + words.size() <= tokens.size(); ++start) {
        bool all = true;
        for (std::size_t k = 0; k < words.size() && all; ++k) all = word_matches(words[k], tokens[start + k]);
        if (all) return true;
    }
    return false;
}

std::vector<std::string> dedupe_keywords(std::span<const std::string> keywords) {
    std::vector<std::string> out;
    std::unordered_set<std::string> seen;
    for (const auto& k : keywords) {
        auto key = normalize_keyword(k);
        if (key.empty()) key = to_lower(trim(k));
        if (seen.insert(key).second) out.push_back(k);
    }
    return out;
}

}  // namespace rekey::textnorm
