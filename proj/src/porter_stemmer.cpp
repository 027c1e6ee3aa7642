// Porter suffix-stripping stemmer, original 1980 rule set.

#include <array>
#include <string>
#include <string_view>

#include "rekey/textnorm.hpp"

namespace rekey::textnorm {
namespace {

struct Rule {
    std::string_view suffix;
    std::string_view replacement;
};

class Stemmer {
public:
    explicit Stemmer(std::string_view w) : b_(w) {}

    std::string run() {
        step1a();
        step1b();
        step1c();
        step2();
        step3();
        step4();
        step5a();
        step5b();
        return std::move(b_);
    }

private:
    std::string b_;

    bool consonant(std::size_t i) const {
        switch (b_[i]) {
            case 'a': case 'e': case 'i': case 'o': case 'u': return false;
            case 'y': return i == 0 ? true : !consonant(i - 1);
            default: return true;
        }
    }

    // Number of VC sequences in b_[0, len).
    int measure(std::size_t len) const {
        int m = 0;
        std::size_t i = 0;
        while (i < len && consonant(i)) ++i;
        while (i < len) {
            while (i < len && !consonant(i)) ++i;
            if (i >= len) break;
            while (i < len && consonant(i)) ++i;
            ++m;
        }
        return m;
    }

    bool has_vowel(std::size_t len) const {
        for (std::size_t i = 0; i < len; ++i)
            if (!consonant(i)) return true;
        return false;
    }

    bool ends_double_consonant(std::size_t len) const {
        return len >= 2 && b_[len - 1] == b_[len - 2] && consonant(len - 1);
    }

    // cvc where the final c is not w, x or y.
    bool ends_cvc(std::size_t len) const {
        if (len < 3) return false;
        if (!consonant(len - 1) || consonant(len - 2) || !consonant(len - 3)) return false;
        const char c = b_[len - 1];
        return c != 'w' && c != 'x' && c != 'y';
    }

    bool ends(std::string_view s) const { return b_.size() >= s.size() && std::string_view(b_).ends_with(s); }

    std::size_t stem_len(std::string_view suffix) const { return b_.size() - suffix.size(); }

    void replace_suffix(std::string_view suffix, std::string_view with) {
        b_.resize(stem_len(suffix));
        b_.append(with);
    }

    void step1a() {
        if (ends("sses")) replace_suffix("sses", "ss");
        else if (ends("ies")) replace_suffix("ies", "i");
        else if (ends("ss")) return;
        else if (ends("s")) b_.pop_back();
    }

    void step1b() {
        if (ends("eed")) {
            if (measure(stem_len("eed")) > 0) b_.pop_back();
            return;
        }
        std::string_view cut;
        if (ends("ed") && has_vowel(stem_len("ed"))) cut = "ed";
        else if (ends("ing") && has_vowel(stem_len("ing"))) cut = "ing";
        else return;

        b_.resize(stem_len(cut));
        if (ends("at") || ends("bl") || ends("iz")) {
            b_.push_back('e');
        } else if (ends_double_consonant(b_.size())) {
            const char c = b_.back();
            if (c != 'l' && c != 's' && c != 'z') b_.pop_back();
        } else if (measure(b_.size()) == 1 && ends_cvc(b_.size())) {
            b_.push_back('e');
        }
    }

    void step1c() {
        if (ends("y") && has_vowel(b_.size() - 1)) b_.back() = 'i';
    }

    void step2() {
        static constexpr std::array<Rule, 20> rules{{
            {"ational", "ate"}, {"tional", "tion"}, {"enci", "ence"},   {"anci", "ance"},
            {"izer", "ize"},    {"abli", "able"},   {"alli", "al"},     {"entli", "ent"},
            {"eli", "e"},       {"ousli", "ous"},   {"ization", "ize"}, {"ation", "ate"},
            {"ator", "ate"},    {"alism", "al"},    {"iveness", "ive"}, {"fulness", "ful"},
            {"ousness", "ous"}, {"aliti", "al"},    {"iviti", "ive"},   {"biliti", "ble"},
        }};
        apply_longest(rules, 0);
    }

    void step3() {
        static constexpr std::array<Rule, 7> rules{{
            {"icate", "ic"}, {"ative", ""}, {"alize", "al"}, {"iciti", "ic"},
            {"ical", "ic"},  {"ful", ""},   {"ness", ""},
        }};
        apply_longest(rules, 0);
    }

    void step4() {
        static constexpr std::array<std::string_view, 19> suffixes{
            "al",  "ance", "ence", "er",  "ic",  "able", "ible", "ant", "ement", "ment",
            "ent", "ion",  "ou",   "ism", "ate", "iti",  "ous",  "ive", "ize"};
        std::string_view best;
        for (auto s : suffixes)
            if (ends(s) && s.size() > best.size()) best = s;
        if (best.empty()) return;
        const auto len = stem_len(best);
        if (measure(len) <= 1) return;
        if (best == "ion" && !(len > 0 && (b_[len - 1] == 's' || b_[len - 1] == 't'))) return;
        b_.resize(len);
    }

    void step5a() {
        if (!ends("e")) return;
        const auto len = b_.size() - 1;
        const int m = measure(len);
        if (m > 1 || (m == 1 && !ends_cvc(len))) b_.pop_back();
    }

    void step5b() {
        if (ends("ll") && measure(b_.size() - 1) > 1) b_.pop_back();
    }

    // Longest matching suffix wins; if its condition fails no other rule fires.
    template <std::size_t N>
    void apply_longest(const std::array<Rule, N>& rules, int min_measure) {
        const Rule* best = nullptr;
        for (const auto& r : rules)
            if (ends(r.suffix) && (!best || r.suffix.size() > best->suffix.size())) best = &r;
        if (best && measure(stem_len(best->suffix)) > min_measure) replace_suffix(best->suffix, best->replacement);
    }
};

}  // namespace

std::string porter_stem(std::string_view word) {
    if (word.size() <= 2) return std::string(word);
    return Stemmer(word).run();
}

}  // namespace rekey::textnorm
