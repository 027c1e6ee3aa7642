#include <random>

#include "doctest.h"
#include "rekey/textnorm.hpp"
#include "test_support.hpp"

using namespace rekey;
using namespace rekey::textnorm;

namespace {

std::vector<std::string> stems(std::string_view text, bool drop) {
    const auto toks = normalize(text, drop);
    return stems_of(toks);
}

using Words = std::vector<std::string>;

}  // namespace

TEST_CASE("porter stemmer agrees with the reference fixture table") {
    std::istringstream in(testing::read_text(testing::data_path("porter_fixtures.tsv")));
    std::string line;
    std::size_t checked = 0, mismatched = 0;
    while (std::getline(in, line)) {
        const auto tab = line.find('\t');
        REQUIRE(tab != std::string::npos);
        const auto word = line.substr(0, tab);
        const auto expected = line.substr(tab + 1);
        const auto got = porter_stem(word);
        if (got != expected) {
            ++mismatched;
            INFO(word << ": expected " << expected << ", got " << got);
            CHECK(got == expected);
        }
        ++checked;
    }
    CHECK(checked > 2000);
    CHECK(mismatched == 0);
}

TEST_CASE("porter stemmer pinned words") {
    const std::pair<const char*, const char*> cases[] = {
        {"collection", "collect"}, {"founded", "found"},     {"founder", "founder"}, {"siblings", "sibl"},
        {"capital", "capit"},      {"location", "locat"},    {"country", "countri"}, {"was", "wa"},
        {"children", "children"},  {"organization", "organ"}, {"company", "compani"}, {"business", "busi"},
        {"university", "univers"}, {"cofounder", "cofound"}, {"residence", "resid"}, {"employees", "employe"},
        {"relation", "relat"},     {"is", "is"},             {"a", "a"},             {"", ""},
    };
    for (auto [w, s] : cases) CHECK(porter_stem(w) == s);
}

TEST_CASE("stopword list is embedded") {
    CHECK(stopwords().size() == 179);
    CHECK(is_stopword("the"));
    CHECK(is_stopword("was"));
    CHECK(is_stopword("no"));
    CHECK_FALSE(is_stopword("founded"));
}

TEST_CASE("normalize") {
    CHECK(normalize("", true).empty());
    CHECK(stems("The Menil Collection was founded", true) == Words{"menil", "collect", "found"});
    CHECK(stems("Founded, FOUNDED", false) == Words{"found", "found"});
    SUBCASE("hyphenated words emit parts then the joined form") {
        const auto toks = normalize("co-founder", false);
        REQUIRE(toks.size() == 3);
        CHECK(toks[0].surface == "co");
        CHECK(toks[1].surface == "founder");
        CHECK(toks[2].surface == "cofounder");
        CHECK(toks[2].stem == "cofound");
    }
    SUBCASE("punctuation splits, case folds") {
        CHECK(stems("(Paris)--France's capital.", false) == Words{"pari", "franc", "s", "capit"});
    }
    SUBCASE("stopwords kept on request") {
        CHECK(stems("there is no relation here", false) == Words{"there", "is", "no", "relat", "here"});
        CHECK(stems("there is no relation here", true) == Words{"relat"});
    }
}

TEST_CASE("normalize_keyword") {
    CHECK(normalize_keyword("Co-Founder") == "cofound");
    CHECK(normalize_keyword("founded by") == "found");
    CHECK(normalize_keyword("place of birth") == "place birth");
    CHECK(normalize_keyword("the") == "");
    CHECK(normalize_keyword("no relation", false) == "no relat");
}

TEST_CASE("tokenize_label") {
    SUBCASE("colon labels") {
        const auto kw = tokenize_label(RelationLabel("per:schools_attended"));
        CHECK(kw.entity == Words{"person"});
        CHECK(kw.relation == Words{"school", "attend"});
    }
    SUBCASE("org expands to two entity stems") {
        const auto kw = tokenize_label(RelationLabel("org:founded_by"));
        CHECK(kw.entity == Words{"organ", "compani"});
        CHECK(kw.relation == Words{"found"});
    }
    SUBCASE("path labels use two type segments, stored as stems") {
        const auto kw = tokenize_label(RelationLabel("/location/country/capital"));
        CHECK(kw.entity == Words{"locat", "countri"});
        CHECK(kw.relation == Words{"capit"});
    }
    SUBCASE("people paths expand people to person") {
        const auto kw = tokenize_label(RelationLabel("/people/person/place_lived"));
        CHECK(kw.entity == Words{"person"});
        CHECK(kw.relation == Words{"place", "live"});
    }
    SUBCASE("no_relation") {
        const auto kw = tokenize_label(RelationLabel("no_relation"));
        CHECK(kw.entity.empty());
        CHECK(kw.relation == Words{"relat", "no relation"});
    }
    SUBCASE("no stopwords except the pinned phrase") {
        for (const char* l : {"per:city_of_birth", "org:number_of_employees/members", "/business/company/founders",
                              "/people/deceased_person/place_of_burial", "per:stateorprovince_of_birth"}) {
            const auto kw = tokenize_label(RelationLabel(l));
            for (const auto& list : {kw.entity, kw.relation})
                for (const auto& k : list) {
                    CHECK_FALSE(is_stopword(k));
                    CHECK(k == to_lower(k));
                }
            auto uniq = [](Words w) {
                std::sort(w.begin(), w.end());
                return std::adjacent_find(w.begin(), w.end()) == w.end();
            };
            CHECK(uniq(kw.entity));
            CHECK(uniq(kw.relation));
        }
    }
}

TEST_CASE("match_keyword") {
    const auto founded = normalize("was founded by", false);
    CHECK(match_keyword("found", founded));
    CHECK(match_keyword("no relation", normalize("there is no relation here", false)));
    CHECK(match_keyword("no relat", normalize("there is no relation here", false)));
    CHECK_FALSE(match_keyword("no relation", normalize("no obvious relation", false)));
    CHECK_FALSE(match_keyword("capit", {}));
    CHECK(match_keyword("cofound", normalize("a co-founder of", false)));
    CHECK(match_keyword("founder", normalize("a co-founder of", false)));
    CHECK_FALSE(match_keyword("", founded));
}

TEST_CASE("dedupe_keywords") {
    CHECK(dedupe_keywords(Words{}).empty());
    CHECK(dedupe_keywords(Words{"found", "founded", "founder"}) == Words{"found", "founder"});
    CHECK(dedupe_keywords(Words{"attend", "attend"}) == Words{"attend"});
}

TEST_CASE("properties over random text") {
    const Words vocab{"The",   "founder", "co-founder", "Capital", "capitals", "of", "no", "relation",
                      "sibling", "Siblings", "attended", "Harvard", "university", "was", "!", ",", "(", ")",
                      "CEO",   "born",    "in",         "Paris",   "x-ray",    "...", "\t", "rel-ation"};
    std::mt19937_64 gen(7);
    for (int trial = 0; trial < 300; ++trial) {
        std::string text;
        const auto n = gen() % 12;
        for (std::size_t i = 0; i < n; ++i) {
            text += vocab[gen() % vocab.size()];
            text += (gen() % 3 == 0) ? "" : " ";
        }
        // Re-normalizing the joined surfaces reproduces the stem sequence.
        const auto toks = normalize(text, false);
        std::string joined;
        for (const auto& t : toks) {
            if (t.surface.find_first_of("-") != std::string::npos) continue;
            joined += t.surface + " ";
        }
        std::vector<std::string> a, b;
        for (const auto& t : toks) a.push_back(t.stem);
        for (const auto& t : normalize(joined, false)) b.push_back(t.stem);
        CHECK(a == b);
        for (const auto& t : toks) {
            CHECK_FALSE(t.stem.empty());
            CHECK(t.stem == porter_stem(to_lower(t.surface)));
        }
        // Matching ignores case and surrounding punctuation.
        std::string upper = text;
        for (auto& c : upper) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
        const auto wrapped = "\"(" + text + ")!\"";
        for (const auto* kw : {"found", "capit", "no relat", "sibl", "attend", "cofound", "univers"}) {
            const bool base = match_keyword(kw, normalize(text, false));
            CHECK(match_keyword(kw, normalize(upper, false)) == base);
            CHECK(match_keyword(kw, normalize(wrapped, false)) == base);
        }
    }
}
