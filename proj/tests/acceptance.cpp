// Acceptance checks: one PASS/FAIL line per criterion, each against an oracle
// that does not reuse the code under test. Exit status is nonzero if any fails.

#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <iostream>
#include <numeric>
#include <random>
#include <regex>
#include <set>

#include "rekey/cli.hpp"
#include "rekey/dictionary.hpp"
#include "rekey/eval.hpp"
#include "rekey/llm.hpp"
#include "rekey/reward.hpp"
#include "rekey/sampler.hpp"
#include "rekey/textnorm.hpp"
#include "test_support.hpp"

using namespace rekey;
using nlohmann::json;

namespace {

struct Outcome {
    bool pass;
    std::string detail;
};

int failures = 0;

void report(int id, const std::string& name, const std::function<Outcome()>& check) {
    Outcome o;
    try {
        o = check();
    } catch (const std::exception& e) {
        o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.pass) ++failures;
    std::cout << (o.pass ? "PASS" : "FAIL") << "  [" << id << "] " << name << ": " << o.detail << std::endl;
}

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.3g", v);
    return buf;
}

// ---------------------------------------------------------------------------
// Shared dictionary for the reward criteria. Keywords are stored as stems.

dictionary::DictionaryEntry entry(std::string label, std::vector<std::string> entity, std::vector<std::string> relation) {
    return {RelationLabel(label), std::move(entity), std::move(relation), {}};
}

dictionary::KeywordDictionary fixture_dictionary() {
    dictionary::KeywordDictionary d;
    for (auto e : {entry("per:siblings", {"person"}, {"sibl", "brother", "sister"}),
                   entry("org:founded_by", {"organ", "compani"}, {"found", "cofound", "founder", "establish"}),
                   entry("per:city_of_birth", {"person"}, {"citi", "birth", "born"}),
                   entry("/location/country/capital", {"locat", "countri"}, {"capit"}),
                   entry("no_relation", {}, {"relat", "no relation", "independ"}),
                   entry("per:employee_of", {"person"}, {"employe", "work"})})
        d.entries.emplace(e.label, e);
    return d;
}

// Independent scoring oracle: lowercase alphanumeric runs, stemmed with the
// reference-validated stemmer; a keyword matches when its words line up with
// consecutive tokens by surface or stem. Vocabularies fed to it avoid hyphens.
struct OracleCounts {
    int entity = 0, relation = 0;
};

std::vector<std::pair<std::string, std::string>> oracle_tokens(const std::string& text) {
    std::vector<std::pair<std::string, std::string>> toks;
    static const std::regex word("[A-Za-z0-9]+");
    for (auto it = std::sregex_iterator(text.begin(), text.end(), word); it != std::sregex_iterator(); ++it) {
        std::string w = it->str();
        for (auto& c : w) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
        toks.emplace_back(w, textnorm::porter_stem(w));
    }
    return toks;
}

bool oracle_match(const std::string& keyword, const std::vector<std::pair<std::string, std::string>>& toks) {
    std::vector<std::string> parts;
    std::istringstream ss(keyword);
    for (std::string p; ss >> p;) parts.push_back(p);
    if (parts.empty() || parts.size() > toks.size()) return false;
    for (std::size_t i = 0; i + parts.size() <= toks.size(); ++i) {
        bool all = true;
        for (std::size_t k = 0; k < parts.size() && all; ++k)
            all = parts[k] == toks[i + k].first || parts[k] == toks[i + k].second;
        if (all) return true;
    }
    return false;
}

OracleCounts oracle_counts(const std::string& text, const dictionary::DictionaryEntry* e) {
    OracleCounts c;
    if (!e) return c;
    const auto toks = oracle_tokens(text);
    for (const auto& k : e->entity_keywords) c.entity += oracle_match(k, toks);
    for (const auto& k : e->relation_keywords) c.relation += oracle_match(k, toks);
    if (e->label.is_no_relation()) c.entity = c.relation;
    return c;
}

std::size_t oracle_words(const std::string& text) {
    std::istringstream ss(text);
    std::size_t n = 0;
    for (std::string w; ss >> w;) ++n;
    return n;
}

double oracle_score(int he, int hr, std::size_t words) {
    if (words == 0) return 0.0;
    return (0.4 * he + 1.0 * hr) / (static_cast<double>(words) / 5.0);
}

// Written out from the reward table rather than read from the config.
double oracle_accuracy(Decision d, Answer g) {
    if (d == Decision::Unparseable) return 0.0;
    if (d == Decision::Yes) return g == Answer::Yes ? 3.0 : -3.0;
    return g == Answer::Yes ? -1.0 : 1.0;
}

// ---------------------------------------------------------------------------

Outcome criterion_accuracy() {
    const reward::RewardConfig cfg;
    std::set<double> seen;
    int cases = 0, wrong = 0;
    for (auto d : {Decision::Yes, Decision::No, Decision::Unparseable})
        for (auto g : {Answer::Yes, Answer::No}) {
            const double got = reward::accuracy_reward(d, g, cfg);
            seen.insert(got);
            ++cases;
            if (got != oracle_accuracy(d, g)) ++wrong;
        }
    const bool range_ok = seen == std::set<double>{3.0, 1.0, -3.0, -1.0, 0.0};
    return {wrong == 0 && range_ok, std::to_string(cases) + " (decision, gold) pairs, " + std::to_string(wrong) +
                                        " mismatches, range " + (range_ok ? "exact" : "wrong")};
}

struct HitFixture {
    std::string text;
    const char* r1;
    const char* r2;
    int he1, hr1, he2, hr2;  // hand counts
    std::size_t words;
};

Outcome criterion_hit_fixtures() {
    const auto dict = fixture_dictionary();
    const std::string twenty = "brother x x x x x x x x x x x x x x x x x x x";
    const std::vector<HitFixture> fixtures{
        {"The company was founded by its founder.", "org:founded_by", "org:founded_by", 1, 2, 1, 2, 7},
        {"A person and a sibling.", "per:siblings", "org:founded_by", 1, 1, 0, 0, 5},
        {"", "per:siblings", "per:siblings", 0, 0, 0, 0, 0},
        {"  \t\n ", "per:siblings", "org:founded_by", 0, 0, 0, 0, 0},
        {"There is no relation here; they are independent.", "no_relation", "no_relation", 3, 3, 3, 3, 8},
        {"Oslo is the capital city of the country Norway.", "/location/country/capital", "per:city_of_birth", 1, 1, 0, 1, 9},
        {"He works for the company as one of its employees.", "per:employee_of", "org:founded_by", 0, 2, 1, 0, 10},
        {"brother brother brother brother brother", "per:siblings", "per:siblings", 0, 1, 0, 1, 5},
        {"BROTHER, Sister!", "per:siblings", "per:siblings", 0, 2, 0, 2, 2},
        {twenty, "per:siblings", "per:siblings", 0, 1, 0, 1, 20},
        {"co-founder", "org:founded_by", "org:founded_by", 0, 2, 0, 2, 1},
        {"The organization was established by a person.", "org:founded_by", "per:siblings", 1, 1, 1, 0, 7},
        {"The two have no relation.", "no_relation", "per:siblings", 2, 2, 0, 0, 5},
        {"They are siblings.", "no_relation", "per:siblings", 0, 0, 0, 1, 3},
        {"no obvious relation", "no_relation", "no_relation", 1, 1, 1, 1, 3},
        {"A brother.", "per:siblings", "per:title", 0, 1, 0, 0, 2},
        {"Born in the city of her birth.", "per:city_of_birth", "per:city_of_birth", 0, 3, 0, 3, 7},
        {"Capital, capitals and CAPITAL.", "/location/country/capital", "/location/country/capital", 0, 1, 0, 1, 4},
        {"The location-country pair.", "/location/country/capital", "/location/country/capital", 2, 0, 2, 0, 3},
        {"Sister and brother work together at the company.", "per:siblings", "per:employee_of", 0, 2, 0, 1, 8},
    };
    const reward::RewardConfig cfg;
    double max_err = 0;
    int count_mismatches = 0;
    testing::LogCapture quiet;  // per:title is absent on purpose
    for (const auto& f : fixtures) {
        const RelationLabel r1(f.r1), r2(f.r2);
        const auto b = reward::hit_at_dict_reward(f.text, r1, r2, dict, cfg);
        const double expected = (oracle_score(f.he1, f.hr1, f.words) + oracle_score(f.he2, f.hr2, f.words)) / 2.0;
        max_err = std::max(max_err, std::abs(b.hit_reward - expected));
        if (b.word_count != f.words || b.counts_1.entity_hits != f.he1 || b.counts_1.relation_hits != f.hr1 ||
            b.counts_2.entity_hits != f.he2 || b.counts_2.relation_hits != f.hr2) {
            ++count_mismatches;
            std::cerr << "  hit fixture \"" << f.text << "\": got (" << b.counts_1.entity_hits << ","
                      << b.counts_1.relation_hits << ")/(" << b.counts_2.entity_hits << "," << b.counts_2.relation_hits
                      << ") over " << b.word_count << " words\n";
        }
    }
    const bool pass = max_err <= 1e-9 && count_mismatches == 0;
    return {pass, std::to_string(fixtures.size()) + " fixtures, max |error| " + fmt(max_err) + " (tol 1e-9), " +
                      std::to_string(count_mismatches) + " hit-count mismatches"};
}

Outcome criterion_combined() {
    const auto dict = fixture_dictionary();
    const reward::RewardConfig cfg;
    const std::vector<std::string> vocab{"The",   "company",  "founded",  "founder", "brother", "Sister",  "siblings",
                                         "city",  "born",     "birth",    "capital", "country", "location", "works",
                                         "employees", "no",   "relation", "independent", "person", "organization",
                                         "is",    "of",       "and",      "x",       "established", "Paris,", "(CEO)"};
    std::vector<RelationLabel> labels;
    for (const auto& [l, _] : dict.entries) labels.push_back(l);
    std::mt19937_64 gen(2024);
    double max_err = 0, max_swap = 0;
    for (int trial = 0; trial < 100; ++trial) {
        std::string body;
        // Two or more words, so the body itself never reads as a bare decision line.
        const auto n = 2 + gen() % 14;
        for (std::size_t i = 0; i < n; ++i) body += vocab[gen() % vocab.size()] + " ";
        const Decision decisions[] = {Decision::Yes, Decision::No};
        const bool parseable = gen() % 5 != 0;
        const Decision d = decisions[gen() % 2];
        const std::string raw = body + (parseable ? (d == Decision::Yes ? "\nYes" : "\nNo") : "");
        const auto r1 = labels[gen() % labels.size()];
        const auto r2 = gen() % 3 == 0 ? r1 : labels[gen() % labels.size()];
        auto ep = testing::episode("t" + std::to_string(trial), r1.str(), r2.str());
        const auto output = llm::parse_model_output(raw);
        const auto b = reward::combined_reward(output, ep, dict, cfg);

        const auto words = oracle_words(output.explanation);
        const auto c1 = oracle_counts(output.explanation, dict.find(r1));
        const auto c2 = oracle_counts(output.explanation, dict.find(r2));
        const double s1 = oracle_score(c1.entity, c1.relation, words);
        const double s2 = oracle_score(c2.entity, c2.relation, words);
        const double acc = oracle_accuracy(parseable ? d : Decision::Unparseable, effective_answer(ep));
        max_err = std::max(max_err, std::abs(b.total - (acc + (s1 + s2) / 2.0)));

        const auto swapped = reward::hit_at_dict_reward(output.explanation, r2, r1, dict, cfg);
        max_swap = std::max(max_swap, std::abs(swapped.hit_reward - b.hit_reward));
    }
    // Two-label example: 20 words, capital side 2 entity hits, siblings side 2 relation hits.
    const std::string example = "location country brother sister x x x x x x x x x x x x x x x x";
    const auto ex = reward::hit_at_dict_reward(example, RelationLabel("/location/country/capital"),
                                               RelationLabel("per:siblings"), dict, cfg);
    const bool example_ok = std::abs(ex.s1 - 0.2) <= 1e-12 && std::abs(ex.s2 - 0.5) <= 1e-12 &&
                            std::abs(ex.hit_reward - 0.35) <= 1e-12;
    const bool pass = max_err <= 1e-12 && max_swap == 0.0 && example_ok;
    return {pass, "100 fixtures, max |total - (acc + (S1+S2)/2)| " + fmt(max_err) + " (tol 1e-12), swap delta " +
                      fmt(max_swap) + ", S1=0.2/S2=0.5 example gives " + fmt(ex.hit_reward)};
}

Outcome criterion_advantages() {
    const reward::RewardConfig cfg;
    std::mt19937_64 gen(77);
    std::uniform_real_distribution<double> val(-10.0, 10.0);
    double max_err = 0, max_mean = 0;
    int constant_groups = 0, constant_bad = 0;
    for (int trial = 0; trial < 1000; ++trial) {
        const std::size_t n = 1 + gen() % 16;
        std::vector<double> r(n);
        const bool constant = trial % 10 == 0;
        const double c = std::round(val(gen) * 4) / 4;
        for (auto& x : r) x = constant ? c : std::round(val(gen) * 4) / 4;  // quarter steps make ties common
        // Brute force in long double: two-pass mean and population variance.
        long double mean = 0;
        for (double x : r) mean += x;
        mean /= static_cast<long double>(n);
        long double var = 0;
        for (double x : r) var += (x - mean) * (x - mean);
        var /= static_cast<long double>(n);
        const long double sd = std::sqrt(var);

        const auto a = reward::group_advantages(r, cfg);
        long double out_mean = 0;
        for (std::size_t i = 0; i < n; ++i) {
            const long double expected = sd < 1e-8L ? 0.0L : (r[i] - mean) / sd;
            max_err = std::max(max_err, static_cast<double>(std::abs(a[i] - expected)));
            out_mean += a[i];
        }
        max_mean = std::max(max_mean, static_cast<double>(std::abs(out_mean / static_cast<long double>(n))));
        if (sd < 1e-8L) {
            ++constant_groups;
            for (double x : a) constant_bad += x != 0.0;
        }
    }
    const bool pass = max_err <= 1e-9 && max_mean <= 1e-9 && constant_bad == 0 && constant_groups >= 100;
    return {pass, "1000 groups, max |error| " + fmt(max_err) + " (tol 1e-9), max |mean| " + fmt(max_mean) + ", " +
                      std::to_string(constant_groups) + " zero-variance groups all zero: " +
                      (constant_bad == 0 ? "yes" : "no")};
}

int run_binary(const std::string& args, const std::filesystem::path& log) {
    const std::string cmd = std::string("\"") + REKEY_BIN + "\" " + args + " >\"" + log.string() + "\" 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

Outcome criterion_dictionary(const testing::TempDir& dir) {
    const auto corpus = testing::data_path("corpus30.jsonl").string();
    const auto mock = testing::data_path("mock_llm.json").string();
    std::vector<std::string> outputs;
    for (int i = 0; i < 3; ++i) {
        const auto out = dir / ("dict" + std::to_string(i) + ".json");
        const int code = run_binary("build-dict --train \"" + corpus + "\" --endpoint \"replay:" + mock +
                                        "\" --model vanilla --extractor-model extractor --built-at 2025-01-01T00:00:00Z"
                                        " --seed 7 --backoff-ms 1 --max-in-flight " + std::to_string(1 + 3 * i) +
                                        " --output \"" + out.string() + "\"",
                                    dir / "build.log");
        if (code != 0) return {false, "build-dict run " + std::to_string(i + 1) + " exited " + std::to_string(code)};
        outputs.push_back(testing::read_text(out));
    }
    const auto golden = testing::read_text(testing::data_path("corpus30_dictionary.golden.json"));
    const bool identical = outputs[0] == outputs[1] && outputs[1] == outputs[2];
    const bool matches_golden = outputs[0] == golden;

    // Expectations stated by hand from the canned extractor replies.
    const auto d = dictionary::parse_dictionary(outputs[0]);
    using W = std::vector<std::string>;
    auto rel = [&](const char* l) { return d.find(RelationLabel(l)) ? d.find(RelationLabel(l))->relation_keywords : W{"<missing>"}; };
    auto ent = [&](const char* l) { return d.find(RelationLabel(l)) ? d.find(RelationLabel(l))->entity_keywords : W{"<missing>"}; };
    const bool content_ok = d.entries.size() == 6 && rel("per:siblings") == W{"sibl", "brother", "sister"} &&
                            ent("per:siblings") == W{"person"} &&
                            rel("org:founded_by") == W{"found", "cofound", "establish", "founder"} &&
                            ent("org:founded_by") == W{"organ", "compani"} &&
                            rel("per:city_of_birth") == W{"citi", "birth", "born", "birthplac"} &&
                            rel("/location/country/capital") == W{"capit"} &&
                            ent("/location/country/capital") == W{"locat", "countri"} &&
                            rel("per:employee_of") == W{"employe"} && rel("no_relation") == W{"relat", "no relation"} &&
                            d.meta.degraded_labels == W{"/location/country/capital"} && d.meta.K == 5 &&
                            d.meta.seed == 7 && dictionary::to_canonical_string(d) == outputs[0];
    return {identical && matches_golden && content_ok,
            std::string("3 runs byte-identical: ") + (identical ? "yes" : "no") +
                ", equal to golden: " + (matches_golden ? "yes" : "no") +
                ", content as expected: " + (content_ok ? "yes" : "no")};
}

// Independent largest-remainder: floor shares, then the largest remainders
// (compared by cross-multiplication) take one more, earlier index on ties.
std::vector<std::size_t> oracle_apportion(const std::vector<std::size_t>& w, std::size_t total) {
    const std::size_t sum = std::accumulate(w.begin(), w.end(), std::size_t{0});
    std::vector<std::size_t> out(w.size(), 0);
    if (sum == 0) return out;
    std::vector<std::pair<std::size_t, std::size_t>> rem;  // (remainder numerator, index)
    std::size_t given = 0;
    for (std::size_t i = 0; i < w.size(); ++i) {
        out[i] = w[i] * total / sum;
        given += out[i];
        rem.emplace_back(w[i] * total % sum, i);
    }
    std::sort(rem.begin(), rem.end(), [](auto a, auto b) { return a.first != b.first ? a.first > b.first : a.second < b.second; });
    for (std::size_t k = 0; given < total; ++k, ++given) ++out[rem[k].second];
    return out;
}

Outcome criterion_sampler() {
    // 100,000 episodes: 12,500 positives over 25 labels with skewed sizes,
    // 70,000 no_relation negatives and 17,500 cross negatives.
    std::vector<std::string> labels;
    for (int i = 0; i < 25; ++i) labels.push_back("rel:" + std::string(1, static_cast<char>('a' + i)));
    std::vector<std::size_t> pos_sizes(25);
    for (int i = 0; i < 25; ++i) pos_sizes[i] = 100 + 32 * static_cast<std::size_t>(i);  // 100..868, sums to 12,100
    pos_sizes[24] += 400;                                                                // 12,500
    std::vector<Episode> corpus;
    corpus.reserve(100000);
    std::size_t next = 0;
    auto add = [&](std::string_view r1, std::string_view r2) {
        Episode e;
        e.id = "s" + std::to_string(next++);
        e.support = testing::sentence("a b", "a", "b", r1);
        e.test = testing::sentence("c d", "c", "d", r2);
        corpus.push_back(std::move(e));
    };
    for (int i = 0; i < 25; ++i)
        for (std::size_t k = 0; k < pos_sizes[i]; ++k) add(labels[i], labels[i]);
    for (std::size_t k = 0; k < 70000; ++k) add(labels[(k * k + 3 * k) % 25], "no_relation");
    for (std::size_t k = 0; k < 17500; ++k) add(labels[k % 7], labels[7 + k % 18]);

    const auto stats = sampler::corpus_stats(corpus);
    if (stats.total != 100000 || stats.ratio.positive != 1 || stats.ratio.negative != 7)
        return {false, "synthetic corpus is not 1:7"};

    const std::size_t K = 300;
    const auto split = sampler::split_corpus(corpus);
    const auto cfg = sampler::proportional_config(split, K, 2025);
    const auto sampled = sampler::sample_training_set(split, cfg);

    std::map<std::string, std::size_t> pos, nr, cross;
    std::size_t n_pos = 0, n_neg = 0;
    std::set<std::string> seen;
    bool duplicates = false;
    for (const auto& e : sampled) {
        duplicates |= !seen.insert(e.id).second;
        switch (sampler::categorize(e)) {
            case sampler::PairCategory::positive: ++pos[e.support.relation.str()]; ++n_pos; break;
            case sampler::PairCategory::neg_no_relation: ++nr[e.support.relation.str()]; ++n_neg; break;
            case sampler::PairCategory::neg_cross: ++cross[e.support.relation.str()]; ++n_neg; break;
        }
    }
    // Caps: every label keeps exactly min(K, available) positives.
    std::size_t cap_violations = 0, kept = 0;
    for (int i = 0; i < 25; ++i) {
        const auto want = std::min(K, pos_sizes[i]);
        kept += want;
        if (pos[labels[i]] > K || pos[labels[i]] != want) ++cap_violations;
    }
    // Strata: counts per label within one of the apportionment target.
    auto stratum_dev = [&](const std::vector<Episode>& pool, const std::map<std::string, std::size_t>& got,
                           std::size_t total) {
        std::map<std::string, std::size_t> avail;
        for (const auto& e : pool) ++avail[e.support.relation.str()];
        std::vector<std::size_t> w;
        for (const auto& [_, n] : avail) w.push_back(n);
        const auto target = oracle_apportion(w, total);
        std::size_t worst = 0, i = 0;
        for (const auto& [l, _] : avail) {
            const auto it = got.find(l);
            const std::size_t g = it == got.end() ? 0 : it->second;
            worst = std::max(worst, g > target[i] ? g - target[i] : target[i] - g);
            ++i;
        }
        return worst;
    };
    const auto dev_nr = stratum_dev(split.neg_no_relation, nr, *cfg.no_relation_total);
    const auto dev_cross = stratum_dev(split.neg_cross, cross, cfg.cross_sample_count);

    const double ratio = static_cast<double>(n_pos) / static_cast<double>(n_neg);
    const double rel_err = std::abs(ratio - 1.0 / 7.0) / (1.0 / 7.0);
    const bool pass = rel_err <= 0.05 && dev_nr <= 1 && dev_cross <= 1 && cap_violations == 0 && !duplicates &&
                      n_pos == kept;
    return {pass, "sampled " + std::to_string(sampled.size()) + " (" + std::to_string(n_pos) + " pos, " +
                      std::to_string(n_neg) + " neg), ratio off 1:7 by " + fmt(rel_err * 100) +
                      "% (tol 5%), max stratum deviation " + std::to_string(std::max(dev_nr, dev_cross)) +
                      " (tol 1), cap violations " + std::to_string(cap_violations)};
}

Outcome criterion_metrics() {
    struct Fixture {
        int tp, fp, fn, tn, unp_yes, unp_no;
        double p, r, f1;  // hand computed
    };
    const Fixture fixtures[] = {
        {2, 1, 1, 0, 0, 0, 0.6667, 0.6667, 0.6667}, {3, 0, 0, 5, 0, 0, 1.0, 1.0, 1.0},
        {0, 0, 4, 4, 0, 0, 0.0, 0.0, 0.0},          {0, 0, 0, 0, 0, 0, 0.0, 0.0, 0.0},
        {5, 5, 0, 0, 0, 0, 0.5, 1.0, 0.6667},       {1, 0, 9, 0, 0, 0, 1.0, 0.1, 0.1818},
        {0, 3, 2, 1, 0, 0, 0.0, 0.0, 0.0},          {4, 1, 2, 3, 2, 0, 0.8, 0.5, 0.6154},
        {0, 0, 0, 7, 0, 3, 0.0, 0.0, 0.0},          {7, 3, 3, 7, 0, 0, 0.7, 0.7, 0.7},
    };
    double max_err = 0;
    int count_errors = 0;
    for (const auto& f : fixtures) {
        std::vector<eval::Prediction> v;
        int k = 0;
        auto add = [&](int n, bool gold_yes, Decision d) {
            for (int i = 0; i < n; ++i) {
                ModelOutput o;
                o.decision = d;
                v.emplace_back(testing::episode("m" + std::to_string(k++), "per:title", "per:title",
                                                gold_yes ? GoldAnswer::Yes : GoldAnswer::No),
                               o);
            }
        };
        add(f.tp, true, Decision::Yes);
        add(f.fp, false, Decision::Yes);
        add(f.fn, true, Decision::No);
        add(f.tn, false, Decision::No);
        add(f.unp_yes, true, Decision::Unparseable);
        add(f.unp_no, false, Decision::Unparseable);
        const auto m = eval::score_predictions(v);
        max_err = std::max({max_err, std::abs(m.precision - f.p), std::abs(m.recall - f.r), std::abs(m.f1 - f.f1)});
        const auto cat = [&](ConfusionCategory c) { return static_cast<int>(m.per_category.at(c)); };
        if (static_cast<int>(m.tp) != f.tp || static_cast<int>(m.fp) != f.fp ||
            static_cast<int>(m.fn) != f.fn + f.unp_yes || static_cast<int>(m.tn) != f.tn + f.unp_no ||
            static_cast<int>(m.unparseable) != f.unp_yes + f.unp_no || cat(ConfusionCategory::yes_yes) != f.tp ||
            cat(ConfusionCategory::no_yes) != f.fp || cat(ConfusionCategory::yes_no) != f.fn ||
            cat(ConfusionCategory::no_no) != f.tn || cat(ConfusionCategory::unparseable) != f.unp_yes + f.unp_no)
            ++count_errors;
    }
    return {max_err <= 1e-4 && count_errors == 0,
            "10 fixtures, max |error| " + fmt(max_err) + " (tol 1e-4), category count mismatches " +
                std::to_string(count_errors)};
}

Outcome criterion_kappa() {
    struct Fixture {
        std::vector<int> a, b;
        double kappa;  // hand computed
    };
    const Fixture fixtures[] = {
        {{0, 0, 1, 1}, {0, 1, 0, 1}, 0.0},
        {{3, 3, 0, 0}, {3, 3, 3, 0}, 0.5},
        {{0, 1, 2, 3}, {0, 1, 2, 3}, 1.0},
        {{0, 1, 2, 3}, {1, 2, 3, 0}, -1.0 / 3.0},
        {{1, 1, 1, 2, 2, 2}, {1, 1, 2, 2, 2, 2}, 2.0 / 3.0},
    };
    double max_err = 0;
    for (const auto& f : fixtures) max_err = std::max(max_err, std::abs(eval::cohen_kappa(f.a, f.b).kappa - f.kappa));
    std::mt19937_64 gen(5);
    int self_bad = 0;
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<int> x(2 + gen() % 40);
        do {
            for (auto& v : x) v = static_cast<int>(gen() % 4);
        } while (std::all_of(x.begin(), x.end(), [&](int v) { return v == x[0]; }));
        if (std::abs(eval::cohen_kappa(x, x).kappa - 1.0) > 1e-9) ++self_bad;
    }
    return {max_err <= 1e-9 && self_bad == 0, "5 fixtures, max |error| " + fmt(max_err) +
                                                  " (tol 1e-9), kappa(x,x) != 1 in " + std::to_string(self_bad) +
                                                  " of 100 random vectors"};
}

Outcome criterion_parser() {
    // Completion shapes seen in model transcripts, hand labeled.
    const std::string s1 = "Relation_Summarization_1: Jacinto Suarez is a Nicaraguan deputy to the Central American Parliament.\n"
                           "Relation_Summarization_2: Angelo Mozilo is the former chief executive officer of Countrywide Financial Corp.\n"
                           "Understanding Process:\n";
    const std::vector<std::pair<std::string, Decision>> corpus{
        {s1 + "The nature of the relationships differs: one is a representative role within a parliamentary body, and the other is an executive role within a corporation.\nConclusion: No.", Decision::No},
        {s1 + "The nature of the roles is similar in that both involve being part of an organization, but the specific roles differ (deputy vs. CEO).\n\nConclusion: No", Decision::No},
        {s1 + "In both cases, the relation is the same: a person is employed in a specific role within a company/organization.\n\nYes", Decision::Yes},
        {"Relation_Summarization_1: Karr Ingham created the Texas Petro Index.\nRelation_Summarization_2: Ahmed Rashid is the author of \"Failure of Nation Building.\"\nUnderstanding Process:\nThe key relation in both summaries is one of creation or authorship.\nConclusion: Yes.", Decision::Yes},
        {"Relation_Summarization_1: Karr Ingham created the Texas Petro Index.\n\nRelation_Summarization_2: Ahmed Rashid is the author of \"Failure of Nation Building.\"\n\nBoth summaries describe a relationship where one entity is responsible for producing another.\n\nConclusion: Yes.", Decision::Yes},
        {"Relation_Summarization_1: Karr Ingham is the creator of the Texas Petro Index.\nThe nature of these relations is different: one is about creation of an index, and the other is about authorship of a book.\nNo", Decision::No},
        {"In Relation_Summarization_2 (\"survived by,\" \"brother\"), the relationship is familial.\nConclusion: No", Decision::No},
        {"The nature of the relationships in both summaries is different: one is professional/collaborative, and the other is familial.\nNo", Decision::No},
        {"In both cases, the relation is the same: they are siblings.\nYes", Decision::Yes},
        {"Both summaries describe the relationship as one of abbreviation.\nYes.", Decision::Yes},
        {"- Both summaries describe an abbreviation relationship between an acronym and its full organizational name.\n\nConclusion:\nYes.", Decision::Yes},
        {"The relations differ in nature: one involves a legal action against a co-founder, and the other involves founding an institution.", Decision::Unparseable},
        {"- Both summaries describe a person's role in an entity, but the nature of the entities differs: one is a corporation, and the other is a collection.", Decision::Unparseable},
        {"In both cases, the relation is the same: a person is the founder of a company.", Decision::Unparseable},
        {"The relations are not similar: the first is about historical acknowledgment, while the second is about leadership within a group.", Decision::Unparseable},
        {"In both cases, the relation is the same: A person is originally from a country.", Decision::Unparseable},
        {"Yes, the answer could be yes here.\nBut looking again the roles differ.\nConclusion: No.", Decision::No},
        {"At first glance the answer is No.\nOn reflection both are founders.\nYes", Decision::Yes},
        {"Is it Yes or No? Hard to say.", Decision::Unparseable},
        {"reasoning\nYes\n\n   \n", Decision::Yes},
        {"reasoning\nno", Decision::No},
        {"reasoning\nNO.", Decision::No},
        {"reasoning\n**Yes**", Decision::Yes},
        {"reasoning\n- No", Decision::No},
        {"reasoning\n**Conclusion:** Yes", Decision::Yes},
        {"reasoning\nConclusion - yes", Decision::Unparseable},
        {"reasoning\nAnswer: Yes", Decision::Unparseable},
        {"Yes\nNo", Decision::No},
        {"maybe", Decision::Unparseable},
        {"", Decision::Unparseable},
    };
    int wrong = 0;
    for (const auto& [raw, label] : corpus) {
        if (llm::parse_decision(raw) != label) {
            ++wrong;
            std::cerr << "  parser case mislabeled: " << raw.substr(0, 60) << "\n";
        }
    }
    return {wrong == 0 && corpus.size() == 30,
            std::to_string(corpus.size() - wrong) + "/" + std::to_string(corpus.size()) + " cases agree with hand labels"};
}

Outcome criterion_end_to_end(const testing::TempDir& dir) {
    const auto corpus = testing::data_path("corpus30.jsonl").string();
    const auto mock = "replay:" + testing::data_path("mock_llm.json").string();
    const auto p = [&](const char* name) { return "\"" + (dir / name).string() + "\""; };
    struct Step {
        const char* name;
        std::string args;
    };
    const std::vector<Step> steps{
        {"sample-train", "sample-train --input \"" + corpus + "\" --output " + p("train.jsonl") + " --stats " +
                             p("train_stats.json") + " --K 3 --seed 1"},
        {"build-dict", "build-dict --train " + p("train.jsonl") + " --endpoint \"" + mock +
                           "\" --model vanilla --built-at 2025-01-01T00:00:00Z --backoff-ms 1 --output " + p("dict.json")},
        {"infer", "infer --episodes \"" + corpus + "\" --endpoint \"" + mock + "\" --model policy --output " +
                      p("outputs.jsonl")},
        {"score", "score --dict " + p("dict.json") + " --episodes \"" + corpus + "\" --outputs " + p("outputs.jsonl") +
                      " --output " + p("rewards.jsonl")},
        {"advantages", "advantages --input " + p("rewards.jsonl") + " --output " + p("advantages.jsonl")},
        {"evaluate", "evaluate --episodes \"" + corpus + "\" --outputs " + p("outputs.jsonl") + " --output " +
                         p("report.json")},
    };
    for (const auto& s : steps) {
        const int code = run_binary(s.args, dir / "e2e.log");
        if (code != 0)
            return {false, std::string(s.name) + " exited " + std::to_string(code) + ": " +
                               testing::read_text(dir / "e2e.log").substr(0, 300)};
    }
    const auto report = json::parse(testing::read_text(dir / "report.json"));
    bool well_formed = true;
    for (const char* k : {"tp", "fp", "fn", "tn", "unparseable", "total", "precision", "recall", "f1", "per_category"})
        well_formed &= report.contains(k);
    well_formed &= report.value("total", 0) == 30;
    for (const char* k : {"precision", "recall", "f1"}) {
        const double v = report.value(k, -1.0);
        well_formed &= v >= 0.0 && v <= 1.0;
    }
    std::size_t rows = 0, keyword_rows = 0, rewarded = 0;
    for (const auto& line : split_lines(testing::read_text(dir / "rewards.jsonl"))) {
        if (trim(line).empty()) continue;
        const auto j = json::parse(line);
        ++rows;
        const bool has_hits = !j["counts_1"]["matched_keywords"].empty() || !j["counts_2"]["matched_keywords"].empty();
        keyword_rows += has_hits;
        rewarded += has_hits && j["hit_reward"].get<double>() > 0 && j["total"].get<double>() != 0;
    }
    std::size_t adv_rows = 0;
    for (const auto& line : split_lines(testing::read_text(dir / "advantages.jsonl")))
        adv_rows += !trim(line).empty();
    const bool pass = well_formed && rows == 30 && adv_rows == 30 && keyword_rows > 0 && rewarded == keyword_rows;
    return {pass, "6 steps exit 0, report " + std::string(well_formed ? "well-formed" : "malformed") + " (F1 " +
                      fmt(report.value("f1", -1.0)) + "), " + std::to_string(rewarded) + "/" +
                      std::to_string(keyword_rows) + " keyword-bearing outputs rewarded"};
}

}  // namespace

int main() {
    const auto start = std::chrono::steady_clock::now();
    testing::TempDir dir;
    report(1, "accuracy reward exactness", criterion_accuracy);
    report(2, "hit-at-dictionary fixtures", criterion_hit_fixtures);
    report(3, "combined reward structure", criterion_combined);
    report(4, "group-relative advantages", criterion_advantages);
    report(5, "dictionary builder determinism", [&] { return criterion_dictionary(dir); });
    report(6, "sampler distribution preservation", criterion_sampler);
    report(7, "metrics oracle", criterion_metrics);
    report(8, "cohen's kappa", criterion_kappa);
    report(9, "decision parser robustness", criterion_parser);
    report(10, "end-to-end dry run", [&] { return criterion_end_to_end(dir); });
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed") << " in "
              << fmt(secs) << "s" << std::endl;
    return failures == 0 ? 0 : 1;
}
