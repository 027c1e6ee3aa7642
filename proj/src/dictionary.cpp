#include "rekey/dictionary.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>
#include <thread>
#include <atomic>

#include "rekey/llm.hpp"
#include "rekey/log.hpp"
#include "rekey/rng.hpp"
#include "rekey/textnorm.hpp"

namespace rekey::dictionary {

namespace {

bool is_ws(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r'; }

// Parses a quoted-string list starting at text[open] == '['. Returns nullopt
// when the bracket does not open such a list.
std::optional<std::vector<std::string>> try_parse_list(std::string_view text, std::size_t open) {
    std::vector<std::string> items;
    std::size_t i = open + 1;
    auto skip_ws = [&] {
        while (i < text.size() && is_ws(text[i])) ++i;
    };
    skip_ws();
    if (i < text.size() && text[i] == ']') return items;
    while (i < text.size()) {
        skip_ws();
        if (i >= text.size()) return std::nullopt;
        const char quote = text[i];
        if (quote != '"' && quote != '\'') return std::nullopt;
        ++i;
        std::string item;
        bool closed = false;
        while (i < text.size()) {
            char c = text[i++];
            if (c == '\\' && i < text.size()) {
                char e = text[i++];
                item.push_back(e == 'n' ? ' ' : e);
            } else if (c == quote) {
                closed = true;
                break;
            } else {
                item.push_back(c);
            }
        }
        if (!closed) return std::nullopt;
        if (auto t = trim(item); !t.empty()) items.push_back(std::move(t));
        skip_ws();
        if (i >= text.size()) return std::nullopt;
        if (text[i] == ',') {
            ++i;
            skip_ws();
            if (i < text.size() && text[i] == ']') return items;  // trailing comma
            continue;
        }
        if (text[i] == ']') return items;
        return std::nullopt;
    }
    return std::nullopt;
}

// Stored keywords are already stems, and stemming a stem can change it
// ("univers" -> "univer"), so equality compares both exact and re-normalized forms.
// This also merges the literal "no relation" with a cue normalized to "no relat".
void append_unique(std::vector<std::string>& v, const std::string& s) {
    if (s.empty()) return;
    const auto key = textnorm::normalize_keyword(s, false);
    for (const auto& existing : v)
        if (existing == s || textnorm::normalize_keyword(existing, false) == key) return;
    v.push_back(s);
}

std::vector<std::string> string_list(const nlohmann::json& j, const std::string& where) {
    if (!j.is_array()) throw DictionaryError(where + " must be an array");
    std::vector<std::string> out;
    for (const auto& v : j) {
        if (!v.is_string()) throw DictionaryError(where + " must contain only strings");
        out.push_back(v.get<std::string>());
    }
    return out;
}

// nlohmann keeps the last of duplicate keys; this callback rejects them.
nlohmann::json parse_rejecting_duplicates(std::string_view text) {
    std::vector<std::set<std::string>> scopes;
    std::string duplicate;
    auto cb = [&](int /*depth*/, nlohmann::json::parse_event_t event, nlohmann::json& parsed) {
        using E = nlohmann::json::parse_event_t;
        switch (event) {
            case E::object_start: scopes.emplace_back(); break;
            case E::object_end:
                if (!scopes.empty()) scopes.pop_back();
                break;
            case E::key:
                if (!scopes.empty() && !scopes.back().insert(parsed.get<std::string>()).second && duplicate.empty())
                    duplicate = parsed.get<std::string>();
                break;
            default: break;
        }
        return true;
    };
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text.begin(), text.end(), cb);
    } catch (const nlohmann::json::parse_error& e) {
        throw DictionaryError(std::string("malformed dictionary: ") + e.what());
    }
    if (!duplicate.empty()) throw DictionaryError("malformed dictionary: duplicate key \"" + duplicate + "\"");
    return j;
}

}  // namespace

void BuilderConfig::validate() const {
    if (K < 1 || K > 5) throw std::invalid_argument("K must be in [1, 5], got " + std::to_string(K));
    if (max_parallel_labels < 1) throw std::invalid_argument("max_parallel_labels must be >= 1");
    if (extraction_retries < 0) throw std::invalid_argument("extraction_retries must be >= 0");
}

std::vector<Episode> collect_positive_pairs(const std::vector<Episode>& train) {
    std::vector<Episode> out;
    for (const auto& ep : train)
        if (ep.support.relation == ep.test.relation && effective_answer(ep) == Answer::Yes) out.push_back(ep);
    return out;
}

FilterResult filter_true_positives(const std::vector<Episode>& pairs, const InferFn& infer) {
    FilterResult result;
    for (const auto& ep : pairs) {
        ModelOutput out = infer(ep);
        if (out.decision == Decision::Unparseable) {
            ++result.unparseable;
            log::warn("episode " + ep.id + ": vanilla output has no Yes/No decision; skipped");
            continue;
        }
        if (out.decision != Decision::Yes) continue;
        result.cases.push_back({ep.id, ep.support, ep.test, ep.support.relation, std::move(out.explanation)});
    }
    return result;
}

std::map<RelationLabel, std::vector<GoodCase>> sample_good_cases(const std::vector<GoodCase>& cases, int K,
                                                                 std::uint64_t seed) {
    if (K < 1 || K > 5) throw std::invalid_argument("K must be in [1, 5]");
    std::map<RelationLabel, std::vector<const GoodCase*>> grouped;
    for (const auto& c : cases) grouped[c.label].push_back(&c);

    Rng rng(seed);
    std::map<RelationLabel, std::vector<GoodCase>> out;
    for (const auto& [label, group] : grouped) {
        auto& dst = out[label];
        for (auto idx : rng.sample_indices(group.size(), static_cast<std::size_t>(K))) dst.push_back(*group[idx]);
    }
    return out;
}

std::string build_extraction_prompt(const RelationLabel& label, std::span<const GoodCase> cases) {
    if (cases.empty()) throw std::invalid_argument("extraction prompt needs at least one good case");
    if (cases.size() > 5) throw std::invalid_argument("extraction prompt takes at most five good cases");

    const auto& tmpl = llm::get_template(llm::TemplateName::keyword_extraction);
    const std::string_view body = tmpl.body;
    // Header is everything before the first case block; blocks are rendered
    // one by one so unused slots disappear entirely.
    const auto first_block = body.find("output_case_1:");
    llm::Bindings header_bindings{{"relation", label.str()}};
    std::string prompt = llm::substitute(body.substr(0, first_block), {"relation"}, header_bindings);

    for (std::size_t i = 0; i < cases.size(); ++i) {
        const auto n = std::to_string(i + 1);
        const auto start = body.find("output_case_" + n + ":");
        const auto end = body.find("output_case_" + std::to_string(i + 2) + ":");
        const auto block = body.substr(start, end == std::string_view::npos ? std::string_view::npos : end - start);
        llm::Bindings b{{"content_" + n, cases[i].explanation},
                        {"support_sentence_" + n, cases[i].support.text},
                        {"test_sentence_" + n, cases[i].test.text}};
        const std::string c = "content_" + n, s = "support_sentence_" + n, t = "test_sentence_" + n;
        prompt += llm::substitute(block, {c, s, t}, b);
    }
    return prompt;
}

std::vector<std::string> parse_keyword_response(std::string_view raw) {
    for (std::size_t pos = raw.find('['); pos != std::string_view::npos; pos = raw.find('[', pos + 1)) {
        if (auto list = try_parse_list(raw, pos)) return *list;
    }
    throw KeywordParseError("no quoted keyword list found in response");
}

KeywordDictionary assemble_dictionary(const std::map<RelationLabel, std::vector<std::string>>& per_label_keywords,
                                      const BuilderConfig& config,
                                      const std::map<RelationLabel, std::vector<std::string>>& provenance) {
    const auto& entity_stems = textnorm::entity_expansion_stems();
    KeywordDictionary dict;
    dict.meta.K = config.K;
    dict.meta.seed = config.seed;

    for (const auto& [label, extracted] : per_label_keywords) {
        DictionaryEntry entry;
        entry.label = label;
        const auto label_kw = textnorm::tokenize_label(label);
        entry.entity_keywords = label_kw.entity;
        entry.relation_keywords = label_kw.relation;

        std::vector<std::string> extra = extracted;
        if (label.is_no_relation())
            extra.insert(extra.end(), config.no_relation_cues.begin(), config.no_relation_cues.end());

        // Stopword removal is suspended for no_relation so negation cues survive.
        const bool drop_stopwords = !label.is_no_relation();
        for (const auto& raw : extra) {
            const auto key = textnorm::normalize_keyword(raw, drop_stopwords);
            if (key.empty()) continue;
            const bool is_entity = std::find(entity_stems.begin(), entity_stems.end(), key) != entity_stems.end();
            append_unique(is_entity ? entry.entity_keywords : entry.relation_keywords, key);
        }
        if (entry.relation_keywords.empty()) append_unique(entry.relation_keywords, textnorm::normalize_keyword(label.str()));
        if (auto p = provenance.find(label); p != provenance.end()) entry.provenance = p->second;
        dict.entries.emplace(label, std::move(entry));
    }
    return dict;
}

BuildReport build_dictionary(const BuildRequest& req) {
    req.config.validate();
    if (!req.infer || !req.extract) throw std::invalid_argument("build_dictionary needs infer and extract functions");

    BuildReport report;
    const auto pairs = collect_positive_pairs(req.train);
    report.positive_pairs = pairs.size();
    auto filtered = filter_true_positives(pairs, req.infer);
    report.good_cases = filtered.cases.size();
    report.unparseable = filtered.unparseable;
    const auto sampled = sample_good_cases(filtered.cases, req.config.K, req.config.seed);

    std::set<RelationLabel> labels;
    for (const auto& ep : req.train) {
        labels.insert(ep.support.relation);
        labels.insert(ep.test.relation);
    }
    const std::vector<RelationLabel> ordered(labels.begin(), labels.end());

    struct Slot {
        std::vector<std::string> keywords;
        std::vector<std::string> provenance;
        bool degraded = false;
    };
    std::vector<Slot> slots(ordered.size());

    auto extract_one = [&](std::size_t i) {
        const auto it = sampled.find(ordered[i]);
        if (it == sampled.end() || it->second.empty()) return;
        auto& slot = slots[i];
        for (const auto& c : it->second) slot.provenance.push_back(c.case_id);
        const auto prompt = build_extraction_prompt(ordered[i], it->second);
        std::string last_error;
        for (int attempt = 0; attempt <= req.config.extraction_retries; ++attempt) {
            try {
                slot.keywords = parse_keyword_response(req.extract(prompt));
                return;
            } catch (const std::exception& e) {
                last_error = e.what();
            }
        }
        slot.degraded = true;
        log::warn("label " + ordered[i].str() + ": keyword extraction failed (" + last_error +
                  "); using label tokens only");
    };

    std::atomic<std::size_t> cursor{0};
    const auto n_workers =
        std::min<std::size_t>(static_cast<std::size_t>(req.config.max_parallel_labels), std::max<std::size_t>(1, ordered.size()));
    {
        std::vector<std::jthread> workers;
        for (std::size_t t = 0; t < n_workers; ++t)
            workers.emplace_back([&] {
                for (std::size_t i = cursor.fetch_add(1); i < ordered.size(); i = cursor.fetch_add(1)) extract_one(i);
            });
    }

    std::map<RelationLabel, std::vector<std::string>> keywords;
    std::map<RelationLabel, std::vector<std::string>> provenance;
    std::vector<std::string> degraded;
    for (std::size_t i = 0; i < ordered.size(); ++i) {
        keywords[ordered[i]] = slots[i].keywords;
        if (!slots[i].provenance.empty()) provenance[ordered[i]] = slots[i].provenance;
        if (slots[i].degraded) degraded.push_back(ordered[i].str());
    }

    report.dictionary = assemble_dictionary(keywords, req.config, provenance);
    auto& meta = report.dictionary.meta;
    meta.built_at = req.built_at;
    meta.vanilla_model_id = req.vanilla_model_id;
    meta.extractor_model_id = req.extractor_model_id;
    meta.degraded_labels = std::move(degraded);
    return report;
}

nlohmann::json to_json(const KeywordDictionary& d) {
    nlohmann::json entries = nlohmann::json::object();
    for (const auto& [label, e] : d.entries)
        entries[label.str()] = {{"entity", e.entity_keywords}, {"relation", e.relation_keywords}, {"provenance", e.provenance}};
    nlohmann::json meta{{"version", d.meta.version},
                        {"built_at", d.meta.built_at},
                        {"vanilla_model_id", d.meta.vanilla_model_id},
                        {"extractor_model_id", d.meta.extractor_model_id},
                        {"K", d.meta.K},
                        {"seed", d.meta.seed},
                        {"degraded_labels", d.meta.degraded_labels}};
    return {{"meta", std::move(meta)}, {"entries", std::move(entries)}};
}

KeywordDictionary from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw DictionaryError("malformed dictionary: top level must be an object");
    auto meta_it = j.find("meta");
    auto entries_it = j.find("entries");
    if (meta_it == j.end() || !meta_it->is_object()) throw DictionaryError("malformed dictionary: missing \"meta\" object");
    if (entries_it == j.end() || !entries_it->is_object())
        throw DictionaryError("malformed dictionary: missing \"entries\" object");

    KeywordDictionary d;
    const auto& m = *meta_it;
    try {
        d.meta.version = m.at("version").get<int>();
        if (d.meta.version != kFormatVersion)
            throw DictionaryError("dictionary version mismatch: file has " + std::to_string(d.meta.version) +
                                  ", expected " + std::to_string(kFormatVersion));
        d.meta.built_at = m.value("built_at", "");
        d.meta.vanilla_model_id = m.value("vanilla_model_id", "");
        d.meta.extractor_model_id = m.value("extractor_model_id", "");
        d.meta.K = m.at("K").get<int>();
        d.meta.seed = m.value("seed", std::uint64_t{0});
        if (auto dl = m.find("degraded_labels"); dl != m.end()) d.meta.degraded_labels = string_list(*dl, "meta.degraded_labels");
    } catch (const nlohmann::json::exception& e) {
        throw DictionaryError(std::string("malformed dictionary meta: ") + e.what());
    }
    if (d.meta.K < 1 || d.meta.K > 5) throw DictionaryError("malformed dictionary: meta.K must be in [1, 5]");

    for (const auto& [key, value] : entries_it->items()) {
        RelationLabel label(key);
        if (label.empty()) throw DictionaryError("malformed dictionary: empty label key");
        if (!value.is_object()) throw DictionaryError("malformed dictionary: entry \"" + key + "\" must be an object");
        DictionaryEntry e;
        e.label = label;
        e.entity_keywords = string_list(value.value("entity", nlohmann::json::array()), "entries." + key + ".entity");
        e.relation_keywords = string_list(value.value("relation", nlohmann::json::array()), "entries." + key + ".relation");
        e.provenance = string_list(value.value("provenance", nlohmann::json::array()), "entries." + key + ".provenance");
        if (!d.entries.emplace(label, std::move(e)).second)
            throw DictionaryError("malformed dictionary: duplicate label \"" + label.str() + "\"");
    }
    return d;
}

std::string to_canonical_string(const KeywordDictionary& d) { return to_json(d).dump(2) + "\n"; }

KeywordDictionary parse_dictionary(std::string_view text) { return from_json(parse_rejecting_duplicates(text)); }

void save_dictionary(const KeywordDictionary& d, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DictionaryError("cannot write " + path.string());
    out << to_canonical_string(d);
    if (!out) throw DictionaryError("failed writing " + path.string());
}

KeywordDictionary load_dictionary(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DictionaryError("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_dictionary(ss.str());
}

}  // namespace rekey::dictionary
