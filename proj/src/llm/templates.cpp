#include <algorithm>

#include "rekey/llm.hpp"

namespace rekey::llm {
namespace {

constexpr std::string_view kSummarizationExamples =
    R"(Summarize the relations between "Malcolm Peeler" and "Pangburn" in "Dr. Malcolm Peeler , grew in Pangburn, has continued the family tradition of practicing medicine in Jonesboro .".
Summarization: Malcolm Peeler came from Pangburn.

Summarize the relations between "Oceania" and "PECC" in "Oceania and the Western Hemisphere within the PECC region , as surplus food producers and exporters , confront unique consumer issues , such as lower food expenditure and higher caloric intake compared to Asia .".
Summarization: Oceania within region PECC.

Summarize the relations between "Global Climate Research Institute" and "GCRI" in "Climate change challenges remain a key concern at the annual summit. The outlook is concerning, according to the Global Climate Research Institute ( GCRI ), which coordinates the event each year.".
Summarization: Global Climate Research Institute is abbreviated as GCRI.

Summarize the relations between "Panasonic Corp" and "Tesla Inc" in "Tesla Inc. is a wholly-owned subsidiary of Panasonic Corp, focusing on energy storage solutions.".
Summarization: Panasonic Corp is a subsidiary of Tesla Inc.
)";

// Bodies are assembled once at startup; the shared examples block is spliced
// where each prompt lists its summarization examples.
const std::string kCogre = std::string(
R"(You are given two sentences. Follow the three steps below to determine whether they express a similar relation.

---

Summarization: Focus on the main parts between subjects and objects in the sentences.
Summarization examples:

)") + std::string(kSummarizationExamples) + R"(
---

Step 1: summarize the relations between "{support_sentence_subject}" and
"{support_sentence_object}" in "{support_sentence}".
Label your result as: Relation_Summarization_1.

Step 2: summarize the relations between "{test_sentence_subject}" and
"{test_sentence_object}" in "{test_sentence}".
Label your result as: Relation_Summarization_2.

Step 3: are the relations between "{support_sentence_subject}" and
"{support_sentence_object}" in Relation_Summarization_1 and between "{test_sentence_subject}" and "{test_sentence_object}" in Relation_Summarization_2 similar?
Focus on the keywords in the Relation_Summarization_1 an Relation_Summarization_2 that convey relations.

Generate the understanding process, followed by Yes or No in a separate line.
)";

const std::string kKeywordExtraction = [] {
    std::string body =
        "Relation: {relation}\n"
        "Please extract the words or phrases that indicate trigger words or relation summaries from the "
        "following answers; the relation is {relation}.\n"
        "Output a string list contain all the words.\n";
    for (int i = 1; i <= 5; ++i) {
        const auto n = std::to_string(i);
        body += "output_case_" + n + ":\n{content_" + n + "}\nsupport_sentence: {support_sentence_" + n +
                "}\ntest_sentence: {test_sentence_" + n + "}\n\n";
    }
    return body;
}();

constexpr std::string_view kDirect =
R"(Are the relations between "{support_sentence_subject}" and "{support_sentence_object}" in "{support_sentence}" and between "{test_sentence_subject}" and "{test_sentence_object}" in {test_sentence} similar?
Directly answer Yes or No in a separate line.
---
IMPORTANT: must answer with just Yes or No.
)";

constexpr std::string_view kSimpleReasoning =
R"(Are the relations between "{support_sentence_subject}" and "{support_sentence_object}" in "{support_sentence}" and between "{test_sentence_subject}" and "{test_sentence_object}" in {test_sentence} similar?
Generate the understanding process, followed by Yes or No in a separate line.
)";

const std::string kSumask = std::string(
R"(You are given two sentences. Follow the three steps below to determine whether they express a similar relation.

---

Summarization examples:

)") + std::string(kSummarizationExamples) + R"(
---

Step 1: summarize the relations between "{support_sentence_subject}" and
"{support_sentence_object}" in "{support_sentence}".
Label your result as: Relation_Summarization_1.

Step 2: summarize the relations between "{test_sentence_subject}" and
"{test_sentence_object}" in "{test_sentence}".
Label your result as: Relation_Summarization_2.

Step 3: generate a question as: are the relations between "{support_sentence_subject}" and "{support_sentence_object}" in Relation_Summarization_1 and between "{test_sentence_subject}" and "{test_sentence_object}" in Relation_Summarization_2 similar?

Step 4: directly answer the question with Yes or No in a separate line.
)";

constexpr std::string_view kNoChunking =
R"(You are given two sentences. Follow the three steps below to determine whether they express a similar relation.
Step1: are the relations between "{paraphrased_sentence_subject}" and
"{paraphrased_sentence_object}" in {paraphrased_sentence} and between "{test_sentence_subject}" and "{test_sentence_object}" in {test_sentence} similar? Focus on the keywords in the {paraphrased_sentence} an {test_sentence} that convey relations.
Generate the understanding process, followed by Yes or No in a separate line.

)";

const std::string kNoReasoning = std::string(
R"(You are given two sentences. Follow the three steps below to determine whether they express a similar relation.
---
Summarization examples:

)") + std::string(kSummarizationExamples) + R"(---
Step 1: summarize the relations between "{support_sentence_subject}" and
"{support_sentence_object}" in "{support_sentence}".
Label your result as: Relation_Summarization_1.

Step 2: summarize the relations between "{test_sentence_subject}" and "{test_sentence_object}" in "{test_sentence}".
Label your result as: Relation_Summarization_2.

Step 3: generate a question as: are the relations between "{support_sentence_subject}" and "{support_sentence_object}" in Relation_Summarization_1 and between "{test_sentence_subject}" and "{test_sentence_object}" in Relation_Summarization_2 similar?

Step 4: Focus on the keywords in the Relation_Summarization_1 an Relation_Summarization_2 that convey relations, and directly answer the question with Yes or No in a separate line.

)";

const std::string kNoKeywords = std::string(
R"(You are given two sentences. Follow the three steps below to determine whether they express a similar relation.
---
Summarization examples:

)") + std::string(kSummarizationExamples) + R"(---
Step 1: summarize the relations between "{support_sentence_subject}" and
"{support_sentence_object}" in "{support_sentence}".
Label your result as: Relation_Summarization_1.

Step 2: summarize the relations between "{test_sentence_subject}" and "{test_sentence_object}" in "{test_sentence}".
Label your result as: Relation_Summarization_2.

Step 3: generate a question as: are the relations between "{support_sentence_subject}" and "{support_sentence_object}" in Relation_Summarization_1 and between "{test_sentence_subject}" and "{test_sentence_object}" in Relation_Summarization_2 similar?
Generate the understanding process, followed by Yes or No in a separate line.

)";

const std::vector<std::string_view> kPairPlaceholders{
    "support_sentence_subject", "support_sentence_object", "support_sentence",
    "test_sentence_subject",    "test_sentence_object",    "test_sentence"};

const std::vector<std::string_view> kParaphrasePlaceholders{
    "paraphrased_sentence_subject", "paraphrased_sentence_object", "paraphrased_sentence",
    "test_sentence_subject",        "test_sentence_object",        "test_sentence"};

const std::vector<std::string_view> kExtractionPlaceholders{
    "relation",           "content_1",          "support_sentence_1", "test_sentence_1",
    "content_2",          "support_sentence_2", "test_sentence_2",    "content_3",
    "support_sentence_3", "test_sentence_3",    "content_4",          "support_sentence_4",
    "test_sentence_4",    "content_5",          "support_sentence_5", "test_sentence_5"};

}  // namespace

MissingBinding::MissingBinding(std::string placeholder)
    : PromptError("missing binding for placeholder \"" + placeholder + "\""), placeholder_(std::move(placeholder)) {}

const std::vector<PromptTemplate>& all_templates() {
    static const std::vector<PromptTemplate> templates{
        {TemplateName::cogre, "cogre", kCogre, kPairPlaceholders},
        {TemplateName::direct, "direct", kDirect, kPairPlaceholders},
        {TemplateName::simple_reasoning, "simple_reasoning", kSimpleReasoning, kPairPlaceholders},
        {TemplateName::sumask_one_prompt, "sumask_one_prompt", kSumask, kPairPlaceholders},
        {TemplateName::keyword_extraction, "keyword_extraction", kKeywordExtraction, kExtractionPlaceholders},
        {TemplateName::ablate_no_chunking, "ablate_no_chunking", kNoChunking, kParaphrasePlaceholders},
        {TemplateName::ablate_no_reasoning, "ablate_no_reasoning", kNoReasoning, kPairPlaceholders},
        {TemplateName::ablate_no_keywords, "ablate_no_keywords", kNoKeywords, kPairPlaceholders},
    };
    return templates;
}

const PromptTemplate& get_template(TemplateName name) {
    const auto& all = all_templates();
    return *std::find_if(all.begin(), all.end(), [&](const auto& t) { return t.name == name; });
}

std::optional<TemplateName> parse_template_name(std::string_view id) {
    for (const auto& t : all_templates())
        if (t.id == id) return t.name;
    return std::nullopt;
}

std::string substitute(std::string_view body, const std::vector<std::string_view>& placeholders,
                       const Bindings& bindings) {
    for (auto p : placeholders)
        if (bindings.find(p) == bindings.end()) throw MissingBinding(std::string(p));

    std::string out;
    out.reserve(body.size() * 2);
    std::size_t i = 0;
    while (i < body.size()) {
        if (body[i] == '{') {
            auto close = body.find('}', i + 1);
            if (close != std::string_view::npos) {
                auto name = body.substr(i + 1, close - i - 1);
                if (std::find(placeholders.begin(), placeholders.end(), name) != placeholders.end()) {
                    out += bindings.find(name)->second;
                    i = close + 1;
                    continue;
                }
            }
        }
        out.push_back(body[i++]);
    }
    return out;
}

std::string render_prompt(TemplateName name, const Bindings& bindings) {
    const auto& t = get_template(name);
    return substitute(t.body, t.placeholders, bindings);
}

std::string render_prompt(std::string_view template_id, const Bindings& bindings) {
    auto name = parse_template_name(template_id);
    if (!name) throw PromptError("unknown template \"" + std::string(template_id) + "\"");
    return render_prompt(*name, bindings);
}

Bindings episode_bindings(const Episode& ep, TemplateName name) {
    if (name == TemplateName::keyword_extraction)
        throw PromptError("keyword_extraction is not an episode inference template");
    Bindings b{
        {"test_sentence_subject", ep.test.subject},
        {"test_sentence_object", ep.test.object},
        {"test_sentence", ep.test.text},
    };
    const std::string prefix = name == TemplateName::ablate_no_chunking ? "paraphrased_sentence" : "support_sentence";
    b[prefix + "_subject"] = ep.support.subject;
    b[prefix + "_object"] = ep.support.object;
    b[prefix] = ep.support.text;
    return b;
}

}  // namespace rekey::llm
