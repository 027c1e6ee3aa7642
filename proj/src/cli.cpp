#include "rekey/cli.hpp"

#include <charconv>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>

#include "CLI11.hpp"
#include "httplib.h"
#include "rekey/eval.hpp"
#include "rekey/log.hpp"
#include "rekey/sampler.hpp"

namespace rekey::cli {

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// Writes via a sibling temp file so readers never see a partial result.
void write_file(const fs::path& path, std::string_view content) {
    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write " + tmp.string());
        out << content;
        if (!out) throw std::runtime_error("failed writing " + tmp.string());
    }
    fs::rename(tmp, path);
}

void emit(const std::string& path, std::string_view content, std::ostream& out) {
    if (path.empty() || path == "-")
        out << content;
    else
        write_file(path, content);
}

json parse_json_arg(const std::string& text, const std::string& what) {
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        throw ValidationError(what + " is not valid JSON: " + e.what());
    }
}

std::vector<double> to_reals(const json& j, const std::string& what) {
    if (!j.is_array()) throw ValidationError(what + " must be a JSON array of numbers");
    std::vector<double> v;
    for (const auto& x : j) {
        if (!x.is_number()) throw ValidationError(what + " must be a JSON array of numbers");
        v.push_back(x.get<double>());
    }
    return v;
}

struct OutputRecord {
    std::string episode_id;
    std::string raw_text;
    std::size_t line = 0;
};

// JSONL of {"episode_id" | "id", "raw_text"}; inference checkpoints qualify.
std::vector<OutputRecord> load_outputs(const fs::path& path) {
    std::vector<OutputRecord> records;
    std::vector<LineIssue> issues;
    const auto lines = split_lines(read_file(path));
    for (std::size_t i = 0; i < lines.size(); ++i) {
        if (trim(lines[i]).empty()) continue;
        try {
            const auto j = json::parse(lines[i]);
            OutputRecord r;
            r.line = i + 1;
            if (j.contains("episode_id")) r.episode_id = j.at("episode_id").get<std::string>();
            else if (j.contains("id")) r.episode_id = j.at("id").get<std::string>();
            else {
                issues.push_back({i + 1, "missing field \"episode_id\""});
                continue;
            }
            if (!j.contains("raw_text")) {
                issues.push_back({i + 1, "missing field \"raw_text\""});
                continue;
            }
            r.raw_text = j.at("raw_text").get<std::string>();
            records.push_back(std::move(r));
        } catch (const json::exception& e) {
            issues.push_back({i + 1, e.what()});
        }
    }
    if (!issues.empty()) throw LoadError(path.string(), std::move(issues));
    return records;
}

std::vector<eval::Prediction> join_predictions(const std::vector<Episode>& episodes,
                                               const std::vector<OutputRecord>& outputs, const fs::path& outputs_path) {
    std::map<std::string, const Episode*> by_id;
    for (const auto& ep : episodes) by_id[ep.id] = &ep;
    std::vector<eval::Prediction> pairs;
    std::vector<LineIssue> issues;
    for (const auto& o : outputs) {
        auto it = by_id.find(o.episode_id);
        if (it == by_id.end()) {
            issues.push_back({o.line, "unknown episode id \"" + o.episode_id + "\""});
            continue;
        }
        pairs.emplace_back(*it->second, llm::parse_model_output(o.raw_text));
    }
    if (!issues.empty()) throw LoadError(outputs_path.string(), std::move(issues));
    if (pairs.size() < episodes.size())
        log::warn(std::to_string(episodes.size() - pairs.size()) + " episodes have no output and are not scored");
    return pairs;
}

std::string iso_utc(std::time_t t) {
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

// Explicit value, else SOURCE_DATE_EPOCH, else the current time.
std::string resolve_built_at(const std::optional<std::string>& configured) {
    if (configured) return *configured;
    if (const char* sde = std::getenv("SOURCE_DATE_EPOCH")) {
        try {
            return iso_utc(static_cast<std::time_t>(std::stoll(sde)));
        } catch (const std::exception&) {
            log::warn("ignoring unparsable SOURCE_DATE_EPOCH");
        }
    }
    return iso_utc(std::time(nullptr));
}

void require(const std::string& value, const std::string& flag, const std::string& command) {
    if (value.empty()) throw ValidationError(command + " requires " + flag);
}

llm::ChatRequest request_defaults(const RunConfig& cfg, const std::string& model) {
    llm::ChatRequest req;
    req.model_id = model;
    req.temperature = cfg.temperature;
    req.max_tokens = cfg.max_tokens;
    return req;
}

llm::TemplateName resolve_template(const std::string& name) {
    auto t = llm::parse_template_name(name);
    if (!t) throw ValidationError("unknown template \"" + name + "\"");
    return *t;
}

template <class T>
T get_or(const json& j, const char* key, T fallback) {
    auto it = j.find(key);
    if (it == j.end() || it->is_null()) return fallback;
    return it->get<T>();
}

}  // namespace

// ---------------------------------------------------------------------------

RunConfig RunConfig::from_json(const json& j) {
    static const std::set<std::string> known{
        "endpoint", "api_key", "model_id", "extractor_model_id", "template", "temperature", "max_tokens",
        "max_in_flight", "timeout_ms", "max_attempts", "base_backoff_ms", "jitter", "w_entity", "w_relation", "N",
        "std_epsilon", "seed", "K", "built_at"};
    if (!j.is_object()) throw ValidationError("config must be a JSON object");
    for (const auto& [key, _] : j.items())
        if (!known.contains(key)) throw ValidationError("unknown config key \"" + key + "\"");
    RunConfig c;
    try {
        c.endpoint = get_or<std::string>(j, "endpoint", c.endpoint);
        c.api_key = get_or<std::string>(j, "api_key", c.api_key);
        c.model_id = get_or<std::string>(j, "model_id", c.model_id);
        c.extractor_model_id = get_or<std::string>(j, "extractor_model_id", c.extractor_model_id);
        c.template_name = get_or<std::string>(j, "template", c.template_name);
        c.temperature = get_or<double>(j, "temperature", c.temperature);
        c.max_tokens = get_or<int>(j, "max_tokens", c.max_tokens);
        c.policy.max_in_flight = get_or<int>(j, "max_in_flight", c.policy.max_in_flight);
        c.policy.timeout = std::chrono::milliseconds(get_or<std::int64_t>(j, "timeout_ms", c.policy.timeout.count()));
        c.policy.retry.max_attempts = get_or<int>(j, "max_attempts", c.policy.retry.max_attempts);
        c.policy.retry.base_backoff =
            std::chrono::milliseconds(get_or<std::int64_t>(j, "base_backoff_ms", c.policy.retry.base_backoff.count()));
        c.policy.retry.jitter = get_or<double>(j, "jitter", c.policy.retry.jitter);
        c.reward.w_entity = get_or<double>(j, "w_entity", c.reward.w_entity);
        c.reward.w_relation = get_or<double>(j, "w_relation", c.reward.w_relation);
        c.reward.N = get_or<double>(j, "N", c.reward.N);
        c.reward.std_epsilon = get_or<double>(j, "std_epsilon", c.reward.std_epsilon);
        c.seed = get_or<std::uint64_t>(j, "seed", c.seed);
        c.K = get_or<int>(j, "K", c.K);
        if (j.contains("built_at")) c.built_at = j.at("built_at").get<std::string>();
    } catch (const json::exception& e) {
        throw ValidationError(std::string("bad config value: ") + e.what());
    }
    return c;
}

RunConfig RunConfig::load(const fs::path& path) {
    return from_json(parse_json_arg(read_file(path), "config " + path.string()));
}

std::string format_real(double v) {
    char buf[64];
    auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
    std::string s(buf, end);
    if (s.find_first_of(".eEn") == std::string::npos) s += ".0";  // 'n' covers inf/nan
    return s;
}

std::string format_reals(const std::vector<double>& v) {
    std::string s = "[";
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) s += ", ";
        s += format_real(v[i]);
    }
    return s + "]";
}

ScoringService::ScoringService(dictionary::KeywordDictionary dict, std::vector<Episode> episodes,
                               reward::RewardConfig cfg)
    : dict_(std::move(dict)), cfg_(std::move(cfg)) {
    for (auto& ep : episodes) episodes_.emplace(ep.id, std::move(ep));
}

json ScoringService::score(const json& body) const {
    if (!body.is_object()) throw ValidationError("body must be a JSON object");
    auto raw = body.find("raw_text");
    if (raw == body.end() || !raw->is_string()) throw ValidationError("missing string field \"raw_text\"");
    Episode ep;
    if (auto inline_ep = body.find("episode"); inline_ep != body.end()) {
        try {
            ep = episode_from_json(*inline_ep, "inline");
        } catch (const std::exception& e) {
            throw ValidationError(std::string("bad episode: ") + e.what());
        }
    } else if (auto id = body.find("episode_id"); id != body.end() && id->is_string()) {
        auto it = episodes_.find(id->get<std::string>());
        if (it == episodes_.end()) throw ValidationError("unknown episode id \"" + id->get<std::string>() + "\"");
        ep = it->second;
    } else {
        throw ValidationError("body needs \"episode_id\" or \"episode\"");
    }
    const auto output = llm::parse_model_output(raw->get<std::string>());
    auto j = reward::to_json(reward::combined_reward(output, ep, dict_, cfg_));
    j["episode_id"] = ep.id;
    j["decision"] = to_string(output.decision);
    return j;
}

json ScoringService::advantages(const json& body) const {
    if (!body.is_object() || !body.contains("rewards")) throw ValidationError("body needs \"rewards\"");
    const auto rewards = to_reals(body.at("rewards"), "rewards");
    if (rewards.empty()) throw ValidationError("rewards must not be empty");
    return {{"advantages", reward::group_advantages(rewards, cfg_)}};
}

// ---------------------------------------------------------------------------

namespace {

struct Shared {
    std::string config_path;
    bool verbose = false;
    bool quiet = false;
};

// Flags that may override config-file values. Each records whether it was
// given so unset flags leave the file's value alone.
struct ConfigFlags {
    std::vector<std::function<void(RunConfig&)>> appliers;

    template <class T>
    void add(CLI::App* app, const std::string& name, const std::string& help, std::function<void(RunConfig&, T)> set) {
        auto value = std::make_shared<T>();
        auto* opt = app->add_option(name, *value, help);
        appliers.push_back([opt, value, set](RunConfig& c) {
            if (opt->count() > 0) set(c, *value);
        });
    }
};

void add_llm_flags(CLI::App* app, ConfigFlags& f) {
    f.add<std::string>(app, "--endpoint", "Chat-completions URL, or replay:<rules.json> for canned responses",
                       [](RunConfig& c, std::string v) { c.endpoint = std::move(v); });
    f.add<std::string>(app, "--model", "Model id sent with each request",
                       [](RunConfig& c, std::string v) { c.model_id = std::move(v); });
    f.add<double>(app, "--temperature", "Sampling temperature", [](RunConfig& c, double v) { c.temperature = v; });
    f.add<int>(app, "--max-tokens", "Completion token limit", [](RunConfig& c, int v) { c.max_tokens = v; });
    f.add<int>(app, "--max-in-flight", "Concurrent requests", [](RunConfig& c, int v) { c.policy.max_in_flight = v; });
    f.add<int>(app, "--max-attempts", "Attempts per request including the first",
               [](RunConfig& c, int v) { c.policy.retry.max_attempts = v; });
    f.add<std::int64_t>(app, "--timeout-ms", "Per-request timeout",
                        [](RunConfig& c, std::int64_t v) { c.policy.timeout = std::chrono::milliseconds(v); });
    f.add<std::int64_t>(app, "--backoff-ms", "Base retry backoff",
                        [](RunConfig& c, std::int64_t v) { c.policy.retry.base_backoff = std::chrono::milliseconds(v); });
}

void add_reward_flags(CLI::App* app, ConfigFlags& f) {
    f.add<double>(app, "--w-entity", "Entity keyword weight (default 0.4)",
                  [](RunConfig& c, double v) { c.reward.w_entity = v; });
    f.add<double>(app, "--w-relation", "Relation keyword weight (default 1.0)",
                  [](RunConfig& c, double v) { c.reward.w_relation = v; });
    f.add<double>(app, "--length-norm", "Length normalizer N (default 5)", [](RunConfig& c, double v) { c.reward.N = v; });
    f.add<double>(app, "--std-epsilon", "Zero-variance threshold for advantages",
                  [](RunConfig& c, double v) { c.reward.std_epsilon = v; });
}

RunConfig resolve_config(const Shared& shared, const ConfigFlags& flags) {
    RunConfig cfg = shared.config_path.empty() ? RunConfig{} : RunConfig::load(shared.config_path);
    if (const char* key = std::getenv(kApiKeyEnv); key && *key) cfg.api_key = key;
    for (const auto& apply : flags.appliers) apply(cfg);
    try {
        cfg.policy.validate();
        cfg.reward.validate();
    } catch (const std::invalid_argument& e) {
        throw ValidationError(e.what());
    }
    if (cfg.max_tokens < 1) throw ValidationError("max_tokens must be >= 1");
    if (cfg.temperature < 0) throw ValidationError("temperature must be >= 0");
    return cfg;
}

std::shared_ptr<llm::Transport> transport_for(const RunConfig& cfg) {
    if (cfg.endpoint.rfind("replay:", 0) == 0 && !fs::exists(cfg.endpoint.substr(7)))
        throw ValidationError("replay file not found: " + cfg.endpoint.substr(7));
    return llm::make_transport(cfg.endpoint, cfg.api_key);
}

void log_usage(const llm::Usage& u) {
    log::info("tokens: prompt " + std::to_string(u.prompt_tokens) + ", completion " +
              std::to_string(u.completion_tokens) + ", total " + std::to_string(u.total_tokens));
}

std::string jsonl(const std::vector<json>& rows) {
    std::string s;
    for (const auto& r : rows) s += r.dump() + "\n";
    return s;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"rekey: keyword-dictionary rewards for one-shot relation extraction"};
    app.require_subcommand(1);
    app.set_version_flag("--version", "rekey 1.0.0");
    Shared shared;
    app.add_option("--config", shared.config_path, "JSON config file (flags override it)")->check(CLI::ExistingFile);
    app.add_flag("-v,--verbose", shared.verbose, "Debug logging");
    app.add_flag("-q,--quiet", shared.quiet, "Errors only");

    ConfigFlags flags;
    std::function<int()> action;

    // sample-train -------------------------------------------------------------
    struct {
        std::string input, output, stats, quotas;
        std::size_t K = 10;
        std::optional<std::size_t> no_relation_total, cross;
        std::uint64_t seed = 0;
    } st;
    auto* c_st = app.add_subcommand("sample-train", "Build a training set: capped positives plus sampled negatives");
    c_st->add_option("--input", st.input, "Episode JSONL")->required()->check(CLI::ExistingFile);
    c_st->add_option("--output", st.output, "Sampled episode JSONL")->required();
    c_st->add_option("--stats", st.stats, "Write corpus statistics JSON here");
    c_st->add_option("--K", st.K, "Maximum positives per label");
    c_st->add_option("--quotas", st.quotas, "JSON file mapping label to no_relation negative count")
        ->check(CLI::ExistingFile);
    c_st->add_option("--no-relation-total", st.no_relation_total, "no_relation negatives, apportioned by label");
    c_st->add_option("--cross", st.cross, "Cross-label negatives, apportioned by label");
    c_st->add_option("--seed", st.seed, "Sampling seed");
    c_st->callback([&] {
        action = [&] {
            const auto split = sampler::split_corpus(load_episodes(st.input));
            // Without explicit counts the sampled set keeps the corpus's class mix.
            auto cfg = sampler::proportional_config(split, st.K, st.seed);
            if (!st.quotas.empty()) {
                const auto j = parse_json_arg(read_file(st.quotas), "quotas file");
                if (!j.is_object()) throw ValidationError("quotas file must map labels to counts");
                cfg.quotas.clear();
                for (const auto& [label, n] : j.items()) {
                    if (!n.is_number_unsigned()) throw ValidationError("quota for " + label + " must be a count");
                    cfg.quotas[RelationLabel(label)] = n.get<std::size_t>();
                }
            }
            if (st.no_relation_total) cfg.no_relation_total = st.no_relation_total;
            if (st.cross) cfg.cross_sample_count = *st.cross;
            const auto sampled = sampler::sample_training_set(split, cfg);
            save_episodes(st.output, sampled);
            const auto stats = sampler::to_json(sampler::corpus_stats(sampled)).dump(2) + "\n";
            if (!st.stats.empty()) write_file(st.stats, stats);
            log::info("sampled " + std::to_string(sampled.size()) + " episodes");
            return kExitOk;
        };
    });

    // sample-test --------------------------------------------------------------
    struct {
        std::string input, output, stats;
        std::size_t size = 1000;
        std::uint64_t seed = 0;
    } ss;
    auto* c_ss = app.add_subcommand("sample-test", "Stratified test-set sample preserving the corpus distribution");
    c_ss->add_option("--input", ss.input, "Episode JSONL")->required()->check(CLI::ExistingFile);
    c_ss->add_option("--output", ss.output, "Sampled episode JSONL")->required();
    c_ss->add_option("--size", ss.size, "Target size");
    c_ss->add_option("--stats", ss.stats, "Write corpus statistics JSON here");
    c_ss->add_option("--seed", ss.seed, "Sampling seed");
    c_ss->callback([&] {
        action = [&] {
            const auto eps = load_episodes(ss.input);
            if (ss.size > eps.size())
                throw ValidationError("--size " + std::to_string(ss.size) + " exceeds corpus size " +
                                      std::to_string(eps.size()));
            const auto sampled = sampler::sample_test_set(eps, ss.size, ss.seed);
            save_episodes(ss.output, sampled);
            if (!ss.stats.empty())
                write_file(ss.stats, sampler::to_json(sampler::corpus_stats(sampled)).dump(2) + "\n");
            return kExitOk;
        };
    });

    // infer --------------------------------------------------------------------
    struct {
        std::string episodes, output;
    } inf;
    auto* c_inf = app.add_subcommand("infer", "Run a prompt template over episodes; output doubles as a checkpoint");
    c_inf->add_option("--episodes", inf.episodes, "Episode JSONL")->required()->check(CLI::ExistingFile);
    c_inf->add_option("--output", inf.output, "Output JSONL of {id, raw_text, decision}; resumed if present")
        ->required();
    add_llm_flags(c_inf, flags);
    flags.add<std::string>(c_inf, "--template", "Prompt template id (default cogre)",
                           [](RunConfig& c, std::string v) { c.template_name = std::move(v); });
    c_inf->callback([&] {
        action = [&] {
            const auto cfg = resolve_config(shared, flags);
            require(cfg.endpoint, "--endpoint", "infer");
            require(cfg.model_id, "--model", "infer");
            const auto tmpl = resolve_template(cfg.template_name);
            const auto episodes = load_episodes(inf.episodes);
            llm::ChatClient client(transport_for(cfg), cfg.policy, cfg.seed);
            llm::InferenceOptions opts;
            opts.template_name = tmpl;
            opts.defaults = request_defaults(cfg, cfg.model_id);
            opts.checkpoint = fs::path(inf.output);
            opts.on_progress = [](const llm::InferenceProgress& p) {
                log::debug("progress " + std::to_string(p.done) + "/" + std::to_string(p.total));
            };
            const auto run = llm::run_inference(episodes, client, opts);
            // Rewrite in input order; failed items are left out so a rerun retries them.
            std::vector<json> rows;
            for (const auto& item : run.items) {
                if (item.output.error) continue;
                rows.push_back({{"id", item.episode.id},
                                {"raw_text", item.output.raw_text},
                                {"decision", to_string(item.output.decision)}});
            }
            write_file(inf.output, jsonl(rows));
            log_usage(run.usage);
            log::info("completed " + std::to_string(rows.size()) + "/" + std::to_string(episodes.size()) +
                      " episodes (" + std::to_string(run.resumed) + " resumed, " + std::to_string(run.failures) +
                      " failed)");
            return run.failures == 0 ? kExitOk : kExitRuntime;
        };
    });

    // build-dict ---------------------------------------------------------------
    struct {
        std::string train, output, cues;
    } bd;
    auto* c_bd = app.add_subcommand("build-dict", "Harvest a relational keyword dictionary from a training set");
    c_bd->add_option("--train", bd.train, "Training episode JSONL")->required()->check(CLI::ExistingFile);
    c_bd->add_option("--output", bd.output, "Dictionary JSON")->required();
    c_bd->add_option("--no-relation-cues", bd.cues, "JSON array of extra cue phrases for no_relation")
        ->check(CLI::ExistingFile);
    add_llm_flags(c_bd, flags);
    flags.add<std::string>(c_bd, "--extractor-model", "Model id for keyword extraction (defaults to --model)",
                           [](RunConfig& c, std::string v) { c.extractor_model_id = std::move(v); });
    flags.add<std::string>(c_bd, "--template", "Template the vanilla model answers with (default cogre)",
                           [](RunConfig& c, std::string v) { c.template_name = std::move(v); });
    flags.add<int>(c_bd, "--K", "Good cases per label, 1..5 (default 5)", [](RunConfig& c, int v) { c.K = v; });
    flags.add<std::uint64_t>(c_bd, "--seed", "Sampling seed", [](RunConfig& c, std::uint64_t v) { c.seed = v; });
    flags.add<std::string>(c_bd, "--built-at", "Timestamp recorded in the dictionary",
                           [](RunConfig& c, std::string v) { c.built_at = std::move(v); });
    c_bd->callback([&] {
        action = [&] {
            auto cfg = resolve_config(shared, flags);
            require(cfg.endpoint, "--endpoint", "build-dict");
            require(cfg.model_id, "--model", "build-dict");
            if (cfg.extractor_model_id.empty()) cfg.extractor_model_id = cfg.model_id;
            const auto tmpl = resolve_template(cfg.template_name);
            dictionary::BuildRequest req;
            req.config.K = cfg.K;
            req.config.seed = cfg.seed;
            req.config.max_parallel_labels = cfg.policy.max_in_flight;
            if (!bd.cues.empty()) {
                const auto j = parse_json_arg(read_file(bd.cues), "cue file");
                if (!j.is_array()) throw ValidationError("cue file must be a JSON array of strings");
                for (const auto& c : j) req.config.no_relation_cues.push_back(c.get<std::string>());
            }
            try {
                req.config.validate();
            } catch (const std::invalid_argument& e) {
                throw ValidationError(e.what());
            }
            req.train = load_episodes(bd.train);

            llm::ChatClient client(transport_for(cfg), cfg.policy, cfg.seed);
            // Vanilla answers for every positive pair, fetched concurrently up front.
            llm::InferenceOptions opts;
            opts.template_name = tmpl;
            opts.defaults = request_defaults(cfg, cfg.model_id);
            const auto run = llm::run_inference(dictionary::collect_positive_pairs(req.train), client, opts);
            auto answers = std::make_shared<std::map<std::string, ModelOutput>>();
            for (const auto& item : run.items) (*answers)[item.episode.id] = item.output;

            req.infer = [answers](const Episode& ep) { return answers->at(ep.id); };
            const auto extract_defaults = request_defaults(cfg, cfg.extractor_model_id);
            req.extract = [&client, extract_defaults](const std::string& prompt) {
                auto r = extract_defaults;
                r.messages = {{"user", prompt}};
                return client.complete(r).content;
            };
            req.vanilla_model_id = cfg.model_id;
            req.extractor_model_id = cfg.extractor_model_id;
            req.built_at = resolve_built_at(cfg.built_at);

            const auto report = dictionary::build_dictionary(req);
            write_file(bd.output, dictionary::to_canonical_string(report.dictionary));
            log::info("dictionary: " + std::to_string(report.dictionary.entries.size()) + " labels from " +
                      std::to_string(report.good_cases) + " good cases (" + std::to_string(report.positive_pairs) +
                      " positive pairs, " + std::to_string(report.unparseable) + " unparseable)");
            if (!report.dictionary.meta.degraded_labels.empty())
                log::warn(std::to_string(report.dictionary.meta.degraded_labels.size()) +
                          " labels fell back to label tokens");
            return kExitOk;
        };
    });

    // score --------------------------------------------------------------------
    struct {
        std::string dict, episodes, outputs, output;
    } sc;
    auto* c_sc = app.add_subcommand("score", "Reward breakdown per model output");
    c_sc->add_option("--dict", sc.dict, "Dictionary JSON")->required()->check(CLI::ExistingFile);
    c_sc->add_option("--episodes", sc.episodes, "Episode JSONL")->required()->check(CLI::ExistingFile);
    c_sc->add_option("--outputs", sc.outputs, "JSONL of {episode_id, raw_text}")->required()->check(CLI::ExistingFile);
    c_sc->add_option("--output", sc.output, "Reward JSONL (default stdout)");
    add_reward_flags(c_sc, flags);
    c_sc->callback([&] {
        action = [&] {
            const auto cfg = resolve_config(shared, flags);
            const auto dict = dictionary::load_dictionary(sc.dict);
            const auto pairs = join_predictions(load_episodes(sc.episodes), load_outputs(sc.outputs), sc.outputs);
            std::vector<json> rows;
            for (const auto& [ep, output] : pairs) {
                json row{{"episode_id", ep.id}, {"decision", to_string(output.decision)}};
                row.update(reward::to_json(reward::combined_reward(output, ep, dict, cfg.reward)));
                rows.push_back(std::move(row));
            }
            emit(sc.output, jsonl(rows), out);
            return kExitOk;
        };
    });

    // advantages ---------------------------------------------------------------
    struct {
        std::string rewards, input, output;
    } adv;
    auto* c_adv = app.add_subcommand("advantages", "Group-relative advantages");
    auto* o_rewards = c_adv->add_option("--rewards", adv.rewards, "JSON array of one group's rewards");
    auto* o_input = c_adv->add_option("--input", adv.input, "Reward JSONL; groups are rows sharing episode_id")
                        ->check(CLI::ExistingFile);
    o_rewards->excludes(o_input);
    c_adv->add_option("--output", adv.output, "Advantage JSONL for --input (default stdout)");
    add_reward_flags(c_adv, flags);
    c_adv->callback([&] {
        action = [&] {
            const auto cfg = resolve_config(shared, flags);
            if (!adv.rewards.empty()) {
                const auto rewards = to_reals(parse_json_arg(adv.rewards, "--rewards"), "--rewards");
                if (rewards.empty()) throw ValidationError("--rewards must not be empty");
                out << format_reals(reward::group_advantages(rewards, cfg.reward)) << "\n";
                return kExitOk;
            }
            if (adv.input.empty()) throw ValidationError("advantages requires --rewards or --input");
            struct Row {
                std::string id;
                double reward;
            };
            std::vector<Row> rows;
            std::vector<LineIssue> issues;
            const auto lines = split_lines(read_file(adv.input));
            for (std::size_t i = 0; i < lines.size(); ++i) {
                if (trim(lines[i]).empty()) continue;
                try {
                    const auto j = json::parse(lines[i]);
                    const auto r = j.contains("total") ? j.at("total") : j.at("reward");
                    rows.push_back({j.at("episode_id").get<std::string>(), r.get<double>()});
                } catch (const json::exception& e) {
                    issues.push_back({i + 1, e.what()});
                }
            }
            if (!issues.empty()) throw LoadError(adv.input, std::move(issues));
            std::map<std::string, std::vector<std::size_t>> groups;
            for (std::size_t i = 0; i < rows.size(); ++i) groups[rows[i].id].push_back(i);
            std::vector<double> advantages(rows.size());
            for (const auto& [_, idx] : groups) {
                std::vector<double> g;
                for (auto i : idx) g.push_back(rows[i].reward);
                const auto a = reward::group_advantages(g, cfg.reward);
                for (std::size_t k = 0; k < idx.size(); ++k) advantages[idx[k]] = a[k];
            }
            std::vector<json> out_rows;
            for (std::size_t i = 0; i < rows.size(); ++i)
                out_rows.push_back({{"episode_id", rows[i].id}, {"reward", rows[i].reward}, {"advantage", advantages[i]}});
            emit(adv.output, jsonl(out_rows), out);
            return kExitOk;
        };
    });

    // evaluate -----------------------------------------------------------------
    struct {
        std::string episodes, outputs, output;
    } ev;
    auto* c_ev = app.add_subcommand("evaluate", "Precision, recall and F1 on the Yes class");
    c_ev->add_option("--episodes", ev.episodes, "Episode JSONL")->required()->check(CLI::ExistingFile);
    c_ev->add_option("--outputs", ev.outputs, "JSONL of {episode_id, raw_text}")->required()->check(CLI::ExistingFile);
    c_ev->add_option("--output", ev.output, "Metrics JSON (default stdout)");
    c_ev->callback([&] {
        action = [&] {
            const auto pairs = join_predictions(load_episodes(ev.episodes), load_outputs(ev.outputs), ev.outputs);
            emit(ev.output, eval::to_json(eval::score_predictions(pairs)).dump(2) + "\n", out);
            return kExitOk;
        };
    });

    // human-eval-export --------------------------------------------------------
    struct {
        std::string episodes, outputs, output;
        std::size_t per_category = 10;
        std::uint64_t seed = 0;
    } he;
    auto* c_he = app.add_subcommand("human-eval-export", "Blinded CSV of explanations sampled per confusion category");
    c_he->add_option("--episodes", he.episodes, "Episode JSONL")->required()->check(CLI::ExistingFile);
    c_he->add_option("--outputs", he.outputs, "JSONL of {episode_id, raw_text}")->required()->check(CLI::ExistingFile);
    c_he->add_option("--output", he.output, "CSV path")->required();
    c_he->add_option("--per-category", he.per_category, "Items per category")->check(CLI::PositiveNumber);
    c_he->add_option("--seed", he.seed, "Sampling seed");
    c_he->callback([&] {
        action = [&] {
            const auto pairs = join_predictions(load_episodes(he.episodes), load_outputs(he.outputs), he.outputs);
            const auto sample = eval::sample_for_human_eval(pairs, he.per_category, he.seed);
            write_file(he.output, eval::to_csv(sample.items));
            log::info("exported " + std::to_string(sample.items.size()) + " items");
            return kExitOk;
        };
    });

    // human-eval-aggregate -----------------------------------------------------
    struct {
        std::string input, second, output;
    } ha;
    auto* c_ha = app.add_subcommand("human-eval-aggregate", "Per-category totals, and kappa given a second rater");
    c_ha->add_option("--input", ha.input, "Scored CSV")->required()->check(CLI::ExistingFile);
    c_ha->add_option("--second", ha.second, "Second rater's scored CSV over the same items")->check(CLI::ExistingFile);
    c_ha->add_option("--output", ha.output, "Report JSON (default stdout)");
    c_ha->callback([&] {
        action = [&] {
            const auto items = eval::load_csv(ha.input);
            json report;
            json totals = json::object();
            for (const auto& [c, n] : eval::aggregate_human_scores(items)) totals[std::string(to_string(c))] = n;
            report["totals"] = totals;
            report["items"] = items.size();
            if (!ha.second.empty()) {
                const auto other = eval::load_csv(ha.second);
                eval::aggregate_human_scores(other);  // same validation as the first rater
                std::map<std::string, int> by_id;
                for (const auto& it : other) by_id[it.episode_id] = *it.score;
                std::vector<int> a, b;
                for (const auto& it : items) {
                    auto m = by_id.find(it.episode_id);
                    if (m == by_id.end())
                        throw ValidationError("item " + it.episode_id + " missing from " + ha.second);
                    a.push_back(*it.score);
                    b.push_back(m->second);
                }
                if (other.size() != items.size()) throw ValidationError("rater files cover different items");
                report["agreement"] = eval::to_json(eval::cohen_kappa(a, b));
            }
            emit(ha.output, report.dump(2) + "\n", out);
            return kExitOk;
        };
    });

    // serve --------------------------------------------------------------------
    struct {
        std::string dict, episodes, host = "127.0.0.1";
        int port = 8080;
    } sv;
    auto* c_sv = app.add_subcommand("serve", "Local HTTP scoring: POST /score and POST /advantages");
    c_sv->add_option("--dict", sv.dict, "Dictionary JSON")->required()->check(CLI::ExistingFile);
    c_sv->add_option("--episodes", sv.episodes, "Episode JSONL for lookups by episode_id")->check(CLI::ExistingFile);
    c_sv->add_option("--host", sv.host, "Bind address");
    c_sv->add_option("--port", sv.port, "Bind port (0 picks a free one)")->check(CLI::Range(0, 65535));
    add_reward_flags(c_sv, flags);
    c_sv->callback([&] {
        action = [&] {
            const auto cfg = resolve_config(shared, flags);
            ScoringService service(dictionary::load_dictionary(sv.dict),
                                   sv.episodes.empty() ? std::vector<Episode>{} : load_episodes(sv.episodes),
                                   cfg.reward);
            httplib::Server server;
            auto handle = [](auto fn) {
                return [fn](const httplib::Request& req, httplib::Response& res) {
                    try {
                        res.set_content(fn(json::parse(req.body)).dump(), "application/json");
                    } catch (const json::parse_error& e) {
                        res.status = 400;
                        res.set_content(json{{"error", e.what()}}.dump(), "application/json");
                    } catch (const ValidationError& e) {
                        res.status = 400;
                        res.set_content(json{{"error", e.what()}}.dump(), "application/json");
                    } catch (const std::exception& e) {
                        res.status = 500;
                        res.set_content(json{{"error", e.what()}}.dump(), "application/json");
                    }
                };
            };
            server.Post("/score", handle([&](const json& b) { return service.score(b); }));
            server.Post("/advantages", handle([&](const json& b) { return service.advantages(b); }));
            int port = sv.port;
            if (port == 0) port = server.bind_to_any_port(sv.host);
            else if (!server.bind_to_port(sv.host, port)) port = -1;
            if (port < 0) throw std::runtime_error("cannot bind " + sv.host + ":" + std::to_string(sv.port));
            out << "listening on http://" << sv.host << ":" << port << std::endl;
            server.listen_after_bind();
            return kExitOk;
        };
    });

    // --------------------------------------------------------------------------
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitValidation;
    }

    log::set_level(shared.quiet ? log::Level::error : shared.verbose ? log::Level::debug : log::Level::info);
    try {
        return action();
    } catch (const ValidationError& e) {
        err << "error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const LoadError& e) {
        err << "error: " << e.what() << "\n";
        for (const auto& issue : e.issues()) err << "  " << e.path() << ":" << issue.line << ": " << issue.message << "\n";
        return kExitValidation;
    } catch (const dictionary::DictionaryError& e) {
        err << "error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const eval::ScoreError& e) {
        err << "error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
}

int run_cli(int argc, char** argv) {
    std::vector<std::string> args;
    for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
    return run_cli(args, std::cout, std::cerr);
}

}  // namespace rekey::cli
