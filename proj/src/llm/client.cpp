#include <atomic>
#include <cmath>
#include <fstream>
#include <thread>

#include "httplib.h"
#include "rekey/llm.hpp"
#include "rekey/log.hpp"

namespace rekey::llm {

namespace {

std::string truncate(std::string_view s, std::size_t n) {
    return s.size() <= n ? std::string(s) : std::string(s.substr(0, n)) + "...";
}

std::int64_t rough_tokens(std::string_view text) { return static_cast<std::int64_t>(whitespace_word_count(text)); }

}  // namespace

HttpStatusError::HttpStatusError(int status, const std::string& body)
    : LlmError("HTTP " + std::to_string(status) + ": " + truncate(body, 200)), status_(status) {}

RetriesExhausted::RetriesExhausted(int attempts, const std::string& last_error)
    : LlmError("gave up after " + std::to_string(attempts) + " attempt(s): " + last_error), attempts_(attempts) {}

nlohmann::json to_json(const ChatRequest& req) {
    nlohmann::json messages = nlohmann::json::array();
    for (const auto& m : req.messages) messages.push_back({{"role", m.role}, {"content", m.content}});
    nlohmann::json j{{"model", req.model_id},
                     {"messages", std::move(messages)},
                     {"temperature", req.temperature},
                     {"max_tokens", req.max_tokens}};
    if (req.seed) j["seed"] = *req.seed;
    return j;
}

ChatResponse parse_chat_response(std::string_view body) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(body);
    } catch (const nlohmann::json::parse_error& e) {
        throw MalformedResponse(std::string("response is not JSON: ") + e.what());
    }
    ChatResponse r;
    try {
        const auto& choices = j.at("choices");
        if (!choices.is_array() || choices.empty()) throw MalformedResponse("response has no choices");
        const auto& content = choices.at(0).at("message").at("content");
        if (!content.is_string()) throw MalformedResponse("choices[0].message.content is not a string");
        r.content = content.get<std::string>();
        if (auto u = j.find("usage"); u != j.end() && u->is_object()) {
            r.usage.prompt_tokens = u->value("prompt_tokens", std::int64_t{0});
            r.usage.completion_tokens = u->value("completion_tokens", std::int64_t{0});
            r.usage.total_tokens = u->value("total_tokens", r.usage.prompt_tokens + r.usage.completion_tokens);
        }
    } catch (const nlohmann::json::exception& e) {
        throw MalformedResponse(std::string("unexpected response shape: ") + e.what());
    }
    return r;
}

std::string make_completion_body(std::string_view content, const Usage& usage) {
    nlohmann::json j{{"choices", nlohmann::json::array({{{"index", 0},
                                                         {"message", {{"role", "assistant"}, {"content", content}}},
                                                         {"finish_reason", "stop"}}})},
                     {"usage",
                      {{"prompt_tokens", usage.prompt_tokens},
                       {"completion_tokens", usage.completion_tokens},
                       {"total_tokens", usage.total_tokens}}}};
    return j.dump();
}

void ClientPolicy::validate() const {
    if (max_in_flight < 1) throw std::invalid_argument("max_in_flight must be >= 1");
    if (retry.max_attempts < 1) throw std::invalid_argument("retry.max_attempts must be >= 1");
    if (retry.base_backoff.count() < 0) throw std::invalid_argument("retry.base_backoff must be >= 0");
    if (retry.jitter < 0) throw std::invalid_argument("retry.jitter must be >= 0");
    if (timeout.count() <= 0) throw std::invalid_argument("timeout must be positive");
}

// ---------------------------------------------------------------------------

HttpTransport::HttpTransport(std::string url, std::string api_key) : api_key_(std::move(api_key)) {
    const auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) throw std::invalid_argument("endpoint must be an http(s) URL: " + url);
    const auto path_start = url.find('/', scheme_end + 3);
    scheme_host_port_ = url.substr(0, path_start);
    path_ = path_start == std::string::npos ? "/v1/chat/completions" : url.substr(path_start);
}

HttpResult HttpTransport::post(const std::string& body, std::chrono::milliseconds timeout) {
    httplib::Client cli(scheme_host_port_);
    if (!cli.is_valid()) throw TransportError("unsupported endpoint " + scheme_host_port_);
    const auto secs = std::chrono::duration_cast<std::chrono::seconds>(timeout);
    const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(timeout - secs);
    cli.set_connection_timeout(secs.count(), usecs.count());
    cli.set_read_timeout(secs.count(), usecs.count());
    cli.set_write_timeout(secs.count(), usecs.count());
    httplib::Headers headers;
    if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);
    auto res = cli.Post(path_, headers, body, "application/json");
    if (!res) throw TransportError("request to " + scheme_host_port_ + " failed: " + httplib::to_string(res.error()));
    return {res->status, res->body};
}

ReplayTransport::ReplayTransport(std::vector<Rule> rules, std::optional<std::string> fallback)
    : rules_(std::move(rules)), fallback_(std::move(fallback)) {}

std::shared_ptr<ReplayTransport> ReplayTransport::from_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::invalid_argument("cannot open replay file " + path.string());
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw std::invalid_argument("replay file " + path.string() + " is not JSON: " + e.what());
    }
    std::vector<Rule> rules;
    for (const auto& r : j.value("rules", nlohmann::json::array())) {
        rules.push_back({r.at("contains").get<std::string>(), r.at("response").get<std::string>()});
    }
    std::optional<std::string> fallback;
    if (auto d = j.find("default"); d != j.end() && d->is_string()) fallback = d->get<std::string>();
    return std::make_shared<ReplayTransport>(std::move(rules), std::move(fallback));
}

HttpResult ReplayTransport::post(const std::string& body, std::chrono::milliseconds) {
    nlohmann::json req;
    try {
        req = nlohmann::json::parse(body);
    } catch (const nlohmann::json::parse_error&) {
        return {400, R"({"error":"request is not JSON"})"};
    }
    std::string prompt;
    if (auto m = req.find("messages"); m != req.end() && m->is_array() && !m->empty())
        prompt = m->back().value("content", "");

    const std::string* reply = nullptr;
    for (const auto& r : rules_) {
        if (prompt.find(r.contains) != std::string::npos) {
            reply = &r.response;
            break;
        }
    }
    if (!reply && fallback_) reply = &*fallback_;
    if (!reply) return {404, R"({"error":"no replay rule matched"})"};

    Usage usage{rough_tokens(prompt), rough_tokens(*reply), 0};
    usage.total_tokens = usage.prompt_tokens + usage.completion_tokens;
    return {200, make_completion_body(*reply, usage)};
}

std::shared_ptr<Transport> make_transport(const std::string& endpoint, const std::string& api_key) {
    constexpr std::string_view kReplay = "replay:";
    if (endpoint.starts_with(kReplay)) return ReplayTransport::from_file(endpoint.substr(kReplay.size()));
    return std::make_shared<HttpTransport>(endpoint, api_key);
}

// ---------------------------------------------------------------------------

ChatClient::ChatClient(std::shared_ptr<Transport> transport, ClientPolicy policy, std::uint64_t jitter_seed,
                       Sleeper sleeper)
    : transport_(std::move(transport)), policy_(policy), sleeper_(std::move(sleeper)), jitter_rng_(jitter_seed) {
    policy_.validate();
    if (!transport_) throw std::invalid_argument("ChatClient needs a transport");
    if (!sleeper_) sleeper_ = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
}

std::chrono::milliseconds ChatClient::base_delay(int retry) const {
    const auto factor = std::ldexp(1.0, retry - 1);
    return std::chrono::milliseconds(
        static_cast<std::int64_t>(static_cast<double>(policy_.retry.base_backoff.count()) * factor));
}

ChatResponse ChatClient::complete(const ChatRequest& req) {
    const std::string body = to_json(req).dump();
    std::string last_error;
    const int max_attempts = policy_.retry.max_attempts;
    for (int attempt = 1; attempt <= max_attempts; ++attempt) {
        if (attempt > 1) {
            auto delay = base_delay(attempt - 1);
            if (policy_.retry.jitter > 0) {
                double u;
                {
                    std::lock_guard lock(rng_mutex_);
                    u = jitter_rng_.unit();
                }
                delay += std::chrono::milliseconds(
                    static_cast<std::int64_t>(static_cast<double>(delay.count()) * policy_.retry.jitter * u));
            }
            sleeper_(delay);
        }

        const auto start = std::chrono::steady_clock::now();
        HttpResult res;
        try {
            res = transport_->post(body, policy_.timeout);
        } catch (const TransportError& e) {
            last_error = e.what();
            log::debug("attempt " + std::to_string(attempt) + " failed: " + last_error);
            continue;
        }
        if (res.status >= 200 && res.status < 300) {
            auto out = parse_chat_response(res.body);
            out.latency = std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - start);
            out.attempts = attempt;
            return out;
        }
        if (res.status == 401 || res.status == 403) throw AuthError("HTTP " + std::to_string(res.status) + ": " + truncate(res.body, 200));
        if (res.status == 429 || res.status >= 500) {
            last_error = "HTTP " + std::to_string(res.status);
            log::debug("attempt " + std::to_string(attempt) + " got " + last_error);
            continue;
        }
        throw HttpStatusError(res.status, res.body);
    }
    throw RetriesExhausted(max_attempts, last_error);
}

ChatResponse chat_complete(Transport& transport, const ChatRequest& req, const ClientPolicy& policy, Sleeper sleeper) {
    // Non-owning view of the caller's transport.
    std::shared_ptr<Transport> view(&transport, [](Transport*) {});
    ChatClient client(std::move(view), policy, 0, std::move(sleeper));
    return client.complete(req);
}

}  // namespace rekey::llm
