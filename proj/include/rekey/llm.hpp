#pragma once
// Prompt templates, completion parsing and a chat-completions client with a
// pluggable transport.

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "json.hpp"
#include "rekey/core.hpp"
#include "rekey/rng.hpp"

namespace rekey::llm {

// ---------------------------------------------------------------------------
// Templates

enum class TemplateName {
    cogre,
    direct,
    simple_reasoning,
    sumask_one_prompt,
    keyword_extraction,
    ablate_no_chunking,
    ablate_no_reasoning,
    ablate_no_keywords,
};

struct PromptTemplate {
    TemplateName name;
    std::string_view id;  // e.g. "cogre", "sumask_one_prompt"
    std::string_view body;
    std::vector<std::string_view> placeholders;
};

using Bindings = std::map<std::string, std::string, std::less<>>;

class PromptError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class MissingBinding : public PromptError {
public:
    explicit MissingBinding(std::string placeholder);
    const std::string& placeholder() const noexcept { return placeholder_; }

private:
    std::string placeholder_;
};

const std::vector<PromptTemplate>& all_templates();
const PromptTemplate& get_template(TemplateName name);
std::optional<TemplateName> parse_template_name(std::string_view id);

// Single-pass literal substitution of {placeholder} markers. Braces that do not
// name a declared placeholder, and anything inside bound values, pass through.
std::string substitute(std::string_view body, const std::vector<std::string_view>& placeholders,
                       const Bindings& bindings);

std::string render_prompt(TemplateName name, const Bindings& bindings);
// Throws PromptError for an unknown template id.
std::string render_prompt(std::string_view template_id, const Bindings& bindings);

// Binds the sentence/subject/object placeholders of an inference template.
Bindings episode_bindings(const Episode& ep, TemplateName name);

// ---------------------------------------------------------------------------
// Completion parsing

struct DecisionScan {
    Decision decision = Decision::Unparseable;
    std::optional<std::size_t> line;  // index into split_lines(raw)
};

DecisionScan scan_decision(std::string_view raw);
Decision parse_decision(std::string_view raw);

std::pair<std::optional<std::string>, std::optional<std::string>> parse_summaries(std::string_view raw);

ModelOutput parse_model_output(std::string raw);

// ---------------------------------------------------------------------------
// Client

struct ChatMessage {
    std::string role;
    std::string content;
};

struct ChatRequest {
    std::string model_id;
    std::vector<ChatMessage> messages;
    double temperature = 0.0;
    int max_tokens = 1024;
    std::optional<std::uint64_t> seed;
};

nlohmann::json to_json(const ChatRequest& req);

struct Usage {
    std::int64_t prompt_tokens = 0;
    std::int64_t completion_tokens = 0;
    std::int64_t total_tokens = 0;

    Usage& operator+=(const Usage& o) {
        prompt_tokens += o.prompt_tokens;
        completion_tokens += o.completion_tokens;
        total_tokens += o.total_tokens;
        return *this;
    }
};

struct ChatResponse {
    std::string content;
    Usage usage;
    std::chrono::milliseconds latency{0};
    int attempts = 0;
};

// Parses a chat-completions response body; throws MalformedResponse.
ChatResponse parse_chat_response(std::string_view body);

struct RetryPolicy {
    int max_attempts = 4;
    std::chrono::milliseconds base_backoff{500};
    double jitter = 0.1;  // fraction of the delay added uniformly at random
};

struct ClientPolicy {
    int max_in_flight = 4;
    std::chrono::milliseconds timeout{120'000};
    RetryPolicy retry;

    void validate() const;
};

class LlmError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};
class TransportError : public LlmError {
public:
    using LlmError::LlmError;
};
class AuthError : public LlmError {
public:
    using LlmError::LlmError;
};
class MalformedResponse : public LlmError {
public:
    using LlmError::LlmError;
};
class HttpStatusError : public LlmError {
public:
    HttpStatusError(int status, const std::string& body);
    int status() const noexcept { return status_; }

private:
    int status_;
};
class RetriesExhausted : public LlmError {
public:
    RetriesExhausted(int attempts, const std::string& last_error);
    int attempts() const noexcept { return attempts_; }

private:
    int attempts_;
};

struct HttpResult {
    int status = 0;
    std::string body;
};

// Sends one serialized request. Throws TransportError when no HTTP response was
// obtained. Implementations must be safe to call from several threads.
class Transport {
public:
    virtual ~Transport() = default;
    virtual HttpResult post(const std::string& body, std::chrono::milliseconds timeout) = 0;
};

// POSTs to an OpenAI-compatible /chat/completions URL.
class HttpTransport final : public Transport {
public:
    HttpTransport(std::string url, std::string api_key);
    HttpResult post(const std::string& body, std::chrono::milliseconds timeout) override;

private:
    std::string scheme_host_port_;
    std::string path_;
    std::string api_key_;
};

// Answers from a canned rule file:
//   {"rules": [{"contains": "...", "response": "..."}], "default": "..."}
// The first rule whose "contains" occurs in the last message wins. Used for
// offline dry runs and tests.
class ReplayTransport final : public Transport {
public:
    struct Rule {
        std::string contains;
        std::string response;
    };

    ReplayTransport(std::vector<Rule> rules, std::optional<std::string> fallback);
    static std::shared_ptr<ReplayTransport> from_file(const std::filesystem::path& path);

    HttpResult post(const std::string& body, std::chrono::milliseconds timeout) override;

private:
    std::vector<Rule> rules_;
    std::optional<std::string> fallback_;
};

// Wraps content in a minimal chat-completions response body.
std::string make_completion_body(std::string_view content, const Usage& usage = {});

// Builds the transport for an endpoint string: "replay:<file>" selects
// ReplayTransport, anything else is treated as an HTTP(S) URL.
std::shared_ptr<Transport> make_transport(const std::string& endpoint, const std::string& api_key);

using Sleeper = std::function<void(std::chrono::milliseconds)>;

class ChatClient {
public:
    ChatClient(std::shared_ptr<Transport> transport, ClientPolicy policy, std::uint64_t jitter_seed = 0,
               Sleeper sleeper = {});

    // Retries transport errors and HTTP 429/5xx with exponential backoff.
    ChatResponse complete(const ChatRequest& req);

    const ClientPolicy& policy() const noexcept { return policy_; }

    // Delay before retry number `retry` (1-based), before jitter.
    std::chrono::milliseconds base_delay(int retry) const;

private:
    std::shared_ptr<Transport> transport_;
    ClientPolicy policy_;
    Sleeper sleeper_;
    std::mutex rng_mutex_;
    Rng jitter_rng_;
};

ChatResponse chat_complete(Transport& transport, const ChatRequest& req, const ClientPolicy& policy,
                           Sleeper sleeper = {});

// ---------------------------------------------------------------------------
// Batch inference

struct InferenceItem {
    Episode episode;
    ModelOutput output;
    bool resumed = false;
};

struct InferenceProgress {
    std::size_t done = 0;
    std::size_t total = 0;
    Usage usage;
};

struct InferenceOptions {
    TemplateName template_name = TemplateName::cogre;
    ChatRequest defaults;  // model, temperature, max_tokens; messages are ignored
    std::optional<std::filesystem::path> checkpoint;
    std::function<void(const InferenceProgress&)> on_progress;
};

struct InferenceRun {
    std::vector<InferenceItem> items;  // input order
    Usage usage;
    std::size_t failures = 0;
    std::size_t resumed = 0;
};

// Renders, calls and parses each episode with at most policy.max_in_flight
// concurrent requests. Item failures become Unparseable outputs carrying the
// error; auth and prompt errors abort. Completed items are appended to the
// checkpoint file, and ids already present there are not requested again.
InferenceRun run_inference(const std::vector<Episode>& episodes, ChatClient& client, const InferenceOptions& opts);

// Checkpoint JSONL: {"id": ..., "raw_text": ...} per line; later lines win.
std::map<std::string, std::string> read_checkpoint(const std::filesystem::path& path);

}  // namespace rekey::llm
