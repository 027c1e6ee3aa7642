#pragma once
// Command-line front end. Each subcommand adapts one library operation.
// Exit status: 0 success, 1 validation error, 2 runtime failure.

#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "rekey/core.hpp"
#include "rekey/dictionary.hpp"
#include "rekey/llm.hpp"
#include "rekey/reward.hpp"

namespace rekey::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 1;
inline constexpr int kExitRuntime = 2;

// Bad flags, configuration or input files.
class ValidationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Settings shared by subcommands. Loaded from a JSON config file, then the
// REKEY_API_KEY environment variable, then command-line flags.
struct RunConfig {
    std::string endpoint;
    std::string api_key;
    std::string model_id;
    std::string extractor_model_id;
    std::string template_name = "cogre";
    double temperature = 0.0;
    int max_tokens = 1024;
    llm::ClientPolicy policy;
    reward::RewardConfig reward;
    std::uint64_t seed = 0;
    int K = 5;
    std::optional<std::string> built_at;

    // Unknown keys are rejected so typos surface early.
    static RunConfig from_json(const nlohmann::json& j);
    static RunConfig load(const std::filesystem::path& path);
};

inline constexpr const char* kApiKeyEnv = "REKEY_API_KEY";

// Formats a real the way the advantages command prints it: shortest
// round-trip form, always with a decimal point ("-1.0", "1.2247448713915889").
std::string format_real(double v);
std::string format_reals(const std::vector<double>& v);

// Request handling behind `serve`, usable without a socket.
class ScoringService {
public:
    ScoringService(dictionary::KeywordDictionary dict, std::vector<Episode> episodes, reward::RewardConfig cfg);

    // Body: {"raw_text", "episode_id"} or {"raw_text", "episode": {...}}.
    // Returns the reward breakdown; throws ValidationError on a bad body.
    nlohmann::json score(const nlohmann::json& body) const;
    // Body: {"rewards": [..]}. Returns {"advantages": [..]}.
    nlohmann::json advantages(const nlohmann::json& body) const;

private:
    dictionary::KeywordDictionary dict_;
    std::map<std::string, Episode> episodes_;
    reward::RewardConfig cfg_;
};

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run_cli(int argc, char** argv);

}  // namespace rekey::cli
