#include <atomic>
#include <exception>
#include <fstream>
#include <thread>

#include "rekey/llm.hpp"
#include "rekey/log.hpp"

namespace rekey::llm {

std::map<std::string, std::string> read_checkpoint(const std::filesystem::path& path) {
    std::map<std::string, std::string> done;
    std::ifstream in(path, std::ios::binary);
    if (!in) return done;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        try {
            auto j = nlohmann::json::parse(line);
            done[j.at("id").get<std::string>()] = j.at("raw_text").get<std::string>();
        } catch (const nlohmann::json::exception&) {
            // A torn final line from an interrupted run is expected; the item is redone.
            log::warn(path.string() + ":" + std::to_string(line_no) + ": skipping unreadable checkpoint line");
        }
    }
    return done;
}

InferenceRun run_inference(const std::vector<Episode>& episodes, ChatClient& client, const InferenceOptions& opts) {
    if (opts.template_name == TemplateName::keyword_extraction)
        throw PromptError("keyword_extraction cannot drive episode inference");

    InferenceRun run;
    run.items.resize(episodes.size());

    std::map<std::string, std::string> completed;
    if (opts.checkpoint) completed = read_checkpoint(*opts.checkpoint);

    std::vector<std::size_t> pending;
    for (std::size_t i = 0; i < episodes.size(); ++i) {
        run.items[i].episode = episodes[i];
        if (auto it = completed.find(episodes[i].id); it != completed.end()) {
            run.items[i].output = parse_model_output(it->second);
            run.items[i].resumed = true;
            ++run.resumed;
        } else {
            pending.push_back(i);
        }
    }

    std::ofstream checkpoint;
    if (opts.checkpoint && !pending.empty()) {
        bool torn_tail = false;
        if (std::ifstream prev(*opts.checkpoint, std::ios::binary | std::ios::ate); prev && prev.tellg() > 0) {
            prev.seekg(-1, std::ios::end);
            torn_tail = prev.get() != '\n';
        }
        checkpoint.open(*opts.checkpoint, std::ios::binary | std::ios::app);
        if (!checkpoint) throw std::runtime_error("cannot open checkpoint " + opts.checkpoint->string());
        // Keep new records off an interrupted run's unterminated last line.
        if (torn_tail) checkpoint << '\n';
    }

    std::mutex mu;  // guards checkpoint, run.usage, run.failures, progress
    InferenceProgress progress{run.resumed, episodes.size(), {}};
    std::atomic<std::size_t> cursor{0};
    std::atomic<bool> abort{false};
    std::exception_ptr fatal;

    auto worker = [&] {
        while (!abort.load()) {
            const std::size_t k = cursor.fetch_add(1);
            if (k >= pending.size()) return;
            auto& item = run.items[pending[k]];
            try {
                ChatRequest req = opts.defaults;
                req.messages = {{"user", render_prompt(opts.template_name, episode_bindings(item.episode, opts.template_name))}};
                auto resp = client.complete(req);
                item.output = parse_model_output(std::move(resp.content));

                std::lock_guard lock(mu);
                if (checkpoint.is_open()) {
                    checkpoint << nlohmann::json{{"id", item.episode.id}, {"raw_text", item.output.raw_text}}.dump()
                               << '\n';
                    checkpoint.flush();
                }
                run.usage += resp.usage;
                progress.usage = run.usage;
            } catch (const AuthError&) {
                std::lock_guard lock(mu);
                if (!fatal) fatal = std::current_exception();
                abort = true;
                return;
            } catch (const PromptError&) {
                std::lock_guard lock(mu);
                if (!fatal) fatal = std::current_exception();
                abort = true;
                return;
            } catch (const std::exception& e) {
                item.output = ModelOutput{};
                item.output.error = e.what();
                std::lock_guard lock(mu);
                ++run.failures;
                log::warn("episode " + item.episode.id + ": " + e.what());
            }
            std::lock_guard lock(mu);
            ++progress.done;
            if (opts.on_progress) opts.on_progress(progress);
        }
    };

    const auto n_workers = std::min<std::size_t>(static_cast<std::size_t>(client.policy().max_in_flight),
                                                 std::max<std::size_t>(pending.size(), 1));
    {
        std::vector<std::jthread> threads;
        threads.reserve(n_workers);
        for (std::size_t t = 0; t < n_workers; ++t) threads.emplace_back(worker);
    }
    if (fatal) std::rethrow_exception(fatal);
    return run;
}

}  // namespace rekey::llm
