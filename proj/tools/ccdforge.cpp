// ccdforge — command-line front end for the dialogue synthesis pipeline.
//
//   generate   seed corpus → session records (+ optional prompt logs)
//   filter     session records → retained corpus + gate reports
//   evaluate   session records → per-session scores + summary tables
//   stats      session records → corpus statistics
//   replay     one session record → human-readable rendering
//
// Every command writes a manifest.json describing the run. Exit codes:
// 0 success, 1 data-level failure, 2 usage or configuration failure.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "ccdforge/ccdforge.hpp"
#include "ccdforge/http_provider.hpp"

namespace fs = std::filesystem;
using nlohmann::ordered_json;
using namespace ccdforge;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitData = 1;
constexpr int kExitUsage = 2;

// ── Small utilities ─────────────────────────────────────────────

std::string fnv1a_hex(const std::string& data) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : data) {
        h ^= c;
        h *= 1099511628211ull;
    }
    std::ostringstream out;
    out << std::hex << std::setw(16) << std::setfill('0') << h;
    return out.str();
}

std::vector<std::string> split_csv(const std::string& csv) {
    std::vector<std::string> out;
    std::string item;
    std::istringstream in(csv);
    while (std::getline(in, item, ',')) {
        item = ccdforge::detail::trim_copy(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

std::string sanitize_for_filename(std::string name) {
    for (char& c : name) {
        if (c == ':' || c == '/' || c == '\\') c = '_';
    }
    return name;
}

void parallel_for(std::size_t n_tasks, int parallelism,
                  const std::function<void(std::size_t)>& fn) {
    if (n_tasks == 0) return;
    std::size_t workers = static_cast<std::size_t>(std::max(1, parallelism));
    workers = std::min(workers, n_tasks);
    if (workers == 1) {
        for (std::size_t i = 0; i < n_tasks; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t t = 0; t < workers; ++t) {
        pool.emplace_back([&] {
            while (true) {
                std::size_t i = next.fetch_add(1);
                if (i >= n_tasks) break;
                fn(i);
            }
        });
    }
    for (std::thread& th : pool) th.join();
}

// ── Tool configuration ──────────────────────────────────────────

struct ToolConfig {
    SessionConfig session;
    GateConfig gate;
};

Result<int> read_positive_int(const nlohmann::json& j, const std::string& key) {
    if (!j.at(key).is_number_integer()) {
        return make_error(ErrorKind::InvalidArgument, "config: \"" + key + "\" must be an integer");
    }
    int v = j.at(key).get<int>();
    if (v <= 0) {
        return make_error(ErrorKind::InvalidArgument, "config: \"" + key + "\" must be positive");
    }
    return v;
}

Result<void> check_known_keys(const nlohmann::json& j, const std::vector<std::string>& known,
                              const std::string& where) {
    for (auto it = j.begin(); it != j.end(); ++it) {
        if (std::find(known.begin(), known.end(), it.key()) == known.end()) {
            return Error{ErrorKind::InvalidArgument,
                         "config: unknown key \"" + it.key() + "\" in " + where};
        }
    }
    return {};
}

Result<ToolConfig> load_tool_config(const std::string& path) {
    ToolConfig cfg;
    if (path.empty()) return cfg;
    auto text = read_text_file(path);
    if (!text) return text.error();
    nlohmann::json j = nlohmann::json::parse(text.value(), nullptr, false);
    if (j.is_discarded() || !j.is_object()) {
        return make_error(ErrorKind::InvalidArgument, "config: " + path + " is not a JSON object");
    }
    if (auto known = check_known_keys(
            j, {"max_total_turns", "max_turns_per_phase", "malformed_retry_limit", "retry", "gate"},
            "top level");
        !known) {
        return known.error();
    }
    if (j.contains("max_total_turns")) {
        auto v = read_positive_int(j, "max_total_turns");
        if (!v) return v.error();
        cfg.session.max_total_turns = v.value();
    }
    if (j.contains("max_turns_per_phase")) {
        const nlohmann::json& per = j["max_turns_per_phase"];
        if (!per.is_object()) {
            return make_error(ErrorKind::InvalidArgument,
                              "config: \"max_turns_per_phase\" must be an object");
        }
        if (auto known = check_known_keys(
                per, {"identification", "assessment", "intervention", "summary"},
                "max_turns_per_phase");
            !known) {
            return known.error();
        }
        for (auto it = per.begin(); it != per.end(); ++it) {
            auto phase = parse_phase(it.key());
            if (!phase) return phase.error();
            auto v = read_positive_int(per, it.key());
            if (!v) return v.error();
            cfg.session.max_turns_per_phase[phase.value()] = v.value();
        }
    }
    if (j.contains("malformed_retry_limit")) {
        if (!j["malformed_retry_limit"].is_number_integer() ||
            j["malformed_retry_limit"].get<int>() < 0) {
            return make_error(ErrorKind::InvalidArgument,
                              "config: \"malformed_retry_limit\" must be a non-negative integer");
        }
        cfg.session.malformed_retry_limit = j["malformed_retry_limit"].get<int>();
    }
    if (j.contains("retry")) {
        const nlohmann::json& r = j["retry"];
        if (!r.is_object()) {
            return make_error(ErrorKind::InvalidArgument, "config: \"retry\" must be an object");
        }
        if (auto known = check_known_keys(r, {"max_attempts", "base_delay_ms"}, "retry"); !known) {
            return known.error();
        }
        if (r.contains("max_attempts")) {
            auto v = read_positive_int(r, "max_attempts");
            if (!v) return v.error();
            cfg.session.retry.max_attempts = v.value();
        }
        if (r.contains("base_delay_ms")) {
            if (!r["base_delay_ms"].is_number_integer() || r["base_delay_ms"].get<int>() < 0) {
                return make_error(ErrorKind::InvalidArgument,
                                  "config: \"base_delay_ms\" must be a non-negative integer");
            }
            cfg.session.retry.base_delay = std::chrono::milliseconds(r["base_delay_ms"].get<int>());
        }
    }
    if (j.contains("gate")) {
        const nlohmann::json& g = j["gate"];
        if (!g.is_object()) {
            return make_error(ErrorKind::InvalidArgument, "config: \"gate\" must be an object");
        }
        if (auto known = check_known_keys(g, {"min_turns", "threshold"}, "gate"); !known) {
            return known.error();
        }
        if (g.contains("min_turns")) {
            auto v = read_positive_int(g, "min_turns");
            if (!v) return v.error();
            cfg.gate.min_turns = v.value();
        }
        if (g.contains("threshold")) {
            if (!g["threshold"].is_number()) {
                return make_error(ErrorKind::InvalidArgument,
                                  "config: \"threshold\" must be a number");
            }
            cfg.gate.threshold = g["threshold"].get<double>();
        }
    }
    return cfg;
}

ordered_json config_snapshot(const ToolConfig& cfg) {
    ordered_json j;
    j["max_total_turns"] = cfg.session.max_total_turns;
    ordered_json per;
    for (Phase p : {Phase::Identification, Phase::Assessment, Phase::Intervention, Phase::Summary}) {
        per[std::string(to_string(p))] = cfg.session.max_turns_per_phase.at(p);
    }
    j["max_turns_per_phase"] = std::move(per);
    j["malformed_retry_limit"] = cfg.session.malformed_retry_limit;
    ordered_json retry;
    retry["max_attempts"] = cfg.session.retry.max_attempts;
    retry["base_delay_ms"] = static_cast<long long>(cfg.session.retry.base_delay.count());
    j["retry"] = std::move(retry);
    ordered_json gate;
    gate["min_turns"] = cfg.gate.min_turns;
    gate["threshold"] = cfg.gate.threshold;
    j["gate"] = std::move(gate);
    return j;
}

// ── Provider plumbing ───────────────────────────────────────────

struct ProviderSpec {
    std::string backend;  // "scripted" | "http"
    std::string base_url;
    std::string model;
    nlohmann::json sequences;  // scripted: name → array of reply strings
    std::string raw;           // spec file bytes, folded into the run id
};

Result<ProviderSpec> load_provider_spec(const std::string& path) {
    ProviderSpec spec;
    auto text = read_text_file(path);
    if (!text) return text.error();
    spec.raw = text.value();
    nlohmann::json j = nlohmann::json::parse(spec.raw, nullptr, false);
    if (j.is_discarded() || !j.is_object()) {
        return make_error(ErrorKind::InvalidArgument,
                          "provider spec: " + path + " is not a JSON object");
    }
    if (auto known = check_known_keys(j, {"backend", "base_url", "model", "script"}, "provider spec");
        !known) {
        return known.error();
    }
    if (!j.contains("backend") || !j["backend"].is_string()) {
        return make_error(ErrorKind::InvalidArgument, "provider spec: missing \"backend\"");
    }
    spec.backend = j["backend"].get<std::string>();
    if (spec.backend == "scripted") {
        if (!j.contains("script") || !j["script"].is_string()) {
            return make_error(ErrorKind::InvalidArgument,
                              "provider spec: scripted backend needs a \"script\" path");
        }
        fs::path script_path = fs::path(path).parent_path() / j["script"].get<std::string>();
        auto script_text = read_text_file(script_path);
        if (!script_text) return script_text.error();
        spec.sequences = nlohmann::json::parse(script_text.value(), nullptr, false);
        if (spec.sequences.is_discarded() || !spec.sequences.is_object()) {
            return make_error(ErrorKind::InvalidArgument,
                              "provider spec: script " + script_path.string() +
                                  " is not a JSON object of named reply sequences");
        }
        for (auto it = spec.sequences.begin(); it != spec.sequences.end(); ++it) {
            if (!it.value().is_array()) {
                return make_error(ErrorKind::InvalidArgument,
                                  "provider spec: sequence \"" + it.key() + "\" is not an array");
            }
            for (const nlohmann::json& reply : it.value()) {
                if (!reply.is_string()) {
                    return make_error(ErrorKind::InvalidArgument,
                                      "provider spec: sequence \"" + it.key() +
                                          "\" contains a non-string reply");
                }
            }
        }
    } else if (spec.backend == "http") {
        if (j.contains("base_url") && j["base_url"].is_string()) {
            spec.base_url = j["base_url"].get<std::string>();
        }
        if (j.contains("model") && j["model"].is_string()) {
            spec.model = j["model"].get<std::string>();
        }
    } else {
        return make_error(ErrorKind::InvalidArgument,
                          "provider spec: unknown backend \"" + spec.backend +
                              "\" (expected scripted or http)");
    }
    return spec;
}

/// Scripted provider that replays its sequence from the start once it is
/// exhausted. Used for corpus-wide judges, where the same rubric reply
/// applies to every record.
class CyclingProvider final : public Provider {
  public:
    explicit CyclingProvider(std::vector<std::string> replies) : replies_(std::move(replies)) {}

    Result<ChatResponse> complete(const ChatRequest&) override {
        std::lock_guard<std::mutex> lock(mutex_);
        if (replies_.empty()) {
            return make_error(ErrorKind::ScriptExhausted, "scripted backend: empty sequence");
        }
        const std::string& reply = replies_[next_ % replies_.size()];
        ++next_;
        return ChatResponse{reply, id(), std::chrono::milliseconds{0}};
    }

    std::string id() const override { return "scripted"; }

  private:
    std::vector<std::string> replies_;
    std::size_t next_ = 0;
    std::mutex mutex_;
};

struct ProviderFactory {
    ProviderSpec spec;

    bool scripted() const { return spec.backend == "scripted"; }

    std::string identity() const { return scripted() ? "scripted" : "http:" + spec.model; }

    /// First sequence whose name matches one of `keys`, most specific first.
    Result<std::vector<std::string>> sequence(const std::vector<std::string>& keys) const {
        for (const std::string& key : keys) {
            if (spec.sequences.contains(key)) {
                return spec.sequences[key].get<std::vector<std::string>>();
            }
        }
        std::string tried;
        for (const std::string& key : keys) tried += (tried.empty() ? "" : ", ") + key;
        return make_error(ErrorKind::NotFound, "script has no sequence named any of: " + tried);
    }

    /// Exact-length provider: exhausting the sequence is an error. For the
    /// http backend this is a fresh client (safe to use across threads).
    Result<std::shared_ptr<Provider>> one_shot(const std::vector<std::string>& keys) const {
        if (!scripted()) return http();
        auto seq = sequence(keys);
        if (!seq) return seq.error();
        return std::static_pointer_cast<Provider>(make_scripted_provider(std::move(seq.value())));
    }

    /// Replaying provider for judges that score an entire corpus through a
    /// single context.
    Result<std::shared_ptr<Provider>> cycling(const std::vector<std::string>& keys) const {
        if (!scripted()) return http();
        auto seq = sequence(keys);
        if (!seq) return seq.error();
        return std::static_pointer_cast<Provider>(
            std::make_shared<CyclingProvider>(std::move(seq.value())));
    }

    Result<std::shared_ptr<Provider>> http() const {
        HttpProviderConfig config;
        config.base_url = spec.base_url;
        config.model = spec.model;
        return make_http_provider(std::move(config));
    }
};

// ── Manifest ────────────────────────────────────────────────────

struct RunCounts {
    long long attempted = 0;
    long long completed = 0;
    std::optional<long long> retained;
};

struct ManifestInfo {
    std::string command;
    ordered_json config;
    std::vector<std::string> inputs;
    std::vector<std::string> outputs;
    std::string provider_id;
    std::string hash_extra;  // selection flags that change what the run means
    long long duration_ms = 0;
    RunCounts counts;
};

Result<void> write_manifest(const fs::path& out_dir, const ManifestInfo& info) {
    std::string hash_input = info.command + '\x1f' + info.config.dump() + '\x1f';
    for (const std::string& in : info.inputs) hash_input += in + '\x1f';
    hash_input += info.provider_id + '\x1f' + info.hash_extra;

    ordered_json j;
    j["run_id"] = fnv1a_hex(hash_input);
    j["command"] = info.command;
    j["config"] = info.config;
    j["inputs"] = info.inputs;
    j["outputs"] = info.outputs;
    j["provider"] = info.provider_id;
    ordered_json timing;
    timing["duration_ms"] = info.duration_ms;
    j["timing"] = std::move(timing);
    ordered_json counts;
    counts["attempted"] = info.counts.attempted;
    counts["completed"] = info.counts.completed;
    counts["retained"] = info.counts.retained ? ordered_json(*info.counts.retained)
                                              : ordered_json(nullptr);
    j["counts"] = std::move(counts);
    return write_text_file(out_dir / "manifest.json", j.dump(2) + "\n");
}

int fail_usage(const std::string& message) {
    std::cerr << "error: " << message << "\n";
    return kExitUsage;
}

int fail_data(const std::string& message) {
    std::cerr << "error: " << message << "\n";
    return kExitData;
}

Result<std::vector<SessionRecord>> load_corpus(const std::string& path) {
    return load_session_records(path);
}

using Clock = std::chrono::steady_clock;

long long ms_since(Clock::time_point start) {
    return std::chrono::duration_cast<std::chrono::milliseconds>(Clock::now() - start).count();
}

// ── generate ────────────────────────────────────────────────────

struct GenerateArgs {
    std::string seeds_path;
    std::string provider_path;
    std::string config_path;
    std::string out_dir = ".";
    std::string attitudes_csv = "positive,neutral,negative";
    int parallel = 1;
    bool prompts = false;
};

int cmd_generate(const GenerateArgs& args) {
    Clock::time_point started = Clock::now();

    auto cfg = load_tool_config(args.config_path);
    if (!cfg) return fail_usage(cfg.error().message);
    auto spec = load_provider_spec(args.provider_path);
    if (!spec) return fail_usage(spec.error().message);
    ProviderFactory factory{std::move(spec.value())};
    if (factory.scripted()) {
        cfg.value().session.retry.base_delay = std::chrono::milliseconds{0};
    }

    std::ifstream seeds_in(args.seeds_path);
    if (!seeds_in) return fail_usage("cannot open seeds file " + args.seeds_path);
    std::vector<std::string> domains = default_life_domains();
    auto seeds = load_seeds(seeds_in, &domains);
    if (!seeds) return fail_usage(args.seeds_path + ": " + seeds.error().message);
    if (seeds.value().empty()) return fail_usage(args.seeds_path + ": no seeds");

    std::vector<Attitude> attitudes;
    for (const std::string& label : split_csv(args.attitudes_csv)) {
        auto a = parse_attitude(label);
        if (!a) return fail_usage(a.error().message);
        if (std::find(attitudes.begin(), attitudes.end(), a.value()) == attitudes.end()) {
            attitudes.push_back(a.value());
        }
    }
    if (attitudes.empty()) return fail_usage("no attitudes selected");

    const TemplateLibrary templates = TemplateLibrary::builtin();

    // One CCD per seed, reused across attitudes.
    std::map<std::string, Ccd> ccd_cache;
    for (const SeedRecord& seed : seeds.value()) {
        auto provider = factory.one_shot({"ccd_builder:" + seed.id, "ccd_builder"});
        if (!provider) {
            std::cerr << "warning: seed " << seed.id << ": " << provider.error().message << "\n";
            continue;
        }
        AgentContext ctx{templates, *provider.value(), cfg.value().session.retry,
                         cfg.value().session.malformed_retry_limit, nullptr};
        auto ccd = construct_ccd(seed, ctx);
        if (!ccd) {
            std::cerr << "warning: seed " << seed.id
                      << ": diagram construction failed: " << ccd.error().message << "\n";
            continue;
        }
        ccd_cache.emplace(seed.id, std::move(ccd.value()));
    }

    struct Task {
        const SeedRecord* seed = nullptr;
        Attitude attitude = Attitude::Neutral;
        std::string session_id;
    };
    std::vector<Task> tasks;
    for (const SeedRecord& seed : seeds.value()) {
        if (ccd_cache.find(seed.id) == ccd_cache.end()) continue;
        for (Attitude a : attitudes) {
            tasks.push_back({&seed, a, make_session_id(seed.id, a)});
        }
    }
    std::sort(tasks.begin(), tasks.end(), [](const Task& lhs, const Task& rhs) {
        if (lhs.seed->id != rhs.seed->id) return lhs.seed->id < rhs.seed->id;
        return static_cast<int>(lhs.attitude) < static_cast<int>(rhs.attitude);
    });

    std::vector<std::optional<SessionOutcome>> outcomes(tasks.size());
    std::vector<std::string> task_errors(tasks.size());
    parallel_for(tasks.size(), args.parallel, [&](std::size_t i) {
        const Task& task = tasks[i];
        auto provider = factory.one_shot(
            {"session:" + task.session_id, "session:" + task.seed->id, "session"});
        if (!provider) {
            task_errors[i] = provider.error().message;
            return;
        }
        SessionConfig session_cfg = cfg.value().session;
        session_cfg.seed_label = task.seed->id;
        outcomes[i] = run_session(task.seed->id, ccd_cache.at(task.seed->id), task.attitude,
                                  session_cfg, templates, *provider.value());
    });

    std::vector<SessionRecord> records;
    std::vector<std::string> output_files;
    long long completed = 0;
    fs::path out_dir(args.out_dir);
    for (std::size_t i = 0; i < tasks.size(); ++i) {
        if (!task_errors[i].empty()) {
            std::cerr << "warning: session " << tasks[i].session_id << ": " << task_errors[i]
                      << "\n";
            continue;
        }
        if (!outcomes[i]) continue;
        const SessionRecord& record = outcomes[i]->record;
        if (record.termination == Termination::Completed) ++completed;
        records.push_back(record);
        if (args.prompts) {
            std::string lines;
            for (const PromptLogEntry& entry : outcomes[i]->prompt_log) {
                ordered_json j;
                j["tag"] = entry.tag;
                j["side"] = entry.side;
                j["turn_index"] = entry.turn_index;
                j["visible_partial_entries"] = entry.visible_partial_entries;
                j["prompt"] = entry.prompt;
                lines += j.dump() + "\n";
            }
            fs::path prompt_file =
                out_dir / (sanitize_for_filename(record.session_id) + ".prompts.jsonl");
            if (auto w = write_text_file(prompt_file, lines); !w) {
                std::cerr << "warning: " << prompt_file.string() << ": " << w.error().message
                          << "\n";
            } else {
                output_files.push_back(prompt_file.string());
            }
        }
    }

    fs::path sessions_file = out_dir / "sessions.jsonl";
    if (auto w = write_text_file(sessions_file, session_records_to_jsonl(records)); !w) {
        return fail_data(sessions_file.string() + ": " + w.error().message);
    }
    output_files.insert(output_files.begin(), sessions_file.string());

    ManifestInfo manifest;
    manifest.command = "generate";
    manifest.config = config_snapshot(cfg.value());
    manifest.inputs = {args.seeds_path, args.provider_path};
    if (!args.config_path.empty()) manifest.inputs.push_back(args.config_path);
    manifest.outputs = output_files;
    manifest.provider_id = factory.identity();
    manifest.hash_extra = args.attitudes_csv + '\x1f' + factory.spec.raw;
    manifest.duration_ms = ms_since(started);
    manifest.counts.attempted =
        static_cast<long long>(seeds.value().size()) * static_cast<long long>(attitudes.size());
    manifest.counts.completed = completed;
    if (auto w = write_manifest(out_dir, manifest); !w) {
        return fail_data(w.error().message);
    }

    std::cout << "generate: " << completed << "/" << manifest.counts.attempted
              << " sessions completed -> " << sessions_file.string() << "\n";
    return completed > 0 ? kExitOk : kExitData;
}

// ── filter ──────────────────────────────────────────────────────

struct FilterArgs {
    std::string sessions_path;
    std::string provider_path;
    std::string config_path;
    std::string out_dir = ".";
    std::optional<double> threshold;
    std::optional<int> min_turns;
};

int cmd_filter(const FilterArgs& args) {
    Clock::time_point started = Clock::now();

    auto cfg = load_tool_config(args.config_path);
    if (!cfg) return fail_usage(cfg.error().message);
    if (args.threshold) cfg.value().gate.threshold = *args.threshold;
    if (args.min_turns) cfg.value().gate.min_turns = *args.min_turns;
    auto spec = load_provider_spec(args.provider_path);
    if (!spec) return fail_usage(spec.error().message);
    ProviderFactory factory{std::move(spec.value())};
    if (factory.scripted()) {
        cfg.value().session.retry.base_delay = std::chrono::milliseconds{0};
    }

    auto records = load_corpus(args.sessions_path);
    if (!records) return fail_usage(args.sessions_path + ": " + records.error().message);

    fs::path out_dir(args.out_dir);
    fs::path retained_file = out_dir / "retained.jsonl";
    fs::path report_file = out_dir / "gate_report.jsonl";

    FilterOutcome outcome;
    const TemplateLibrary templates = TemplateLibrary::builtin();
    if (!records.value().empty()) {
        auto judge_provider = factory.cycling({"judge_ctrs_screen"});
        if (!judge_provider) return fail_usage(judge_provider.error().message);
        AgentContext judge{templates, *judge_provider.value(), cfg.value().session.retry,
                           cfg.value().session.malformed_retry_limit, nullptr};
        outcome = filter_corpus(records.value(), judge, cfg.value().gate);
    } else {
        std::cerr << "warning: " << args.sessions_path << " holds no sessions\n";
    }

    if (auto w = write_text_file(retained_file, session_records_to_jsonl(outcome.retained)); !w) {
        return fail_data(retained_file.string() + ": " + w.error().message);
    }
    std::string report_lines;
    for (const GateReport& report : outcome.reports) {
        report_lines += gate_report_to_json(report).dump() + "\n";
    }
    if (auto w = write_text_file(report_file, report_lines); !w) {
        return fail_data(report_file.string() + ": " + w.error().message);
    }

    ManifestInfo manifest;
    manifest.command = "filter";
    manifest.config = config_snapshot(cfg.value());
    manifest.inputs = {args.sessions_path, args.provider_path};
    if (!args.config_path.empty()) manifest.inputs.push_back(args.config_path);
    manifest.outputs = {retained_file.string(), report_file.string()};
    manifest.provider_id = factory.identity();
    manifest.hash_extra = factory.spec.raw;
    manifest.duration_ms = ms_since(started);
    manifest.counts.attempted = static_cast<long long>(records.value().size());
    manifest.counts.completed = static_cast<long long>(outcome.reports.size());
    manifest.counts.retained = static_cast<long long>(outcome.retained.size());
    if (auto w = write_manifest(out_dir, manifest); !w) {
        return fail_data(w.error().message);
    }

    if (outcome.retention_rate) {
        std::ostringstream rate;
        rate << std::fixed << std::setprecision(2) << *outcome.retention_rate;
        std::cout << "filter: retained " << outcome.retained.size() << "/"
                  << records.value().size() << " sessions (rate " << rate.str() << ") -> "
                  << retained_file.string() << "\n";
    } else {
        std::cout << "filter: no sessions to gate\n";
    }
    return kExitOk;
}

// ── evaluate ────────────────────────────────────────────────────

struct EvaluateArgs {
    std::string sessions_path;
    std::string provider_path;
    std::string config_path;
    std::string out_dir = ".";
    std::string metrics_csv = "ctrs,panas,recon";
    int parallel = 1;
};

/// Per-attitude mean table over scored sessions, canonical attitude order.
std::string attitude_table(const std::vector<ScoredSession>& scored,
                           const std::vector<std::string>& metric_names) {
    auto grouped = aggregate_by_group(scored, "attitude");
    std::vector<std::string> headers = {"attitude"};
    headers.insert(headers.end(), metric_names.begin(), metric_names.end());
    std::vector<std::vector<std::string>> rows;
    if (grouped) {
        for (Attitude a : kAllAttitudes) {
            auto it = grouped.value().find(std::string(to_string(a)));
            if (it == grouped.value().end()) continue;
            std::vector<std::string> row = {std::string(to_string(a))};
            for (const std::string& metric : metric_names) {
                auto mit = it->second.find(metric);
                row.push_back(mit == it->second.end() ? "-" : format2(mit->second));
            }
            rows.push_back(std::move(row));
        }
    }
    return render_table(headers, rows);
}

int cmd_evaluate(const EvaluateArgs& args) {
    Clock::time_point started = Clock::now();

    auto cfg = load_tool_config(args.config_path);
    if (!cfg) return fail_usage(cfg.error().message);
    auto spec = load_provider_spec(args.provider_path);
    if (!spec) return fail_usage(spec.error().message);
    ProviderFactory factory{std::move(spec.value())};
    if (factory.scripted()) {
        cfg.value().session.retry.base_delay = std::chrono::milliseconds{0};
    }

    const std::vector<std::string> known_metrics = {"ctrs", "panas", "recon"};
    std::vector<std::string> metrics;
    for (const std::string& m : split_csv(args.metrics_csv)) {
        if (std::find(known_metrics.begin(), known_metrics.end(), m) == known_metrics.end()) {
            return fail_usage("unknown metric \"" + m + "\" (expected ctrs, panas, recon)");
        }
        if (std::find(metrics.begin(), metrics.end(), m) == metrics.end()) metrics.push_back(m);
    }
    if (metrics.empty()) return fail_usage("no metrics selected");

    auto records = load_corpus(args.sessions_path);
    if (!records) return fail_usage(args.sessions_path + ": " + records.error().message);
    if (records.value().empty()) {
        std::cerr << "warning: " << args.sessions_path << " holds no sessions\n";
    }

    const TemplateLibrary templates = TemplateLibrary::builtin();
    fs::path out_dir(args.out_dir);
    std::vector<std::string> output_files;
    long long attempted = 0;
    long long succeeded = 0;

    for (const std::string& metric : metrics) {
        const std::vector<SessionRecord>& recs = records.value();
        std::vector<ordered_json> lines(recs.size());
        std::vector<std::optional<ScoredSession>> scored_slots(recs.size());

        parallel_for(recs.size(), args.parallel, [&](std::size_t i) {
            const SessionRecord& record = recs[i];
            ordered_json& line = lines[i];
            line["session_id"] = record.session_id;
            line["attitude"] = std::string(to_string(record.attitude));

            auto judged = [&]() -> Result<std::map<std::string, double>> {
                std::map<std::string, double> values;
                if (metric == "ctrs") {
                    auto provider = factory.one_shot(
                        {"judge_ctrs_eval:" + record.session_id, "judge_ctrs_eval"});
                    if (!provider) return provider.error();
                    AgentContext judge{templates, *provider.value(), cfg.value().session.retry,
                                       cfg.value().session.malformed_retry_limit, nullptr};
                    auto score = score_ctrs(record, judge);
                    if (!score) return score.error();
                    line["ctrs"] = ctrs_score_to_json(score.value());
                    values["ctrs_mean"] = score.value().mean;
                } else if (metric == "panas") {
                    Result<std::shared_ptr<Provider>> provider = [&] {
                        if (!factory.scripted()) return factory.http();
                        auto pre = factory.sequence(
                            {"judge_panas_pre:" + record.session_id, "judge_panas_pre"});
                        if (!pre) return Result<std::shared_ptr<Provider>>(pre.error());
                        auto post = factory.sequence(
                            {"judge_panas_post:" + record.session_id, "judge_panas_post"});
                        if (!post) return Result<std::shared_ptr<Provider>>(post.error());
                        std::vector<std::string> seq = std::move(pre.value());
                        seq.insert(seq.end(), post.value().begin(), post.value().end());
                        return Result<std::shared_ptr<Provider>>(
                            std::static_pointer_cast<Provider>(
                                make_scripted_provider(std::move(seq))));
                    }();
                    if (!provider) return provider.error();
                    AgentContext judge{templates, *provider.value(), cfg.value().session.retry,
                                       cfg.value().session.malformed_retry_limit, nullptr};
                    auto pair = score_panas(record.ground_truth_ccd, record, judge);
                    if (!pair) return pair.error();
                    PanasDelta delta = panas_delta(pair.value().pre, pair.value().post);
                    line["pre"] = panas_profile_to_json(pair.value().pre);
                    line["post"] = panas_profile_to_json(pair.value().post);
                    ordered_json d;
                    d["positive"] = delta.delta_positive;
                    d["negative"] = delta.delta_negative;
                    line["delta"] = std::move(d);
                    values["delta_positive"] = delta.delta_positive;
                    values["delta_negative"] = delta.delta_negative;
                } else {  // recon
                    auto provider =
                        factory.one_shot({"judge_recon:" + record.session_id, "judge_recon"});
                    if (!provider) return provider.error();
                    AgentContext judge{templates, *provider.value(), cfg.value().session.retry,
                                       cfg.value().session.malformed_retry_limit, nullptr};
                    auto rating = score_reconstruction(record.ground_truth_ccd,
                                                       record.final_partial_ccd, judge);
                    if (!rating) return rating.error();
                    line["reconstruction"] = reconstruction_rating_to_json(rating.value());
                    values["recon_mean"] = rating.value().mean;
                    values["recon_overall"] = rating.value().overall;
                }
                return values;
            }();

            if (judged) {
                ScoredSession s;
                s.session_id = record.session_id;
                s.attitude = record.attitude;
                s.core_belief = record.ground_truth_ccd.core_belief;
                s.metrics = judged.value();
                scored_slots[i] = std::move(s);
            } else {
                line["error"] = judged.error().message;
            }
        });

        std::string file_lines;
        std::vector<ScoredSession> scored;
        for (std::size_t i = 0; i < recs.size(); ++i) {
            file_lines += lines[i].dump() + "\n";
            ++attempted;
            if (scored_slots[i]) {
                ++succeeded;
                scored.push_back(std::move(*scored_slots[i]));
            }
        }
        fs::path metric_file = out_dir / ("eval_" + metric + ".jsonl");
        if (auto w = write_text_file(metric_file, file_lines); !w) {
            return fail_data(metric_file.string() + ": " + w.error().message);
        }
        output_files.push_back(metric_file.string());

        std::vector<std::string> metric_names;
        if (metric == "ctrs") metric_names = {"ctrs_mean"};
        if (metric == "panas") metric_names = {"delta_positive", "delta_negative"};
        if (metric == "recon") metric_names = {"recon_mean", "recon_overall"};
        std::cout << "== " << metric << " ==\n" << attitude_table(scored, metric_names) << "\n";
    }

    ManifestInfo manifest;
    manifest.command = "evaluate";
    manifest.config = config_snapshot(cfg.value());
    manifest.inputs = {args.sessions_path, args.provider_path};
    if (!args.config_path.empty()) manifest.inputs.push_back(args.config_path);
    manifest.outputs = output_files;
    manifest.provider_id = factory.identity();
    manifest.hash_extra = args.metrics_csv + '\x1f' + factory.spec.raw;
    manifest.duration_ms = ms_since(started);
    manifest.counts.attempted = attempted;
    manifest.counts.completed = succeeded;
    if (auto w = write_manifest(out_dir, manifest); !w) {
        return fail_data(w.error().message);
    }

    if (attempted > 0 && succeeded == 0) return fail_data("every evaluation failed");
    return kExitOk;
}

// ── stats ───────────────────────────────────────────────────────

struct StatsArgs {
    std::string sessions_path;
    std::string out_dir = ".";
};

int cmd_stats(const StatsArgs& args) {
    Clock::time_point started = Clock::now();
    auto records = load_corpus(args.sessions_path);
    if (!records) return fail_usage(args.sessions_path + ": " + records.error().message);
    auto stats = corpus_stats(records.value());
    if (!stats) return fail_data(stats.error().message);
    const CorpusStats& s = stats.value();

    std::vector<std::vector<std::string>> rows = {
        {"cases", std::to_string(s.cases)},
        {"chars_per_case.total", format2(s.chars_per_case_total)},
        {"chars_per_case.client", format2(s.chars_per_case_client)},
        {"chars_per_case.therapist", format2(s.chars_per_case_therapist)},
        {"chars_per_utterance.total", format2(s.chars_per_utterance_total)},
        {"chars_per_utterance.client", format2(s.chars_per_utterance_client)},
        {"chars_per_utterance.therapist", format2(s.chars_per_utterance_therapist)},
        {"avg_turns", format2(s.avg_turns)},
    };
    std::cout << render_table({"metric", "value"}, rows);

    fs::path out_dir(args.out_dir);
    fs::path stats_file = out_dir / "stats.json";
    if (auto w = write_text_file(stats_file, corpus_stats_to_json(s).dump(2) + "\n"); !w) {
        return fail_data(stats_file.string() + ": " + w.error().message);
    }

    ManifestInfo manifest;
    manifest.command = "stats";
    manifest.config = ordered_json::object();
    manifest.inputs = {args.sessions_path};
    manifest.outputs = {stats_file.string()};
    manifest.provider_id = "none";
    manifest.duration_ms = ms_since(started);
    manifest.counts.attempted = static_cast<long long>(records.value().size());
    manifest.counts.completed = static_cast<long long>(records.value().size());
    if (auto w = write_manifest(out_dir, manifest); !w) {
        return fail_data(w.error().message);
    }
    return kExitOk;
}

// ── replay ──────────────────────────────────────────────────────

struct ReplayArgs {
    std::string sessions_path;
    std::string session_id;
    std::string out_dir = ".";
};

int cmd_replay(const ReplayArgs& args) {
    Clock::time_point started = Clock::now();
    auto records = load_corpus(args.sessions_path);
    if (!records) return fail_usage(args.sessions_path + ": " + records.error().message);
    const SessionRecord* found = nullptr;
    for (const SessionRecord& record : records.value()) {
        if (record.session_id == args.session_id) {
            found = &record;
            break;
        }
    }
    if (found == nullptr) {
        return fail_data("no session named \"" + args.session_id + "\" in " + args.sessions_path);
    }
    std::cout << replay(*found);

    ManifestInfo manifest;
    manifest.command = "replay";
    manifest.config = ordered_json::object();
    manifest.inputs = {args.sessions_path};
    manifest.provider_id = "none";
    manifest.hash_extra = args.session_id;
    manifest.duration_ms = ms_since(started);
    manifest.counts.attempted = 1;
    manifest.counts.completed = 1;
    if (auto w = write_manifest(fs::path(args.out_dir), manifest); !w) {
        return fail_data(w.error().message);
    }
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"ccdforge — synthesize, gate, and evaluate structured counseling dialogues"};
    app.require_subcommand(1);

    GenerateArgs gen;
    CLI::App* generate = app.add_subcommand("generate", "Run sessions for a seed corpus");
    generate->add_option("seeds", gen.seeds_path, "Seed corpus (JSON lines)")->required();
    generate->add_option("--provider", gen.provider_path, "Provider spec file")->required();
    generate->add_option("--config", gen.config_path, "Engine configuration file");
    generate->add_option("--out", gen.out_dir, "Output directory");
    generate->add_option("--attitudes", gen.attitudes_csv,
                         "Comma-separated client stances (positive, neutral, negative)");
    generate->add_option("--parallel", gen.parallel, "Concurrent sessions")
        ->check(CLI::PositiveNumber);
    generate->add_flag("--prompts", gen.prompts, "Also write per-session prompt logs");

    FilterArgs fil;
    double fil_threshold = 0.0;
    int fil_min_turns = 0;
    CLI::App* filter = app.add_subcommand("filter", "Gate a session corpus for quality");
    filter->add_option("sessions", fil.sessions_path, "Session corpus (JSON lines)")->required();
    filter->add_option("--provider", fil.provider_path, "Judge provider spec file")->required();
    filter->add_option("--config", fil.config_path, "Engine configuration file");
    filter->add_option("--out", fil.out_dir, "Output directory");
    CLI::Option* threshold_opt =
        filter->add_option("--threshold", fil_threshold, "Mean competence score required to pass");
    CLI::Option* min_turns_opt =
        filter->add_option("--min-turns", fil_min_turns, "Minimum turn count required to pass");

    EvaluateArgs eva;
    CLI::App* evaluate = app.add_subcommand("evaluate", "Score sessions with judge models");
    evaluate->add_option("sessions", eva.sessions_path, "Session corpus (JSON lines)")->required();
    evaluate->add_option("--provider", eva.provider_path, "Judge provider spec file")->required();
    evaluate->add_option("--config", eva.config_path, "Engine configuration file");
    evaluate->add_option("--out", eva.out_dir, "Output directory");
    evaluate->add_option("--metrics", eva.metrics_csv, "Comma-separated: ctrs, panas, recon");
    evaluate->add_option("--parallel", eva.parallel, "Concurrent evaluations")
        ->check(CLI::PositiveNumber);

    StatsArgs sta;
    CLI::App* stats = app.add_subcommand("stats", "Corpus statistics");
    stats->add_option("sessions", sta.sessions_path, "Session corpus (JSON lines)")->required();
    stats->add_option("--out", sta.out_dir, "Output directory");

    ReplayArgs rep;
    CLI::App* replay_cmd = app.add_subcommand("replay", "Render one session as a transcript");
    replay_cmd->add_option("sessions", rep.sessions_path, "Session corpus (JSON lines)")
        ->required();
    replay_cmd->add_option("session_id", rep.session_id, "Session to render")->required();
    replay_cmd->add_option("--out", rep.out_dir, "Output directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? kExitOk : kExitUsage;
    }

    if (*threshold_opt) fil.threshold = fil_threshold;
    if (*min_turns_opt) fil.min_turns = fil_min_turns;

    if (generate->parsed()) return cmd_generate(gen);
    if (filter->parsed()) return cmd_filter(fil);
    if (evaluate->parsed()) return cmd_evaluate(eva);
    if (stats->parsed()) return cmd_stats(sta);
    if (replay_cmd->parsed()) return cmd_replay(rep);
    return kExitUsage;
}
