#pragma once

// Shared helpers for the test suite: fixture access, canned scripted
// sessions, reply builders for the structured schemas, and a small
// deterministic RNG for property tests.

#include <array>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ccdforge/ccdforge.hpp"

#ifndef CCDFORGE_FIXTURE_DIR
#error "CCDFORGE_FIXTURE_DIR must be defined by the build"
#endif

namespace testsupport {

inline std::filesystem::path fixture_path(const std::string& name) {
    return std::filesystem::path(CCDFORGE_FIXTURE_DIR) / name;
}

inline const nlohmann::json& script_fixture() {
    static const nlohmann::json script = [] {
        std::ifstream in(fixture_path("script.json"));
        nlohmann::json j;
        in >> j;
        return j;
    }();
    return script;
}

inline std::vector<std::string> script_sequence(const std::string& name) {
    return script_fixture().at(name).get<std::vector<std::string>>();
}

inline const ccdforge::TemplateLibrary& test_templates() {
    static const ccdforge::TemplateLibrary lib = ccdforge::TemplateLibrary::builtin();
    return lib;
}

inline ccdforge::RetryPolicy no_backoff() {
    return ccdforge::RetryPolicy{3, std::chrono::milliseconds{0}};
}

inline ccdforge::SessionConfig fast_session_config() {
    ccdforge::SessionConfig cfg;
    cfg.retry = no_backoff();
    return cfg;
}

/// Hand-built ground truth, independent of the fixture files, for unit
/// tests that need a valid profile without running the builder.
inline ccdforge::Ccd sample_ccd() {
    ccdforge::Ccd ccd;
    ccd.situation = "Missed a close friend's birthday dinner after a double shift.";
    ccd.automatic_thoughts = "I always let down the people who count on me.";
    ccd.emotions = {ccdforge::Emotion::Sad, ccdforge::Emotion::Guilty};
    ccd.behaviors = "Avoids calling the friend back and works extra hours instead.";
    ccd.coping_strategies = "Buries discomfort in overtime and small favors for strangers.";
    ccd.intermediate_beliefs = "If I disappoint someone once, the relationship is already over.";
    ccd.core_belief = ccdforge::CoreBelief::Unlovable;
    ccd.relevant_history = "A parent kept a running list of every childhood mistake.";
    return ccd;
}

inline ccdforge::SeedRecord sample_seed() {
    return ccdforge::SeedRecord{"t001",
                                "Missed a close friend's birthday dinner after a double shift.",
                                "I always let down the people who count on me.",
                                "overgeneralization", "Social"};
}

/// Run one full session against the shared fixture script.
inline ccdforge::SessionOutcome run_fixture_session(
    ccdforge::Attitude attitude = ccdforge::Attitude::Neutral,
    const ccdforge::Ccd& ccd = sample_ccd(), std::string seed_id = "t001") {
    auto provider = ccdforge::make_scripted_provider(script_sequence("session"));
    return ccdforge::run_session(std::move(seed_id), ccd, attitude, fast_session_config(),
                                 test_templates(), *provider);
}

// ── Structured reply builders ───────────────────────────────────

inline std::string ctrs_reply(const std::array<int, 6>& items) {
    nlohmann::ordered_json j;
    for (std::size_t i = 0; i < items.size(); ++i) {
        j[std::string(ccdforge::kCtrsItemNames[i])] = items[i];
    }
    return j.dump();
}

inline std::string panas_reply(int positive, int negative) {
    nlohmann::ordered_json j;
    for (std::string_view name : ccdforge::kPanasPositiveItems) j[std::string(name)] = positive;
    for (std::string_view name : ccdforge::kPanasNegativeItems) j[std::string(name)] = negative;
    return j.dump();
}

inline std::string recon_reply(int overall, const std::array<int, 8>& components) {
    nlohmann::ordered_json j;
    j["overall"] = overall;
    for (std::size_t i = 0; i < components.size(); ++i) {
        j[std::string(ccdforge::kCcdSlotNames[i])] = components[i];
    }
    return j.dump();
}

inline std::string directive_reply(int step, const std::string& instruction,
                                   bool phase_complete = false) {
    nlohmann::ordered_json j;
    j["step"] = step;
    if (!instruction.empty()) j["instruction"] = instruction;
    if (phase_complete) j["phase_complete"] = true;
    return j.dump();
}

// ── Deterministic RNG (xorshift64*) for property tests ──────────

class Rng {
  public:
    explicit Rng(std::uint64_t seed = 0x9e3779b97f4a7c15ull) : state_(seed ? seed : 1) {}

    std::uint64_t next() {
        state_ ^= state_ >> 12;
        state_ ^= state_ << 25;
        state_ ^= state_ >> 27;
        return state_ * 0x2545f4914f6cdd1dull;
    }

    /// Uniform in [0, bound).
    std::uint64_t below(std::uint64_t bound) { return bound == 0 ? 0 : next() % bound; }

    int in_range(int lo, int hi) {  // inclusive
        return lo + static_cast<int>(below(static_cast<std::uint64_t>(hi - lo + 1)));
    }

    bool coin() { return (next() & 1) != 0; }

    std::string word() {
        static const std::array<std::string_view, 12> pool = {
            "ledger", "harbor", "violet", "meadow", "copper", "signal",
            "quiet",  "branch", "kettle", "summit", "raven",  "tide"};
        return std::string(pool[below(pool.size())]);
    }

    std::string sentence(int words) {
        std::string out;
        for (int i = 0; i < words; ++i) {
            if (!out.empty()) out += ' ';
            out += word();
        }
        out += '.';
        return out;
    }

  private:
    std::uint64_t state_;
};

}  // namespace testsupport
