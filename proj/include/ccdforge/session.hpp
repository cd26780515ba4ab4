#pragma once

#include <algorithm>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "ccdforge/agents.hpp"
#include "ccdforge/ccd.hpp"
#include "ccdforge/gateway.hpp"
#include "ccdforge/result.hpp"
#include "ccdforge/templates.hpp"

namespace ccdforge {

// ── Configuration and record types ──────────────────────────────

struct SessionConfig {
    int max_total_turns = 40;
    std::map<Phase, int> max_turns_per_phase = {
        {Phase::Identification, 16},
        {Phase::Assessment, 6},
        {Phase::Intervention, 10},
        {Phase::Summary, 6},
    };
    int malformed_retry_limit = 3;
    std::string seed_label;  // free-form label recorded for provider selection
    RetryPolicy retry{};
};

enum class Termination { Completed, TurnLimit, MalformedOutput, ProviderFailure };

inline std::string_view to_string(Termination t) {
    switch (t) {
        case Termination::Completed: return "completed";
        case Termination::TurnLimit: return "turn_limit";
        case Termination::MalformedOutput: return "malformed_output";
        case Termination::ProviderFailure: return "provider_failure";
    }
    return "provider_failure";
}

inline Result<Termination> parse_termination(std::string_view label) {
    std::string norm = detail::lower_copy(detail::trim_copy(std::string(label)));
    for (Termination t : {Termination::Completed, Termination::TurnLimit,
                          Termination::MalformedOutput, Termination::ProviderFailure}) {
        if (norm == to_string(t)) return t;
    }
    return make_error(ErrorKind::UnknownLabel, "unknown termination \"" + std::string(label) + "\"");
}

struct PhaseTraceEntry {
    int turn_index = 0;  // transcript length when the emission happened
    Phase phase = Phase::Identification;
    int step = 0;

    bool operator==(const PhaseTraceEntry&) const = default;
};

struct ReconstructionEntry {
    int turn_index = 0;
    PartialCcd partial;

    bool operator==(const ReconstructionEntry&) const = default;
};

struct CharCounts {
    long long total = 0;
    long long client = 0;
    long long therapist = 0;

    bool operator==(const CharCounts&) const = default;
};

/// Count Unicode code points in UTF-8 text (continuation bytes excluded).
inline long long count_codepoints(std::string_view text) {
    long long n = 0;
    for (unsigned char c : text) {
        if ((c & 0xC0) != 0x80) ++n;
    }
    return n;
}

struct SessionRecord {
    std::string session_id;  // "<seed_id>:<attitude>"
    std::string seed_id;
    Ccd ground_truth_ccd;
    Attitude attitude = Attitude::Neutral;
    std::vector<Utterance> transcript;
    std::vector<ReconstructionEntry> reconstruction_history;
    PartialCcd final_partial_ccd;
    std::optional<AssessmentState> assessment;
    std::optional<InterventionState> intervention;
    std::optional<std::string> homework;
    std::vector<PhaseTraceEntry> phase_trace;
    Termination termination = Termination::ProviderFailure;
    CharCounts char_counts;

    bool operator==(const SessionRecord&) const = default;
};

/// Completed therapist/client exchange pairs.
inline int session_turns(const SessionRecord& record) {
    int therapist = 0;
    int client = 0;
    for (const Utterance& u : record.transcript) {
        (u.role == Speaker::Therapist ? therapist : client)++;
    }
    return std::min(therapist, client);
}

inline std::string make_session_id(std::string_view seed_id, Attitude attitude) {
    return std::string(seed_id) + ":" + std::string(to_string(attitude));
}

// ── Record invariants ───────────────────────────────────────────

/// Structural invariants every well-formed record satisfies; violations
/// feed the structural gate.
inline std::vector<std::string> record_violations(const SessionRecord& r) {
    std::vector<std::string> out;
    for (std::size_t i = 0; i < r.transcript.size(); ++i) {
        const Utterance& u = r.transcript[i];
        if (u.turn_index != static_cast<int>(i)) {
            out.push_back("transcript: utterance " + std::to_string(i) + " has turn_index " +
                          std::to_string(u.turn_index));
            break;
        }
        Speaker expected = i % 2 == 0 ? Speaker::Therapist : Speaker::Client;
        if (u.role != expected) {
            out.push_back("transcript: role order broken at index " + std::to_string(i));
            break;
        }
        if (detail::trim_copy(u.text).empty()) {
            out.push_back("transcript: empty utterance at index " + std::to_string(i));
            break;
        }
    }
    for (std::size_t i = 1; i < r.phase_trace.size(); ++i) {
        if (static_cast<int>(r.phase_trace[i].phase) < static_cast<int>(r.phase_trace[i - 1].phase)) {
            out.push_back("phase_trace: phase order regresses at entry " + std::to_string(i));
            break;
        }
    }
    if (r.termination == Termination::Completed) {
        if (r.phase_trace.empty() || r.phase_trace.back().phase != Phase::Done) {
            out.push_back("completed session without a final done phase");
        }
        if (!r.assessment) out.push_back("completed session without assessment state");
        if (!r.intervention) out.push_back("completed session without intervention state");
    }
    if (r.char_counts.total != r.char_counts.client + r.char_counts.therapist) {
        out.push_back("char_counts: client + therapist != total");
    }
    double prev = -1.0;
    for (const ReconstructionEntry& e : r.reconstruction_history) {
        double c = completeness(e.partial);
        if (c + 1e-12 < prev) {
            out.push_back("reconstruction_history: completeness regresses");
            break;
        }
        prev = c;
    }
    return out;
}

// ── The engine ──────────────────────────────────────────────────

struct SessionOutcome {
    SessionRecord record;
    std::vector<PromptLogEntry> prompt_log;
};

/// Run one full session. Never throws and never fails: any agent or
/// provider error is folded into the record's termination cause.
inline SessionOutcome run_session(std::string seed_id, const Ccd& ccd, Attitude attitude,
                                  const SessionConfig& config, const TemplateLibrary& templates,
                                  Provider& provider) {
    SessionOutcome outcome;
    SessionRecord& record = outcome.record;
    record.seed_id = seed_id;
    record.session_id = make_session_id(seed_id, attitude);
    record.ground_truth_ccd = ccd;
    record.attitude = attitude;

    AgentContext ctx{templates, provider, config.retry, config.malformed_retry_limit,
                     [&outcome, &record](const PromptLogEntry& entry) {
                         PromptLogEntry stamped = entry;
                         stamped.visible_partial_entries =
                             static_cast<int>(record.reconstruction_history.size());
                         outcome.prompt_log.push_back(std::move(stamped));
                     }};

    PartialCcd partial = new_partial_ccd();
    PhaseTracker tracker;
    InterventionDraft draft;
    std::optional<InterventionState> intervention;

    auto classify = [](const Error& err) {
        switch (err.kind) {
            case ErrorKind::Transport:
            case ErrorKind::Timeout:
            case ErrorKind::ScriptExhausted:
            case ErrorKind::Io:
            case ErrorKind::NotFound:
                return Termination::ProviderFailure;
            default:
                return Termination::MalformedOutput;
        }
    };

    auto phase_cap = [&config](Phase p) {
        auto it = config.max_turns_per_phase.find(p);
        return it == config.max_turns_per_phase.end() ? std::numeric_limits<int>::max()
                                                      : it->second;
    };

    record.termination = Termination::TurnLimit;  // defensive default
    while (true) {
        if (tracker.phase == Phase::Done) {
            record.termination = Termination::Completed;
            record.phase_trace.push_back(
                PhaseTraceEntry{static_cast<int>(record.transcript.size()), Phase::Done, 0});
            break;
        }
        if (tracker.total_turns >= config.max_total_turns ||
            tracker.turns_in_phase >= phase_cap(tracker.phase)) {
            record.termination = Termination::TurnLimit;
            break;
        }

        // One control emission: a directive for this turn, or a phase boundary.
        const int at_turn = static_cast<int>(record.transcript.size());
        Strategy strategy;
        bool had_error = false;
        switch (tracker.phase) {
            case Phase::Identification: {
                auto step = identification_step(partial, tracker, record.transcript, ctx);
                if (!step) {
                    record.termination = classify(step.error());
                    had_error = true;
                    break;
                }
                strategy = step.value().strategy;
                tracker = step.value().tracker;
                partial = step.value().partial;
                record.reconstruction_history.push_back(ReconstructionEntry{at_turn, partial});
                break;
            }
            case Phase::Assessment: {
                auto step = assessment_step(partial, tracker, record.transcript, ctx);
                if (!step) {
                    record.termination = classify(step.error());
                    had_error = true;
                    break;
                }
                strategy = step.value().strategy;
                tracker = step.value().tracker;
                if (step.value().state) record.assessment = step.value().state;
                break;
            }
            case Phase::Intervention: {
                auto step = intervention_step(draft, tracker, record.transcript, ctx);
                if (!step) {
                    record.termination = classify(step.error());
                    had_error = true;
                    break;
                }
                strategy = step.value().strategy;
                tracker = step.value().tracker;
                draft = step.value().draft;
                if (step.value().final_state) {
                    intervention = step.value().final_state;
                    record.intervention = intervention;
                    if (intervention->experiment_assigned && intervention->behavioral_experiment) {
                        record.homework = intervention->behavioral_experiment;
                    }
                }
                break;
            }
            case Phase::Summary: {
                if (!intervention) {  // unreachable by construction; guard anyway
                    record.termination = Termination::MalformedOutput;
                    had_error = true;
                    break;
                }
                auto step = summary_step(*intervention, tracker, record.transcript, ctx);
                if (!step) {
                    record.termination = classify(step.error());
                    had_error = true;
                    break;
                }
                strategy = step.value().strategy;
                tracker = step.value().tracker;
                break;
            }
            case Phase::Done:
                break;  // handled at loop top
        }
        if (had_error) break;

        record.phase_trace.push_back(PhaseTraceEntry{at_turn, strategy.phase, strategy.step});
        if (strategy.is_transition || strategy.is_terminal) {
            continue;  // boundaries produce no utterance; loop re-enters with the new phase
        }

        auto therapist = therapist_respond(partial, strategy, record.transcript, ctx);
        if (!therapist) {
            record.termination = classify(therapist.error());
            break;
        }
        record.transcript.push_back(therapist.value());
        auto client = client_respond(ccd, attitude, record.transcript, ctx);
        if (!client) {
            record.termination = classify(client.error());
            break;
        }
        record.transcript.push_back(client.value());
        ++tracker.turns_in_phase;
        ++tracker.total_turns;
    }

    record.final_partial_ccd = partial;
    for (const Utterance& u : record.transcript) {
        long long n = count_codepoints(u.text);
        (u.role == Speaker::Client ? record.char_counts.client : record.char_counts.therapist) += n;
    }
    record.char_counts.total = record.char_counts.client + record.char_counts.therapist;
    return outcome;
}

// ── Asymmetry audit ─────────────────────────────────────────────

struct AuditViolation {
    std::string component;  // which ground-truth slot leaked
    std::string tag;        // prompt that carried it
    int turn_index = 0;

    bool operator==(const AuditViolation&) const = default;
};

struct AuditReport {
    std::vector<AuditViolation> violations;

    bool clean() const { return violations.empty(); }
};

/// Check every therapist- and control-side prompt for ground-truth text
/// that the therapist side could not legitimately know: flagged when a
/// component's text appears in the prompt while absent from both the
/// dialogue so far and the reconstruction visible at render time.
inline AuditReport audit_asymmetry(const SessionRecord& record,
                                   const std::vector<PromptLogEntry>& prompt_log) {
    AuditReport report;
    const Ccd& truth = record.ground_truth_ccd;

    std::vector<std::pair<std::string, std::string>> needles;
    auto add_needle = [&needles](std::string_view component, const std::string& text) {
        if (!detail::trim_copy(text).empty()) needles.emplace_back(component, text);
    };
    add_needle("situation", truth.situation);
    add_needle("automatic_thoughts", truth.automatic_thoughts);
    add_needle("behaviors", truth.behaviors);
    add_needle("coping_strategies", truth.coping_strategies);
    add_needle("intermediate_beliefs", truth.intermediate_beliefs);
    add_needle("relevant_history", truth.relevant_history);
    {
        std::string joined;
        for (Emotion e : truth.emotions) {
            if (!joined.empty()) joined += ", ";
            joined += std::string(to_string(e));
        }
        add_needle("emotions", joined);
        // core_belief is a single taxonomy word; templates legitimately
        // enumerate the taxonomy, so it cannot serve as a leak marker.
    }

    for (const PromptLogEntry& entry : prompt_log) {
        if (entry.side != "therapist" && entry.side != "control") continue;

        std::string known;
        for (const Utterance& u : record.transcript) {
            if (u.turn_index >= entry.turn_index) break;
            known += u.text;
            known += '\n';
        }
        int visible = std::min<int>(entry.visible_partial_entries,
                                    static_cast<int>(record.reconstruction_history.size()));
        if (visible > 0) {
            const PartialCcd& p = record.reconstruction_history[visible - 1].partial;
            for (const std::string* slot :
                 {p.situation ? &*p.situation : nullptr,
                  p.automatic_thoughts ? &*p.automatic_thoughts : nullptr,
                  p.behaviors ? &*p.behaviors : nullptr,
                  p.coping_strategies ? &*p.coping_strategies : nullptr,
                  p.intermediate_beliefs ? &*p.intermediate_beliefs : nullptr,
                  p.relevant_history ? &*p.relevant_history : nullptr}) {
                if (slot != nullptr) {
                    known += *slot;
                    known += '\n';
                }
            }
            if (p.emotions) {
                std::string joined;
                for (Emotion e : *p.emotions) {
                    if (!joined.empty()) joined += ", ";
                    joined += std::string(to_string(e));
                }
                known += joined;
                known += '\n';
            }
        }

        for (const auto& [component, text] : needles) {
            if (detail::contains_normalized(entry.prompt, text) &&
                !detail::contains_normalized(known, text)) {
                report.violations.push_back(AuditViolation{component, entry.tag, entry.turn_index});
            }
        }
    }
    return report;
}

// ── JSON round-trip ─────────────────────────────────────────────

inline nlohmann::ordered_json utterance_to_json(const Utterance& u) {
    nlohmann::ordered_json j;
    j["role"] = std::string(to_string(u.role));
    j["text"] = u.text;
    j["turn_index"] = u.turn_index;
    if (u.strategy_ref) j["strategy_ref"] = *u.strategy_ref;
    return j;
}

inline Result<Utterance> utterance_from_json(const nlohmann::json& j) {
    if (!j.is_object() || !j.contains("role") || !j.contains("text") || !j.contains("turn_index")) {
        return make_error(ErrorKind::SchemaViolation, "utterance: missing role/text/turn_index");
    }
    if (!j.at("role").is_string() || !j.at("text").is_string() ||
        !j.at("turn_index").is_number_integer()) {
        return make_error(ErrorKind::SchemaViolation, "utterance: wrong field types");
    }
    auto role = parse_speaker(j.at("role").get<std::string>());
    if (!role) return role.error();
    Utterance u;
    u.role = role.value();
    u.text = j.at("text").get<std::string>();
    u.turn_index = j.at("turn_index").get<int>();
    if (j.contains("strategy_ref")) {
        if (!j.at("strategy_ref").is_string()) {
            return make_error(ErrorKind::SchemaViolation, "utterance: strategy_ref must be string");
        }
        u.strategy_ref = j.at("strategy_ref").get<std::string>();
    }
    return u;
}

inline nlohmann::ordered_json assessment_to_json(const AssessmentState& a) {
    nlohmann::ordered_json j;
    j["primary_emotion"] = std::string(to_string(a.primary_emotion));
    j["emotion_intensity_pct"] = a.emotion_intensity_pct;
    j["belief_in_automatic_thought_pct"] = a.belief_in_automatic_thought_pct;
    return j;
}

inline nlohmann::ordered_json intervention_to_json(const InterventionState& s) {
    nlohmann::ordered_json j;
    j["alternative_thought"] = s.alternative_thought;
    j["belief_in_alternative_pct"] = s.belief_in_alternative_pct;
    if (s.behavioral_experiment) j["behavioral_experiment"] = *s.behavioral_experiment;
    j["experiment_assigned"] = s.experiment_assigned;
    return j;
}

inline Result<InterventionState> intervention_from_json(const nlohmann::json& j) {
    if (!j.is_object() || !j.contains("alternative_thought") ||
        !j.contains("belief_in_alternative_pct") || !j.contains("experiment_assigned")) {
        return make_error(ErrorKind::SchemaViolation, "intervention: missing fields");
    }
    InterventionState s;
    if (!j.at("alternative_thought").is_string() || !j.at("experiment_assigned").is_boolean()) {
        return make_error(ErrorKind::SchemaViolation, "intervention: wrong field types");
    }
    s.alternative_thought = j.at("alternative_thought").get<std::string>();
    auto pct = normalize_percentage(j.at("belief_in_alternative_pct"), "belief_in_alternative_pct");
    if (!pct) return pct.error();
    s.belief_in_alternative_pct = pct.value();
    s.experiment_assigned = j.at("experiment_assigned").get<bool>();
    if (j.contains("behavioral_experiment")) {
        if (!j.at("behavioral_experiment").is_string()) {
            return make_error(ErrorKind::SchemaViolation,
                              "intervention: behavioral_experiment must be string");
        }
        s.behavioral_experiment = j.at("behavioral_experiment").get<std::string>();
    }
    if (s.experiment_assigned && !s.behavioral_experiment) {
        return make_error(ErrorKind::SchemaViolation,
                          "intervention: experiment assigned but missing");
    }
    return s;
}

inline nlohmann::ordered_json session_record_to_json(const SessionRecord& r) {
    nlohmann::ordered_json j;
    j["session_id"] = r.session_id;
    j["seed_id"] = r.seed_id;
    j["ground_truth_ccd"] = ccd_to_json(r.ground_truth_ccd);
    j["attitude"] = std::string(to_string(r.attitude));
    nlohmann::ordered_json transcript = nlohmann::ordered_json::array();
    for (const Utterance& u : r.transcript) transcript.push_back(utterance_to_json(u));
    j["transcript"] = std::move(transcript);
    nlohmann::ordered_json recon = nlohmann::ordered_json::array();
    for (const ReconstructionEntry& e : r.reconstruction_history) {
        nlohmann::ordered_json entry;
        entry["turn_index"] = e.turn_index;
        entry["partial_ccd"] = partial_ccd_to_json(e.partial);
        recon.push_back(std::move(entry));
    }
    j["reconstruction_history"] = std::move(recon);
    j["final_partial_ccd"] = partial_ccd_to_json(r.final_partial_ccd);
    if (r.assessment) j["assessment"] = assessment_to_json(*r.assessment);
    if (r.intervention) j["intervention"] = intervention_to_json(*r.intervention);
    if (r.homework) j["homework"] = *r.homework;
    nlohmann::ordered_json trace = nlohmann::ordered_json::array();
    for (const PhaseTraceEntry& e : r.phase_trace) {
        nlohmann::ordered_json entry;
        entry["turn_index"] = e.turn_index;
        entry["phase"] = std::string(to_string(e.phase));
        entry["step"] = e.step;
        trace.push_back(std::move(entry));
    }
    j["phase_trace"] = std::move(trace);
    j["termination"] = std::string(to_string(r.termination));
    nlohmann::ordered_json counts;
    counts["total"] = r.char_counts.total;
    counts["client"] = r.char_counts.client;
    counts["therapist"] = r.char_counts.therapist;
    j["char_counts"] = std::move(counts);
    return j;
}

inline Result<SessionRecord> session_record_from_json(const nlohmann::json& j) {
    if (!j.is_object()) {
        return make_error(ErrorKind::SchemaViolation, "session record: expected an object");
    }
    for (std::string_view field : {"session_id", "seed_id", "ground_truth_ccd", "attitude",
                                   "transcript", "reconstruction_history", "final_partial_ccd",
                                   "phase_trace", "termination", "char_counts"}) {
        if (!j.contains(field)) {
            return make_error(ErrorKind::MissingField,
                              "session record: missing " + std::string(field));
        }
    }
    SessionRecord r;
    if (!j.at("session_id").is_string() || !j.at("seed_id").is_string()) {
        return make_error(ErrorKind::SchemaViolation, "session record: bad id fields");
    }
    r.session_id = j.at("session_id").get<std::string>();
    r.seed_id = j.at("seed_id").get<std::string>();
    auto ccd = ccd_from_json(j.at("ground_truth_ccd"));
    if (!ccd) return ccd.error();
    r.ground_truth_ccd = std::move(ccd.value());
    if (!j.at("attitude").is_string()) {
        return make_error(ErrorKind::SchemaViolation, "session record: attitude must be string");
    }
    auto attitude = parse_attitude(j.at("attitude").get<std::string>());
    if (!attitude) return attitude.error();
    r.attitude = attitude.value();
    if (!j.at("transcript").is_array()) {
        return make_error(ErrorKind::SchemaViolation, "session record: transcript must be array");
    }
    for (const auto& item : j.at("transcript")) {
        auto u = utterance_from_json(item);
        if (!u) return u.error();
        r.transcript.push_back(std::move(u.value()));
    }
    if (!j.at("reconstruction_history").is_array()) {
        return make_error(ErrorKind::SchemaViolation,
                          "session record: reconstruction_history must be array");
    }
    for (const auto& item : j.at("reconstruction_history")) {
        if (!item.is_object() || !item.contains("turn_index") || !item.contains("partial_ccd") ||
            !item.at("turn_index").is_number_integer()) {
            return make_error(ErrorKind::SchemaViolation,
                              "session record: bad reconstruction entry");
        }
        auto partial = partial_ccd_from_json(item.at("partial_ccd"));
        if (!partial) return partial.error();
        r.reconstruction_history.push_back(
            ReconstructionEntry{item.at("turn_index").get<int>(), std::move(partial.value())});
    }
    auto final_partial = partial_ccd_from_json(j.at("final_partial_ccd"));
    if (!final_partial) return final_partial.error();
    r.final_partial_ccd = std::move(final_partial.value());
    if (j.contains("assessment")) {
        auto state = parse_assessment_fields(j.at("assessment"));
        if (!state) return state.error();
        r.assessment = state.value();
    }
    if (j.contains("intervention")) {
        auto state = intervention_from_json(j.at("intervention"));
        if (!state) return state.error();
        r.intervention = std::move(state.value());
    }
    if (j.contains("homework")) {
        if (!j.at("homework").is_string()) {
            return make_error(ErrorKind::SchemaViolation, "session record: homework must be string");
        }
        r.homework = j.at("homework").get<std::string>();
    }
    if (!j.at("phase_trace").is_array()) {
        return make_error(ErrorKind::SchemaViolation, "session record: phase_trace must be array");
    }
    for (const auto& item : j.at("phase_trace")) {
        if (!item.is_object() || !item.contains("turn_index") || !item.contains("phase") ||
            !item.contains("step") || !item.at("turn_index").is_number_integer() ||
            !item.at("phase").is_string() || !item.at("step").is_number_integer()) {
            return make_error(ErrorKind::SchemaViolation, "session record: bad trace entry");
        }
        auto phase = parse_phase(item.at("phase").get<std::string>());
        if (!phase) return phase.error();
        r.phase_trace.push_back(PhaseTraceEntry{item.at("turn_index").get<int>(), phase.value(),
                                                item.at("step").get<int>()});
    }
    if (!j.at("termination").is_string()) {
        return make_error(ErrorKind::SchemaViolation, "session record: termination must be string");
    }
    auto termination = parse_termination(j.at("termination").get<std::string>());
    if (!termination) return termination.error();
    r.termination = termination.value();
    const auto& counts = j.at("char_counts");
    if (!counts.is_object() || !counts.contains("total") || !counts.contains("client") ||
        !counts.contains("therapist")) {
        return make_error(ErrorKind::SchemaViolation, "session record: bad char_counts");
    }
    r.char_counts.total = counts.at("total").get<long long>();
    r.char_counts.client = counts.at("client").get<long long>();
    r.char_counts.therapist = counts.at("therapist").get<long long>();
    return r;
}

// ── Replay rendering ────────────────────────────────────────────

/// Deterministic plain-text rendering: strategies interleaved with the
/// utterances they produced, under one header per phase.
inline std::string replay(const SessionRecord& record) {
    std::string out = "=== session " + record.session_id + " (attitude " +
                      std::string(to_string(record.attitude)) + ", termination " +
                      std::string(to_string(record.termination)) + ") ===\n";
    Phase current = Phase::Done;
    bool any_phase = false;
    std::size_t trace_pos = 0;
    auto emit_trace_at = [&](int turn) {
        while (trace_pos < record.phase_trace.size() &&
               record.phase_trace[trace_pos].turn_index <= turn) {
            const PhaseTraceEntry& e = record.phase_trace[trace_pos++];
            if (!any_phase || e.phase != current) {
                out += "--- " + std::string(to_string(e.phase)) + " ---\n";
                current = e.phase;
                any_phase = true;
            }
            if (e.phase != Phase::Done) {
                out += "[strategy " + std::string(to_string(e.phase)) + ":" +
                       std::to_string(e.step) + "]\n";
            }
        }
    };
    for (const Utterance& u : record.transcript) {
        emit_trace_at(u.turn_index);
        out += u.role == Speaker::Therapist ? "Therapist: " : "Client: ";
        out += u.text;
        out += '\n';
    }
    emit_trace_at(std::numeric_limits<int>::max());
    return out;
}

}  // namespace ccdforge
