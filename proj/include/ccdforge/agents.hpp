#pragma once

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "ccdforge/ccd.hpp"
#include "ccdforge/gateway.hpp"
#include "ccdforge/prompt.hpp"
#include "ccdforge/result.hpp"
#include "ccdforge/seeds.hpp"
#include "ccdforge/structured.hpp"
#include "ccdforge/taxonomy.hpp"
#include "ccdforge/templates.hpp"

namespace ccdforge {

// ── Dialogue structure ──────────────────────────────────────────

enum class Speaker { Therapist, Client };

inline std::string_view to_string(Speaker s) {
    return s == Speaker::Therapist ? "therapist" : "client";
}

inline Result<Speaker> parse_speaker(std::string_view label) {
    std::string norm = detail::lower_copy(detail::trim_copy(std::string(label)));
    if (norm == "therapist") return Speaker::Therapist;
    if (norm == "client") return Speaker::Client;
    return make_error(ErrorKind::UnknownLabel, "unknown speaker \"" + std::string(label) + "\"");
}

struct Utterance {
    Speaker role = Speaker::Therapist;
    std::string text;
    int turn_index = 0;  // ordinal position in the transcript
    std::optional<std::string> strategy_ref;  // therapist only, "<phase>:<step>"

    bool operator==(const Utterance&) const = default;
};

// ── Phase machine ───────────────────────────────────────────────

enum class Phase { Identification, Assessment, Intervention, Summary, Done };

inline constexpr std::array<Phase, 5> kAllPhases = {
    Phase::Identification, Phase::Assessment, Phase::Intervention, Phase::Summary, Phase::Done,
};

inline std::string_view to_string(Phase p) {
    switch (p) {
        case Phase::Identification: return "identification";
        case Phase::Assessment: return "assessment";
        case Phase::Intervention: return "intervention";
        case Phase::Summary: return "summary";
        case Phase::Done: return "done";
    }
    return "done";
}

inline Result<Phase> parse_phase(std::string_view label) {
    std::string norm = detail::lower_copy(detail::trim_copy(std::string(label)));
    for (Phase p : kAllPhases) {
        if (norm == to_string(p)) return p;
    }
    return make_error(ErrorKind::UnknownLabel, "unknown phase \"" + std::string(label) + "\"");
}

/// Highest legal step number within a phase.
inline int max_step(Phase p) {
    switch (p) {
        case Phase::Identification: return 8;
        case Phase::Assessment: return 3;
        case Phase::Intervention: return 5;
        case Phase::Summary: return 3;
        case Phase::Done: return 0;
    }
    return 0;
}

/// The fixed forward order; Done is absorbing and has no successor.
inline Result<Phase> next_phase(Phase p) {
    switch (p) {
        case Phase::Identification: return Phase::Assessment;
        case Phase::Assessment: return Phase::Intervention;
        case Phase::Intervention: return Phase::Summary;
        case Phase::Summary: return Phase::Done;
        case Phase::Done:
            return make_error(ErrorKind::InvalidArgument, "done phase has no successor");
    }
    return make_error(ErrorKind::InvalidArgument, "unknown phase");
}

struct PhaseTracker {
    Phase phase = Phase::Identification;
    int step = 1;
    int turns_in_phase = 0;
    int total_turns = 0;

    bool operator==(const PhaseTracker&) const = default;
};

/// Advance into the successor phase, resetting step and per-phase turns.
inline Result<PhaseTracker> enter_next_phase(const PhaseTracker& t) {
    auto next = next_phase(t.phase);
    if (!next) return next.error();
    PhaseTracker out = t;
    out.phase = next.value();
    out.step = next.value() == Phase::Done ? 0 : 1;
    out.turns_in_phase = 0;
    return out;
}

/// The per-turn therapeutic directive, or a phase boundary marker.
struct Strategy {
    Phase phase = Phase::Identification;
    int step = 1;
    std::string instruction;
    bool is_transition = false;
    bool is_terminal = false;

    bool operator==(const Strategy&) const = default;
};

inline std::string strategy_ref_string(const Strategy& s) {
    return std::string(to_string(s.phase)) + ":" + std::to_string(s.step);
}

// ── Completed clinical states ───────────────────────────────────

/// The assessment measurements, complete by construction.
using AssessmentState = AssessmentFields;

/// The intervention outcome after the phase closes.
struct InterventionState {
    std::string alternative_thought;
    int belief_in_alternative_pct = 0;
    std::optional<std::string> behavioral_experiment;
    bool experiment_assigned = false;

    bool operator==(const InterventionState&) const = default;
};

/// Belief at or below this value requires a behavioral experiment.
inline constexpr int kExperimentBeliefCeilingPct = 89;

// ── Prompt logging and call context ─────────────────────────────

/// One rendered prompt, recorded for the asymmetry audit.
struct PromptLogEntry {
    std::string tag;    // e.g. "control_identification"
    std::string side;   // builder | client | therapist | control | judge
    int turn_index = 0;  // transcript length at render time
    int visible_partial_entries = 0;  // reconstruction entries known at render time
    std::string prompt;  // system and user text concatenated
};

using PromptSink = std::function<void(const PromptLogEntry&)>;

/// Everything an agent call needs besides its domain inputs.
struct AgentContext {
    const TemplateLibrary& templates;
    Provider& provider;
    RetryPolicy retry{};
    int malformed_retry_limit = 3;  // re-asks after an unusable reply
    PromptSink sink;                // optional prompt recorder
};

// ── Rendering helpers ───────────────────────────────────────────

inline std::string render_history(const std::vector<Utterance>& transcript) {
    std::string out;
    for (const Utterance& u : transcript) {
        out += u.role == Speaker::Therapist ? "Therapist: " : "Client: ";
        out += u.text;
        out += '\n';
    }
    return out;
}

inline std::string render_ccd_block(const Ccd& ccd) { return ccd_to_json(ccd).dump(2); }

inline std::string render_partial_block(const PartialCcd& partial) {
    if (filled_slot_count(partial) == 0) return "(nothing recorded yet)";
    return partial_ccd_to_json(partial).dump(2);
}

// ── Shared ask machinery ────────────────────────────────────────

namespace detail {

struct AskSpec {
    std::string template_id;
    std::map<std::string, std::string> bindings;
    std::string side;
    std::string tag;
    int turn_index = 0;
    std::string task;  // leading line of the user message
    const std::vector<Utterance>* history = nullptr;
    double temperature = 0.7;
};

inline Result<std::string> ask_once(const AgentContext& ctx, const AskSpec& spec,
                                    const std::string& reminder) {
    auto tmpl = ctx.templates.get(spec.template_id);
    if (!tmpl) return tmpl.error();
    auto system = render_prompt(tmpl.value(), spec.bindings);
    if (!system) return system.error();
    std::string user = spec.task;
    if (spec.history != nullptr && !spec.history->empty()) {
        user += "\n\nDialogue so far:\n" + render_history(*spec.history);
    }
    if (!reminder.empty()) user += "\n\n" + reminder;
    if (ctx.sink) {
        ctx.sink(PromptLogEntry{spec.tag, spec.side, spec.turn_index, 0,
                                system.value() + "\n\n" + user});
    }
    ChatRequest request;
    request.messages = {{ChatRole::System, system.value()}, {ChatRole::User, user}};
    request.temperature = spec.temperature;
    request.tag = spec.tag;
    auto response = chat(ctx.provider, request, ctx.retry);
    if (!response) return response.error();
    return std::move(response.value().content);
}

/// Ask, validate, and re-ask with a format reminder on unusable replies,
/// up to the configured limit. Transport failures and illegal step jumps
/// abort immediately — re-asking cannot cure either.
template <typename T, typename Validate>
Result<T> ask_validated(const AgentContext& ctx, const AskSpec& spec, Validate&& validate) {
    std::string reminder;
    Error last = make_error(ErrorKind::MalformedOutput, "no reply");
    int asks = std::max(ctx.malformed_retry_limit, 0) + 1;
    for (int attempt = 0; attempt < asks; ++attempt) {
        auto raw = ask_once(ctx, spec, reminder);
        if (!raw) return raw.error();
        Result<T> parsed = validate(raw.value());
        if (parsed) return parsed;
        last = parsed.error();
        if (last.kind == ErrorKind::IllegalStep) return last;
        reminder = "Your previous reply was not usable (" + last.message +
                   "). Reply again, following the required format exactly.";
    }
    return make_error(ErrorKind::MalformedOutput,
                      spec.tag + ": unusable reply after " + std::to_string(asks) +
                          " attempts; last problem: " + last.message);
}

/// Normalize whitespace runs to single spaces for containment checks.
inline std::string squash_ws(std::string_view text) {
    std::string out;
    out.reserve(text.size());
    bool in_ws = false;
    for (char c : text) {
        bool ws = c == ' ' || c == '\t' || c == '\n' || c == '\r';
        if (ws) {
            in_ws = true;
            continue;
        }
        if (in_ws && !out.empty()) out += ' ';
        in_ws = false;
        out += c;
    }
    return out;
}

inline bool contains_normalized(std::string_view haystack, std::string_view needle) {
    std::string h = squash_ws(haystack);
    std::string n = squash_ws(needle);
    if (n.empty()) return false;
    return h.find(n) != std::string::npos;
}

/// Steps may linger or advance by one; anything else is a jump.
inline Result<void> check_step_claim(const PhaseTracker& tracker, int claimed) {
    if (claimed != tracker.step && claimed != tracker.step + 1) {
        return make_error(ErrorKind::IllegalStep,
                          std::string(to_string(tracker.phase)) + ": reply claims step " +
                              std::to_string(claimed) + " while tracker is at step " +
                              std::to_string(tracker.step));
    }
    if (claimed > max_step(tracker.phase)) {
        return make_error(ErrorKind::IllegalStep,
                          std::string(to_string(tracker.phase)) + ": step " +
                              std::to_string(claimed) + " beyond phase maximum " +
                              std::to_string(max_step(tracker.phase)));
    }
    return Result<void>{};
}

}  // namespace detail

// ── Profile construction ────────────────────────────────────────

/// Expand a seed into a complete, validated CCD via the builder prompt.
/// The seed's own scenario and automatic thought backfill those two slots
/// if the reply omits them; every other slot must be generated.
inline Result<Ccd> construct_ccd(const SeedRecord& seed, const AgentContext& ctx) {
    detail::AskSpec spec;
    spec.template_id = "ccd_builder";
    spec.bindings = {{"scenario", seed.scenario},
                     {"automatic_thought", seed.automatic_thought},
                     {"distortion_category", seed.distortion_category},
                     {"life_domain", seed.life_domain}};
    spec.side = "builder";
    spec.tag = "ccd_builder";
    spec.task = "Produce the complete profile now as a single JSON object.";
    return detail::ask_validated<Ccd>(ctx, spec, [&](const std::string& raw) -> Result<Ccd> {
        auto extracted = extract_json_object(raw);
        if (!extracted) return extracted.error();
        auto partial = partial_ccd_from_json(extracted.value());
        if (!partial) return partial.error();
        PartialCcd p = std::move(partial.value());
        if (!p.situation) p.situation = seed.scenario;
        if (!p.automatic_thoughts) p.automatic_thoughts = seed.automatic_thought;
        if (!p.emotions) {
            return make_error(ErrorKind::MissingField, "profile missing emotions");
        }
        if (!p.core_belief) {
            return make_error(ErrorKind::MissingField, "profile missing core_belief");
        }
        Ccd ccd;
        ccd.situation = p.situation.value_or("");
        ccd.automatic_thoughts = p.automatic_thoughts.value_or("");
        ccd.emotions = canonical_emotions(*p.emotions);
        ccd.behaviors = p.behaviors.value_or("");
        ccd.coping_strategies = p.coping_strategies.value_or("");
        ccd.intermediate_beliefs = p.intermediate_beliefs.value_or("");
        ccd.core_belief = *p.core_belief;
        ccd.relevant_history = p.relevant_history.value_or("");
        if (auto report = validate_ccd(ccd); !report.ok()) {
            return make_error(ErrorKind::MissingField, "profile " + report.violations.front());
        }
        return ccd;
    });
}

// ── Role agents ─────────────────────────────────────────────────

/// Client turn: full ground-truth profile + attitude persona + history.
inline Result<Utterance> client_respond(const Ccd& ccd, Attitude attitude,
                                        const std::vector<Utterance>& history,
                                        const AgentContext& ctx) {
    if (!history.empty() && history.back().role != Speaker::Therapist) {
        return make_error(ErrorKind::InvalidArgument,
                          "client_respond: last message must be the therapist's");
    }
    detail::AskSpec spec;
    spec.template_id = std::string("client_") + std::string(to_string(attitude));
    spec.bindings = {{"ccd", render_ccd_block(ccd)}};
    spec.side = "client";
    spec.tag = spec.template_id;
    spec.turn_index = static_cast<int>(history.size());
    spec.task = "Continue the session as the client. Reply with your next utterance only.";
    spec.history = &history;
    auto text = detail::ask_validated<std::string>(
        ctx, spec, [](const std::string& raw) -> Result<std::string> {
            std::string trimmed = detail::trim_copy(raw);
            if (trimmed.empty()) {
                return make_error(ErrorKind::MalformedOutput, "empty client utterance");
            }
            return trimmed;
        });
    if (!text) return text.error();
    return Utterance{Speaker::Client, std::move(text.value()),
                     static_cast<int>(history.size()), std::nullopt};
}

/// Therapist turn: sees ONLY the reconstruction, the directive, and the
/// dialogue — never the ground truth. The prompt sink makes that auditable.
inline Result<Utterance> therapist_respond(const PartialCcd& partial, const Strategy& strategy,
                                           const std::vector<Utterance>& history,
                                           const AgentContext& ctx) {
    if (strategy.is_transition || strategy.is_terminal) {
        return make_error(ErrorKind::InvalidArgument,
                          "therapist_respond: cannot speak a phase boundary");
    }
    if (!history.empty() && history.back().role != Speaker::Client) {
        return make_error(ErrorKind::InvalidArgument,
                          "therapist_respond: last message must be the client's");
    }
    detail::AskSpec spec;
    spec.template_id = "therapist";
    spec.bindings = {{"partial_ccd", render_partial_block(partial)},
                     {"strategy_instruction", strategy.instruction}};
    spec.side = "therapist";
    spec.tag = "therapist";
    spec.turn_index = static_cast<int>(history.size());
    spec.task = "Reply with your next utterance only.";
    spec.history = &history;
    auto text = detail::ask_validated<std::string>(
        ctx, spec, [](const std::string& raw) -> Result<std::string> {
            std::string trimmed = detail::trim_copy(raw);
            if (trimmed.empty()) {
                return make_error(ErrorKind::MalformedOutput, "empty therapist utterance");
            }
            return trimmed;
        });
    if (!text) return text.error();
    return Utterance{Speaker::Therapist, std::move(text.value()),
                     static_cast<int>(history.size()), strategy_ref_string(strategy)};
}

// ── Control sub-agents ──────────────────────────────────────────

struct IdentificationResult {
    Strategy strategy;
    PartialCcd partial;
    PhaseTracker tracker;
};

/// One identification control call: parse a directive plus any newly
/// inferred slots, merge them, and either advance within the phase or —
/// once step 8 completes — hand over to assessment.
inline Result<IdentificationResult> identification_step(const PartialCcd& partial,
                                                        const PhaseTracker& tracker,
                                                        const std::vector<Utterance>& history,
                                                        const AgentContext& ctx) {
    if (tracker.phase != Phase::Identification) {
        return make_error(ErrorKind::InvalidArgument, "identification_step: wrong phase");
    }
    detail::AskSpec spec;
    spec.template_id = "control_identification";
    spec.bindings = {{"partial_ccd", render_partial_block(partial)},
                     {"current_step", std::to_string(tracker.step)}};
    spec.side = "control";
    spec.tag = "control_identification";
    spec.turn_index = static_cast<int>(history.size());
    spec.task = "Decide the directive for the next therapist turn.";
    spec.history = &history;
    auto reply = detail::ask_validated<CcdUpdateReply>(
        ctx, spec, [&](const std::string& raw) -> Result<CcdUpdateReply> {
            auto extracted = extract_json_object(raw);
            if (!extracted) return extracted.error();
            auto parsed = parse_ccd_update(extracted.value());
            if (!parsed) return parsed.error();
            if (auto legal = detail::check_step_claim(tracker, parsed.value().directive.step);
                !legal) {
                return legal.error();
            }
            const DirectiveReply& d = parsed.value().directive;
            if (d.phase_complete && d.step != max_step(Phase::Identification)) {
                return make_error(ErrorKind::SchemaViolation,
                                  "phase_complete claimed before step 8");
            }
            if (!d.phase_complete && ccdforge::detail::trim_copy(d.instruction).empty()) {
                return make_error(ErrorKind::SchemaViolation, "directive without instruction");
            }
            return parsed;
        });
    if (!reply) return reply.error();
    const CcdUpdateReply& r = reply.value();
    IdentificationResult out{Strategy{Phase::Identification, r.directive.step,
                                      r.directive.instruction, r.directive.phase_complete, false},
                             merge_partial(partial, r.update), tracker};
    out.tracker.step = r.directive.step;
    if (r.directive.phase_complete) {
        auto next = enter_next_phase(out.tracker);
        if (!next) return next.error();
        out.tracker = next.value();
    }
    return out;
}

struct AssessmentResult {
    Strategy strategy;
    std::optional<AssessmentState> state;  // present exactly on transition
    PhaseTracker tracker;
};

/// One assessment control call: directive at steps 1–2; the step-3 close
/// must carry the complete measurement state.
inline Result<AssessmentResult> assessment_step(const PartialCcd& partial,
                                                const PhaseTracker& tracker,
                                                const std::vector<Utterance>& history,
                                                const AgentContext& ctx) {
    if (tracker.phase != Phase::Assessment) {
        return make_error(ErrorKind::InvalidArgument, "assessment_step: wrong phase");
    }
    detail::AskSpec spec;
    spec.template_id = "control_assessment";
    spec.bindings = {{"partial_ccd", render_partial_block(partial)},
                     {"current_step", std::to_string(tracker.step)}};
    spec.side = "control";
    spec.tag = "control_assessment";
    spec.turn_index = static_cast<int>(history.size());
    spec.task = "Decide the directive for the next therapist turn.";
    spec.history = &history;
    auto reply = detail::ask_validated<AssessmentReply>(
        ctx, spec, [&](const std::string& raw) -> Result<AssessmentReply> {
            auto extracted = extract_json_object(raw);
            if (!extracted) return extracted.error();
            auto parsed = parse_assessment_state(extracted.value());
            if (!parsed) return parsed.error();
            const DirectiveReply& d = parsed.value().directive;
            if (auto legal = detail::check_step_claim(tracker, d.step); !legal) {
                return legal.error();
            }
            if (d.phase_complete) {
                if (d.step != max_step(Phase::Assessment)) {
                    return make_error(ErrorKind::SchemaViolation,
                                      "phase_complete claimed before step 3");
                }
                if (!parsed.value().state) {
                    return make_error(ErrorKind::MissingField,
                                      "closing reply missing the measurement state");
                }
            } else if (ccdforge::detail::trim_copy(d.instruction).empty()) {
                return make_error(ErrorKind::SchemaViolation, "directive without instruction");
            }
            return parsed;
        });
    if (!reply) return reply.error();
    const AssessmentReply& r = reply.value();
    AssessmentResult out{Strategy{Phase::Assessment, r.directive.step, r.directive.instruction,
                                  r.directive.phase_complete, false},
                         std::nullopt, tracker};
    out.tracker.step = r.directive.step;
    if (r.directive.phase_complete) {
        out.state = r.state;
        auto next = enter_next_phase(out.tracker);
        if (!next) return next.error();
        out.tracker = next.value();
    }
    return out;
}

struct InterventionResult {
    Strategy strategy;
    InterventionDraft draft;                      // accumulated measurements
    std::optional<InterventionState> final_state;  // present exactly on transition
    PhaseTracker tracker;
};

/// One intervention control call. Steps 1–3 are plain directives that may
/// record state as it emerges. Step 4 is the decision point: the reply must
/// carry the alternative thought and the belief percentage, and the agent —
/// not the model — picks the branch: belief ≤ 89 forces an experiment-design
/// directive; belief ≥ 90 closes the phase with no experiment. Step 5 closes
/// the experiment branch and must carry the experiment text.
inline Result<InterventionResult> intervention_step(const InterventionDraft& draft,
                                                    const PhaseTracker& tracker,
                                                    const std::vector<Utterance>& history,
                                                    const AgentContext& ctx) {
    if (tracker.phase != Phase::Intervention) {
        return make_error(ErrorKind::InvalidArgument, "intervention_step: wrong phase");
    }
    detail::AskSpec spec;
    spec.template_id = "control_intervention";
    spec.bindings = {{"current_step", std::to_string(tracker.step)}};
    spec.side = "control";
    spec.tag = "control_intervention";
    spec.turn_index = static_cast<int>(history.size());
    spec.task = "Decide the directive for the next therapist turn.";
    spec.history = &history;

    auto overlay = [](InterventionDraft base, const InterventionDraft& update) {
        if (update.alternative_thought) base.alternative_thought = update.alternative_thought;
        if (update.belief_in_alternative_pct) {
            base.belief_in_alternative_pct = update.belief_in_alternative_pct;
        }
        if (update.behavioral_experiment) base.behavioral_experiment = update.behavioral_experiment;
        return base;
    };

    auto reply = detail::ask_validated<InterventionReply>(
        ctx, spec, [&](const std::string& raw) -> Result<InterventionReply> {
            auto extracted = extract_json_object(raw);
            if (!extracted) return extracted.error();
            auto parsed = parse_intervention_state(extracted.value());
            if (!parsed) return parsed.error();
            const DirectiveReply& d = parsed.value().directive;
            if (auto legal = detail::check_step_claim(tracker, d.step); !legal) {
                return legal.error();
            }
            InterventionDraft merged = overlay(draft, parsed.value().state);
            if (d.step <= 3) {
                if (d.phase_complete) {
                    return make_error(ErrorKind::SchemaViolation,
                                      "phase_complete claimed before the decision step");
                }
                if (ccdforge::detail::trim_copy(d.instruction).empty()) {
                    return make_error(ErrorKind::SchemaViolation, "directive without instruction");
                }
                return parsed;
            }
            if (d.step == 4) {
                if (!merged.alternative_thought) {
                    return make_error(ErrorKind::MissingField,
                                      "decision step without alternative_thought");
                }
                if (!merged.belief_in_alternative_pct) {
                    return make_error(ErrorKind::MissingField,
                                      "decision step without belief_in_alternative_pct");
                }
                if (*merged.belief_in_alternative_pct <= kExperimentBeliefCeilingPct &&
                    ccdforge::detail::trim_copy(d.instruction).empty()) {
                    return make_error(ErrorKind::SchemaViolation,
                                      "experiment branch needs a design directive");
                }
                return parsed;
            }
            // step 5: closing the experiment branch
            if (!d.phase_complete) {
                return make_error(ErrorKind::SchemaViolation, "step 5 must close the phase");
            }
            if (!merged.behavioral_experiment) {
                return make_error(ErrorKind::MissingField,
                                  "closing reply missing behavioral_experiment");
            }
            if (!merged.alternative_thought || !merged.belief_in_alternative_pct) {
                return make_error(ErrorKind::MissingField, "closing reply with incomplete state");
            }
            return parsed;
        });
    if (!reply) return reply.error();
    const InterventionReply& r = reply.value();
    const DirectiveReply& d = r.directive;
    InterventionResult out{Strategy{}, overlay(draft, r.state), std::nullopt, tracker};
    out.tracker.step = d.step;

    auto close_phase = [&](bool with_experiment) -> Result<void> {
        InterventionState final_state;
        final_state.alternative_thought = *out.draft.alternative_thought;
        final_state.belief_in_alternative_pct = *out.draft.belief_in_alternative_pct;
        final_state.experiment_assigned = with_experiment;
        if (with_experiment) final_state.behavioral_experiment = out.draft.behavioral_experiment;
        out.final_state = std::move(final_state);
        auto next = enter_next_phase(out.tracker);
        if (!next) return next.error();
        out.tracker = next.value();
        return Result<void>{};
    };

    if (d.step <= 3) {
        out.strategy = Strategy{Phase::Intervention, d.step, d.instruction, false, false};
        return out;
    }
    if (d.step == 4) {
        if (*out.draft.belief_in_alternative_pct <= kExperimentBeliefCeilingPct) {
            // Experiment branch: the model's completion claim is irrelevant,
            // the threshold rule decides.
            out.strategy = Strategy{Phase::Intervention, 4, d.instruction, false, false};
            return out;
        }
        out.strategy = Strategy{Phase::Intervention, 4, "", true, false};
        if (auto closed = close_phase(false); !closed) return closed.error();
        return out;
    }
    out.strategy = Strategy{Phase::Intervention, 5, "", true, false};
    if (auto closed = close_phase(true); !closed) return closed.error();
    return out;
}

struct SummaryResult {
    Strategy strategy;
    PhaseTracker tracker;
};

/// One summary control call: a homework recap that must restate any
/// assigned experiment, a closing directive, then the terminal step.
inline Result<SummaryResult> summary_step(const InterventionState& intervention,
                                          const PhaseTracker& tracker,
                                          const std::vector<Utterance>& history,
                                          const AgentContext& ctx) {
    if (tracker.phase != Phase::Summary) {
        return make_error(ErrorKind::InvalidArgument, "summary_step: wrong phase");
    }
    std::string homework = intervention.experiment_assigned && intervention.behavioral_experiment
                               ? *intervention.behavioral_experiment
                               : std::string("none assigned");
    detail::AskSpec spec;
    spec.template_id = "control_summary";
    spec.bindings = {{"homework", homework}, {"current_step", std::to_string(tracker.step)}};
    spec.side = "control";
    spec.tag = "control_summary";
    spec.turn_index = static_cast<int>(history.size());
    spec.task = "Decide the directive for the next therapist turn.";
    spec.history = &history;
    auto reply = detail::ask_validated<DirectiveReply>(
        ctx, spec, [&](const std::string& raw) -> Result<DirectiveReply> {
            auto extracted = extract_json_object(raw);
            if (!extracted) return extracted.error();
            auto parsed = parse_strategy_directive(extracted.value());
            if (!parsed) return parsed.error();
            const DirectiveReply& d = parsed.value();
            if (auto legal = detail::check_step_claim(tracker, d.step); !legal) {
                return legal.error();
            }
            if (d.step == max_step(Phase::Summary)) {
                if (!d.phase_complete) {
                    return make_error(ErrorKind::SchemaViolation, "step 3 must end the session");
                }
                return parsed;
            }
            if (d.phase_complete) {
                return make_error(ErrorKind::SchemaViolation,
                                  "phase_complete claimed before step 3");
            }
            if (ccdforge::detail::trim_copy(d.instruction).empty()) {
                return make_error(ErrorKind::SchemaViolation, "directive without instruction");
            }
            if (d.step == 1 && intervention.experiment_assigned &&
                intervention.behavioral_experiment &&
                !detail::contains_normalized(d.instruction, *intervention.behavioral_experiment)) {
                return make_error(ErrorKind::SchemaViolation,
                                  "recap directive omits the assigned experiment");
            }
            return parsed;
        });
    if (!reply) return reply.error();
    const DirectiveReply& d = reply.value();
    SummaryResult out{Strategy{Phase::Summary, d.step, d.instruction, false, false}, tracker};
    out.tracker.step = d.step;
    if (d.step == max_step(Phase::Summary)) {
        out.strategy.is_terminal = true;
        auto next = enter_next_phase(out.tracker);
        if (!next) return next.error();
        out.tracker = next.value();
    }
    return out;
}

}  // namespace ccdforge
