#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "ccdforge/ccd.hpp"
#include "ccdforge/result.hpp"
#include "ccdforge/taxonomy.hpp"

namespace ccdforge {

// ── Typed reply payloads ────────────────────────────────────────
//
// Agents and judges answer with a single JSON object embedded in free
// text. Each registered schema has a typed value here, a strict parser,
// and a serializer; parse ∘ serialize is the identity on valid values.

/// Shared control-agent envelope: which step the agent claims to be on,
/// the directive text, and whether the phase is finished.
struct DirectiveReply {
    int step = 1;
    std::string instruction;
    bool phase_complete = false;

    bool operator==(const DirectiveReply&) const = default;
};

/// Identification-phase reply: a directive plus newly inferred CCD slots.
struct CcdUpdateReply {
    DirectiveReply directive;
    PartialCcd update;

    bool operator==(const CcdUpdateReply&) const = default;
};

/// The completed assessment measurements.
struct AssessmentFields {
    Emotion primary_emotion = Emotion::Sad;
    int emotion_intensity_pct = 0;
    int belief_in_automatic_thought_pct = 0;

    bool operator==(const AssessmentFields&) const = default;
};

struct AssessmentReply {
    DirectiveReply directive;
    std::optional<AssessmentFields> state;

    bool operator==(const AssessmentReply&) const = default;
};

/// Intervention measurements accumulate across steps, so every field is
/// optional at the parse layer; the agent enforces what each step needs.
struct InterventionDraft {
    std::optional<std::string> alternative_thought;
    std::optional<int> belief_in_alternative_pct;
    std::optional<std::string> behavioral_experiment;

    bool operator==(const InterventionDraft&) const = default;
};

struct InterventionReply {
    DirectiveReply directive;
    InterventionDraft state;

    bool operator==(const InterventionReply&) const = default;
};

/// The six competence items. Range-checked generically at 0–6 here; the
/// screening gate uses the full 0–6 span while evaluation floors at 1.
struct CtrsItems {
    int understanding = 0;
    int interpersonal_effectiveness = 0;
    int collaboration = 0;
    int guided_discovery = 0;
    int focus = 0;
    int strategy = 0;

    bool operator==(const CtrsItems&) const = default;

    std::array<int, 6> as_array() const {
        return {understanding, interpersonal_effectiveness, collaboration,
                guided_discovery, focus, strategy};
    }
};

inline constexpr std::array<std::string_view, 6> kCtrsItemNames = {
    "understanding",     "interpersonal_effectiveness",
    "collaboration",     "guided_discovery",
    "focus",             "strategy",
};

inline constexpr std::array<std::string_view, 10> kPanasPositiveItems = {
    "Excited", "Strong",     "Enthusiastic", "Proud",  "Alert",
    "Inspired", "Determined", "Attentive",    "Active", "Interest",
};

inline constexpr std::array<std::string_view, 10> kPanasNegativeItems = {
    "Distressed", "Upset",     "Guilty",  "Scared",  "Hostile",
    "Irritable",  "Ashamed",   "Nervous", "Jittery", "Afraid",
};

/// Twenty affect items, each 1–5, keyed by the fixed instrument names.
struct PanasItems {
    std::array<int, 10> positive{};  // order of kPanasPositiveItems
    std::array<int, 10> negative{};  // order of kPanasNegativeItems

    bool operator==(const PanasItems&) const = default;
};

/// Per-component fidelity ratings plus an overall rating, each in {1,2,3}.
struct ReconstructionItems {
    int overall = 1;
    std::array<int, 8> components{};  // order of kCcdSlotNames

    bool operator==(const ReconstructionItems&) const = default;
};

using StructuredValue =
    std::variant<CcdUpdateReply, DirectiveReply, AssessmentReply, InterventionReply,
                 CtrsItems, PanasItems, ReconstructionItems>;

enum class SchemaId {
    CcdUpdate,
    AssessmentState,
    InterventionState,
    StrategyDirective,
    CtrsScores,
    PanasScores,
    ReconstructionRatings,
};

inline std::string_view to_string(SchemaId id) {
    switch (id) {
        case SchemaId::CcdUpdate: return "ccd_update";
        case SchemaId::AssessmentState: return "assessment_state";
        case SchemaId::InterventionState: return "intervention_state";
        case SchemaId::StrategyDirective: return "strategy_directive";
        case SchemaId::CtrsScores: return "ctrs_scores";
        case SchemaId::PanasScores: return "panas_scores";
        case SchemaId::ReconstructionRatings: return "reconstruction_ratings";
    }
    return "strategy_directive";
}

inline Result<SchemaId> parse_schema_id(std::string_view name) {
    for (SchemaId id : {SchemaId::CcdUpdate, SchemaId::AssessmentState,
                        SchemaId::InterventionState, SchemaId::StrategyDirective,
                        SchemaId::CtrsScores, SchemaId::PanasScores,
                        SchemaId::ReconstructionRatings}) {
        if (to_string(id) == name) return id;
    }
    return make_error(ErrorKind::UnknownLabel, "unknown schema id \"" + std::string(name) + "\"");
}

// ── Raw-text object extraction ──────────────────────────────────

/// Find the first balanced, parseable JSON object embedded in free text.
/// Candidates that fail to parse are skipped so prose braces before the
/// real payload don't sink the reply.
inline Result<nlohmann::json> extract_json_object(std::string_view raw) {
    for (std::size_t start = raw.find('{'); start != std::string_view::npos;
         start = raw.find('{', start + 1)) {
        int depth = 0;
        bool in_string = false;
        bool escaped = false;
        for (std::size_t i = start; i < raw.size(); ++i) {
            char c = raw[i];
            if (in_string) {
                if (escaped) {
                    escaped = false;
                } else if (c == '\\') {
                    escaped = true;
                } else if (c == '"') {
                    in_string = false;
                }
                continue;
            }
            if (c == '"') {
                in_string = true;
            } else if (c == '{') {
                ++depth;
            } else if (c == '}') {
                if (--depth == 0) {
                    auto candidate = raw.substr(start, i - start + 1);
                    nlohmann::json j = nlohmann::json::parse(candidate, nullptr, false);
                    if (!j.is_discarded() && j.is_object()) return j;
                    break;  // unparseable candidate: try the next '{'
                }
            }
        }
    }
    return make_error(ErrorKind::NoJsonObject, "reply contains no parseable JSON object");
}

// ── Percentage normalization ────────────────────────────────────

/// Normalize a percentage field to an integer in [0,100]. Accepts JSON
/// numbers as well as strings like "80", "80%", or "about 80%, sometimes
/// ..." — the first (possibly signed) integer run in the string counts.
inline Result<int> normalize_percentage(const nlohmann::json& v, std::string_view field) {
    auto range_check = [&](long long n) -> Result<int> {
        if (n < 0 || n > 100) {
            return make_error(ErrorKind::OutOfRange,
                              std::string(field) + ": percentage " + std::to_string(n) +
                                  " outside [0, 100]");
        }
        return static_cast<int>(n);
    };
    if (v.is_number_integer()) return range_check(v.get<long long>());
    if (v.is_number_float()) return range_check(std::llround(v.get<double>()));
    if (v.is_string()) {
        const std::string s = v.get<std::string>();
        for (std::size_t i = 0; i < s.size(); ++i) {
            if (s[i] >= '0' && s[i] <= '9') {
                bool negative = i > 0 && s[i - 1] == '-';
                long long n = 0;
                while (i < s.size() && s[i] >= '0' && s[i] <= '9') {
                    n = n * 10 + (s[i] - '0');
                    if (n > 1000000) break;  // avoid overflow on digit floods
                    ++i;
                }
                return range_check(negative ? -n : n);
            }
        }
        return make_error(ErrorKind::SchemaViolation,
                          std::string(field) + ": no percentage found in \"" + s + "\"");
    }
    return make_error(ErrorKind::SchemaViolation,
                      std::string(field) + ": expected a number or percentage string");
}

// ── Shared field readers ────────────────────────────────────────

namespace detail {

inline Result<void> reject_unknown_keys(const nlohmann::json& j,
                                        const std::vector<std::string_view>& allowed,
                                        std::string_view where) {
    for (const auto& [key, value] : j.items()) {
        (void)value;
        if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
            return make_error(ErrorKind::SchemaViolation,
                              std::string(where) + ": unknown key \"" + key + "\"");
        }
    }
    return Result<void>{};
}

inline Result<int> read_int_in_range(const nlohmann::json& j, std::string_view field, int lo,
                                     int hi) {
    if (!j.contains(field)) {
        return make_error(ErrorKind::MissingField, "missing field " + std::string(field));
    }
    const auto& v = j.at(std::string(field));
    long long n = 0;
    if (v.is_number_integer()) {
        n = v.get<long long>();
    } else if (v.is_number_float()) {
        double d = v.get<double>();
        n = std::llround(d);
        if (std::abs(d - static_cast<double>(n)) > 1e-9) {
            return make_error(ErrorKind::SchemaViolation,
                              std::string(field) + ": expected an integer");
        }
    } else {
        return make_error(ErrorKind::SchemaViolation, std::string(field) + ": expected an integer");
    }
    if (n < lo || n > hi) {
        return make_error(ErrorKind::OutOfRange,
                          std::string(field) + ": " + std::to_string(n) + " outside [" +
                              std::to_string(lo) + ", " + std::to_string(hi) + "]");
    }
    return static_cast<int>(n);
}

inline Result<DirectiveReply> read_directive(const nlohmann::json& j, std::string_view where) {
    DirectiveReply d;
    if (!j.contains("step")) {
        return make_error(ErrorKind::MissingField, std::string(where) + ": missing field step");
    }
    auto step = read_int_in_range(j, "step", 1, 64);
    if (!step) return step.error();
    d.step = step.value();
    if (j.contains("instruction")) {
        if (!j.at("instruction").is_string()) {
            return make_error(ErrorKind::SchemaViolation,
                              std::string(where) + ": instruction must be a string");
        }
        d.instruction = j.at("instruction").get<std::string>();
    }
    if (j.contains("phase_complete")) {
        if (!j.at("phase_complete").is_boolean()) {
            return make_error(ErrorKind::SchemaViolation,
                              std::string(where) + ": phase_complete must be a boolean");
        }
        d.phase_complete = j.at("phase_complete").get<bool>();
    }
    return d;
}

inline void write_directive(nlohmann::ordered_json& j, const DirectiveReply& d) {
    j["step"] = d.step;
    if (!d.instruction.empty()) j["instruction"] = d.instruction;
    if (d.phase_complete) j["phase_complete"] = true;
}

}  // namespace detail

// ── Per-schema parsers and serializers ──────────────────────────

inline Result<DirectiveReply> parse_strategy_directive(const nlohmann::json& j) {
    if (auto ok = detail::reject_unknown_keys(j, {"step", "instruction", "phase_complete"},
                                              "strategy_directive");
        !ok) {
        return ok.error();
    }
    return detail::read_directive(j, "strategy_directive");
}

inline nlohmann::ordered_json serialize_structured(const DirectiveReply& d) {
    nlohmann::ordered_json j = nlohmann::ordered_json::object();
    detail::write_directive(j, d);
    return j;
}

inline Result<CcdUpdateReply> parse_ccd_update(const nlohmann::json& j) {
    if (auto ok = detail::reject_unknown_keys(
            j, {"step", "instruction", "phase_complete", "ccd_update"}, "ccd_update");
        !ok) {
        return ok.error();
    }
    auto directive = detail::read_directive(j, "ccd_update");
    if (!directive) return directive.error();
    CcdUpdateReply reply{directive.value(), PartialCcd{}};
    if (j.contains("ccd_update") && !j.at("ccd_update").is_null()) {
        auto update = partial_ccd_from_json(j.at("ccd_update"));
        if (!update) return update.error();
        reply.update = std::move(update.value());
    }
    return reply;
}

inline nlohmann::ordered_json serialize_structured(const CcdUpdateReply& r) {
    nlohmann::ordered_json j = nlohmann::ordered_json::object();
    detail::write_directive(j, r.directive);
    if (filled_slot_count(r.update) > 0) j["ccd_update"] = partial_ccd_to_json(r.update);
    return j;
}

inline Result<AssessmentFields> parse_assessment_fields(const nlohmann::json& j) {
    if (auto ok = detail::reject_unknown_keys(
            j, {"primary_emotion", "emotion_intensity_pct", "belief_in_automatic_thought_pct"},
            "assessment state");
        !ok) {
        return ok.error();
    }
    AssessmentFields f;
    if (!j.contains("primary_emotion") || !j.at("primary_emotion").is_string()) {
        return make_error(ErrorKind::MissingField, "assessment state: missing primary_emotion");
    }
    auto emotion = parse_emotion(j.at("primary_emotion").get<std::string>());
    if (!emotion) return emotion.error();
    f.primary_emotion = emotion.value();
    for (auto [field, target] :
         std::initializer_list<std::pair<std::string_view, int*>>{
             {"emotion_intensity_pct", &f.emotion_intensity_pct},
             {"belief_in_automatic_thought_pct", &f.belief_in_automatic_thought_pct}}) {
        if (!j.contains(field)) {
            return make_error(ErrorKind::MissingField,
                              "assessment state: missing " + std::string(field));
        }
        auto pct = normalize_percentage(j.at(std::string(field)), field);
        if (!pct) return pct.error();
        *target = pct.value();
    }
    return f;
}

inline Result<AssessmentReply> parse_assessment_state(const nlohmann::json& j) {
    if (auto ok = detail::reject_unknown_keys(j, {"step", "instruction", "phase_complete", "state"},
                                              "assessment_state");
        !ok) {
        return ok.error();
    }
    auto directive = detail::read_directive(j, "assessment_state");
    if (!directive) return directive.error();
    AssessmentReply reply{directive.value(), std::nullopt};
    if (j.contains("state") && !j.at("state").is_null()) {
        if (!j.at("state").is_object()) {
            return make_error(ErrorKind::SchemaViolation, "assessment_state: state must be an object");
        }
        auto fields = parse_assessment_fields(j.at("state"));
        if (!fields) return fields.error();
        reply.state = fields.value();
    }
    return reply;
}

inline nlohmann::ordered_json serialize_structured(const AssessmentReply& r) {
    nlohmann::ordered_json j = nlohmann::ordered_json::object();
    detail::write_directive(j, r.directive);
    if (r.state) {
        nlohmann::ordered_json s;
        s["primary_emotion"] = std::string(to_string(r.state->primary_emotion));
        s["emotion_intensity_pct"] = r.state->emotion_intensity_pct;
        s["belief_in_automatic_thought_pct"] = r.state->belief_in_automatic_thought_pct;
        j["state"] = std::move(s);
    }
    return j;
}

inline Result<InterventionDraft> parse_intervention_draft(const nlohmann::json& j) {
    if (auto ok = detail::reject_unknown_keys(
            j, {"alternative_thought", "belief_in_alternative_pct", "behavioral_experiment"},
            "intervention state");
        !ok) {
        return ok.error();
    }
    InterventionDraft d;
    auto read_text = [&](std::string_view field,
                         std::optional<std::string>& target) -> std::optional<Error> {
        if (!j.contains(field) || j.at(std::string(field)).is_null()) return std::nullopt;
        if (!j.at(std::string(field)).is_string()) {
            return make_error(ErrorKind::SchemaViolation,
                              std::string(field) + ": expected a string");
        }
        std::string text = j.at(std::string(field)).get<std::string>();
        if (detail::trim_copy(text).empty()) {
            return make_error(ErrorKind::EmptyComponent, std::string(field) + ": empty text");
        }
        target = std::move(text);
        return std::nullopt;
    };
    if (auto err = read_text("alternative_thought", d.alternative_thought)) return *err;
    if (auto err = read_text("behavioral_experiment", d.behavioral_experiment)) return *err;
    if (j.contains("belief_in_alternative_pct") && !j.at("belief_in_alternative_pct").is_null()) {
        auto pct = normalize_percentage(j.at("belief_in_alternative_pct"),
                                        "belief_in_alternative_pct");
        if (!pct) return pct.error();
        d.belief_in_alternative_pct = pct.value();
    }
    return d;
}

inline Result<InterventionReply> parse_intervention_state(const nlohmann::json& j) {
    if (auto ok = detail::reject_unknown_keys(j, {"step", "instruction", "phase_complete", "state"},
                                              "intervention_state");
        !ok) {
        return ok.error();
    }
    auto directive = detail::read_directive(j, "intervention_state");
    if (!directive) return directive.error();
    InterventionReply reply{directive.value(), InterventionDraft{}};
    if (j.contains("state") && !j.at("state").is_null()) {
        if (!j.at("state").is_object()) {
            return make_error(ErrorKind::SchemaViolation,
                              "intervention_state: state must be an object");
        }
        auto draft = parse_intervention_draft(j.at("state"));
        if (!draft) return draft.error();
        reply.state = std::move(draft.value());
    }
    return reply;
}

inline nlohmann::ordered_json serialize_structured(const InterventionReply& r) {
    nlohmann::ordered_json j = nlohmann::ordered_json::object();
    detail::write_directive(j, r.directive);
    const InterventionDraft& d = r.state;
    if (d.alternative_thought || d.belief_in_alternative_pct || d.behavioral_experiment) {
        nlohmann::ordered_json s = nlohmann::ordered_json::object();
        if (d.alternative_thought) s["alternative_thought"] = *d.alternative_thought;
        if (d.belief_in_alternative_pct) s["belief_in_alternative_pct"] = *d.belief_in_alternative_pct;
        if (d.behavioral_experiment) s["behavioral_experiment"] = *d.behavioral_experiment;
        j["state"] = std::move(s);
    }
    return j;
}

inline Result<CtrsItems> parse_ctrs_scores(const nlohmann::json& j) {
    std::vector<std::string_view> allowed(kCtrsItemNames.begin(), kCtrsItemNames.end());
    if (auto ok = detail::reject_unknown_keys(j, allowed, "ctrs_scores"); !ok) return ok.error();
    CtrsItems items;
    std::array<int*, 6> targets = {&items.understanding, &items.interpersonal_effectiveness,
                                   &items.collaboration, &items.guided_discovery,
                                   &items.focus,         &items.strategy};
    for (std::size_t i = 0; i < kCtrsItemNames.size(); ++i) {
        auto v = detail::read_int_in_range(j, kCtrsItemNames[i], 0, 6);
        if (!v) return v.error();
        *targets[i] = v.value();
    }
    return items;
}

inline nlohmann::ordered_json serialize_structured(const CtrsItems& items) {
    nlohmann::ordered_json j;
    auto values = items.as_array();
    for (std::size_t i = 0; i < kCtrsItemNames.size(); ++i) {
        j[std::string(kCtrsItemNames[i])] = values[i];
    }
    return j;
}

inline Result<PanasItems> parse_panas_scores(const nlohmann::json& j) {
    std::vector<std::string_view> allowed;
    allowed.insert(allowed.end(), kPanasPositiveItems.begin(), kPanasPositiveItems.end());
    allowed.insert(allowed.end(), kPanasNegativeItems.begin(), kPanasNegativeItems.end());
    if (auto ok = detail::reject_unknown_keys(j, allowed, "panas_scores"); !ok) return ok.error();
    PanasItems items;
    for (std::size_t i = 0; i < kPanasPositiveItems.size(); ++i) {
        auto v = detail::read_int_in_range(j, kPanasPositiveItems[i], 1, 5);
        if (!v) return v.error();
        items.positive[i] = v.value();
    }
    for (std::size_t i = 0; i < kPanasNegativeItems.size(); ++i) {
        auto v = detail::read_int_in_range(j, kPanasNegativeItems[i], 1, 5);
        if (!v) return v.error();
        items.negative[i] = v.value();
    }
    return items;
}

inline nlohmann::ordered_json serialize_structured(const PanasItems& items) {
    nlohmann::ordered_json j;
    for (std::size_t i = 0; i < kPanasPositiveItems.size(); ++i) {
        j[std::string(kPanasPositiveItems[i])] = items.positive[i];
    }
    for (std::size_t i = 0; i < kPanasNegativeItems.size(); ++i) {
        j[std::string(kPanasNegativeItems[i])] = items.negative[i];
    }
    return j;
}

inline Result<ReconstructionItems> parse_reconstruction_ratings(const nlohmann::json& j) {
    std::vector<std::string_view> allowed = {"overall"};
    allowed.insert(allowed.end(), kCcdSlotNames.begin(), kCcdSlotNames.end());
    if (auto ok = detail::reject_unknown_keys(j, allowed, "reconstruction_ratings"); !ok) {
        return ok.error();
    }
    ReconstructionItems items;
    auto overall = detail::read_int_in_range(j, "overall", 1, 3);
    if (!overall) return overall.error();
    items.overall = overall.value();
    for (std::size_t i = 0; i < kCcdSlotNames.size(); ++i) {
        auto v = detail::read_int_in_range(j, kCcdSlotNames[i], 1, 3);
        if (!v) return v.error();
        items.components[i] = v.value();
    }
    return items;
}

inline nlohmann::ordered_json serialize_structured(const ReconstructionItems& items) {
    nlohmann::ordered_json j;
    j["overall"] = items.overall;
    for (std::size_t i = 0; i < kCcdSlotNames.size(); ++i) {
        j[std::string(kCcdSlotNames[i])] = items.components[i];
    }
    return j;
}

inline nlohmann::ordered_json serialize_structured(const StructuredValue& value) {
    return std::visit([](const auto& v) { return serialize_structured(v); }, value);
}

// ── Generic dispatch ────────────────────────────────────────────

/// Parse the first embedded JSON object in `raw` against a registered
/// schema. Schema violations name the offending field; no retrying here —
/// re-asking on malformed content is the agents' policy.
inline Result<StructuredValue> parse_structured(std::string_view raw, SchemaId schema) {
    auto extracted = extract_json_object(raw);
    if (!extracted) return extracted.error();
    const nlohmann::json& j = extracted.value();
    switch (schema) {
        case SchemaId::CcdUpdate: {
            auto r = parse_ccd_update(j);
            if (!r) return r.error();
            return StructuredValue{std::move(r.value())};
        }
        case SchemaId::StrategyDirective: {
            auto r = parse_strategy_directive(j);
            if (!r) return r.error();
            return StructuredValue{std::move(r.value())};
        }
        case SchemaId::AssessmentState: {
            auto r = parse_assessment_state(j);
            if (!r) return r.error();
            return StructuredValue{std::move(r.value())};
        }
        case SchemaId::InterventionState: {
            auto r = parse_intervention_state(j);
            if (!r) return r.error();
            return StructuredValue{std::move(r.value())};
        }
        case SchemaId::CtrsScores: {
            auto r = parse_ctrs_scores(j);
            if (!r) return r.error();
            return StructuredValue{std::move(r.value())};
        }
        case SchemaId::PanasScores: {
            auto r = parse_panas_scores(j);
            if (!r) return r.error();
            return StructuredValue{std::move(r.value())};
        }
        case SchemaId::ReconstructionRatings: {
            auto r = parse_reconstruction_ratings(j);
            if (!r) return r.error();
            return StructuredValue{std::move(r.value())};
        }
    }
    return make_error(ErrorKind::UnknownLabel, "unknown schema id");
}

inline Result<StructuredValue> parse_structured(std::string_view raw, std::string_view schema) {
    auto id = parse_schema_id(schema);
    if (!id) return id.error();
    return parse_structured(raw, id.value());
}

}  // namespace ccdforge
