#pragma once

#include <algorithm>
#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "ccdforge/result.hpp"
#include "ccdforge/taxonomy.hpp"

namespace ccdforge {

/// The eight component keys in canonical order. This order is also the
/// serialization order everywhere a CCD appears on disk or in a prompt.
inline constexpr std::array<std::string_view, 8> kCcdSlotNames = {
    "situation",           "automatic_thoughts", "emotions",
    "behaviors",           "coping_strategies",  "intermediate_beliefs",
    "core_belief",         "relevant_history",
};

/// A client's complete ground-truth cognitive profile.
///
/// Emotions are a set: held deduplicated and in taxonomy order so that two
/// profiles listing the same emotions in different orders compare equal.
struct Ccd {
    std::string situation;
    std::string automatic_thoughts;
    std::vector<Emotion> emotions;
    std::string behaviors;
    std::string coping_strategies;
    std::string intermediate_beliefs;
    CoreBelief core_belief = CoreBelief::Helpless;
    std::string relevant_history;

    bool operator==(const Ccd&) const = default;
};

/// Deduplicate and order an emotion list by taxonomy order.
inline std::vector<Emotion> canonical_emotions(std::vector<Emotion> emotions) {
    std::vector<Emotion> out;
    for (Emotion e : kAllEmotions) {
        if (std::find(emotions.begin(), emotions.end(), e) != emotions.end()) {
            out.push_back(e);
        }
    }
    return out;
}

struct ValidationReport {
    std::vector<std::string> violations;

    bool ok() const { return violations.empty(); }
};

/// Check every Ccd invariant. Violations name the offending component;
/// an invalid CCD is data, not a failure.
inline ValidationReport validate_ccd(const Ccd& c) {
    ValidationReport report;
    auto require_text = [&](std::string_view name, const std::string& value) {
        if (detail::trim_copy(value).empty()) {
            report.violations.push_back(std::string(name) + ": empty component");
        }
    };
    require_text("situation", c.situation);
    require_text("automatic_thoughts", c.automatic_thoughts);
    require_text("behaviors", c.behaviors);
    require_text("coping_strategies", c.coping_strategies);
    require_text("intermediate_beliefs", c.intermediate_beliefs);
    require_text("relevant_history", c.relevant_history);

    if (c.emotions.empty()) {
        report.violations.push_back("emotions: empty list");
    } else if (c.emotions != canonical_emotions(c.emotions)) {
        report.violations.push_back("emotions: not in canonical set form");
    }
    return report;
}

/// The therapist-side reconstruction: the same eight slots, each either
/// unknown or filled. Slots are never retracted once filled.
struct PartialCcd {
    std::optional<std::string> situation;
    std::optional<std::string> automatic_thoughts;
    std::optional<std::vector<Emotion>> emotions;
    std::optional<std::string> behaviors;
    std::optional<std::string> coping_strategies;
    std::optional<std::string> intermediate_beliefs;
    std::optional<CoreBelief> core_belief;
    std::optional<std::string> relevant_history;

    bool operator==(const PartialCcd&) const = default;
};

/// All eight slots unknown; the therapist's zero-knowledge starting state.
inline PartialCcd new_partial_ccd() { return PartialCcd{}; }

inline int filled_slot_count(const PartialCcd& p) {
    int n = 0;
    n += p.situation.has_value();
    n += p.automatic_thoughts.has_value();
    n += p.emotions.has_value();
    n += p.behaviors.has_value();
    n += p.coping_strategies.has_value();
    n += p.intermediate_beliefs.has_value();
    n += p.core_belief.has_value();
    n += p.relevant_history.has_value();
    return n;
}

/// Fraction of the eight slots that carry a value, in [0, 1].
inline double completeness(const PartialCcd& p) {
    return static_cast<double>(filled_slot_count(p)) / 8.0;
}

/// Slot-wise merge. A filled slot in `update` replaces the corresponding
/// slot in `base` (last writer wins); unknown slots in `update` leave the
/// base untouched, so a merge can never unfill a slot.
inline PartialCcd merge_partial(const PartialCcd& base, const PartialCcd& update) {
    PartialCcd out = base;
    if (update.situation) out.situation = update.situation;
    if (update.automatic_thoughts) out.automatic_thoughts = update.automatic_thoughts;
    if (update.emotions) out.emotions = update.emotions;
    if (update.behaviors) out.behaviors = update.behaviors;
    if (update.coping_strategies) out.coping_strategies = update.coping_strategies;
    if (update.intermediate_beliefs) out.intermediate_beliefs = update.intermediate_beliefs;
    if (update.core_belief) out.core_belief = update.core_belief;
    if (update.relevant_history) out.relevant_history = update.relevant_history;
    return out;
}

// ── JSON ────────────────────────────────────────────────────────

inline nlohmann::ordered_json emotions_to_json(const std::vector<Emotion>& emotions) {
    nlohmann::ordered_json arr = nlohmann::ordered_json::array();
    for (Emotion e : emotions) arr.push_back(std::string(to_string(e)));
    return arr;
}

inline Result<std::vector<Emotion>> emotions_from_json(const nlohmann::json& arr) {
    if (!arr.is_array()) {
        return make_error(ErrorKind::SchemaViolation, "emotions: expected an array");
    }
    std::vector<Emotion> out;
    for (const auto& item : arr) {
        if (!item.is_string()) {
            return make_error(ErrorKind::SchemaViolation, "emotions: expected string labels");
        }
        auto parsed = parse_emotion(item.get<std::string>());
        if (!parsed) return parsed.error();
        out.push_back(parsed.value());
    }
    return canonical_emotions(std::move(out));
}

inline nlohmann::ordered_json ccd_to_json(const Ccd& c) {
    nlohmann::ordered_json j;
    j["situation"] = c.situation;
    j["automatic_thoughts"] = c.automatic_thoughts;
    j["emotions"] = emotions_to_json(c.emotions);
    j["behaviors"] = c.behaviors;
    j["coping_strategies"] = c.coping_strategies;
    j["intermediate_beliefs"] = c.intermediate_beliefs;
    j["core_belief"] = std::string(to_string(c.core_belief));
    j["relevant_history"] = c.relevant_history;
    return j;
}

/// Parse and validate a full CCD. A value that round-trips is by
/// construction a valid one.
inline Result<Ccd> ccd_from_json(const nlohmann::json& j) {
    if (!j.is_object()) {
        return make_error(ErrorKind::SchemaViolation, "ccd: expected an object");
    }
    Ccd c;
    auto read_text = [&](std::string_view name, std::string& target) -> std::optional<Error> {
        if (!j.contains(name)) {
            return make_error(ErrorKind::MissingField, "ccd: missing " + std::string(name));
        }
        if (!j.at(std::string(name)).is_string()) {
            return make_error(ErrorKind::SchemaViolation, std::string(name) + ": expected a string");
        }
        target = j.at(std::string(name)).get<std::string>();
        return std::nullopt;
    };
    for (auto [name, target] :
         std::initializer_list<std::pair<std::string_view, std::string*>>{
             {"situation", &c.situation},
             {"automatic_thoughts", &c.automatic_thoughts},
             {"behaviors", &c.behaviors},
             {"coping_strategies", &c.coping_strategies},
             {"intermediate_beliefs", &c.intermediate_beliefs},
             {"relevant_history", &c.relevant_history}}) {
        if (auto err = read_text(name, *target)) return *err;
    }
    if (!j.contains("emotions")) {
        return make_error(ErrorKind::MissingField, "ccd: missing emotions");
    }
    auto emotions = emotions_from_json(j.at("emotions"));
    if (!emotions) return emotions.error();
    c.emotions = std::move(emotions.value());

    if (!j.contains("core_belief")) {
        return make_error(ErrorKind::MissingField, "ccd: missing core_belief");
    }
    if (!j.at("core_belief").is_string()) {
        return make_error(ErrorKind::SchemaViolation, "core_belief: expected a string");
    }
    auto belief = parse_core_belief(j.at("core_belief").get<std::string>());
    if (!belief) return belief.error();
    c.core_belief = belief.value();

    if (auto report = validate_ccd(c); !report.ok()) {
        return make_error(ErrorKind::SchemaViolation, "ccd: " + report.violations.front());
    }
    return c;
}

/// Serialize only the filled slots, in canonical order.
inline nlohmann::ordered_json partial_ccd_to_json(const PartialCcd& p) {
    nlohmann::ordered_json j = nlohmann::ordered_json::object();
    if (p.situation) j["situation"] = *p.situation;
    if (p.automatic_thoughts) j["automatic_thoughts"] = *p.automatic_thoughts;
    if (p.emotions) j["emotions"] = emotions_to_json(*p.emotions);
    if (p.behaviors) j["behaviors"] = *p.behaviors;
    if (p.coping_strategies) j["coping_strategies"] = *p.coping_strategies;
    if (p.intermediate_beliefs) j["intermediate_beliefs"] = *p.intermediate_beliefs;
    if (p.core_belief) j["core_belief"] = std::string(to_string(*p.core_belief));
    if (p.relevant_history) j["relevant_history"] = *p.relevant_history;
    return j;
}

/// Parse a partial CCD. Absent or null slots are unknown; an empty emotion
/// list is treated as unknown rather than a filled empty set. Filled text
/// slots must be non-empty after trimming, matching the Ccd invariants.
inline Result<PartialCcd> partial_ccd_from_json(const nlohmann::json& j) {
    if (!j.is_object()) {
        return make_error(ErrorKind::SchemaViolation, "partial_ccd: expected an object");
    }
    for (const auto& [key, value] : j.items()) {
        (void)value;
        if (std::find(kCcdSlotNames.begin(), kCcdSlotNames.end(), key) == kCcdSlotNames.end()) {
            return make_error(ErrorKind::SchemaViolation, "partial_ccd: unknown slot " + key);
        }
    }
    PartialCcd p;
    auto read_text = [&](std::string_view name,
                         std::optional<std::string>& target) -> std::optional<Error> {
        if (!j.contains(name) || j.at(std::string(name)).is_null()) return std::nullopt;
        const auto& v = j.at(std::string(name));
        if (!v.is_string()) {
            return make_error(ErrorKind::SchemaViolation, std::string(name) + ": expected a string");
        }
        std::string text = v.get<std::string>();
        if (detail::trim_copy(text).empty()) {
            return make_error(ErrorKind::EmptyComponent, std::string(name) + ": empty component");
        }
        target = std::move(text);
        return std::nullopt;
    };
    if (auto err = read_text("situation", p.situation)) return *err;
    if (auto err = read_text("automatic_thoughts", p.automatic_thoughts)) return *err;
    if (auto err = read_text("behaviors", p.behaviors)) return *err;
    if (auto err = read_text("coping_strategies", p.coping_strategies)) return *err;
    if (auto err = read_text("intermediate_beliefs", p.intermediate_beliefs)) return *err;
    if (auto err = read_text("relevant_history", p.relevant_history)) return *err;

    if (j.contains("emotions") && !j.at("emotions").is_null()) {
        auto emotions = emotions_from_json(j.at("emotions"));
        if (!emotions) return emotions.error();
        if (!emotions.value().empty()) p.emotions = std::move(emotions.value());
    }
    if (j.contains("core_belief") && !j.at("core_belief").is_null()) {
        if (!j.at("core_belief").is_string()) {
            return make_error(ErrorKind::SchemaViolation, "core_belief: expected a string");
        }
        auto belief = parse_core_belief(j.at("core_belief").get<std::string>());
        if (!belief) return belief.error();
        p.core_belief = belief.value();
    }
    return p;
}

}  // namespace ccdforge
