#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "ccdforge/agents.hpp"
#include "ccdforge/result.hpp"
#include "ccdforge/session.hpp"
#include "ccdforge/structured.hpp"

namespace ccdforge {

/// Round to two decimals, half away from zero — the precision used by
/// every reported mean in this library.
inline double round2(double x) {
    double scaled = std::floor(std::abs(x) * 100.0 + 0.5) / 100.0;
    return x < 0 ? -scaled : scaled;
}

// ── Competence scores ───────────────────────────────────────────

/// The screening gate rates 0–6; evaluation rates 1–6. Both scales exist
/// in the source material and are carried explicitly, never reconciled.
enum class CtrsScale { Screen06, Eval16 };

inline std::string_view to_string(CtrsScale s) {
    return s == CtrsScale::Screen06 ? "screen_0_6" : "eval_1_6";
}

inline Result<CtrsScale> parse_ctrs_scale(std::string_view label) {
    std::string norm = detail::lower_copy(detail::trim_copy(std::string(label)));
    if (norm == "screen_0_6") return CtrsScale::Screen06;
    if (norm == "eval_1_6") return CtrsScale::Eval16;
    return make_error(ErrorKind::UnknownLabel, "unknown ctrs scale \"" + std::string(label) + "\"");
}

inline int scale_floor(CtrsScale s) { return s == CtrsScale::Screen06 ? 0 : 1; }

struct CtrsScore {
    CtrsItems items;
    CtrsScale scale = CtrsScale::Screen06;
    double mean = 0.0;

    bool operator==(const CtrsScore&) const = default;
};

/// Validate the six items against the declared scale and fix the mean.
inline Result<CtrsScore> make_ctrs_score(const CtrsItems& items, CtrsScale scale) {
    int floor_value = scale_floor(scale);
    long long sum = 0;
    auto values = items.as_array();
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (values[i] < floor_value || values[i] > 6) {
            return make_error(ErrorKind::OutOfRange,
                              std::string(kCtrsItemNames[i]) + ": " + std::to_string(values[i]) +
                                  " outside [" + std::to_string(floor_value) + ", 6]");
        }
        sum += values[i];
    }
    return CtrsScore{items, scale, round2(static_cast<double>(sum) / 6.0)};
}

inline nlohmann::ordered_json ctrs_score_to_json(const CtrsScore& s) {
    nlohmann::ordered_json j = serialize_structured(s.items);
    j["scale"] = std::string(to_string(s.scale));
    j["mean"] = s.mean;
    return j;
}

// ── Stage 1: structural gate ────────────────────────────────────

struct Stage1Result {
    bool pass = false;
    std::vector<std::string> reasons;  // premature_termination | insufficient_turns | malformed_structure
};

inline Stage1Result stage1_filter(const SessionRecord& record, int min_turns) {
    Stage1Result out;
    if (record.termination != Termination::Completed) {
        out.reasons.push_back("premature_termination");
    }
    if (session_turns(record) < min_turns) {
        out.reasons.push_back("insufficient_turns");
    }
    if (!record_violations(record).empty()) {
        out.reasons.push_back("malformed_structure");
    }
    out.pass = out.reasons.empty();
    return out;
}

// ── Stage 2: competence screen ──────────────────────────────────

struct Stage2Result {
    CtrsScore score;
    bool pass = false;
};

/// Have the judge rate the transcript on the 0–6 screening scale; passing
/// requires the item mean to reach the threshold (a mean of exactly 4.0
/// passes the default gate).
inline Result<Stage2Result> stage2_ctrs_screen(const SessionRecord& record,
                                               const AgentContext& judge,
                                               double threshold = 4.0) {
    detail::AskSpec spec;
    spec.template_id = "judge_ctrs";
    spec.bindings = {{"transcript", render_history(record.transcript)},
                     {"scale_floor", std::to_string(scale_floor(CtrsScale::Screen06))}};
    spec.side = "judge";
    spec.tag = "judge_ctrs_screen";
    spec.task = "Provide the six ratings now.";
    spec.temperature = 0.0;
    auto score = detail::ask_validated<CtrsScore>(
        judge, spec, [](const std::string& raw) -> Result<CtrsScore> {
            auto extracted = extract_json_object(raw);
            if (!extracted) return extracted.error();
            auto items = parse_ctrs_scores(extracted.value());
            if (!items) return items.error();
            return make_ctrs_score(items.value(), CtrsScale::Screen06);
        });
    if (!score) return score.error();
    return Stage2Result{score.value(), score.value().mean >= threshold - 1e-9};
}

// ── Corpus filtering ────────────────────────────────────────────

struct GateConfig {
    int min_turns = 8;
    double threshold = 4.0;
};

struct GateReport {
    std::string session_id;
    Stage1Result stage1;
    std::optional<Stage2Result> stage2;       // absent when stage 1 fails
    std::optional<std::string> stage2_error;  // judge failure, recorded not thrown
    bool retained = false;
};

inline nlohmann::ordered_json gate_report_to_json(const GateReport& g) {
    nlohmann::ordered_json j;
    j["session_id"] = g.session_id;
    nlohmann::ordered_json s1;
    s1["pass"] = g.stage1.pass;
    s1["reasons"] = g.stage1.reasons;
    j["stage1"] = std::move(s1);
    if (g.stage2) {
        nlohmann::ordered_json s2;
        s2["score"] = ctrs_score_to_json(g.stage2->score);
        s2["pass"] = g.stage2->pass;
        j["stage2"] = std::move(s2);
    }
    if (g.stage2_error) j["stage2_error"] = *g.stage2_error;
    j["retained"] = g.retained;
    return j;
}

struct FilterOutcome {
    std::vector<SessionRecord> retained;
    std::vector<GateReport> reports;
    std::optional<double> retention_rate;  // null on empty input
};

/// Apply both stages to a corpus. The stage-2 judge is consulted only for
/// stage-1 survivors; a judge failure fails that record without aborting
/// the run. Report order follows input order.
inline FilterOutcome filter_corpus(const std::vector<SessionRecord>& records,
                                   const AgentContext& judge, const GateConfig& config = {}) {
    FilterOutcome out;
    for (const SessionRecord& record : records) {
        GateReport report;
        report.session_id = record.session_id;
        report.stage1 = stage1_filter(record, config.min_turns);
        if (report.stage1.pass) {
            auto stage2 = stage2_ctrs_screen(record, judge, config.threshold);
            if (stage2) {
                report.stage2 = stage2.value();
                report.retained = stage2.value().pass;
            } else {
                report.stage2_error = stage2.error().message;
                report.retained = false;
            }
        }
        if (report.retained) out.retained.push_back(record);
        out.reports.push_back(std::move(report));
    }
    if (!records.empty()) {
        out.retention_rate =
            static_cast<double>(out.retained.size()) / static_cast<double>(records.size());
    }
    return out;
}

}  // namespace ccdforge
