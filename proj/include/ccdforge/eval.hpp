#pragma once

#include <array>
#include <map>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "ccdforge/agents.hpp"
#include "ccdforge/quality.hpp"
#include "ccdforge/result.hpp"
#include "ccdforge/session.hpp"
#include "ccdforge/structured.hpp"

namespace ccdforge {

// ── Affect profiles ─────────────────────────────────────────────

struct PanasProfile {
    PanasItems items;
    int positive_sum = 0;
    int negative_sum = 0;

    bool operator==(const PanasProfile&) const = default;
};

/// Validate the twenty items (each 1–5) and fix the two sums.
inline Result<PanasProfile> make_panas_profile(const PanasItems& items) {
    PanasProfile p;
    p.items = items;
    for (std::size_t i = 0; i < items.positive.size(); ++i) {
        if (items.positive[i] < 1 || items.positive[i] > 5) {
            return make_error(ErrorKind::OutOfRange,
                              std::string(kPanasPositiveItems[i]) + ": outside [1, 5]");
        }
        p.positive_sum += items.positive[i];
    }
    for (std::size_t i = 0; i < items.negative.size(); ++i) {
        if (items.negative[i] < 1 || items.negative[i] > 5) {
            return make_error(ErrorKind::OutOfRange,
                              std::string(kPanasNegativeItems[i]) + ": outside [1, 5]");
        }
        p.negative_sum += items.negative[i];
    }
    return p;
}

struct PanasDelta {
    int delta_positive = 0;  // post − pre, in [−40, 40]
    int delta_negative = 0;

    bool operator==(const PanasDelta&) const = default;
};

inline PanasDelta panas_delta(const PanasProfile& pre, const PanasProfile& post) {
    return PanasDelta{post.positive_sum - pre.positive_sum,
                      post.negative_sum - pre.negative_sum};
}

inline nlohmann::ordered_json panas_profile_to_json(const PanasProfile& p) {
    nlohmann::ordered_json j = serialize_structured(p.items);
    j["positive_sum"] = p.positive_sum;
    j["negative_sum"] = p.negative_sum;
    return j;
}

// ── Reconstruction fidelity ─────────────────────────────────────

struct ReconstructionRating {
    std::array<int, 8> components{};  // order of kCcdSlotNames, each 1–3
    int overall = 1;
    double mean = 1.0;  // over the eight components

    bool operator==(const ReconstructionRating&) const = default;
};

inline nlohmann::ordered_json reconstruction_rating_to_json(const ReconstructionRating& r) {
    nlohmann::ordered_json j;
    j["overall"] = r.overall;
    for (std::size_t i = 0; i < kCcdSlotNames.size(); ++i) {
        j[std::string(kCcdSlotNames[i])] = r.components[i];
    }
    j["mean"] = r.mean;
    return j;
}

// ── Judge-backed scoring ────────────────────────────────────────

/// Rate a session on the six competence items, evaluation scale 1–6.
inline Result<CtrsScore> score_ctrs(const SessionRecord& record, const AgentContext& judge) {
    detail::AskSpec spec;
    spec.template_id = "judge_ctrs";
    spec.bindings = {{"transcript", render_history(record.transcript)},
                     {"scale_floor", std::to_string(scale_floor(CtrsScale::Eval16))}};
    spec.side = "judge";
    spec.tag = "judge_ctrs_eval";
    spec.task = "Provide the six ratings now.";
    spec.temperature = 0.0;
    return detail::ask_validated<CtrsScore>(
        judge, spec, [](const std::string& raw) -> Result<CtrsScore> {
            auto extracted = extract_json_object(raw);
            if (!extracted) return extracted.error();
            auto items = parse_ctrs_scores(extracted.value());
            if (!items) return items.error();
            return make_ctrs_score(items.value(), CtrsScale::Eval16);
        });
}

inline Result<PanasProfile> judge_panas(const std::string& template_id,
                                        const std::string& binding_key,
                                        const std::string& binding_value,
                                        const AgentContext& judge) {
    detail::AskSpec spec;
    spec.template_id = template_id;
    spec.bindings = {{binding_key, binding_value}};
    spec.side = "judge";
    spec.tag = template_id;
    spec.task = "Provide the twenty ratings now.";
    spec.temperature = 0.0;
    return detail::ask_validated<PanasProfile>(
        judge, spec, [](const std::string& raw) -> Result<PanasProfile> {
            auto extracted = extract_json_object(raw);
            if (!extracted) return extracted.error();
            auto items = parse_panas_scores(extracted.value());
            if (!items) return items.error();
            return make_panas_profile(items.value());
        });
}

struct PanasPair {
    PanasProfile pre;
    PanasProfile post;
};

/// Pre-session affect is inferred from the ground-truth profile alone;
/// post-session affect from the finished dialogue.
inline Result<PanasPair> score_panas(const Ccd& ground_truth, const SessionRecord& record,
                                     const AgentContext& judge) {
    auto pre = judge_panas("judge_panas_pre", "ccd", render_ccd_block(ground_truth), judge);
    if (!pre) return pre.error();
    auto post =
        judge_panas("judge_panas_post", "transcript", render_history(record.transcript), judge);
    if (!post) return post.error();
    return PanasPair{std::move(pre.value()), std::move(post.value())};
}

/// Rate the reconstruction against ground truth, one rating per component.
/// Slots the therapist never filled score 1 regardless of the judge; an
/// entirely empty reconstruction never reaches the judge at all.
inline Result<ReconstructionRating> score_reconstruction(const Ccd& ground_truth,
                                                         const PartialCcd& reconstructed,
                                                         const AgentContext& judge) {
    ReconstructionRating rating;
    rating.components.fill(1);
    rating.overall = 1;
    rating.mean = 1.0;
    if (filled_slot_count(reconstructed) == 0) return rating;

    detail::AskSpec spec;
    spec.template_id = "judge_recon";
    spec.bindings = {{"ground_truth", render_ccd_block(ground_truth)},
                     {"reconstruction", render_partial_block(reconstructed)}};
    spec.side = "judge";
    spec.tag = "judge_recon";
    spec.task = "Provide the nine ratings now.";
    spec.temperature = 0.0;
    auto items = detail::ask_validated<ReconstructionItems>(
        judge, spec, [](const std::string& raw) -> Result<ReconstructionItems> {
            auto extracted = extract_json_object(raw);
            if (!extracted) return extracted.error();
            return parse_reconstruction_ratings(extracted.value());
        });
    if (!items) return items.error();

    rating.overall = items.value().overall;
    rating.components = items.value().components;
    const std::array<bool, 8> filled = {
        reconstructed.situation.has_value(),      reconstructed.automatic_thoughts.has_value(),
        reconstructed.emotions.has_value(),       reconstructed.behaviors.has_value(),
        reconstructed.coping_strategies.has_value(),
        reconstructed.intermediate_beliefs.has_value(),
        reconstructed.core_belief.has_value(),    reconstructed.relevant_history.has_value(),
    };
    long long sum = 0;
    for (std::size_t i = 0; i < rating.components.size(); ++i) {
        if (!filled[i]) rating.components[i] = 1;
        sum += rating.components[i];
    }
    rating.mean = round2(static_cast<double>(sum) / 8.0);
    return rating;
}

// ── Aggregation arithmetic ──────────────────────────────────────

/// Mean of a 3-level rating histogram, exact in integer arithmetic until
/// the final half-up rounding to two decimals.
inline Result<double> aggregate_ratings(long long count1, long long count2, long long count3,
                                        long long n) {
    if (count1 < 0 || count2 < 0 || count3 < 0 || n <= 0) {
        return make_error(ErrorKind::InvalidArgument, "rating counts must be non-negative, n > 0");
    }
    if (count1 + count2 + count3 != n) {
        return make_error(ErrorKind::InvalidArgument,
                          "rating counts sum to " + std::to_string(count1 + count2 + count3) +
                              ", expected " + std::to_string(n));
    }
    long long weighted = count1 + 2 * count2 + 3 * count3;
    long long hundredths = (200 * weighted + n) / (2 * n);  // half-up at the second decimal
    return static_cast<double>(hundredths) / 100.0;
}

// ── Corpus statistics ───────────────────────────────────────────

struct CorpusStats {
    long long cases = 0;
    double chars_per_case_total = 0.0;
    double chars_per_case_client = 0.0;
    double chars_per_case_therapist = 0.0;
    double chars_per_utterance_total = 0.0;
    double chars_per_utterance_client = 0.0;
    double chars_per_utterance_therapist = 0.0;
    double avg_turns = 0.0;

    bool operator==(const CorpusStats&) const = default;
};

inline Result<CorpusStats> corpus_stats(const std::vector<SessionRecord>& records) {
    if (records.empty()) {
        return make_error(ErrorKind::InvalidArgument, "corpus_stats: empty record set");
    }
    CorpusStats s;
    s.cases = static_cast<long long>(records.size());
    long long chars_total = 0;
    long long chars_client = 0;
    long long chars_therapist = 0;
    long long utt_client = 0;
    long long utt_therapist = 0;
    long long turns = 0;
    for (const SessionRecord& r : records) {
        chars_total += r.char_counts.total;
        chars_client += r.char_counts.client;
        chars_therapist += r.char_counts.therapist;
        for (const Utterance& u : r.transcript) {
            (u.role == Speaker::Client ? utt_client : utt_therapist)++;
        }
        turns += session_turns(r);
    }
    auto avg = [](long long num, long long den) {
        return den == 0 ? 0.0 : round2(static_cast<double>(num) / static_cast<double>(den));
    };
    s.chars_per_case_total = avg(chars_total, s.cases);
    s.chars_per_case_client = avg(chars_client, s.cases);
    s.chars_per_case_therapist = avg(chars_therapist, s.cases);
    s.chars_per_utterance_total = avg(chars_total, utt_client + utt_therapist);
    s.chars_per_utterance_client = avg(chars_client, utt_client);
    s.chars_per_utterance_therapist = avg(chars_therapist, utt_therapist);
    s.avg_turns = avg(turns, s.cases);
    return s;
}

inline nlohmann::ordered_json corpus_stats_to_json(const CorpusStats& s) {
    nlohmann::ordered_json j;
    j["cases"] = s.cases;
    nlohmann::ordered_json per_case;
    per_case["total"] = s.chars_per_case_total;
    per_case["client"] = s.chars_per_case_client;
    per_case["therapist"] = s.chars_per_case_therapist;
    j["chars_per_case"] = std::move(per_case);
    nlohmann::ordered_json per_utt;
    per_utt["total"] = s.chars_per_utterance_total;
    per_utt["client"] = s.chars_per_utterance_client;
    per_utt["therapist"] = s.chars_per_utterance_therapist;
    j["chars_per_utterance"] = std::move(per_utt);
    j["avg_turns"] = s.avg_turns;
    return j;
}

// ── Grouped means ───────────────────────────────────────────────

/// One session's scalar metric values, tagged with its grouping labels.
struct ScoredSession {
    std::string session_id;
    Attitude attitude = Attitude::Neutral;
    CoreBelief core_belief = CoreBelief::Helpless;
    std::map<std::string, double> metrics;
};

/// Per-group arithmetic means per metric. Groups with no members simply
/// don't appear; metric means are rounded to two decimals.
inline Result<std::map<std::string, std::map<std::string, double>>> aggregate_by_group(
    const std::vector<ScoredSession>& scored, std::string_view group_key) {
    if (group_key != "attitude" && group_key != "core_belief") {
        return make_error(ErrorKind::UnknownLabel,
                          "unknown group key \"" + std::string(group_key) + "\"");
    }
    std::map<std::string, std::map<std::string, std::pair<double, long long>>> acc;
    for (const ScoredSession& s : scored) {
        std::string label = group_key == "attitude" ? std::string(to_string(s.attitude))
                                                    : std::string(to_string(s.core_belief));
        for (const auto& [metric, value] : s.metrics) {
            auto& [sum, n] = acc[label][metric];
            sum += value;
            ++n;
        }
    }
    std::map<std::string, std::map<std::string, double>> out;
    for (const auto& [label, metrics] : acc) {
        for (const auto& [metric, sum_n] : metrics) {
            out[label][metric] = round2(sum_n.first / static_cast<double>(sum_n.second));
        }
    }
    return out;
}

// ── Table rendering ─────────────────────────────────────────────

/// Aligned plain-text table; the column layout used by the CLI's summary
/// output. Deterministic for identical input.
inline std::string render_table(const std::vector<std::string>& headers,
                                const std::vector<std::vector<std::string>>& rows) {
    std::vector<std::size_t> widths(headers.size(), 0);
    for (std::size_t c = 0; c < headers.size(); ++c) widths[c] = headers[c].size();
    for (const auto& row : rows) {
        for (std::size_t c = 0; c < row.size() && c < widths.size(); ++c) {
            widths[c] = std::max(widths[c], row[c].size());
        }
    }
    std::ostringstream out;
    auto emit_row = [&](const std::vector<std::string>& row) {
        for (std::size_t c = 0; c < widths.size(); ++c) {
            std::string cell = c < row.size() ? row[c] : "";
            out << cell << std::string(widths[c] - cell.size(), ' ');
            out << (c + 1 < widths.size() ? "  " : "");
        }
        out << '\n';
    };
    emit_row(headers);
    std::vector<std::string> rule;
    rule.reserve(headers.size());
    for (std::size_t c = 0; c < headers.size(); ++c) rule.push_back(std::string(widths[c], '-'));
    emit_row(rule);
    for (const auto& row : rows) emit_row(row);
    return out.str();
}

/// Fixed-point formatting helper for table cells ("2.77", "-4.20").
inline std::string format2(double x) {
    std::ostringstream out;
    out.setf(std::ios::fixed);
    out.precision(2);
    out << x;
    return out.str();
}

}  // namespace ccdforge
