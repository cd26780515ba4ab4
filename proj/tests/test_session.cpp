// The session engine: orchestration loop, termination causes, record
// invariants, serialization, replay, and the information-asymmetry audit.

#include <catch2/catch_amalgamated.hpp>

#include "ccdforge/ccdforge.hpp"
#include "support/fixtures.hpp"

using namespace ccdforge;
using testsupport::directive_reply;
using testsupport::fast_session_config;
using testsupport::run_fixture_session;
using testsupport::sample_ccd;
using testsupport::test_templates;

namespace {

const SessionOutcome& happy_outcome() {
    static const SessionOutcome outcome = run_fixture_session();
    return outcome;
}

}  // namespace

// ── Happy path ──────────────────────────────────────────────────

TEST_CASE("a scripted session completes with the canonical shape", "[session]") {
    const SessionRecord& r = happy_outcome().record;
    REQUIRE(r.termination == Termination::Completed);
    REQUIRE(r.session_id == "t001:neutral");
    REQUIRE(r.seed_id == "t001");
    REQUIRE(r.transcript.size() == 30);
    REQUIRE(session_turns(r) == 15);
    for (std::size_t i = 0; i < r.transcript.size(); ++i) {
        const Utterance& u = r.transcript[i];
        REQUIRE(u.turn_index == static_cast<int>(i));
        REQUIRE(u.role == (i % 2 == 0 ? Speaker::Therapist : Speaker::Client));
        REQUIRE_FALSE(u.text.empty());
        REQUIRE(u.strategy_ref.has_value() == (i % 2 == 0));
    }
    REQUIRE(record_violations(r).empty());
}

TEST_CASE("the phase trace walks every step in order", "[session]") {
    const SessionRecord& r = happy_outcome().record;
    std::vector<PhaseTraceEntry> expected = {
        {0, Phase::Identification, 1},  {2, Phase::Identification, 2},
        {4, Phase::Identification, 3},  {6, Phase::Identification, 4},
        {8, Phase::Identification, 5},  {10, Phase::Identification, 6},
        {12, Phase::Identification, 7}, {14, Phase::Identification, 8},
        {14, Phase::Assessment, 1},     {16, Phase::Assessment, 2},
        {18, Phase::Assessment, 3},     {18, Phase::Intervention, 1},
        {20, Phase::Intervention, 2},   {22, Phase::Intervention, 3},
        {24, Phase::Intervention, 4},   {26, Phase::Intervention, 5},
        {26, Phase::Summary, 1},        {28, Phase::Summary, 2},
        {30, Phase::Summary, 3},        {30, Phase::Done, 0},
    };
    REQUIRE(r.phase_trace == expected);
}

TEST_CASE("the reconstruction grows monotonically to a full profile", "[session]") {
    const SessionRecord& r = happy_outcome().record;
    REQUIRE(r.reconstruction_history.size() == 8);
    std::vector<int> filled;
    for (const ReconstructionEntry& e : r.reconstruction_history) {
        filled.push_back(filled_slot_count(e.partial));
    }
    REQUIRE(filled == std::vector<int>{0, 1, 2, 3, 4, 5, 6, 8});
    REQUIRE(completeness(r.final_partial_ccd) == 1.0);
    REQUIRE(r.final_partial_ccd == r.reconstruction_history.back().partial);
}

TEST_CASE("clinical states land in the record", "[session]") {
    const SessionRecord& r = happy_outcome().record;
    REQUIRE(r.assessment.has_value());
    REQUIRE(r.assessment->primary_emotion == Emotion::Anxious);
    REQUIRE(r.assessment->emotion_intensity_pct == 80);
    REQUIRE(r.assessment->belief_in_automatic_thought_pct == 90);

    REQUIRE(r.intervention.has_value());
    REQUIRE(r.intervention->belief_in_alternative_pct == 60);
    REQUIRE(r.intervention->experiment_assigned);
    REQUIRE(r.intervention->behavioral_experiment.has_value());
    REQUIRE(r.homework == r.intervention->behavioral_experiment);
    REQUIRE(r.homework->find("10-minute break") != std::string::npos);
}

TEST_CASE("character counts recount from the transcript", "[session]") {
    const SessionRecord& r = happy_outcome().record;
    long long client = 0;
    long long therapist = 0;
    for (const Utterance& u : r.transcript) {
        (u.role == Speaker::Client ? client : therapist) += count_codepoints(u.text);
    }
    REQUIRE(r.char_counts.client == client);
    REQUIRE(r.char_counts.therapist == therapist);
    REQUIRE(r.char_counts.total == client + therapist);
    REQUIRE(r.char_counts.total > 0);
}

TEST_CASE("codepoint counting ignores UTF-8 continuation bytes", "[session]") {
    REQUIRE(count_codepoints("") == 0);
    REQUIRE(count_codepoints("plain") == 5);
    REQUIRE(count_codepoints("caf\xC3\xA9") == 4);          // two-byte tail
    REQUIRE(count_codepoints("x\xE2\x80\x94y") == 3);        // em dash
    REQUIRE(count_codepoints("\xF0\x9F\x99\x82") == 1);      // four-byte scalar
}

// ── Termination causes ──────────────────────────────────────────

TEST_CASE("the per-phase cap trips the turn limit", "[session][termination]") {
    std::vector<std::string> script;
    for (int i = 0; i < 16; ++i) {
        script.push_back(directive_reply(1, "Stay with what you were describing."));
        script.push_back("Tell me more about that.");
        script.push_back("It is hard to put into words.");
    }
    auto provider = make_scripted_provider(script);
    auto outcome = run_session("t002", sample_ccd(), Attitude::Neutral, fast_session_config(),
                               test_templates(), *provider);
    REQUIRE(outcome.record.termination == Termination::TurnLimit);
    REQUIRE(outcome.record.transcript.size() == 32);  // 16 exchanges, then the cap
    REQUIRE(outcome.record.phase_trace.size() == 16);
    for (const PhaseTraceEntry& e : outcome.record.phase_trace) {
        REQUIRE(e.phase == Phase::Identification);
        REQUIRE(e.step == 1);
    }
    REQUIRE(provider->responses_remaining() == 0);
}

TEST_CASE("the total-turn budget trips the turn limit", "[session][termination]") {
    std::vector<std::string> script;
    for (int i = 0; i < 3; ++i) {
        script.push_back(directive_reply(1, "Keep going."));
        script.push_back("And then?");
        script.push_back("Then it got worse.");
    }
    SessionConfig cfg = fast_session_config();
    cfg.max_total_turns = 3;
    auto provider = make_scripted_provider(script);
    auto outcome =
        run_session("t003", sample_ccd(), Attitude::Negative, cfg, test_templates(), *provider);
    REQUIRE(outcome.record.termination == Termination::TurnLimit);
    REQUIRE(outcome.record.transcript.size() == 6);
}

TEST_CASE("persistent garbage becomes a malformed-output termination", "[session][termination]") {
    auto provider = make_scripted_provider(
        std::vector<std::string>(4, "not a directive in any shape"));
    auto outcome = run_session("t004", sample_ccd(), Attitude::Neutral, fast_session_config(),
                               test_templates(), *provider);
    REQUIRE(outcome.record.termination == Termination::MalformedOutput);
    REQUIRE(outcome.record.transcript.empty());
    REQUIRE(outcome.record.phase_trace.empty());
    REQUIRE(provider->calls_made() == 4);  // first ask + three re-asks
}

TEST_CASE("mid-session garbage keeps the partial transcript", "[session][termination]") {
    std::vector<std::string> script = {
        directive_reply(1, "Open the conversation."),
        "What brought you in this week?",
        "Mostly the same spiral as before.",
    };
    script.insert(script.end(), 4, "garbled");
    auto provider = make_scripted_provider(script);
    auto outcome = run_session("t005", sample_ccd(), Attitude::Neutral, fast_session_config(),
                               test_templates(), *provider);
    REQUIRE(outcome.record.termination == Termination::MalformedOutput);
    REQUIRE(outcome.record.transcript.size() == 2);
    REQUIRE(outcome.record.phase_trace.size() == 1);
}

TEST_CASE("a truncated script is a provider failure", "[session][termination]") {
    std::vector<std::string> script = {
        directive_reply(1, "Open the conversation."),
        "What brought you in this week?",
        "Mostly the same spiral as before.",
        directive_reply(2, "Ask when it started."),
        "When did that begin?",
        // client reply missing: the script runs dry here
    };
    auto provider = make_scripted_provider(script);
    auto outcome = run_session("t006", sample_ccd(), Attitude::Neutral, fast_session_config(),
                               test_templates(), *provider);
    REQUIRE(outcome.record.termination == Termination::ProviderFailure);
    REQUIRE(outcome.record.transcript.size() == 3);
}

TEST_CASE("an illegal step jump fails fast as malformed output", "[session][termination]") {
    std::vector<std::string> script = {
        directive_reply(1, "Open the conversation."),
        "What brought you in this week?",
        "Mostly the same spiral as before.",
        directive_reply(4, "Skip to the middle."),  // jump: 1 -> 4
        directive_reply(2, "never used"),
    };
    auto provider = make_scripted_provider(script);
    auto outcome = run_session("t007", sample_ccd(), Attitude::Neutral, fast_session_config(),
                               test_templates(), *provider);
    REQUIRE(outcome.record.termination == Termination::MalformedOutput);
    REQUIRE(provider->calls_made() == 4);  // the jump is not re-asked
}

// ── Record invariants ───────────────────────────────────────────

TEST_CASE("violations surface on corrupted records", "[session][invariants]") {
    const SessionRecord clean = happy_outcome().record;
    REQUIRE(record_violations(clean).empty());

    SECTION("broken alternation") {
        SessionRecord r = clean;
        r.transcript[3].role = Speaker::Therapist;
        auto v = record_violations(r);
        REQUIRE_FALSE(v.empty());
        REQUIRE(v.front().find("role order") != std::string::npos);
    }
    SECTION("misnumbered turn") {
        SessionRecord r = clean;
        r.transcript[5].turn_index = 17;
        REQUIRE_FALSE(record_violations(r).empty());
    }
    SECTION("blank utterance") {
        SessionRecord r = clean;
        r.transcript[2].text = "   ";
        REQUIRE_FALSE(record_violations(r).empty());
    }
    SECTION("regressing phase order") {
        SessionRecord r = clean;
        // Entries 7 and 8 share a turn index but straddle the first phase
        // boundary, so swapping them regresses the phase sequence.
        std::swap(r.phase_trace[7], r.phase_trace[8]);
        auto v = record_violations(r);
        REQUIRE_FALSE(v.empty());
        REQUIRE(v.front().find("phase order") != std::string::npos);
    }
    SECTION("completed without the done marker") {
        SessionRecord r = clean;
        r.phase_trace.pop_back();
        REQUIRE_FALSE(record_violations(r).empty());
    }
    SECTION("completed without clinical states") {
        SessionRecord r = clean;
        r.assessment.reset();
        r.intervention.reset();
        REQUIRE(record_violations(r).size() == 2);
    }
    SECTION("inconsistent character counts") {
        SessionRecord r = clean;
        r.char_counts.total += 1;
        REQUIRE_FALSE(record_violations(r).empty());
    }
    SECTION("shrinking reconstruction") {
        SessionRecord r = clean;
        std::swap(r.reconstruction_history.front(), r.reconstruction_history.back());
        auto v = record_violations(r);
        REQUIRE_FALSE(v.empty());
        REQUIRE(v.front().find("completeness regresses") != std::string::npos);
    }
}

// ── Serialization ───────────────────────────────────────────────

TEST_CASE("session records survive a JSON round trip", "[session][json]") {
    const SessionRecord& r = happy_outcome().record;
    auto j = session_record_to_json(r);
    auto back = session_record_from_json(j);
    REQUIRE(back.ok());
    REQUIRE(back.value() == r);
    // And the serialized form itself is stable.
    REQUIRE(session_record_to_json(back.value()).dump() == j.dump());
}

TEST_CASE("record parsing rejects structural damage", "[session][json]") {
    auto j = session_record_to_json(happy_outcome().record);

    auto missing = j;
    missing.erase("termination");
    REQUIRE_FALSE(session_record_from_json(missing).ok());

    auto bad_label = j;
    bad_label["termination"] = "walked_out";
    REQUIRE_FALSE(session_record_from_json(bad_label).ok());

    auto bad_role = j;
    bad_role["transcript"][0]["role"] = "narrator";
    REQUIRE_FALSE(session_record_from_json(bad_role).ok());

    auto bad_phase = j;
    bad_phase["phase_trace"][0]["phase"] = "prologue";
    REQUIRE_FALSE(session_record_from_json(bad_phase).ok());

    REQUIRE_FALSE(session_record_from_json(nlohmann::json::array()).ok());
}

TEST_CASE("incomplete sessions serialize without optional states", "[session][json]") {
    auto provider = make_scripted_provider(std::vector<std::string>(4, "junk"));
    auto outcome = run_session("t008", sample_ccd(), Attitude::Positive, fast_session_config(),
                               test_templates(), *provider);
    auto j = session_record_to_json(outcome.record);
    REQUIRE_FALSE(j.contains("assessment"));
    REQUIRE_FALSE(j.contains("intervention"));
    REQUIRE_FALSE(j.contains("homework"));
    auto back = session_record_from_json(j);
    REQUIRE(back.ok());
    REQUIRE(back.value() == outcome.record);
}

// ── Replay rendering ────────────────────────────────────────────

TEST_CASE("replay interleaves strategies, phases, and utterances", "[session][replay]") {
    std::string text = replay(happy_outcome().record);
    REQUIRE(text.find("=== session t001:neutral (attitude neutral, termination completed) ===") ==
            0);

    auto pos = [&text](const std::string& needle) {
        auto p = text.find(needle);
        REQUIRE(p != std::string::npos);
        return p;
    };
    auto ident = pos("--- identification ---");
    auto assess = pos("--- assessment ---");
    auto interv = pos("--- intervention ---");
    auto summ = pos("--- summary ---");
    auto done = pos("--- done ---");
    REQUIRE(ident < assess);
    REQUIRE(assess < interv);
    REQUIRE(interv < summ);
    REQUIRE(summ < done);

    REQUIRE(pos("[strategy identification:1]") < pos("Therapist: "));
    pos("[strategy summary:3]");
    REQUIRE(text.find("[strategy done") == std::string::npos);

    std::size_t therapist_lines = 0;
    std::size_t from = 0;
    while ((from = text.find("\nTherapist: ", from)) != std::string::npos) {
        ++therapist_lines;
        ++from;
    }
    REQUIRE(therapist_lines == 15);
}

// ── Asymmetry audit ─────────────────────────────────────────────

TEST_CASE("a clean run passes the asymmetry audit", "[session][audit]") {
    const SessionOutcome& outcome = happy_outcome();
    REQUIRE(outcome.prompt_log.size() == 49);  // 19 control + 15 therapist + 15 client
    auto report = audit_asymmetry(outcome.record, outcome.prompt_log);
    REQUIRE(report.clean());

    int last_visible = 0;
    for (const PromptLogEntry& e : outcome.prompt_log) {
        REQUIRE(e.visible_partial_entries >= last_visible);
        last_visible = e.visible_partial_entries;
    }
}

TEST_CASE("planted ground truth in a therapist prompt is flagged", "[session][audit]") {
    const SessionOutcome& outcome = happy_outcome();
    auto poisoned = outcome.prompt_log;
    PromptLogEntry leak;
    leak.tag = "therapist";
    leak.side = "therapist";
    leak.turn_index = 0;
    leak.visible_partial_entries = 0;
    leak.prompt = "Context you should use: " + outcome.record.ground_truth_ccd.relevant_history;
    poisoned.push_back(leak);

    auto report = audit_asymmetry(outcome.record, poisoned);
    REQUIRE(report.violations.size() == 1);
    REQUIRE(report.violations[0].component == "relevant_history");
    REQUIRE(report.violations[0].tag == "therapist");
}

TEST_CASE("the audit ignores sides that legitimately see the truth", "[session][audit]") {
    const SessionOutcome& outcome = happy_outcome();
    auto log = outcome.prompt_log;
    PromptLogEntry entry;
    entry.tag = "client_neutral";
    entry.side = "client";
    entry.turn_index = 0;
    entry.visible_partial_entries = 0;
    entry.prompt = outcome.record.ground_truth_ccd.relevant_history;
    log.push_back(entry);
    entry.side = "judge";
    entry.tag = "judge_ctrs";
    log.push_back(entry);
    REQUIRE(audit_asymmetry(outcome.record, log).clean());
}

TEST_CASE("text the client already spoke is excused", "[session][audit]") {
    SessionRecord r;
    r.session_id = "t009:neutral";
    r.seed_id = "t009";
    r.ground_truth_ccd = sample_ccd();
    r.attitude = Attitude::Neutral;
    r.termination = Termination::TurnLimit;
    r.transcript = {
        {Speaker::Therapist, "What else should I know?", 0, "identification:1"},
        {Speaker::Client, "Honestly: " + r.ground_truth_ccd.relevant_history, 1, std::nullopt},
    };
    r.char_counts.client = count_codepoints(r.transcript[1].text);
    r.char_counts.therapist = count_codepoints(r.transcript[0].text);
    r.char_counts.total = r.char_counts.client + r.char_counts.therapist;

    PromptLogEntry entry;
    entry.tag = "control_identification";
    entry.side = "control";
    entry.visible_partial_entries = 0;
    entry.prompt = "History so far mentions: " + r.ground_truth_ccd.relevant_history;

    entry.turn_index = 2;  // after the client said it
    REQUIRE(audit_asymmetry(r, {entry}).clean());

    entry.turn_index = 1;  // before the client said it
    auto report = audit_asymmetry(r, {entry});
    REQUIRE(report.violations.size() == 1);
    REQUIRE(report.violations[0].component == "relevant_history");
}

TEST_CASE("text visible in the reconstruction is excused", "[session][audit]") {
    SessionRecord r;
    r.session_id = "t010:neutral";
    r.seed_id = "t010";
    r.ground_truth_ccd = sample_ccd();
    r.attitude = Attitude::Neutral;
    r.termination = Termination::TurnLimit;
    PartialCcd known = new_partial_ccd();
    known.relevant_history = r.ground_truth_ccd.relevant_history;
    r.reconstruction_history = {{0, known}};

    PromptLogEntry entry;
    entry.tag = "therapist";
    entry.side = "therapist";
    entry.turn_index = 0;
    entry.prompt = "Recorded profile: " + r.ground_truth_ccd.relevant_history;

    entry.visible_partial_entries = 1;
    REQUIRE(audit_asymmetry(r, {entry}).clean());

    entry.visible_partial_entries = 0;
    REQUIRE(audit_asymmetry(r, {entry}).violations.size() == 1);
}

TEST_CASE("the emotion list leaks as a joined phrase", "[session][audit]") {
    SessionRecord r;
    r.session_id = "t011:neutral";
    r.seed_id = "t011";
    r.ground_truth_ccd = sample_ccd();  // emotions: sad, guilty
    r.attitude = Attitude::Neutral;
    r.termination = Termination::TurnLimit;

    PromptLogEntry entry;
    entry.tag = "control_identification";
    entry.side = "control";
    entry.turn_index = 0;
    entry.visible_partial_entries = 0;
    entry.prompt = "The client feels sad, guilty about most days.";
    auto report = audit_asymmetry(r, {entry});
    REQUIRE(report.violations.size() == 1);
    REQUIRE(report.violations[0].component == "emotions");

    // The single-word core belief is not a usable needle and stays exempt.
    entry.prompt = "Core belief candidates include unlovable and others.";
    REQUIRE(audit_asymmetry(r, {entry}).clean());
}
