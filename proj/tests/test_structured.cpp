// Structured model output: extraction, normalization, schema parsing,
// and serialize/parse round-trips.

#include <variant>

#include <catch2/catch_amalgamated.hpp>

#include "ccdforge/ccdforge.hpp"
#include "support/fixtures.hpp"

using namespace ccdforge;
using testsupport::Rng;

TEST_CASE("extract_json_object digs the object out of prose", "[structured]") {
    auto r = extract_json_object("Sure! Here is the plan:\n{\"step\": 2} hope that helps");
    REQUIRE(r.ok());
    REQUIRE(r.value()["step"] == 2);

    auto nested = extract_json_object(R"(noise {"a": {"b": [1, 2]}, "c": "x"} tail)");
    REQUIRE(nested.ok());
    REQUIRE(nested.value()["a"]["b"][1] == 2);

    auto braces_in_strings = extract_json_object(R"({"text": "keep th}is \" brace"})");
    REQUIRE(braces_in_strings.ok());
    REQUIRE(braces_in_strings.value()["text"] == "keep th}is \" brace");
}

TEST_CASE("extract_json_object skips unparseable candidates", "[structured]") {
    auto r = extract_json_object(R"(first {not json} then {"ok": true})");
    REQUIRE(r.ok());
    REQUIRE(r.value()["ok"] == true);

    auto none = extract_json_object("no object anywhere");
    REQUIRE_FALSE(none.ok());
    REQUIRE(none.error().kind == ErrorKind::NoJsonObject);

    auto unbalanced = extract_json_object("{\"open\": 1");
    REQUIRE_FALSE(unbalanced.ok());
}

TEST_CASE("normalize_percentage accepts ints, floats, and embedded strings", "[structured]") {
    auto pct = [](const nlohmann::json& v) { return normalize_percentage(v, "f"); };
    REQUIRE(pct(80).value() == 80);
    REQUIRE(pct(0).value() == 0);
    REQUIRE(pct(100).value() == 100);
    REQUIRE(pct(79.6).value() == 80);  // nearest integer
    REQUIRE(pct("80").value() == 80);
    REQUIRE(pct("80%").value() == 80);
    REQUIRE(pct("about 80%").value() == 80);
    REQUIRE(pct("I'd say 55 out of 100").value() == 55);
}

TEST_CASE("normalize_percentage rejects out-of-range and junk", "[structured]") {
    auto pct = [](const nlohmann::json& v) { return normalize_percentage(v, "f"); };
    for (const nlohmann::json& bad :
         {nlohmann::json(150), nlohmann::json(-5), nlohmann::json("150%"),
          nlohmann::json("minus -20"), nlohmann::json("no number here"),
          nlohmann::json(nullptr), nlohmann::json(true)}) {
        auto r = pct(bad);
        INFO(bad.dump());
        REQUIRE_FALSE(r.ok());
    }
    REQUIRE(pct("150%").error().kind == ErrorKind::OutOfRange);
}

TEST_CASE("directive envelope enforces its key set and step range", "[structured]") {
    auto d = parse_strategy_directive(nlohmann::json::parse(
        R"({"step": 3, "instruction": "ask about sleep", "phase_complete": false})"));
    REQUIRE(d.ok());
    REQUIRE(d.value().step == 3);
    REQUIRE_FALSE(d.value().phase_complete);

    REQUIRE_FALSE(parse_strategy_directive(nlohmann::json::parse(R"({"step": 0})")).ok());
    REQUIRE_FALSE(parse_strategy_directive(nlohmann::json::parse(R"({"instruction": "x"})")).ok());
    REQUIRE_FALSE(parse_strategy_directive(
                      nlohmann::json::parse(R"({"step": 1, "mood": "fine"})"))
                      .ok());
    REQUIRE_FALSE(parse_strategy_directive(
                      nlohmann::json::parse(R"({"step": 1, "phase_complete": "yes"})"))
                      .ok());
}

TEST_CASE("ccd_update replies carry partial slots", "[structured]") {
    auto r = parse_ccd_update(nlohmann::json::parse(
        R"({"step": 2, "instruction": "dig in", "ccd_update": {"situation": "won't settle"}})"));
    REQUIRE(r.ok());
    REQUIRE(r.value().update.situation.value() == "won't settle");

    // The update block is optional; junk inside it is not.
    REQUIRE(parse_ccd_update(nlohmann::json::parse(R"({"step": 1, "instruction": "x"})")).ok());
    REQUIRE_FALSE(parse_ccd_update(nlohmann::json::parse(
                      R"({"step": 1, "instruction": "x", "ccd_update": {"vibe": "off"}})"))
                      .ok());
}

TEST_CASE("assessment replies parse their measurement state", "[structured]") {
    auto r = parse_assessment_state(nlohmann::json::parse(
        R"({"step": 3, "phase_complete": true,
            "state": {"primary_emotion": "anxious",
                      "emotion_intensity_pct": "about 80%",
                      "belief_in_automatic_thought_pct": 90}})"));
    REQUIRE(r.ok());
    REQUIRE(r.value().state.has_value());
    REQUIRE(r.value().state->primary_emotion == Emotion::Anxious);
    REQUIRE(r.value().state->emotion_intensity_pct == 80);
    REQUIRE(r.value().state->belief_in_automatic_thought_pct == 90);

    REQUIRE_FALSE(parse_assessment_state(nlohmann::json::parse(
                      R"({"step": 3, "state": {"primary_emotion": "anxious"}})"))
                      .ok());
}

TEST_CASE("intervention replies accumulate an optional draft", "[structured]") {
    auto r = parse_intervention_state(nlohmann::json::parse(
        R"({"step": 4, "instruction": "design it",
            "state": {"alternative_thought": "strain, not proof",
                      "belief_in_alternative_pct": "around 60"}})"));
    REQUIRE(r.ok());
    REQUIRE(r.value().state.alternative_thought.value() == "strain, not proof");
    REQUIRE(r.value().state.belief_in_alternative_pct.value() == 60);
    REQUIRE_FALSE(r.value().state.behavioral_experiment.has_value());

    REQUIRE_FALSE(parse_intervention_state(nlohmann::json::parse(
                      R"({"step": 1, "instruction": "x", "state": {"notes": "hm"}})"))
                      .ok());
}

TEST_CASE("score schemas enforce their ranges", "[structured]") {
    REQUIRE(parse_ctrs_scores(
                nlohmann::json::parse(testsupport::ctrs_reply({0, 6, 3, 4, 5, 2})))
                .ok());
    REQUIRE_FALSE(parse_ctrs_scores(
                      nlohmann::json::parse(testsupport::ctrs_reply({0, 7, 3, 4, 5, 2})))
                      .ok());

    REQUIRE(parse_panas_scores(nlohmann::json::parse(testsupport::panas_reply(1, 5))).ok());
    REQUIRE_FALSE(parse_panas_scores(nlohmann::json::parse(testsupport::panas_reply(0, 5))).ok());
    {
        auto j = nlohmann::json::parse(testsupport::panas_reply(3, 3));
        j.erase("Alert");
        REQUIRE_FALSE(parse_panas_scores(j).ok());
    }

    REQUIRE(parse_reconstruction_ratings(
                nlohmann::json::parse(testsupport::recon_reply(3, {3, 3, 2, 3, 2, 2, 3, 2})))
                .ok());
    REQUIRE_FALSE(parse_reconstruction_ratings(
                      nlohmann::json::parse(testsupport::recon_reply(4, {3, 3, 2, 3, 2, 2, 3, 2})))
                      .ok());
}

TEST_CASE("parse_structured dispatches by schema name", "[structured]") {
    auto r = parse_structured(R"(prefix {"step": 1, "instruction": "open"} suffix)",
                              "strategy_directive");
    REQUIRE(r.ok());
    REQUIRE(std::holds_alternative<DirectiveReply>(r.value()));
    REQUIRE_FALSE(parse_structured("{}", "no_such_schema").ok());
    for (SchemaId id :
         {SchemaId::CcdUpdate, SchemaId::AssessmentState, SchemaId::InterventionState,
          SchemaId::StrategyDirective, SchemaId::CtrsScores, SchemaId::PanasScores,
          SchemaId::ReconstructionRatings}) {
        REQUIRE(parse_schema_id(std::string(to_string(id))).value() == id);
    }
}

// ── Randomized round-trip property ──────────────────────────────

namespace {

DirectiveReply random_directive(Rng& rng) {
    DirectiveReply d;
    d.step = rng.in_range(1, 8);
    d.instruction = rng.coin() ? rng.sentence(rng.in_range(1, 6)) : std::string{};
    d.phase_complete = rng.coin();
    return d;
}

PartialCcd random_partial(Rng& rng) {
    PartialCcd p = new_partial_ccd();
    if (rng.coin()) p.situation = rng.sentence(3);
    if (rng.coin()) p.automatic_thoughts = rng.sentence(4);
    if (rng.coin()) {
        std::vector<Emotion> emotions;
        for (Emotion e : kAllEmotions) {
            if (rng.coin()) emotions.push_back(e);
        }
        if (emotions.empty()) emotions.push_back(Emotion::Sad);
        p.emotions = canonical_emotions(emotions);
    }
    if (rng.coin()) p.behaviors = rng.sentence(3);
    if (rng.coin()) p.coping_strategies = rng.sentence(3);
    if (rng.coin()) p.intermediate_beliefs = rng.sentence(5);
    if (rng.coin()) p.core_belief = kAllCoreBeliefs[rng.below(kAllCoreBeliefs.size())];
    if (rng.coin()) p.relevant_history = rng.sentence(4);
    return p;
}

StructuredValue random_value(Rng& rng) {
    switch (rng.below(7)) {
        case 0: {
            CcdUpdateReply r;
            r.directive = random_directive(rng);
            r.update = random_partial(rng);
            return r;
        }
        case 1:
            return random_directive(rng);
        case 2: {
            AssessmentReply r;
            r.directive = random_directive(rng);
            if (rng.coin()) {
                AssessmentFields f;
                f.primary_emotion = kAllEmotions[rng.below(kAllEmotions.size())];
                f.emotion_intensity_pct = rng.in_range(0, 100);
                f.belief_in_automatic_thought_pct = rng.in_range(0, 100);
                r.state = f;
            }
            return r;
        }
        case 3: {
            InterventionReply r;
            r.directive = random_directive(rng);
            if (rng.coin()) r.state.alternative_thought = rng.sentence(4);
            if (rng.coin()) r.state.belief_in_alternative_pct = rng.in_range(0, 100);
            if (rng.coin()) r.state.behavioral_experiment = rng.sentence(5);
            return r;
        }
        case 4: {
            CtrsItems items;
            items.understanding = rng.in_range(0, 6);
            items.interpersonal_effectiveness = rng.in_range(0, 6);
            items.collaboration = rng.in_range(0, 6);
            items.guided_discovery = rng.in_range(0, 6);
            items.focus = rng.in_range(0, 6);
            items.strategy = rng.in_range(0, 6);
            return items;
        }
        case 5: {
            PanasItems items;
            for (int& v : items.positive) v = rng.in_range(1, 5);
            for (int& v : items.negative) v = rng.in_range(1, 5);
            return items;
        }
        default: {
            ReconstructionItems items;
            items.overall = rng.in_range(1, 3);
            for (int& v : items.components) v = rng.in_range(1, 3);
            return items;
        }
    }
}

SchemaId schema_of(const StructuredValue& value) {
    if (std::holds_alternative<CcdUpdateReply>(value)) return SchemaId::CcdUpdate;
    if (std::holds_alternative<DirectiveReply>(value)) return SchemaId::StrategyDirective;
    if (std::holds_alternative<AssessmentReply>(value)) return SchemaId::AssessmentState;
    if (std::holds_alternative<InterventionReply>(value)) return SchemaId::InterventionState;
    if (std::holds_alternative<CtrsItems>(value)) return SchemaId::CtrsScores;
    if (std::holds_alternative<PanasItems>(value)) return SchemaId::PanasScores;
    return SchemaId::ReconstructionRatings;
}

}  // namespace

TEST_CASE("serialize → parse round-trips 1000 random instances", "[structured][property]") {
    Rng rng(20260822);
    int failures = 0;
    for (int i = 0; i < 1000; ++i) {
        StructuredValue value = random_value(rng);
        std::string raw = serialize_structured(value).dump();
        auto back = parse_structured(raw, schema_of(value));
        if (!back.ok() || !(back.value() == value)) ++failures;
    }
    REQUIRE(failures == 0);
}
