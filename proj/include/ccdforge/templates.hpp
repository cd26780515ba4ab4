#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "ccdforge/prompt.hpp"
#include "ccdforge/result.hpp"

namespace ccdforge {

/// The fixed set of template ids the engine renders. A template directory
/// may override any of them (one <id>.txt per template); ids outside this
/// set are rejected so typos surface at load time.
inline const std::vector<std::string>& template_ids() {
    static const std::vector<std::string> kIds = {
        "ccd_builder",
        "client_positive",
        "client_neutral",
        "client_negative",
        "therapist",
        "control_identification",
        "control_assessment",
        "control_intervention",
        "control_summary",
        "judge_ctrs",
        "judge_panas_pre",
        "judge_panas_post",
        "judge_recon",
    };
    return kIds;
}

namespace builtin_templates {

// Shared format-contract fragments, kept identical across templates so the
// parser and the prompts can never drift apart.

inline constexpr const char* kDirectiveFormat =
    "Reply with a single JSON object and nothing else. Keys:\n"
    "  \"step\": integer, the procedure step this reply executes\n"
    "  \"instruction\": string, the directive the therapist should follow now\n"
    "  \"phase_complete\": boolean, true only when this phase is finished\n";

inline const char* ccd_builder() {
    return
        "You construct a complete cognitive profile for a simulated counseling "
        "client. Expand the seed below into all eight profile components: "
        "situation, automatic_thoughts, emotions, behaviors, coping_strategies, "
        "intermediate_beliefs, core_belief, relevant_history.\n"
        "\n"
        "Seed:\n"
        "  life domain: {{life_domain}}\n"
        "  situation sketch: {{scenario}}\n"
        "  automatic thought: {{automatic_thought}}\n"
        "  thinking-pattern label: {{distortion_category}}\n"
        "\n"
        "Rules:\n"
        "- situation restates the sketch concretely; automatic_thoughts builds on "
        "the seed thought.\n"
        "- emotions is an array of one to seven labels drawn from: "
        "sad/anxious/angry/disappointed/ashamed/guilty/jealous.\n"
        "- core_belief is exactly one of: helpless/worthless/unlovable.\n"
        "- behaviors, coping_strategies, intermediate_beliefs, relevant_history "
        "are each one or two plausible sentences consistent with the seed.\n"
        "\n"
        "Reply with a single JSON object with exactly those eight keys and "
        "nothing else.\n";
}

inline const char* client_common_header() {
    return
        "You are role-playing a counseling client. Your inner world is fully "
        "described by the profile below; everything you say must stay "
        "consistent with it. Never mention the profile, the labels, or that "
        "you are simulated. Speak in first person, a few sentences at most.\n"
        "\n"
        "Your profile:\n"
        "{{ccd}}\n"
        "\n";
}

inline std::string client_positive() {
    return std::string(client_common_header()) +
        "Stance: you are motivated and cooperative. You engage actively with "
        "the therapist's questions, volunteer relevant detail, and show "
        "willingness to try what is suggested.\n";
}

inline std::string client_neutral() {
    return std::string(client_common_header()) +
        "Stance: you are ambivalent. You answer questions but rarely "
        "volunteer more than asked, and you voice occasional doubt about "
        "whether talking will help, while still staying in the conversation.\n";
}

inline std::string client_negative() {
    return std::string(client_common_header()) +
        "Stance: you are reluctant and guarded. You deflect, minimize, or "
        "push back before giving ground, disclose slowly, and question the "
        "point of the exercise — without ending the conversation.\n";
}

inline const char* therapist() {
    return
        "You are a counselor conducting a structured talking-therapy session. "
        "You know only what the conversation has revealed so far; never invent "
        "facts about the client that are not in your notes or the dialogue.\n"
        "\n"
        "Your working notes on the client (may be incomplete):\n"
        "{{partial_ccd}}\n"
        "\n"
        "Directive for this turn:\n"
        "{{strategy_instruction}}\n"
        "\n"
        "Write your next utterance to the client: warm, collaborative, one to "
        "three sentences, ending with a question unless the directive says to "
        "close. Reply with the utterance text only.\n";
}

inline const char* control_identification() {
    return
        "You direct the first phase of a structured counseling session: "
        "mapping the client's inner world from dialogue alone. Work through "
        "these eight steps, one per turn, in order:\n"
        "  1. Ask how the client is feeling right now and open the conversation.\n"
        "  2. Pin down the concrete situation that triggered the distress.\n"
        "  3. Elicit the automatic thoughts that ran through the client's mind.\n"
        "  4. Ask what those thoughts would mean about the client if true, "
        "repeatedly, to reach the underlying self-belief.\n"
        "  5. Ask about earlier life experiences connected to that belief.\n"
        "  6. Link the thoughts to the emotions felt and behaviors shown.\n"
        "  7. Identify how the client habitually copes with the distress.\n"
        "  8. Reflect the emerging picture back to the client and confirm it.\n"
        "\n"
        "Your notes so far (may be incomplete):\n"
        "{{partial_ccd}}\n"
        "Current step: {{current_step}}\n"
        "\n"
        "Infer any newly revealed profile slots from the latest exchange and "
        "record them. Emotion labels must come from "
        "sad/anxious/angry/disappointed/ashamed/guilty/jealous; core_belief "
        "from helpless/worthless/unlovable.\n"
        "\n"
        "Reply with a single JSON object and nothing else. Keys:\n"
        "  \"step\": integer, the step this reply executes\n"
        "  \"instruction\": string, the directive the therapist should follow now\n"
        "  \"phase_complete\": boolean, true only after step 8 is done\n"
        "  \"ccd_update\": optional object with newly inferred slots (keys among: "
        "situation, automatic_thoughts, emotions, behaviors, coping_strategies, "
        "intermediate_beliefs, core_belief, relevant_history)\n";
}

inline std::string control_assessment() {
    return std::string(
        "You direct the second phase of a structured counseling session: "
        "measurement. Three steps, one per turn:\n"
        "  1. Have the therapist ask the client to rate the intensity of their "
        "main emotion from 0 to 100%.\n"
        "  2. Have the therapist ask how strongly, 0 to 100%, the client "
        "believes their key negative thought.\n"
        "  3. Close the phase: report both measurements.\n"
        "\n"
        "Your notes so far (may be incomplete):\n"
        "{{partial_ccd}}\n"
        "Current step: {{current_step}}\n"
        "\n") +
        kDirectiveFormat +
        "  \"state\": required at the closing step — object with keys "
        "primary_emotion (one of sad/anxious/angry/disappointed/ashamed/guilty/"
        "jealous), emotion_intensity_pct (0-100), "
        "belief_in_automatic_thought_pct (0-100)\n";
}

inline std::string control_intervention() {
    return std::string(
        "You direct the third phase of a structured counseling session: "
        "restructuring the key negative thought. Steps, one per turn:\n"
        "  1. Have the therapist examine evidence for and against the thought "
        "and guide the client toward a more balanced alternative.\n"
        "  2. Have the therapist test the alternative against the client's "
        "experience; record the alternative thought.\n"
        "  3. Have the therapist ask how strongly, 0 to 100%, the client "
        "believes the alternative; record the percentage.\n"
        "  4. Only when that belief is 89% or lower: have the therapist design "
        "a small concrete between-session experiment to test the alternative, "
        "and record it. When belief is 90% or higher this step is skipped.\n"
        "  5. Close the phase.\n"
        "\n"
        "Current step: {{current_step}}\n"
        "\n") +
        kDirectiveFormat +
        "  \"state\": object carrying whichever of these is newly known — "
        "alternative_thought (string), belief_in_alternative_pct (0-100), "
        "behavioral_experiment (string)\n";
}

inline std::string control_summary() {
    return std::string(
        "You direct the closing phase of a structured counseling session. "
        "Three steps, one per turn:\n"
        "  1. Have the therapist recap what was worked out. Homework for this "
        "client: {{homework}}. If homework is listed, the recap directive must "
        "restate it; if none, the recap says no task was assigned.\n"
        "  2. Have the therapist affirm the client's effort and say goodbye.\n"
        "  3. End the session.\n"
        "\n"
        "Current step: {{current_step}}\n"
        "\n") +
        kDirectiveFormat;
}

inline const char* judge_ctrs() {
    return
        "You rate a counseling transcript on six competence items: "
        "understanding, interpersonal_effectiveness, collaboration, "
        "guided_discovery, focus, strategy. Use integers from {{scale_floor}} "
        "(poor) to 6 (excellent).\n"
        "\n"
        "Transcript:\n"
        "{{transcript}}\n"
        "\n"
        "Reply with a single JSON object whose keys are exactly the six item "
        "names and whose values are the integer ratings. Nothing else.\n";
}

inline const char* panas_item_block() {
    return
        "Rate each of these twenty feelings on an integer scale from 1 (very "
        "slightly or not at all) to 5 (extremely): Excited, Strong, "
        "Enthusiastic, Proud, Alert, Inspired, Determined, Attentive, Active, "
        "Interest, Distressed, Upset, Guilty, Scared, Hostile, Irritable, "
        "Ashamed, Nervous, Jittery, Afraid.\n"
        "\n"
        "Reply with a single JSON object whose keys are exactly those twenty "
        "names (capitalized as written) and whose values are the integers. "
        "Nothing else.\n";
}

inline std::string judge_panas_pre() {
    return std::string(
        "Below is a cognitive profile of a counseling client as they were "
        "before their session. Infer how this person felt at that point.\n"
        "\n"
        "Profile:\n"
        "{{ccd}}\n"
        "\n") +
        panas_item_block();
}

inline std::string judge_panas_post() {
    return std::string(
        "Below is the transcript of a counseling session. Infer how the "
        "client felt at the end of it.\n"
        "\n"
        "Transcript:\n"
        "{{transcript}}\n"
        "\n") +
        panas_item_block();
}

inline const char* judge_recon() {
    return
        "Compare a counselor's reconstructed notes against the client's true "
        "profile, component by component. For each of the eight components "
        "(situation, automatic_thoughts, emotions, behaviors, "
        "coping_strategies, intermediate_beliefs, core_belief, "
        "relevant_history) and for the overall picture, rate the match: "
        "1 = not accurate, 2 = slightly accurate, 3 = very accurate.\n"
        "\n"
        "True profile:\n"
        "{{ground_truth}}\n"
        "\n"
        "Reconstructed notes:\n"
        "{{reconstruction}}\n"
        "\n"
        "Reply with a single JSON object with keys overall plus the eight "
        "component names, values the integer ratings. Nothing else.\n";
}

}  // namespace builtin_templates

/// Named collection of prompt templates. Starts from the built-in set;
/// a template directory can override any subset.
class TemplateLibrary {
  public:
    static TemplateLibrary builtin() {
        namespace bt = builtin_templates;
        TemplateLibrary lib;
        lib.put("ccd_builder", bt::ccd_builder());
        lib.put("client_positive", bt::client_positive());
        lib.put("client_neutral", bt::client_neutral());
        lib.put("client_negative", bt::client_negative());
        lib.put("therapist", bt::therapist());
        lib.put("control_identification", bt::control_identification());
        lib.put("control_assessment", bt::control_assessment());
        lib.put("control_intervention", bt::control_intervention());
        lib.put("control_summary", bt::control_summary());
        lib.put("judge_ctrs", bt::judge_ctrs());
        lib.put("judge_panas_pre", bt::judge_panas_pre());
        lib.put("judge_panas_post", bt::judge_panas_post());
        lib.put("judge_recon", bt::judge_recon());
        return lib;
    }

    /// Override templates from <dir>/<template_id>.txt files. Unknown file
    /// stems are errors; absent ids keep their built-in bodies.
    Result<void> load_directory(const std::filesystem::path& dir) {
        std::error_code ec;
        if (!std::filesystem::is_directory(dir, ec)) {
            return make_error(ErrorKind::Io, "template dir not found: " + dir.string());
        }
        for (const auto& entry : std::filesystem::directory_iterator(dir, ec)) {
            if (!entry.is_regular_file() || entry.path().extension() != ".txt") continue;
            std::string id = entry.path().stem().string();
            const auto& ids = template_ids();
            if (std::find(ids.begin(), ids.end(), id) == ids.end()) {
                return make_error(ErrorKind::UnknownLabel, "unknown template id: " + id);
            }
            std::ifstream in(entry.path());
            if (!in) {
                return make_error(ErrorKind::Io, "cannot read " + entry.path().string());
            }
            std::ostringstream body;
            body << in.rdbuf();
            put(id, body.str());
        }
        if (ec) return make_error(ErrorKind::Io, "cannot scan " + dir.string());
        return Result<void>{};
    }

    Result<PromptTemplate> get(const std::string& id) const {
        auto it = templates_.find(id);
        if (it == templates_.end()) {
            return make_error(ErrorKind::NotFound, "no template " + id);
        }
        return it->second;
    }

    void put(std::string id, std::string body) {
        templates_[id] = PromptTemplate{id, std::move(body)};
    }

  private:
    std::map<std::string, PromptTemplate> templates_;
};

}  // namespace ccdforge
