#pragma once

#include <algorithm>
#include <array>
#include <cctype>
#include <string>
#include <string_view>

#include "ccdforge/result.hpp"

namespace ccdforge {

/// The seven discrete emotions a client profile may carry. Closed set:
/// parsing any other label is an error.
enum class Emotion {
    Sad,
    Anxious,
    Angry,
    Disappointed,
    Ashamed,
    Guilty,
    Jealous,
};

inline constexpr std::array<Emotion, 7> kAllEmotions = {
    Emotion::Sad,          Emotion::Anxious, Emotion::Angry, Emotion::Disappointed,
    Emotion::Ashamed,      Emotion::Guilty,  Emotion::Jealous,
};

/// The three prototypical negative core beliefs. Closed set.
enum class CoreBelief {
    Helpless,
    Worthless,
    Unlovable,
};

inline constexpr std::array<CoreBelief, 3> kAllCoreBeliefs = {
    CoreBelief::Helpless,
    CoreBelief::Worthless,
    CoreBelief::Unlovable,
};

/// Client attitudinal stance toward the counseling process.
enum class Attitude {
    Positive,
    Neutral,
    Negative,
};

inline constexpr std::array<Attitude, 3> kAllAttitudes = {
    Attitude::Positive,
    Attitude::Neutral,
    Attitude::Negative,
};

inline std::string_view to_string(Emotion e) {
    switch (e) {
        case Emotion::Sad: return "sad";
        case Emotion::Anxious: return "anxious";
        case Emotion::Angry: return "angry";
        case Emotion::Disappointed: return "disappointed";
        case Emotion::Ashamed: return "ashamed";
        case Emotion::Guilty: return "guilty";
        case Emotion::Jealous: return "jealous";
    }
    return "";
}

inline std::string_view to_string(CoreBelief b) {
    switch (b) {
        case CoreBelief::Helpless: return "helpless";
        case CoreBelief::Worthless: return "worthless";
        case CoreBelief::Unlovable: return "unlovable";
    }
    return "";
}

inline std::string_view to_string(Attitude a) {
    switch (a) {
        case Attitude::Positive: return "positive";
        case Attitude::Neutral: return "neutral";
        case Attitude::Negative: return "negative";
    }
    return "";
}

namespace detail {

inline std::string trim_copy(std::string_view s) {
    auto is_space = [](unsigned char c) { return std::isspace(c) != 0; };
    std::size_t begin = 0;
    std::size_t end = s.size();
    while (begin < end && is_space(static_cast<unsigned char>(s[begin]))) ++begin;
    while (end > begin && is_space(static_cast<unsigned char>(s[end - 1]))) --end;
    return std::string(s.substr(begin, end - begin));
}

inline std::string lower_copy(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

}  // namespace detail

// Label parsing is case-insensitive and tolerant of surrounding whitespace;
// model output capitalizes inconsistently.

inline Result<Emotion> parse_emotion(std::string_view label) {
    const std::string norm = detail::lower_copy(detail::trim_copy(label));
    for (Emotion e : kAllEmotions) {
        if (norm == to_string(e)) return e;
    }
    return make_error(ErrorKind::UnknownLabel, "unknown emotion: " + std::string(label));
}

inline Result<CoreBelief> parse_core_belief(std::string_view label) {
    const std::string norm = detail::lower_copy(detail::trim_copy(label));
    for (CoreBelief b : kAllCoreBeliefs) {
        if (norm == to_string(b)) return b;
    }
    return make_error(ErrorKind::UnknownLabel, "unknown core belief: " + std::string(label));
}

inline Result<Attitude> parse_attitude(std::string_view label) {
    const std::string norm = detail::lower_copy(detail::trim_copy(label));
    for (Attitude a : kAllAttitudes) {
        if (norm == to_string(a)) return a;
    }
    return make_error(ErrorKind::UnknownLabel, "unknown attitude: " + std::string(label));
}

}  // namespace ccdforge
