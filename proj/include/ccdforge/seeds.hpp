#pragma once

#include <algorithm>
#include <istream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "ccdforge/result.hpp"
#include "ccdforge/taxonomy.hpp"

namespace ccdforge {

/// The default life-domain whitelist. Callers may substitute any other
/// seven-label set; passing no whitelist disables the check entirely.
inline const std::vector<std::string>& default_life_domains() {
    static const std::vector<std::string> kDomains = {
        "Family", "Work", "Study", "Social", "Health", "Finance", "Romance",
    };
    return kDomains;
}

/// One row of the seed corpus: a situation sketch plus the cognitive
/// labels the profile builder expands into a full CCD.
struct SeedRecord {
    std::string id;
    std::string scenario;
    std::string automatic_thought;
    std::string distortion_category;
    std::string life_domain;

    bool operator==(const SeedRecord&) const = default;
};

inline nlohmann::ordered_json seed_to_json(const SeedRecord& s) {
    nlohmann::ordered_json j;
    j["id"] = s.id;
    j["scenario"] = s.scenario;
    j["automatic_thought"] = s.automatic_thought;
    j["distortion_category"] = s.distortion_category;
    j["life_domain"] = s.life_domain;
    return j;
}

/// Parse one seed object. `domains` is an optional whitelist: when null,
/// any life_domain label is accepted.
inline Result<SeedRecord> parse_seed(const nlohmann::json& j,
                                     const std::vector<std::string>* domains = nullptr) {
    if (!j.is_object()) {
        return make_error(ErrorKind::SchemaViolation, "seed: expected an object");
    }
    SeedRecord s;
    auto read_text = [&](std::string_view name, std::string& target) -> std::optional<Error> {
        if (!j.contains(name)) {
            return make_error(ErrorKind::MissingField, "seed: missing " + std::string(name));
        }
        if (!j.at(std::string(name)).is_string()) {
            return make_error(ErrorKind::SchemaViolation, std::string(name) + ": expected a string");
        }
        target = j.at(std::string(name)).get<std::string>();
        return std::nullopt;
    };
    if (auto err = read_text("id", s.id)) return *err;
    if (auto err = read_text("scenario", s.scenario)) return *err;
    if (auto err = read_text("automatic_thought", s.automatic_thought)) return *err;
    if (auto err = read_text("distortion_category", s.distortion_category)) return *err;
    if (auto err = read_text("life_domain", s.life_domain)) return *err;

    if (detail::trim_copy(s.id).empty()) {
        return make_error(ErrorKind::EmptyComponent, "seed: empty id");
    }
    if (detail::trim_copy(s.scenario).empty()) {
        return make_error(ErrorKind::EmptyComponent, "seed: empty scenario");
    }
    if (detail::trim_copy(s.automatic_thought).empty()) {
        return make_error(ErrorKind::EmptyComponent, "seed: empty automatic_thought");
    }
    if (domains != nullptr) {
        bool known = std::find(domains->begin(), domains->end(), s.life_domain) != domains->end();
        if (!known) {
            return make_error(ErrorKind::UnknownLabel,
                              "seed " + s.id + ": unknown life_domain \"" + s.life_domain + "\"");
        }
    }
    return s;
}

/// Parse a JSON-lines seed corpus. Blank lines are skipped; the first
/// malformed row aborts the load with its line number.
inline Result<std::vector<SeedRecord>> load_seeds(std::istream& in,
                                                  const std::vector<std::string>* domains = nullptr) {
    std::vector<SeedRecord> out;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (detail::trim_copy(line).empty()) continue;
        nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
        if (j.is_discarded()) {
            return make_error(ErrorKind::SchemaViolation,
                              "seeds line " + std::to_string(line_no) + ": invalid JSON");
        }
        auto seed = parse_seed(j, domains);
        if (!seed) {
            Error err = seed.error();
            err.message = "seeds line " + std::to_string(line_no) + ": " + err.message;
            return err;
        }
        out.push_back(std::move(seed.value()));
    }
    return out;
}

inline Result<std::vector<SeedRecord>> load_seeds_from_string(
    const std::string& text, const std::vector<std::string>* domains = nullptr) {
    std::istringstream in(text);
    return load_seeds(in, domains);
}

}  // namespace ccdforge
