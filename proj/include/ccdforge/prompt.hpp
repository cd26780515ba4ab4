#pragma once

#include <map>
#include <set>
#include <string>
#include <string_view>

#include "ccdforge/result.hpp"

namespace ccdforge {

/// A named prompt body with {{placeholder}} slots.
struct PromptTemplate {
    std::string template_id;
    std::string body;
};

/// Collect the distinct placeholder names appearing in a template body.
inline std::set<std::string> placeholder_names(std::string_view body) {
    std::set<std::string> names;
    std::size_t pos = 0;
    while (true) {
        std::size_t open = body.find("{{", pos);
        if (open == std::string_view::npos) break;
        std::size_t close = body.find("}}", open + 2);
        if (close == std::string_view::npos) break;
        names.emplace(body.substr(open + 2, close - open - 2));
        pos = close + 2;
    }
    return names;
}

/// Substitute every {{name}} with bindings[name]. Byte-stable: identical
/// inputs always yield identical output. A placeholder without a binding is
/// an error; in strict mode so is a binding without a placeholder.
inline Result<std::string> render_prompt(const PromptTemplate& tmpl,
                                         const std::map<std::string, std::string>& bindings,
                                         bool strict = false) {
    if (strict) {
        std::set<std::string> names = placeholder_names(tmpl.body);
        for (const auto& [name, value] : bindings) {
            (void)value;
            if (names.find(name) == names.end()) {
                return make_error(ErrorKind::UnknownPlaceholder,
                                  tmpl.template_id + ": binding \"" + name +
                                      "\" matches no placeholder");
            }
        }
    }
    std::string out;
    out.reserve(tmpl.body.size());
    std::string_view body = tmpl.body;
    std::size_t pos = 0;
    while (true) {
        std::size_t open = body.find("{{", pos);
        if (open == std::string_view::npos) {
            out.append(body.substr(pos));
            break;
        }
        std::size_t close = body.find("}}", open + 2);
        if (close == std::string_view::npos) {
            out.append(body.substr(pos));
            break;
        }
        out.append(body.substr(pos, open - pos));
        std::string name(body.substr(open + 2, close - open - 2));
        auto it = bindings.find(name);
        if (it == bindings.end()) {
            return make_error(ErrorKind::MissingBinding,
                              tmpl.template_id + ": missing binding " + name);
        }
        out.append(it->second);
        pos = close + 2;
    }
    return out;
}

}  // namespace ccdforge
