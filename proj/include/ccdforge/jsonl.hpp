#pragma once

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ccdforge/result.hpp"
#include "ccdforge/session.hpp"
#include "ccdforge/taxonomy.hpp"

namespace ccdforge {

inline Result<std::string> read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) return make_error(ErrorKind::Io, "cannot read " + path.string());
    std::ostringstream out;
    out << in.rdbuf();
    return out.str();
}

inline Result<void> write_text_file(const std::filesystem::path& path, const std::string& content) {
    if (path.has_parent_path()) {
        std::error_code ec;
        std::filesystem::create_directories(path.parent_path(), ec);
        if (ec) return make_error(ErrorKind::Io, "cannot create " + path.parent_path().string());
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) return make_error(ErrorKind::Io, "cannot write " + path.string());
    out << content;
    if (!out) return make_error(ErrorKind::Io, "write failed for " + path.string());
    return Result<void>{};
}

/// Parse a JSON-lines file; blank lines are skipped, the first bad line
/// aborts with its number.
inline Result<std::vector<nlohmann::json>> read_jsonl(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) return make_error(ErrorKind::Io, "cannot read " + path.string());
    std::vector<nlohmann::json> out;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (detail::trim_copy(line).empty()) continue;
        nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
        if (j.is_discarded()) {
            return make_error(ErrorKind::SchemaViolation,
                              path.string() + " line " + std::to_string(line_no) +
                                  ": invalid JSON");
        }
        out.push_back(std::move(j));
    }
    return out;
}

inline Result<std::vector<SessionRecord>> load_session_records(const std::filesystem::path& path) {
    auto lines = read_jsonl(path);
    if (!lines) return lines.error();
    std::vector<SessionRecord> out;
    out.reserve(lines.value().size());
    for (std::size_t i = 0; i < lines.value().size(); ++i) {
        auto record = session_record_from_json(lines.value()[i]);
        if (!record) {
            Error err = record.error();
            err.message = path.string() + " record " + std::to_string(i + 1) + ": " + err.message;
            return err;
        }
        out.push_back(std::move(record.value()));
    }
    return out;
}

/// Serialize records to compact JSON-lines, one record per line.
inline std::string session_records_to_jsonl(const std::vector<SessionRecord>& records) {
    std::string out;
    for (const SessionRecord& r : records) {
        out += session_record_to_json(r).dump();
        out += '\n';
    }
    return out;
}

}  // namespace ccdforge
