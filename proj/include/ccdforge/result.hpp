#pragma once

#include <cassert>
#include <optional>
#include <string>
#include <utility>
#include <variant>

namespace ccdforge {

enum class ErrorKind {
    Transport,
    Timeout,
    ScriptExhausted,
    MissingBinding,
    UnknownPlaceholder,
    NoJsonObject,
    SchemaViolation,
    OutOfRange,
    MissingField,
    UnknownLabel,
    EmptyComponent,
    IllegalStep,
    InvalidArgument,
    MalformedOutput,
    Io,
    NotFound,
};

struct Error {
    ErrorKind kind = ErrorKind::InvalidArgument;
    std::string message;
};

inline const char* to_string(ErrorKind k) {
    switch (k) {
        case ErrorKind::Transport: return "transport";
        case ErrorKind::Timeout: return "timeout";
        case ErrorKind::ScriptExhausted: return "script_exhausted";
        case ErrorKind::MissingBinding: return "missing_binding";
        case ErrorKind::UnknownPlaceholder: return "unknown_placeholder";
        case ErrorKind::NoJsonObject: return "no_json_object";
        case ErrorKind::SchemaViolation: return "schema_violation";
        case ErrorKind::OutOfRange: return "out_of_range";
        case ErrorKind::MissingField: return "missing_field";
        case ErrorKind::UnknownLabel: return "unknown_label";
        case ErrorKind::EmptyComponent: return "empty_component";
        case ErrorKind::IllegalStep: return "illegal_step";
        case ErrorKind::InvalidArgument: return "invalid_argument";
        case ErrorKind::MalformedOutput: return "malformed_output";
        case ErrorKind::Io: return "io";
        case ErrorKind::NotFound: return "not_found";
    }
    return "unknown";
}

inline Error make_error(ErrorKind kind, std::string message) {
    return Error{kind, std::move(message)};
}

/// Value-or-error carrier used throughout the library instead of exceptions.
template <typename T>
class [[nodiscard]] Result {
public:
    Result(T value) : state_(std::in_place_index<0>, std::move(value)) {}
    Result(Error error) : state_(std::in_place_index<1>, std::move(error)) {}

    bool ok() const { return state_.index() == 0; }
    explicit operator bool() const { return ok(); }

    T& value() & {
        assert(ok());
        return std::get<0>(state_);
    }
    const T& value() const& {
        assert(ok());
        return std::get<0>(state_);
    }
    T&& value() && {
        assert(ok());
        return std::move(std::get<0>(state_));
    }

    const Error& error() const {
        assert(!ok());
        return std::get<1>(state_);
    }

private:
    std::variant<T, Error> state_;
};

/// Status-only variant: success carries no payload.
template <>
class [[nodiscard]] Result<void> {
public:
    Result() = default;
    Result(Error error) : error_(std::move(error)) {}

    bool ok() const { return !error_.has_value(); }
    explicit operator bool() const { return ok(); }

    const Error& error() const {
        assert(!ok());
        return *error_;
    }

private:
    std::optional<Error> error_;
};

}  // namespace ccdforge
