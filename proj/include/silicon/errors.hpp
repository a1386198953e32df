#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace silicon {

enum class ErrorCode {
    config = 1,
    io,
    validation,
    transport,
    refusal,
    capability,
    no_signal,
    degenerate,
    cache_corrupt,
    replay_miss,
    infeasible,
};

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& what) : Error(ErrorCode::config, what) {}
};

class IoError : public Error {
public:
    explicit IoError(const std::string& what) : Error(ErrorCode::io, what) {}
};

struct CellError {
    std::string respondent_id;
    std::size_t row = 0;  // 1-based data row, header excluded
    std::string variable;
    std::string value;
    std::string reason;
};

class ValidationError : public Error {
public:
    explicit ValidationError(const std::string& what, std::vector<CellError> cells = {})
        : Error(ErrorCode::validation, what), cells_(std::move(cells)) {}
    const std::vector<CellError>& cells() const noexcept { return cells_; }

private:
    std::vector<CellError> cells_;
};

class TransportError : public Error {
public:
    TransportError(const std::string& what, std::vector<std::string> attempts)
        : Error(ErrorCode::transport, what), attempts_(std::move(attempts)) {}
    const std::vector<std::string>& attempts() const noexcept { return attempts_; }

private:
    std::vector<std::string> attempts_;
};

class RefusalError : public Error {
public:
    explicit RefusalError(const std::string& what) : Error(ErrorCode::refusal, what) {}
};

class CapabilityError : public Error {
public:
    explicit CapabilityError(const std::string& what) : Error(ErrorCode::capability, what) {}
};

class NoSignalError : public Error {
public:
    explicit NoSignalError(const std::string& what) : Error(ErrorCode::no_signal, what) {}
};

class DegenerateError : public Error {
public:
    explicit DegenerateError(const std::string& what) : Error(ErrorCode::degenerate, what) {}
};

class CacheCorruptError : public Error {
public:
    CacheCorruptError(const std::string& what, std::size_t line)
        : Error(ErrorCode::cache_corrupt, what), line_(line) {}
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

class ReplayMissError : public Error {
public:
    explicit ReplayMissError(const std::string& what) : Error(ErrorCode::replay_miss, what) {}
};

class InfeasibleError : public Error {
public:
    InfeasibleError(const std::string& what, std::size_t suggestion)
        : Error(ErrorCode::infeasible, what), suggestion_(suggestion) {}
    /// Closest feasible rater count.
    std::size_t suggestion() const noexcept { return suggestion_; }

private:
    std::size_t suggestion_;
};

}  // namespace silicon
