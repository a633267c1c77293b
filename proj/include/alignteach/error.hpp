#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace alignteach {

enum class ErrorKind {
    specification,
    range,
    dimension,
    degenerate_input,
    no_alternative,
    cannot_classify,
    evaluation,
    precondition,
    insufficient_data,
    empty_curve,
    config,
    coverage,
    sampling,
    validation,
    io,
};

std::string_view to_string(ErrorKind kind);

// Single exception type for the library; callers branch on kind().
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(std::string(to_string(kind)) + " error: " + what), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

}  // namespace alignteach
