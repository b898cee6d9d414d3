#pragma once

#include <stdexcept>
#include <string>

namespace strobevib {

/// Invalid configuration or input data. `field()` names the offending field
/// (dotted path) when one is known.
class ConfigError : public std::invalid_argument {
public:
    explicit ConfigError(const std::string& message, std::string field = {})
        : std::invalid_argument(field.empty() ? message : field + ": " + message),
          field_(std::move(field)) {}

    /// Same, with `where` (such as "file.json:12") leading the message.
    ConfigError(const std::string& where, const std::string& message, std::string field)
        : std::invalid_argument(where + ": " + (field.empty() ? message : field + ": " + message)),
          field_(std::move(field)) {}

    const std::string& field() const noexcept { return field_; }

private:
    std::string field_;
};

/// Filesystem failure while reading or writing artifacts.
class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace strobevib
