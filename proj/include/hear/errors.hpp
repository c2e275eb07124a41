#pragma once

#include <stdexcept>
#include <string>

namespace hear {

// Malformed on-disk content: bad magic, truncated payload, unparsable JSON.
class FormatError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

// A configuration value failed validation. `field()` is the dotted path.
class ConfigError : public std::runtime_error {
  public:
    ConfigError(std::string field, const std::string& message)
        : std::runtime_error(field + ": " + message), field_(std::move(field)), message_(message) {}
    const std::string& field() const { return field_; }
    // The message without the field prefix.
    const std::string& message() const { return message_; }

  private:
    std::string field_;
    std::string message_;
};

// Training produced a non-finite loss; the message carries a diagnostic snapshot.
class TrainingError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

}  // namespace hear
