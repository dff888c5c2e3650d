#pragma once

#include <stdexcept>
#include <string>

namespace sketchloom {

// Bad values passed to library functions (dimension mismatches, out-of-range
// parameters). Programming or config errors, not data errors.
struct ArgumentError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// Malformed input bytes: PNG decode failures, unreadable checkpoints,
// truncated manifests. Messages carry a byte offset where one is known.
struct FormatError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Dataset-level problems: too few usable photos, empty splits.
struct DatasetError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Invalid configuration files or command lines. The CLI maps this family to
// exit code 2; every other exception maps to exit code 1.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Training aborted (non-finite loss, missing split). Carries diagnostics in
// the message.
struct TrainingError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

inline void require(bool ok, const std::string& msg) {
    if (!ok) throw ArgumentError(msg);
}

}  // namespace sketchloom
