#pragma once

#include <stdexcept>

namespace bump {

// Exit codes shared by the CLI tools. Library code throws; tools map
// exception types onto these at the top level.
enum ExitCode : int {
    exit_ok = 0,
    exit_config = 2,  // usage errors, bad config, invalid arguments
    exit_io = 3,      // unreadable/unwritable files, corrupt containers
    exit_numeric = 4, // NaN loss, singular systems, failed checksums aside
};

struct config_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct io_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct numeric_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace bump
