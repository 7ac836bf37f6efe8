#pragma once

#include <ostream>
#include <string>
#include <string_view>

namespace omnitrace::cli {

/// Entry point of the `omnitrace` command. Returns 0 on success, 1 on bad
/// input or usage and 2 on an internal error.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

/// Lowercase hex SHA-256 digest.
std::string sha256_hex(std::string_view data);

}  // namespace omnitrace::cli
