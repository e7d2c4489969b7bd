#pragma once

#include <string>
#include <string_view>

namespace casemix {

/// Lower-case hex SHA-256 of a byte string.
std::string sha256_hex(std::string_view bytes);

/// SHA-256 of a file's contents; throws std::ios_base::failure if unreadable.
std::string sha256_file(const std::string& path);

}  // namespace casemix
