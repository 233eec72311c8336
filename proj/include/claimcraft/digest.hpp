#pragma once

#include <string>

namespace claimcraft {

// SHA-256 hex digests used for content addressing in the pipeline manifest.
std::string sha256_hex(const void* data, std::size_t len);
std::string sha256_hex(const std::string& data);
std::string sha256_file_hex(const std::string& path);  // throws DataError

}  // namespace claimcraft
