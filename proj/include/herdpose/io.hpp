#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>

#include <json.hpp>

namespace herdpose {

using Json = nlohmann::json;

/// Malformed input text. `offset` is the byte position reported by the parser.
class ParseError : public std::runtime_error {
public:
    ParseError(const std::string& what, std::size_t offset)
        : std::runtime_error(what), offset_(offset) {}
    std::size_t offset() const { return offset_; }

private:
    std::size_t offset_;
};

/// Missing, unreadable or unwritable file.
class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

std::string read_file(const std::filesystem::path& path);

/// Writes to a sibling temp file then renames over `path`.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);

Json parse_json(std::string_view text, const std::string& origin);

/// Stable text form: object keys sorted, two-space indent, floating-point
/// numbers printed with exactly six decimals, integers verbatim.
std::string dump_canonical(const Json& j, bool pretty = true);

/// Six-decimal float rendering used by every text output.
std::string format_fixed6(double v);

/// Nearest value that survives a six-decimal round trip unchanged.
double quantize6(double v);

/// Lowercase hex SHA-256.
std::string sha256_hex(std::string_view data);

}  // namespace herdpose
