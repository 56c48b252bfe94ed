#pragma once

#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

namespace polnet::csv {

/// Reads one RFC 4180 record (quoted fields may span lines). Returns nullopt at
/// end of input.
std::optional<std::vector<std::string>> read_record(std::istream& in);

std::string quote(std::string_view field);

void write_record(std::ostream& out, const std::vector<std::string>& fields);

/// Shortest round-trip decimal representation, locale independent.
std::string format_double(double v);

}  // namespace polnet::csv
