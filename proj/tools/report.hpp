#pragma once

// Deterministic serialization: sorted keys, two-space indentation, floats as
// %.12e, integers verbatim, non-finite floats as the strings "inf", "-inf", "nan".
// Floats under the top-level keys in `verbatim` keep their shortest round-trip form.

#include <nlohmann/json.hpp>

#include <set>
#include <string>
#include <vector>

namespace bcrb::cli {

std::string canonical_json(const nlohmann::json& value, const std::set<std::string>& verbatim = {});

/// Lower-case hex SHA-256 digest.
std::string sha256_hex(const std::string& bytes);

/// %.12e of a double, used for CSV cells as well.
std::string format_float(double x);

/// CSV text from a header and rows of preformatted cells.
std::string csv_text(const std::vector<std::string>& header,
                     const std::vector<std::vector<std::string>>& rows);

}  // namespace bcrb::cli
