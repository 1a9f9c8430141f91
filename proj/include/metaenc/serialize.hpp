#pragma once

// JSON persistence for AE records, MAE models and corpora.
//
// Every document is a JSON object carrying "schema_version" and a
// "checksum" field: FNV-1a 64 over the exact file bytes with the checksum
// value replaced by sixteen zeros. Doubles are stored as decimal strings
// with 17 significant digits, which round-trip bit-exactly.

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include <json.hpp>

#include "metaenc/autoenc.hpp"
#include "metaenc/classes.hpp"
#include "metaenc/mae.hpp"

namespace metaenc {

using Json = nlohmann::ordered_json;

inline constexpr int kSchemaVersion = 1;

std::uint64_t fnv1a64(std::string_view bytes);
std::string hex64(std::uint64_t v);

std::string format_double(double v);
/// Accepts only a complete decimal representation; throws FormatError.
double parse_double(const std::string& s);

Json class_to_json(const ClassSpec& spec);
ClassSpec class_from_json(const Json& j);

Json record_to_json(const AeRecord& rec);
AeRecord record_from_json(const Json& j);

Json mae_to_json(const MaeModel& mae);
MaeModel mae_from_json(const Json& j);

/// Adds schema_version, kind and checksum fields and renders the document.
std::string seal_document(Json doc, std::string_view kind);

/// Verifies the checksum, parses, and checks schema_version and kind.
/// Throws FormatError.
Json open_document(const std::string& text, std::string_view kind);

std::string read_text_file(const std::filesystem::path& path);
/// Writes through a temporary file and renames it into place.
void write_text_file(const std::filesystem::path& path, const std::string& text);

void save_record(const AeRecord& rec, const std::filesystem::path& path);
AeRecord load_record(const std::filesystem::path& path);

void save_mae(const MaeModel& mae, const std::filesystem::path& path);
MaeModel load_mae(const std::filesystem::path& path);

}  // namespace metaenc
