#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "kfcp/dataset.hpp"
#include "kfcp/evalharness.hpp"

namespace kfcp {

/// A column named by header text or by 0-based position.
using ColumnRef = std::variant<std::size_t, std::string>;

/// One dataset of a manifest file (a JSON array of these objects):
///
///   {"name": "bodyfat", "path": "bodyfat.csv", "response_column": "BodyFat",
///    "drop_columns": ["Density"], "delimiter": ",", "has_header": true}
///
/// `response_column` defaults to the last column after drops; relative paths
/// resolve against the manifest's directory.
struct DatasetManifestEntry {
  std::string name;
  std::filesystem::path path;
  std::optional<ColumnRef> response_column;
  std::vector<ColumnRef> drop_columns;
  char delimiter = ',';
  bool has_header = true;
};

/// Throws FileNotFound or ParseError (with the offending entry).
std::vector<DatasetManifestEntry> load_manifest(const std::filesystem::path& path);

struct LoadedDataset {
  Dataset data;
  std::size_t raw_rows = 0;
  /// Rows removed because a kept cell was empty, "NA" or non-numeric.
  std::size_t dropped_rows = 0;
  std::vector<std::string> predictor_names;
  std::string response_name;
};

/// Reads a delimited numeric table. Rows with a missing or unparseable cell
/// in any kept column are dropped and counted. Throws FileNotFound,
/// ParseError (row/column located) for ragged rows or unknown columns, and
/// EmptyAfterCleaning when fewer than two rows survive.
LoadedDataset load_csv(const DatasetManifestEntry& entry);

/// Shortest decimal text that parses back to exactly `value`.
std::string format_shortest(double value);

/// Writes `method,scenario,replicate,coverage,mean_width,runtime_seconds`
/// rows sorted by (scenario, method, replicate). Throws IoError.
void write_records(const std::vector<EvalRecord>& records, const std::filesystem::path& path);

/// Inverse of write_records. Throws FileNotFound / ParseError.
std::vector<EvalRecord> read_records(const std::filesystem::path& path);

/// Version of the records.csv and manifest layouts, echoed in meta.json.
inline constexpr int kSchemaVersion = 1;

}  // namespace kfcp
