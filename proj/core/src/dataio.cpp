#include "kfcp/dataio.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "kfcp/error.hpp"

namespace kfcp {
namespace {

using nlohmann::json;

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

// Splits one line; double quotes group a field and "" escapes a quote.
std::vector<std::string> split_fields(std::string_view line, char delimiter) {
  std::vector<std::string> fields;
  std::string current;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        current += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        current += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == delimiter) {
      fields.push_back(std::move(current));
      current.clear();
    } else {
      current += c;
    }
  }
  fields.push_back(std::move(current));
  return fields;
}

std::optional<double> parse_number(std::string_view text) {
  text = trim(text);
  if (text.empty()) return std::nullopt;
  if (text.front() == '+') text.remove_prefix(1);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size() || !std::isfinite(v)) {
    return std::nullopt;
  }
  return v;
}

std::size_t resolve_column(const ColumnRef& ref, const std::vector<std::string>& names,
                           const std::string& dataset) {
  if (const auto* index = std::get_if<std::size_t>(&ref)) {
    if (*index >= names.size()) {
      throw Error(ErrorCode::ParseError, dataset + ": column index " + std::to_string(*index) +
                                             " is out of range (" +
                                             std::to_string(names.size()) + " columns)");
    }
    return *index;
  }
  const auto& name = std::get<std::string>(ref);
  const auto it = std::find(names.begin(), names.end(), name);
  if (it == names.end()) {
    throw Error(ErrorCode::ParseError, dataset + ": no column named '" + name + "'");
  }
  return static_cast<std::size_t>(it - names.begin());
}

ColumnRef column_from_json(const json& j, const std::string& where) {
  if (j.is_number_unsigned()) return j.get<std::size_t>();
  if (j.is_number_integer() && j.get<long long>() >= 0) return static_cast<std::size_t>(j.get<long long>());
  if (j.is_string()) return j.get<std::string>();
  throw Error(ErrorCode::ParseError, where + ": columns must be names or non-negative indices");
}

std::string csv_field(const std::string& text) {
  if (text.find_first_of(",\"\n\r") == std::string::npos) return text;
  std::string out = "\"";
  for (char c : text) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

}  // namespace

std::vector<DatasetManifestEntry> load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::FileNotFound, "cannot open manifest " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ParseError, path.string() + ": " + e.what());
  }
  if (!doc.is_array()) throw Error(ErrorCode::ParseError, path.string() + ": manifest must be a JSON array");

  std::vector<DatasetManifestEntry> entries;
  for (std::size_t i = 0; i < doc.size(); ++i) {
    const auto& item = doc[i];
    const std::string where = path.string() + "[" + std::to_string(i) + "]";
    if (!item.is_object() || !item.contains("name") || !item.contains("path") ||
        !item["name"].is_string() || !item["path"].is_string()) {
      throw Error(ErrorCode::ParseError, where + ": entries need string 'name' and 'path'");
    }
    DatasetManifestEntry e;
    e.name = item["name"].get<std::string>();
    e.path = item["path"].get<std::string>();
    if (e.path.is_relative()) e.path = path.parent_path() / e.path;
    if (item.contains("response_column") && !item["response_column"].is_null()) {
      e.response_column = column_from_json(item["response_column"], where);
    }
    if (item.contains("drop_columns")) {
      if (!item["drop_columns"].is_array()) throw Error(ErrorCode::ParseError, where + ": drop_columns must be an array");
      for (const auto& c : item["drop_columns"]) e.drop_columns.push_back(column_from_json(c, where));
    }
    if (item.contains("delimiter")) {
      const auto d = item["delimiter"].get<std::string>();
      if (d.size() != 1) throw Error(ErrorCode::ParseError, where + ": delimiter must be one character");
      e.delimiter = d[0];
    }
    if (item.contains("has_header")) e.has_header = item["has_header"].get<bool>();
    entries.push_back(std::move(e));
  }
  return entries;
}

LoadedDataset load_csv(const DatasetManifestEntry& entry) {
  std::ifstream in(entry.path);
  if (!in) throw Error(ErrorCode::FileNotFound, entry.name + ": cannot open " + entry.path.string());

  std::vector<std::vector<std::string>> rows;
  std::vector<std::size_t> line_numbers;
  std::vector<std::string> names;
  std::string line;
  std::size_t line_no = 0;
  bool header_pending = entry.has_header;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    auto fields = split_fields(line, entry.delimiter);
    if (header_pending) {
      for (auto& f : fields) names.emplace_back(trim(f));
      header_pending = false;
      continue;
    }
    if (names.empty()) {
      for (std::size_t c = 0; c < fields.size(); ++c) names.push_back("col" + std::to_string(c));
    }
    if (fields.size() != names.size()) {
      throw Error(ErrorCode::ParseError, entry.name + ": line " + std::to_string(line_no) + " has " +
                                             std::to_string(fields.size()) + " fields, expected " +
                                             std::to_string(names.size()));
    }
    rows.push_back(std::move(fields));
    line_numbers.push_back(line_no);
  }
  if (names.empty()) throw Error(ErrorCode::EmptyAfterCleaning, entry.name + ": file has no columns");

  std::vector<bool> dropped(names.size(), false);
  for (const auto& ref : entry.drop_columns) dropped[resolve_column(ref, names, entry.name)] = true;
  std::size_t response = 0;
  if (entry.response_column) {
    response = resolve_column(*entry.response_column, names, entry.name);
  } else {
    std::size_t c = names.size();
    while (c > 0 && dropped[c - 1]) --c;
    if (c == 0) throw Error(ErrorCode::ParseError, entry.name + ": every column is dropped");
    response = c - 1;
  }
  if (dropped[response]) {
    throw Error(ErrorCode::ParseError, entry.name + ": the response column '" + names[response] + "' is dropped");
  }

  LoadedDataset out;
  out.raw_rows = rows.size();
  out.response_name = names[response];
  std::vector<std::size_t> predictors;
  for (std::size_t c = 0; c < names.size(); ++c) {
    if (c != response && !dropped[c]) {
      predictors.push_back(c);
      out.predictor_names.push_back(names[c]);
    }
  }
  if (predictors.empty()) throw Error(ErrorCode::ParseError, entry.name + ": no predictor columns remain");

  std::vector<double> xs;
  std::vector<double> ys;
  xs.reserve(rows.size() * predictors.size());
  ys.reserve(rows.size());
  std::vector<double> row_values(predictors.size());
  for (const auto& fields : rows) {
    const auto yv = parse_number(fields[response]);
    bool ok = yv.has_value();
    for (std::size_t j = 0; ok && j < predictors.size(); ++j) {
      const auto v = parse_number(fields[predictors[j]]);
      if (!v) ok = false;
      else row_values[j] = *v;
    }
    if (!ok) {
      ++out.dropped_rows;
      continue;
    }
    xs.insert(xs.end(), row_values.begin(), row_values.end());
    ys.push_back(*yv);
  }
  if (ys.size() < 2) {
    throw Error(ErrorCode::EmptyAfterCleaning, entry.name + ": " + std::to_string(ys.size()) +
                                                   " usable rows after dropping " +
                                                   std::to_string(out.dropped_rows));
  }
  out.data.x = DenseMatrix(ys.size(), predictors.size(), std::move(xs));
  out.data.y = std::move(ys);
  return out;
}

std::string format_shortest(double value) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  if (ec != std::errc()) throw Error(ErrorCode::IoError, "cannot format number");
  return std::string(buf, ptr);
}

void write_records(const std::vector<EvalRecord>& records, const std::filesystem::path& path) {
  std::vector<const EvalRecord*> order;
  order.reserve(records.size());
  for (const auto& r : records) order.push_back(&r);
  std::stable_sort(order.begin(), order.end(), [](const EvalRecord* a, const EvalRecord* b) {
    return std::tie(a->scenario, a->method, a->replicate) < std::tie(b->scenario, b->method, b->replicate);
  });

  std::ostringstream out;
  out << "method,scenario,replicate,coverage,mean_width,runtime_seconds\n";
  for (const auto* r : order) {
    out << r->method.name() << ',' << csv_field(r->scenario) << ',' << r->replicate << ','
        << format_shortest(r->coverage) << ',' << format_shortest(r->mean_width) << ','
        << format_shortest(r->runtime_seconds) << '\n';
  }
  std::ofstream file(path, std::ios::binary | std::ios::trunc);
  if (!file) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  file << out.str();
  if (!file) throw Error(ErrorCode::IoError, "write failed for " + path.string());
}

std::vector<EvalRecord> read_records(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::FileNotFound, "cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line) ||
      trim(line) != "method,scenario,replicate,coverage,mean_width,runtime_seconds") {
    throw Error(ErrorCode::ParseError, path.string() + ": unexpected header");
  }
  std::vector<EvalRecord> records;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto f = split_fields(trim(line), ',');
    auto fail = [&](const std::string& what) {
      throw Error(ErrorCode::ParseError, path.string() + ":" + std::to_string(line_no) + ": " + what);
    };
    if (f.size() != 6) fail("expected 6 fields");
    EvalRecord r;
    try {
      r.method = Method::parse(f[0]);
    } catch (const Error&) {
      fail("bad method '" + f[0] + "'");
    }
    r.scenario = f[1];
    const auto rep = parse_number(f[2]);
    const auto cov = parse_number(f[3]);
    const auto width = parse_number(f[4]);
    const auto secs = parse_number(f[5]);
    if (!rep || !cov || !width || !secs || *rep < 0) fail("bad numeric field");
    r.replicate = static_cast<std::size_t>(*rep);
    r.coverage = *cov;
    r.mean_width = *width;
    r.runtime_seconds = *secs;
    records.push_back(std::move(r));
  }
  return records;
}

}  // namespace kfcp
