#include <charconv>
#include <cmath>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>
#include <system_error>

#include "nvsim/io.hpp"

namespace nvsim {

const std::vector<double>& CsvTable::column(const std::string& name) const {
  for (std::size_t i = 0; i < header.size(); ++i)
    if (header[i] == name) return columns[i];
  throw InvalidInput("CSV has no column named " + name);
}

std::string format_number(double value) {
  if (std::isnan(value)) return "nan";
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  char buffer[64];
  const auto [end, ec] = std::to_chars(buffer, buffer + sizeof buffer, value);
  if (ec != std::errc()) throw std::runtime_error("number formatting failed");
  return std::string(buffer, end);
}

std::string to_csv(const CsvTable& table) {
  if (table.columns.size() != table.header.size())
    throw InvalidInput("CSV header and column count differ");
  for (const auto& c : table.columns)
    if (c.size() != table.rows()) throw InvalidInput("CSV columns have unequal length");
  std::string out;
  for (std::size_t j = 0; j < table.header.size(); ++j) {
    if (j) out += ',';
    out += table.header[j];
  }
  out += '\n';
  for (std::size_t i = 0; i < table.rows(); ++i) {
    for (std::size_t j = 0; j < table.columns.size(); ++j) {
      if (j) out += ',';
      out += format_number(table.columns[j][i]);
    }
    out += '\n';
  }
  return out;
}

namespace {

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::stringstream ss(line);
  while (std::getline(ss, field, ',')) fields.push_back(field);
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

double parse_number(const std::string& s, std::size_t line) {
  if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  if (s == "inf") return std::numeric_limits<double>::infinity();
  if (s == "-inf") return -std::numeric_limits<double>::infinity();
  double v = 0;
  const char* first = s.data();
  const char* last = s.data() + s.size();
  const auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last)
    throw InvalidInput("CSV line " + std::to_string(line) + ": '" + s + "' is not a number");
  return v;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidInput("cannot open " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

void write_file(const std::filesystem::path& path, const std::string& contents) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << contents;
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

}  // namespace

CsvTable parse_csv(const std::string& text) {
  CsvTable table;
  std::stringstream ss(text);
  std::string line;
  std::size_t number = 0;
  while (std::getline(ss, line)) {
    ++number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    auto fields = split(line);
    if (table.header.empty()) {
      table.header = fields;
      table.columns.assign(fields.size(), {});
      continue;
    }
    if (fields.size() != table.header.size())
      throw InvalidInput("CSV line " + std::to_string(number) + " has " +
                         std::to_string(fields.size()) + " fields, expected " +
                         std::to_string(table.header.size()));
    for (std::size_t j = 0; j < fields.size(); ++j)
      table.columns[j].push_back(parse_number(fields[j], number));
  }
  if (table.header.empty()) throw InvalidInput("CSV has no header");
  return table;
}

void write_csv(const std::filesystem::path& path, const CsvTable& table) {
  write_file(path, to_csv(table));
}

CsvTable read_csv(const std::filesystem::path& path) { return parse_csv(read_file(path)); }

DecayHistogram histogram_from_csv(const CsvTable& table, bool monte_carlo) {
  const auto& t = table.column("t_ns");
  const auto& pl = table.column("pl");
  if (t.size() < 2) throw InvalidInput("histogram needs at least two bins");
  const double width = t[1] - t[0];
  if (!(width > 0)) throw InvalidInput("t_ns must be strictly increasing");
  for (std::size_t i = 1; i < t.size(); ++i)
    if (std::abs(t[i] - t[i - 1] - width) > 1e-6 * width)
      throw InvalidInput("t_ns must be uniformly spaced");
  DecayHistogram h;
  h.bin_edges = t;
  h.bin_edges.push_back(t.back() + width);
  h.counts = pl;
  h.monte_carlo = monte_carlo;
  return h;
}

CsvTable histogram_to_csv(const DecayHistogram& hist) {
  CsvTable table;
  table.header = {"t_ns", "pl"};
  table.columns.resize(2);
  for (std::size_t i = 0; i < hist.size(); ++i) {
    table.columns[0].push_back(hist.bin_edges[i]);
    table.columns[1].push_back(hist.counts[i]);
  }
  return table;
}

std::string fnv1a_hex(const std::string& data) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  std::ostringstream out;
  out << std::hex << std::setw(16) << std::setfill('0') << h;
  return out.str();
}

std::string config_hash(const ScenarioConfig& config) { return fnv1a_hex(to_json(config).dump()); }

std::string current_timestamp() {
  std::time_t t = std::time(nullptr);
  if (const char* epoch = std::getenv("SOURCE_DATE_EPOCH")) {
    char* end = nullptr;
    const long long v = std::strtoll(epoch, &end, 10);
    if (end != epoch && *end == '\0') t = static_cast<std::time_t>(v);
  }
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::ostringstream out;
  out << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return out.str();
}

json to_json(const RunManifest& m) {
  return {{"command", m.command},     {"arguments", m.arguments},
          {"config_hash", m.config_hash}, {"seed", m.seed},
          {"tool_version", m.tool_version}, {"timestamp", m.timestamp},
          {"outputs", m.outputs}};
}

RunManifest emit_outputs(const std::vector<OutputFile>& files, RunManifest manifest) {
  if (files.empty()) throw InvalidInput("nothing to write");
  manifest.outputs.clear();
  for (const auto& f : files) {
    write_file(f.path, f.contents);
    manifest.outputs.push_back(f.path.string());
  }
  if (manifest.timestamp.empty()) manifest.timestamp = current_timestamp();
  std::filesystem::path mpath = files.front().path;
  mpath += ".manifest.json";
  write_file(mpath, to_json(manifest).dump(2) + "\n");
  return manifest;
}

}  // namespace nvsim
