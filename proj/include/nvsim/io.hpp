#pragma once

// Scenario configuration, pulse-sequence documents, CSV tables and run
// manifests.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "nvsim/dynamics.hpp"
#include "nvsim/geometry.hpp"
#include "nvsim/spectra.hpp"
#include "nvsim/spin.hpp"

namespace nvsim {

using json = nlohmann::json;

inline constexpr const char* kToolVersion = "0.3.0";

// Lab-frame field: either an explicit vector, or a magnitude along a
// direction (the NV axis when unset). The misalignment then tilts the field
// about the NV y axis, towards the NV x axis.
struct FieldSpec {
  std::optional<Eigen::Vector3d> vector_gauss;
  double magnitude_gauss = 0;
  std::optional<Eigen::Vector3d> direction;
  double misalignment_deg = 0;

  FieldVector<double> lab(const NVOrientation<double>& o) const;
  FieldVector<double> nv(const NVOrientation<double>& o) const;
};

// Parameters of the standard spin-selective lifetime protocol: polarize,
// relax, optional ground-state pi pulse, ps excitation, readout, optional
// excited-state pi pulse inside the readout.
struct DecayProtocol {
  double laser_ns = 3000;
  double wait_ns = 1000;
  double readout_ns = 100;
  double bin_ns = 0.5;
  double p_exc = 1.0;
  double pi_rabi_mhz = 200;
  std::optional<double> mw_gs_mhz;  // unset: resonant
  std::optional<double> mw_es_mhz;
  double es_pi_time_ns = 10;
  double fidelity = 1.0;

  friend bool operator==(const DecayProtocol&, const DecayProtocol&) = default;
};

struct ScenarioConfig {
  std::string name = "bulk";
  SpinParams<double> ground{2870.0, 0.0, 2.0028};
  SpinParams<double> excited{1423.0, 0.0, 2.01};
  RateParams rates;
  Eigen::Vector3d orientation{1, 1, 1};
  FieldSpec field;
  DriveTemplate drives;
  DecayProtocol decay;
  std::string output_directory = ".";

  NVOrientation<double> nv_orientation() const { return NVOrientation<double>::from_axis(orientation); }
  void validate() const;
};

ScenarioConfig parse_config(const json& document);
ScenarioConfig load_config(const std::filesystem::path& path);
json to_json(const ScenarioConfig& config);

// Built-in presets: "bulk" and "nanocrystal".
ScenarioConfig preset(const std::string& name);

PulseSequence parse_sequence(const json& document);
PulseSequence load_sequence(const std::filesystem::path& path);
json to_json(const PulseSequence& sequence);

PulseSequence decay_sequence(const DecayProtocol& protocol, bool pi_gs, bool pi_es);

// ---------------------------------------------------------------------------

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> columns;

  std::size_t rows() const { return columns.empty() ? 0 : columns.front().size(); }
  const std::vector<double>& column(const std::string& name) const;
};

// Shortest round-trip decimal representation, '.' separator.
std::string format_number(double value);
std::string to_csv(const CsvTable& table);
CsvTable parse_csv(const std::string& text);
void write_csv(const std::filesystem::path& path, const CsvTable& table);
CsvTable read_csv(const std::filesystem::path& path);

// Uniform-bin decay histogram from a (t_ns, pl) table with left bin edges.
DecayHistogram histogram_from_csv(const CsvTable& table, bool monte_carlo);
CsvTable histogram_to_csv(const DecayHistogram& hist);

struct RunManifest {
  std::string command;
  std::vector<std::string> arguments;
  std::string config_hash;
  std::uint64_t seed = 0;
  std::string tool_version = kToolVersion;
  std::string timestamp;
  std::vector<std::string> outputs;
};

std::string fnv1a_hex(const std::string& data);
std::string config_hash(const ScenarioConfig& config);
// UTC ISO-8601; honours SOURCE_DATE_EPOCH for reproducible manifests.
std::string current_timestamp();

struct OutputFile {
  std::filesystem::path path;
  std::string contents;
};

// Writes every file, then <first output>.manifest.json. Returns the manifest
// with its output list filled in.
RunManifest emit_outputs(const std::vector<OutputFile>& files, RunManifest manifest);
json to_json(const RunManifest& manifest);

}  // namespace nvsim
