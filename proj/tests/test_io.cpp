#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "nvsim/io.hpp"

using namespace nvsim;
using doctest::Approx;

namespace fs = std::filesystem;

namespace {

std::string key_path_of(const json& doc) {
  try {
    parse_config(doc);
  } catch (const ConfigError& e) {
    return e.key_path();
  }
  return "<no error>";
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

fs::path scratch_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("nvsim_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

}  // namespace

TEST_CASE("config errors name the offending key") {
  CHECK(key_path_of({{"ground", {{"d_zfs", 2870}, {"e_strain", 3000}}}}) == "ground.e_strain");
  CHECK(key_path_of({{"ground", {{"e_strian", 3}}}}) == "ground.e_strian");
  CHECK(key_path_of({{"rates", {{"pump_rate", "fast"}}}}) == "rates.pump_rate");
  CHECK(key_path_of({{"nmae", "x"}}) == "nmae");
  CHECK(key_path_of({{"field", {{"direction", "sideways"}}}}) == "field.direction");
  CHECK(key_path_of({{"decay", {{"fidelity", 1.5}}}}) == "decay.fidelity");
  CHECK(key_path_of({{"excited", {{"g_factor", -2}}}}) == "excited.g_factor");
  CHECK(key_path_of(json::array()) != "<no error>");
}

TEST_CASE("an empty document gives the defaults; an empty file is rejected") {
  CHECK(to_json(parse_config(json::object())) == to_json(ScenarioConfig{}));
  const auto dir = scratch_dir("empty");
  std::ofstream(dir / "empty.json").close();
  CHECK_THROWS_AS(load_config(dir / "empty.json"), ConfigError);
  CHECK_THROWS_AS(load_config(dir / "missing.json"), ConfigError);
}

TEST_CASE("shipped preset files equal the built-in presets") {
  for (const std::string name : {"bulk", "nanocrystal"}) {
    const auto file = load_config(fs::path(NVSIM_SOURCE_DIR) / "presets" / (name + ".json"));
    CHECK(to_json(file) == to_json(preset(name)));
  }
  CHECK_THROWS_AS(preset("diamond"), ConfigError);
}

TEST_CASE("nanocrystal preset reproduces its calibration lines") {
  const auto cfg = preset("nanocrystal");
  const auto b = cfg.field.nv(cfg.nv_orientation());
  CHECK(esr_frequencies(cfg.ground, b).omega_minus == Approx(2844.0).epsilon(1e-7));
  CHECK(esr_frequencies(cfg.excited, b).omega_minus == Approx(1000.0).epsilon(1e-7));
}

TEST_CASE("config round trip is idempotent") {
  for (const auto& cfg : {preset("bulk"), preset("nanocrystal")}) {
    const json once = to_json(cfg);
    const json twice = to_json(parse_config(once));
    CHECK(once == twice);
    CHECK(once.dump() == twice.dump());
  }
}

TEST_CASE("config hash changes with any field") {
  const auto base = preset("bulk");
  const std::string h0 = config_hash(base);
  CHECK(h0.size() == 16);
  CHECK(config_hash(preset("bulk")) == h0);
  auto a = base;
  a.ground.e_strain = 1e-9;
  auto b = base;
  b.rates.pump_rate *= 1.0000001;
  auto c = base;
  c.decay.mw_es_mhz = 1000.0;
  auto d = base;
  d.output_directory = "elsewhere";
  for (const auto& changed : {a, b, c, d}) CHECK(config_hash(changed) != h0);
}

TEST_CASE("FNV-1a reference values") {
  CHECK(fnv1a_hex("") == "cbf29ce484222325");
  CHECK(fnv1a_hex("a") == "af63dc4c8601ec8c");
  CHECK(fnv1a_hex("foobar") == "85944171f73967e8");
}

TEST_CASE("CSV numbers round trip exactly") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-1e6, 1e6);
  CsvTable t{{"a", "b"}, {{}, {}}};
  for (int i = 0; i < 500; ++i) {
    t.columns[0].push_back(u(rng));
    t.columns[1].push_back(std::ldexp(u(rng), -60));
  }
  t.columns[0].push_back(0.1);
  t.columns[1].push_back(-0.0);
  const auto back = parse_csv(to_csv(t));
  CHECK(back.header == t.header);
  CHECK(back.columns == t.columns);
  CHECK(to_csv(back) == to_csv(t));
  CHECK(format_number(0.5) == "0.5");
  CHECK(format_number(std::numeric_limits<double>::quiet_NaN()) == "nan");
}

TEST_CASE("CSV parsing") {
  const auto t = parse_csv("# comment\r\nx,y\r\n1,2\r\n3,4\r\n");
  CHECK(t.rows() == 2);
  CHECK(t.column("y")[1] == 4.0);
  CHECK_THROWS_AS(t.column("z"), InvalidInput);
  CHECK_THROWS_AS(parse_csv("x,y\n1\n"), InvalidInput);
  CHECK_THROWS_AS(parse_csv("x\nabc\n"), InvalidInput);
  CHECK_THROWS_AS(parse_csv(""), InvalidInput);
}

TEST_CASE("histogram CSV round trip") {
  DecayHistogram h;
  for (int i = 0; i <= 40; ++i) h.bin_edges.push_back(0.5 * i);
  for (int i = 0; i < 40; ++i) h.counts.push_back(std::exp(-0.5 * i / 23.0) / 3.0);
  const auto back = histogram_from_csv(parse_csv(to_csv(histogram_to_csv(h))), false);
  CHECK(back.bin_edges == h.bin_edges);
  CHECK(back.counts == h.counts);
  CsvTable uneven{{"t_ns", "pl"}, {{0.0, 1.0, 3.0}, {1.0, 1.0, 1.0}}};
  CHECK_THROWS_AS(histogram_from_csv(uneven, false), InvalidInput);
}

TEST_CASE("emitted outputs are byte-identical across runs") {
  const auto dir = scratch_dir("emit");
  setenv("SOURCE_DATE_EPOCH", "86400", 1);
  RunManifest m;
  m.command = "spectrum";
  m.arguments = {"spectrum", "--b", "0"};
  m.config_hash = config_hash(preset("bulk"));
  const std::vector<OutputFile> files{{dir / "sub" / "a.csv", "x,y\n1,2\n"}};
  const auto first = emit_outputs(files, m);
  const std::string csv1 = slurp(dir / "sub" / "a.csv");
  const std::string man1 = slurp(dir / "sub" / "a.csv.manifest.json");
  emit_outputs(files, m);
  CHECK(slurp(dir / "sub" / "a.csv") == csv1);
  CHECK(slurp(dir / "sub" / "a.csv.manifest.json") == man1);
  CHECK(first.timestamp == "1970-01-02T00:00:00Z");
  const json j = json::parse(man1);
  CHECK(j.at("tool_version") == kToolVersion);
  CHECK(j.at("config_hash") == m.config_hash);
  CHECK(j.at("outputs").size() == 1);
  unsetenv("SOURCE_DATE_EPOCH");
  CHECK_THROWS_AS(emit_outputs({}, m), InvalidInput);
}

TEST_CASE("sequence documents") {
  for (const auto& entry : fs::directory_iterator(fs::path(NVSIM_SOURCE_DIR) / "sequences")) {
    const auto seq = load_sequence(entry.path());
    CHECK(to_json(parse_sequence(to_json(seq))) == to_json(seq));
  }
  const json bad_key = {{"segments", {{{"type", "laser"}, {"duration", 10}}}}};
  try {
    parse_sequence(bad_key);
    FAIL("expected an error");
  } catch (const ConfigError& e) {
    CHECK(e.key_path() == "segments[0].duration");
  }
  CHECK_THROWS_AS(parse_sequence({{"segments", {{{"type", "flash"}}}}}), ConfigError);
  CHECK_THROWS_AS(parse_sequence(json::object()), ConfigError);
  const json two_readouts = {{"segments",
                              {{{"type", "readout"}, {"window_ns", 10}},
                               {{"type", "readout"}, {"window_ns", 10}}}}};
  CHECK_THROWS_AS(parse_sequence(two_readouts), ConfigError);
}

TEST_CASE("decay protocol sequence") {
  DecayProtocol p;
  const auto plain = decay_sequence(p, false, false);
  CHECK(plain.segments.size() == 4);
  const auto both = decay_sequence(p, true, true);
  CHECK(both.segments.size() == 7);
  p.mw_gs_mhz = 2844.0;
  const auto detuned = decay_sequence(p, true, false);
  const auto& pulse = std::get<MwPulse>(detuned.segments[2]);
  CHECK_FALSE(pulse.resonant);
  CHECK(pulse.drive.frequency == 2844.0);
}
