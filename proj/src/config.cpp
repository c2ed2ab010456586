#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "nvsim/io.hpp"

namespace nvsim {

namespace {

// Reads one JSON object, tracking which keys were consumed so that leftovers
// can be rejected. Every error names the full key path.
class ObjectReader {
 public:
  ObjectReader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(display(), "expected a JSON object");
  }

  bool has(const std::string& key) const { return j_.contains(key); }

  std::string key_path(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  double number(const std::string& key, double fallback) {
    if (!j_.contains(key)) return fallback;
    seen_.insert(key);
    const auto& v = j_.at(key);
    if (!v.is_number()) throw ConfigError(key_path(key), "expected a number");
    const double d = v.get<double>();
    if (!std::isfinite(d)) throw ConfigError(key_path(key), "must be finite");
    return d;
  }

  std::optional<double> optional_number(const std::string& key) {
    if (!j_.contains(key) || j_.at(key).is_null()) {
      if (j_.contains(key)) seen_.insert(key);
      return std::nullopt;
    }
    return number(key, 0);
  }

  bool boolean(const std::string& key, bool fallback) {
    if (!j_.contains(key)) return fallback;
    seen_.insert(key);
    if (!j_.at(key).is_boolean()) throw ConfigError(key_path(key), "expected true or false");
    return j_.at(key).get<bool>();
  }

  std::string string(const std::string& key, const std::string& fallback) {
    if (!j_.contains(key)) return fallback;
    seen_.insert(key);
    if (!j_.at(key).is_string()) throw ConfigError(key_path(key), "expected a string");
    return j_.at(key).get<std::string>();
  }

  std::optional<Eigen::Vector3d> vector3(const std::string& key) {
    if (!j_.contains(key)) return std::nullopt;
    seen_.insert(key);
    return parse_vector(j_.at(key), key_path(key));
  }

  const json* child(const std::string& key) {
    if (!j_.contains(key)) return nullptr;
    seen_.insert(key);
    return &j_.at(key);
  }

  void finish() const {
    for (const auto& item : j_.items())
      if (!seen_.count(item.key())) throw ConfigError(key_path(item.key()), "unknown key");
  }

  static Eigen::Vector3d parse_vector(const json& v, const std::string& path) {
    if (!v.is_array() || v.size() != 3) throw ConfigError(path, "expected an array of 3 numbers");
    Eigen::Vector3d out;
    for (int i = 0; i < 3; ++i) {
      if (!v[static_cast<std::size_t>(i)].is_number()) throw ConfigError(path, "expected numbers");
      out(i) = v[static_cast<std::size_t>(i)].get<double>();
    }
    if (!out.allFinite()) throw ConfigError(path, "components must be finite");
    return out;
  }

 private:
  std::string display() const { return path_.empty() ? "<root>" : path_; }

  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

SpinParams<double> parse_spin(const json& j, const std::string& path, SpinParams<double> p) {
  ObjectReader r(j, path);
  p.d_zfs = r.number("d_zfs", p.d_zfs);
  p.e_strain = r.number("e_strain", p.e_strain);
  p.g_factor = r.number("g_factor", p.g_factor);
  r.finish();
  if (!(p.d_zfs > 0)) throw ConfigError(path + ".d_zfs", "d_zfs must be > 0");
  if (p.e_strain < 0) throw ConfigError(path + ".e_strain", "e_strain must be >= 0");
  if (!(p.g_factor > 0)) throw ConfigError(path + ".g_factor", "g_factor must be > 0");
  if (p.e_strain >= p.d_zfs)
    throw ConfigError(path + ".e_strain", "e_strain must be smaller than d_zfs");
  return p;
}

RateParams parse_rates(const json& j, RateParams p) {
  ObjectReader r(j, "rates");
  p.pump_rate = r.number("pump_rate", p.pump_rate);
  p.gamma_rad = r.number("gamma_rad", p.gamma_rad);
  p.k_isc_0 = r.number("k_isc_0", p.k_isc_0);
  p.k_isc_1 = r.number("k_isc_1", p.k_isc_1);
  p.gamma_s = r.number("gamma_s", p.gamma_s);
  p.branch_0 = r.number("branch_0", p.branch_0);
  r.finish();
  try {
    p.validate();
  } catch (const InvalidInput& e) {
    const std::string what = e.what();
    const auto key = what.substr(0, what.find(' '));
    throw ConfigError("rates." + key, what);
  }
  return p;
}

FieldSpec parse_field(const json& j, FieldSpec f) {
  ObjectReader r(j, "field");
  f.vector_gauss = r.vector3("vector_gauss");
  f.magnitude_gauss = r.number("magnitude_gauss", f.magnitude_gauss);
  if (r.has("direction")) {
    const json& d = *r.child("direction");
    if (d.is_string()) {
      if (d.get<std::string>() != "nv") throw ConfigError("field.direction", "expected \"nv\" or a vector");
      f.direction.reset();
    } else {
      f.direction = ObjectReader::parse_vector(d, "field.direction");
      if (f.direction->norm() == 0) throw ConfigError("field.direction", "must be non-zero");
    }
  }
  f.misalignment_deg = r.number("misalignment_deg", f.misalignment_deg);
  r.finish();
  if (f.vector_gauss && r.has("magnitude_gauss"))
    throw ConfigError("field", "give either vector_gauss or magnitude_gauss, not both");
  if (f.magnitude_gauss < 0) throw ConfigError("field.magnitude_gauss", "must be >= 0");
  return f;
}

DriveTemplate parse_drives(const json& j, DriveTemplate d) {
  ObjectReader r(j, "drives");
  d.ground_rabi = r.number("ground_rabi", d.ground_rabi);
  d.ground_fwhm = r.number("ground_fwhm", d.ground_fwhm);
  d.excited_rabi = r.number("excited_rabi", d.excited_rabi);
  d.excited_fwhm = r.number("excited_fwhm", d.excited_fwhm);
  r.finish();
  if (d.ground_rabi < 0) throw ConfigError("drives.ground_rabi", "must be >= 0");
  if (d.excited_rabi < 0) throw ConfigError("drives.excited_rabi", "must be >= 0");
  if (!(d.ground_fwhm > 0)) throw ConfigError("drives.ground_fwhm", "must be > 0");
  if (!(d.excited_fwhm > 0)) throw ConfigError("drives.excited_fwhm", "must be > 0");
  return d;
}

DecayProtocol parse_decay(const json& j, DecayProtocol d) {
  ObjectReader r(j, "decay");
  d.laser_ns = r.number("laser_ns", d.laser_ns);
  d.wait_ns = r.number("wait_ns", d.wait_ns);
  d.readout_ns = r.number("readout_ns", d.readout_ns);
  d.bin_ns = r.number("bin_ns", d.bin_ns);
  d.p_exc = r.number("p_exc", d.p_exc);
  d.pi_rabi_mhz = r.number("pi_rabi_mhz", d.pi_rabi_mhz);
  if (r.has("mw_gs_mhz")) d.mw_gs_mhz = r.optional_number("mw_gs_mhz");
  if (r.has("mw_es_mhz")) d.mw_es_mhz = r.optional_number("mw_es_mhz");
  d.es_pi_time_ns = r.number("es_pi_time_ns", d.es_pi_time_ns);
  d.fidelity = r.number("fidelity", d.fidelity);
  r.finish();
  for (const auto& [key, value] : {std::pair{"laser_ns", d.laser_ns}, {"wait_ns", d.wait_ns},
                                   {"es_pi_time_ns", d.es_pi_time_ns}})
    if (value < 0) throw ConfigError(std::string("decay.") + key, "must be >= 0");
  if (!(d.readout_ns > 0)) throw ConfigError("decay.readout_ns", "must be > 0");
  if (!(d.bin_ns > 0)) throw ConfigError("decay.bin_ns", "must be > 0");
  if (d.p_exc < 0 || d.p_exc > 1) throw ConfigError("decay.p_exc", "must lie in [0, 1]");
  if (d.fidelity < 0 || d.fidelity > 1) throw ConfigError("decay.fidelity", "must lie in [0, 1]");
  if (d.pi_rabi_mhz < 0) throw ConfigError("decay.pi_rabi_mhz", "must be >= 0");
  return d;
}

json vector_json(const Eigen::Vector3d& v) { return json::array({v(0), v(1), v(2)}); }

json spin_json(const SpinParams<double>& p) {
  return {{"d_zfs", p.d_zfs}, {"e_strain", p.e_strain}, {"g_factor", p.g_factor}};
}

Manifold parse_manifold(const std::string& s, const std::string& path) {
  if (s == "ground") return Manifold::Ground;
  if (s == "excited") return Manifold::Excited;
  throw ConfigError(path, "expected \"ground\" or \"excited\"");
}

Transition parse_transition(const std::string& s, const std::string& path) {
  if (s == "-1") return Transition::Minus;
  if (s == "+1") return Transition::Plus;
  throw ConfigError(path, "expected \"-1\" or \"+1\"");
}

}  // namespace

FieldVector<double> FieldSpec::lab(const NVOrientation<double>& o) const {
  FieldVector<double> b =
      vector_gauss ? *vector_gauss
                   : FieldVector<double>(magnitude_gauss * (direction ? direction->normalized() : o.axis));
  if (misalignment_deg != 0) b = rotate_about_axis(b, o.y_axis, misalignment_deg);
  return b;
}

FieldVector<double> FieldSpec::nv(const NVOrientation<double>& o) const {
  return lab_to_nv(lab(o), o);
}

void ScenarioConfig::validate() const {
  auto spin = [](const SpinParams<double>& p, const std::string& path) {
    try {
      p.validate();
    } catch (const InvalidInput& e) {
      const std::string what = e.what();
      throw ConfigError(path + "." + what.substr(0, what.find(' ')), what);
    }
  };
  spin(ground, "ground");
  spin(excited, "excited");
  rates.validate();
  drives.validate();
  if (!orientation.allFinite() || orientation.norm() == 0)
    throw ConfigError("orientation", "must be a non-zero vector");
}

ScenarioConfig parse_config(const json& document) {
  ScenarioConfig c;
  ObjectReader r(document, "");
  c.name = r.string("name", c.name);
  if (const json* j = r.child("ground")) c.ground = parse_spin(*j, "ground", c.ground);
  if (const json* j = r.child("excited")) c.excited = parse_spin(*j, "excited", c.excited);
  if (const json* j = r.child("rates")) c.rates = parse_rates(*j, c.rates);
  if (auto v = r.vector3("orientation")) {
    if (v->norm() == 0) throw ConfigError("orientation", "must be non-zero");
    c.orientation = *v;
  }
  if (const json* j = r.child("field")) c.field = parse_field(*j, c.field);
  if (const json* j = r.child("drives")) c.drives = parse_drives(*j, c.drives);
  if (const json* j = r.child("decay")) c.decay = parse_decay(*j, c.decay);
  if (const json* j = r.child("outputs")) {
    ObjectReader o(*j, "outputs");
    c.output_directory = o.string("directory", c.output_directory);
    o.finish();
  }
  r.finish();
  c.validate();
  return c;
}

ScenarioConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path.string(), "cannot open config file");
  std::stringstream buffer;
  buffer << in.rdbuf();
  json document;
  try {
    document = json::parse(buffer.str());
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string(), std::string("not a valid JSON document: ") + e.what());
  }
  return parse_config(document);
}

json to_json(const ScenarioConfig& c) {
  json field;
  if (c.field.vector_gauss) {
    field["vector_gauss"] = vector_json(*c.field.vector_gauss);
  } else {
    field["magnitude_gauss"] = c.field.magnitude_gauss;
    field["direction"] = c.field.direction ? vector_json(*c.field.direction) : json("nv");
  }
  field["misalignment_deg"] = c.field.misalignment_deg;

  json decay = {{"laser_ns", c.decay.laser_ns},
                {"wait_ns", c.decay.wait_ns},
                {"readout_ns", c.decay.readout_ns},
                {"bin_ns", c.decay.bin_ns},
                {"p_exc", c.decay.p_exc},
                {"pi_rabi_mhz", c.decay.pi_rabi_mhz},
                {"mw_gs_mhz", c.decay.mw_gs_mhz ? json(*c.decay.mw_gs_mhz) : json(nullptr)},
                {"mw_es_mhz", c.decay.mw_es_mhz ? json(*c.decay.mw_es_mhz) : json(nullptr)},
                {"es_pi_time_ns", c.decay.es_pi_time_ns},
                {"fidelity", c.decay.fidelity}};

  return {{"name", c.name},
          {"ground", spin_json(c.ground)},
          {"excited", spin_json(c.excited)},
          {"rates",
           {{"pump_rate", c.rates.pump_rate},
            {"gamma_rad", c.rates.gamma_rad},
            {"k_isc_0", c.rates.k_isc_0},
            {"k_isc_1", c.rates.k_isc_1},
            {"gamma_s", c.rates.gamma_s},
            {"branch_0", c.rates.branch_0}}},
          {"orientation", vector_json(c.orientation)},
          {"field", field},
          {"drives",
           {{"ground_rabi", c.drives.ground_rabi},
            {"ground_fwhm", c.drives.ground_fwhm},
            {"excited_rabi", c.drives.excited_rabi},
            {"excited_fwhm", c.drives.excited_fwhm}}},
          {"decay", decay},
          {"outputs", {{"directory", c.output_directory}}}};
}

ScenarioConfig preset(const std::string& name) {
  ScenarioConfig c;
  if (name == "bulk") {
    c.name = "bulk";
    c.field.magnitude_gauss = 43.0;
    return c;
  }
  if (name == "nanocrystal") {
    // 20 G perpendicular to the NV axis. The strain values put the
    // 0 <-> -1 lines at 2844 MHz (ground) and 1000 MHz (excited); they come
    // from calibrate_strain and are a calibration choice, not a measurement.
    c.name = "nanocrystal";
    c.ground.e_strain = 27.08451239;
    c.excited.e_strain = 424.711744;
    c.field.magnitude_gauss = 20.0;
    c.field.direction = Eigen::Vector3d(1, -1, 0);
    c.decay.mw_gs_mhz = 2844.0;
    c.decay.mw_es_mhz = 1000.0;
    return c;
  }
  throw ConfigError("preset", "unknown preset '" + name + "' (expected bulk or nanocrystal)");
}

// ---------------------------------------------------------------------------

PulseSequence parse_sequence(const json& document) {
  ObjectReader root(document, "");
  const json* segments = root.child("segments");
  root.finish();
  if (!segments) throw ConfigError("segments", "missing");
  if (!segments->is_array()) throw ConfigError("segments", "expected an array");

  PulseSequence seq;
  for (std::size_t i = 0; i < segments->size(); ++i) {
    const std::string path = "segments[" + std::to_string(i) + "]";
    ObjectReader r((*segments)[i], path);
    const std::string type = r.string("type", "");
    if (type == "laser") {
      seq.segments.emplace_back(LaserPulse{r.number("duration_ns", 0)});
    } else if (type == "wait") {
      seq.segments.emplace_back(Wait{r.number("duration_ns", 0)});
    } else if (type == "mw") {
      MwPulse p;
      p.drive.target_manifold = parse_manifold(r.string("manifold", "ground"), path + ".manifold");
      p.drive.target_transition = parse_transition(r.string("transition", "-1"), path + ".transition");
      p.drive.rabi_frequency = r.number("rabi_mhz", 0);
      p.drive.linewidth_fwhm = r.number("fwhm_mhz", p.drive.linewidth_fwhm);
      if (auto f = r.optional_number("frequency_mhz")) {
        p.drive.frequency = *f;
        p.resonant = false;
      }
      p.pi = r.boolean("pi", true);
      p.duration_ns = r.number("duration_ns", 0);
      p.fidelity = r.number("fidelity", 1.0);
      seq.segments.emplace_back(p);
    } else if (type == "ps") {
      seq.segments.emplace_back(PsExcitation{r.number("p_exc", 1.0)});
    } else if (type == "readout") {
      seq.segments.emplace_back(Readout{r.number("window_ns", 100), r.number("bin_ns", 0.5)});
    } else {
      throw ConfigError(path + ".type", "expected laser, wait, mw, ps or readout");
    }
    r.finish();
  }
  try {
    seq.validate();
  } catch (const ConfigError&) {
    throw;
  } catch (const InvalidInput& e) {
    throw ConfigError("segments", e.what());
  }
  return seq;
}

PulseSequence load_sequence(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path.string(), "cannot open sequence file");
  std::stringstream buffer;
  buffer << in.rdbuf();
  try {
    return parse_sequence(json::parse(buffer.str()));
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string(), std::string("not a valid JSON document: ") + e.what());
  }
}

json to_json(const PulseSequence& sequence) {
  json segments = json::array();
  for (const auto& s : sequence.segments) {
    if (const auto* p = std::get_if<LaserPulse>(&s)) {
      segments.push_back({{"type", "laser"}, {"duration_ns", p->duration_ns}});
    } else if (const auto* w = std::get_if<Wait>(&s)) {
      segments.push_back({{"type", "wait"}, {"duration_ns", w->duration_ns}});
    } else if (const auto* m = std::get_if<MwPulse>(&s)) {
      json j = {{"type", "mw"},
                {"manifold", m->drive.target_manifold == Manifold::Ground ? "ground" : "excited"},
                {"transition", m->drive.target_transition == Transition::Minus ? "-1" : "+1"},
                {"rabi_mhz", m->drive.rabi_frequency},
                {"fwhm_mhz", m->drive.linewidth_fwhm},
                {"pi", m->pi},
                {"duration_ns", m->duration_ns},
                {"fidelity", m->fidelity}};
      if (!m->resonant) j["frequency_mhz"] = m->drive.frequency;
      segments.push_back(j);
    } else if (const auto* e = std::get_if<PsExcitation>(&s)) {
      segments.push_back({{"type", "ps"}, {"p_exc", e->p_exc}});
    } else if (const auto* r = std::get_if<Readout>(&s)) {
      segments.push_back({{"type", "readout"}, {"window_ns", r->window_ns}, {"bin_ns", r->bin_ns}});
    }
  }
  return {{"segments", segments}};
}

PulseSequence decay_sequence(const DecayProtocol& protocol, bool pi_gs, bool pi_es) {
  auto pulse = [&](Manifold m, const std::optional<double>& frequency) {
    MwPulse p;
    p.drive.target_manifold = m;
    p.drive.target_transition = Transition::Minus;
    p.drive.rabi_frequency = protocol.pi_rabi_mhz;
    p.drive.linewidth_fwhm = m == Manifold::Ground ? 10.0 : 100.0;
    if (frequency) {
      p.drive.frequency = *frequency;
      p.resonant = false;
    }
    p.pi = true;
    p.fidelity = protocol.fidelity;
    return p;
  };

  PulseSequence seq;
  seq.segments.emplace_back(LaserPulse{protocol.laser_ns});
  seq.segments.emplace_back(Wait{protocol.wait_ns});
  if (pi_gs) seq.segments.emplace_back(pulse(Manifold::Ground, protocol.mw_gs_mhz));
  seq.segments.emplace_back(PsExcitation{protocol.p_exc});
  seq.segments.emplace_back(Readout{protocol.readout_ns, protocol.bin_ns});
  if (pi_es) {
    seq.segments.emplace_back(Wait{protocol.es_pi_time_ns});
    seq.segments.emplace_back(pulse(Manifold::Excited, protocol.mw_es_mhz));
  }
  return seq;
}

}  // namespace nvsim
