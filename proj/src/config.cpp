#include "qdet/config.hpp"

#include <cctype>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <set>
#include <sstream>
#include <vector>

#include "qdet/errors.hpp"

namespace qdet {

namespace {

constexpr double kDegToRad = 3.14159265358979323846 / 180.0;

std::string trim(const std::string& s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(s);
  while (std::getline(in, item, sep)) out.push_back(trim(item));
  if (!s.empty() && s.back() == sep) out.push_back("");
  return out;
}

// Raw sectioned key/value text plus an error accumulator shared by parsing
// and typed extraction.
struct Raw {
  std::map<std::string, std::map<std::string, std::string>> sections;
  std::vector<std::string> errors;

  void fail(std::string msg) { errors.push_back(std::move(msg)); }

  const std::string* find(const std::string& section,
                          const std::string& key) const {
    auto s = sections.find(section);
    if (s == sections.end()) return nullptr;
    auto k = s->second.find(key);
    return k == s->second.end() ? nullptr : &k->second;
  }
};

Raw parse_text(const std::string& text) {
  Raw raw;
  std::istringstream in(text);
  std::string line;
  std::string section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#' || t[0] == ';') continue;
    if (t.front() == '[') {
      if (t.back() != ']' || t.size() < 3) {
        raw.fail("line " + std::to_string(lineno) + ": malformed section header '" + t + "'");
        continue;
      }
      section = trim(t.substr(1, t.size() - 2));
      raw.sections[section];  // an empty section is fine
      continue;
    }
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      raw.fail("line " + std::to_string(lineno) + ": expected 'key = value' (got '" + t + "')");
      continue;
    }
    if (section.empty()) {
      raw.fail("line " + std::to_string(lineno) + ": key outside any [section]");
      continue;
    }
    const std::string key = trim(t.substr(0, eq));
    const std::string value = trim(t.substr(eq + 1));
    if (key.empty()) {
      raw.fail("line " + std::to_string(lineno) + ": empty key");
      continue;
    }
    raw.sections[section][key] = value;  // later entries win
  }
  return raw;
}

// Typed getters: on conversion failure, record a path-qualified error and
// leave the destination untouched.
void get_int(Raw& raw, const std::string& section, const std::string& key,
             int& dst) {
  const std::string* v = raw.find(section, key);
  if (!v) return;
  try {
    std::size_t used = 0;
    const int n = std::stoi(*v, &used);
    if (used != v->size()) throw std::invalid_argument("");
    dst = n;
  } catch (const std::exception&) {
    raw.fail(section + "." + key + " must be an integer (got '" + *v + "')");
  }
}

void get_u64(Raw& raw, const std::string& section, const std::string& key,
             std::uint64_t& dst) {
  const std::string* v = raw.find(section, key);
  if (!v) return;
  try {
    std::size_t used = 0;
    const unsigned long long n = std::stoull(*v, &used);
    if (used != v->size() || (!v->empty() && v->front() == '-'))
      throw std::invalid_argument("");
    dst = n;
  } catch (const std::exception&) {
    raw.fail(section + "." + key + " must be a nonnegative integer (got '" +
             *v + "')");
  }
}

void get_double(Raw& raw, const std::string& section, const std::string& key,
                double& dst) {
  const std::string* v = raw.find(section, key);
  if (!v) return;
  try {
    std::size_t used = 0;
    const double x = std::stod(*v, &used);
    if (used != v->size() || !std::isfinite(x))
      throw std::invalid_argument("");
    dst = x;
  } catch (const std::exception&) {
    raw.fail(section + "." + key + " must be a finite number (got '" + *v +
             "')");
  }
}

void get_bool(Raw& raw, const std::string& section, const std::string& key,
              bool& dst) {
  const std::string* v = raw.find(section, key);
  if (!v) return;
  if (*v == "true" || *v == "yes" || *v == "1") dst = true;
  else if (*v == "false" || *v == "no" || *v == "0") dst = false;
  else raw.fail(section + "." + key + " must be a boolean (got '" + *v + "')");
}

// Comma-separated list of angles in degrees -> radians.
void get_angles(Raw& raw, const std::string& section, const std::string& key,
                std::vector<double>& dst) {
  const std::string* v = raw.find(section, key);
  if (!v) return;
  std::vector<double> parsed;
  for (const std::string& item : split(*v, ',')) {
    try {
      std::size_t used = 0;
      const double x = std::stod(item, &used);
      if (used != item.size() || !std::isfinite(x))
        throw std::invalid_argument("");
      parsed.push_back(x * kDegToRad);
    } catch (const std::exception&) {
      raw.fail(section + "." + key + " must be comma-separated degrees (got '" +
               *v + "')");
      return;
    }
  }
  if (parsed.empty()) {
    raw.fail(section + "." + key + " must list at least one angle");
    return;
  }
  dst = std::move(parsed);
}

// "LABEL:A, LABEL:B" initiator list.
void get_initiators(Raw& raw, const std::string& section,
                    const std::string& key,
                    std::vector<std::pair<std::string, char>>& dst) {
  const std::string* v = raw.find(section, key);
  if (!v) return;
  std::vector<std::pair<std::string, char>> parsed;
  for (const std::string& item : split(*v, ',')) {
    const auto colon = item.find(':');
    const std::string label =
        colon == std::string::npos ? item : trim(item.substr(0, colon));
    const std::string kind =
        colon == std::string::npos ? "A" : trim(item.substr(colon + 1));
    if (label.empty() || kind.size() != 1 ||
        (kind[0] != 'A' && kind[0] != 'B')) {
      raw.fail(section + "." + key +
               " entries must look like 'label:A' or 'label:B' (got '" + item +
               "')");
      return;
    }
    parsed.push_back({label, kind[0]});
  }
  dst = std::move(parsed);
}

const std::set<std::string> kScenarioKeys = {
    "name",       "trials",        "settings_a", "settings_b",
    "phase_sign", "dress_size",    "dt",         "max_steps",
    "register_size", "permuted",   "points"};
const std::set<std::string> kEngineKeys = {
    "kind",        "seed",          "grw.lambda",       "grw.sigma",
    "endqt.eps",   "endqt.window",  "endqt.size_threshold",
    "endqt.initiators"};
const std::set<std::string> kOutputKeys = {"dir", "format"};

void check_known_keys(Raw& raw) {
  const std::map<std::string, const std::set<std::string>*> known = {
      {"scenario", &kScenarioKeys},
      {"engine", &kEngineKeys},
      {"output", &kOutputKeys}};
  for (const auto& [section, entries] : raw.sections) {
    auto it = known.find(section);
    if (it == known.end()) {
      raw.fail("unknown section [" + section + "]");
      continue;
    }
    for (const auto& [key, value] : entries)
      if (!it->second->count(key))
        raw.fail("unknown key '" + section + "." + key + "'");
  }
}

void append_lines(std::vector<std::string>& dst, const std::string& joined) {
  for (const std::string& line : split(joined, '\n'))
    if (!line.empty()) dst.push_back(line);
}

}  // namespace

SimulationConfig load_config(
    const std::string& text,
    const std::map<std::string, std::string>& overrides) {
  Raw raw = parse_text(text);
  for (const auto& [path, value] : overrides) {
    const auto dot = path.find('.');
    if (dot == std::string::npos || dot == 0 || dot + 1 == path.size()) {
      raw.fail("override path '" + path + "' must look like 'section.key'");
      continue;
    }
    raw.sections[path.substr(0, dot)][path.substr(dot + 1)] = value;
  }
  check_known_keys(raw);

  SimulationConfig cfg;

  // --- scenario
  ScenarioName name = ScenarioName::SternGerlachInterferometer;
  bool have_name = false;
  if (const std::string* v = raw.find("scenario", "name")) {
    try {
      name = scenario_from_string(*v);
      have_name = true;
    } catch (const ValidationError& e) {
      append_lines(raw.errors, e.what());
    }
  } else {
    raw.fail("scenario.name is required");
  }

  ScenarioParams params;
  get_int(raw, "scenario", "trials", params.trials);
  get_angles(raw, "scenario", "settings_a", params.settings_a);
  get_angles(raw, "scenario", "settings_b", params.settings_b);
  get_int(raw, "scenario", "phase_sign", params.phase_sign);
  get_int(raw, "scenario", "dress_size", params.dress_size);
  get_double(raw, "scenario", "dt", params.dt);
  get_int(raw, "scenario", "max_steps", params.max_steps);
  get_int(raw, "scenario", "register_size", params.register_size);
  get_bool(raw, "scenario", "permuted", params.permuted);
  get_int(raw, "scenario", "points", params.points);

  // --- engine
  bool have_engine = false;
  if (const std::string* v = raw.find("engine", "kind")) {
    try {
      cfg.engine = engine_from_string(*v);
      have_engine = true;
    } catch (const ValidationError& e) {
      append_lines(raw.errors, e.what());
    }
  } else {
    raw.fail("engine.kind is required");
  }
  get_u64(raw, "engine", "seed", cfg.engine.seed);
  get_double(raw, "engine", "grw.lambda", cfg.engine.grw.lambda);
  get_double(raw, "engine", "grw.sigma", cfg.engine.grw.sigma);
  get_double(raw, "engine", "endqt.eps", cfg.engine.endqt.eps);
  get_double(raw, "engine", "endqt.window", cfg.engine.endqt.window);
  get_int(raw, "engine", "endqt.size_threshold",
          cfg.engine.endqt.size_threshold);
  get_initiators(raw, "engine", "endqt.initiators",
                 cfg.engine.endqt.initiators);

  // --- output
  if (const std::string* v = raw.find("output", "dir")) cfg.output.dir = *v;
  if (const std::string* v = raw.find("output", "format")) {
    if (*v == "csv" || *v == "json") cfg.output.format = *v;
    else raw.fail("output.format must be csv or json (got '" + *v + "')");
  }

  // --- semantic validation, still accumulating
  if (have_name) {
    try {
      cfg.scenario = make_scenario(name, params);
    } catch (const ValidationError& e) {
      append_lines(raw.errors, e.what());
    }
  }
  if (have_engine) {
    try {
      cfg.engine.validate();
    } catch (const ValidationError& e) {
      append_lines(raw.errors, e.what());
    }
  }

  if (!raw.errors.empty()) {
    std::string joined;
    for (std::size_t i = 0; i < raw.errors.size(); ++i) {
      if (i) joined += '\n';
      joined += raw.errors[i];
    }
    throw ValidationError(joined);
  }
  return cfg;
}

SimulationConfig load_config_file(
    const std::string& path,
    const std::map<std::string, std::string>& overrides) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot read config file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return load_config(buf.str(), overrides);
}

}  // namespace qdet
