#include "qdet/io.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "json.hpp"

#include "qdet/errors.hpp"

namespace qdet {

namespace {

using nlohmann::json;

// json's default object is key-sorted, which is exactly the determinism we
// want; numbers serialize via shortest-roundtrip.
json event_to_json(const ScenarioEvent& e) {
  json j;
  j["type"] = e.type;
  j["t"] = e.t;
  j["theory"] = e.theory;
  j["systems"] = e.systems;
  j["values"] = e.values;
  j["notes"] = e.notes;
  return j;
}

ScenarioEvent event_from_json(const json& j, std::size_t lineno) {
  if (!j.is_object())
    throw ValidationError("event log line " + std::to_string(lineno) +
                          ": expected a JSON object");
  ScenarioEvent e;
  try {
    e.type = j.at("type").get<std::string>();
    e.t = j.at("t").get<double>();
    e.theory = j.at("theory").get<std::string>();
    if (j.contains("systems"))
      e.systems = j.at("systems").get<std::vector<std::string>>();
    if (j.contains("values"))
      e.values = j.at("values").get<std::map<std::string, double>>();
    if (j.contains("notes"))
      e.notes = j.at("notes").get<std::map<std::string, std::string>>();
  } catch (const json::exception& ex) {
    throw ValidationError("event log line " + std::to_string(lineno) + ": " +
                          ex.what());
  }
  return e;
}

std::string csv_quote(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

std::string number(double x) { return json(x).dump(); }

}  // namespace

void write_file_atomic(const std::string& path, const std::string& content) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  if (target.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(target.parent_path(), ec);
    if (ec)
      throw ValidationError("cannot create directory '" +
                            target.parent_path().string() +
                            "': " + ec.message());
  }
  const fs::path tmp = target.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw ValidationError("cannot write '" + tmp.string() + "'");
    out << content;
    out.flush();
    if (!out) {
      std::error_code ec;
      fs::remove(tmp, ec);
      throw ValidationError("failed while writing '" + tmp.string() + "'");
    }
  }
  std::error_code ec;
  fs::rename(tmp, target, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw ValidationError("cannot move temporary file onto '" + path +
                          "': " + ec.message());
  }
}

std::string events_to_jsonl(const std::vector<ScenarioEvent>& events) {
  std::string out;
  for (const ScenarioEvent& e : events) {
    out += event_to_json(e).dump();
    out += '\n';
  }
  return out;
}

std::vector<ScenarioEvent> events_from_jsonl(const std::string& text) {
  std::vector<ScenarioEvent> events;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded())
      throw ValidationError("event log line " + std::to_string(lineno) +
                            ": invalid JSON");
    events.push_back(event_from_json(j, lineno));
  }
  return events;
}

std::string statistics_to_json(const std::map<std::string, double>& stats) {
  return json(stats).dump(2) + "\n";
}

std::string statistics_to_csv(const std::map<std::string, double>& stats) {
  std::string out = "key,value\n";
  for (const auto& [key, value] : stats)
    out += csv_quote(key) + "," + number(value) + "\n";
  return out;
}

std::string sweep_to_json(const std::vector<SweepRow>& rows) {
  json arr = json::array();
  for (const SweepRow& r : rows)
    arr.push_back(json{{"strength", r.strength},
                       {"overlap", r.overlap},
                       {"d_star", r.d_star},
                       {"visibility", r.visibility}});
  return arr.dump(2) + "\n";
}

std::string sweep_to_csv(const std::vector<SweepRow>& rows) {
  std::string out = "strength,overlap,d_star,visibility\n";
  for (const SweepRow& r : rows)
    out += number(r.strength) + "," + number(r.overlap) + "," +
           number(r.d_star) + "," + number(r.visibility) + "\n";
  return out;
}

std::string reports_to_json(
    const std::vector<DifferentiationReport>& reports) {
  json arr = json::array();
  for (const DifferentiationReport& rep : reports) {
    json samples = json::array();
    for (const DifferentiationSample& s : rep.samples)
      samples.push_back(json{{"t", s.t}, {"d_star", s.d_star}});
    arr.push_back(json{{"system", rep.system},
                       {"property", rep.property},
                       {"region", rep.region},
                       {"samples", samples}});
  }
  return arr.dump(2) + "\n";
}

std::string reports_to_csv(const std::vector<DifferentiationReport>& reports) {
  std::string out = "system,property,region,t,d_star\n";
  for (const DifferentiationReport& rep : reports)
    for (const DifferentiationSample& s : rep.samples)
      out += csv_quote(rep.system) + "," + csv_quote(rep.property) + "," +
             csv_quote(rep.region) + "," + number(s.t) + "," +
             number(s.d_star) + "\n";
  return out;
}

}  // namespace qdet
