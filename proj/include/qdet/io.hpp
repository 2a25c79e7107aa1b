#pragma once

// Serialization of run artifacts. All writers produce byte-deterministic
// output for identical inputs: object keys are emitted in sorted order and
// numbers use shortest-roundtrip formatting, so event logs can be compared
// with a plain byte diff.

#include <map>
#include <string>
#include <vector>

#include "qdet/events.hpp"
#include "qdet/scenarios.hpp"

namespace qdet {

// Write via a temporary file in the same directory plus an atomic rename, so
// a crash or error never leaves a partial file at `path`. Parent directories
// are created as needed.
void write_file_atomic(const std::string& path, const std::string& content);

// One compact JSON object per event, one event per line ("JSON lines").
std::string events_to_jsonl(const std::vector<ScenarioEvent>& events);
std::vector<ScenarioEvent> events_from_jsonl(const std::string& text);

// Key/value statistics table.
std::string statistics_to_json(const std::map<std::string, double>& stats);
std::string statistics_to_csv(const std::map<std::string, double>& stats);

// Weak-sweep table (strength, overlap, d_star, visibility).
std::string sweep_to_json(const std::vector<SweepRow>& rows);
std::string sweep_to_csv(const std::vector<SweepRow>& rows);

// Differentiation time series, long format (system, property, region, t,
// d_star).
std::string reports_to_json(const std::vector<DifferentiationReport>& reports);
std::string reports_to_csv(const std::vector<DifferentiationReport>& reports);

}  // namespace qdet
