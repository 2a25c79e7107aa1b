#pragma once

// Shared event record: every theory engine and scenario reports what happened
// through these, and the JSON-lines log is a direct serialization of them.
// Times are logical scenario-clock times.

#include <map>
#include <string>
#include <vector>

namespace qdet {

struct ScenarioEvent {
  std::string type;                          // e.g. "collapse", "dc_grant"
  double t = 0.0;
  std::string theory;                        // engine that produced it
  std::vector<std::string> systems;          // involved system labels
  std::map<std::string, double> values;      // numeric payload (outcomes, weights)
  std::map<std::string, std::string> notes;  // text payload (reasons, tags)
};

}  // namespace qdet
