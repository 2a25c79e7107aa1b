#pragma once

// Plain-text run configuration. The format is INI-style with three sections:
//
//   [scenario]
//   name = epr_bell              # stern_gerlach | epr_bell | sdc_chain | weak_sweep
//   trials = 100000
//   settings_a = 0, 90           # analyzer angles in degrees
//   settings_b = 45, 135
//
//   [engine]
//   kind = endqt                 # grw | mwi_quasilocal | mwi_local | mwi_global
//                                # | relational_rqm | relational_single_world | endqt
//   seed = 42
//   grw.lambda = 1.0
//   endqt.initiators = LA:A, LB:A
//
//   [output]
//   dir = out
//   format = csv                 # csv | json (tables; events are always JSON lines)
//
// '#' or ';' starts a full-line comment. Angles are written in degrees and
// converted to radians on load. Validation gathers every problem before
// failing: the thrown message holds one path-qualified line per error.

#include <map>
#include <string>

#include "qdet/scenarios.hpp"

namespace qdet {

struct OutputConfig {
  std::string dir;             // empty: resolved by the caller (flag/env/cwd)
  std::string format = "csv";  // table format: "csv" or "json"
};

struct SimulationConfig {
  Scenario scenario;
  TheoryEngine engine;
  OutputConfig output;
};

// Parse and validate a configuration. `overrides` maps dotted paths
// ("scenario.trials", "engine.grw.lambda", "output.dir") to raw values and is
// applied on top of the parsed text before validation, so command-line flags
// and sweep grids reuse the same checking.
SimulationConfig load_config(
    const std::string& text,
    const std::map<std::string, std::string>& overrides = {});

// Read `path` and delegate to load_config. A missing or unreadable file is a
// validation error naming the path.
SimulationConfig load_config_file(
    const std::string& path,
    const std::map<std::string, std::string>& overrides = {});

}  // namespace qdet
