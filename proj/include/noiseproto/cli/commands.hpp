#pragma once

#include <string>
#include <vector>

#include "noiseproto/cli/config.hpp"

namespace noiseproto::cli {

// Key schema for one subcommand; the same keys are accepted as CLI flags
// and as config-file entries.
std::vector<KeySpec> schema_for(const std::string& command);

const std::vector<std::string>& command_names();

void cmd_synth(const Config& cfg);
void cmd_clean(const Config& cfg);
void cmd_protos(const Config& cfg);
void cmd_train(const Config& cfg);
void cmd_eval(const Config& cfg);
void cmd_sweep(const Config& cfg);
void cmd_hist(const Config& cfg);

void run_command(const std::string& name, const Config& cfg);

// Grid values following the sweep step rule: 0.01 steps across
// [0.01, 0.1], then 0.1 steps up to 1.0 (19 values).
std::vector<double> sweep_grid_values();

}  // namespace noiseproto::cli
