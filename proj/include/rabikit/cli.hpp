#pragma once

#include <string>

#include "json.hpp"

namespace rabikit {

// Entry point behind the `rabikit` binary, callable in-process for tests.
// Dispatches the subcommands {simulate-g2, simulate-pulse, simulate-stream,
// correlate, fit-g2, fit-linewidth, fit-saturation, diffusion-rate,
// gap-closing, classify, report}. Each writes a schema-validated JSON
// result plus CSV plot data into the output directory (flag --output-dir,
// else the RABIKIT_OUTPUT_DIR environment variable, else the config file's
// output_dir, else the working directory). Returns 0 on success, 1 on bad
// input (usage text to stderr), 2 on numerical failure. Identical inputs,
// config, and seed produce byte-identical JSON.
int cli_dispatch(int argc, const char* const* argv);

// The shipped result schema (schema/result-v1.schema.json), embedded at
// build time so the binary needs no lookup path.
const nlohmann::json& result_schema();

// Structural validation against the draft-07 subset the shipped schema
// uses: type, const, enum, required, properties, additionalProperties,
// items, minItems, allOf, if/then. Throws ValidationError naming the
// offending document path.
void check_schema(const nlohmann::json& schema, const nlohmann::json& doc);

}  // namespace rabikit
