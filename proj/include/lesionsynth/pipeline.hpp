#pragma once

#include <string>

#include "lesionsynth/config.hpp"

namespace lesionsynth::cli {

// Runs one pipeline command; returns a process exit status. Commands:
// prepare-maps, train-pix2pixhd, train-pgan, synthesize, evaluate, report.
int dispatch(const std::string& command, const PipelineConfig& cfg);

}  // namespace lesionsynth::cli
