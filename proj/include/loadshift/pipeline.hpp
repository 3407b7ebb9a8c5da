#pragma once

#include "loadshift/config.hpp"

namespace loadshift::pipeline {

// Each stage reads the previous stage's checkpoint files under the
// configured out_dir and writes its own subdirectory plus the run manifest.
// Stage order: ingest -> prep -> forecast -> effects -> segment -> report;
// synth stands alone and produces input-format files that can be fed back
// through ingest.
void run_ingest(const config::Config& cfg);
void run_prep(const config::Config& cfg);
void run_forecast(const config::Config& cfg);
void run_effects(const config::Config& cfg);
void run_segment(const config::Config& cfg);
void run_synth(const config::Config& cfg);
void run_report(const config::Config& cfg);

// All stages in order, synth excluded.
void run_all(const config::Config& cfg);

}  // namespace loadshift::pipeline
