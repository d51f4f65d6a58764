#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"
#include "twopoint/synth.hpp"

namespace twopoint::synth {

nlohmann::json to_json(const SynthConfig& c);
SynthConfig synth_config_from_json(const nlohmann::json& j);

/// Record file name inside a dataset directory.
std::string record_file_name(int subject, int gesture, int rep);

/// Writes raw little-endian float32 samples, channel-major.
void write_record_raw(const MultiChannelSignal& sig, const std::filesystem::path& file);
MultiChannelSignal read_record_raw(const std::filesystem::path& file, std::size_t length);

/// Writes `manifest.json` and one raw file per record. Generates and writes
/// one subject at a time so memory stays bounded.
void write_cohort(const CohortManifest& manifest, const std::filesystem::path& dir);
void write_cohort(const CohortDataset& dataset, const std::filesystem::path& dir);

CohortManifest read_manifest(const std::filesystem::path& dir);
std::vector<LabeledRecord> read_subject(const std::filesystem::path& dir, int subject);

}  // namespace twopoint::synth
