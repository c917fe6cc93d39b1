#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "lanemap/pipeline.hpp"

namespace lanemap {

// Sets one `section.key` value; throws ValidationError naming the key when it
// is unknown or the value does not parse.
void apply_setting(PipelineConfig& cfg, std::string_view key, std::string_view value);

// Reads an INI file ([heatmap], [match], [eval], [synth], [train],
// [pipeline]) over the current values of `cfg`.
void apply_config_text(PipelineConfig& cfg, const std::string& text);
void apply_config_file(PipelineConfig& cfg, const std::filesystem::path& path);

// Every key with its current value, in INI form.
std::string format_config(const PipelineConfig& cfg);

}  // namespace lanemap
