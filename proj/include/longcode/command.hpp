#pragma once

// Shelling out to external tools (keyframe extraction, video transformers).

#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace longcode {

/// Replaces every {name} in `templ` with values.at(name). Unknown
/// placeholders are left untouched.
std::string fill_template(std::string_view templ, const std::map<std::string, std::string>& values);

/// Single-quotes `s` for /bin/sh.
std::string shell_quote(std::string_view s);

/// Runs `command` through the shell; throws ServiceError on nonzero status.
void run_command(const std::string& command);

/// Uniformly spaced sample times inside [start, start + duration).
std::vector<double> keyframe_times(double start, double duration, std::size_t count);

/// Runs a template such as "ffmpeg -i {video} -ss {t} -frames:v 1 {out}.png"
/// once per time stamp and returns the produced image paths. {out} expands
/// to out_dir/<stem>_<i> (shell-quoted, without extension).
std::vector<std::string> extract_keyframes(std::string_view templ,
                                           const std::filesystem::path& video,
                                           std::span<const double> times,
                                           const std::filesystem::path& out_dir,
                                           std::string_view stem,
                                           std::string_view extension = ".png");

}  // namespace longcode
