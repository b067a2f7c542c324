#include "longcode/command.hpp"

#include <cstdio>
#include <cstdlib>
#include <iomanip>
#include <sstream>

#include "longcode/error.hpp"

namespace longcode {

std::string fill_template(std::string_view templ, const std::map<std::string, std::string>& values) {
  std::string out;
  std::size_t i = 0;
  while (i < templ.size()) {
    if (templ[i] == '{') {
      const auto close = templ.find('}', i + 1);
      if (close != std::string_view::npos) {
        auto it = values.find(std::string(templ.substr(i + 1, close - i - 1)));
        if (it != values.end()) {
          out += it->second;
          i = close + 1;
          continue;
        }
      }
    }
    out += templ[i++];
  }
  return out;
}

std::string shell_quote(std::string_view s) {
  std::string out = "'";
  for (char c : s) {
    if (c == '\'') {
      out += "'\\''";
    } else {
      out += c;
    }
  }
  out += "'";
  return out;
}

void run_command(const std::string& command) {
  const int status = std::system(command.c_str());
  if (status != 0) {
    throw ServiceError("external command failed (status " + std::to_string(status) + "): " + command);
  }
}

std::vector<double> keyframe_times(double start, double duration, std::size_t count) {
  std::vector<double> t;
  for (std::size_t i = 0; i < count; ++i) {
    t.push_back(start + (static_cast<double>(i) + 0.5) * duration / static_cast<double>(count));
  }
  return t;
}

std::vector<std::string> extract_keyframes(std::string_view templ, const std::filesystem::path& video,
                                           std::span<const double> times,
                                           const std::filesystem::path& out_dir, std::string_view stem,
                                           std::string_view extension) {
  std::filesystem::create_directories(out_dir);
  std::vector<std::string> frames;
  for (std::size_t i = 0; i < times.size(); ++i) {
    const auto base = out_dir / (std::string(stem) + "_" + std::to_string(i));
    std::ostringstream t;
    t << std::fixed << std::setprecision(3) << times[i];
    run_command(fill_template(templ, {{"video", shell_quote(video.string())},
                                      {"t", t.str()},
                                      {"out", shell_quote(base.string())}}));
    const std::string frame = base.string() + std::string(extension);
    if (!std::filesystem::exists(frame)) {
      throw ServiceError("keyframe command did not produce " + frame);
    }
    frames.push_back(frame);
  }
  return frames;
}

}  // namespace longcode
