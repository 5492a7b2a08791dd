#pragma once

#include <string>
#include <vector>

namespace sawu {

// 8-bit binary portable graymap. Values are mapped linearly, 0.0 -> 0 and
// 1.0 -> 255, clamped outside that range.
void write_pgm(const std::string& path, std::size_t width, std::size_t height,
               const std::vector<double>& values);

}  // namespace sawu
