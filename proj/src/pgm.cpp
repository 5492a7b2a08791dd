#include "sawu/pgm.hpp"

#include <cmath>
#include <fstream>

#include "sawu/errors.hpp"

namespace sawu {

void write_pgm(const std::string& path, std::size_t width, std::size_t height,
               const std::vector<double>& values) {
    if (values.size() != width * height)
        throw DimensionError("write_pgm: " + std::to_string(values.size()) + " values for " +
                             std::to_string(width) + "x" + std::to_string(height));
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open for write: " + path);
    os << "P5\n" << width << " " << height << "\n255\n";
    std::vector<unsigned char> row(width);
    for (std::size_t r = 0; r < height; ++r) {
        for (std::size_t c = 0; c < width; ++c) {
            const double v = std::clamp(values[r * width + c], 0.0, 1.0);
            row[c] = static_cast<unsigned char>(std::lround(v * 255.0));
        }
        os.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(width));
    }
    if (!os) throw IoError("write failed: " + path);
}

}  // namespace sawu
