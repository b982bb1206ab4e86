#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace preferthinker {

// 8-bit RGB raster.
struct Image {
    int width = 0;
    int height = 0;
    std::vector<uint8_t> pixels;  // row-major, 3 bytes per pixel

    static Image solid(int w, int h, uint8_t r, uint8_t g, uint8_t b);

    uint8_t* at(int x, int y) { return pixels.data() + 3 * (static_cast<size_t>(y) * width + x); }
    const uint8_t* at(int x, int y) const {
        return pixels.data() + 3 * (static_cast<size_t>(y) * width + x);
    }
    bool operator==(const Image&) const = default;
};

// Minimal PNG I/O over zlib: 8-bit RGB, non-interlaced. write_png always
// emits filter type 0; read_png handles filters 0-4 so any baseline RGB8
// PNG loads.
void write_png(const std::string& path, const Image& img);
std::vector<uint8_t> encode_png(const Image& img);
Image read_png(const std::string& path);
Image decode_png(const std::vector<uint8_t>& bytes);

}  // namespace preferthinker
