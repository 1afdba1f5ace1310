#pragma once

#include <string>
#include <vector>

namespace taskforge {

// Binary PPM (P6) writer for [0,1] float images; values are clamped and
// rounded to bytes. `rgb` is row-major h*w*3.
void write_ppm(const std::string& path, const float* rgb, int w, int h);

// Replicates a single channel into RGB (for grayscale data).
std::vector<float> gray_to_rgb(const float* gray, int n);

// Tiles same-sized RGB images left-to-right, top-to-bottom into `cols`
// columns (1-pixel black gutters) and writes one PPM.
void write_ppm_grid(const std::string& path,
                    const std::vector<std::vector<float>>& images, int w,
                    int h, int cols);

} // namespace taskforge
