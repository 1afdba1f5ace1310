#include "taskforge/ppm.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "taskforge/errors.hpp"

namespace taskforge {

namespace {

unsigned char to_byte(float v) {
  return static_cast<unsigned char>(
      std::lround(255.0f * std::clamp(v, 0.0f, 1.0f)));
}

} // namespace

void write_ppm(const std::string& path, const float* rgb, int w, int h) {
  if (w <= 0 || h <= 0) fail("BadConfig", "image dimensions must be positive");
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) fail("IoError", "cannot write '" + path + "'");
  f << "P6\n" << w << " " << h << "\n255\n";
  std::string bytes(static_cast<std::size_t>(w) * h * 3, '\0');
  for (std::size_t i = 0; i < bytes.size(); ++i)
    bytes[i] = static_cast<char>(to_byte(rgb[i]));
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

std::vector<float> gray_to_rgb(const float* gray, int n) {
  std::vector<float> out(static_cast<std::size_t>(n) * 3);
  for (int i = 0; i < n; ++i)
    for (int c = 0; c < 3; ++c)
      out[static_cast<std::size_t>(i) * 3 + c] = gray[i];
  return out;
}

void write_ppm_grid(const std::string& path,
                    const std::vector<std::vector<float>>& images, int w,
                    int h, int cols) {
  if (images.empty()) fail("BadConfig", "nothing to draw");
  if (cols <= 0) cols = static_cast<int>(images.size());
  for (auto& img : images)
    if (img.size() != static_cast<std::size_t>(w) * h * 3)
      fail("DimMismatch", "every tile must be w*h*3 floats");

  int n = static_cast<int>(images.size());
  int rows = (n + cols - 1) / cols;
  int gw = cols * w + (cols - 1);
  int gh = rows * h + (rows - 1);
  std::vector<float> canvas(static_cast<std::size_t>(gw) * gh * 3, 0.0f);
  for (int i = 0; i < n; ++i) {
    int gx = (i % cols) * (w + 1);
    int gy = (i / cols) * (h + 1);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x)
        for (int c = 0; c < 3; ++c)
          canvas[((static_cast<std::size_t>(gy + y) * gw) + (gx + x)) * 3 + c] =
              images[static_cast<std::size_t>(i)]
                    [(static_cast<std::size_t>(y) * w + x) * 3 + c];
  }
  write_ppm(path, canvas.data(), gw, gh);
}

} // namespace taskforge
