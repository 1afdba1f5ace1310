#include "taskforge/mnist.hpp"

#include <cstdint>
#include <fstream>
#include <vector>

#include "taskforge/errors.hpp"

namespace taskforge {

namespace {

std::vector<unsigned char> read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) fail("IoError", "cannot open '" + path + "'");
  return std::vector<unsigned char>(std::istreambuf_iterator<char>(f),
                                    std::istreambuf_iterator<char>());
}

std::uint32_t read_be32(const std::vector<unsigned char>& buf,
                        std::size_t off, const std::string& path) {
  if (off + 4 > buf.size())
    fail("TruncatedFile", "'" + path + "' ends inside its header");
  return (std::uint32_t(buf[off]) << 24) | (std::uint32_t(buf[off + 1]) << 16) |
         (std::uint32_t(buf[off + 2]) << 8) | std::uint32_t(buf[off + 3]);
}

} // namespace

IdxImages load_idx_images(const std::string& path) {
  auto buf = read_file(path);
  if (read_be32(buf, 0, path) != 0x00000803u)
    fail("BadMagic", "'" + path + "' is not an IDX image file");
  int n = static_cast<int>(read_be32(buf, 4, path));
  int rows = static_cast<int>(read_be32(buf, 8, path));
  int cols = static_cast<int>(read_be32(buf, 12, path));
  if (n < 0 || rows <= 0 || cols <= 0)
    fail("BadMagic", "'" + path + "' header has impossible dimensions");
  std::size_t need = 16 + std::size_t(n) * rows * cols;
  if (buf.size() < need)
    fail("TruncatedFile", "'" + path + "' holds fewer pixels than its header claims");

  IdxImages out;
  out.rows = rows;
  out.cols = cols;
  out.data = Tensor::zeros(n, rows * cols);
  float* dst = out.data.data();
  const unsigned char* src = buf.data() + 16;
  for (std::size_t i = 0; i < std::size_t(n) * rows * cols; ++i)
    dst[i] = static_cast<float>(src[i]) / 255.0f;
  return out;
}

std::vector<int> load_idx_labels(const std::string& path) {
  auto buf = read_file(path);
  if (read_be32(buf, 0, path) != 0x00000801u)
    fail("BadMagic", "'" + path + "' is not an IDX label file");
  int n = static_cast<int>(read_be32(buf, 4, path));
  if (n < 0) fail("BadMagic", "'" + path + "' header has impossible dimensions");
  if (buf.size() < 8 + std::size_t(n))
    fail("TruncatedFile", "'" + path + "' holds fewer labels than its header claims");
  std::vector<int> out(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) out[static_cast<std::size_t>(i)] = buf[8 + std::size_t(i)];
  return out;
}

MnistData mnist_load(const std::string& images_path,
                     const std::string& labels_path) {
  IdxImages imgs = load_idx_images(images_path);
  std::vector<int> raw = load_idx_labels(labels_path);
  if (static_cast<int>(raw.size()) != imgs.data.rows())
    fail("CountMismatch", "image and label files disagree on the sample count");

  MnistData out;
  out.rows = imgs.rows;
  out.cols = imgs.cols;
  out.images = std::move(imgs.data);
  out.labels = Tensor::zeros(out.images.rows(), 10);
  for (int i = 0; i < out.images.rows(); ++i) {
    int k = raw[static_cast<std::size_t>(i)];
    if (k < 0 || k > 9)
      fail("BadMagic", "label " + std::to_string(k) + " is out of range");
    out.labels.at(i, k) = 1.0f;
  }
  return out;
}

} // namespace taskforge
