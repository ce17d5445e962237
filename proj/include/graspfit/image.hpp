#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace graspfit {

template <typename T>
class Image {
 public:
  Image() = default;
  Image(int width, int height, T fill = T())
      : width_(width), height_(height), data_(static_cast<size_t>(width) * height, fill) {}

  int width() const { return width_; }
  int height() const { return height_; }
  bool sameSize(int w, int h) const { return width_ == w && height_ == h; }

  T& at(int x, int y) { return data_[static_cast<size_t>(y) * width_ + x]; }
  const T& at(int x, int y) const { return data_[static_cast<size_t>(y) * width_ + x]; }

  std::vector<T>& data() { return data_; }
  const std::vector<T>& data() const { return data_; }

 private:
  int width_ = 0, height_ = 0;
  std::vector<T> data_;
};

using ImageU8 = Image<std::uint8_t>;
using ImageU16 = Image<std::uint16_t>;
using ImageF = Image<float>;

// Binary PGM (P5). 16-bit samples are big-endian on disk.
void savePgm8(const ImageU8& img, const std::string& path);
void savePgm16(const ImageU16& img, const std::string& path);
ImageU8 loadPgm8(const std::string& path);
ImageU16 loadPgm16(const std::string& path);

}  // namespace graspfit
