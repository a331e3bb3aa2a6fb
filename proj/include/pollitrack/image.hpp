#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <span>
#include <vector>

namespace pollitrack {

/// 8-bit single-channel image, row-major.
class GrayImage {
 public:
  GrayImage() = default;
  GrayImage(int width, int height, std::uint8_t fill = 0);

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  bool empty() const noexcept { return pixels_.empty(); }

  std::uint8_t& at(int x, int y) { return pixels_[static_cast<std::size_t>(y) * width_ + x]; }
  std::uint8_t at(int x, int y) const {
    return pixels_[static_cast<std::size_t>(y) * width_ + x];
  }

  std::span<std::uint8_t> pixels() noexcept { return pixels_; }
  std::span<const std::uint8_t> pixels() const noexcept { return pixels_; }

  friend bool operator==(const GrayImage&, const GrayImage&) = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint8_t> pixels_;
};

/// Output size is floor(size / factor); each output pixel samples the input
/// pixel under its centre. factor must be >= 1.
GrayImage downscale(const GrayImage& src, double factor);

/// Sequential source of frames of constant size.
class FrameSource {
 public:
  virtual ~FrameSource() = default;
  virtual int width() const = 0;
  virtual int height() const = 0;
  virtual std::int64_t frame_count() const = 0;
  /// Next frame, or nullopt at end of stream.
  virtual std::optional<GrayImage> next() = 0;
};

/// Packed stream: width, height, frame count as little-endian uint32, then frames row-major.
class PackedFrameReader final : public FrameSource {
 public:
  explicit PackedFrameReader(const std::filesystem::path& path);

  int width() const override { return width_; }
  int height() const override { return height_; }
  std::int64_t frame_count() const override { return count_; }
  std::optional<GrayImage> next() override;

 private:
  std::ifstream in_;
  int width_ = 0;
  int height_ = 0;
  std::int64_t count_ = 0;
  std::int64_t read_ = 0;
};

class PackedFrameWriter {
 public:
  PackedFrameWriter(const std::filesystem::path& path, int width, int height,
                    std::uint32_t frame_count);
  void write(const GrayImage& frame);
  void close();
  ~PackedFrameWriter();

 private:
  std::ofstream out_;
  int width_;
  int height_;
  std::uint32_t expected_;
  std::uint32_t written_ = 0;
};

/// Directory of numbered binary PGM (P5, maxval 255) images, read in numeric filename order.
class PgmDirectoryReader final : public FrameSource {
 public:
  explicit PgmDirectoryReader(const std::filesystem::path& dir);

  int width() const override { return width_; }
  int height() const override { return height_; }
  std::int64_t frame_count() const override { return static_cast<std::int64_t>(files_.size()); }
  std::optional<GrayImage> next() override;

 private:
  std::vector<std::filesystem::path> files_;
  std::size_t pos_ = 0;
  int width_ = 0;
  int height_ = 0;
};

/// In-memory frames; used for benchmarks and tests.
class VectorFrameSource final : public FrameSource {
 public:
  explicit VectorFrameSource(std::vector<GrayImage> frames);

  int width() const override { return frames_.empty() ? 0 : frames_.front().width(); }
  int height() const override { return frames_.empty() ? 0 : frames_.front().height(); }
  std::int64_t frame_count() const override { return static_cast<std::int64_t>(frames_.size()); }
  std::optional<GrayImage> next() override;
  void rewind() noexcept { pos_ = 0; }

 private:
  std::vector<GrayImage> frames_;
  std::size_t pos_ = 0;
};

GrayImage read_pgm(const std::filesystem::path& path);
void write_pgm(const std::filesystem::path& path, const GrayImage& image);

/// Directory -> PgmDirectoryReader, anything else -> PackedFrameReader.
std::unique_ptr<FrameSource> open_frame_source(const std::filesystem::path& path);

}  // namespace pollitrack
