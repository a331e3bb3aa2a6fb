#include "pollitrack/image.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>

#include "pollitrack/errors.hpp"

namespace pollitrack {

GrayImage::GrayImage(int width, int height, std::uint8_t fill)
    : width_(width), height_(height),
      pixels_(static_cast<std::size_t>(std::max(width, 0)) * std::max(height, 0), fill) {}

GrayImage downscale(const GrayImage& src, double factor) {
  if (!(factor >= 1.0)) throw std::invalid_argument("downscale factor must be >= 1");
  const int w = std::max(1, static_cast<int>(std::floor(src.width() / factor)));
  const int h = std::max(1, static_cast<int>(std::floor(src.height() / factor)));
  GrayImage out(w, h);
  std::vector<int> xs(static_cast<std::size_t>(w));
  for (int x = 0; x < w; ++x) {
    xs[static_cast<std::size_t>(x)] =
        std::min(src.width() - 1, static_cast<int>(std::floor((x + 0.5) * factor)));
  }
  for (int y = 0; y < h; ++y) {
    const int sy = std::min(src.height() - 1, static_cast<int>(std::floor((y + 0.5) * factor)));
    for (int x = 0; x < w; ++x) out.at(x, y) = src.at(xs[static_cast<std::size_t>(x)], sy);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Packed stream

namespace {

std::uint32_t read_le32(std::istream& in) {
  std::array<unsigned char, 4> b{};
  in.read(reinterpret_cast<char*>(b.data()), 4);
  if (!in) throw StreamError("truncated packed frame header");
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

void write_le32(std::ostream& out, std::uint32_t v) {
  const std::array<char, 4> b{static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
                              static_cast<char>((v >> 16) & 0xff),
                              static_cast<char>((v >> 24) & 0xff)};
  out.write(b.data(), 4);
}

}  // namespace

PackedFrameReader::PackedFrameReader(const std::filesystem::path& path)
    : in_(path, std::ios::binary) {
  if (!in_) throw StreamError(fmt::format("cannot open frame stream '{}'", path.string()));
  width_ = static_cast<int>(read_le32(in_));
  height_ = static_cast<int>(read_le32(in_));
  count_ = read_le32(in_);
  if (width_ <= 0 || height_ <= 0) throw StreamError("packed frame stream has empty frames");
}

std::optional<GrayImage> PackedFrameReader::next() {
  if (read_ >= count_) return std::nullopt;
  GrayImage img(width_, height_);
  in_.read(reinterpret_cast<char*>(img.pixels().data()),
           static_cast<std::streamsize>(img.pixels().size()));
  if (!in_) throw StreamError(fmt::format("packed frame stream truncated at frame {}", read_));
  ++read_;
  return img;
}

PackedFrameWriter::PackedFrameWriter(const std::filesystem::path& path, int width, int height,
                                     std::uint32_t frame_count)
    : out_(path, std::ios::binary), width_(width), height_(height), expected_(frame_count) {
  if (!out_) throw StreamError(fmt::format("cannot create frame stream '{}'", path.string()));
  write_le32(out_, static_cast<std::uint32_t>(width));
  write_le32(out_, static_cast<std::uint32_t>(height));
  write_le32(out_, frame_count);
}

void PackedFrameWriter::write(const GrayImage& frame) {
  if (frame.width() != width_ || frame.height() != height_) {
    throw StreamError("frame size differs from stream header");
  }
  if (written_ >= expected_) throw StreamError("more frames written than declared");
  out_.write(reinterpret_cast<const char*>(frame.pixels().data()),
             static_cast<std::streamsize>(frame.pixels().size()));
  ++written_;
}

void PackedFrameWriter::close() {
  if (!out_.is_open()) return;
  out_.close();
  if (written_ != expected_) {
    throw StreamError(fmt::format("declared {} frames, wrote {}", expected_, written_));
  }
}

PackedFrameWriter::~PackedFrameWriter() {
  if (out_.is_open()) out_.close();
}

// ---------------------------------------------------------------------------
// PGM

namespace {

std::string pgm_token(std::istream& in) {
  std::string tok;
  char c = 0;
  while (in.get(c)) {
    if (c == '#') {
      std::string skip;
      std::getline(in, skip);
      continue;
    }
    if (std::isspace(static_cast<unsigned char>(c))) {
      if (!tok.empty()) break;
      continue;
    }
    tok.push_back(c);
  }
  return tok;
}

}  // namespace

GrayImage read_pgm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw StreamError(fmt::format("cannot open '{}'", path.string()));
  if (pgm_token(in) != "P5") throw ParseError(fmt::format("'{}' is not a P5 PGM", path.string()), 0);
  const int w = std::stoi(pgm_token(in));
  const int h = std::stoi(pgm_token(in));
  const int maxval = std::stoi(pgm_token(in));
  if (w <= 0 || h <= 0 || maxval != 255) {
    throw ParseError(fmt::format("'{}': only 8-bit PGM is supported", path.string()), 0);
  }
  GrayImage img(w, h);
  in.read(reinterpret_cast<char*>(img.pixels().data()),
          static_cast<std::streamsize>(img.pixels().size()));
  if (!in) throw StreamError(fmt::format("'{}' is truncated", path.string()));
  return img;
}

void write_pgm(const std::filesystem::path& path, const GrayImage& image) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw StreamError(fmt::format("cannot create '{}'", path.string()));
  out << "P5\n" << image.width() << ' ' << image.height() << "\n255\n";
  out.write(reinterpret_cast<const char*>(image.pixels().data()),
            static_cast<std::streamsize>(image.pixels().size()));
}

PgmDirectoryReader::PgmDirectoryReader(const std::filesystem::path& dir) {
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".pgm") files_.push_back(entry.path());
  }
  // numeric order on the digits in the stem, so 2.pgm precedes 10.pgm
  auto key = [](const std::filesystem::path& p) {
    std::string digits;
    for (char c : p.stem().string()) {
      if (std::isdigit(static_cast<unsigned char>(c))) digits.push_back(c);
    }
    return std::make_pair(digits.size(), digits);
  };
  std::sort(files_.begin(), files_.end(),
            [&](const auto& a, const auto& b) { return key(a) < key(b); });
  if (files_.empty()) throw StreamError(fmt::format("no .pgm frames in '{}'", dir.string()));
  const GrayImage first = read_pgm(files_.front());
  width_ = first.width();
  height_ = first.height();
}

std::optional<GrayImage> PgmDirectoryReader::next() {
  if (pos_ >= files_.size()) return std::nullopt;
  GrayImage img = read_pgm(files_[pos_]);
  if (img.width() != width_ || img.height() != height_) {
    throw StreamError(fmt::format("frame {} changes size mid-video", pos_));
  }
  ++pos_;
  return img;
}

VectorFrameSource::VectorFrameSource(std::vector<GrayImage> frames) : frames_(std::move(frames)) {}

std::optional<GrayImage> VectorFrameSource::next() {
  if (pos_ >= frames_.size()) return std::nullopt;
  return frames_[pos_++];
}

std::unique_ptr<FrameSource> open_frame_source(const std::filesystem::path& path) {
  if (std::filesystem::is_directory(path)) return std::make_unique<PgmDirectoryReader>(path);
  return std::make_unique<PackedFrameReader>(path);
}

}  // namespace pollitrack
