#include "splitinfer/frames.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include "splitinfer/error.hpp"
#include "splitinfer/rng.hpp"

namespace splitinfer {

Tensor SyntheticFrame(size_t height, size_t width, uint64_t seed, size_t channels) {
  if (height == 0 || width == 0 || channels == 0) {
    throw Error(ErrorCode::kInvalidParameter, "frame dimensions must be positive");
  }
  SplitMix64 rng(seed);
  Tensor t({channels, height, width});
  const double scale = static_cast<double>(std::max(height, width));
  const double two_pi = 2.0 * std::numbers::pi;
  for (size_t c = 0; c < channels; ++c) {
    const double fx = rng.Uniform(0.5, 2.0);
    const double fy = rng.Uniform(0.5, 2.0);
    const double phase = rng.Uniform(0.0, 6.0);
    float* plane = t.data().data() + c * height * width;
    for (size_t i = 0; i < height; ++i) {
      const double y = static_cast<double>(i) / scale;
      for (size_t j = 0; j < width; ++j) {
        const double x = static_cast<double>(j) / scale;
        plane[i * width + j] =
            static_cast<float>(0.5 + 0.3 * std::sin(two_pi * (x * fx + y * fy) + phase));
      }
    }
  }
  std::vector<double> color(channels);
  for (int disc = 0; disc < 8; ++disc) {
    const double cx = rng.Uniform(), cy = rng.Uniform(), r = rng.Uniform(0.05, 0.25);
    for (double& v : color) v = rng.Uniform();
    for (size_t i = 0; i < height; ++i) {
      const double dy = static_cast<double>(i) / scale - cy;
      for (size_t j = 0; j < width; ++j) {
        const double dx = static_cast<double>(j) / scale - cx;
        if (dx * dx + dy * dy >= r * r) continue;
        for (size_t c = 0; c < channels; ++c) {
          t[(c * height + i) * width + j] = static_cast<float>(color[c]);
        }
      }
    }
  }
  for (float& v : t.vec()) {
    const double noisy = v + 0.005 * rng.Normal();
    v = static_cast<float>(std::clamp(std::round(noisy * 255.0), 0.0, 255.0) / 255.0);
  }
  return t;
}

namespace {

// Next whitespace-separated PPM header token, skipping '#' comments.
std::string HeaderToken(std::istream& in) {
  std::string tok;
  while (tok.empty()) {
    const int ch = in.get();
    if (ch == EOF) throw Error(ErrorCode::kParse, "truncated PPM header");
    if (ch == '#') {
      std::string skip;
      std::getline(in, skip);
    } else if (!std::isspace(ch)) {
      tok.push_back(static_cast<char>(ch));
      while (in.peek() != EOF && !std::isspace(in.peek())) tok.push_back(static_cast<char>(in.get()));
    }
  }
  return tok;
}

size_t HeaderNumber(std::istream& in, const std::filesystem::path& path) {
  const std::string tok = HeaderToken(in);
  size_t v = 0;
  for (char c : tok) {
    if (c < '0' || c > '9' || v > 1'000'000) {
      throw Error(ErrorCode::kParse, fmt::format("{}: bad PPM header field '{}'", path.string(), tok));
    }
    v = v * 10 + static_cast<size_t>(c - '0');
  }
  return v;
}

}  // namespace

Tensor ReadPpm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  if (HeaderToken(in) != "P6") {
    throw Error(ErrorCode::kParse, path.string() + ": only binary P6 PPM is supported");
  }
  const size_t w = HeaderNumber(in, path), h = HeaderNumber(in, path);
  const size_t maxval = HeaderNumber(in, path);
  if (w == 0 || h == 0 || maxval == 0 || maxval > 255) {
    throw Error(ErrorCode::kParse, path.string() + ": unsupported PPM geometry or maxval");
  }
  in.get();  // single whitespace before the raster
  std::vector<unsigned char> raster(w * h * 3);
  in.read(reinterpret_cast<char*>(raster.data()), static_cast<std::streamsize>(raster.size()));
  if (static_cast<size_t>(in.gcount()) != raster.size()) {
    throw Error(ErrorCode::kParse, path.string() + ": truncated PPM raster");
  }
  Tensor t({3, h, w});
  for (size_t i = 0; i < h * w; ++i) {
    for (size_t c = 0; c < 3; ++c) {
      t[c * h * w + i] = static_cast<float>(raster[i * 3 + c]) / static_cast<float>(maxval);
    }
  }
  return t;
}

void WritePpm(const Tensor& frame, const std::filesystem::path& path) {
  if (frame.rank() != 3 || frame.dim(0) != 3) {
    throw Error(ErrorCode::kShapeMismatch, "PPM output needs a [3,H,W] tensor");
  }
  const size_t h = frame.dim(1), w = frame.dim(2);
  std::string out = fmt::format("P6\n{} {}\n255\n", w, h);
  for (size_t i = 0; i < h * w; ++i) {
    for (size_t c = 0; c < 3; ++c) {
      const double v = std::clamp(static_cast<double>(frame[c * h * w + i]), 0.0, 1.0);
      out.push_back(static_cast<char>(static_cast<unsigned char>(std::lround(v * 255.0))));
    }
  }
  std::ofstream f(path, std::ios::binary);
  f << out;
  if (!f) throw Error(ErrorCode::kIo, "cannot write " + path.string());
}

Tensor CenterCrop(const Tensor& frame, size_t height, size_t width) {
  if (frame.rank() != 3 || frame.dim(1) < height || frame.dim(2) < width) {
    throw Error(ErrorCode::kShapeMismatch,
                fmt::format("cannot crop {} to {}x{}", ShapeString(frame.shape()), height, width));
  }
  const size_t c = frame.dim(0), h = frame.dim(1), w = frame.dim(2);
  const size_t top = (h - height) / 2, left = (w - width) / 2;
  Tensor out({c, height, width});
  for (size_t k = 0; k < c; ++k) {
    for (size_t i = 0; i < height; ++i) {
      const float* src = frame.data().data() + (k * h + top + i) * w + left;
      std::copy(src, src + width, out.data().data() + (k * height + i) * width);
    }
  }
  return out;
}

std::vector<Tensor> LoadFrames(std::string_view source, size_t height, size_t width,
                               uint64_t seed) {
  constexpr std::string_view kSynthetic = "synthetic:";
  std::vector<Tensor> frames;
  if (source.starts_with(kSynthetic)) {
    const std::string count(source.substr(kSynthetic.size()));
    size_t n = 0;
    std::istringstream ss(count);
    if (count.empty() || !(ss >> n) || !ss.eof() || n == 0) {
      throw Error(ErrorCode::kInvalidParameter,
                  fmt::format("'{}' needs a positive frame count", source));
    }
    for (size_t i = 0; i < n; ++i) frames.push_back(SyntheticFrame(height, width, MixSeed(seed, i)));
    return frames;
  }
  const std::filesystem::path dir{std::string(source)};
  if (!std::filesystem::is_directory(dir)) {
    throw Error(ErrorCode::kIo, fmt::format("frame source '{}' is neither synthetic:N nor a directory", source));
  }
  std::vector<std::filesystem::path> files;
  for (const auto& e : std::filesystem::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ".ppm") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw Error(ErrorCode::kIo, "no .ppm files in " + dir.string());
  for (const auto& f : files) frames.push_back(CenterCrop(ReadPpm(f), height, width));
  return frames;
}

}  // namespace splitinfer
