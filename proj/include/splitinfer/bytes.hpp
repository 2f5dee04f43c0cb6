#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <span>
#include <string>
#include <vector>

#include "splitinfer/error.hpp"

namespace splitinfer {

static_assert(std::endian::native == std::endian::little,
              "wire encoding assumes a little-endian host");

// Appends little-endian fixed-width fields to a byte vector.
class ByteWriter {
 public:
  explicit ByteWriter(std::vector<uint8_t>& out) : out_(out) {}

  template <typename T>
  void Put(T value) {
    const auto* p = reinterpret_cast<const uint8_t*>(&value);
    out_.insert(out_.end(), p, p + sizeof(T));
  }
  void PutBytes(std::span<const uint8_t> bytes) {
    out_.insert(out_.end(), bytes.begin(), bytes.end());
  }
  void PutString(std::string_view s) {
    out_.insert(out_.end(), s.begin(), s.end());
  }

 private:
  std::vector<uint8_t>& out_;
};

// Bounds-checked little-endian reader; running past the end throws `code`.
class ByteReader {
 public:
  ByteReader(std::span<const uint8_t> in, ErrorCode code) : in_(in), code_(code) {}

  template <typename T>
  T Get() {
    Require(sizeof(T));
    T value;
    std::memcpy(&value, in_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return value;
  }
  std::span<const uint8_t> GetBytes(size_t n) {
    Require(n);
    auto s = in_.subspan(pos_, n);
    pos_ += n;
    return s;
  }
  size_t remaining() const { return in_.size() - pos_; }
  size_t position() const { return pos_; }

 private:
  void Require(size_t n) const {
    if (in_.size() - pos_ < n) {
      throw Error(code_, "need " + std::to_string(n) + " bytes at offset " +
                             std::to_string(pos_) + ", have " +
                             std::to_string(in_.size() - pos_));
    }
  }

  std::span<const uint8_t> in_;
  ErrorCode code_;
  size_t pos_ = 0;
};

uint32_t Crc32(std::span<const uint8_t> bytes);

}  // namespace splitinfer
