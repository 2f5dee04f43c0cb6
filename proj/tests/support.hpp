#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include <doctest.h>

#include "splitinfer/error.hpp"
#include "splitinfer/profile.hpp"
#include "splitinfer/rng.hpp"
#include "splitinfer/tensor.hpp"

namespace splitinfer::testing {

inline std::string DataPath(const std::string& name) {
  return std::string(SPLITINFER_DATA_DIR) + "/" + name;
}

inline const ModelProfile& ShippedProfile() {
  static const ModelProfile p = LoadProfile(DataPath("profile.json"));
  return p;
}

inline Tensor UniformTensor(Shape shape, uint64_t seed, double lo = -1.0, double hi = 1.0) {
  SplitMix64 rng(seed);
  Tensor t(std::move(shape));
  for (float& v : t.vec()) v = static_cast<float>(rng.Uniform(lo, hi));
  return t;
}

inline double RelativeLinf(const Tensor& got, const Tensor& want) {
  double num = 0.0, den = 0.0;
  for (size_t i = 0; i < want.size(); ++i) {
    num = std::max(num, std::abs(static_cast<double>(got[i]) - want[i]));
    den = std::max(den, std::abs(static_cast<double>(want[i])));
  }
  return den == 0.0 ? num : num / den;
}

// Code of the splitinfer::Error thrown by `fn`; fails the test if none is.
inline splitinfer::ErrorCode CodeOf(auto&& fn) {
  try {
    fn();
  } catch (const splitinfer::Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return splitinfer::ErrorCode::kIo;
}

}  // namespace splitinfer::testing
