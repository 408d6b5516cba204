#pragma once

#include <filesystem>
#include <random>
#include <string>

#include "doctest.h"
#include "errors.hpp"
#include "oracles.hpp"
#include "tensor.hpp"

namespace testutil {

inline advblur::Image random_image(int c, int h, int w, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  advblur::Image x(c, h, w);
  for (double& v : x.data) v = u(rng);
  return x;
}

inline oracle::Planes planes(const advblur::Image& x) { return {x.c, x.h, x.w, x.data}; }

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path temp_dir(const std::string& name) {
  const auto p = std::filesystem::temp_directory_path() / ("advblur-test-" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

template <class F>
advblur::ErrorKind error_kind(F&& f) {
  try {
    f();
  } catch (const advblur::Error& e) {
    return e.kind();
  }
  FAIL("expected an advblur::Error");
  return advblur::ErrorKind::validation;
}

}  // namespace testutil
