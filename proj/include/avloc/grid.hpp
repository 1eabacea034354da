// Copyright 2026 The avloc Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstddef>
#include <vector>

namespace avloc {

/// Dense channel-major, row-major real grid (channels x height x width).
struct Grid {
  int channels = 0;
  int height = 0;
  int width = 0;
  std::vector<double> values;

  Grid() = default;
  Grid(int c, int h, int w, double fill = 0.0)
      : channels(c), height(h), width(w),
        values(static_cast<std::size_t>(c) * h * w, fill) {}

  std::size_t index(int c, int y, int x) const {
    return (static_cast<std::size_t>(c) * height + y) * width + x;
  }
  double& at(int c, int y, int x) { return values[index(c, y, x)]; }
  double at(int c, int y, int x) const { return values[index(c, y, x)]; }

  std::size_t size() const { return values.size(); }
  bool same_shape(const Grid& o) const {
    return channels == o.channels && height == o.height && width == o.width;
  }

  friend bool operator==(const Grid&, const Grid&) = default;
};

/// Single-channel h x w map, row-major.
struct Map2D {
  int height = 0;
  int width = 0;
  std::vector<double> values;

  Map2D() = default;
  Map2D(int h, int w, double fill = 0.0)
      : height(h), width(w), values(static_cast<std::size_t>(h) * w, fill) {}

  double& at(int y, int x) { return values[static_cast<std::size_t>(y) * width + x]; }
  double at(int y, int x) const { return values[static_cast<std::size_t>(y) * width + x]; }
  std::size_t size() const { return values.size(); }

  friend bool operator==(const Map2D&, const Map2D&) = default;
};

}  // namespace avloc
