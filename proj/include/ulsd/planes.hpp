#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "ulsd/error.hpp"

namespace ulsd {

/// Dense channel-major C x H x W array.
template <typename T>
class Planes {
 public:
  Planes() = default;
  Planes(std::size_t channels, std::size_t height, std::size_t width, T fill = T{})
      : channels_(channels), height_(height), width_(width), data_(channels * height * width, fill) {}
  Planes(std::size_t channels, std::size_t height, std::size_t width, std::vector<T> data)
      : channels_(channels), height_(height), width_(width), data_(std::move(data)) {
    detail::require(data_.size() == channels * height * width,
                    "plane data size " + std::to_string(data_.size()) + " does not match shape");
  }

  std::size_t channels() const { return channels_; }
  std::size_t height() const { return height_; }
  std::size_t width() const { return width_; }
  std::size_t plane_size() const { return height_ * width_; }
  std::size_t size() const { return data_.size(); }

  T& operator()(std::size_t c, std::size_t row, std::size_t col) {
    return data_[(c * height_ + row) * width_ + col];
  }
  const T& operator()(std::size_t c, std::size_t row, std::size_t col) const {
    return data_[(c * height_ + row) * width_ + col];
  }

  std::span<T> plane(std::size_t c) { return {data_.data() + c * plane_size(), plane_size()}; }
  std::span<const T> plane(std::size_t c) const {
    return {data_.data() + c * plane_size(), plane_size()};
  }

  std::vector<T>& data() { return data_; }
  const std::vector<T>& data() const { return data_; }

  bool same_shape(const Planes& o) const {
    return channels_ == o.channels_ && height_ == o.height_ && width_ == o.width_;
  }

  friend bool operator==(const Planes&, const Planes&) = default;

 private:
  std::size_t channels_ = 0;
  std::size_t height_ = 0;
  std::size_t width_ = 0;
  std::vector<T> data_;
};

}  // namespace ulsd
