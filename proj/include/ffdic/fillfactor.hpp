#pragma once

#include <array>
#include <cctype>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

#include "ffdic/image.hpp"
#include "ffdic/parallel.hpp"

namespace ffdic {

/// The three 2x reduction schemes. Linear fill factors are per axis; the
/// areal fill factor is their product.
enum class FillFactorScheme { kFF100, kFF50, kFF25 };

inline constexpr std::array<FillFactorScheme, 3> kAllSchemes = {
    FillFactorScheme::kFF100, FillFactorScheme::kFF50, FillFactorScheme::kFF25};

struct LinearFillFactor {
  double horizontal;
  double vertical;
  double areal() const noexcept { return horizontal * vertical; }
};

constexpr LinearFillFactor linear_fill_factor(FillFactorScheme s) noexcept {
  switch (s) {
    case FillFactorScheme::kFF100: return {1.0, 1.0};
    case FillFactorScheme::kFF50: return {0.5, 1.0};
    case FillFactorScheme::kFF25: return {0.5, 0.5};
  }
  return {1.0, 1.0};
}

constexpr std::string_view to_string(FillFactorScheme s) noexcept {
  switch (s) {
    case FillFactorScheme::kFF100: return "ff100";
    case FillFactorScheme::kFF50: return "ff50";
    case FillFactorScheme::kFF25: return "ff25";
  }
  return "?";
}

inline std::optional<FillFactorScheme> parse_scheme(std::string_view name) {
  std::string lower(name);
  for (char& c : lower) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  for (auto s : kAllSchemes) {
    if (lower == to_string(s)) return s;
  }
  return std::nullopt;
}

namespace detail {

inline void require_even(const Image& img, std::string_view scheme) {
  if (img.width() % 2 != 0 || img.height() % 2 != 0) {
    throw DimensionError(std::string(scheme) + " resampling needs even dimensions, got " +
                         std::to_string(img.width()) + "x" + std::to_string(img.height()));
  }
}

}  // namespace detail

/// 2x2 binning: every output pixel is the mean of its four source pixels.
inline Image resample_ff100(const Image& img) {
  detail::require_even(img, "ff100");
  Image out(img.width() / 2, img.height() / 2);
  parallel_for(static_cast<std::size_t>(out.height()), [&](std::size_t r) {
    const int i = static_cast<int>(r);
    auto top = img.row(2 * i);
    auto bottom = img.row(2 * i + 1);
    auto dst = out.row(i);
    for (int j = 0; j < out.width(); ++j) {
      long double sum = static_cast<long double>(top[2 * j]) + top[2 * j + 1] + bottom[2 * j] +
                        bottom[2 * j + 1];
      dst[j] = static_cast<double>(sum / 4.0L);
    }
  });
  return out;
}

/// Row-pair binning with every second column dropped (0-based even columns kept).
inline Image resample_ff50(const Image& img) {
  detail::require_even(img, "ff50");
  Image out(img.width() / 2, img.height() / 2);
  parallel_for(static_cast<std::size_t>(out.height()), [&](std::size_t r) {
    const int i = static_cast<int>(r);
    auto top = img.row(2 * i);
    auto bottom = img.row(2 * i + 1);
    auto dst = out.row(i);
    for (int j = 0; j < out.width(); ++j) {
      long double sum = static_cast<long double>(top[2 * j]) + bottom[2 * j];
      dst[j] = static_cast<double>(sum / 2.0L);
    }
  });
  return out;
}

/// Pure subsampling on both axes (0-based even rows and columns kept).
inline Image resample_ff25(const Image& img) {
  detail::require_even(img, "ff25");
  Image out(img.width() / 2, img.height() / 2);
  for (int i = 0; i < out.height(); ++i) {
    auto src = img.row(2 * i);
    auto dst = out.row(i);
    for (int j = 0; j < out.width(); ++j) dst[j] = src[2 * j];
  }
  return out;
}

inline Image resample(const Image& img, FillFactorScheme scheme) {
  switch (scheme) {
    case FillFactorScheme::kFF100: return resample_ff100(img);
    case FillFactorScheme::kFF50: return resample_ff50(img);
    case FillFactorScheme::kFF25: return resample_ff25(img);
  }
  throw std::invalid_argument("unknown fill factor scheme");
}

}  // namespace ffdic
