#ifndef HOPSIM_TYPES_HPP
#define HOPSIM_TYPES_HPP

#include <array>
#include <cmath>
#include <cstddef>
#include <string_view>

namespace hopsim {

template <std::size_t D>
using Vec = std::array<double, D>;

using Mat2 = std::array<std::array<double, 2>, 2>;

/// Eigenvalue surface label. The numeric value is the sign j used in the hop rule.
enum class Level : int { minus = -1, plus = +1 };

constexpr int sign(Level level) noexcept { return static_cast<int>(level); }
constexpr Level flipped(Level level) noexcept {
    return level == Level::plus ? Level::minus : Level::plus;
}
constexpr std::string_view to_string(Level level) noexcept {
    return level == Level::plus ? "plus" : "minus";
}

template <std::size_t D>
constexpr double dot(const Vec<D>& a, const Vec<D>& b) noexcept {
    double s = 0.0;
    for (std::size_t i = 0; i < D; ++i) s += a[i] * b[i];
    return s;
}

template <std::size_t D>
constexpr double norm2(const Vec<D>& a) noexcept {
    return dot(a, a);
}

template <std::size_t D>
double norm(const Vec<D>& a) noexcept {
    return std::sqrt(norm2(a));
}

template <std::size_t D>
constexpr Vec<D> axpy(double a, const Vec<D>& x, const Vec<D>& y) noexcept {
    Vec<D> r{};
    for (std::size_t i = 0; i < D; ++i) r[i] = a * x[i] + y[i];
    return r;
}

template <std::size_t D>
constexpr Vec<D> scaled(double a, const Vec<D>& x) noexcept {
    Vec<D> r{};
    for (std::size_t i = 0; i < D; ++i) r[i] = a * x[i];
    return r;
}

constexpr Mat2 operator+(const Mat2& a, const Mat2& b) noexcept {
    return {{{a[0][0] + b[0][0], a[0][1] + b[0][1]}, {a[1][0] + b[1][0], a[1][1] + b[1][1]}}};
}

constexpr Mat2 operator*(const Mat2& a, const Mat2& b) noexcept {
    Mat2 r{};
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) r[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
    return r;
}

}  // namespace hopsim

#endif
