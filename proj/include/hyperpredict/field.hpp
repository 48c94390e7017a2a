#pragma once

// Dense 2D grid numerics: interpolation, warping, finite differences,
// Jacobian determinants and folding counts.
//
// Grids are row-major with x the fast axis: index = y * nx + x. Displacements
// are in cell units; a displacement field u defines phi(p) = p + u(p).

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "hyperpredict/errors.hpp"

namespace hyperpredict {

struct Shape {
    int nx = 0;
    int ny = 0;

    [[nodiscard]] std::size_t size() const {
        return static_cast<std::size_t>(nx) * static_cast<std::size_t>(ny);
    }
    [[nodiscard]] std::size_t index(int x, int y) const {
        return static_cast<std::size_t>(y) * static_cast<std::size_t>(nx) +
               static_cast<std::size_t>(x);
    }
    friend bool operator==(const Shape&, const Shape&) = default;
};

// Smallest accepted extent on any axis.
inline constexpr int kMinAxis = 4;

void check_shape(Shape shape);

struct Vec2 {
    double x = 0.0;
    double y = 0.0;

    friend bool operator==(const Vec2&, const Vec2&) = default;
    Vec2& operator+=(const Vec2& o) {
        x += o.x;
        y += o.y;
        return *this;
    }
    friend Vec2 operator+(Vec2 a, const Vec2& b) { return a += b; }
    friend Vec2 operator-(const Vec2& a, const Vec2& b) { return {a.x - b.x, a.y - b.y}; }
    friend Vec2 operator*(double s, const Vec2& v) { return {s * v.x, s * v.y}; }
};

template <class T>
class Grid {
public:
    using value_type = T;

    Grid() = default;
    explicit Grid(Shape shape, T fill = T{}) : shape_(shape), values_(shape.size(), fill) {}
    Grid(Shape shape, std::vector<T> values) : shape_(shape), values_(std::move(values)) {
        if (values_.size() != shape_.size()) {
            throw ConfigError("grid value count does not match shape");
        }
    }

    [[nodiscard]] Shape shape() const { return shape_; }
    [[nodiscard]] int nx() const { return shape_.nx; }
    [[nodiscard]] int ny() const { return shape_.ny; }
    [[nodiscard]] std::size_t size() const { return values_.size(); }
    [[nodiscard]] bool empty() const { return values_.empty(); }

    T& operator()(int x, int y) { return values_[shape_.index(x, y)]; }
    const T& operator()(int x, int y) const { return values_[shape_.index(x, y)]; }
    T& operator[](std::size_t i) { return values_[i]; }
    const T& operator[](std::size_t i) const { return values_[i]; }

    [[nodiscard]] std::span<T> values() { return values_; }
    [[nodiscard]] std::span<const T> values() const { return values_; }

    auto begin() { return values_.begin(); }
    auto end() { return values_.end(); }
    auto begin() const { return values_.begin(); }
    auto end() const { return values_.end(); }

    friend bool operator==(const Grid&, const Grid&) = default;

private:
    Shape shape_;
    std::vector<T> values_;
};

using ScalarGrid = Grid<double>;
using LabelGrid = Grid<std::uint32_t>;
using JacobianGrid = Grid<double>;
using DisplacementField = Grid<Vec2>;
using VectorGrid = Grid<Vec2>;

enum class Interpolation { linear, nearest };

struct FoldCount {
    std::size_t count = 0;
    double percent = 0.0;
};

// Bilinear sample with border clamping. When `grad` is non-null it receives
// the exact derivative of the sample w.r.t. (x, y); clamped axes have zero
// derivative.
double sample_linear(const ScalarGrid& image, double x, double y, Vec2* grad = nullptr);

// Nearest-neighbour sample with border clamping.
template <class T>
T sample_nearest(const Grid<T>& grid, double x, double y);

ScalarGrid warp(const ScalarGrid& image, const DisplacementField& field,
                Interpolation interpolation = Interpolation::linear);

LabelGrid warp_labels(const LabelGrid& labels, const DisplacementField& field);

// det(I + grad u) per cell. Forward differences, backward on the last cell
// of each axis.
JacobianGrid jacobian_determinant(const DisplacementField& field);

// Cells with determinant < -epsilon count as folded.
FoldCount count_folded(const JacobianGrid& jac, double epsilon = 0.0);

// Central differences in the interior, one-sided at the borders.
VectorGrid spatial_gradient(const ScalarGrid& image);

ScalarGrid gradient_magnitude(const ScalarGrid& image);

// Separable Gaussian smoothing with clamped borders; sigma <= 0 is a copy.
ScalarGrid gaussian_smooth(const ScalarGrid& image, double sigma);

// Mean over 2x2 blocks; odd trailing rows/columns average what is present.
ScalarGrid downsample2(const ScalarGrid& image);

// Resamples a field defined on a grid `factor` times coarser onto `target`,
// scaling displacement vectors by `factor`.
DisplacementField upsample_field(const DisplacementField& coarse, Shape target, double factor);

double max_displacement(const DisplacementField& field);

bool all_finite(const ScalarGrid& grid);
bool all_finite(const DisplacementField& field);

}  // namespace hyperpredict
