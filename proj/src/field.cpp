#include "hyperpredict/field.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace hyperpredict {

namespace {

void require_same_shape(Shape a, Shape b, const char* what) {
    if (a != b) {
        throw ConfigError(std::string(what) + ": shape mismatch (" + std::to_string(a.nx) + "x" +
                          std::to_string(a.ny) + " vs " + std::to_string(b.nx) + "x" +
                          std::to_string(b.ny) + ")");
    }
}

// Clamped position split into a base index and fractional weight.
struct Axis {
    int i0;
    int i1;
    double t;
    bool clamped;
};

Axis locate(double c, int n) {
    if (c <= 0.0) return {0, 0, 0.0, true};
    const double hi = static_cast<double>(n - 1);
    if (c >= hi) return {n - 1, n - 1, 0.0, true};
    const int i0 = static_cast<int>(std::floor(c));
    return {i0, i0 + 1, c - i0, false};
}

std::vector<double> gaussian_kernel(double sigma) {
    const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
    std::vector<double> k(2 * radius + 1);
    double sum = 0.0;
    for (int i = -radius; i <= radius; ++i) {
        const double v = std::exp(-0.5 * (i * i) / (sigma * sigma));
        k[i + radius] = v;
        sum += v;
    }
    for (double& v : k) v /= sum;
    return k;
}

}  // namespace

void check_shape(Shape shape) {
    if (shape.nx < kMinAxis || shape.ny < kMinAxis) {
        throw ConfigError("grid axes must have at least " + std::to_string(kMinAxis) + " cells");
    }
}

double sample_linear(const ScalarGrid& image, double x, double y, Vec2* grad) {
    const Axis ax = locate(x, image.nx());
    const Axis ay = locate(y, image.ny());
    const double v00 = image(ax.i0, ay.i0);
    const double v10 = image(ax.i1, ay.i0);
    const double v01 = image(ax.i0, ay.i1);
    const double v11 = image(ax.i1, ay.i1);
    const double top = v00 + ax.t * (v10 - v00);
    const double bottom = v01 + ax.t * (v11 - v01);
    if (grad != nullptr) {
        grad->x = ax.clamped ? 0.0 : (1.0 - ay.t) * (v10 - v00) + ay.t * (v11 - v01);
        grad->y = ay.clamped ? 0.0 : bottom - top;
    }
    return top + ay.t * (bottom - top);
}

template <class T>
T sample_nearest(const Grid<T>& grid, double x, double y) {
    const long ix = std::clamp(std::lround(x), 0L, static_cast<long>(grid.nx() - 1));
    const long iy = std::clamp(std::lround(y), 0L, static_cast<long>(grid.ny() - 1));
    return grid(static_cast<int>(ix), static_cast<int>(iy));
}

template double sample_nearest(const Grid<double>&, double, double);
template std::uint32_t sample_nearest(const Grid<std::uint32_t>&, double, double);

ScalarGrid warp(const ScalarGrid& image, const DisplacementField& field,
                Interpolation interpolation) {
    require_same_shape(image.shape(), field.shape(), "warp");
    if (!all_finite(field)) throw NumericalError("warp: displacement field has non-finite values");
    ScalarGrid out(image.shape());
    for (int y = 0; y < image.ny(); ++y) {
        for (int x = 0; x < image.nx(); ++x) {
            const Vec2 u = field(x, y);
            const double sx = x + u.x;
            const double sy = y + u.y;
            out(x, y) = interpolation == Interpolation::linear ? sample_linear(image, sx, sy)
                                                               : sample_nearest(image, sx, sy);
        }
    }
    return out;
}

LabelGrid warp_labels(const LabelGrid& labels, const DisplacementField& field) {
    require_same_shape(labels.shape(), field.shape(), "warp_labels");
    if (!all_finite(field)) {
        throw NumericalError("warp_labels: displacement field has non-finite values");
    }
    LabelGrid out(labels.shape());
    for (int y = 0; y < labels.ny(); ++y) {
        for (int x = 0; x < labels.nx(); ++x) {
            const Vec2 u = field(x, y);
            out(x, y) = sample_nearest(labels, x + u.x, y + u.y);
        }
    }
    return out;
}

JacobianGrid jacobian_determinant(const DisplacementField& field) {
    const int nx = field.nx();
    const int ny = field.ny();
    JacobianGrid jac(field.shape());
    for (int y = 0; y < ny; ++y) {
        const int y0 = y + 1 < ny ? y : y - 1;
        for (int x = 0; x < nx; ++x) {
            const int x0 = x + 1 < nx ? x : x - 1;
            const Vec2 dx = field(x0 + 1, y) - field(x0, y);
            const Vec2 dy = field(x, y0 + 1) - field(x, y0);
            // J = [[1 + dux/dx, dux/dy], [duy/dx, 1 + duy/dy]]
            jac(x, y) = (1.0 + dx.x) * (1.0 + dy.y) - dy.x * dx.y;
        }
    }
    return jac;
}

FoldCount count_folded(const JacobianGrid& jac, double epsilon) {
    FoldCount fc;
    for (const double d : jac) {
        if (d < -epsilon) ++fc.count;
    }
    fc.percent = jac.empty() ? 0.0
                             : 100.0 * static_cast<double>(fc.count) / static_cast<double>(jac.size());
    return fc;
}

VectorGrid spatial_gradient(const ScalarGrid& image) {
    const int nx = image.nx();
    const int ny = image.ny();
    VectorGrid g(image.shape());
    for (int y = 0; y < ny; ++y) {
        for (int x = 0; x < nx; ++x) {
            double gx;
            if (x == 0) {
                gx = image(1, y) - image(0, y);
            } else if (x == nx - 1) {
                gx = image(x, y) - image(x - 1, y);
            } else {
                gx = 0.5 * (image(x + 1, y) - image(x - 1, y));
            }
            double gy;
            if (y == 0) {
                gy = image(x, 1) - image(x, 0);
            } else if (y == ny - 1) {
                gy = image(x, y) - image(x, y - 1);
            } else {
                gy = 0.5 * (image(x, y + 1) - image(x, y - 1));
            }
            g(x, y) = {gx, gy};
        }
    }
    return g;
}

ScalarGrid gradient_magnitude(const ScalarGrid& image) {
    const VectorGrid g = spatial_gradient(image);
    ScalarGrid out(image.shape());
    for (std::size_t i = 0; i < g.size(); ++i) out[i] = std::hypot(g[i].x, g[i].y);
    return out;
}

ScalarGrid gaussian_smooth(const ScalarGrid& image, double sigma) {
    if (sigma <= 0.0) return image;
    const std::vector<double> k = gaussian_kernel(sigma);
    const int r = static_cast<int>(k.size() / 2);
    const int nx = image.nx();
    const int ny = image.ny();
    ScalarGrid tmp(image.shape());
    for (int y = 0; y < ny; ++y) {
        for (int x = 0; x < nx; ++x) {
            double acc = 0.0;
            for (int i = -r; i <= r; ++i) acc += k[i + r] * image(std::clamp(x + i, 0, nx - 1), y);
            tmp(x, y) = acc;
        }
    }
    ScalarGrid out(image.shape());
    for (int y = 0; y < ny; ++y) {
        for (int x = 0; x < nx; ++x) {
            double acc = 0.0;
            for (int i = -r; i <= r; ++i) acc += k[i + r] * tmp(x, std::clamp(y + i, 0, ny - 1));
            out(x, y) = acc;
        }
    }
    return out;
}

ScalarGrid downsample2(const ScalarGrid& image) {
    const Shape s{(image.nx() + 1) / 2, (image.ny() + 1) / 2};
    ScalarGrid out(s);
    for (int y = 0; y < s.ny; ++y) {
        for (int x = 0; x < s.nx; ++x) {
            double acc = 0.0;
            int n = 0;
            for (int dy = 0; dy < 2; ++dy) {
                for (int dx = 0; dx < 2; ++dx) {
                    const int fx = 2 * x + dx;
                    const int fy = 2 * y + dy;
                    if (fx < image.nx() && fy < image.ny()) {
                        acc += image(fx, fy);
                        ++n;
                    }
                }
            }
            out(x, y) = acc / n;
        }
    }
    return out;
}

DisplacementField upsample_field(const DisplacementField& coarse, Shape target, double factor) {
    ScalarGrid cx(coarse.shape());
    ScalarGrid cy(coarse.shape());
    for (std::size_t i = 0; i < coarse.size(); ++i) {
        cx[i] = coarse[i].x;
        cy[i] = coarse[i].y;
    }
    DisplacementField out(target);
    for (int y = 0; y < target.ny; ++y) {
        // Cell centres: fine p maps to coarse (p + 0.5) / factor - 0.5.
        const double sy = (y + 0.5) / factor - 0.5;
        for (int x = 0; x < target.nx; ++x) {
            const double sx = (x + 0.5) / factor - 0.5;
            out(x, y) = {factor * sample_linear(cx, sx, sy), factor * sample_linear(cy, sx, sy)};
        }
    }
    return out;
}

double max_displacement(const DisplacementField& field) {
    double m = 0.0;
    for (const Vec2& v : field) m = std::max(m, std::hypot(v.x, v.y));
    return m;
}

bool all_finite(const ScalarGrid& grid) {
    return std::all_of(grid.begin(), grid.end(), [](double v) { return std::isfinite(v); });
}

bool all_finite(const DisplacementField& field) {
    return std::all_of(field.begin(), field.end(),
                       [](const Vec2& v) { return std::isfinite(v.x) && std::isfinite(v.y); });
}

}  // namespace hyperpredict
