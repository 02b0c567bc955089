#include "hyperstab/geometry.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <random>
#include <stdexcept>

namespace hyperstab {

MetricFrame MetricFrame::from_basis(const Mat2& basis) {
    const double det = basis.determinant();
    if (!std::isfinite(det) || std::abs(det) < 1e-12) {
        throw std::invalid_argument("metric frame basis is singular");
    }
    MetricFrame f;
    f.basis_ = basis;
    f.inverse_ = basis.inverse();
    return f;
}

double MetricFrame::operator_norm(const Mat2& m) const {
    const Mat2 in_frame = inverse_ * m * basis_;
    Eigen::JacobiSVD<Mat2> svd(in_frame);
    return svd.singularValues()(0);
}

Grid::Grid(int resolution, ManifoldKind kind)
    : resolution_(resolution), kind_(kind) {
    if (resolution < 4 || (resolution & (resolution - 1)) != 0) {
        throw std::invalid_argument("grid resolution must be a power of two >= 4");
    }
    size_ = kind == ManifoldKind::Circle
                ? static_cast<std::size_t>(resolution)
                : static_cast<std::size_t>(resolution) * static_cast<std::size_t>(resolution);
}

Point Grid::point(std::size_t index) const {
    const auto n = static_cast<std::size_t>(resolution_);
    Point p;
    p.coords(0) = static_cast<double>(index % n) / resolution_;
    p.coords(1) = kind_ == ManifoldKind::Circle ? 0.0 : static_cast<double>(index / n) / resolution_;
    return p;
}

std::size_t Grid::index(int i1, int i2) const {
    const int n = resolution_;
    i1 = ((i1 % n) + n) % n;
    if (kind_ == ManifoldKind::Circle) return static_cast<std::size_t>(i1);
    i2 = ((i2 % n) + n) % n;
    return static_cast<std::size_t>(i1) + static_cast<std::size_t>(n) * static_cast<std::size_t>(i2);
}

Vec2 wrap(const Vec2& x, ManifoldKind kind) {
    Vec2 r = Vec2::Zero();
    for (int k = 0; k < dimension(kind); ++k) {
        double v = x(k) - std::floor(x(k));
        if (v >= 1.0) v -= 1.0;  // floor rounding for tiny negatives
        r(k) = v;
    }
    return r;
}

Vec2 min_lift(const Vec2& d, ManifoldKind kind) {
    Vec2 r = Vec2::Zero();
    for (int k = 0; k < dimension(kind); ++k) {
        r(k) = d(k) - std::floor(d(k) + 0.5);
    }
    return r;
}

Point exp_point(const Point& x, const TangentVector& v, ManifoldKind kind) {
    for (int k = 0; k < dimension(kind); ++k) {
        if (!(std::abs(v.components(k)) < 0.5)) {
            throw std::domain_error("exp_point: tangent vector leaves the chart (|v|_inf >= 1/2)");
        }
    }
    return Point{wrap(x.coords + v.components, kind)};
}

TangentVector log_point(const Point& x, const Point& y, ManifoldKind kind) {
    const Vec2 lift = min_lift(y.coords - x.coords, kind);
    for (int k = 0; k < dimension(kind); ++k) {
        if (std::abs(lift(k)) >= 0.5 - 1e-12) {
            throw std::domain_error("log_point: antipodal points have no unique minimal lift");
        }
    }
    return TangentVector{lift};
}

double dist(const Point& x, const Point& y, const MetricFrame& frame, ManifoldKind kind) {
    const Vec2 d = min_lift(y.coords - x.coords, kind);
    double best = frame.norm(d);
    // A skewed frame can make a neighbouring lattice translate shorter.
    if (kind == ManifoldKind::Circle) {
        for (int k : {-1, 1}) best = std::min(best, frame.norm(d + Vec2(k, 0.0)));
    } else {
        for (int a = -1; a <= 1; ++a) {
            for (int b = -1; b <= 1; ++b) {
                if (a == 0 && b == 0) continue;
                best = std::min(best, frame.norm(d + Vec2(a, b)));
            }
        }
    }
    return best;
}

double diameter(const MetricFrame& frame, ManifoldKind kind) {
    // The frame norm is convex, so the sup over the cube of minimal lifts sits at a corner.
    if (kind == ManifoldKind::Circle) return frame.norm(Vec2(0.5, 0.0));
    return std::max(frame.norm(Vec2(0.5, 0.5)), frame.norm(Vec2(0.5, -0.5)));
}

DiscreteVectorField::DiscreteVectorField(Grid g, MetricFrame f)
    : grid(g), frame(f), values(g.size(), Vec2::Zero()) {}

DiscreteVectorField::DiscreteVectorField(Grid g, MetricFrame f, std::vector<Vec2> v)
    : grid(g), frame(f), values(std::move(v)) {
    if (values.size() != grid.size()) {
        throw std::invalid_argument("vector field value count does not match grid size");
    }
    for (const auto& x : values) {
        if (!std::isfinite(x(0)) || !std::isfinite(x(1))) {
            throw std::invalid_argument("vector field has non-finite components");
        }
    }
}

double DiscreteVectorField::sup_norm() const {
    double m = 0.0;
    for (const auto& v : values) m = std::max(m, frame.norm(v));
    return m;
}

namespace {

void require_same_grid(const DiscreteVectorField& a, const DiscreteVectorField& b) {
    if (!(a.grid == b.grid)) throw std::invalid_argument("vector fields live on different grids");
}

}  // namespace

DiscreteVectorField& DiscreteVectorField::operator+=(const DiscreteVectorField& other) {
    require_same_grid(*this, other);
    for (std::size_t i = 0; i < values.size(); ++i) values[i] += other.values[i];
    return *this;
}

DiscreteVectorField& DiscreteVectorField::operator-=(const DiscreteVectorField& other) {
    require_same_grid(*this, other);
    for (std::size_t i = 0; i < values.size(); ++i) values[i] -= other.values[i];
    return *this;
}

DiscreteVectorField& DiscreteVectorField::operator*=(double s) {
    for (auto& v : values) v *= s;
    return *this;
}

DiscreteVectorField operator+(DiscreteVectorField a, const DiscreteVectorField& b) { return a += b; }
DiscreteVectorField operator-(DiscreteVectorField a, const DiscreteVectorField& b) { return a -= b; }
DiscreteVectorField operator*(double s, DiscreteVectorField a) { return a *= s; }

namespace {

// Catmull-Rom weights for taps at offsets -1, 0, 1, 2.
std::array<double, 4> catmull_rom(double t) {
    const double t2 = t * t;
    const double t3 = t2 * t;
    return {0.5 * (-t3 + 2.0 * t2 - t),
            0.5 * (3.0 * t3 - 5.0 * t2 + 2.0),
            0.5 * (-3.0 * t3 + 4.0 * t2 + t),
            0.5 * (t3 - t2)};
}

struct Stencil {
    std::array<int, 4> idx;
    std::array<double, 4> w;
};

Stencil stencil(double coord, int n) {
    const double u = (coord - std::floor(coord)) * n;
    int base = static_cast<int>(std::floor(u));
    double t = u - base;
    if (base >= n) {  // u rounded up to n
        base -= n;
    }
    Stencil s;
    s.w = catmull_rom(t);
    for (int k = 0; k < 4; ++k) s.idx[k] = ((base - 1 + k) % n + n) % n;
    return s;
}

template <typename T>
T interpolate_impl(const Grid& grid, std::span<const T> values, const Point& x, T zero) {
    const int n = grid.resolution();
    const Stencil sx = stencil(x.coords(0), n);
    if (grid.kind() == ManifoldKind::Circle) {
        T acc = zero;
        for (int a = 0; a < 4; ++a) {
            if (sx.w[a] != 0.0) acc += sx.w[a] * values[static_cast<std::size_t>(sx.idx[a])];
        }
        return acc;
    }
    const Stencil sy = stencil(x.coords(1), n);
    T acc = zero;
    for (int b = 0; b < 4; ++b) {
        if (sy.w[b] == 0.0) continue;
        T row = zero;
        const std::size_t off = static_cast<std::size_t>(sy.idx[b]) * static_cast<std::size_t>(n);
        for (int a = 0; a < 4; ++a) {
            if (sx.w[a] != 0.0) row += sx.w[a] * values[off + static_cast<std::size_t>(sx.idx[a])];
        }
        acc += sy.w[b] * row;
    }
    return acc;
}

}  // namespace

double interpolate_scalar(const Grid& grid, std::span<const double> values, const Point& x) {
    return interpolate_impl<double>(grid, values, x, 0.0);
}

Vec2 interpolate_vector(const Grid& grid, std::span<const Vec2> values, const Point& x) {
    return interpolate_impl<Vec2>(grid, values, x, Vec2::Zero());
}

TangentVector interpolate(const DiscreteVectorField& field, const Point& x) {
    return TangentVector{interpolate_vector(field.grid, field.values, x)};
}

DiscreteVectorField random_trig_field(const Grid& grid, const MetricFrame& frame, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    const auto unit_draw = [&rng] { return static_cast<double>(rng() >> 11) * 0x1.0p-53; };
    struct Term {
        int comp;
        double c;
        int k1;
        int k2;
        double ph;
    };
    constexpr double two_pi = 6.283185307179586476925286766559;
    const bool torus = grid.kind() == ManifoldKind::Torus2;
    std::vector<Term> terms;
    for (int comp = 0; comp < (torus ? 2 : 1); ++comp) {
        for (int t = 0; t < 3; ++t) {
            const int k1 = static_cast<int>(rng() % 7) - 3;
            const int k2 = torus ? static_cast<int>(rng() % 7) - 3 : 0;
            terms.push_back({comp, 2.0 * unit_draw() - 1.0, k1, k2, two_pi * unit_draw()});
        }
    }
    DiscreteVectorField out(grid, frame);
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const Vec2 x = grid.point(i).coords;
        for (const auto& t : terms) {
            out.values[i](t.comp) += t.c * std::sin(two_pi * (t.k1 * x(0) + t.k2 * x(1)) + t.ph);
        }
    }
    return out;
}

}  // namespace hyperstab
