#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace hyperstab {

using Vec2 = Eigen::Vector2d;
using Mat2 = Eigen::Matrix2d;

enum class ManifoldKind { Circle, Torus2 };

constexpr int dimension(ManifoldKind kind) noexcept {
    return kind == ManifoldKind::Circle ? 1 : 2;
}

/// Point of R^d / Z^d. Unused trailing coordinates are held at zero.
struct Point {
    Vec2 coords = Vec2::Zero();
};

/// Tangent vector in lift coordinates. Unused trailing components are zero.
struct TangentVector {
    Vec2 components = Vec2::Zero();
};

/// Constant linear frame realizing the adapted flat metric: |v| = |B^{-1} v|.
class MetricFrame {
public:
    MetricFrame() = default;

    static MetricFrame identity() { return {}; }
    /// Throws std::invalid_argument when the basis is singular.
    static MetricFrame from_basis(const Mat2& basis);

    [[nodiscard]] const Mat2& basis() const noexcept { return basis_; }
    [[nodiscard]] const Mat2& inverse() const noexcept { return inverse_; }

    [[nodiscard]] double norm(const Vec2& v) const { return (inverse_ * v).norm(); }
    /// Operator norm of a linear map T_x -> T_y, both measured in this frame.
    [[nodiscard]] double operator_norm(const Mat2& m) const;

private:
    Mat2 basis_ = Mat2::Identity();
    Mat2 inverse_ = Mat2::Identity();
};

/// Regular grid with `resolution` nodes per dimension; node (i1, i2) sits at
/// (i1, i2) / resolution and has flat index i1 + resolution * i2.
class Grid {
public:
    Grid(int resolution, ManifoldKind kind);

    [[nodiscard]] int resolution() const noexcept { return resolution_; }
    [[nodiscard]] ManifoldKind kind() const noexcept { return kind_; }
    [[nodiscard]] int dim() const noexcept { return dimension(kind_); }
    [[nodiscard]] std::size_t size() const noexcept { return size_; }
    [[nodiscard]] double spacing() const noexcept { return 1.0 / resolution_; }

    [[nodiscard]] Point point(std::size_t index) const;
    [[nodiscard]] std::size_t index(int i1, int i2 = 0) const;

    bool operator==(const Grid&) const = default;

private:
    int resolution_;
    ManifoldKind kind_;
    std::size_t size_;
};

/// Reduces every active coordinate into [0, 1).
Vec2 wrap(const Vec2& x, ManifoldKind kind);

/// Componentwise representative of `d` in [-1/2, 1/2).
Vec2 min_lift(const Vec2& d, ManifoldKind kind);

/// exp_x(v) = x + v mod 1. Throws std::domain_error if |v|_inf >= 1/2.
Point exp_point(const Point& x, const TangentVector& v, ManifoldKind kind);

/// Minimal lift of y - x. Throws std::domain_error when a coordinate gap is
/// within 1e-12 of the antipodal tie 1/2.
TangentVector log_point(const Point& x, const Point& y, ManifoldKind kind);

/// Flat distance: frame norm of the minimal lift of y - x.
double dist(const Point& x, const Point& y, const MetricFrame& frame, ManifoldKind kind);

/// Largest possible distance between two points for the given frame.
double diameter(const MetricFrame& frame, ManifoldKind kind);

/// Sampled vector field on a grid, values stored in lift coordinates.
struct DiscreteVectorField {
    DiscreteVectorField(Grid grid, MetricFrame frame);
    DiscreteVectorField(Grid grid, MetricFrame frame, std::vector<Vec2> values);

    Grid grid;
    MetricFrame frame;
    std::vector<Vec2> values;

    /// Sup of the frame norm over nodes.
    [[nodiscard]] double sup_norm() const;

    DiscreteVectorField& operator+=(const DiscreteVectorField& other);
    DiscreteVectorField& operator-=(const DiscreteVectorField& other);
    DiscreteVectorField& operator*=(double s);
};

DiscreteVectorField operator+(DiscreteVectorField a, const DiscreteVectorField& b);
DiscreteVectorField operator-(DiscreteVectorField a, const DiscreteVectorField& b);
DiscreteVectorField operator*(double s, DiscreteVectorField a);

/// Periodic Catmull-Rom interpolation (tensor product on the torus). Exact on
/// nodes, C^1 between them, third-order accurate for smooth data.
double interpolate_scalar(const Grid& grid, std::span<const double> values, const Point& x);
Vec2 interpolate_vector(const Grid& grid, std::span<const Vec2> values, const Point& x);

TangentVector interpolate(const DiscreteVectorField& field, const Point& x);

/// Sum of three seeded terms c sin(2 pi (k1 x1 + k2 x2) + phase) per active
/// component, |k| <= 3, c uniform in [-1, 1].
DiscreteVectorField random_trig_field(const Grid& grid, const MetricFrame& frame, std::uint64_t seed);

}  // namespace hyperstab
