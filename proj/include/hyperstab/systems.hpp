#pragma once

#include "hyperstab/geometry.hpp"

#include <Eigen/Dense>

#include <memory>
#include <string>
#include <variant>
#include <vector>

namespace hyperstab {

using IntMat2 = Eigen::Matrix2i;

/// coeff * sin(2 pi (k1 x1 + k2 x2) + phase), added to one output component.
struct TrigTerm {
    int component = 0;
    double coeff = 0.0;
    int k1 = 0;
    int k2 = 0;
    double phase = 0.0;
};

/// Finite periodic trigonometric series R^d -> R^d, scaled by `amplitude`.
struct TrigSeries {
    double amplitude = 0.0;
    std::vector<TrigTerm> terms;

    [[nodiscard]] Vec2 value(const Vec2& x) const;
    [[nodiscard]] Mat2 jacobian(const Vec2& x) const;
    /// Upper bound on the Euclidean operator norm of the jacobian.
    [[nodiscard]] double jacobian_bound() const;
};

class ModelMap;
using ModelMapPtr = std::shared_ptr<const ModelMap>;

struct LinearToral {
    IntMat2 matrix;
};

/// x -> A x + p(x) with p a trigonometric series.
struct PerturbedToral {
    IntMat2 matrix;
    TrigSeries perturbation;
};

/// x -> x + a sin(2 pi x) on the circle.
struct MorseSmaleCircle {
    double amplitude;
};

/// phi o base o phi^{-1} with phi = id + series.
struct Conjugated {
    ModelMapPtr base;
    TrigSeries phi;
};

/// The inverse diffeomorphism of `base`.
struct Inverted {
    ModelMapPtr base;
};

struct HyperbolicityConstants {
    double lambda = 0.0;
    double l = 0.0;
    double alpha = 0.0;
    double lambda_prime = 0.0;
};

struct BasicSetComponent {
    bool whole_manifold = false;
    std::vector<Point> points;
    int unstable_rank = 0;
    int stable_rank = 0;
    double neighborhood_radius = 0.0;
};

/// Components ordered so that earlier ones are never downstream of later ones
/// (repellers before attractors).
struct BasicSetData {
    std::vector<BasicSetComponent> components;
    [[nodiscard]] std::size_t count() const noexcept { return components.size(); }
};

/// Immutable smooth invertible model map of the circle or the 2-torus.
class ModelMap {
public:
    using Kind = std::variant<LinearToral, PerturbedToral, MorseSmaleCircle, Conjugated, Inverted>;

    ModelMap(Kind kind, MetricFrame frame);

    [[nodiscard]] const Kind& kind() const noexcept { return kind_; }
    [[nodiscard]] const MetricFrame& frame() const noexcept { return frame_; }
    [[nodiscard]] ManifoldKind manifold() const noexcept { return manifold_; }
    [[nodiscard]] std::string describe() const;

    /// Forward image in the universal cover (no reduction mod 1). For inverted
    /// maps the integer translate of the lift is unspecified.
    [[nodiscard]] Vec2 lift_evaluate(const Vec2& x) const;
    [[nodiscard]] Point evaluate(const Point& x) const;
    /// Preimage; Newton in the lift for nonlinear kinds. Throws std::runtime_error
    /// if Newton fails to converge within 50 steps.
    [[nodiscard]] Point inverse(const Point& y) const;
    [[nodiscard]] Mat2 jacobian(const Point& x) const;

    /// Points along the orbit: n > 0 forward, n < 0 backward.
    [[nodiscard]] Point iterate(const Point& x, int n) const;

    [[nodiscard]] bool is_linear() const noexcept;

private:
    Kind kind_;
    MetricFrame frame_;
    ManifoldKind manifold_;
};

// Constructors for the supported families.
ModelMapPtr make_linear_toral(const IntMat2& a, bool eigenframe = true);
/// Throws std::invalid_argument unless |det A| = 1, A is hyperbolic and the
/// perturbation keeps the lift a diffeomorphism.
ModelMapPtr make_perturbed_toral(const IntMat2& a, TrigSeries perturbation, bool eigenframe = true);
ModelMapPtr make_morse_smale_circle(double amplitude);
/// Throws std::invalid_argument when phi is not a diffeomorphism.
ModelMapPtr make_conjugated(ModelMapPtr base, TrigSeries phi);
ModelMapPtr make_inverted(ModelMapPtr base);

/// Default trigonometric perturbation (sin(2 pi x2 + 0.3), sin(2 pi x1 + 0.7)).
TrigSeries default_toral_perturbation(double amplitude);
/// (sin 2 pi x2, sin 2 pi x1) scaled by amplitude, or sin 2 pi x on the circle.
TrigSeries default_conjugacy(double amplitude, ManifoldKind kind);

/// Unit stable/unstable eigenvectors of a hyperbolic integer matrix and the
/// eigenvalues (|mu_s| < 1 < |mu_u|).
struct Eigensplitting {
    Vec2 unstable;
    Vec2 stable;
    double mu_unstable;
    double mu_stable;
};
Eigensplitting eigensplitting(const IntMat2& a);

/// Underlying hyperbolic matrix for toral kinds (through conjugations and inverses).
const IntMat2* linear_part(const ModelMap& m);

HyperbolicityConstants hyperbolicity_constants(const ModelMap& m, int resolution = 128);

BasicSetData basic_sets(const ModelMap& m);

/// Min over the grid of |det Df|; the shipped configurations keep this > 0.1.
double min_jacobian_determinant(const ModelMap& m, const Grid& grid);

/// Max over the grid of the distance d(f(f^{-1}(x)), x).
double inverse_residual(const ModelMap& m, const Grid& grid);

/// Fixed points of f^period located by Newton from a seed grid.
std::vector<Point> periodic_points(const ModelMap& m, int period, int seeds_per_dim = 24);

/// Newton refinement of a root of f^period(x) = x starting at `seed`.
Point newton_periodic_point(const ModelMap& m, const Point& seed, int period);

}  // namespace hyperstab
