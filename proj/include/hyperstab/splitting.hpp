#pragma once

#include "hyperstab/geometry.hpp"
#include "hyperstab/norms.hpp"
#include "hyperstab/systems.hpp"

#include <cstdint>
#include <vector>

namespace hyperstab {

/// Constant reference frames spanning the tangent space of T^2.
struct ReferenceSplitting {
    Vec2 unstable;
    Vec2 stable;

    /// Eigenvector frames of the linear part of a toral map.
    static ReferenceSplitting eigen(const ModelMap& m);
    /// Roles of the two directions exchanged (for the inverse map).
    [[nodiscard]] ReferenceSplitting swapped() const { return {stable, unstable}; }
    /// Angle between the two directions in the map's frame metric, radians.
    [[nodiscard]] double angle(const MetricFrame& frame) const;
    [[nodiscard]] Mat2 basis() const;
};

/// Jacobian blocks in the (unstable, stable) reference coordinates:
/// T_x f = [[uu, su], [us, ss]].
struct Blocks {
    double uu = 0.0;
    double su = 0.0;
    double us = 0.0;
    double ss = 0.0;

    [[nodiscard]] Mat2 matrix() const;
};

Blocks block_decompose(const ModelMap& m, const ReferenceSplitting& ref, const Point& x);

/// Graph transform on one fiber: (us + ss g) / (uu + su g). Throws
/// std::domain_error when the unstable part is not invertible.
double graph_map(const Blocks& b, double g);

/// Section of the rank-1 bundle L(E^u, E^s): one slope per grid node.
struct SplittingSection {
    Grid grid;
    std::vector<double> tau;
    double radius = 1.0;

    static SplittingSection zero(const Grid& grid, double radius);
    [[nodiscard]] double value_at(const Point& x) const;
    [[nodiscard]] double sup_norm() const;
};

struct GraphTransformConstants {
    double lambda1 = 0.0;
    double lambda2 = 0.0;
    double lambda3 = 0.0;
    double r = 1.0;
    double eps_graph = 0.0;
    double K = 0.0;  ///< a-priori modulus bound (filled by modulus_bound)
    double C = 0.0;  ///< Lipschitz/Hoelder constant of Gamma (filled by measure_gamma_constant)

    /// lambda3 = sqrt(0.98 / l^alpha) (capped below 1) and geometric
    /// interpolation lambda < lambda1 < lambda2 < lambda3, r = 1,
    /// eps_graph = (1/lambda2 - 1/lambda3) / r.
    static GraphTransformConstants automatic(const HyperbolicityConstants& hc);
    /// Throws Error(InvalidConfig) naming the violated inequality.
    void validate(const HyperbolicityConstants& hc) const;
};

/// F_sharp(tau)(x) = Gamma_{f^{-1}x}(tau(f^{-1} x)), the interpolated slope clamped to
/// the disc. Throws std::invalid_argument if a node value exceeds the disc radius
/// and std::domain_error (with the node index) when phi^u is singular.
SplittingSection graph_transform(const ModelMap& m, const ReferenceSplitting& ref, const SplittingSection& tau);

struct InvariantSplittingResult {
    SplittingSection section;
    int iterations = 0;
    double last_ratio = 0.0;
    double max_ratio = 0.0;
    /// Sup over nodes of |F_sharp(tau) - tau| at the returned section.
    double residual = 0.0;
    bool converged = false;
};

/// Iterates the graph transform from tau0 until the sup-difference of
/// successive iterates is <= tol. Throws Error(Divergence) on max_iter exhaustion.
InvariantSplittingResult solve_invariant_section(const ModelMap& m, const ReferenceSplitting& ref,
                                                 const SplittingSection& tau0, double tol, int max_iter);

/// Both invariant bundles: E^u as the graph of tau_u over `ref.unstable`,
/// E^s as the graph of tau_s over `ref.stable` (solved with the inverse map).
struct InvariantSplitting {
    ReferenceSplitting ref;
    InvariantSplittingResult unstable;
    InvariantSplittingResult stable;

    [[nodiscard]] Vec2 unstable_at(const Point& x) const;
    [[nodiscard]] Vec2 stable_at(const Point& x) const;
    /// Minimum over nodes of the angle between E^u and E^s (frame metric).
    [[nodiscard]] double min_angle(const MetricFrame& frame) const;
};

InvariantSplitting solve_invariant_splitting(const ModelMapPtr& m, int resolution, double tol, int max_iter);

/// Max over nodes of the angle-free invariance defect: the graph of tau at
/// x pushed by T_x g compared with tau at g(x) (read by interpolation).
double pushed_graph_defect(const ModelMap& m, const ReferenceSplitting& ref, const SplittingSection& tau);

/// K-hat: sampled max of |tau(x) - tau(y)| / rho_f(x, y).
double modulus_constant(const SplittingSection& section, const ModelMap& m, double alpha, DfWindow w,
                        std::size_t pair_budget);

/// Sampled constant C with |Gamma_x(g1) - Gamma_y(g2)| <= C min{s, s^alpha},
/// s = |g1 - g2| + d(x, y), over random nodes, neighbour offsets and slopes.
double measure_gamma_constant(const ModelMap& m, const ReferenceSplitting& ref, double r, double alpha,
                              int samples, std::uint64_t seed);

/// max{C l^alpha / (1 - lambda3^2 l^alpha), C / (1 - lambda3^2)}.
double modulus_bound(const GraphTransformConstants& gc, const HyperbolicityConstants& hc);

/// Max over `pairs` random (node, g1, g2) with |g| <= r of
/// |Gamma(g1) - Gamma(g2)| / |g1 - g2|.
double fiber_contraction(const ModelMap& m, const ReferenceSplitting& ref, double r, int pairs,
                         std::uint64_t seed);

}  // namespace hyperstab
