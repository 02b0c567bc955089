#pragma once

#include "hyperstab/geometry.hpp"
#include "hyperstab/norms.hpp"
#include "hyperstab/splitting.hpp"
#include "hyperstab/systems.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <optional>
#include <utility>
#include <vector>

namespace hyperstab {

using LVec2 = Eigen::Matrix<long double, 2, 1>;
using LMat2 = Eigen::Matrix<long double, 2, 2>;

/// f_sharp(eta)(x) = T_{f^{-1}x} f (eta(f^{-1} x)), eta read by interpolation.
DiscreteVectorField push_forward(const ModelMap& m, const DiscreteVectorField& eta);

/// theta_1..theta_k on the manifold. Either a single constant function (one
/// basic set) or, on the circle, a smooth bump around the repeller and its
/// complement around the attractor.
class PartitionOfUnity {
public:
    static PartitionOfUnity single(ManifoldKind kind);
    /// Needs exactly one repeller and one attractor component. theta_rep is 1
    /// within `inner` of the repeller and 0 beyond `outer`.
    static PartitionOfUnity circle_bump(const BasicSetData& sets, double inner = 0.2, double outer = 0.3);

    [[nodiscard]] std::size_t count() const noexcept { return single_ ? 1 : 2; }
    [[nodiscard]] double value(std::size_t i, const Point& x) const;
    /// theta_i sampled on the grid, one vector per component.
    [[nodiscard]] std::vector<std::vector<double>> on_grid(const Grid& grid) const;

private:
    bool single_ = true;
    ManifoldKind kind_ = ManifoldKind::Torus2;
    double repeller_ = 0.0;
    double inner_ = 0.0;
    double outer_ = 0.0;
};

/// Stable/unstable line fields for each component and the projections along
/// them. On T^2 every component carries both lines; on the circle a repeller
/// component is purely unstable and an attractor purely stable.
class ComponentProjectors {
public:
    /// Constant eigenlines of the linear part, computed in extended precision.
    static ComponentProjectors exact_linear(const ModelMap& m);
    /// Lines read from a solved invariant splitting (interpolated off-grid).
    static ComponentProjectors from_splitting(InvariantSplitting splitting);
    /// Degenerate projectors for the Morse-Smale circle (repellers first).
    static ComponentProjectors morse_smale(const BasicSetData& sets);

    [[nodiscard]] std::size_t count() const noexcept { return has_unstable_.size(); }
    [[nodiscard]] bool has_unstable(std::size_t i) const { return has_unstable_[i]; }
    [[nodiscard]] bool has_stable(std::size_t i) const { return has_stable_[i]; }

    [[nodiscard]] LVec2 unstable_dir(const Point& x) const;
    [[nodiscard]] LVec2 stable_dir(const Point& x) const;
    /// Coefficients (a, b) with v = a e_u(x) + b e_s(x). On the circle a = b = v_1.
    [[nodiscard]] std::pair<long double, long double> coefficients(const Point& x, const LVec2& v) const;
    [[nodiscard]] Mat2 projector_stable(std::size_t i, const Point& x) const;
    [[nodiscard]] Mat2 projector_unstable(std::size_t i, const Point& x) const;
    /// Max over nodes and components of the frame operator norms of both projectors.
    [[nodiscard]] double max_projector_norm(const Grid& grid, const MetricFrame& frame) const;

private:
    ManifoldKind kind_ = ManifoldKind::Torus2;
    std::vector<bool> has_unstable_;
    std::vector<bool> has_stable_;
    LVec2 eu_ = LVec2(1, 0);
    LVec2 es_ = LVec2(0, 1);
    std::optional<InvariantSplitting> splitting_;
};

struct SeriesBudget {
    int n_trunc = 0;
    double lambda_prime = 0.0;
    double kappa = 0.0;
    double rho = 0.0;
    double K_decay = 1.0;
    double tail_bound = 0.0;

    /// K rho^(N+1) / (1 - rho).
    [[nodiscard]] static double tail(double K, double rho, int n) {
        return K * std::pow(rho, n + 1) / (1.0 - rho);
    }
};

/// One field split by component: eta_is = P_s(theta_i eta), eta_iu = P_u(theta_i eta).
struct ComponentParts {
    DiscreteVectorField stable;
    DiscreteVectorField unstable;
};

struct RightInverseResidual {
    double residual = 0.0;   ///< sup over nodes of |(1 - f_sharp)(J eta) - eta|
    double eta_norm = 0.0;   ///< C0 norm of eta
    double tail_bound = 0.0;
    /// residual / (tail_bound * |eta|); 0 when eta = 0.
    double ratio = 0.0;
};

struct DecayReport {
    std::vector<double> norms;  ///< sup-norm of f_sharp^n zeta, n = 0..n_max
    double fitted_rate = 0.0;   ///< exp of the least-squares slope of log norms over n in [n_max/2, n_max]
};

struct HolderGrowthReport {
    std::vector<double> values;  ///< sampled L_alpha(f_sharp^n zeta)
    std::vector<double> bounds;  ///< 1.1 * (K (rho l^a)^n L_a(zeta) + C' ((rho l^a)^n - rho^n) |zeta|)
    double C = 0.0;
    double C_prime = 0.0;
    bool within = true;
};

/// Truncated series right inverse of 1 - f_sharp. Orbit sums are evaluated
/// pointwise: eta is interpolated once per orbit point and the bundle
/// multipliers are composed along the exact orbit, in extended precision.
class RightInverse {
public:
    /// Measures kappa and K on `grid`; n_trunc > 0 fixes N, otherwise N is the
    /// smallest length whose tail bound is <= tolerance. Throws
    /// Error(InvalidConfig) unless rho < 1 and rho l^alpha < 1, and
    /// Error(SeriesNonDecay) when some orbit fails to contract by n = 5.
    RightInverse(ModelMapPtr m, ComponentProjectors projectors, PartitionOfUnity partition,
                 const HyperbolicityConstants& hc, const Grid& grid, int n_trunc, double tolerance = 0.0);

    [[nodiscard]] const SeriesBudget& budget() const noexcept { return budget_; }
    [[nodiscard]] const ModelMap& map() const noexcept { return *map_; }
    [[nodiscard]] const ComponentProjectors& projectors() const noexcept { return projectors_; }
    [[nodiscard]] const PartitionOfUnity& partition() const noexcept { return partition_; }
    [[nodiscard]] const HyperbolicityConstants& constants() const noexcept { return hc_; }

    [[nodiscard]] std::vector<ComponentParts> decompose(const DiscreteVectorField& eta) const;
    /// (J eta)(x) for an arbitrary point x.
    [[nodiscard]] LVec2 evaluate(const DiscreteVectorField& eta, const Point& x) const;
    [[nodiscard]] DiscreteVectorField apply(const DiscreteVectorField& eta) const;
    /// J restricted to a periodic orbit: orbit[j + 1] = f(orbit[j]) cyclically and
    /// `values[j]` is eta at orbit[j]. Returns (J eta)(orbit[j]) for every j.
    [[nodiscard]] std::vector<LVec2> evaluate_cycle(const std::vector<Point>& orbit,
                                                    const std::vector<Vec2>& values) const;
    [[nodiscard]] RightInverseResidual verify(const DiscreteVectorField& eta) const;

    /// Norms of f_sharp^n(eta_is) for component i.
    [[nodiscard]] DecayReport measure_decay(const DiscreteVectorField& eta, std::size_t component, int n_max) const;
    [[nodiscard]] HolderGrowthReport measure_holder_growth(const DiscreteVectorField& eta, std::size_t component,
                                                           int n_max, const NormContext& ctx) const;

private:
    /// f_sharp^n(eta_is) at every node for n = 0..n_max.
    [[nodiscard]] std::vector<DiscreteVectorField> stable_iterates(const DiscreteVectorField& eta,
                                                                   std::size_t component, int n_max) const;
    void measure_budget(const Grid& grid, int n_trunc, double tolerance);

    ModelMapPtr map_;
    ComponentProjectors projectors_;
    PartitionOfUnity partition_;
    HyperbolicityConstants hc_;
    SeriesBudget budget_;
};

}  // namespace hyperstab
