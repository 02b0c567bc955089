#pragma once

#include "hyperstab/geometry.hpp"
#include "hyperstab/norms.hpp"
#include "hyperstab/rightinverse.hpp"
#include "hyperstab/systems.hpp"

#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

namespace hyperstab {

struct SolverConfig {
    double tol = 1e-10;
    int max_iter = 60;
    double r_ball = 0.24;
    double eps_ball = 0.5;
    double alpha = 0.5;
    DfWindow window;
    std::size_t pair_budget = 2000;
    std::uint64_t seed = 1;
    /// Starting field; zero when empty.
    std::optional<DiscreteVectorField> x0;

    /// Throws Error(InvalidConfig) on eps_ball outside (0,1], r_ball >= 1/4 or tol <= 0.
    void validate() const;
};

/// Psi(g, eta)(x) = lift of g(f^{-1}x + eta(f^{-1}x)) - x, re-centred at every
/// node. Throws Error(Divergence) naming the node when the result leaves the
/// chart (|.|_inf >= 1/2).
DiscreteVectorField psi(const ModelMap& g, const ModelMap& f, const DiscreteVectorField& eta);

struct PerturbationReport {
    double q_c0 = 0.0;
    double q_holder = 0.0;
    double q_df = 0.0;
    /// Smallest eps' consistent with the sampled data: max of |Q| and the
    /// quotients |Q(x) - Q(y)| / (d(f^{-1}x, f^{-1}y) + |eta(f^{-1}x) - eta(f^{-1}y)|).
    double eps_prime = 0.0;
    double holder_bound = 0.0;  ///< eps' (l diam^(1-alpha) + l^alpha L_alpha(eta))
    double df_bound = 0.0;      ///< eps' (1 + L_f(eta))
    bool holder_ok = true;      ///< q_holder <= 1.1 holder_bound
    bool df_ok = true;          ///< q_df <= 1.1 df_bound
};

/// Q(g, eta) = Psi(g, eta) - f_sharp(eta) and its sampled norms.
PerturbationReport verify_perturbation_bounds(const ModelMap& g, const ModelMap& f, const DiscreteVectorField& eta,
                                              double alpha, double l, const NormContext& ctx);

struct JNormEstimate {
    double c0 = 0.0;       ///< max |J eta| / |eta| over the probes
    double alpha_f = 0.0;  ///< max |J eta|_{alpha,f} / |eta|_{alpha,f} over the probes
};

/// Ratios over `probes` random trigonometric fields on a grid of `resolution`.
JNormEstimate estimate_j_norm(const RightInverse& J, double alpha, DfWindow w, int resolution, int probes,
                              std::uint64_t seed);

struct HomeoCertificate {
    bool positive = false;
    double lf = 0.0;
    bool lf_ok = false;
    bool injective = false;
    /// Two distinct nodes whose images are closer than half a cell.
    std::optional<std::pair<std::size_t, std::size_t>> witness;
    double witness_distance = 0.0;
    bool degree_ok = false;
    Eigen::Matrix2i degree = Eigen::Matrix2i::Zero();
};

/// L_f(eta) <= 1/2, grid injectivity of h = exp(eta) and degree one.
HomeoCertificate check_homeomorphism(const DiscreteVectorField& eta, const NormContext& ctx);

/// Sup over nodes of d(g(h(x)), h(f(x))), h(f(x)) read by interpolation.
double conjugacy_residual(const ModelMap& g, const ModelMap& f, const DiscreteVectorField& eta);

struct ConjugacyResult {
    explicit ConjugacyResult(DiscreteVectorField start) : eta(std::move(start)) {}

    DiscreteVectorField eta;
    bool converged = false;
    int iterations = 0;
    std::vector<double> updates;  ///< |x_{n+1} - x_n| per step
    std::vector<double> ratios;   ///< updates[n] / updates[n-1]
    std::vector<double> norms;    ///< |x_n|_{alpha,f} per step
    double max_ratio = 0.0;       ///< max ratio over n >= 2
    double residual = 0.0;
    double ball_confinement = 0.0;
    NormReport report;
    PerturbationReport perturbation;
    JNormEstimate j_norm;
    HomeoCertificate homeo;
};

/// x_{n+1} = R_g(x_n) = J(Psi(g, x_n) - f_sharp(x_n)) on `grid`, J built for f. Returns
/// the first x_n with |R_g(x_n) - x_n| <= tol. Throws Error(Divergence) when
/// the perturbation gate fails, on three consecutive ratios >= 0.95, or when
/// max_iter is exhausted.
ConjugacyResult solve_conjugacy(const ModelMap& f, const ModelMap& g, const RightInverse& J, const Grid& grid,
                                const SolverConfig& cfg);

struct PeriodicMatch {
    int period = 0;
    Point p;        ///< periodic point of f
    Point hp;       ///< h(p) from the conjugacy equation restricted to the orbit of p
    Point q;        ///< Newton-located periodic point of g seeded at h(p)
    double error = 0.0;
};

/// For every point of period dividing `period`, solves the fixed-point
/// equation on its (finite, f-invariant) orbit and compares h(p) with the
/// Newton root of g^period(x) = x.
std::vector<PeriodicMatch> match_periodic_points(const ModelMap& f, const ModelMap& g, const RightInverse& J,
                                                 int period);

struct HolderEntry {
    double alpha = 0.0;
    bool admissible = false;  ///< lambda l^alpha < 1
    NormReport report;
};

struct HolderReport {
    std::vector<HolderEntry> entries;
    std::optional<double> alpha_hat;
};

HolderReport holder_report(const DiscreteVectorField& eta, const ModelMap& f, const HyperbolicityConstants& hc,
                           const std::vector<double>& alphas, const NormContext& ctx);

/// Sup over nodes of d(h(x), phi(x)) with h = exp(eta).
double distance_to(const DiscreteVectorField& eta, const TrigSeries& phi);

}  // namespace hyperstab
