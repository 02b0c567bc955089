#pragma once

#include "hyperstab/geometry.hpp"
#include "hyperstab/systems.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace hyperstab {

/// Half-width of the iterate window truncating the sup over Z in d_f.
struct DfWindow {
    int half_width = 1;
};

/// ceil(log(diam / separation) / log(1 / lambda)), at least 1.
DfWindow default_window(double lambda, double separation, double diam);

/// max over |n| <= W of d(f^n x, f^n y).
double df_distance(const ModelMap& m, const Point& x, const Point& y, DfWindow w);

/// Same as df_distance, also returning the iterate index that attains the max
/// (the most negative index among ties).
std::pair<double, int> df_distance_argmax(const ModelMap& m, const Point& x, const Point& y, DfWindow w);

/// min{d(x,y)^alpha, d_f(x,y)}.
double rho_f(const ModelMap& m, const Point& x, const Point& y, double alpha, DfWindow w);

struct NormReport {
    double alpha = 0.0;
    int window = 0;
    double c0 = 0.0;
    double holder = 0.0;
    double df_lip = 0.0;
    double combined = 0.0;
    std::size_t pairs = 0;

    static std::string csv_header();
    [[nodiscard]] std::string csv_row() const;
};

/// Orbit points f^n(node) for every grid node and |n| <= W.
class OrbitTable {
public:
    OrbitTable(const ModelMap& m, const Grid& grid, DfWindow w);

    [[nodiscard]] const Grid& grid() const noexcept { return grid_; }
    [[nodiscard]] DfWindow window() const noexcept { return window_; }
    [[nodiscard]] const Point& at(std::size_t node, int n) const {
        return points_[static_cast<std::size_t>(n + window_.half_width) * grid_.size() + node];
    }
    /// Truncated d_f between two nodes.
    [[nodiscard]] double df(std::size_t a, std::size_t b) const;

private:
    Grid grid_;
    DfWindow window_;
    MetricFrame frame_;
    std::vector<Point> points_;
};

/// Deterministic pair sample: every grid-neighbour pair plus `budget`
/// low-discrepancy long-range pairs whose offset is fixed by `seed`.
struct PairSample {
    std::vector<std::pair<std::uint32_t, std::uint32_t>> pairs;

    static PairSample build(const Grid& grid, std::size_t budget, std::uint64_t seed);
};

/// Pair sample with cached d and d_f for one map, grid and window.
class NormContext {
public:
    NormContext(const ModelMap& m, const Grid& grid, DfWindow w, std::size_t pair_budget,
                std::uint64_t seed = 0x5eed);

    [[nodiscard]] const Grid& grid() const noexcept { return grid_; }
    [[nodiscard]] DfWindow window() const noexcept { return window_; }
    [[nodiscard]] const MetricFrame& frame() const noexcept { return frame_; }
    [[nodiscard]] const PairSample& sample() const noexcept { return sample_; }
    [[nodiscard]] const std::vector<double>& distances() const noexcept { return d_; }
    [[nodiscard]] const std::vector<double>& df_distances() const noexcept { return df_; }
    [[nodiscard]] const OrbitTable& orbits() const noexcept { return orbits_; }

private:
    Grid grid_;
    DfWindow window_;
    MetricFrame frame_;
    OrbitTable orbits_;
    PairSample sample_;
    std::vector<double> d_;
    std::vector<double> df_;
};

/// Sampled norm triple. Difference quotients are maxima over the sample and
/// therefore lower bounds on the true suprema.
NormReport field_norms(const DiscreteVectorField& eta, double alpha, const NormContext& ctx);
NormReport field_norms(const DiscreteVectorField& eta, double alpha, const ModelMap& m, DfWindow w,
                       std::size_t pair_budget);

/// Hoelder quotient for a scalar grid function (|a(x) - a(y)| / d^alpha) on
/// the context's pairs.
double scalar_holder(std::span<const double> values, double alpha, const NormContext& ctx);

/// Sampled max of |s(x) - s(y)| / rho_f(x, y) for a scalar grid function.
double scalar_rho_modulus(std::span<const double> values, double alpha, const NormContext& ctx);

/// Empirical Hoelder exponent: slope of the log-log regression of the
/// modulus of continuity (max |eta(x) - eta(x + s e_k)| over nodes) against the
/// step length s = 2^j h, j = 0..5. Returns nullopt for a constant field.
std::optional<double> estimate_exponent(const DiscreteVectorField& eta, const ModelMap& m);

}  // namespace hyperstab
