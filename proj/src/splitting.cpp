#include "hyperstab/splitting.hpp"

#include "hyperstab/error.hpp"
#include "hyperstab/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>
#include <string>

namespace hyperstab {

namespace {

double unit_draw(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

double frame_angle(const MetricFrame& frame, const Vec2& u, const Vec2& s) {
    const Vec2 a = frame.inverse() * u;
    const Vec2 b = frame.inverse() * s;
    const double cross = std::abs(a(0) * b(1) - a(1) * b(0));
    const double dot = std::abs(a.dot(b));
    return std::atan2(cross, dot);
}

double sup_difference(const std::vector<double>& a, const std::vector<double>& b) {
    double d = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a[i] - b[i]));
    return d;
}

}  // namespace

ReferenceSplitting ReferenceSplitting::eigen(const ModelMap& m) {
    const IntMat2* a = linear_part(m);
    if (a == nullptr) throw std::invalid_argument("reference splitting needs a toral map");
    const Eigensplitting e = eigensplitting(*a);
    return {e.unstable, e.stable};
}

double ReferenceSplitting::angle(const MetricFrame& frame) const { return frame_angle(frame, unstable, stable); }

Mat2 ReferenceSplitting::basis() const {
    Mat2 p;
    p.col(0) = unstable;
    p.col(1) = stable;
    return p;
}

Mat2 Blocks::matrix() const {
    Mat2 m;
    m << uu, su, us, ss;
    return m;
}

Blocks block_decompose(const ModelMap& m, const ReferenceSplitting& ref, const Point& x) {
    const Mat2 p = ref.basis();
    const Mat2 b = p.inverse() * m.jacobian(x) * p;
    return Blocks{b(0, 0), b(0, 1), b(1, 0), b(1, 1)};
}

double graph_map(const Blocks& b, double g) {
    const double den = b.uu + b.su * g;
    if (!(std::abs(den) > 1e-12)) throw std::domain_error("unstable block is not invertible");
    return (b.us + b.ss * g) / den;
}

SplittingSection SplittingSection::zero(const Grid& grid, double radius) {
    if (grid.kind() != ManifoldKind::Torus2) throw std::invalid_argument("splitting sections live on the torus");
    return SplittingSection{grid, std::vector<double>(grid.size(), 0.0), radius};
}

double SplittingSection::value_at(const Point& x) const { return interpolate_scalar(grid, tau, x); }

double SplittingSection::sup_norm() const {
    double s = 0.0;
    for (double t : tau) s = std::max(s, std::abs(t));
    return s;
}

GraphTransformConstants GraphTransformConstants::automatic(const HyperbolicityConstants& hc) {
    GraphTransformConstants gc;
    const double la = std::pow(hc.l, hc.alpha);
    gc.lambda3 = std::min(std::sqrt(0.98 / la), 0.999);
    gc.lambda1 = hc.lambda * std::cbrt(gc.lambda3 / hc.lambda);
    gc.lambda2 = hc.lambda * std::pow(gc.lambda3 / hc.lambda, 2.0 / 3.0);
    gc.r = 1.0;
    gc.eps_graph = (1.0 / gc.lambda2 - 1.0 / gc.lambda3) / gc.r;
    return gc;
}

void GraphTransformConstants::validate(const HyperbolicityConstants& hc) const {
    if (!(hc.lambda < lambda1 && lambda1 < lambda2 && lambda2 < lambda3 && lambda3 < 1.0)) {
        throw Error(ErrorKind::InvalidConfig, "graph constants violate lambda < lambda1 < lambda2 < lambda3 < 1");
    }
    if (!(r > 0.0)) throw Error(ErrorKind::InvalidConfig, "graph constants need r > 0");
    if (!(eps_graph > 0.0)) throw Error(ErrorKind::InvalidConfig, "graph constants need eps_graph > 0");
    if (!(lambda3 * lambda3 * std::pow(hc.l, hc.alpha) < 1.0)) {
        throw Error(ErrorKind::InvalidConfig, "graph constants violate lambda3^2 * l^alpha < 1");
    }
}

SplittingSection graph_transform(const ModelMap& m, const ReferenceSplitting& ref, const SplittingSection& tau) {
    SplittingSection out{tau.grid, std::vector<double>(tau.grid.size(), 0.0), tau.radius};
    for (std::size_t i = 0; i < tau.grid.size(); ++i) {
        if (std::abs(tau.tau[i]) > tau.radius * (1.0 + 1e-12)) {
            throw std::invalid_argument("section leaves the disc of radius " + std::to_string(tau.radius) +
                                        " at node " + std::to_string(i));
        }
    }
    parallel_for(tau.grid.size(), [&](std::size_t i) {
        const Point pre = m.inverse(tau.grid.point(i));
        // Cubic overshoot between nodes is projected back onto the disc.
        const double t = std::clamp(tau.value_at(pre), -tau.radius, tau.radius);
        try {
            out.tau[i] = graph_map(block_decompose(m, ref, pre), t);
        } catch (const std::domain_error&) {
            throw std::domain_error("unstable block is not invertible over node " + std::to_string(i));
        }
    });
    return out;
}

InvariantSplittingResult solve_invariant_section(const ModelMap& m, const ReferenceSplitting& ref,
                                                 const SplittingSection& tau0, double tol, int max_iter) {
    InvariantSplittingResult r{tau0};
    double prev = 0.0;
    for (int k = 1; k <= max_iter; ++k) {
        SplittingSection next = graph_transform(m, ref, r.section);
        const double diff = sup_difference(next.tau, r.section.tau);
        r.section = std::move(next);
        r.iterations = k;
        if (k > 1 && prev > 0.0) {
            r.last_ratio = diff / prev;
            r.max_ratio = std::max(r.max_ratio, r.last_ratio);
        }
        prev = diff;
        if (diff <= tol) {
            r.converged = true;
            r.residual = sup_difference(graph_transform(m, ref, r.section).tau, r.section.tau);
            return r;
        }
    }
    throw Error(ErrorKind::Divergence,
                "graph transform did not converge within " + std::to_string(max_iter) + " iterations");
}

Vec2 InvariantSplitting::unstable_at(const Point& x) const {
    return ref.unstable + unstable.section.value_at(x) * ref.stable;
}

Vec2 InvariantSplitting::stable_at(const Point& x) const {
    return ref.stable + stable.section.value_at(x) * ref.unstable;
}

double InvariantSplitting::min_angle(const MetricFrame& frame) const {
    const Grid& g = unstable.section.grid;
    double best = M_PI;
    for (std::size_t i = 0; i < g.size(); ++i) {
        const Vec2 u = ref.unstable + unstable.section.tau[i] * ref.stable;
        const Vec2 s = ref.stable + stable.section.tau[i] * ref.unstable;
        best = std::min(best, frame_angle(frame, u, s));
    }
    return best;
}

InvariantSplitting solve_invariant_splitting(const ModelMapPtr& m, int resolution, double tol, int max_iter) {
    const ReferenceSplitting ref = ReferenceSplitting::eigen(*m);
    const Grid grid(resolution, ManifoldKind::Torus2);
    const SplittingSection zero = SplittingSection::zero(grid, 1.0);
    auto u = solve_invariant_section(*m, ref, zero, tol, max_iter);
    const ModelMapPtr inv = make_inverted(m);
    auto s = solve_invariant_section(*inv, ref.swapped(), zero, tol, max_iter);
    return InvariantSplitting{ref, std::move(u), std::move(s)};
}

double pushed_graph_defect(const ModelMap& m, const ReferenceSplitting& ref, const SplittingSection& tau) {
    const Mat2 pinv = ref.basis().inverse();
    std::vector<double> defect(tau.grid.size(), 0.0);
    parallel_for(tau.grid.size(), [&](std::size_t i) {
        const Point x = tau.grid.point(i);
        const Vec2 c = pinv * (m.jacobian(x) * (ref.unstable + tau.tau[i] * ref.stable));
        defect[i] = std::abs(c(1) / c(0) - tau.value_at(m.evaluate(x)));
    });
    return *std::max_element(defect.begin(), defect.end());
}

double modulus_constant(const SplittingSection& section, const ModelMap& m, double alpha, DfWindow w,
                        std::size_t pair_budget) {
    const NormContext ctx(m, section.grid, w, pair_budget);
    return scalar_rho_modulus(section.tau, alpha, ctx);
}

double measure_gamma_constant(const ModelMap& m, const ReferenceSplitting& ref, double r, double alpha,
                              int samples, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    double best = 0.0;
    for (int k = 0; k < samples; ++k) {
        Point x;
        x.coords = Vec2(unit_draw(rng), unit_draw(rng));
        const double scale = std::pow(10.0, -1.0 - 3.0 * unit_draw(rng));
        Point y;
        y.coords = wrap(x.coords + scale * Vec2(2.0 * unit_draw(rng) - 1.0, 2.0 * unit_draw(rng) - 1.0),
                        ManifoldKind::Torus2);
        const double g1 = r * (2.0 * unit_draw(rng) - 1.0);
        const double g2 = std::clamp(g1 + scale * (2.0 * unit_draw(rng) - 1.0), -r, r);
        const double s = std::abs(g1 - g2) + dist(x, y, m.frame(), m.manifold());
        if (s <= 0.0) continue;
        const double num = std::abs(graph_map(block_decompose(m, ref, x), g1) -
                                    graph_map(block_decompose(m, ref, y), g2));
        best = std::max(best, num / std::min(s, std::pow(s, alpha)));
    }
    return best;
}

double modulus_bound(const GraphTransformConstants& gc, const HyperbolicityConstants& hc) {
    const double la = std::pow(hc.l, hc.alpha);
    const double q = gc.lambda3 * gc.lambda3;
    if (!(q * la < 1.0)) {
        throw Error(ErrorKind::InvalidConfig, "graph constants violate lambda3^2 * l^alpha < 1");
    }
    return std::max(gc.C * la / (1.0 - q * la), gc.C / (1.0 - q));
}

double fiber_contraction(const ModelMap& m, const ReferenceSplitting& ref, double r, int pairs,
                         std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    double best = 0.0;
    for (int k = 0; k < pairs; ++k) {
        Point x;
        x.coords = Vec2(unit_draw(rng), unit_draw(rng));
        const double g1 = r * (2.0 * unit_draw(rng) - 1.0);
        const double g2 = r * (2.0 * unit_draw(rng) - 1.0);
        if (g1 == g2) continue;
        const Blocks b = block_decompose(m, ref, x);
        best = std::max(best, std::abs(graph_map(b, g1) - graph_map(b, g2)) / std::abs(g1 - g2));
    }
    return best;
}

}  // namespace hyperstab
