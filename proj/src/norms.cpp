#include "hyperstab/norms.hpp"

#include "hyperstab/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>
#include <stdexcept>

namespace hyperstab {

DfWindow default_window(double lambda, double separation, double diam) {
    if (!(lambda > 0.0 && lambda < 1.0) || !(separation > 0.0)) {
        throw std::invalid_argument("default_window needs lambda in (0,1) and positive separation");
    }
    const double w = std::ceil(std::log(diam / separation) / std::log(1.0 / lambda));
    return DfWindow{std::max(1, static_cast<int>(w))};
}

std::pair<double, int> df_distance_argmax(const ModelMap& m, const Point& x, const Point& y, DfWindow w) {
    const auto kind = m.manifold();
    const auto& frame = m.frame();
    double best = dist(x, y, frame, kind);
    int arg = 0;
    Point a = x;
    Point b = y;
    for (int n = 1; n <= w.half_width; ++n) {
        a = m.inverse(a);
        b = m.inverse(b);
        const double d = dist(a, b, frame, kind);
        if (d >= best) {
            best = d;
            arg = -n;
        }
    }
    a = x;
    b = y;
    for (int n = 1; n <= w.half_width; ++n) {
        a = m.evaluate(a);
        b = m.evaluate(b);
        const double d = dist(a, b, frame, kind);
        if (d > best) {
            best = d;
            arg = n;
        }
    }
    return {best, arg};
}

double df_distance(const ModelMap& m, const Point& x, const Point& y, DfWindow w) {
    if (w.half_width < 0) throw std::invalid_argument("d_f window must be nonnegative");
    return df_distance_argmax(m, x, y, w).first;
}

double rho_f(const ModelMap& m, const Point& x, const Point& y, double alpha, DfWindow w) {
    if (!(alpha > 0.0 && alpha <= 1.0)) throw std::invalid_argument("rho_f needs alpha in (0,1]");
    const double d = dist(x, y, m.frame(), m.manifold());
    return std::min(std::pow(d, alpha), df_distance(m, x, y, w));
}

std::string NormReport::csv_header() { return "alpha,W,c0,holder,df_lip,combined,pairs"; }

std::string NormReport::csv_row() const {
    char buf[256];
    std::snprintf(buf, sizeof buf, "%.17g,%d,%.17g,%.17g,%.17g,%.17g,%zu", alpha, window, c0, holder, df_lip,
                  combined, pairs);
    return buf;
}

OrbitTable::OrbitTable(const ModelMap& m, const Grid& grid, DfWindow w)
    : grid_(grid), window_(w), frame_(m.frame()) {
    if (w.half_width < 0) throw std::invalid_argument("d_f window must be nonnegative");
    const std::size_t n = grid.size();
    points_.resize(static_cast<std::size_t>(2 * w.half_width + 1) * n);
    const auto offset = [&](int k) { return static_cast<std::size_t>(k + w.half_width) * n; };
    parallel_for(n, [&](std::size_t i) {
        const Point x = grid.point(i);
        points_[offset(0) + i] = x;
        Point a = x;
        for (int k = 1; k <= w.half_width; ++k) {
            a = m.evaluate(a);
            points_[offset(k) + i] = a;
        }
        a = x;
        for (int k = 1; k <= w.half_width; ++k) {
            a = m.inverse(a);
            points_[offset(-k) + i] = a;
        }
    });
}

double OrbitTable::df(std::size_t a, std::size_t b) const {
    double best = 0.0;
    for (int k = -window_.half_width; k <= window_.half_width; ++k) {
        best = std::max(best, dist(at(a, k), at(b, k), frame_, grid_.kind()));
    }
    return best;
}

PairSample PairSample::build(const Grid& grid, std::size_t budget, std::uint64_t seed) {
    PairSample s;
    const int n = grid.resolution();
    const bool torus = grid.kind() == ManifoldKind::Torus2;
    s.pairs.reserve(grid.size() * (torus ? 2 : 1) + budget);
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const int i1 = static_cast<int>(i % static_cast<std::size_t>(n));
        const int i2 = static_cast<int>(i / static_cast<std::size_t>(n));
        s.pairs.emplace_back(static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(grid.index(i1 + 1, i2)));
        if (torus) {
            s.pairs.emplace_back(static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(grid.index(i1, i2 + 1)));
        }
    }
    // Kronecker sequence in [0,1)^{2d} (generalized golden ratio), seeded shift.
    const int dims = torus ? 4 : 2;
    double phi = 2.0;
    for (int it = 0; it < 64; ++it) phi = std::pow(1.0 + phi, 1.0 / (dims + 1));
    double step[4];
    for (int k = 0; k < dims; ++k) step[k] = std::fmod(std::pow(1.0 / phi, k + 1), 1.0);
    std::mt19937_64 rng(seed);
    double shift[4];
    for (int k = 0; k < dims; ++k) shift[k] = static_cast<double>(rng() >> 11) * 0x1.0p-53;
    std::size_t added = 0;
    for (std::size_t k = 1; added < budget && k < 64 * budget + 64; ++k) {
        double u[4];
        for (int c = 0; c < dims; ++c) {
            u[c] = std::fmod(shift[c] + static_cast<double>(k) * step[c], 1.0);
        }
        const auto cell = [n](double v) { return std::min(n - 1, static_cast<int>(v * n)); };
        const std::size_t a = torus ? grid.index(cell(u[0]), cell(u[1])) : grid.index(cell(u[0]));
        const std::size_t b = torus ? grid.index(cell(u[2]), cell(u[3])) : grid.index(cell(u[1]));
        if (a == b) continue;
        s.pairs.emplace_back(static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(b));
        ++added;
    }
    return s;
}

NormContext::NormContext(const ModelMap& m, const Grid& grid, DfWindow w, std::size_t pair_budget,
                         std::uint64_t seed)
    : grid_(grid),
      window_(w),
      frame_(m.frame()),
      orbits_(m, grid, w),
      sample_(PairSample::build(grid, pair_budget, seed)) {
    if (grid.kind() != m.manifold()) throw std::invalid_argument("grid does not match the map's manifold");
    const std::size_t np = sample_.pairs.size();
    d_.resize(np);
    df_.resize(np);
    parallel_for(np, [&](std::size_t k) {
        const auto [a, b] = sample_.pairs[k];
        d_[k] = dist(grid_.point(a), grid_.point(b), frame_, grid_.kind());
        df_[k] = orbits_.df(a, b);
    });
}

NormReport field_norms(const DiscreteVectorField& eta, double alpha, const NormContext& ctx) {
    if (!(eta.grid == ctx.grid())) throw std::invalid_argument("field grid does not match norm context");
    NormReport r;
    r.alpha = alpha;
    r.window = ctx.window().half_width;
    r.pairs = ctx.sample().pairs.size();
    r.c0 = eta.sup_norm();
    const auto& pairs = ctx.sample().pairs;
    const auto& d = ctx.distances();
    const auto& df = ctx.df_distances();
    for (std::size_t k = 0; k < pairs.size(); ++k) {
        const auto [a, b] = pairs[k];
        const double diff = eta.frame.norm(eta.values[a] - eta.values[b]);
        if (diff == 0.0) continue;
        r.holder = std::max(r.holder, diff / std::pow(d[k], alpha));
        r.df_lip = std::max(r.df_lip, diff / df[k]);
    }
    r.combined = std::max({r.c0, r.holder, r.df_lip});
    return r;
}

NormReport field_norms(const DiscreteVectorField& eta, double alpha, const ModelMap& m, DfWindow w,
                       std::size_t pair_budget) {
    if (pair_budget < 1000) throw std::invalid_argument("pair_budget must be at least 1000");
    const NormContext ctx(m, eta.grid, w, pair_budget);
    return field_norms(eta, alpha, ctx);
}

double scalar_holder(std::span<const double> values, double alpha, const NormContext& ctx) {
    const auto& pairs = ctx.sample().pairs;
    const auto& d = ctx.distances();
    double best = 0.0;
    for (std::size_t k = 0; k < pairs.size(); ++k) {
        const double diff = std::abs(values[pairs[k].first] - values[pairs[k].second]);
        if (diff > 0.0) best = std::max(best, diff / std::pow(d[k], alpha));
    }
    return best;
}

double scalar_rho_modulus(std::span<const double> values, double alpha, const NormContext& ctx) {
    const auto& pairs = ctx.sample().pairs;
    const auto& d = ctx.distances();
    const auto& df = ctx.df_distances();
    double best = 0.0;
    for (std::size_t k = 0; k < pairs.size(); ++k) {
        const double diff = std::abs(values[pairs[k].first] - values[pairs[k].second]);
        if (diff > 0.0) best = std::max(best, diff / std::min(std::pow(d[k], alpha), df[k]));
    }
    return best;
}

std::optional<double> estimate_exponent(const DiscreteVectorField& eta, const ModelMap& m) {
    const Grid& grid = eta.grid;
    const int n = grid.resolution();
    const bool torus = grid.kind() == ManifoldKind::Torus2;
    int max_level = 0;
    while ((2 << max_level) <= n / 16 && max_level < 5) ++max_level;
    max_level = std::max(max_level, 2);

    std::vector<double> xs;
    std::vector<double> ys;
    for (int level = 0; level <= max_level; ++level) {
        const int s = 1 << level;
        for (int axis = 0; axis < (torus ? 2 : 1); ++axis) {
            double osc = 0.0;
            for (std::size_t i = 0; i < grid.size(); ++i) {
                const int i1 = static_cast<int>(i % static_cast<std::size_t>(n));
                const int i2 = static_cast<int>(i / static_cast<std::size_t>(n));
                const std::size_t j = axis == 0 ? grid.index(i1 + s, i2) : grid.index(i1, i2 + s);
                osc = std::max(osc, eta.frame.norm(eta.values[i] - eta.values[j]));
            }
            if (osc <= 0.0) continue;
            Point step;
            step.coords(axis) = static_cast<double>(s) / n;
            const double d = dist(Point{}, step, m.frame(), grid.kind());
            xs.push_back(std::log(d));
            ys.push_back(std::log(osc));
        }
    }
    if (xs.size() < 2) return std::nullopt;
    const double k = static_cast<double>(xs.size());
    double mx = 0.0;
    double my = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        mx += xs[i];
        my += ys[i];
    }
    mx /= k;
    my /= k;
    double sxy = 0.0;
    double sxx = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        sxy += (xs[i] - mx) * (ys[i] - my);
        sxx += (xs[i] - mx) * (xs[i] - mx);
    }
    if (sxx <= 0.0) return std::nullopt;
    return std::clamp(sxy / sxx, 1e-6, 1.1);
}

}  // namespace hyperstab
