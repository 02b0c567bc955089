#include "hyperstab/experiment.hpp"

#include "hyperstab/error.hpp"
#include "hyperstab/io.hpp"
#include "hyperstab/norms.hpp"

#include "json.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>
#include <stdexcept>

namespace hyperstab {

using nlohmann::json;

namespace {

[[noreturn]] void invalid(const std::string& what) { throw Error(ErrorKind::InvalidConfig, what); }

void check_keys(const json& j, const std::string& where, std::initializer_list<const char*> allowed) {
    if (!j.is_object()) invalid(where + " must be an object");
    const std::set<std::string> ok(allowed.begin(), allowed.end());
    for (const auto& [key, value] : j.items()) {
        if (!ok.count(key)) invalid("unknown key '" + key + "' in " + where);
    }
}

double get_number(const json& j, const std::string& key) {
    const json& v = j.at(key);
    if (!v.is_number()) invalid("'" + key + "' must be a number");
    const double d = v.get<double>();
    if (!std::isfinite(d)) invalid("'" + key + "' must be finite");
    return d;
}

int get_int(const json& j, const std::string& key) {
    const json& v = j.at(key);
    if (!v.is_number_integer()) invalid("'" + key + "' must be an integer");
    return v.get<int>();
}

std::string get_string(const json& j, const std::string& key) {
    const json& v = j.at(key);
    if (!v.is_string()) invalid("'" + key + "' must be a string");
    return v.get<std::string>();
}

std::vector<TrigTerm> parse_terms(const json& j) {
    if (!j.is_array()) invalid("'terms' must be an array");
    std::vector<TrigTerm> out;
    for (const json& t : j) {
        check_keys(t, "trig term", {"component", "coeff", "k1", "k2", "phase"});
        TrigTerm term;
        if (t.contains("component")) term.component = get_int(t, "component");
        if (t.contains("coeff")) term.coeff = get_number(t, "coeff");
        if (t.contains("k1")) term.k1 = get_int(t, "k1");
        if (t.contains("k2")) term.k2 = get_int(t, "k2");
        if (t.contains("phase")) term.phase = get_number(t, "phase");
        if (term.component < 0 || term.component > 1) invalid("trig term component must be 0 or 1");
        out.push_back(term);
    }
    return out;
}

ModelSpec parse_model(const json& j, const std::string& where) {
    check_keys(j, where, {"kind", "matrix", "amplitude", "terms", "frame", "base", "phi"});
    ModelSpec s;
    if (!j.contains("kind")) invalid(where + " needs 'kind'");
    s.kind = get_string(j, "kind");
    if (s.kind != "linear_toral" && s.kind != "perturbed_toral" && s.kind != "morse_smale_circle" &&
        s.kind != "conjugated") {
        invalid("unknown model kind '" + s.kind + "'");
    }
    if (j.contains("matrix")) {
        const json& m = j.at("matrix");
        bool ok = m.is_array() && m.size() == 2;
        for (std::size_t r = 0; ok && r < 2; ++r) {
            ok = m[r].is_array() && m[r].size() == 2 && m[r][0].is_number_integer() && m[r][1].is_number_integer();
            if (ok) s.matrix.row(static_cast<Eigen::Index>(r)) << m[r][0].get<int>(), m[r][1].get<int>();
        }
        if (!ok) invalid("'matrix' must be a 2x2 integer array");
    }
    if (j.contains("frame")) {
        const std::string f = get_string(j, "frame");
        if (f != "eigen" && f != "identity") invalid("'frame' must be 'eigen' or 'identity'");
        s.eigenframe = f == "eigen";
    }
    if (s.kind == "conjugated") {
        if (!j.contains("base")) invalid("conjugated model needs 'base'");
        if (j.contains("amplitude") || j.contains("terms")) invalid("conjugated model takes 'phi', not 'amplitude'/'terms'");
        s.base = std::make_shared<ModelSpec>(parse_model(j.at("base"), where + ".base"));
        if (j.contains("phi")) {
            const json& p = j.at("phi");
            check_keys(p, where + ".phi", {"amplitude", "terms"});
            if (p.contains("amplitude")) s.amplitude = get_number(p, "amplitude");
            if (p.contains("terms")) s.terms = parse_terms(p.at("terms"));
        }
    } else {
        if (j.contains("base") || j.contains("phi")) invalid("'base'/'phi' only apply to conjugated models");
        if (j.contains("amplitude")) s.amplitude = get_number(j, "amplitude");
        if (j.contains("terms")) s.terms = parse_terms(j.at("terms"));
    }
    return s;
}

json terms_json(const TrigSeries& s) {
    json t = json::array();
    for (const auto& term : s.terms) {
        t.push_back({{"component", term.component}, {"coeff", term.coeff}, {"k1", term.k1}, {"k2", term.k2},
                     {"phase", term.phase}});
    }
    return t;
}

ManifoldKind spec_manifold(const ModelSpec& s) {
    if (s.kind == "morse_smale_circle") return ManifoldKind::Circle;
    if (s.kind == "conjugated") return spec_manifold(*s.base);
    return ManifoldKind::Torus2;
}

json model_json(const ModelSpec& s) {
    json j{{"kind", s.kind}};
    const ManifoldKind kind = spec_manifold(s);
    if (s.kind == "conjugated") {
        j["base"] = model_json(*s.base);
        const TrigSeries phi = s.series(kind);
        j["phi"] = {{"amplitude", phi.amplitude}, {"terms", terms_json(phi)}};
        return j;
    }
    if (kind == ManifoldKind::Torus2) {
        j["matrix"] = {{s.matrix(0, 0), s.matrix(0, 1)}, {s.matrix(1, 0), s.matrix(1, 1)}};
        j["frame"] = s.eigenframe ? "eigen" : "identity";
    }
    j["amplitude"] = s.amplitude;
    if (s.kind == "perturbed_toral") j["terms"] = terms_json(s.series(kind));
    return j;
}

}  // namespace

TrigSeries ModelSpec::series(ManifoldKind manifold) const {
    if (!terms.empty()) return TrigSeries{amplitude, terms};
    if (kind == "conjugated") return default_conjugacy(amplitude, manifold);
    return default_toral_perturbation(amplitude);
}

ModelMapPtr ModelSpec::build() const {
    try {
        if (kind == "linear_toral") return make_linear_toral(matrix, eigenframe);
        if (kind == "perturbed_toral") return make_perturbed_toral(matrix, series(ManifoldKind::Torus2), eigenframe);
        if (kind == "morse_smale_circle") return make_morse_smale_circle(amplitude);
        if (kind == "conjugated") {
            if (!base) invalid("conjugated model needs a base");
            ModelMapPtr b = base->build();
            return make_conjugated(b, series(b->manifold()));
        }
    } catch (const std::invalid_argument& e) {
        invalid(e.what());
    } catch (const std::domain_error& e) {
        invalid(e.what());
    }
    invalid("unknown model kind '" + kind + "'");
}

ExperimentConfig parse_config(const std::string& json_text) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw Error(ErrorKind::ParseError, std::string("config: ") + e.what());
    }
    check_keys(j, "config", {"model", "target", "resolution", "alpha", "window", "graph_constants", "series",
                             "projectors", "splitting", "solver", "alphas", "fields", "seed", "pair_budget"});
    ExperimentConfig c;
    try {
        if (!j.contains("model")) invalid("config needs 'model'");
        c.model = parse_model(j.at("model"), "model");
        if (j.contains("target")) c.target = parse_model(j.at("target"), "target");
        if (j.contains("resolution")) c.resolution = get_int(j, "resolution");
        if (c.resolution < 4 || c.resolution > 4096 || (c.resolution & (c.resolution - 1)) != 0) {
            invalid("'resolution' must be a power of two in [4, 4096]");
        }
        if (j.contains("alpha") && !(j.at("alpha").is_string() && j.at("alpha") == "auto")) {
            c.alpha = get_number(j, "alpha");
            if (!(*c.alpha > 0.0 && *c.alpha <= 1.0)) invalid("'alpha' must lie in (0, 1]");
        }
        if (j.contains("window") && !(j.at("window").is_string() && j.at("window") == "auto")) {
            c.window = get_int(j, "window");
            if (*c.window < 1) invalid("'window' must be >= 1");
        }
        if (j.contains("graph_constants") &&
            !(j.at("graph_constants").is_string() && j.at("graph_constants") == "auto")) {
            const json& g = j.at("graph_constants");
            check_keys(g, "graph_constants", {"lambda1", "lambda2", "lambda3", "r", "eps_graph"});
            GraphTransformConstants gc;
            gc.lambda1 = get_number(g, "lambda1");
            gc.lambda2 = get_number(g, "lambda2");
            gc.lambda3 = get_number(g, "lambda3");
            if (g.contains("r")) gc.r = get_number(g, "r");
            if (!(gc.r > 0.0)) invalid("graph constant r must be positive");
            gc.eps_graph = g.contains("eps_graph") ? get_number(g, "eps_graph")
                                                   : (1.0 / gc.lambda2 - 1.0 / gc.lambda3) / gc.r;
            c.graph = gc;
        }
        if (j.contains("series")) {
            const json& s = j.at("series");
            check_keys(s, "series", {"n_trunc", "tolerance"});
            if (s.contains("n_trunc") && s.contains("tolerance")) invalid("series takes 'n_trunc' or 'tolerance', not both");
            if (s.contains("n_trunc")) c.n_trunc = get_int(s, "n_trunc");
            if (c.n_trunc < 1) invalid("'n_trunc' must be >= 1");
            if (s.contains("tolerance")) {
                c.series_tolerance = get_number(s, "tolerance");
                if (!(*c.series_tolerance > 0.0)) invalid("series 'tolerance' must be positive");
            }
        }
        if (j.contains("projectors")) c.projectors = get_string(j, "projectors");
        if (c.projectors != "f" && c.projectors != "g") invalid("'projectors' must be 'f' or 'g'");
        if (j.contains("splitting")) {
            const json& s = j.at("splitting");
            check_keys(s, "splitting", {"tol", "max_iter"});
            if (s.contains("tol")) c.splitting_tol = get_number(s, "tol");
            if (s.contains("max_iter")) c.splitting_max_iter = get_int(s, "max_iter");
            if (!(c.splitting_tol > 0.0) || c.splitting_max_iter < 1) invalid("splitting tol/max_iter must be positive");
        }
        if (j.contains("solver")) {
            const json& s = j.at("solver");
            check_keys(s, "solver", {"tol", "max_iter", "r_ball", "eps_ball"});
            if (s.contains("tol")) c.solver_tol = get_number(s, "tol");
            if (s.contains("max_iter")) c.solver_max_iter = get_int(s, "max_iter");
            if (s.contains("r_ball")) c.r_ball = get_number(s, "r_ball");
            if (s.contains("eps_ball")) c.eps_ball = get_number(s, "eps_ball");
            if (c.solver_max_iter < 1) invalid("solver max_iter must be >= 1");
        }
        if (j.contains("alphas")) {
            const json& a = j.at("alphas");
            if (!a.is_array() || a.empty()) invalid("'alphas' must be a non-empty array");
            c.alphas.clear();
            for (const json& v : a) {
                if (!v.is_number()) invalid("'alphas' entries must be numbers");
                const double x = v.get<double>();
                if (!(x > 0.0 && x <= 1.0)) invalid("'alphas' entries must lie in (0, 1]");
                c.alphas.push_back(x);
            }
        }
        if (j.contains("fields")) c.fields = get_int(j, "fields");
        if (c.fields < 1) invalid("'fields' must be >= 1");
        if (j.contains("seed")) {
            if (!j.at("seed").is_number_unsigned()) invalid("'seed' must be a non-negative integer");
            c.seed = j.at("seed").get<std::uint64_t>();
        }
        if (j.contains("pair_budget")) {
            const int b = get_int(j, "pair_budget");
            if (b < 1000) invalid("'pair_budget' must be >= 1000");
            c.pair_budget = static_cast<std::size_t>(b);
        }
    } catch (const json::exception& e) {
        invalid(std::string("config: ") + e.what());
    }
    SolverConfig probe;
    probe.tol = c.solver_tol;
    probe.r_ball = c.r_ball;
    probe.eps_ball = c.eps_ball;
    probe.validate();
    return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::ParseError, "cannot open config " + path.string());
    std::ostringstream s;
    s << in.rdbuf();
    return parse_config(s.str());
}

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

struct Setup {
    ModelMapPtr f;
    HyperbolicityConstants hc;
    Grid grid;
    DfWindow window;
};

HyperbolicityConstants resolve_constants(const ModelMap& m, const ExperimentConfig& cfg) {
    HyperbolicityConstants hc;
    try {
        hc = hyperbolicity_constants(m, cfg.resolution);
    } catch (const std::domain_error& e) {
        invalid(e.what());
    }
    if (cfg.alpha) {
        const double la = std::pow(hc.l, *cfg.alpha);
        if (!(hc.lambda * la < 1.0)) invalid("alpha violates lambda * l^alpha < 1");
        const double upper = 0.98 / la;
        if (!(upper > hc.lambda)) invalid("alpha leaves no lambda' with lambda < lambda' < 1/l^alpha");
        hc.alpha = *cfg.alpha;
        hc.lambda_prime = std::sqrt(hc.lambda * upper);
    }
    return hc;
}

Setup make_setup(const ModelMapPtr& f, const ExperimentConfig& cfg) {
    const HyperbolicityConstants hc = resolve_constants(*f, cfg);
    const Grid grid(cfg.resolution, f->manifold());
    const double diam = diameter(f->frame(), f->manifold());
    const DfWindow w = cfg.window ? DfWindow{*cfg.window} : default_window(hc.lambda, diam / cfg.resolution, diam);
    return Setup{f, hc, grid, w};
}

RightInverse make_inverse(const Setup& s, const ExperimentConfig& cfg, const ModelMapPtr& g) {
    const int n_trunc = cfg.series_tolerance ? 0 : cfg.n_trunc;
    const double tol = cfg.series_tolerance.value_or(0.0);
    if (s.f->manifold() == ManifoldKind::Circle) {
        const BasicSetData sets = basic_sets(*s.f);
        return RightInverse(s.f, ComponentProjectors::morse_smale(sets), PartitionOfUnity::circle_bump(sets), s.hc,
                            s.grid, n_trunc, tol);
    }
    const ModelMapPtr& src = cfg.projectors == "g" && g ? g : s.f;
    ComponentProjectors proj = [&] {
        if (src->is_linear()) return ComponentProjectors::exact_linear(*src);
        try {
            return ComponentProjectors::from_splitting(
                solve_invariant_splitting(src, cfg.resolution, cfg.splitting_tol, cfg.splitting_max_iter));
        } catch (const std::invalid_argument& e) {
            throw Error(ErrorKind::Divergence, std::string("invariant splitting: ") + e.what());
        } catch (const std::domain_error& e) {
            throw Error(ErrorKind::Divergence, std::string("invariant splitting: ") + e.what());
        }
    }();
    return RightInverse(s.f, std::move(proj), PartitionOfUnity::single(ManifoldKind::Torus2), s.hc, s.grid, n_trunc,
                        tol);
}

json constants_json(const Setup& s) {
    return {{"lambda", s.hc.lambda}, {"l", s.hc.l},          {"alpha", s.hc.alpha},
            {"lambda_prime", s.hc.lambda_prime}, {"window", s.window.half_width}, {"resolution", s.grid.resolution()}};
}

json budget_json(const SeriesBudget& b) {
    return {{"n_trunc", b.n_trunc}, {"lambda_prime", b.lambda_prime}, {"kappa", b.kappa},
            {"rho", b.rho},         {"K", b.K_decay},                 {"tail_bound", b.tail_bound}};
}

json config_json(const ExperimentConfig& c) {
    json j{{"model", model_json(c.model)},
           {"resolution", c.resolution},
           {"projectors", c.projectors},
           {"splitting", {{"tol", c.splitting_tol}, {"max_iter", c.splitting_max_iter}}},
           {"solver",
            {{"tol", c.solver_tol}, {"max_iter", c.solver_max_iter}, {"r_ball", c.r_ball}, {"eps_ball", c.eps_ball}}},
           {"alphas", c.alphas},
           {"fields", c.fields},
           {"seed", c.seed},
           {"pair_budget", c.pair_budget}};
    if (c.target) j["target"] = model_json(*c.target);
    j["alpha"] = c.alpha ? json(*c.alpha) : json("auto");
    j["window"] = c.window ? json(*c.window) : json("auto");
    if (c.series_tolerance) {
        j["series"] = {{"tolerance", *c.series_tolerance}};
    } else {
        j["series"] = {{"n_trunc", c.n_trunc}};
    }
    if (c.graph) {
        j["graph_constants"] = {{"lambda1", c.graph->lambda1}, {"lambda2", c.graph->lambda2},
                                {"lambda3", c.graph->lambda3}, {"r", c.graph->r}, {"eps_graph", c.graph->eps_graph}};
    } else {
        j["graph_constants"] = "auto";
    }
    return j;
}

void write_manifest(const std::filesystem::path& out, const std::string& command, const ExperimentConfig& cfg,
                    json resolved) {
    json m{{"command", command}, {"config", config_json(cfg)}, {"resolved", std::move(resolved)}};
    write_text(out / "manifest.json", m.dump(2) + "\n");
}

std::string join(std::initializer_list<std::string> cells) {
    std::string s;
    for (const auto& c : cells) {
        if (!s.empty()) s += ',';
        s += c;
    }
    return s;
}

CommandSummary finish(const std::filesystem::path& out, std::string header, std::string row) {
    write_csv(out / "summary.csv", header, {row});
    return CommandSummary{std::move(header), std::move(row)};
}

std::vector<double> component(const std::vector<Vec2>& values, int k) {
    std::vector<double> c(values.size());
    std::transform(values.begin(), values.end(), c.begin(), [k](const Vec2& v) { return v(k); });
    return c;
}

template <class Fn>
auto as_divergence(const std::string& what, Fn&& fn) {
    try {
        return fn();
    } catch (const std::invalid_argument& e) {
        throw Error(ErrorKind::Divergence, what + ": " + e.what());
    } catch (const std::domain_error& e) {
        throw Error(ErrorKind::Divergence, what + ": " + e.what());
    }
}

}  // namespace

CommandSummary run_splitting(const ExperimentConfig& cfg, const std::filesystem::path& out) {
    const ModelMapPtr f = cfg.model.build();
    if (f->manifold() != ManifoldKind::Torus2) invalid("splitting needs a toral model");
    const Setup s = make_setup(f, cfg);
    GraphTransformConstants gc = cfg.graph.value_or(GraphTransformConstants::automatic(s.hc));
    gc.validate(s.hc);

    const ReferenceSplitting ref = ReferenceSplitting::eigen(*f);
    const ModelMapPtr inv = make_inverted(f);
    const SplittingSection zero = SplittingSection::zero(s.grid, gc.r);
    const auto u = as_divergence("unstable bundle", [&] {
        return solve_invariant_section(*f, ref, zero, cfg.splitting_tol, cfg.splitting_max_iter);
    });
    const auto st = as_divergence("stable bundle", [&] {
        return solve_invariant_section(*inv, ref.swapped(), zero, cfg.splitting_tol, cfg.splitting_max_iter);
    });
    const InvariantSplitting split{ref, u, st};

    const double defect_u = pushed_graph_defect(*f, ref, u.section);
    const double defect_s = pushed_graph_defect(*inv, ref.swapped(), st.section);
    const double modulus_u = modulus_constant(u.section, *f, s.hc.alpha, s.window, cfg.pair_budget);
    const double modulus_s = modulus_constant(st.section, *f, s.hc.alpha, s.window, cfg.pair_budget);
    gc.C = measure_gamma_constant(*f, ref, gc.r, s.hc.alpha, 2000, cfg.seed);
    gc.K = modulus_bound(gc, s.hc);
    const double fiber = fiber_contraction(*f, ref, gc.r, static_cast<int>(cfg.pair_budget), cfg.seed);
    const double angle = split.min_angle(f->frame());

    std::filesystem::create_directories(out);
    write_pgm16(out / "tau_u.pgm", s.grid, u.section.tau);
    write_pgm16(out / "tau_s.pgm", s.grid, st.section.tau);

    json resolved = constants_json(s);
    resolved["graph_constants"] = {{"lambda1", gc.lambda1}, {"lambda2", gc.lambda2}, {"lambda3", gc.lambda3},
                                   {"r", gc.r},             {"eps_graph", gc.eps_graph}, {"C", gc.C},
                                   {"K", gc.K}};
    write_manifest(out, "splitting", cfg, std::move(resolved));

    const std::string header =
        "resolution,iterations_u,iterations_s,max_ratio_u,max_ratio_s,residual_u,residual_s,defect_u,defect_s,"
        "sup_tau_u,sup_tau_s,modulus_u,modulus_s,modulus_bound,fiber_contraction,lambda1,min_angle";
    const std::string row = join({std::to_string(cfg.resolution), std::to_string(u.iterations),
                                  std::to_string(st.iterations), fmt(u.max_ratio), fmt(st.max_ratio),
                                  fmt(u.residual), fmt(st.residual), fmt(defect_u), fmt(defect_s),
                                  fmt(u.section.sup_norm()), fmt(st.section.sup_norm()), fmt(modulus_u),
                                  fmt(modulus_s), fmt(gc.K), fmt(fiber), fmt(gc.lambda1), fmt(angle)});
    return finish(out, header, row);
}

CommandSummary run_conjugacy(const ExperimentConfig& cfg, const std::filesystem::path& out) {
    if (!cfg.target) invalid("conjugacy needs a 'target' model");
    const ModelMapPtr f = cfg.model.build();
    const ModelMapPtr g = cfg.target->build();
    if (f->manifold() != g->manifold()) invalid("model and target live on different manifolds");
    const Setup s = make_setup(f, cfg);
    const RightInverse J = make_inverse(s, cfg, g);

    SolverConfig sc;
    sc.tol = cfg.solver_tol;
    sc.max_iter = cfg.solver_max_iter;
    sc.r_ball = cfg.r_ball;
    sc.eps_ball = cfg.eps_ball;
    sc.alpha = s.hc.alpha;
    sc.window = s.window;
    sc.pair_budget = cfg.pair_budget;
    sc.seed = cfg.seed;
    const ConjugacyResult res = solve_conjugacy(*f, *g, J, s.grid, sc);

    std::vector<PeriodicMatch> matches;
    double fix_error = 0.0;
    const int max_period = f->manifold() == ManifoldKind::Torus2 ? 3 : 1;
    for (int p = 1; p <= max_period; ++p) {
        try {
            for (auto& m : match_periodic_points(*f, *g, J, p)) {
                if (m.period != p) continue;
                fix_error = std::max(fix_error, m.error);
                matches.push_back(m);
            }
        } catch (const Error&) {
            throw;
        } catch (const std::runtime_error&) {
            fix_error = kNaN;
        }
    }

    const NormContext ctx(*f, s.grid, s.window, cfg.pair_budget, cfg.seed);
    const HolderReport holder = holder_report(res.eta, *f, s.hc, cfg.alphas, ctx);

    double phi_error = kNaN;
    const ModelSpec& t = *cfg.target;
    // Only meaningful where the conjugacy is unique (Anosov case).
    if (f->manifold() == ManifoldKind::Torus2 && t.kind == "conjugated" && model_json(*t.base) == model_json(cfg.model)) {
        phi_error = distance_to(res.eta, t.series(f->manifold()));
    }
    const double amplitude = t.amplitude;

    std::filesystem::create_directories(out);
    write_field_file(out / "eta.txt", s.grid, res.eta.values);
    write_pgm16(out / "eta_u.pgm", s.grid, component(res.eta.values, 0));
    if (s.grid.dim() == 2) write_pgm16(out / "eta_v.pgm", s.grid, component(res.eta.values, 1));

    std::vector<std::string> trace;
    for (std::size_t n = 0; n < std::max(res.updates.size(), res.norms.size()); ++n) {
        const double upd = n < res.updates.size() ? res.updates[n] : kNaN;
        const double ratio = n >= 1 && n - 1 < res.ratios.size() ? res.ratios[n - 1] : kNaN;
        const double norm = n < res.norms.size() ? res.norms[n] : kNaN;
        trace.push_back(join({std::to_string(n), fmt(upd), fmt(ratio), fmt(norm)}));
    }
    write_csv(out / "trace.csv", "iteration,update,ratio,norm", trace);

    const auto& h = res.homeo;
    std::ostringstream cert;
    cert << "certificate: " << (h.positive ? "positive" : "negative") << '\n'
         << "lf: " << fmt(h.lf) << " bound 0.5 " << (h.lf_ok ? "ok" : "fail") << '\n'
         << "injective: " << (h.injective ? "yes" : "no");
    if (h.witness) {
        cert << " witness " << h.witness->first << ' ' << h.witness->second << " distance "
             << fmt(h.witness_distance);
    }
    cert << '\n'
         << "degree: " << h.degree(0, 0) << ' ' << h.degree(0, 1) << ' ' << h.degree(1, 0) << ' '
         << h.degree(1, 1) << ' ' << (h.degree_ok ? "ok" : "fail") << '\n';
    write_text(out / "certificate.txt", cert.str());

    std::vector<std::string> hrows;
    for (const auto& e : holder.entries) {
        hrows.push_back(join({fmt(e.alpha), e.admissible ? "1" : "0", e.report.csv_row()}));
    }
    write_csv(out / "holder.csv", "alpha_requested,admissible," + NormReport::csv_header(), hrows);

    std::vector<std::string> prows;
    for (const auto& m : matches) {
        prows.push_back(join({std::to_string(m.period), fmt(m.p.coords(0)), fmt(m.p.coords(1)),
                              fmt(m.hp.coords(0)), fmt(m.hp.coords(1)), fmt(m.q.coords(0)), fmt(m.q.coords(1)),
                              fmt(m.error)}));
    }
    write_csv(out / "periodic.csv", "period,p1,p2,hp1,hp2,q1,q2,error", prows);

    const double alpha_hat = holder.alpha_hat.value_or(kNaN);
    const auto& pr = res.perturbation;
    const std::vector<std::pair<std::string, double>> kv = {
        {"converged", res.converged ? 1.0 : 0.0},
        {"iterations", res.iterations},
        {"max_ratio", res.max_ratio},
        {"residual", res.residual},
        {"ball_confinement", res.ball_confinement},
        {"eps_ball", cfg.eps_ball},
        {"c0", res.report.c0},
        {"holder", res.report.holder},
        {"df_lip", res.report.df_lip},
        {"combined", res.report.combined},
        {"q_c0", pr.q_c0},
        {"q_holder", pr.q_holder},
        {"q_df", pr.q_df},
        {"eps_prime", pr.eps_prime},
        {"holder_bound", pr.holder_bound},
        {"df_bound", pr.df_bound},
        {"j_norm_c0", res.j_norm.c0},
        {"j_norm_alpha_f", res.j_norm.alpha_f},
        {"homeomorphism", h.positive ? 1.0 : 0.0},
        {"fix_error", fix_error},
        {"phi_error", phi_error},
        {"alpha_hat", alpha_hat},
        {"n_trunc", J.budget().n_trunc},
        {"tail_bound", J.budget().tail_bound},
    };
    std::vector<std::string> rrows;
    for (const auto& [k, v] : kv) rrows.push_back(k + "," + fmt(v));
    write_csv(out / "result.csv", "key,value", rrows);

    json resolved = constants_json(s);
    resolved["series"] = budget_json(J.budget());
    write_manifest(out, "conjugacy", cfg, std::move(resolved));

    const std::string header =
        "resolution,amplitude,converged,iterations,max_ratio,residual,ball_confinement,c0,holder,df_lip,homeomorphism,"
        "fix_error,phi_error,alpha_hat";
    const std::string row =
        join({std::to_string(cfg.resolution), fmt(amplitude), res.converged ? "1" : "0",
              std::to_string(res.iterations), fmt(res.max_ratio), fmt(res.residual), fmt(res.ball_confinement),
              fmt(res.report.c0), fmt(res.report.holder), fmt(res.report.df_lip), h.positive ? "1" : "0",
              fmt(fix_error), fmt(phi_error), fmt(alpha_hat)});
    return finish(out, header, row);
}

CommandSummary run_inverse_check(const ExperimentConfig& cfg, const std::filesystem::path& out) {
    const ModelMapPtr f = cfg.model.build();
    const Setup s = make_setup(f, cfg);
    const RightInverse J = make_inverse(s, cfg, nullptr);
    const SeriesBudget& b = J.budget();

    std::vector<std::string> rrows;
    double max_residual = 0.0;
    double max_ratio = 0.0;
    const DiscreteVectorField probe = random_trig_field(s.grid, f->frame(), cfg.seed);
    for (int k = 0; k < cfg.fields; ++k) {
        const auto eta = k == 0 ? probe : random_trig_field(s.grid, f->frame(), cfg.seed + static_cast<std::uint64_t>(k));
        const RightInverseResidual r = J.verify(eta);
        max_residual = std::max(max_residual, r.residual);
        max_ratio = std::max(max_ratio, r.ratio);
        rrows.push_back(join({std::to_string(k), fmt(r.eta_norm), fmt(r.residual), fmt(r.tail_bound), fmt(r.ratio)}));
    }

    std::vector<std::string> drows;
    std::vector<std::string> grows;
    double decay_rate = 0.0;
    bool within = true;
    const NormContext ctx(*f, s.grid, s.window, cfg.pair_budget, cfg.seed);
    const int growth_steps = std::min(b.n_trunc, 12);
    for (std::size_t i = 0; i < J.projectors().count(); ++i) {
        if (!J.projectors().has_stable(i)) continue;
        const DecayReport d = J.measure_decay(probe, i, b.n_trunc);
        decay_rate = std::max(decay_rate, d.fitted_rate);
        for (std::size_t n = 0; n < d.norms.size(); ++n) {
            drows.push_back(join({std::to_string(i), std::to_string(n), fmt(d.norms[n])}));
        }
        const HolderGrowthReport gr = J.measure_holder_growth(probe, i, growth_steps, ctx);
        within = within && gr.within;
        for (std::size_t n = 0; n < gr.values.size(); ++n) {
            grows.push_back(join({std::to_string(i), std::to_string(n), fmt(gr.values[n]), fmt(gr.bounds[n])}));
        }
    }

    std::filesystem::create_directories(out);
    write_csv(out / "residuals.csv", "field,eta_norm,residual,tail_bound,ratio", rrows);
    write_csv(out / "decay.csv", "component,n,norm", drows);
    write_csv(out / "holder_growth.csv", "component,n,value,bound", grows);
    json resolved = constants_json(s);
    resolved["series"] = budget_json(b);
    write_manifest(out, "inverse-check", cfg, std::move(resolved));

    const std::string header = "resolution,n_trunc,kappa,rho,K,tail_bound,max_residual,max_ratio,decay_rate,holder_within";
    const std::string row = join({std::to_string(cfg.resolution), std::to_string(b.n_trunc), fmt(b.kappa), fmt(b.rho),
                                  fmt(b.K_decay), fmt(b.tail_bound), fmt(max_residual), fmt(max_ratio),
                                  fmt(decay_rate), within ? "1" : "0"});
    return finish(out, header, row);
}

CommandSummary run_norms(const ExperimentConfig& cfg, const std::filesystem::path& field,
                         const std::filesystem::path& out) {
    const FieldFile ff = read_field_file(field);
    const ModelMapPtr f = cfg.model.build();
    if (ff.grid.kind() != f->manifold()) invalid("field dimension does not match the model manifold");
    ExperimentConfig local = cfg;
    local.resolution = ff.grid.resolution();
    const Setup s = make_setup(f, local);
    const DiscreteVectorField eta(ff.grid, f->frame(), ff.values);
    const NormContext ctx(*f, ff.grid, s.window, cfg.pair_budget, cfg.seed);

    std::vector<double> alphas{s.hc.alpha};
    alphas.insert(alphas.end(), cfg.alphas.begin(), cfg.alphas.end());
    std::vector<std::string> rows;
    NormReport primary;
    for (std::size_t k = 0; k < alphas.size(); ++k) {
        const NormReport r = field_norms(eta, alphas[k], ctx);
        if (k == 0) primary = r;
        rows.push_back(r.csv_row());
    }
    const double alpha_hat = estimate_exponent(eta, *f).value_or(kNaN);

    std::filesystem::create_directories(out);
    write_csv(out / "norms.csv", NormReport::csv_header(), rows);
    json resolved = constants_json(s);
    resolved["field"] = field.string();
    write_manifest(out, "norms", local, std::move(resolved));

    const std::string header = "resolution,alpha,c0,holder,df_lip,combined,alpha_hat";
    const std::string row = join({std::to_string(local.resolution), fmt(primary.alpha), fmt(primary.c0),
                                  fmt(primary.holder), fmt(primary.df_lip), fmt(primary.combined), fmt(alpha_hat)});
    return finish(out, header, row);
}

namespace {

void apply_override(json& c, const std::string& parameter, double v) {
    if (parameter == "resolution") {
        if (v != std::floor(v)) invalid("resolution sweep values must be integers");
        c["resolution"] = static_cast<int>(v);
    } else if (parameter == "alpha") {
        c["alpha"] = v;
    } else if (parameter == "eps_p") {
        json& m = c.contains("target") ? c["target"] : c["model"];
        if (!m.is_object()) invalid("sweep base has no model to perturb");
        if (m.value("kind", "") == "conjugated") {
            if (!m.contains("phi")) m["phi"] = json::object();
            m["phi"]["amplitude"] = v;
        } else {
            m["amplitude"] = v;
        }
    } else {
        invalid("unknown sweep parameter '" + parameter + "'");
    }
}

}  // namespace

CommandSummary run_sweep(const std::filesystem::path& sweep_file, const std::filesystem::path& out,
                         std::optional<std::uint64_t> seed) {
    std::ifstream in(sweep_file);
    if (!in) throw Error(ErrorKind::ParseError, "cannot open sweep file " + sweep_file.string());
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        throw Error(ErrorKind::ParseError, std::string("sweep: ") + e.what());
    }
    check_keys(doc, "sweep", {"base", "parameter", "values", "command"});
    if (!doc.contains("base") || !doc.contains("parameter") || !doc.contains("values")) {
        invalid("sweep needs 'base', 'parameter' and 'values'");
    }
    const std::string parameter = get_string(doc, "parameter");
    const std::string command = doc.contains("command") ? get_string(doc, "command") : "conjugacy";
    if (command != "splitting" && command != "conjugacy" && command != "inverse-check") {
        invalid("unknown sweep command '" + command + "'");
    }
    const json& values = doc.at("values");
    if (!values.is_array() || values.empty()) invalid("'values' must be a non-empty array");
    for (const json& v : values) {
        if (!v.is_number()) invalid("'values' entries must be numbers");
    }
    // Validates the base once so that a broken base fails the whole sweep.
    std::optional<HyperbolicityConstants> hc;
    {
        json probe = doc.at("base");
        apply_override(probe, parameter, values[0].get<double>());
        const ExperimentConfig base = parse_config(probe.dump());
        if (parameter == "alpha") {
            try {
                hc = hyperbolicity_constants(*base.model.build(), base.resolution);
            } catch (const std::domain_error& e) {
                invalid(e.what());
            }
        }
    }

    std::filesystem::create_directories(out);
    std::string header;
    std::vector<std::pair<std::string, std::optional<std::string>>> results;
    for (std::size_t k = 0; k < values.size(); ++k) {
        const double v = values[k].get<double>();
        json c = doc.at("base");
        std::string status = "ok";
        std::optional<std::string> row;
        try {
            apply_override(c, parameter, v);
            if (seed) c["seed"] = *seed;
            const ExperimentConfig cfg = parse_config(c.dump());
            const auto dir = out / ("run_" + std::to_string(k));
            CommandSummary s = command == "splitting"   ? run_splitting(cfg, dir)
                               : command == "conjugacy" ? run_conjugacy(cfg, dir)
                                                        : run_inverse_check(cfg, dir);
            header = s.header;
            row = s.row;
        } catch (const Error& e) {
            status = "error:" + std::to_string(e.exit_code());
        } catch (const std::invalid_argument&) {
            status = "error:2";
        } catch (const std::domain_error&) {
            status = "error:2";
        } catch (const std::exception&) {
            status = "error:1";
        }
        std::string lead = fmt(v) + "," + status;
        if (hc) lead += hc->lambda * std::pow(hc->l, v) < 1.0 ? ",1" : ",0";
        results.emplace_back(lead, row);
    }
    const auto blanks = std::string(static_cast<std::size_t>(std::count(header.begin(), header.end(), ',')) +
                                        (header.empty() ? 0 : 1),
                                    ',');
    std::vector<std::string> rows;
    for (const auto& [lead, row] : results) rows.push_back(lead + (row ? "," + *row : blanks));
    const std::string full_header =
        std::string(hc ? "value,status,admissible" : "value,status") + (header.empty() ? std::string() : "," + header);
    write_csv(out / "sweep.csv", full_header, rows);
    json manifest{{"command", "sweep"}, {"sweep", doc}};
    if (seed) manifest["seed"] = *seed;
    write_text(out / "manifest.json", manifest.dump(2) + "\n");
    return CommandSummary{full_header, rows.back()};
}

}  // namespace hyperstab
