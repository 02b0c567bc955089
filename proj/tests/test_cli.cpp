#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "hyperstab/error.hpp"
#include "hyperstab/experiment.hpp"
#include "hyperstab/io.hpp"

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <vector>

namespace fs = std::filesystem;
using namespace hyperstab;

namespace {

const fs::path kRoot = fs::temp_directory_path() / "hyperstab_cli_test";

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

fs::path write_json(const std::string& name, const std::string& body) {
    fs::create_directories(kRoot);
    const fs::path p = kRoot / name;
    std::ofstream(p) << body;
    return p;
}

struct Run {
    int code = -1;
    std::string err;
};

Run run(const std::string& args) {
    fs::create_directories(kRoot);
    const fs::path err = kRoot / "stderr.txt";
    const std::string cmd = std::string(HYPERSTAB_CLI) + " " + args + " > /dev/null 2> " + err.string();
    const int status = std::system(cmd.c_str());
    return Run{WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(err)};
}

std::vector<std::string> split(const std::string& line) {
    std::vector<std::string> cells;
    std::stringstream s(line);
    std::string c;
    while (std::getline(s, c, ',')) cells.push_back(c);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    return cells;
}

// Rows of a CSV file as header -> cell maps.
std::vector<std::map<std::string, std::string>> read_csv(const fs::path& p) {
    std::ifstream in(p);
    std::string line;
    std::getline(in, line);
    const auto header = split(line);
    std::vector<std::map<std::string, std::string>> rows;
    while (std::getline(in, line)) {
        const auto cells = split(line);
        std::map<std::string, std::string> row;
        for (std::size_t k = 0; k < header.size(); ++k) row[header[k]] = k < cells.size() ? cells[k] : "";
        rows.push_back(row);
    }
    return rows;
}

double num(const std::map<std::string, std::string>& row, const std::string& key) {
    return std::stod(row.at(key));
}

const std::string kCatModel = R"({"kind": "linear_toral"})";
const std::string kPerturbed = R"({"kind": "perturbed_toral", "amplitude": 0.01})";

}  // namespace

TEST_CASE("splitting command") {
    const auto cat = write_json("cat.json", R"({"model": )" + kCatModel + R"(, "resolution": 32})");
    REQUIRE(run("splitting --config " + cat.string() + " --out " + (kRoot / "s_cat").string()).code == 0);
    const auto s = read_csv(kRoot / "s_cat" / "summary.csv").at(0);
    CHECK(num(s, "sup_tau_u") <= 1e-14);
    CHECK(num(s, "iterations_u") <= 1);

    const auto pert = write_json("pert.json", R"({"model": )" + kPerturbed + R"(, "resolution": 64})");
    const fs::path out = kRoot / "s_pert";
    REQUIRE(run("splitting --config " + pert.string() + " --out " + out.string()).code == 0);
    const auto p = read_csv(out / "summary.csv").at(0);
    CHECK(num(p, "residual_u") <= 1e-12);
    CHECK(num(p, "residual_s") <= 1e-12);
    for (const char* f : {"tau_u.pgm", "tau_s.pgm", "tau_u.pgm.scale", "manifest.json"}) CHECK(fs::exists(out / f));
    const PgmImage img = read_pgm16(out / "tau_u.pgm");
    CHECK(img.width == 64);
    CHECK(img.height == 64);
    CHECK(slurp(out / "manifest.json").find("\"lambda1\"") != std::string::npos);

    const auto bad = write_json("bad_graph.json", R"({"model": )" + kPerturbed +
                                                      R"(, "graph_constants": {"lambda1": 0.5, "lambda2": 0.7, "lambda3": 0.99}})");
    const Run r = run("splitting --config " + bad.string() + " --out " + (kRoot / "s_bad").string());
    CHECK(r.code == 2);
    CHECK(r.err.find("lambda3^2 * l^alpha < 1") != std::string::npos);
}

TEST_CASE("conjugacy command") {
    const auto same = write_json("same.json", R"({"model": )" + kCatModel + R"(, "target": )" + kCatModel +
                                                  R"(, "resolution": 32})");
    REQUIRE(run("conjugacy --config " + same.string() + " --out " + (kRoot / "c_same").string()).code == 0);
    const FieldFile eta = read_field_file(kRoot / "c_same" / "eta.txt");
    for (const Vec2& v : eta.values) CHECK(v.norm() == 0.0);
    CHECK(num(read_csv(kRoot / "c_same" / "summary.csv").at(0), "iterations") == 0);

    const auto oracle = write_json(
        "oracle.json", R"({"model": )" + kCatModel +
                           R"(, "target": {"kind": "conjugated", "base": {"kind": "linear_toral"}, "phi": {"amplitude": 0.01}}, "resolution": 64})");
    const fs::path out = kRoot / "c_oracle";
    REQUIRE(run("conjugacy --config " + oracle.string() + " --out " + out.string()).code == 0);
    CHECK(num(read_csv(out / "summary.csv").at(0), "phi_error") <= 1e-4);
    for (const char* f : {"result.csv", "trace.csv", "eta_u.pgm", "eta_v.pgm", "certificate.txt", "holder.csv",
                          "periodic.csv", "manifest.json"}) {
        CHECK(fs::exists(out / f));
    }
    CHECK(slurp(out / "certificate.txt").rfind("certificate: positive", 0) == 0);

    const auto huge = write_json(
        "huge.json", R"({"model": )" + kCatModel +
                         R"(, "target": {"kind": "conjugated", "base": {"kind": "linear_toral"}, "phi": {"amplitude": 0.08}}, "resolution": 32})");
    const Run r = run("conjugacy --config " + huge.string() + " --out " + (kRoot / "c_huge").string());
    CHECK(r.code == 3);
    CHECK(r.err.find("gate") != std::string::npos);
}

TEST_CASE("inverse-check command") {
    auto circle = [](int n) {
        return write_json("circle_" + std::to_string(n) + ".json",
                          R"({"model": {"kind": "morse_smale_circle", "amplitude": 0.05}, "resolution": 256, "series": {"n_trunc": )" +
                              std::to_string(n) + "}}");
    };
    REQUIRE(run("inverse-check --config " + circle(20).string() + " --out " + (kRoot / "i20").string()).code == 0);
    REQUIRE(run("inverse-check --config " + circle(40).string() + " --out " + (kRoot / "i40").string()).code == 0);
    CHECK(read_csv(kRoot / "i40" / "residuals.csv").size() == 10);
    const double r20 = num(read_csv(kRoot / "i20" / "summary.csv").at(0), "max_residual");
    const double r40 = num(read_csv(kRoot / "i40" / "summary.csv").at(0), "max_residual");
    CHECK(r40 < r20);
    CHECK(!read_csv(kRoot / "i40" / "decay.csv").empty());
}

TEST_CASE("norms command") {
    const auto cfg = write_json("norms.json", R"({"model": )" + kCatModel + R"(})");
    const Grid grid(16, ManifoldKind::Torus2);
    write_field_file(kRoot / "const.txt", grid, std::vector<Vec2>(grid.size(), Vec2(0.01, 0.0)));
    REQUIRE(run("norms --config " + cfg.string() + " --field " + (kRoot / "const.txt").string() + " --out " +
                (kRoot / "n_const").string())
                .code == 0);
    const auto s = read_csv(kRoot / "n_const" / "summary.csv").at(0);
    CHECK(num(s, "c0") > 0.0);
    CHECK(num(s, "holder") == 0.0);
    CHECK(num(s, "df_lip") == 0.0);

    std::ofstream(kRoot / "broken.txt") << "# resolution=4 dim=2\n0,0\n1\n";
    CHECK(run("norms --config " + cfg.string() + " --field " + (kRoot / "broken.txt").string() + " --out " +
              (kRoot / "n_bad").string())
              .code == 5);
}

TEST_CASE("config errors map to exit codes") {
    const auto unknown = write_json("unknown.json", R"({"model": {"kind": "linear_toral"}, "colour": 3})");
    const Run r = run("splitting --config " + unknown.string() + " --out " + (kRoot / "e1").string());
    CHECK(r.code == 2);
    CHECK(r.err.find("colour") != std::string::npos);
    const auto broken = write_json("broken.json", R"({"model": )");
    CHECK(run("splitting --config " + broken.string()).code == 5);
    CHECK(run("splitting --config " + (kRoot / "missing.json").string()).code == 5);
    const auto res = write_json("res.json", R"({"model": {"kind": "linear_toral"}, "resolution": 100})");
    CHECK(run("splitting --config " + res.string()).code == 2);
    CHECK(run("").code == 2);
}

TEST_CASE("sweeps") {
    const auto eps = write_json(
        "sweep_eps.json",
        R"({"command": "conjugacy", "parameter": "eps_p", "values": [0, 0.005, 0.01],
            "base": {"model": {"kind": "linear_toral"}, "target": {"kind": "perturbed_toral"}, "resolution": 32}})");
    REQUIRE(run("sweep --config " + eps.string() + " --out " + (kRoot / "w_eps").string()).code == 0);
    const auto rows = read_csv(kRoot / "w_eps" / "sweep.csv");
    REQUIRE(rows.size() == 3);
    CHECK(num(rows[0], "c0") == 0.0);
    CHECK(num(rows[2], "c0") > num(rows[1], "c0"));

    const auto res = write_json(
        "sweep_res.json",
        R"({"command": "splitting", "parameter": "resolution", "values": [64, 128, 256],
            "base": {"model": {"kind": "perturbed_toral", "amplitude": 0.01}}})");
    REQUIRE(run("sweep --config " + res.string() + " --out " + (kRoot / "w_res").string()).code == 0);
    const auto rr = read_csv(kRoot / "w_res" / "sweep.csv");
    REQUIRE(rr.size() == 3);
    CHECK(std::abs(num(rr[2], "modulus_u") - num(rr[1], "modulus_u")) <= 0.15 * num(rr[1], "modulus_u"));

    const auto alpha = write_json(
        "sweep_alpha.json",
        R"({"command": "conjugacy", "parameter": "alpha", "values": [0.5, 0.9, 1.0],
            "base": {"model": {"kind": "linear_toral"}, "target": {"kind": "perturbed_toral", "amplitude": 0.005}, "resolution": 32}})");
    REQUIRE(run("sweep --config " + alpha.string() + " --out " + (kRoot / "w_alpha").string()).code == 0);
    for (const auto& row : read_csv(kRoot / "w_alpha" / "sweep.csv")) {
        const bool admissible = row.at("admissible") == "1";
        const bool finite = !row.at("holder").empty() && std::isfinite(num(row, "holder"));
        CHECK(admissible == finite);
    }
}

TEST_CASE("reruns are byte-identical") {
    const auto cfg = write_json("det.json", R"({"model": )" + kCatModel + R"(, "target": )" + kPerturbed +
                                                R"(, "resolution": 32, "seed": 4})");
    REQUIRE(run("conjugacy --config " + cfg.string() + " --out " + (kRoot / "d1").string()).code == 0);
    REQUIRE(run("conjugacy --config " + cfg.string() + " --threads 3 --out " + (kRoot / "d2").string()).code == 0);
    for (const char* f : {"summary.csv", "result.csv", "trace.csv", "holder.csv", "periodic.csv", "eta.txt"}) {
        CHECK(slurp(kRoot / "d1" / f) == slurp(kRoot / "d2" / f));
    }
}

TEST_CASE("PGM and field files round-trip") {
    const Grid grid(8, ManifoldKind::Torus2);
    std::vector<double> v(grid.size());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = 0.5 * static_cast<double>(i) - 3.0;
    write_pgm16(kRoot / "img.pgm", grid, v);
    const PgmImage img = read_pgm16(kRoot / "img.pgm");
    CHECK(img.samples.front() == 0);
    CHECK(img.samples.back() == 65535);
    std::istringstream scale(slurp(kRoot / "img.pgm.scale"));
    double lo = 0.0;
    double hi = 0.0;
    scale >> lo >> hi;
    CHECK(lo == -3.0);
    CHECK(hi == v.back());

    std::vector<Vec2> values(grid.size());
    for (std::size_t i = 0; i < values.size(); ++i) values[i] = Vec2(0.1 / (1.0 + i), -1.0 / 3.0);
    write_field_file(kRoot / "field.txt", grid, values);
    const FieldFile back = read_field_file(kRoot / "field.txt");
    CHECK(back.grid == grid);
    CHECK(back.values == values);

    std::ofstream(kRoot / "short.txt") << "# resolution=4 dim=1\n0.1\n0.2\n";
    try {
        (void)read_field_file(kRoot / "short.txt");
        FAIL("expected a parse error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::ParseError);
    }
}

TEST_CASE("config parsing") {
    const ExperimentConfig c = parse_config(R"({"model": {"kind": "linear_toral"}, "alpha": "auto", "series": {"tolerance": 1e-12}})");
    CHECK_FALSE(c.alpha.has_value());
    CHECK(c.series_tolerance.value() == 1e-12);
    CHECK_THROWS_AS(parse_config(R"({"model": {"kind": "linear_toral"}, "series": {"n_trunc": 5, "tolerance": 1e-3}})"),
                    Error);
    CHECK_THROWS_AS(parse_config(R"({"model": {"kind": "knot"}})"), Error);
    CHECK_THROWS_AS(parse_config(R"({"model": {"kind": "linear_toral"}, "solver": {"r_ball": 0.3}})"), Error);
    const ExperimentConfig t = parse_config(
        R"({"model": {"kind": "linear_toral"}, "target": {"kind": "conjugated", "base": {"kind": "linear_toral"}, "phi": {"amplitude": 0.01}}})");
    REQUIRE(t.target.has_value());
    CHECK(t.target->amplitude == 0.01);
    CHECK(t.target->build()->manifold() == ManifoldKind::Torus2);
}
