#include "hyperstab/io.hpp"

#include "hyperstab/error.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>

namespace hyperstab {

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

namespace {

std::ofstream open_out(const std::filesystem::path& path, std::ios::openmode mode = std::ios::out) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, mode | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
    return out;
}

[[noreturn]] void parse_fail(const std::filesystem::path& path, int line, const std::string& what) {
    throw Error(ErrorKind::ParseError, path.string() + ":" + std::to_string(line) + ": " + what);
}

}  // namespace

void write_csv(const std::filesystem::path& path, const std::string& header, const std::vector<std::string>& rows) {
    auto out = open_out(path);
    out << header << '\n';
    for (const auto& r : rows) out << r << '\n';
    if (!out) throw std::runtime_error("write failed: " + path.string());
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    auto out = open_out(path);
    out << text;
    if (!out) throw std::runtime_error("write failed: " + path.string());
}

void write_pgm16(const std::filesystem::path& path, const Grid& grid, std::span<const double> values) {
    if (values.size() != grid.size()) throw std::invalid_argument("image size does not match grid");
    const int width = grid.resolution();
    const int height = grid.kind() == ManifoldKind::Torus2 ? width : 1;
    double lo = values.empty() ? 0.0 : values[0];
    double hi = lo;
    for (double v : values) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    auto out = open_out(path, std::ios::out | std::ios::binary);
    out << "P5\n" << width << ' ' << height << "\n65535\n";
    std::vector<char> bytes(values.size() * 2);
    for (std::size_t i = 0; i < values.size(); ++i) {
        const double t = hi > lo ? (values[i] - lo) / (hi - lo) : 0.0;
        const auto s = static_cast<std::uint16_t>(std::lround(std::clamp(t, 0.0, 1.0) * 65535.0));
        bytes[2 * i] = static_cast<char>(s >> 8);
        bytes[2 * i + 1] = static_cast<char>(s & 0xff);
    }
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw std::runtime_error("write failed: " + path.string());
    write_text(path.string() + ".scale", fmt(lo) + " " + fmt(hi) + "\n");
}

PgmImage read_pgm16(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::ParseError, "cannot open " + path.string());
    std::string magic;
    PgmImage img;
    in >> magic >> img.width >> img.height >> img.maxval;
    if (magic != "P5" || !in || img.width <= 0 || img.height <= 0 || img.maxval != 65535) {
        throw Error(ErrorKind::ParseError, path.string() + ": not a 16-bit P5 image");
    }
    in.get();
    const auto n = static_cast<std::size_t>(img.width) * static_cast<std::size_t>(img.height);
    std::vector<unsigned char> bytes(2 * n);
    in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (in.gcount() != static_cast<std::streamsize>(bytes.size())) {
        throw Error(ErrorKind::ParseError, path.string() + ": truncated pixel data");
    }
    img.samples.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        img.samples[i] = static_cast<std::uint16_t>((bytes[2 * i] << 8) | bytes[2 * i + 1]);
    }
    return img;
}

FieldFile read_field_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::ParseError, "cannot open field file " + path.string());
    std::string line;
    int lineno = 0;
    int resolution = 0;
    int dim = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        if (std::sscanf(line.c_str(), " # resolution=%d dim=%d", &resolution, &dim) != 2) {
            parse_fail(path, lineno, "expected header '# resolution=<n> dim=<d>'");
        }
        break;
    }
    if (dim != 1 && dim != 2) parse_fail(path, lineno, "dim must be 1 or 2");
    const ManifoldKind kind = dim == 1 ? ManifoldKind::Circle : ManifoldKind::Torus2;
    std::optional<Grid> grid;
    try {
        grid.emplace(resolution, kind);
    } catch (const std::exception& e) {
        parse_fail(path, lineno, e.what());
    }
    std::vector<Vec2> values;
    values.reserve(grid->size());
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos || line[line.find_first_not_of(" \t")] == '#') {
            continue;
        }
        std::replace(line.begin(), line.end(), ',', ' ');
        std::istringstream row(line);
        Vec2 v = Vec2::Zero();
        for (int k = 0; k < dim; ++k) {
            std::string tok;
            if (!(row >> tok)) parse_fail(path, lineno, "expected " + std::to_string(dim) + " components");
            std::size_t used = 0;
            try {
                v(k) = std::stod(tok, &used);
            } catch (const std::exception&) {
                used = 0;
            }
            if (used != tok.size() || !std::isfinite(v(k))) parse_fail(path, lineno, "bad number '" + tok + "'");
        }
        std::string extra;
        if (row >> extra) parse_fail(path, lineno, "too many components");
        if (values.size() == grid->size()) parse_fail(path, lineno, "more rows than resolution^dim");
        values.push_back(v);
    }
    if (values.size() != grid->size()) {
        parse_fail(path, lineno, "expected " + std::to_string(grid->size()) + " rows, found " +
                                     std::to_string(values.size()));
    }
    return FieldFile{*grid, std::move(values)};
}

void write_field_file(const std::filesystem::path& path, const Grid& grid, std::span<const Vec2> values) {
    std::ostringstream s;
    s << "# resolution=" << grid.resolution() << " dim=" << grid.dim() << '\n';
    for (const Vec2& v : values) {
        s << fmt(v(0));
        if (grid.dim() == 2) s << ',' << fmt(v(1));
        s << '\n';
    }
    write_text(path, s.str());
}

}  // namespace hyperstab
