#pragma once

#include "hyperstab/geometry.hpp"

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace hyperstab {

/// %.17g, the round-trip representation used in every CSV.
std::string fmt(double v);

/// Header line plus rows, '\n'-terminated. Throws std::runtime_error on I/O failure.
void write_csv(const std::filesystem::path& path, const std::string& header, const std::vector<std::string>& rows);

void write_text(const std::filesystem::path& path, const std::string& text);

/// Binary 16-bit P5 image of a scalar grid function (row i2, column i1;
/// height 1 on the circle), big-endian samples. Values are mapped affinely
/// from [min, max] onto [0, 65535]; the sidecar `<path>.scale` holds "min max".
void write_pgm16(const std::filesystem::path& path, const Grid& grid, std::span<const double> values);

struct PgmImage {
    int width = 0;
    int height = 0;
    int maxval = 0;
    std::vector<std::uint16_t> samples;
};
PgmImage read_pgm16(const std::filesystem::path& path);

/// Text field file: a header line "# resolution=<n> dim=<d>" followed by n^d
/// rows of d components (comma or whitespace separated, row index i1 + n i2).
/// Throws Error(ParseError) with the offending line number.
struct FieldFile {
    Grid grid;
    std::vector<Vec2> values;
};
FieldFile read_field_file(const std::filesystem::path& path);
void write_field_file(const std::filesystem::path& path, const Grid& grid, std::span<const Vec2> values);

}  // namespace hyperstab
