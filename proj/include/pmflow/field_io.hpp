#pragma once

#include <filesystem>
#include <string>

#include "pmflow/grid.hpp"

namespace pmflow {

// Field snapshot = <stem>.json header + <stem>.bin payload.
//
// Header (JSON): field name, time stamp (decimal and hex-exact), grid spec
// (dim, lo, hi, cells, boundary), value count, payload file name, byte layout
// tag "float64-le-row-major" (x fastest, then y).
//
// Payload: cells[0]*cells[1] IEEE-754 doubles, little endian, row major.
void write_field(const std::filesystem::path& stem, const ScalarField& f);
ScalarField read_field(const std::filesystem::path& stem);

// CSV alternative: one "x[,y],value" row per cell; used for plot-ready output.
void write_field_csv(const std::filesystem::path& file, const ScalarField& f);

}  // namespace pmflow
