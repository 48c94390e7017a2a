#pragma once

// Flat binary grid files.
//
// Layout (all integers little-endian uint32):
//   magic   "HPGR"
//   dtype   0 = float64, 1 = uint32
//   dims    number of axes (2)
//   sizes   one entry per axis, slowest first (ny, nx)
//   chans   components per cell (1 for scalars/labels, 2 for displacements)
// followed by row-major cell data, channels interleaved, little-endian.

#include <filesystem>
#include <iosfwd>

#include "hyperpredict/field.hpp"

namespace hyperpredict {

void write_grid(std::ostream& os, const ScalarGrid& grid);
void write_grid(std::ostream& os, const LabelGrid& grid);
void write_grid(std::ostream& os, const DisplacementField& field);

ScalarGrid read_scalar_grid(std::istream& is);
LabelGrid read_label_grid(std::istream& is);
DisplacementField read_displacement_field(std::istream& is);

void save_grid(const std::filesystem::path& path, const ScalarGrid& grid);
void save_grid(const std::filesystem::path& path, const LabelGrid& grid);
void save_grid(const std::filesystem::path& path, const DisplacementField& field);

ScalarGrid load_scalar_grid(const std::filesystem::path& path);
LabelGrid load_label_grid(const std::filesystem::path& path);
DisplacementField load_displacement_field(const std::filesystem::path& path);

}  // namespace hyperpredict
