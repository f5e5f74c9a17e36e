#pragma once

// CSV form of node fields: one row per node in grid order, the node
// coordinates x0..x{p-1} first, then the values.
//
// Value columns: `value` (scalar), `v0..` (contravariant) or `u0..`
// (covariant) vectors, `m<row>_<col>` matrices.  Reading recovers the grid
// from the coordinate columns.

#include "bcrb/grid_fields.hpp"

#include <iosfwd>
#include <string>

namespace bcrb {

void write_csv(std::ostream& out, const ScalarField& field);
void write_csv(std::ostream& out, const VectorField& field);
void write_csv(std::ostream& out, const MatrixField& field);

/// Writes to `path`; IoError when the file cannot be written.
template <class Field>
void write_csv_file(const std::string& path, const Field& field);

ScalarField read_scalar_csv(const std::string& path);
VectorField read_vector_csv(const std::string& path);
MatrixField read_matrix_csv(const std::string& path);

}  // namespace bcrb
