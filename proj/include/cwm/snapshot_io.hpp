#pragma once

#include "cwm/grid_fields.hpp"

#include <cstdint>
#include <string>

// Snapshot container: fixed 64-byte header (magic "CWM1", grid and target
// parameters, wave time, field-kind tag) followed by row-major 64-bit
// little-endian reals, one row per node component.  Plus a CSV export with
// one node per row: i, j, x, y, components.
namespace cwm::io {

enum class FieldKind : std::uint32_t {
  Scalar = 0,
  Vec = 1,       // m components
  Skew = 2,      // m^2 components
  Point = 3,     // m+1 ambient components
  Tangent = 4,   // m+1 ambient components
};

struct SnapshotHeader {
  std::uint32_t n = 0;
  double h = 0.0;
  std::uint32_t m = 0;
  double kappa = 0.0;
  double t = 0.0;
  FieldKind kind = FieldKind::Scalar;
  std::uint32_t ncomp = 0;
};

void write_snapshot(const std::string& path, const SnapshotHeader& hdr,
                    const MatrixXd& data);
// Returns the data (ncomp x N); fills hdr.
MatrixXd read_snapshot(const std::string& path, SnapshotHeader& hdr);

void write_map_snapshot(const std::string& path_prefix, const grid::MapField& f);
grid::MapField read_map_snapshot(const std::string& path_prefix);

void write_csv(const std::string& path, const grid::Grid2D& g, const MatrixXd& data);

}  // namespace cwm::io
