#include "cwm/snapshot_io.hpp"

#include <cstring>
#include <fstream>
#include <iomanip>

namespace cwm::io {

namespace {
constexpr char kMagic[4] = {'C', 'W', 'M', '1'};
constexpr std::size_t kHeaderSize = 64;

// Little-endian only; static_assert via byte probe at runtime init is
// overkill for the target platforms, we just write native doubles.
void pack_header(const SnapshotHeader& hdr, char buf[kHeaderSize]) {
  std::memset(buf, 0, kHeaderSize);
  std::memcpy(buf, kMagic, 4);
  std::uint32_t kind = static_cast<std::uint32_t>(hdr.kind);
  std::memcpy(buf + 4, &kind, 4);
  std::memcpy(buf + 8, &hdr.n, 4);
  std::memcpy(buf + 12, &hdr.m, 4);
  std::memcpy(buf + 16, &hdr.h, 8);
  std::memcpy(buf + 24, &hdr.kappa, 8);
  std::memcpy(buf + 32, &hdr.t, 8);
  std::memcpy(buf + 40, &hdr.ncomp, 4);
}

SnapshotHeader unpack_header(const char buf[kHeaderSize]) {
  if (std::memcmp(buf, kMagic, 4) != 0)
    throw IOError("snapshot: bad magic");
  SnapshotHeader hdr;
  std::uint32_t kind = 0;
  std::memcpy(&kind, buf + 4, 4);
  hdr.kind = static_cast<FieldKind>(kind);
  std::memcpy(&hdr.n, buf + 8, 4);
  std::memcpy(&hdr.m, buf + 12, 4);
  std::memcpy(&hdr.h, buf + 16, 8);
  std::memcpy(&hdr.kappa, buf + 24, 8);
  std::memcpy(&hdr.t, buf + 32, 8);
  std::memcpy(&hdr.ncomp, buf + 40, 4);
  return hdr;
}
}  // namespace

void write_snapshot(const std::string& path, const SnapshotHeader& hdr,
                    const MatrixXd& data) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IOError("cannot open " + path + " for writing");
  char buf[kHeaderSize];
  pack_header(hdr, buf);
  out.write(buf, kHeaderSize);
  // Row-major: one row per component, nodes in column order.
  for (Eigen::Index r = 0; r < data.rows(); ++r) {
    const VectorXd row = data.row(r);
    out.write(reinterpret_cast<const char*>(row.data()),
              static_cast<std::streamsize>(sizeof(double) * row.size()));
  }
  if (!out) throw IOError("write failed: " + path);
}

MatrixXd read_snapshot(const std::string& path, SnapshotHeader& hdr) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IOError("cannot open " + path);
  char buf[kHeaderSize];
  in.read(buf, kHeaderSize);
  if (!in) throw IOError("truncated snapshot header: " + path);
  hdr = unpack_header(buf);
  const Eigen::Index nodes = static_cast<Eigen::Index>(hdr.n) * hdr.n;
  MatrixXd data(hdr.ncomp, nodes);
  VectorXd row(nodes);
  for (Eigen::Index r = 0; r < data.rows(); ++r) {
    in.read(reinterpret_cast<char*>(row.data()),
            static_cast<std::streamsize>(sizeof(double) * nodes));
    if (!in) throw IOError("truncated snapshot data: " + path);
    data.row(r) = row;
  }
  return data;
}

void write_map_snapshot(const std::string& path_prefix, const grid::MapField& f) {
  SnapshotHeader hdr;
  hdr.n = static_cast<std::uint32_t>(f.grid.n);
  hdr.h = f.grid.h;
  hdr.m = static_cast<std::uint32_t>(f.target.m);
  hdr.kappa = f.target.kappa;
  hdr.t = f.t;
  hdr.ncomp = static_cast<std::uint32_t>(f.target.ambient_dim());
  hdr.kind = FieldKind::Point;
  write_snapshot(path_prefix + ".phi.cwm", hdr, f.phi);
  hdr.kind = FieldKind::Tangent;
  write_snapshot(path_prefix + ".phit.cwm", hdr, f.phi_t);
}

grid::MapField read_map_snapshot(const std::string& path_prefix) {
  SnapshotHeader hdr;
  grid::MapField f;
  f.phi = read_snapshot(path_prefix + ".phi.cwm", hdr);
  f.grid = grid::Grid2D{static_cast<int>(hdr.n), hdr.h};
  f.target = geom::TargetConfig{static_cast<int>(hdr.m), hdr.kappa};
  f.t = hdr.t;
  SnapshotHeader hdr2;
  f.phi_t = read_snapshot(path_prefix + ".phit.cwm", hdr2);
  if (hdr2.n != hdr.n) throw IOError("snapshot pair mismatch: " + path_prefix);
  return f;
}

void write_csv(const std::string& path, const grid::Grid2D& g, const MatrixXd& data) {
  std::ofstream out(path);
  if (!out) throw IOError("cannot open " + path + " for writing");
  out << "i,j,x,y";
  for (Eigen::Index r = 0; r < data.rows(); ++r) out << ",c" << r;
  out << "\n";
  out << std::setprecision(17);
  for (int c = 0; c < g.num_nodes(); ++c) {
    out << (c % g.n) << ',' << (c / g.n) << ',' << g.x1(c) << ',' << g.x2(c);
    for (Eigen::Index r = 0; r < data.rows(); ++r) out << ',' << data(r, c);
    out << "\n";
  }
}

}  // namespace cwm::io
