#include "swopt/output.hpp"

#include <iomanip>
#include <sstream>

namespace swopt {

std::string format_number(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw Error("io error: cannot write " + path);
  out << text;
}

namespace {

void write_fields(std::ostream& os, const std::vector<VtkField>& fields, int n, const char* what) {
  if (fields.empty()) return;
  os << what << " " << n << "\n";
  for (const VtkField& f : fields) {
    if (f.data.cols() != n) throw Error("argument error: VTK field " + f.name + " has the wrong length");
    if (f.data.rows() == 1) {
      os << "SCALARS " << f.name << " double 1\nLOOKUP_TABLE default\n";
      for (int i = 0; i < n; ++i) os << format_number(f.data(0, i)) << "\n";
    } else {
      os << "VECTORS " << f.name << " double\n";
      for (int i = 0; i < n; ++i) {
        for (int k = 0; k < 3; ++k) os << (k ? " " : "") << format_number(k < f.data.rows() ? f.data(k, i) : 0.0);
        os << "\n";
      }
    }
  }
}

}  // namespace

void write_vtk(const std::string& path, const Mesh& mesh, const std::vector<VtkField>& point_data,
               const std::vector<VtkField>& cell_data, const std::string& title) {
  std::ofstream os(path);
  if (!os) throw Error("io error: cannot write " + path);
  const int nv = mesh.n_vertices(), nc = mesh.n_cells(), k = mesh.verts_per_cell();
  os << "# vtk DataFile Version 3.0\n" << title << "\nASCII\nDATASET UNSTRUCTURED_GRID\n";
  os << "POINTS " << nv << " double\n";
  for (int i = 0; i < nv; ++i)
    os << format_number(mesh.vertices(0, i)) << " " << format_number(mesh.vertices(1, i)) << " 0\n";
  os << "CELLS " << nc << " " << nc * (k + 1) << "\n";
  for (int c = 0; c < nc; ++c) {
    os << k;
    for (int a = 0; a < k; ++a) os << " " << mesh.cells[c][a];
    os << "\n";
  }
  os << "CELL_TYPES " << nc << "\n";
  for (int c = 0; c < nc; ++c) os << (mesh.dim == 1 ? 3 : 5) << "\n";

  std::vector<VtkField> cells = cell_data;
  Eigen::MatrixXd region(1, nc);
  for (int c = 0; c < nc; ++c) region(0, c) = static_cast<int>(mesh.regions[c]);
  cells.push_back({"region", region});
  write_fields(os, point_data, nv, "POINT_DATA");
  write_fields(os, cells, nc, "CELL_DATA");
}

Eigen::MatrixXd vertex_average(const DGSpace& s, const VectorX& coeffs) {
  const Mesh& m = s.mesh();
  const int nb = s.nb(), nk = s.ncomp(), k = m.verts_per_cell();
  const Vec2 ref[3] = {Vec2(0, 0), Vec2(1, 0), Vec2(0, 1)};
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(nk, m.n_vertices());
  Eigen::VectorXd cnt = Eigen::VectorXd::Zero(m.n_vertices());
  for (int c = 0; c < m.n_cells(); ++c)
    for (int a = 0; a < k; ++a) {
      const Eigen::VectorXd bv = s.basis().eval_all(ref[a]);
      const int vid = m.cells[c][a];
      for (int comp = 0; comp < nk; ++comp) out(comp, vid) += bv.dot(coeffs.segment(s.index(c, comp, 0), nb));
      cnt[vid] += 1;
    }
  for (int i = 0; i < m.n_vertices(); ++i)
    if (cnt[i] > 0) out.col(i) /= cnt[i];
  return out;
}

CsvWriter::CsvWriter(const std::string& path, const std::vector<std::string>& header)
    : out_(path), width_(header.size()) {
  if (!out_) throw Error("io error: cannot write " + path);
  for (std::size_t i = 0; i < header.size(); ++i) out_ << (i ? "," : "") << header[i];
  out_ << "\n";
}

void CsvWriter::row(const std::vector<double>& values) {
  if (values.size() != width_) throw Error("argument error: CSV row width does not match the header");
  for (std::size_t i = 0; i < values.size(); ++i) out_ << (i ? "," : "") << format_number(values[i]);
  out_ << "\n";
  out_.flush();
}

}  // namespace swopt
