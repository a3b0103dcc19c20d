#pragma once

#include "swopt/dg_core.hpp"

#include <fstream>
#include <string>
#include <vector>

namespace swopt {

// rows are components (1 = scalar, 2 or 3 = vector), columns are points or cells
struct VtkField {
  std::string name;
  Eigen::MatrixXd data;
};

// legacy ASCII UNSTRUCTURED_GRID; 1D meshes are written as line cells on y = 0
void write_vtk(const std::string& path, const Mesh& mesh, const std::vector<VtkField>& point_data = {},
               const std::vector<VtkField>& cell_data = {}, const std::string& title = "swopt");

// averages of the cell traces of a DG field at every vertex, one row per component
Eigen::MatrixXd vertex_average(const DGSpace& space, const VectorX& coeffs);

// comma separated, header row first, numbers with 17 significant digits
class CsvWriter {
 public:
  CsvWriter(const std::string& path, const std::vector<std::string>& header);
  void row(const std::vector<double>& values);

 private:
  std::ofstream out_;
  std::size_t width_;
};

std::string format_number(double v);
void write_text(const std::string& path, const std::string& text);

}  // namespace swopt
