#include "bathyrom/pgm.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>

#include "bathyrom/errors.hpp"

namespace bathyrom {

void write_pgm(const Eigen::MatrixXd& grid, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("pgm: cannot open '" + path.string() + "' for writing");
  out << "P5\n" << grid.cols() << " " << grid.rows() << "\n255\n";
  const double lo = grid.minCoeff();
  const double hi = grid.maxCoeff();
  const double span = hi - lo;
  for (Eigen::Index i = 0; i < grid.rows(); ++i)
    for (Eigen::Index j = 0; j < grid.cols(); ++j) {
      const double t = span > 0.0 ? (grid(i, j) - lo) / span : 0.5;
      out.put(static_cast<char>(static_cast<unsigned char>(std::lround(t * 255.0))));
    }
  if (!out) throw IoError("pgm: write failed for '" + path.string() + "'");
}

void write_grid_csv(const Eigen::MatrixXd& grid, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("csv: cannot open '" + path.string() + "' for writing");
  out << std::setprecision(17);
  for (Eigen::Index i = 0; i < grid.rows(); ++i) {
    for (Eigen::Index j = 0; j < grid.cols(); ++j) {
      if (j > 0) out << ",";
      out << grid(i, j);
    }
    out << "\n";
  }
  if (!out) throw IoError("csv: write failed for '" + path.string() + "'");
}

}  // namespace bathyrom
