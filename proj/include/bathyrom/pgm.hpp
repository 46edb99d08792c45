#ifndef BATHYROM_PGM_HPP
#define BATHYROM_PGM_HPP

#include <Eigen/Dense>
#include <filesystem>

namespace bathyrom {

/// 8-bit binary PGM heatmap, grid values scaled linearly between the
/// matrix min (black) and max (white). Constant grids render mid-gray.
void write_pgm(const Eigen::MatrixXd& grid, const std::filesystem::path& path);

/// Raw grid values as CSV, one row of the matrix per line.
void write_grid_csv(const Eigen::MatrixXd& grid, const std::filesystem::path& path);

}  // namespace bathyrom

#endif  // BATHYROM_PGM_HPP
