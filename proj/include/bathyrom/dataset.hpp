#ifndef BATHYROM_DATASET_HPP
#define BATHYROM_DATASET_HPP

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "bathyrom/fields.hpp"

namespace bathyrom {

/// One bathymetry/BC/flow triple. Grids are held at f32 precision (the
/// file payload width) so that save/load round-trips bitwise.
struct DatasetRecord {
  Eigen::MatrixXd bathymetry;
  Eigen::MatrixXd u;
  Eigen::MatrixXd v;
  Eigen::MatrixXd depth;
  Eigen::VectorXd surface;
  BoundaryConditions bc;
};

struct Dataset {
  ChannelGeometry geometry;
  std::vector<DatasetRecord> records;
  /// Provenance metadata, ordered (order is part of the file bytes).
  std::vector<std::pair<std::string, std::string>> metadata;

  /// Appends a record, quantizing every grid and the surface through f32.
  /// BC scalars keep full f64 precision.
  void add_record(const BathymetryField& bathy, const BoundaryConditions& bc,
                  const FlowField& flow);

  [[nodiscard]] BathymetryField bathymetry_field(std::size_t i) const;
  [[nodiscard]] FlowField flow_field(std::size_t i) const;

  void validate() const;
};

void save_dataset(const Dataset& dataset, const std::filesystem::path& path);
Dataset load_dataset(const std::filesystem::path& path);

/// Exact .vgd byte size for a dataset of the given shape (grids and
/// surface as f32, BC pair as f64).
std::uint64_t dataset_file_size(const ChannelGeometry& geometry, std::size_t n_records,
                                const std::vector<std::pair<std::string, std::string>>& metadata);

}  // namespace bathyrom

#endif  // BATHYROM_DATASET_HPP
