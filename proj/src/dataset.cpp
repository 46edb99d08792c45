#include "bathyrom/dataset.hpp"

#include "bathyrom/container.hpp"
#include "bathyrom/errors.hpp"

namespace bathyrom {
namespace {

Eigen::MatrixXd quantize_f32(const Eigen::MatrixXd& m) {
  return m.unaryExpr([](double x) { return static_cast<double>(static_cast<float>(x)); });
}

Eigen::VectorXd quantize_f32(const Eigen::VectorXd& v) {
  return v.unaryExpr([](double x) { return static_cast<double>(static_cast<float>(x)); });
}

std::string rec_name(std::size_t i, const char* field) {
  return "rec" + std::to_string(i) + "/" + field;
}

}  // namespace

void Dataset::add_record(const BathymetryField& bathy, const BoundaryConditions& bc,
                         const FlowField& flow) {
  if (bathy.geometry != geometry || flow.geometry != geometry)
    throw ValidationError("dataset: record geometry does not match dataset geometry");
  DatasetRecord r;
  r.bathymetry = quantize_f32(bathy.bed_elevation);
  r.u = quantize_f32(flow.u);
  r.v = quantize_f32(flow.v);
  r.depth = quantize_f32(flow.depth);
  r.surface = quantize_f32(flow.surface);
  r.bc = bc;
  records.push_back(std::move(r));
}

BathymetryField Dataset::bathymetry_field(std::size_t i) const {
  return BathymetryField{geometry, records.at(i).bathymetry};
}

FlowField Dataset::flow_field(std::size_t i) const {
  const auto& r = records.at(i);
  return FlowField{geometry, r.u, r.v, r.depth, r.surface};
}

void Dataset::validate() const {
  geometry.validate();
  if (records.empty()) throw ValidationError("dataset: no records");
  for (const auto& r : records) {
    if (r.bathymetry.rows() != geometry.n_across || r.bathymetry.cols() != geometry.n_along ||
        r.u.rows() != geometry.n_across || r.u.cols() != geometry.n_along ||
        r.v.rows() != geometry.n_across || r.v.cols() != geometry.n_along ||
        r.depth.rows() != geometry.n_across || r.depth.cols() != geometry.n_along ||
        r.surface.size() != geometry.n_along)
      throw ValidationError("dataset: record dimensions do not match geometry");
  }
}

void save_dataset(const Dataset& dataset, const std::filesystem::path& path) {
  dataset.validate();
  Container c;
  c.put_u32("geometry/dims", {2},
            {static_cast<std::uint32_t>(dataset.geometry.n_across),
             static_cast<std::uint32_t>(dataset.geometry.n_along)});
  c.put_f64("geometry/spacing", {2}, {dataset.geometry.dx, dataset.geometry.dy});
  for (const auto& [key, value] : dataset.metadata) c.put_string("meta/" + key, value);
  for (std::size_t i = 0; i < dataset.records.size(); ++i) {
    const auto& r = dataset.records[i];
    c.put_matrix_f32(rec_name(i, "bathymetry"), r.bathymetry);
    c.put_matrix_f32(rec_name(i, "u"), r.u);
    c.put_matrix_f32(rec_name(i, "v"), r.v);
    c.put_matrix_f32(rec_name(i, "depth"), r.depth);
    c.put_vector_f32(rec_name(i, "surface"), r.surface);
    c.put_f64(rec_name(i, "bc"), {2}, {r.bc.discharge, r.bc.downstream_surface});
  }
  c.save(path);
}

Dataset load_dataset(const std::filesystem::path& path) {
  const Container c = Container::load(path);
  Dataset d;
  const auto dims = c.get_u32("geometry/dims");
  const auto spacing = c.get_f64("geometry/spacing");
  if (dims.size() != 2 || spacing.size() != 2)
    throw FormatError("dataset: malformed geometry arrays");
  d.geometry = ChannelGeometry{static_cast<int>(dims[0]), static_cast<int>(dims[1]),
                               spacing[0], spacing[1]};
  d.geometry.validate();
  for (const auto& e : c.entries()) {
    if (e.name.rfind("meta/", 0) == 0)
      d.metadata.emplace_back(e.name.substr(5), c.get_string(e.name));
  }
  for (std::size_t i = 0; c.has(rec_name(i, "bathymetry")); ++i) {
    DatasetRecord r;
    r.bathymetry = c.get_matrix(rec_name(i, "bathymetry"));
    r.u = c.get_matrix(rec_name(i, "u"));
    r.v = c.get_matrix(rec_name(i, "v"));
    r.depth = c.get_matrix(rec_name(i, "depth"));
    r.surface = c.get_vector(rec_name(i, "surface"));
    const auto bc = c.get_f64(rec_name(i, "bc"));
    if (bc.size() != 2) throw FormatError("dataset: malformed bc array");
    r.bc = BoundaryConditions{bc[0], bc[1]};
    if (r.bathymetry.rows() != d.geometry.n_across || r.bathymetry.cols() != d.geometry.n_along)
      throw FormatError("dataset: record dimensions do not match geometry");
    d.records.push_back(std::move(r));
  }
  d.validate();
  return d;
}

std::uint64_t dataset_file_size(
    const ChannelGeometry& geometry, std::size_t n_records,
    const std::vector<std::pair<std::string, std::string>>& metadata) {
  const std::uint64_t grid = static_cast<std::uint64_t>(geometry.node_count());
  const std::uint64_t n_cols = static_cast<std::uint64_t>(geometry.n_along);
  std::uint64_t size = 4 + 2 + 4;  // magic, version, count
  auto entry_overhead = [](const std::string& name, std::size_t ndim) {
    return 2 + name.size() + 1 + 1 + 8 * ndim;
  };
  size += entry_overhead("geometry/dims", 1) + 2 * 4;
  size += entry_overhead("geometry/spacing", 1) + 2 * 8;
  for (const auto& [key, value] : metadata)
    size += entry_overhead("meta/" + key, 1) + 4 * value.size();
  for (std::size_t i = 0; i < n_records; ++i) {
    for (const char* f : {"bathymetry", "u", "v", "depth"})
      size += entry_overhead(rec_name(i, f), 2) + 4 * grid;
    size += entry_overhead(rec_name(i, "surface"), 1) + 4 * n_cols;
    size += entry_overhead(rec_name(i, "bc"), 1) + 2 * 8;
  }
  return size;
}

}  // namespace bathyrom
