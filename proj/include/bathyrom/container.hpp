#ifndef BATHYROM_CONTAINER_HPP
#define BATHYROM_CONTAINER_HPP

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace bathyrom {

/// Payload element types of the VG container. The on-disk tag is the enum
/// value, one byte.
enum class Dtype : std::uint8_t { F32 = 0, F64 = 1, U32 = 2 };

/// One named n-dimensional array. Payload is raw little-endian bytes in
/// row-major order.
struct ContainerEntry {
  std::string name;
  Dtype dtype = Dtype::F64;
  std::vector<std::uint64_t> dims;
  std::vector<std::uint8_t> payload;

  [[nodiscard]] std::uint64_t element_count() const;
};

/// The VG binary container ("VGD1" magic, version 1). One format carries
/// datasets (.vgd), models (.vgm), observations (.vgo), and results (.vgr);
/// only the array name sets differ. Array order is preserved, so an
/// identical sequence of puts yields a byte-identical file.
class Container {
 public:
  static constexpr std::uint8_t kMagic[4] = {0x56, 0x47, 0x44, 0x31};
  static constexpr std::uint16_t kVersion = 1;

  void put_f32(const std::string& name, std::vector<std::uint64_t> dims,
               const std::vector<float>& data);
  void put_f64(const std::string& name, std::vector<std::uint64_t> dims,
               const std::vector<double>& data);
  void put_u32(const std::string& name, std::vector<std::uint64_t> dims,
               const std::vector<std::uint32_t>& data);

  /// Matrix stored 2-d row-major; f32 variant quantizes through float.
  void put_matrix_f32(const std::string& name, const Eigen::MatrixXd& m);
  void put_matrix_f64(const std::string& name, const Eigen::MatrixXd& m);
  void put_vector_f32(const std::string& name, const Eigen::VectorXd& v);
  void put_vector_f64(const std::string& name, const Eigen::VectorXd& v);
  void put_scalar_f64(const std::string& name, double value);
  void put_scalar_u32(const std::string& name, std::uint32_t value);
  /// UTF-8 string widened one byte per u32 element.
  void put_string(const std::string& name, const std::string& value);

  [[nodiscard]] bool has(const std::string& name) const;
  [[nodiscard]] const ContainerEntry& entry(const std::string& name) const;
  [[nodiscard]] std::size_t size() const { return entries_.size(); }
  [[nodiscard]] const std::vector<ContainerEntry>& entries() const { return entries_; }

  /// Typed reads. Float entries of either width decode to doubles; u32
  /// entries refuse float reads and vice versa.
  [[nodiscard]] std::vector<double> get_f64(const std::string& name) const;
  [[nodiscard]] std::vector<std::uint32_t> get_u32(const std::string& name) const;
  [[nodiscard]] Eigen::MatrixXd get_matrix(const std::string& name) const;
  [[nodiscard]] Eigen::VectorXd get_vector(const std::string& name) const;
  [[nodiscard]] double get_scalar_f64(const std::string& name) const;
  [[nodiscard]] std::uint32_t get_scalar_u32(const std::string& name) const;
  [[nodiscard]] std::string get_string(const std::string& name) const;

  void save(const std::filesystem::path& path) const;
  static Container load(const std::filesystem::path& path);

  /// Exact on-disk size in bytes of the current contents.
  [[nodiscard]] std::uint64_t file_size() const;

 private:
  ContainerEntry& add_entry(const std::string& name, Dtype dtype,
                            std::vector<std::uint64_t> dims, std::size_t value_count);
  std::vector<ContainerEntry> entries_;
};

}  // namespace bathyrom

#endif  // BATHYROM_CONTAINER_HPP
