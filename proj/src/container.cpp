#include "bathyrom/container.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <limits>

#include "bathyrom/errors.hpp"

static_assert(std::endian::native == std::endian::little,
              "container serialization assumes a little-endian host");

namespace bathyrom {
namespace {

std::size_t dtype_size(Dtype d) {
  switch (d) {
    case Dtype::F32: return 4;
    case Dtype::F64: return 8;
    case Dtype::U32: return 4;
  }
  throw FormatError("container: unknown dtype tag");
}

template <typename T>
void append_raw(std::vector<std::uint8_t>& out, T value) {
  const auto* p = reinterpret_cast<const std::uint8_t*>(&value);
  out.insert(out.end(), p, p + sizeof(T));
}

template <typename T>
T read_raw(const std::vector<std::uint8_t>& buf, std::size_t& pos) {
  if (pos + sizeof(T) > buf.size()) throw FormatError("container: truncated payload");
  T value;
  std::memcpy(&value, buf.data() + pos, sizeof(T));
  pos += sizeof(T);
  return value;
}

std::uint64_t product(const std::vector<std::uint64_t>& dims) {
  std::uint64_t n = 1;
  for (auto d : dims) {
    if (d != 0 && n > std::numeric_limits<std::uint64_t>::max() / d)
      throw FormatError("container: dimension overflow");
    n *= d;
  }
  return n;
}

}  // namespace

std::uint64_t ContainerEntry::element_count() const { return product(dims); }

ContainerEntry& Container::add_entry(const std::string& name, Dtype dtype,
                                     std::vector<std::uint64_t> dims,
                                     std::size_t value_count) {
  if (name.empty() || name.size() > std::numeric_limits<std::uint16_t>::max())
    throw ValidationError("container: array name empty or longer than 65535 bytes");
  if (has(name)) throw ValidationError("container: duplicate array name '" + name + "'");
  if (dims.size() > std::numeric_limits<std::uint8_t>::max())
    throw ValidationError("container: too many dimensions");
  if (product(dims) != value_count)
    throw ValidationError("container: dims do not match value count for '" + name + "'");
  entries_.push_back(ContainerEntry{name, dtype, std::move(dims), {}});
  return entries_.back();
}

void Container::put_f32(const std::string& name, std::vector<std::uint64_t> dims,
                        const std::vector<float>& data) {
  auto& e = add_entry(name, Dtype::F32, std::move(dims), data.size());
  e.payload.resize(data.size() * 4);
  std::memcpy(e.payload.data(), data.data(), e.payload.size());
}

void Container::put_f64(const std::string& name, std::vector<std::uint64_t> dims,
                        const std::vector<double>& data) {
  auto& e = add_entry(name, Dtype::F64, std::move(dims), data.size());
  e.payload.resize(data.size() * 8);
  std::memcpy(e.payload.data(), data.data(), e.payload.size());
}

void Container::put_u32(const std::string& name, std::vector<std::uint64_t> dims,
                        const std::vector<std::uint32_t>& data) {
  auto& e = add_entry(name, Dtype::U32, std::move(dims), data.size());
  e.payload.resize(data.size() * 4);
  std::memcpy(e.payload.data(), data.data(), e.payload.size());
}

void Container::put_matrix_f32(const std::string& name, const Eigen::MatrixXd& m) {
  std::vector<float> data;
  data.reserve(static_cast<std::size_t>(m.size()));
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) data.push_back(static_cast<float>(m(i, j)));
  put_f32(name, {static_cast<std::uint64_t>(m.rows()), static_cast<std::uint64_t>(m.cols())},
          data);
}

void Container::put_matrix_f64(const std::string& name, const Eigen::MatrixXd& m) {
  std::vector<double> data;
  data.reserve(static_cast<std::size_t>(m.size()));
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) data.push_back(m(i, j));
  put_f64(name, {static_cast<std::uint64_t>(m.rows()), static_cast<std::uint64_t>(m.cols())},
          data);
}

void Container::put_vector_f32(const std::string& name, const Eigen::VectorXd& v) {
  std::vector<float> data;
  data.reserve(static_cast<std::size_t>(v.size()));
  for (Eigen::Index i = 0; i < v.size(); ++i) data.push_back(static_cast<float>(v[i]));
  put_f32(name, {static_cast<std::uint64_t>(v.size())}, data);
}

void Container::put_vector_f64(const std::string& name, const Eigen::VectorXd& v) {
  put_f64(name, {static_cast<std::uint64_t>(v.size())},
          std::vector<double>(v.data(), v.data() + v.size()));
}

void Container::put_scalar_f64(const std::string& name, double value) {
  put_f64(name, {1}, {value});
}

void Container::put_scalar_u32(const std::string& name, std::uint32_t value) {
  put_u32(name, {1}, {value});
}

void Container::put_string(const std::string& name, const std::string& value) {
  std::vector<std::uint32_t> codes(value.begin(), value.end());
  put_u32(name, {static_cast<std::uint64_t>(codes.size())}, codes);
}

bool Container::has(const std::string& name) const {
  for (const auto& e : entries_)
    if (e.name == name) return true;
  return false;
}

const ContainerEntry& Container::entry(const std::string& name) const {
  for (const auto& e : entries_)
    if (e.name == name) return e;
  throw FormatError("container: missing array '" + name + "'");
}

std::vector<double> Container::get_f64(const std::string& name) const {
  const auto& e = entry(name);
  const auto n = e.element_count();
  std::vector<double> out(n);
  if (e.dtype == Dtype::F64) {
    std::memcpy(out.data(), e.payload.data(), n * 8);
  } else if (e.dtype == Dtype::F32) {
    for (std::uint64_t i = 0; i < n; ++i) {
      float f;
      std::memcpy(&f, e.payload.data() + i * 4, 4);
      out[i] = static_cast<double>(f);
    }
  } else {
    throw FormatError("container: '" + name + "' is not a float array");
  }
  return out;
}

std::vector<std::uint32_t> Container::get_u32(const std::string& name) const {
  const auto& e = entry(name);
  if (e.dtype != Dtype::U32) throw FormatError("container: '" + name + "' is not a u32 array");
  const auto n = e.element_count();
  std::vector<std::uint32_t> out(n);
  std::memcpy(out.data(), e.payload.data(), n * 4);
  return out;
}

Eigen::MatrixXd Container::get_matrix(const std::string& name) const {
  const auto& e = entry(name);
  if (e.dims.size() != 2)
    throw FormatError("container: '" + name + "' is not two-dimensional");
  const auto data = get_f64(name);
  Eigen::MatrixXd m(static_cast<Eigen::Index>(e.dims[0]), static_cast<Eigen::Index>(e.dims[1]));
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j)
      m(i, j) = data[static_cast<std::size_t>(i) * m.cols() + j];
  return m;
}

Eigen::VectorXd Container::get_vector(const std::string& name) const {
  const auto& e = entry(name);
  if (e.dims.size() != 1)
    throw FormatError("container: '" + name + "' is not one-dimensional");
  const auto data = get_f64(name);
  return Eigen::Map<const Eigen::VectorXd>(data.data(), static_cast<Eigen::Index>(data.size()));
}

double Container::get_scalar_f64(const std::string& name) const {
  const auto data = get_f64(name);
  if (data.size() != 1) throw FormatError("container: '" + name + "' is not a scalar");
  return data[0];
}

std::uint32_t Container::get_scalar_u32(const std::string& name) const {
  const auto data = get_u32(name);
  if (data.size() != 1) throw FormatError("container: '" + name + "' is not a scalar");
  return data[0];
}

std::string Container::get_string(const std::string& name) const {
  const auto codes = get_u32(name);
  std::string out;
  out.reserve(codes.size());
  for (auto c : codes) out.push_back(static_cast<char>(c));
  return out;
}

std::uint64_t Container::file_size() const {
  std::uint64_t n = 4 + 2 + 4;  // magic + version + array count
  for (const auto& e : entries_)
    n += 2 + e.name.size() + 1 + 1 + 8 * e.dims.size() + e.payload.size();
  return n;
}

void Container::save(const std::filesystem::path& path) const {
  if (entries_.size() > std::numeric_limits<std::uint32_t>::max())
    throw ValidationError("container: too many arrays");
  std::vector<std::uint8_t> buf;
  buf.reserve(file_size());
  buf.insert(buf.end(), kMagic, kMagic + 4);
  append_raw<std::uint16_t>(buf, kVersion);
  append_raw<std::uint32_t>(buf, static_cast<std::uint32_t>(entries_.size()));
  for (const auto& e : entries_) {
    append_raw<std::uint16_t>(buf, static_cast<std::uint16_t>(e.name.size()));
    buf.insert(buf.end(), e.name.begin(), e.name.end());
    append_raw<std::uint8_t>(buf, static_cast<std::uint8_t>(e.dtype));
    append_raw<std::uint8_t>(buf, static_cast<std::uint8_t>(e.dims.size()));
    for (auto d : e.dims) append_raw<std::uint64_t>(buf, d);
    buf.insert(buf.end(), e.payload.begin(), e.payload.end());
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("container: cannot open '" + path.string() + "' for writing");
  out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  if (!out) throw IoError("container: write failed for '" + path.string() + "'");
}

Container Container::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("container: cannot open '" + path.string() + "'");
  std::vector<std::uint8_t> buf((std::istreambuf_iterator<char>(in)),
                                std::istreambuf_iterator<char>());
  std::size_t pos = 0;
  if (buf.size() < 4 || std::memcmp(buf.data(), kMagic, 4) != 0)
    throw FormatError("container: bad magic");
  pos = 4;
  const auto version = read_raw<std::uint16_t>(buf, pos);
  if (version != kVersion)
    throw FormatError("container: unsupported version " + std::to_string(version));
  const auto count = read_raw<std::uint32_t>(buf, pos);

  Container c;
  c.entries_.reserve(count);
  for (std::uint32_t a = 0; a < count; ++a) {
    const auto name_len = read_raw<std::uint16_t>(buf, pos);
    if (pos + name_len > buf.size()) throw FormatError("container: truncated payload");
    std::string name(reinterpret_cast<const char*>(buf.data() + pos), name_len);
    pos += name_len;
    const auto dtype_tag = read_raw<std::uint8_t>(buf, pos);
    if (dtype_tag > 2) throw FormatError("container: unknown dtype tag");
    const auto ndim = read_raw<std::uint8_t>(buf, pos);
    std::vector<std::uint64_t> dims(ndim);
    for (auto& d : dims) d = read_raw<std::uint64_t>(buf, pos);
    const auto dtype = static_cast<Dtype>(dtype_tag);
    const auto n_bytes = product(dims) * dtype_size(dtype);
    if (pos + n_bytes > buf.size()) throw FormatError("container: truncated payload");
    ContainerEntry e{std::move(name), dtype, std::move(dims), {}};
    e.payload.assign(buf.begin() + static_cast<std::ptrdiff_t>(pos),
                     buf.begin() + static_cast<std::ptrdiff_t>(pos + n_bytes));
    pos += n_bytes;
    if (c.has(e.name)) throw FormatError("container: duplicate array name '" + e.name + "'");
    c.entries_.push_back(std::move(e));
  }
  if (pos != buf.size()) throw FormatError("container: trailing bytes after last array");
  return c;
}

}  // namespace bathyrom
