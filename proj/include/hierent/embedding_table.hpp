#ifndef HIERENT_EMBEDDING_TABLE_HPP_
#define HIERENT_EMBEDDING_TABLE_HPP_

//! \file embedding_table.hpp
//! Lookup-table encoder: one tangent-space vector per node id plus the learnable
//! log-temperature and log-curvature, with a small self-describing binary file
//! format and a CSV dump for inspection.
//!
//! Binary layout (little-endian):
//!   magic "HENT" | u32 version | u32 dim | u8 space_kind | u64 node count |
//!   per node: u32 byte length + id bytes | f64 payload (count * dim) |
//!   f64 log_tau | f64 log_c

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <optional>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "hierent/geometry.hpp"

namespace hierent {

static_assert(std::endian::native == std::endian::little,
              "embedding files are written in host byte order");

inline constexpr double kInitialTemperature = 0.07;

class EmbeddingTable {
 public:
  EmbeddingTable() = default;

  EmbeddingTable(std::vector<std::string> ids, std::size_t dim, SpaceKind kind)
      : ids_(std::move(ids)), dim_(dim), kind_(kind), data_(ids_.size() * dim, 0.0) {
    index_.reserve(ids_.size());
    for (std::size_t i = 0; i < ids_.size(); ++i) {
      if (!index_.emplace(ids_[i], i).second) {
        throw std::invalid_argument("duplicate node id: " + ids_[i]);
      }
    }
  }

  std::size_t size() const { return ids_.size(); }
  std::size_t dim() const { return dim_; }
  SpaceKind kind() const { return kind_; }
  const std::vector<std::string>& ids() const { return ids_; }
  const std::string& id(std::size_t i) const { return ids_.at(i); }

  std::optional<std::size_t> find(const std::string& id) const {
    auto it = index_.find(id);
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  std::size_t index_of(const std::string& id) const {
    auto it = index_.find(id);
    if (it == index_.end()) throw std::out_of_range("unknown node id: " + id);
    return it->second;
  }

  std::span<double> row(std::size_t i) { return {data_.data() + i * dim_, dim_}; }
  std::span<const double> row(std::size_t i) const { return {data_.data() + i * dim_, dim_}; }

  std::vector<double>& data() { return data_; }
  const std::vector<double>& data() const { return data_; }

  double log_tau = std::log(kInitialTemperature);
  double log_c = 0.0;

  double tau() const { return std::exp(log_tau); }
  Curvature curvature() const { return Curvature(std::exp(log_c)); }

  double norm(std::size_t i) const { return detail::norm(row(i)); }

  friend bool operator==(const EmbeddingTable& a, const EmbeddingTable& b) {
    return a.ids_ == b.ids_ && a.dim_ == b.dim_ && a.kind_ == b.kind_ && a.data_ == b.data_ &&
           a.log_tau == b.log_tau && a.log_c == b.log_c;
  }

 private:
  std::vector<std::string> ids_;
  std::unordered_map<std::string, std::size_t> index_;
  std::size_t dim_ = 0;
  SpaceKind kind_ = SpaceKind::hyperbolic;
  std::vector<double> data_;
};

class EmbeddingFileError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr char kEmbeddingMagic[4] = {'H', 'E', 'N', 'T'};
inline constexpr std::uint32_t kEmbeddingVersion = 1;

namespace io {

template <class T>
void put(std::ostream& os, const T& v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T get(std::istream& is) {
  T v{};
  if (!is.read(reinterpret_cast<char*>(&v), sizeof(T))) {
    throw EmbeddingFileError("truncated embedding stream");
  }
  return v;
}

}  // namespace io

inline void write_table(std::ostream& os, const EmbeddingTable& t) {
  os.write(kEmbeddingMagic, 4);
  io::put(os, kEmbeddingVersion);
  io::put(os, static_cast<std::uint32_t>(t.dim()));
  io::put(os, static_cast<std::uint8_t>(t.kind() == SpaceKind::hyperbolic ? 0 : 1));
  io::put(os, static_cast<std::uint64_t>(t.size()));
  for (const auto& id : t.ids()) {
    io::put(os, static_cast<std::uint32_t>(id.size()));
    os.write(id.data(), static_cast<std::streamsize>(id.size()));
  }
  os.write(reinterpret_cast<const char*>(t.data().data()),
           static_cast<std::streamsize>(t.data().size() * sizeof(double)));
  io::put(os, t.log_tau);
  io::put(os, t.log_c);
}

/// Reads a table; when expected_dim is set a different stored dim is an error.
inline EmbeddingTable read_table(std::istream& is,
                                 std::optional<std::size_t> expected_dim = std::nullopt) {
  char magic[4] = {};
  if (!is.read(magic, 4) || std::memcmp(magic, kEmbeddingMagic, 4) != 0) {
    throw EmbeddingFileError("bad magic bytes: not an embedding file");
  }
  const auto version = io::get<std::uint32_t>(is);
  if (version != kEmbeddingVersion) {
    throw EmbeddingFileError("unsupported embedding file version " + std::to_string(version));
  }
  const auto dim = io::get<std::uint32_t>(is);
  const auto kind_tag = io::get<std::uint8_t>(is);
  if (kind_tag > 1) throw EmbeddingFileError("corrupt header: space kind tag");
  if (dim == 0) throw EmbeddingFileError("corrupt header: zero dimension");
  if (expected_dim && *expected_dim != dim) {
    throw EmbeddingFileError("dimension mismatch: file has d=" + std::to_string(dim) +
                             ", session expects d=" + std::to_string(*expected_dim));
  }
  const auto count = io::get<std::uint64_t>(is);
  if (count > (std::uint64_t{1} << 32)) throw EmbeddingFileError("corrupt header: node count");
  std::vector<std::string> ids;
  ids.reserve(count);
  for (std::uint64_t i = 0; i < count; ++i) {
    const auto len = io::get<std::uint32_t>(is);
    if (len > (1u << 20)) throw EmbeddingFileError("corrupt id table");
    std::string id(len, '\0');
    if (!is.read(id.data(), len)) throw EmbeddingFileError("truncated id table");
    ids.push_back(std::move(id));
  }
  EmbeddingTable t(std::move(ids), dim, kind_tag == 0 ? SpaceKind::hyperbolic : SpaceKind::euclidean);
  if (!is.read(reinterpret_cast<char*>(t.data().data()),
               static_cast<std::streamsize>(t.data().size() * sizeof(double)))) {
    throw EmbeddingFileError("truncated payload");
  }
  t.log_tau = io::get<double>(is);
  t.log_c = io::get<double>(is);
  return t;
}

inline void save_embeddings(const EmbeddingTable& t, const std::string& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw EmbeddingFileError("cannot open for writing: " + path);
  write_table(os, t);
  if (!os) throw EmbeddingFileError("write failed: " + path);
}

inline EmbeddingTable load_embeddings(const std::string& path,
                                      std::optional<std::size_t> expected_dim = std::nullopt) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw EmbeddingFileError("cannot open embedding file: " + path);
  return read_table(is, expected_dim);
}

/// id,norm,v0..v{d-1}; tau and c on a leading comment line.
inline void export_embeddings_csv(const EmbeddingTable& t, std::ostream& os) {
  os << std::setprecision(17);
  os << "# space=" << to_string(t.kind()) << " tau=" << t.tau() << " c=" << std::exp(t.log_c)
     << "\n";
  os << "id,norm";
  for (std::size_t k = 0; k < t.dim(); ++k) os << ",v" << k;
  os << "\n";
  for (std::size_t i = 0; i < t.size(); ++i) {
    os << t.id(i) << "," << t.norm(i);
    for (double v : t.row(i)) os << "," << v;
    os << "\n";
  }
}

}  // namespace hierent

#endif  // HIERENT_EMBEDDING_TABLE_HPP_
