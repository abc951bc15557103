#pragma once

#include <cstdint>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <vector>

#include <Eigen/Dense>

namespace semdrive {

// Raw host-order dump used for resume snapshots. Snapshots are only read back
// by the same build on the same machine, unlike checkpoints.
class BinaryWriter {
 public:
  explicit BinaryWriter(std::ostream& os) : os_(os) {}

  template <typename T>
    requires std::is_trivially_copyable_v<T>
  void put(const T& value) {
    os_.write(reinterpret_cast<const char*>(&value), sizeof(T));
  }

  void put(const std::string& s) {
    put<std::uint64_t>(s.size());
    os_.write(s.data(), static_cast<std::streamsize>(s.size()));
  }

  template <typename T>
    requires std::is_trivially_copyable_v<T>
  void put(const std::vector<T>& v) {
    put<std::uint64_t>(v.size());
    os_.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(T)));
  }

  void put(const Eigen::MatrixXd& m) {
    put<std::int64_t>(m.rows());
    put<std::int64_t>(m.cols());
    os_.write(reinterpret_cast<const char*>(m.data()), static_cast<std::streamsize>(m.size() * sizeof(double)));
  }

  void put(const Eigen::VectorXd& v) {
    put<std::int64_t>(v.size());
    os_.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(double)));
  }

 private:
  std::ostream& os_;
};

class BinaryReader {
 public:
  explicit BinaryReader(std::istream& is) : is_(is) {}

  template <typename T>
    requires std::is_trivially_copyable_v<T>
  T get() {
    T value;
    read(&value, sizeof(T));
    return value;
  }

  std::string get_string() {
    std::string s(get<std::uint64_t>(), '\0');
    read(s.data(), s.size());
    return s;
  }

  template <typename T>
  std::vector<T> get_vector() {
    std::vector<T> v(get<std::uint64_t>());
    read(v.data(), v.size() * sizeof(T));
    return v;
  }

  Eigen::MatrixXd get_matrix() {
    const auto rows = get<std::int64_t>();
    const auto cols = get<std::int64_t>();
    Eigen::MatrixXd m(rows, cols);
    read(m.data(), static_cast<std::size_t>(m.size()) * sizeof(double));
    return m;
  }

  Eigen::VectorXd get_vector_xd() {
    Eigen::VectorXd v(get<std::int64_t>());
    read(v.data(), static_cast<std::size_t>(v.size()) * sizeof(double));
    return v;
  }

 private:
  void read(void* dst, std::size_t n) {
    if (n == 0) return;
    if (!is_.read(static_cast<char*>(dst), static_cast<std::streamsize>(n))) {
      throw std::runtime_error("resume snapshot truncated");
    }
  }

  std::istream& is_;
};

}  // namespace semdrive
