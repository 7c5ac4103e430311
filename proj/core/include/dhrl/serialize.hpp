#pragma once

#include <cstdint>
#include <cstring>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace dhrl {

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Little-endian raw binary stream used for checkpoints. Doubles are written
/// bit for bit, so a save/load round trip is exact.
class BinaryWriter {
 public:
  explicit BinaryWriter(std::ostream& out) : out_(out) {}

  void u32(std::uint32_t v) { raw(&v, sizeof v); }
  void i64(std::int64_t v) { raw(&v, sizeof v); }
  void u64(std::uint64_t v) { raw(&v, sizeof v); }
  void f64(double v) { raw(&v, sizeof v); }
  void boolean(bool v) { u32(v ? 1u : 0u); }
  void str(const std::string& s);
  void vec(const Eigen::VectorXd& v);
  void ints(const std::vector<int>& v);

 private:
  void raw(const void* data, std::size_t n);
  std::ostream& out_;
};

class BinaryReader {
 public:
  explicit BinaryReader(std::istream& in) : in_(in) {}

  std::uint32_t u32() { return get<std::uint32_t>(); }
  std::int64_t i64() { return get<std::int64_t>(); }
  std::uint64_t u64() { return get<std::uint64_t>(); }
  double f64() { return get<double>(); }
  bool boolean() { return u32() != 0u; }
  std::string str();
  Eigen::VectorXd vec();
  std::vector<int> ints();

 private:
  template <typename T>
  T get() {
    T v{};
    raw(&v, sizeof v);
    return v;
  }
  void raw(void* data, std::size_t n);
  std::istream& in_;
};

}  // namespace dhrl
