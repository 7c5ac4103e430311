#include "dhrl/serialize.hpp"

#include <istream>
#include <ostream>

namespace dhrl {

void BinaryWriter::raw(const void* data, std::size_t n) {
  out_.write(static_cast<const char*>(data), static_cast<std::streamsize>(n));
  if (!out_) throw CheckpointError("checkpoint write failed");
}

void BinaryWriter::str(const std::string& s) {
  u64(s.size());
  raw(s.data(), s.size());
}

void BinaryWriter::vec(const Eigen::VectorXd& v) {
  u64(static_cast<std::uint64_t>(v.size()));
  raw(v.data(), sizeof(double) * static_cast<std::size_t>(v.size()));
}

void BinaryWriter::ints(const std::vector<int>& v) {
  u64(v.size());
  for (int x : v) i64(x);
}

void BinaryReader::raw(void* data, std::size_t n) {
  in_.read(static_cast<char*>(data), static_cast<std::streamsize>(n));
  if (!in_) throw CheckpointError("checkpoint truncated");
}

std::string BinaryReader::str() {
  const auto n = u64();
  if (n > (1ull << 32)) throw CheckpointError("checkpoint string length is implausible");
  std::string s(n, '\0');
  raw(s.data(), n);
  return s;
}

Eigen::VectorXd BinaryReader::vec() {
  const auto n = u64();
  if (n > (1ull << 34)) throw CheckpointError("checkpoint vector length is implausible");
  Eigen::VectorXd v(static_cast<Eigen::Index>(n));
  raw(v.data(), sizeof(double) * n);
  return v;
}

std::vector<int> BinaryReader::ints() {
  const auto n = u64();
  if (n > (1ull << 20)) throw CheckpointError("checkpoint list length is implausible");
  std::vector<int> v(n);
  for (auto& x : v) x = static_cast<int>(i64());
  return v;
}

}  // namespace dhrl
