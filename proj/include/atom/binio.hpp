#pragma once

// Little-endian binary file helpers shared by the model/dataset/sketch
// formats. All multi-byte values are written little-endian regardless of
// host order.

#include <algorithm>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>

namespace atom::io {

class Writer {
 public:
  explicit Writer(const std::string& path)
      : out_(path, std::ios::binary | std::ios::trunc), path_(path) {
    if (!out_) throw std::runtime_error("cannot open for writing: " + path);
  }
  void magic(const char* m) {  // 7 chars + NUL
    char buf[8] = {};
    std::memcpy(buf, m, std::min<std::size_t>(7, std::strlen(m)));
    out_.write(buf, 8);
  }
  void u64(std::uint64_t v) {
    char buf[8];
    for (int i = 0; i < 8; ++i) buf[i] = char((v >> (8 * i)) & 0xff);
    out_.write(buf, 8);
  }
  void f64(double d) {
    std::uint64_t v;
    std::memcpy(&v, &d, 8);
    u64(v);
  }
  ~Writer() { out_.close(); }

 private:
  std::ofstream out_;
  std::string path_;
};

class Reader {
 public:
  explicit Reader(const std::string& path)
      : in_(path, std::ios::binary), path_(path) {
    if (!in_) throw std::runtime_error("cannot open for reading: " + path);
  }
  void expect_magic(const char* m) {
    char buf[8] = {};
    in_.read(buf, 8);
    char want[8] = {};
    std::memcpy(want, m, std::min<std::size_t>(7, std::strlen(m)));
    if (!in_ || std::memcmp(buf, want, 8) != 0)
      throw std::runtime_error("bad magic in " + path_ + " (expected " +
                               std::string(m) + ")");
  }
  std::uint64_t u64() {
    unsigned char buf[8];
    in_.read(reinterpret_cast<char*>(buf), 8);
    if (!in_) throw std::runtime_error("truncated file: " + path_);
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) v = (v << 8) | buf[i];
    return v;
  }
  double f64() {
    const std::uint64_t v = u64();
    double d;
    std::memcpy(&d, &v, 8);
    return d;
  }

 private:
  std::ifstream in_;
  std::string path_;
};

}  // namespace atom::io
