#pragma once

#include <chrono>
#include <cstdint>
#include <cstring>
#include <functional>
#include <istream>
#include <ostream>
#include <string>
#include <thread>
#include <vector>

#include "romforge/common.hpp"

namespace romforge::util {

// ---- little-endian binary I/O ----------------------------------------------
// All on-disk binary formats are little-endian; this code assumes a
// little-endian host (checked once at startup of the readers/writers).

inline bool host_is_little_endian() {
  const std::uint32_t probe = 1;
  std::uint8_t byte0;
  std::memcpy(&byte0, &probe, 1);
  return byte0 == 1;
}

template <typename T>
void write_pod(std::ostream& os, const T& value) {
  static_assert(std::is_trivially_copyable_v<T>);
  os.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T read_pod(std::istream& is) {
  static_assert(std::is_trivially_copyable_v<T>);
  T value{};
  is.read(reinterpret_cast<char*>(&value), sizeof(T));
  if (!is) throw IoError("unexpected end of file");
  return value;
}

void write_doubles(std::ostream& os, const double* data, std::size_t count);
void read_doubles(std::istream& is, double* data, std::size_t count);

// ---- FNV-1a 64-bit ---------------------------------------------------------

inline std::uint64_t fnv1a64(const void* data, std::size_t size,
                             std::uint64_t seed = 0xcbf29ce484222325ull) {
  const auto* bytes = static_cast<const std::uint8_t*>(data);
  std::uint64_t h = seed;
  for (std::size_t i = 0; i < size; ++i) {
    h ^= bytes[i];
    h *= 0x100000001b3ull;
  }
  return h;
}

inline std::uint64_t fnv1a64(const std::string& s) { return fnv1a64(s.data(), s.size()); }

std::uint64_t fnv1a64_file(const std::string& path);

std::string hex64(std::uint64_t value);

// ---- wall clock ------------------------------------------------------------

class Stopwatch {
 public:
  Stopwatch() : start_(clock::now()) {}
  double seconds() const {
    return std::chrono::duration<double>(clock::now() - start_).count();
  }
  double millis() const { return seconds() * 1e3; }
  void reset() { start_ = clock::now(); }

 private:
  using clock = std::chrono::steady_clock;
  clock::time_point start_;
};

// ---- static-partition parallel loop ----------------------------------------
// Runs fn(i) for i in [begin, end).  threads <= 1 executes inline, which is
// the bitwise-reproducible path.  Work is split into contiguous chunks, so a
// caller that writes results into per-index slots gets the same values for
// any thread count; only the filling order differs.

void parallel_for(std::int64_t begin, std::int64_t end, int threads,
                  const std::function<void(std::int64_t)>& fn);

}  // namespace romforge::util
