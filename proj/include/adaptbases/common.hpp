#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace adaptbases {

struct Location {
  double x = 0.0;
  double y = 0.0;
};

inline double sq_dist(const Location& a, const Location& b) {
  const double dx = a.x - b.x, dy = a.y - b.y;
  return dx * dx + dy * dy;
}

inline double dist(const Location& a, const Location& b) {
  return std::sqrt(sq_dist(a, b));
}

struct Rect {
  double xmin = 0.0, ymin = 0.0, xmax = 1.0, ymax = 1.0;

  bool contains(const Location& s) const {
    return s.x >= xmin && s.x <= xmax && s.y >= ymin && s.y <= ymax;
  }
  double width() const { return xmax - xmin; }
  double height() const { return ymax - ymin; }
};

// Error taxonomy shared across modules. Each carries a short code used by
// the CLI to map failures onto exit codes.
class Error : public std::runtime_error {
 public:
  Error(std::string code, const std::string& what)
      : std::runtime_error(code + ": " + what), code_(std::move(code)) {}
  const std::string& code() const { return code_; }

 private:
  std::string code_;
};

inline Error validation_error(const std::string& code, const std::string& msg) {
  return Error(code, msg);
}

// SplitMix64: used only to derive independent substream seeds from the
// 64-bit master seed, so per-partition workers are reproducible regardless
// of scheduling.
inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream_id) {
  std::uint64_t s = master ^ (0xd1b54a32d192ed03ULL * (stream_id + 1));
  return splitmix64(s);
}

using Rng = std::mt19937_64;

inline Rng make_rng(std::uint64_t master, std::uint64_t stream_id) {
  return Rng(derive_seed(master, stream_id));
}

// 17 significant digits: round-trip exact for IEEE doubles.
inline std::string fmt_g17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline std::string fmt_g17(int v) { return std::to_string(v); }

}  // namespace adaptbases
