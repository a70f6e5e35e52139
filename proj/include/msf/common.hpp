#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace msf {

// Exit-code mapping: input_error -> 1, contract_error -> 2, numeric_error -> 3.
struct input_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct contract_error : std::logic_error {
  using std::logic_error::logic_error;
};
struct numeric_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw contract_error(msg);
}

// Exactly rounded sum of doubles (Shewchuk's cascaded two-sum, as in
// Python's math.fsum). The result is independent of input order, which is
// what makes the attention reductions bitwise permutation-equivariant.
class ExactSum {
 public:
  void add(double x) {
    std::size_t used = 0;
    for (std::size_t i = 0; i < partials_.size(); ++i) {
      double y = partials_[i];
      if (std::fabs(x) < std::fabs(y)) std::swap(x, y);
      double hi = x + y;
      double lo = y - (hi - x);
      if (lo != 0.0) partials_[used++] = lo;
      x = hi;
    }
    partials_.resize(used);
    partials_.push_back(x);
  }
  double result() const {
    double s = 0.0;
    for (double p : partials_) s += p;
    return s;
  }
  void reset() { partials_.clear(); }

 private:
  std::vector<double> partials_;
};

inline double fsum(std::span<const double> xs) {
  ExactSum s;
  for (double x : xs) s.add(x);
  return s.result();
}

// Deterministic RNG wrapper. Standard distributions are implementation
// defined, so sampling is done by hand to keep scene generation bitwise
// reproducible.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  double uniform(double lo, double hi) {
    // 53-bit mantissa draw in [0,1).
    double u = static_cast<double>(gen_() >> 11) * 0x1.0p-53;
    return lo + u * (hi - lo);
  }

  double normal(double mean = 0.0, double sigma = 1.0) {
    if (have_spare_) {
      have_spare_ = false;
      return mean + sigma * spare_;
    }
    double u1 = 0.0;
    do {
      u1 = uniform(0.0, 1.0);
    } while (u1 <= 0.0);
    double u2 = uniform(0.0, 1.0);
    double r = std::sqrt(-2.0 * std::log(u1));
    spare_ = r * std::sin(2.0 * M_PI * u2);
    have_spare_ = true;
    return mean + sigma * r * std::cos(2.0 * M_PI * u2);
  }

  std::uint64_t next_u64() { return gen_(); }

  // Uniform integer in [0, n).
  std::size_t index(std::size_t n) {
    return static_cast<std::size_t>(uniform(0.0, 1.0) * static_cast<double>(n)) % n;
  }

 private:
  std::mt19937_64 gen_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

inline double wrap_angle(double a) {
  // Normalize into (-pi, pi].
  a = std::fmod(a, 2.0 * M_PI);
  if (a <= -M_PI) a += 2.0 * M_PI;
  if (a > M_PI) a -= 2.0 * M_PI;
  return a;
}

}  // namespace msf
