#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <random>

namespace endogroup {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Splittable random stream. A stream is identified by its 64-bit key; child
// streams are derived by hashing (key, index), so replication r of a study
// always sees the same draws regardless of scheduling order.
class Rng {
 public:
  using Engine = std::mt19937_64;

  explicit Rng(std::uint64_t key) : key_(key), engine_(seed_for(key)) {}

  std::uint64_t key() const { return key_; }

  Rng split(std::uint64_t index) const {
    return Rng(splitmix64(key_ ^ splitmix64(index + 0x632be59bd9b4e019ULL)));
  }
  Rng split(std::initializer_list<std::uint64_t> path) const {
    Rng r = *this;
    for (auto p : path) r = r.split(p);
    return r;
  }

  Engine& engine() { return engine_; }

  double normal() { return std_normal_(engine_); }
  double normal(double mean, double sd) { return mean + sd * std_normal_(engine_); }
  // Open interval (0, 1).
  double uniform() {
    double u;
    do {
      u = std::generate_canonical<double, 53>(engine_);
    } while (u <= 0.0);
    return u;
  }
  bool bernoulli(double p) { return uniform() < p; }
  // Type I extreme value (Gumbel), location 0, scale 1.
  double gumbel() { return -std::log(-std::log(uniform())); }

 private:
  static std::seed_seq::result_type half(std::uint64_t v, int hi) {
    return static_cast<std::seed_seq::result_type>(hi ? (v >> 32) : (v & 0xffffffffULL));
  }
  static Engine seed_for(std::uint64_t key) {
    std::uint64_t a = splitmix64(key);
    std::uint64_t b = splitmix64(a);
    std::seed_seq seq{half(a, 0), half(a, 1), half(b, 0), half(b, 1)};
    return Engine(seq);
  }

  std::uint64_t key_;
  Engine engine_;
  std::normal_distribution<double> std_normal_{0.0, 1.0};
};

}  // namespace endogroup
