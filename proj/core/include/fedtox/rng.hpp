#pragma once

#include <cstdint>
#include <initializer_list>
#include <string_view>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace fedtox {

/// splitmix64 finalizer; used to derive independent streams from (seed, tag...) tuples.
std::uint64_t mix_seed(std::uint64_t x) noexcept;
std::uint64_t derive_seed(std::initializer_list<std::uint64_t> parts) noexcept;
std::uint64_t hash_string(std::string_view s) noexcept;
/// hash_string as 16 lowercase hex digits.
std::string hex_digest(std::string_view s);

/// Deterministic random source. Every sampler is implemented on top of the raw
/// mt19937_64 stream, so sequences do not depend on the standard library vendor.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }
  double uniform();                       // [0, 1)
  double uniform(double lo, double hi);   // [lo, hi)
  std::size_t index(std::size_t n);       // uniform in [0, n), n > 0
  bool bernoulli(double p) { return uniform() < p; }
  double normal(double mean = 0.0, double stddev = 1.0);
  double gamma(double shape);
  double beta(double a, double b);
  std::size_t geometric(double mean);     // support {0,1,...} with the given mean
  double exponential(double mean);

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = index(i);
      std::swap(v[i - 1], v[j]);
    }
  }

  /// k distinct indices from [0, n) in sampled order (partial Fisher-Yates).
  std::vector<std::size_t> sample_indices(std::size_t n, std::size_t k);

 private:
  std::mt19937_64 engine_;
  bool has_spare_normal_ = false;
  double spare_normal_ = 0.0;
};

}  // namespace fedtox
