#ifndef GRANGER_RNG_HPP
#define GRANGER_RNG_HPP

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace granger {

/// Deterministic splittable random stream.
///
/// Every consumer of randomness derives its own stream from the single
/// 64-bit experiment seed plus a stream name ("support", "noise",
/// "init/cMLP/3", ...). Streams are independent of each other and of the
/// order in which they are created, so multi-threaded runs reproduce
/// single-threaded ones bit for bit. The generator is splitmix64 and the
/// distributions are implemented here rather than taken from <random>,
/// which keeps the draws identical across standard libraries.
class RngStream {
  public:
    RngStream(std::uint64_t master_seed, std::string_view stream_name);

    std::uint64_t next_u64();

    /// Uniform in [0, 1) with 53 random bits.
    double uniform();
    double uniform(double lo, double hi);

    /// Standard Box-Muller normal draw.
    double normal(double mean, double sd);

    /// Uniform integer in [0, n), n >= 1.
    std::uint64_t uniform_below(std::uint64_t n);

    /// Random sign, +1 or -1 with equal probability.
    double sign();

    /// Fisher-Yates permutation of {0, ..., n-1}.
    std::vector<std::size_t> permutation(std::size_t n);

  private:
    std::uint64_t state_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

/// Stable 64-bit hash of a stream name (FNV-1a).
std::uint64_t hash_stream_name(std::string_view name);

/// Sub-seed derivation for nested scopes (per-target models, per-seed runs).
std::uint64_t derive_seed(std::uint64_t master_seed, std::string_view scope);

} // namespace granger

#endif
