#include "granger/rng.hpp"

#include "granger/errors.hpp"

#include <cmath>
#include <numbers>

namespace granger {

namespace {

std::uint64_t splitmix64(std::uint64_t& state) {
    state += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

} // namespace

std::uint64_t hash_stream_name(std::string_view name) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : name) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::uint64_t derive_seed(std::uint64_t master_seed, std::string_view scope) {
    std::uint64_t s = master_seed ^ hash_stream_name(scope);
    // one mixing round so adjacent seeds do not produce correlated streams
    return splitmix64(s);
}

RngStream::RngStream(std::uint64_t master_seed, std::string_view stream_name)
    : state_(derive_seed(master_seed, stream_name)) {}

std::uint64_t RngStream::next_u64() { return splitmix64(state_); }

double RngStream::uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double RngStream::uniform(double lo, double hi) {
    return lo + (hi - lo) * uniform();
}

double RngStream::normal(double mean, double sd) {
    if (has_spare_) {
        has_spare_ = false;
        return mean + sd * spare_;
    }
    // Box-Muller; u1 in (0,1] to keep log finite
    double u1 = 1.0 - uniform();
    double u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double a = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return mean + sd * (r * std::cos(a));
}

std::uint64_t RngStream::uniform_below(std::uint64_t n) {
    if (n == 0) throw UsageError("RngStream::uniform_below: n must be >= 1");
    // Lemire multiply-shift; deterministic and unbiased enough for simulation use
    unsigned __int128 m = static_cast<unsigned __int128>(next_u64()) * n;
    return static_cast<std::uint64_t>(m >> 64);
}

double RngStream::sign() { return (next_u64() & 1ULL) ? 1.0 : -1.0; }

std::vector<std::size_t> RngStream::permutation(std::size_t n) {
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    for (std::size_t i = n; i > 1; --i) {
        std::size_t j = static_cast<std::size_t>(uniform_below(i));
        std::swap(idx[i - 1], idx[j]);
    }
    return idx;
}

} // namespace granger
