#ifndef EFFDIM_RNG_HPP
#define EFFDIM_RNG_HPP

#include <cstdint>
#include <string_view>

namespace effdim {

/// Counter-based pseudo-random generator. Each draw mixes (key, counter)
/// through a SplitMix64-style finalizer, so streams are seekable and
/// independent draws never share state. Substreams are derived by hashing a
/// stream name into the key; identical (seed, stream) pairs always reproduce
/// the same sequence, and a dataset row can own its own substream so that
/// row-parallel generation is schedule-independent.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : key_(mix(seed ^ 0x9e3779b97f4a7c15ull)) {}

    Rng(std::uint64_t seed, std::string_view stream) : Rng(seed) {
        key_ = mix(key_ ^ hash_name(stream));
    }

    /// Child generator for a named substream (stage names, row indices).
    Rng substream(std::string_view name) const {
        Rng r(*this);
        r.key_ = mix(r.key_ ^ hash_name(name));
        r.counter_ = 0;
        return r;
    }
    Rng substream(std::uint64_t index) const {
        Rng r(*this);
        r.key_ = mix(r.key_ ^ mix(index + 0x632be59bd9b4e019ull));
        r.counter_ = 0;
        return r;
    }

    std::uint64_t next_u64() { return mix(key_ + 0x9e3779b97f4a7c15ull * ++counter_); }

    /// Uniform double in [0, 1) with 53 random bits.
    double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    /// Standard normal via Box-Muller (used only for eigensolver test probes
    /// and weight init; no distributional contract beyond that).
    double normal();

    static std::uint64_t hash_name(std::string_view name);

  private:
    static std::uint64_t mix(std::uint64_t z) {
        z ^= z >> 30;
        z *= 0xbf58476d1ce4e5b9ull;
        z ^= z >> 27;
        z *= 0x94d049bb133111ebull;
        z ^= z >> 31;
        return z;
    }

    std::uint64_t key_ = 0;
    std::uint64_t counter_ = 0;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

} // namespace effdim

#endif
