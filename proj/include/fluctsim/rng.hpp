#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace fluctsim {

// Substream derivation. Every consumer of randomness gets its own mt19937_64
// seeded from (base_seed, tag...) through a splitmix64 chain, so ensembles are
// reproducible run by run and independent of worker count or scheduling.
// Tags are (module id, run index, ...) as documented in the README.
inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> tags) {
    std::uint64_t s = base;
    (void)splitmix64(s);
    for (std::uint64_t t : tags) {
        s ^= splitmix64(s) + 0x9e3779b97f4a7c15ULL * (t + 1);
        (void)splitmix64(s);
    }
    return splitmix64(s);
}

inline std::mt19937_64 make_rng(std::uint64_t base, std::initializer_list<std::uint64_t> tags) {
    std::uint64_t s = derive_seed(base, tags);
    std::seed_seq seq{static_cast<std::uint32_t>(s), static_cast<std::uint32_t>(s >> 32),
                      static_cast<std::uint32_t>(splitmix64(s)),
                      static_cast<std::uint32_t>(splitmix64(s))};
    return std::mt19937_64(seq);
}

// Module tags for substream derivation.
enum RngTag : std::uint64_t {
    tag_sampler = 1,
    tag_dynamics = 2,
    tag_fields = 3,
    tag_generator_b = 4,
    tag_generator_c = 5,
    tag_balance_gain = 6,
    tag_balance_loss = 7,
    tag_ou = 8,
    tag_clusters = 9,
    tag_pseudo = 10,
    tag_gram = 11,
};

}  // namespace fluctsim
