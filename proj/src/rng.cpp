#include "bregmix/rng.hpp"

namespace bregmix {

std::uint64_t splitmix64(std::uint64_t x)
{
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

std::uint64_t stream_seed(std::uint64_t seed, Ensemble ensemble, std::uint64_t run, StreamRole role)
{
    // Chained hashing keeps neighbouring keys far apart in seed space.
    std::uint64_t h = splitmix64(seed);
    h = splitmix64(h ^ static_cast<std::uint64_t>(ensemble));
    h = splitmix64(h ^ run);
    h = splitmix64(h ^ static_cast<std::uint64_t>(role));
    return h;
}

}  // namespace bregmix
