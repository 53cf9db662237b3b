#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace berth {

// FNV-1a, used to derive independent named substreams from one run seed.
inline std::uint64_t hash_name(std::string_view name) {
    std::uint64_t h = 14695981039346656037ULL;
    for (char c : name) {
        h ^= static_cast<std::uint64_t>(static_cast<unsigned char>(c));
        h *= 1099511628211ULL;
    }
    return h;
}

// One RNG stream per run, split into named substreams so that reordering
// consumers of one substream cannot perturb another.
class RunRng {
public:
    explicit RunRng(std::uint64_t seed) : seed_(seed) {}

    std::mt19937_64 stream(std::string_view name) const {
        std::seed_seq seq{seed_, hash_name(name)};
        return std::mt19937_64(seq);
    }

    std::uint64_t seed() const { return seed_; }

private:
    std::uint64_t seed_;
};

}  // namespace berth
