#pragma once

#include <cstdint>
#include <string_view>

namespace odm {

// Splittable counter-based generator. Every draw is a pure function of
// (seed, stream path, counter): the stream key is derived by hashing the
// path into the seed (FNV-1a), and draw i applies the splitmix64 finalizer
// to key + i * golden-ratio increment. Weight init uses one stream per
// layer path, so layouts can change without disturbing other layers' draws.
class CounterRng {
public:
    CounterRng(std::uint64_t seed, std::string_view path) : key_(mix_key(seed, path)) {}

    std::uint64_t bits(std::uint64_t counter) const {
        std::uint64_t z = key_ + (counter + 1) * 0x9E3779B97F4A7C15ULL;
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    // Uniform in [0, 1), 53-bit resolution.
    double uniform01(std::uint64_t counter) const {
        return static_cast<double>(bits(counter) >> 11) * 0x1.0p-53;
    }

    double uniform(std::uint64_t counter, double lo, double hi) const {
        return lo + (hi - lo) * uniform01(counter);
    }

    std::uint64_t stream_key() const { return key_; }

    static std::uint64_t mix_key(std::uint64_t seed, std::string_view path) {
        std::uint64_t h = 0xCBF29CE484222325ULL ^ seed;
        for (char ch : path) {
            h ^= static_cast<unsigned char>(ch);
            h *= 0x100000001B3ULL;
        }
        return h;
    }

private:
    std::uint64_t key_;
};

}  // namespace odm
