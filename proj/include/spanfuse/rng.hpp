#pragma once

#include <cmath>
#include <cstdint>
#include <utility>
#include <vector>

namespace spanfuse {

/// Deterministic generator (splitmix64 core). The <random> distributions are
/// implementation-defined, so everything that must replay byte-identically
/// from a seed goes through this instead.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() {
        std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    /// Uniform in [0, 1).
    double next_unit() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    std::uint64_t next_below(std::uint64_t bound) { return bound == 0 ? 0 : next_u64() % bound; }

    /// Standard normal (Box-Muller, pair cached).
    double next_normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = 0.0;
        do {
            u1 = next_unit();
        } while (u1 <= 0.0);
        const double u2 = next_unit();
        const double radius = std::sqrt(-2.0 * std::log(u1));
        const double angle = 2.0 * 3.14159265358979323846 * u2;
        spare_ = radius * std::sin(angle);
        have_spare_ = true;
        return radius * std::cos(angle);
    }

    template <typename T>
    void shuffle(std::vector<T>& values) {
        for (std::size_t i = values.size(); i > 1; --i) {
            std::swap(values[i - 1], values[next_below(i)]);
        }
    }

private:
    std::uint64_t state_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

/// Stable derivation of a stream seed from a base seed and a stream id.
inline std::uint64_t mix_seed(std::uint64_t base, std::uint64_t stream) {
    Rng r(base ^ (0xD1B54A32D192ED03ULL * (stream + 1)));
    return r.next_u64();
}

}  // namespace spanfuse
