#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

namespace preferthinker {

// Deterministic PRNG with portable sampling helpers. std::mt19937_64 is
// bit-exact across platforms, but the std distributions are not, so every
// draw here goes through our own reductions.
class Rng {
public:
    explicit Rng(uint64_t seed) : state_(seed == 0 ? 0x9e3779b97f4a7c15ull : seed) {
        // splitmix warmup decorrelates nearby seeds
        for (int i = 0; i < 4; ++i) next_u64();
    }

    uint64_t next_u64() {
        state_ += 0x9e3779b97f4a7c15ull;
        uint64_t z = state_;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    // uniform integer in [0, bound), rejection sampled
    uint64_t uniform(uint64_t bound) {
        if (bound == 0) throw std::invalid_argument("Rng::uniform: bound must be positive");
        uint64_t threshold = (0ull - bound) % bound;
        for (;;) {
            uint64_t r = next_u64();
            if (r >= threshold) return r % bound;
        }
    }

    int uniform_int(int lo, int hi) {  // inclusive range
        if (hi < lo) throw std::invalid_argument("Rng::uniform_int: empty range");
        return lo + static_cast<int>(uniform(static_cast<uint64_t>(hi - lo) + 1));
    }

    // uniform real in [0, 1)
    double uniform_real() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    bool bernoulli(double p) { return uniform_real() < p; }

    double normal() {
        // Marsaglia polar, deterministic draw order
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u, v, s;
        do {
            u = 2.0 * uniform_real() - 1.0;
            v = 2.0 * uniform_real() - 1.0;
            s = u * u + v * v;
        } while (s >= 1.0 || s == 0.0);
        double m = std::sqrt(-2.0 * std::log(s) / s);
        spare_ = v * m;
        have_spare_ = true;
        return u * m;
    }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (size_t i = v.size(); i > 1; --i) {
            size_t j = uniform(i);
            std::swap(v[i - 1], v[j]);
        }
    }

    // derived stream for an independent sub-task
    Rng fork(uint64_t stream) {
        uint64_t s = next_u64();
        return Rng(s ^ (stream * 0xd1342543de82ef95ull + 0x2545f4914f6cdd1dull));
    }

private:
    uint64_t state_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace preferthinker
