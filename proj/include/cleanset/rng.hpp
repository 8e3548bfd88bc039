#pragma once

#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace cleanset {

// Derives an independent stream seed from a root seed and a stream name.
// All randomness in a run flows from one root seed through named streams,
// so ablations can change one stream without perturbing the others.
std::uint64_t derive_stream(std::uint64_t root_seed, std::string_view stream_name);

// Deterministic RNG wrapper. Distributions are hand-rolled on top of
// mt19937_64 so sequences are identical across standard libraries.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    std::uint64_t next_u64() { return gen_(); }

    // Uniform in [0, 1).
    double uniform();

    // Uniform integer in [0, n).
    std::size_t uniform_int(std::size_t n);

    // Standard normal via Box-Muller (one spare cached).
    double gaussian();

    // Gamma(shape, 1) via Marsaglia-Tsang.
    double gamma(double shape);

    // Beta(a, b) from two gammas.
    double beta(double a, double b);

    // Fisher-Yates with this stream.
    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = uniform_int(i);
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    std::mt19937_64 gen_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace cleanset
