#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "vgm2p/tensor.hpp"

namespace vgm2p {

// Deterministic random stream. Uniform and normal draws are generated
// in-house (bit shift + Box-Muller) so a seed pins the exact sequence
// regardless of standard-library internals.
class Rng {
public:
    explicit Rng(std::uint64_t seed);

    std::uint64_t seed() const { return seed_; }

    double uniform();              // [0, 1)
    double uniform_open();         // (0, 1]
    double normal();               // N(0, 1)
    std::uint64_t integer(std::uint64_t n);  // [0, n)

    Tensor normal_tensor(std::vector<std::size_t> shape);
    Tensor uniform_tensor(std::vector<std::size_t> shape, double lo, double hi);

    // Independent stream derived from (seed, stream_id); forking does not
    // advance this generator.
    Rng fork(std::uint64_t stream_id) const;

private:
    std::uint64_t seed_;
    std::mt19937_64 gen_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

std::uint64_t splitmix64(std::uint64_t x);

}  // namespace vgm2p
