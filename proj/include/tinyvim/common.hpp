#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace tinyvim {

enum class ScalarKind : uint8_t { F32 = 0, F64 = 1 };

template <typename T>
constexpr ScalarKind scalar_kind_of() {
    static_assert(std::is_same_v<T, float> || std::is_same_v<T, double>,
                  "tensors hold 32-bit or 64-bit reals");
    if constexpr (std::is_same_v<T, float>) return ScalarKind::F32;
    return ScalarKind::F64;
}

// Number of threads for op-internal parallelism. Reads TINYVIM_THREADS once;
// falls back to the OpenMP default. Always >= 1.
int max_threads();

// NaN/Inf detection after each op. Defaults on in debug builds, off otherwise;
// TINYVIM_CHECK_FINITE=0/1 overrides at startup.
bool finite_checks_enabled();
void set_finite_checks(bool on);

// Deterministic RNG. Box-Muller normals and explicit 53-bit uniforms so the
// same seed reproduces bit-identical streams on any platform.
class Rng {
public:
    explicit Rng(uint64_t seed);

    uint64_t next_u64();
    double uniform();  // [0, 1)
    double uniform(double lo, double hi);
    double normal();   // standard normal
    uint64_t below(uint64_t n);

private:
    uint64_t state_[4];
};

// Independent stream for a named purpose (init, data order, ...).
uint64_t derive_seed(uint64_t seed, const std::string& purpose);

}  // namespace tinyvim
