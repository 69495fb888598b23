#pragma once

#include <cstdint>
#include <cmath>
#include <stdexcept>
#include <string>

namespace bikc {

// Violated preconditions and malformed inputs. CLI maps these to exit 1.
struct ContractError : std::runtime_error {
    explicit ContractError(const std::string& msg) : std::runtime_error(msg) {}
};

// Bad wiring: missing files, shape mismatches, unknown tasks. Exit 1.
struct ConfigError : ContractError {
    explicit ConfigError(const std::string& msg) : ContractError(msg) {}
};

// Non-finite values where finite ones are required. CLI maps to exit 2.
struct NumericalError : std::runtime_error {
    explicit NumericalError(const std::string& msg) : std::runtime_error(msg) {}
};

// Counter-based RNG (splitmix64). Bit-identical streams across platforms,
// which keeps seeded runs reproducible run-to-run.
class Rng {
public:
    explicit Rng(uint64_t seed) : state_(seed) {}

    uint64_t next_u64() {
        uint64_t z = (state_ += 0x9E3779B97F4A7C15ull);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        return z ^ (z >> 31);
    }

    // uniform in [0, 1)
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // uniform integer in [lo, hi] inclusive
    long uniform_int(long lo, long hi) {
        return lo + static_cast<long>(next_u64() % static_cast<uint64_t>(hi - lo + 1));
    }

    // standard normal via Box-Muller (cached spare)
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = 1.0 - uniform();  // (0, 1]
        double u2 = uniform();
        double r = std::sqrt(-2.0 * std::log(u1));
        double theta = 2.0 * M_PI * u2;
        spare_ = r * std::sin(theta);
        has_spare_ = true;
        return r * std::cos(theta);
    }

    // Independent stream for a named sub-task of a seed.
    static uint64_t derive(uint64_t seed, uint64_t stream) {
        Rng r(seed ^ (0xD1B54A32D192ED03ull * (stream + 1)));
        return r.next_u64();
    }

private:
    uint64_t state_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace bikc
