#pragma once

#include <cstdint>
#include <random>
#include <sstream>
#include <string>

#include "davsn/errors.h"

namespace davsn {

// mt19937_64 with hand-rolled distributions. std::*_distribution output is
// implementation-defined and normal_distribution caches state, which breaks
// the checkpoint-resume bit-exactness contract; these draws are portable and
// the full RNG state round-trips through text.
class Rng {
public:
    explicit Rng(uint64_t seed = 0) : eng_(seed) {}

    uint64_t raw() { return eng_(); }

    // [0, 1)
    double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // [0, n)
    int64_t uniform_int(int64_t n) {
        if (n <= 0) throw NumericError("uniform_int needs n > 0");
        return static_cast<int64_t>(eng_() % static_cast<uint64_t>(n));
    }

    // Box-Muller without the cached spare draw.
    double normal() {
        double u1 = uniform();
        if (u1 < 1e-300) u1 = 1e-300;
        double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586477 * u2);
    }

    double normal(double mean, double stddev) { return mean + stddev * normal(); }

    std::string serialize() const {
        std::ostringstream os;
        os << eng_;
        return os.str();
    }

    void deserialize(const std::string& s) {
        std::istringstream is(s);
        is >> eng_;
        if (is.fail()) throw DataError("corrupt RNG state");
    }

    bool operator==(const Rng& o) const { return eng_ == o.eng_; }

private:
    std::mt19937_64 eng_;
};

} // namespace davsn
