#pragma once

#include <bit>
#include <cstdint>
#include <string>
#include <vector>

#include "ftsim/common.hpp"

namespace ftsim::fault {

// Injection site inside a guidance solve. GradientIterate carries the
// iteration index the flip lands in front of; ControllerParam carries the
// event time for closed-loop runs.
enum class Site {
    InitData,
    GradientIterate,
    ValidationWorkset,
    ControllerParam,
};

inline const char* to_string(Site s) {
    switch (s) {
        case Site::InitData: return "INIT_DATA";
        case Site::GradientIterate: return "GRADIENT_ITERATE";
        case Site::ValidationWorkset: return "VALIDATION_WORKSET";
        case Site::ControllerParam: return "CONTROLLER_PARAM";
    }
    return "UNKNOWN";
}

// Bit 63 is the sign, 62..52 the exponent, 51..0 the fraction.
enum class BitClass { Sign, Exponent, Fraction };

inline BitClass classify_bit(int bit_index) {
    if (bit_index == 63) return BitClass::Sign;
    if (bit_index >= 52) return BitClass::Exponent;
    return BitClass::Fraction;
}

inline const char* to_string(BitClass c) {
    switch (c) {
        case BitClass::Sign: return "sign";
        case BitClass::Exponent: return "exponent";
        case BitClass::Fraction: return "fraction";
    }
    return "unknown";
}

// One single-event upset: a single bit toggled in one binary64 scalar.
struct FaultSpec {
    int replica_id = 0;
    Site site = Site::GradientIterate;
    std::uint64_t iteration = 0;   // GradientIterate only
    double step_time = 0.0;        // ControllerParam only
    std::size_t scalar_index = 0;
    int bit_index = 0;
    std::uint64_t seed = 0;
};

// Toggles exactly one bit of the IEEE-754 binary64 representation. The
// result may be non-finite; that is part of the studied behavior.
inline double flip_bit(double value, int bit_index) {
    if (bit_index < 0 || bit_index > 63) {
        throw ConfigError("flip_bit: bit_index must be in [0, 63], got " +
                          std::to_string(bit_index));
    }
    std::uint64_t bits = std::bit_cast<std::uint64_t>(value);
    bits ^= (1ull << bit_index);
    return std::bit_cast<double>(bits);
}

struct InjectionRecord {
    std::size_t scalar_index = 0;
    int bit_index = 0;
    double pre_value = 0.0;
    double post_value = 0.0;
};

// Returns a copy of `data` with one scalar bit-flipped; the input is left
// untouched.
inline std::pair<std::vector<double>, InjectionRecord>
inject(const std::vector<double>& data, const FaultSpec& spec) {
    if (spec.scalar_index >= data.size()) {
        throw ConfigError("inject: scalar_index " + std::to_string(spec.scalar_index) +
                          " out of bounds for vector of size " + std::to_string(data.size()));
    }
    std::vector<double> out = data;
    InjectionRecord rec;
    rec.scalar_index = spec.scalar_index;
    rec.bit_index = spec.bit_index;
    rec.pre_value = out[spec.scalar_index];
    out[spec.scalar_index] = flip_bit(rec.pre_value, spec.bit_index);
    rec.post_value = out[spec.scalar_index];
    return {std::move(out), rec};
}

// In-place variant for hot paths; same bounds discipline.
inline InjectionRecord inject_in_place(std::vector<double>& data, const FaultSpec& spec) {
    if (spec.scalar_index >= data.size()) {
        throw ConfigError("inject: scalar_index " + std::to_string(spec.scalar_index) +
                          " out of bounds for vector of size " + std::to_string(data.size()));
    }
    InjectionRecord rec;
    rec.scalar_index = spec.scalar_index;
    rec.bit_index = spec.bit_index;
    rec.pre_value = data[spec.scalar_index];
    data[spec.scalar_index] = flip_bit(rec.pre_value, spec.bit_index);
    rec.post_value = data[spec.scalar_index];
    return rec;
}

}  // namespace ftsim::fault
