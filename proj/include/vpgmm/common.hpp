#pragma once

#include <stdexcept>
#include <string>

namespace vpgmm {

/// Rejected input or configuration (CLI exit code 2).
class ValidationError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Numerical degeneracy: underflowed densities, singular covariances,
/// jitter escalation past its cap (CLI exit code 3).
class DegeneracyError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Multi-party session failure: desync, dropout, length mismatch,
/// secure-sum overflow (CLI exit code 3).
class ProtocolError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// File-system failure (CLI exit code 4).
class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Problem sizes. Farms and periods index the joint variable grid;
/// the flattened dimension is D = M*T.
struct Dims {
    int num_farms = 0;   // M
    int num_periods = 0; // T
    int num_obs = 0;     // I
    int num_components = 0; // J

    int dim() const { return num_farms * num_periods; }

    void validate() const {
        if (num_farms < 1 || num_periods < 1 || num_components < 1)
            throw ValidationError("Dims: all counts must be >= 1");
        if (num_obs < 2)
            throw ValidationError("Dims: need at least 2 observations");
    }
};

/// Maps the pair (farm m, period t), both 1-based, onto the flat
/// 0-based coordinate (m-1)*T + (t-1). Farm-major so that each farm
/// owns a contiguous block of coordinates.
struct FlatIndex {
    int farm = 0;   // 1..M
    int period = 0; // 1..T
    int flat = 0;   // 0..M*T-1

    static FlatIndex of(int farm, int period, int num_periods) {
        return FlatIndex{farm, period, (farm - 1) * num_periods + (period - 1)};
    }

    static FlatIndex from_flat(int flat, int num_periods) {
        return FlatIndex{flat / num_periods + 1, flat % num_periods + 1, flat};
    }
};

inline int flat_index(int farm, int period, int num_periods) {
    return (farm - 1) * num_periods + (period - 1);
}

} // namespace vpgmm
