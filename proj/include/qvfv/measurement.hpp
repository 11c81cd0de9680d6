#pragma once

// Measurement catalogs and the synthetic data pipeline:
//
//   programmed state -> idle relaxation (apply_delay)
//                    -> depolarizing shrink (apply_channel_noise)
//                    -> basis-change over-rotation (corrupt_basis_rotation)
//                    -> readout confusion -> Binomial(shots, p)

#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "qvfv/bloch.hpp"
#include "qvfv/errors.hpp"
#include "qvfv/random.hpp"

namespace qvfv {

struct PvmBasis {
    std::string id;
    MeasurementAngles angles;
    BlochVector axis;

    PvmBasis() = default;
    PvmBasis(std::string id_, MeasurementAngles angles_)
        : id(std::move(id_)), angles(angles_), axis(measurement_axis(angles_)) {}

    bool operator==(const PvmBasis&) const = default;
};

struct PvmCatalog {
    std::string name;
    std::vector<PvmBasis> bases;

    const PvmBasis* find(const std::string& id) const {
        for (const auto& b : bases) {
            if (b.id == id) return &b;
        }
        return nullptr;
    }

    std::vector<BlochVector> axes() const {
        std::vector<BlochVector> out;
        out.reserve(bases.size());
        for (const auto& b : bases) out.push_back(b.axis);
        return out;
    }

    bool operator==(const PvmCatalog&) const = default;
};

// Polar angle of the three lower tetrahedron vertices, acos(-1/3).
inline const double kTetrahedralAlpha = std::acos(-1.0 / 3.0);

inline PvmCatalog tetrahedral_catalog() {
    constexpr double third_turn = 2.0 * std::numbers::pi / 3.0;
    return {"tetrahedral",
            {PvmBasis{"T0", {0.0, 0.0}},
             PvmBasis{"T1", {kTetrahedralAlpha, 0.0}},
             PvmBasis{"T2", {kTetrahedralAlpha, third_turn}},
             PvmBasis{"T3", {kTetrahedralAlpha, -third_turn}}}};
}

// Canonical z, x, y axes.
inline PvmCatalog pauli_catalog() {
    constexpr double quarter = std::numbers::pi / 2.0;
    return {"pauli", {PvmBasis{"Z", {0.0, 0.0}}, PvmBasis{"X", {quarter, 0.0}}, PvmBasis{"Y", {quarter, quarter}}}};
}

inline PvmCatalog catalog_by_name(const std::string& name) {
    if (name == "tetrahedral") return tetrahedral_catalog();
    if (name == "pauli") return pauli_catalog();
    throw InvalidArgument("unknown catalog '" + name + "' (expected tetrahedral or pauli)");
}

// Noise parameters. Times are in hardware dt units; readout_flip_10 is the
// probability that a true +u outcome (bit 0) is read as 1, readout_flip_01
// the reverse.
struct NoiseSpec {
    double readout_flip_01 = 0.0;
    double readout_flip_10 = 0.0;
    double depolarizing_p = 0.0;
    double t1 = 0.0;
    double t2 = 0.0;
    double rot_error_scale = 0.0;

    void validate() const {
        auto prob = [](double v, const char* name) {
            if (!(v >= 0.0 && v <= 1.0)) throw InvalidArgument(std::string(name) + " must lie in [0, 1]");
        };
        prob(readout_flip_01, "readout_flip_01");
        prob(readout_flip_10, "readout_flip_10");
        prob(depolarizing_p, "depolarizing_p");
        if (t1 < 0.0 || t2 < 0.0) throw InvalidArgument("t1 and t2 must be nonnegative");
        if (t1 > 0.0 && t2 > 2.0 * t1) throw InvalidArgument("t2 must not exceed 2 * t1");
        if (!std::isfinite(rot_error_scale)) throw InvalidArgument("rot_error_scale must be finite");
    }

    bool operator==(const NoiseSpec&) const = default;
};

struct MeasurementRecord {
    std::optional<StateAngles> state;
    std::string state_id;
    std::string basis_id;
    std::int64_t shots = 0;
    std::int64_t count = 0;
    std::optional<std::uint64_t> seed;

    double empirical_probability() const { return static_cast<double>(count) / static_cast<double>(shots); }

    bool operator==(const MeasurementRecord&) const = default;
};

// Idle-time amplitude damping toward |0> with dephasing:
// (x, y) decay as exp(-t/t2), z relaxes to +1 as exp(-t/t1).
inline BlochVector apply_delay(const BlochVector& a, double t, const NoiseSpec& spec) {
    if (t < 0.0) throw InvalidArgument("delay time must be nonnegative");
    if (t == 0.0) return a;
    if (!(spec.t1 > 0.0 && spec.t2 > 0.0)) throw InvalidArgument("t1 and t2 must be positive when a delay is applied");
    if (spec.t2 > 2.0 * spec.t1) throw InvalidArgument("t2 must not exceed 2 * t1");
    const double transverse = std::exp(-t / spec.t2);
    const double longitudinal = std::exp(-t / spec.t1);
    return {a.x * transverse, a.y * transverse, 1.0 + (a.z - 1.0) * longitudinal};
}

inline BlochVector apply_channel_noise(const BlochVector& a, const NoiseSpec& spec) {
    return a * (1.0 - spec.depolarizing_p);
}

// Systematic over-rotation of the basis change: the circuit applies
// R_y(-(1 + s) alpha) R_z(-beta) instead of R_y(-alpha) R_z(-beta), so the
// measured axis is tilted by s * alpha along its own meridian.
inline BlochVector corrupt_basis_rotation(const PvmBasis& basis, const NoiseSpec& spec) {
    if (spec.rot_error_scale == 0.0) return basis.axis;
    const BlochVector u = spherical_unit(basis.angles.alpha * (1.0 + spec.rot_error_scale), basis.angles.beta);
    return u / norm(u);
}

inline double apply_readout_error(double p, const NoiseSpec& spec) {
    return p * (1.0 - spec.readout_flip_10) + (1.0 - p) * spec.readout_flip_01;
}

// Probability of recording the +u outcome for a state that has already gone
// through its idle period.
inline double outcome_probability(const BlochVector& a_prepared, const PvmBasis& basis, const NoiseSpec& spec) {
    const BlochVector a = apply_channel_noise(a_prepared, spec);
    const BlochVector u = corrupt_basis_rotation(basis, spec);
    return std::clamp(apply_readout_error(born_probability(a, u), spec), 0.0, 1.0);
}

// One simulated circuit execution batch. The returned record has no
// programmed state attached; callers fill `state` when they know it.
inline MeasurementRecord sample_record(const BlochVector& a_prepared, const PvmBasis& basis, std::int64_t shots,
                                       const NoiseSpec& spec, std::uint64_t seed) {
    if (shots < 1) throw InvalidArgument("shots must be at least 1");
    const double p = outcome_probability(a_prepared, basis, spec);
    Xoshiro256StarStar rng(seed);
    MeasurementRecord rec;
    rec.basis_id = basis.id;
    rec.shots = shots;
    rec.count = sample_binomial(rng, shots, p);
    rec.seed = seed;
    return rec;
}

} // namespace qvfv
