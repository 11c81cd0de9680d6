#pragma once

// Whole-sphere tomography experiments: a lattice of programmed states, one
// record per catalog basis for each, reconstruction and per-state metrics.

#include <bit>
#include <cmath>
#include <cstdint>
#include <map>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "qvfv/bloch.hpp"
#include "qvfv/errors.hpp"
#include "qvfv/measurement.hpp"
#include "qvfv/parallel.hpp"
#include "qvfv/random.hpp"
#include "qvfv/reconstruction.hpp"
#include "qvfv/statistics.hpp"

namespace qvfv {

// Fibonacci lattice: z_i = 1 - (2i + 1)/n, phi_i = 2 pi i (1 - 1/golden).
inline std::vector<StateAngles> fibonacci_sphere(int n) {
    if (n < 1) throw InvalidArgument("lattice size must be at least 1");
    const double turn = 2.0 * std::numbers::pi * (1.0 - 1.0 / std::numbers::phi);
    std::vector<StateAngles> out;
    out.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        const double z = 1.0 - (2.0 * i + 1.0) / n;
        const double phi = std::fmod(turn * i, 2.0 * std::numbers::pi);
        out.push_back({std::acos(z), wrap_longitude(phi)});
    }
    return out;
}

struct ScanConfig {
    int n_states = 200;
    std::int64_t shots = 20000;
    std::string catalog = "tetrahedral";
    NoiseSpec noise;
    double delay_t = 0.0;
    std::vector<Estimator> estimators{Estimator::MLE};
    std::uint64_t master_seed = 0;

    bool wants(Estimator e) const {
        for (auto x : estimators) if (x == e) return true;
        return false;
    }

    void validate() const {
        if (n_states < 1) throw InvalidArgument("n_states must be at least 1");
        if (shots < 1) throw InvalidArgument("shots must be at least 1");
        if (estimators.empty()) throw InvalidArgument("at least one estimator is required");
        if (delay_t < 0.0) throw InvalidArgument("delay must be nonnegative");
        noise.validate();
        if (delay_t > 0.0 && !(noise.t1 > 0.0 && noise.t2 > 0.0)) {
            throw InvalidArgument("a delay requires positive t1 and t2");
        }
        catalog_by_name(catalog);
    }

    bool operator==(const ScanConfig&) const = default;
};

struct ScanRow {
    // Absent for records ingested without a programmed state.
    std::optional<StateAngles> state;
    std::optional<BlochVector> a_in;
    std::string state_id;
    std::vector<MeasurementRecord> records;
    std::optional<ReconstructionResult> result_mle;
    std::optional<ReconstructionResult> result_lr;
    double purity = 0.0;
    std::optional<double> fidelity;
    std::optional<double> distance;
    // Nonempty marks a failed row, excluded from the summary.
    std::string error;

    bool failed() const { return !error.empty(); }

    // MLE when present, otherwise LR.
    const ReconstructionResult* primary() const {
        if (result_mle) return &*result_mle;
        if (result_lr) return &*result_lr;
        return nullptr;
    }

    bool operator==(const ScanRow&) const = default;
};

struct ScanSummary {
    double mean_purity = 0.0;
    double std_purity = 0.0;
    std::optional<double> mean_fidelity;
    std::optional<double> p99_distance;
    int rows_used = 0;
    int rows_failed = 0;

    bool operator==(const ScanSummary&) const = default;
};

struct ScanResult {
    ScanConfig config;
    std::vector<ScanRow> rows;
    ScanSummary summary;

    bool operator==(const ScanResult&) const = default;
};

inline ScanSummary summarize(const std::vector<ScanRow>& rows) {
    ScanSummary s;
    std::vector<double> purities, fidelities, distances;
    for (const auto& r : rows) {
        if (r.failed()) {
            ++s.rows_failed;
            continue;
        }
        ++s.rows_used;
        purities.push_back(r.purity);
        if (r.fidelity) fidelities.push_back(*r.fidelity);
        if (r.distance) distances.push_back(*r.distance);
    }
    s.mean_purity = mean(purities);
    s.std_purity = stddev(purities);
    if (!fidelities.empty()) s.mean_fidelity = mean(fidelities);
    if (!distances.empty()) s.p99_distance = order_statistic(distances, 0.99);
    return s;
}

// Reconstructs one row from its records and fills the metrics. Solver
// errors are caught and recorded on the row.
inline void reconstruct_row(ScanRow& row, const PvmCatalog& catalog, const std::vector<Estimator>& estimators,
                            const SolverOptions& opt = {}) {
    try {
        const ReconstructionInput in = ReconstructionInput::from_records(row.records, catalog);
        for (Estimator e : estimators) {
            (e == Estimator::MLE ? row.result_mle : row.result_lr) = reconstruct(e, in, opt);
        }
        const ReconstructionResult* p = row.primary();
        row.purity = purity(p->estimate);
        if (row.a_in) {
            row.fidelity = fidelity(*row.a_in, p->estimate);
            row.distance = qvfv::distance(p->estimate, *row.a_in);
        }
    } catch (const Error& e) {
        row.error = e.kind() + ": " + e.what();
    }
}

// Seed of the record for (state, basis, trial) under a master seed.
inline std::uint64_t record_seed(std::uint64_t master, std::uint64_t state, std::uint64_t basis, std::uint64_t trial) {
    return derive_seed({master, state, basis, trial});
}

// Simulates the records of one programmed state: idle delay, then the gate
// and readout channels inside sample_record.
inline std::vector<MeasurementRecord> simulate_records(const StateAngles& state, std::uint64_t state_index,
                                                       std::uint64_t trial, const PvmCatalog& catalog,
                                                       std::int64_t shots, const NoiseSpec& noise, double delay_t,
                                                       std::uint64_t master_seed) {
    const BlochVector prepared = apply_delay(to_bloch(state), delay_t, noise);
    std::vector<MeasurementRecord> records;
    records.reserve(catalog.bases.size());
    for (std::size_t k = 0; k < catalog.bases.size(); ++k) {
        MeasurementRecord r = sample_record(prepared, catalog.bases[k], shots, noise,
                                            record_seed(master_seed, state_index, k, trial));
        r.state = state;
        records.push_back(std::move(r));
    }
    return records;
}

inline ScanResult run_scan(const ScanConfig& config, unsigned threads = 1) {
    config.validate();
    const PvmCatalog catalog = catalog_by_name(config.catalog);
    const auto states = fibonacci_sphere(config.n_states);

    ScanResult result;
    result.config = config;
    result.rows.resize(states.size());
    parallel_for(states.size(), threads, [&](std::size_t i) {
        ScanRow& row = result.rows[i];
        row.state = states[i];
        row.a_in = to_bloch(states[i]);
        row.records = simulate_records(states[i], i, 0, catalog, config.shots, config.noise, config.delay_t,
                                       config.master_seed);
        reconstruct_row(row, catalog, config.estimators);
    });
    result.summary = summarize(result.rows);
    return result;
}

struct FlaggedRow {
    std::size_t index = 0;
    double difference = 0.0;

    bool operator==(const FlaggedRow&) const = default;
};

// |(|a_LR| - |a_MLE|)| for a row carrying both estimates.
inline double norm_discrepancy(const ScanRow& row) {
    if (!row.result_mle || !row.result_lr) throw MissingEstimator("row lacks an MLE or LR reconstruction");
    return std::abs(norm(row.result_lr->estimate) - norm(row.result_mle->estimate));
}

// Rows whose MLE and LR norms differ by more than `threshold`. Failed rows
// are skipped; a successful row lacking either estimate is an error.
inline std::vector<FlaggedRow> compare_estimators(const ScanResult& scan, double threshold = 0.02) {
    std::vector<FlaggedRow> flagged;
    for (std::size_t i = 0; i < scan.rows.size(); ++i) {
        const ScanRow& row = scan.rows[i];
        if (row.failed()) continue;
        const double d = norm_discrepancy(row);
        if (d > threshold) flagged.push_back({i, d});
    }
    return flagged;
}

inline double flagged_fraction(const ScanResult& scan, const std::vector<FlaggedRow>& flagged) {
    const int used = scan.summary.rows_used;
    return used == 0 ? 0.0 : static_cast<double>(flagged.size()) / used;
}

// Groups ingested records into rows: by state_id when set, else by the
// programmed angles. Group order follows first appearance.
inline std::vector<ScanRow> group_records(const std::vector<MeasurementRecord>& records) {
    std::vector<ScanRow> rows;
    std::map<std::string, std::size_t> index;
    for (const auto& r : records) {
        std::string key;
        if (!r.state_id.empty()) {
            key = "id:" + r.state_id;
        } else if (r.state) {
            // Exact bit patterns; records of one state share identical angles.
            key = "angles:" + std::to_string(std::bit_cast<std::uint64_t>(r.state->theta)) + ":" +
                  std::to_string(std::bit_cast<std::uint64_t>(r.state->phi));
        } else {
            throw InvalidArgument("record has neither state_id nor state angles");
        }
        auto [it, inserted] = index.try_emplace(key, rows.size());
        if (inserted) {
            ScanRow row;
            row.state = r.state;
            row.state_id = r.state_id;
            if (r.state) row.a_in = to_bloch(*r.state);
            rows.push_back(std::move(row));
        }
        rows[it->second].records.push_back(r);
    }
    return rows;
}

} // namespace qvfv
