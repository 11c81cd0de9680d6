#pragma once

// JSON forms of every artifact. Top-level documents carry a schema_version
// string; parsing rejects unknown versions and malformed fields with
// SchemaError. Doubles are written in shortest round-trip form, so
// parse(emit(x)) == x holds exactly.

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"

#include "qvfv/errors.hpp"
#include "qvfv/measurement.hpp"
#include "qvfv/reconstruction.hpp"
#include "qvfv/render.hpp"
#include "qvfv/scan.hpp"
#include "qvfv/study.hpp"

namespace qvfv {

using json = nlohmann::json;

inline constexpr const char* kRecordsSchema = "qvfv-records/1";
inline constexpr const char* kScanSchema = "qvfv-scan/1";
inline constexpr const char* kStudySchema = "qvfv-study/1";
inline constexpr const char* kCompareSchema = "qvfv-compare/1";

namespace io {

// Field access that reports schema problems with the offending key.
template <class T>
T get(const json& j, const char* key) {
    if (!j.is_object()) throw SchemaError(std::string("expected an object holding '") + key + "'");
    const auto it = j.find(key);
    if (it == j.end()) throw SchemaError(std::string("missing field '") + key + "'");
    try {
        return it->template get<T>();
    } catch (const nlohmann::json::exception& e) {
        throw SchemaError(std::string("field '") + key + "': " + e.what());
    }
}

template <class T>
T get_or(const json& j, const char* key, T fallback) {
    return j.is_object() && j.contains(key) ? get<T>(j, key) : fallback;
}

template <class T>
std::optional<T> get_opt(const json& j, const char* key) {
    if (!j.is_object() || !j.contains(key) || j.at(key).is_null()) return std::nullopt;
    return get<T>(j, key);
}

inline void only_keys(const json& j, std::initializer_list<const char*> keys, const std::string& what) {
    if (!j.is_object()) throw SchemaError(what + " must be an object");
    const std::set<std::string> allowed(keys.begin(), keys.end());
    for (const auto& [k, _] : j.items()) {
        if (!allowed.count(k)) throw SchemaError("unknown " + what + " field '" + k + "'");
    }
}

inline void require_schema(const json& j, const char* expected) {
    const auto v = get<std::string>(j, "schema_version");
    if (v != expected) {
        throw SchemaError("unrecognized schema_version '" + v + "' (expected '" + expected + "')");
    }
}

inline json parse_text(const std::string& text) {
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        throw SchemaError(std::string("invalid JSON: ") + e.what());
    }
}

} // namespace io

inline void to_json(json& j, const BlochVector& a) { j = json::array({a.x, a.y, a.z}); }
inline void from_json(const json& j, BlochVector& a) {
    if (!j.is_array() || j.size() != 3) throw SchemaError("Bloch vector must be an array of three numbers");
    a = {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

inline void to_json(json& j, const StateAngles& s) { j = {{"theta", s.theta}, {"phi", s.phi}}; }
inline void from_json(const json& j, StateAngles& s) {
    s = {io::get<double>(j, "theta"), io::get<double>(j, "phi")};
}

inline void to_json(json& j, const PvmBasis& b) {
    j = {{"id", b.id}, {"alpha", b.angles.alpha}, {"beta", b.angles.beta}};
}
inline void from_json(const json& j, PvmBasis& b) {
    b = PvmBasis(io::get<std::string>(j, "id"), {io::get<double>(j, "alpha"), io::get<double>(j, "beta")});
}

inline void to_json(json& j, const PvmCatalog& c) { j = {{"name", c.name}, {"bases", c.bases}}; }
inline void from_json(const json& j, PvmCatalog& c) {
    c.name = io::get<std::string>(j, "name");
    c.bases = io::get<std::vector<PvmBasis>>(j, "bases");
    std::set<std::string> ids;
    for (const auto& b : c.bases) {
        if (!ids.insert(b.id).second) throw SchemaError("duplicate basis id '" + b.id + "' in catalog");
    }
    if (c.bases.empty()) throw SchemaError("catalog has no bases");
}

inline void to_json(json& j, const NoiseSpec& n) {
    j = {{"readout_flip_01", n.readout_flip_01}, {"readout_flip_10", n.readout_flip_10},
         {"depolarizing_p", n.depolarizing_p},   {"t1", n.t1},
         {"t2", n.t2},                           {"rot_error_scale", n.rot_error_scale}};
}
// Missing fields keep their zero defaults; unknown fields are rejected.
inline void from_json(const json& j, NoiseSpec& n) {
    io::only_keys(j, {"readout_flip_01", "readout_flip_10", "depolarizing_p", "t1", "t2", "rot_error_scale"}, "noise");
    NoiseSpec d;
    n.readout_flip_01 = io::get_or(j, "readout_flip_01", d.readout_flip_01);
    n.readout_flip_10 = io::get_or(j, "readout_flip_10", d.readout_flip_10);
    n.depolarizing_p = io::get_or(j, "depolarizing_p", d.depolarizing_p);
    n.t1 = io::get_or(j, "t1", d.t1);
    n.t2 = io::get_or(j, "t2", d.t2);
    n.rot_error_scale = io::get_or(j, "rot_error_scale", d.rot_error_scale);
}

inline void to_json(json& j, const MeasurementRecord& r) {
    j = json::object();
    if (r.state) j["state"] = *r.state;
    if (!r.state_id.empty()) j["state_id"] = r.state_id;
    j["basis_id"] = r.basis_id;
    j["shots"] = r.shots;
    j["count"] = r.count;
    if (r.seed) j["seed"] = *r.seed;
}
inline void from_json(const json& j, MeasurementRecord& r) {
    r.state = io::get_opt<StateAngles>(j, "state");
    r.state_id = io::get_or<std::string>(j, "state_id", "");
    r.basis_id = io::get<std::string>(j, "basis_id");
    r.shots = io::get<std::int64_t>(j, "shots");
    r.count = io::get<std::int64_t>(j, "count");
    r.seed = io::get_opt<std::uint64_t>(j, "seed");
}

inline void to_json(json& j, const ReconstructionResult& r) {
    j = {{"estimate", r.estimate},
         {"estimator", to_string(r.estimator)},
         {"objective", r.objective},
         {"iterations", r.iterations},
         {"converged", r.converged},
         {"gradient_norm_final", r.gradient_norm_final},
         {"multiplier", r.multiplier}};
}
inline void from_json(const json& j, ReconstructionResult& r) {
    r.estimate = io::get<BlochVector>(j, "estimate");
    try {
        r.estimator = estimator_from_string(io::get<std::string>(j, "estimator"));
    } catch (const InvalidArgument& e) {
        throw SchemaError(e.what());
    }
    r.objective = io::get<double>(j, "objective");
    r.iterations = io::get<int>(j, "iterations");
    r.converged = io::get<bool>(j, "converged");
    r.gradient_norm_final = io::get<double>(j, "gradient_norm_final");
    r.multiplier = io::get<double>(j, "multiplier");
}

namespace io {

inline json estimators_json(const std::vector<Estimator>& es) {
    json a = json::array();
    for (Estimator e : es) a.push_back(to_string(e));
    return a;
}

inline std::vector<Estimator> estimators_from(const json& j, const char* key) {
    std::vector<Estimator> out;
    for (const auto& s : get<std::vector<std::string>>(j, key)) {
        try {
            out.push_back(estimator_from_string(s));
        } catch (const InvalidArgument& e) {
            throw SchemaError(e.what());
        }
    }
    return out;
}

} // namespace io

inline void to_json(json& j, const ScanConfig& c) {
    j = {{"n_states", c.n_states}, {"shots", c.shots},
         {"catalog", c.catalog},   {"noise", c.noise},
         {"delay_t", c.delay_t},   {"estimators", io::estimators_json(c.estimators)},
         {"master_seed", c.master_seed}};
}
inline void from_json(const json& j, ScanConfig& c) {
    c.n_states = io::get<int>(j, "n_states");
    c.shots = io::get<std::int64_t>(j, "shots");
    c.catalog = io::get<std::string>(j, "catalog");
    c.noise = io::get<NoiseSpec>(j, "noise");
    c.delay_t = io::get<double>(j, "delay_t");
    c.estimators = io::estimators_from(j, "estimators");
    c.master_seed = io::get<std::uint64_t>(j, "master_seed");
}

inline void to_json(json& j, const ScanRow& r) {
    j = json::object();
    if (r.state) j["state"] = *r.state;
    if (r.a_in) j["a_in"] = *r.a_in;
    if (!r.state_id.empty()) j["state_id"] = r.state_id;
    j["records"] = r.records;
    if (r.result_mle) j["mle"] = *r.result_mle;
    if (r.result_lr) j["lr"] = *r.result_lr;
    j["purity"] = r.purity;
    if (r.fidelity) j["fidelity"] = *r.fidelity;
    if (r.distance) j["distance"] = *r.distance;
    if (!r.error.empty()) j["error"] = r.error;
}
inline void from_json(const json& j, ScanRow& r) {
    r.state = io::get_opt<StateAngles>(j, "state");
    r.a_in = io::get_opt<BlochVector>(j, "a_in");
    r.state_id = io::get_or<std::string>(j, "state_id", "");
    r.records = io::get<std::vector<MeasurementRecord>>(j, "records");
    r.result_mle = io::get_opt<ReconstructionResult>(j, "mle");
    r.result_lr = io::get_opt<ReconstructionResult>(j, "lr");
    r.purity = io::get<double>(j, "purity");
    r.fidelity = io::get_opt<double>(j, "fidelity");
    r.distance = io::get_opt<double>(j, "distance");
    r.error = io::get_or<std::string>(j, "error", "");
}

inline void to_json(json& j, const ScanSummary& s) {
    j = {{"mean_purity", s.mean_purity}, {"std_purity", s.std_purity}, {"rows_used", s.rows_used},
         {"rows_failed", s.rows_failed}};
    if (s.mean_fidelity) j["mean_fidelity"] = *s.mean_fidelity;
    if (s.p99_distance) j["p99_distance"] = *s.p99_distance;
}
inline void from_json(const json& j, ScanSummary& s) {
    s.mean_purity = io::get<double>(j, "mean_purity");
    s.std_purity = io::get<double>(j, "std_purity");
    s.rows_used = io::get<int>(j, "rows_used");
    s.rows_failed = io::get<int>(j, "rows_failed");
    s.mean_fidelity = io::get_opt<double>(j, "mean_fidelity");
    s.p99_distance = io::get_opt<double>(j, "p99_distance");
}

inline void to_json(json& j, const ScanResult& r) {
    j = {{"schema_version", kScanSchema}, {"config", r.config}, {"rows", r.rows}, {"summary", r.summary}};
}
inline void from_json(const json& j, ScanResult& r) {
    io::require_schema(j, kScanSchema);
    r.config = io::get<ScanConfig>(j, "config");
    const json& rows = j.at("rows");
    if (!rows.is_array()) throw SchemaError("field 'rows' must be an array");
    r.rows.clear();
    for (std::size_t i = 0; i < rows.size(); ++i) {
        try {
            r.rows.push_back(rows[i].get<ScanRow>());
        } catch (const SchemaError& e) {
            throw SchemaError(std::string("row ") + std::to_string(i) + ": " + e.what(), static_cast<long>(i));
        }
    }
    r.summary = io::get<ScanSummary>(j, "summary");
}

inline void to_json(json& j, const StudyConfig& c) {
    j = {{"mode", to_string(c.mode)},
         {"trials", c.trials},
         {"shots", c.shots},
         {"states", c.states},
         {"lattice_size", c.lattice_size},
         {"catalog", c.catalog},
         {"estimators", io::estimators_json(c.estimators)},
         {"percentile", c.percentile},
         {"noise", c.noise},
         {"exact_probabilities", c.exact_probabilities},
         {"master_seed", c.master_seed}};
}
inline void from_json(const json& j, StudyConfig& c) {
    try {
        c.mode = study_mode_from_string(io::get<std::string>(j, "mode"));
    } catch (const InvalidArgument& e) {
        throw SchemaError(e.what());
    }
    c.trials = io::get<int>(j, "trials");
    c.shots = io::get<std::int64_t>(j, "shots");
    c.states = io::get<std::vector<StateAngles>>(j, "states");
    c.lattice_size = io::get<int>(j, "lattice_size");
    c.catalog = io::get<std::string>(j, "catalog");
    c.estimators = io::estimators_from(j, "estimators");
    c.percentile = io::get<double>(j, "percentile");
    c.noise = io::get<NoiseSpec>(j, "noise");
    c.exact_probabilities = io::get<bool>(j, "exact_probabilities");
    c.master_seed = io::get<std::uint64_t>(j, "master_seed");
}

inline void to_json(json& j, const Histogram& h) {
    j = {{"lower", 0.0}, {"upper", Histogram::kUpper}, {"counts", h.counts}, {"overflow", h.overflow}};
}
inline void from_json(const json& j, Histogram& h) {
    h.counts = io::get<std::vector<std::int64_t>>(j, "counts");
    if (h.counts.size() != Histogram::kBins) throw SchemaError("histogram must have 200 bins");
    h.overflow = io::get<std::int64_t>(j, "overflow");
}

inline void to_json(json& j, const StateStudy& s) {
    j = {{"state", s.state}, {"p99", s.percentile_value}, {"excluded", s.excluded}, {"histogram", s.histogram}};
}
inline void from_json(const json& j, StateStudy& s) {
    s.state = io::get<StateAngles>(j, "state");
    s.percentile_value = io::get<double>(j, "p99");
    s.excluded = io::get<std::int64_t>(j, "excluded");
    s.histogram = io::get<Histogram>(j, "histogram");
}

inline void to_json(json& j, const StudySeries& s) {
    j = {{"label", s.label},
         {"global_max_p99", s.global_max},
         {"excluded_trials", s.excluded_trials},
         {"per_state", s.per_state}};
}
inline void from_json(const json& j, StudySeries& s) {
    s.label = io::get<std::string>(j, "label");
    s.global_max = io::get<double>(j, "global_max_p99");
    s.excluded_trials = io::get<std::int64_t>(j, "excluded_trials");
    s.per_state = io::get<std::vector<StateStudy>>(j, "per_state");
}

inline void to_json(json& j, const StudyResult& r) {
    j = {{"schema_version", kStudySchema}, {"config", r.config}, {"series", r.series}, {"warnings", r.warnings}};
}
inline void from_json(const json& j, StudyResult& r) {
    io::require_schema(j, kStudySchema);
    r.config = io::get<StudyConfig>(j, "config");
    r.series = io::get<std::vector<StudySeries>>(j, "series");
    r.warnings = io::get<std::vector<std::string>>(j, "warnings");
}

inline void to_json(json& j, const VfvStyle& s) {
    j = {{"colormap", s.colormap},         {"arrow_scale", s.arrow_scale}, {"marker_radius", s.marker_radius},
         {"show_mean_line", s.show_mean_line}, {"width_px", s.width_px},   {"height_px", s.height_px}};
    if (s.range_low) j["range_low"] = *s.range_low;
    if (s.range_high) j["range_high"] = *s.range_high;
}
// Missing fields keep their defaults; unknown fields are rejected.
inline void from_json(const json& j, VfvStyle& s) {
    io::only_keys(j,
                  {"colormap", "range_low", "range_high", "arrow_scale", "marker_radius", "show_mean_line",
                   "width_px", "height_px"},
                  "style");
    const VfvStyle d;
    s.colormap = io::get_or(j, "colormap", d.colormap);
    s.range_low = io::get_opt<double>(j, "range_low");
    s.range_high = io::get_opt<double>(j, "range_high");
    s.arrow_scale = io::get_or(j, "arrow_scale", d.arrow_scale);
    s.marker_radius = io::get_or(j, "marker_radius", d.marker_radius);
    s.show_mean_line = io::get_or(j, "show_mean_line", d.show_mean_line);
    s.width_px = io::get_or(j, "width_px", d.width_px);
    s.height_px = io::get_or(j, "height_px", d.height_px);
}

// Externally collected (or exported) measurement records with the catalog
// that defines their basis ids.
struct RecordFile {
    std::string schema_version = kRecordsSchema;
    PvmCatalog catalog;
    std::vector<MeasurementRecord> records;
    json provenance = json::object();

    // Throws SchemaError carrying the index of the first offending record.
    void validate() const {
        if (schema_version != kRecordsSchema) {
            throw SchemaError("unrecognized schema_version '" + schema_version + "'");
        }
        for (std::size_t i = 0; i < records.size(); ++i) {
            const auto& r = records[i];
            const auto at = [i](const std::string& msg) {
                return SchemaError("record " + std::to_string(i) + ": " + msg, static_cast<long>(i));
            };
            if (!catalog.find(r.basis_id)) throw at("basis_id '" + r.basis_id + "' is not in the catalog");
            if (r.shots < 1) throw at("shots must be positive");
            if (r.count < 0) throw at("count must be nonnegative");
            if (r.count > r.shots) throw at("count exceeds shots");
            if (r.state_id.empty() && !r.state) throw at("record needs a state_id or state angles");
        }
    }

    bool operator==(const RecordFile&) const = default;
};

inline void to_json(json& j, const RecordFile& f) {
    j = {{"schema_version", f.schema_version}, {"catalog", f.catalog}, {"records", f.records},
         {"provenance", f.provenance}};
}
inline void from_json(const json& j, RecordFile& f) {
    f.schema_version = io::get<std::string>(j, "schema_version");
    if (f.schema_version != kRecordsSchema) {
        throw SchemaError("unrecognized schema_version '" + f.schema_version + "'");
    }
    f.catalog = io::get<PvmCatalog>(j, "catalog");
    const auto it = j.find("records");
    if (it == j.end() || !it->is_array()) throw SchemaError("field 'records' must be an array");
    f.records.clear();
    for (std::size_t i = 0; i < it->size(); ++i) {
        try {
            f.records.push_back((*it)[i].get<MeasurementRecord>());
        } catch (const SchemaError& e) {
            throw SchemaError("record " + std::to_string(i) + ": " + e.what(), static_cast<long>(i));
        }
    }
    f.provenance = j.contains("provenance") ? j.at("provenance") : json::object();
    f.validate();
}

// Records of a scan as a record file, with the catalog spelled out.
inline RecordFile records_of(const ScanResult& scan) {
    RecordFile f;
    f.catalog = catalog_by_name(scan.config.catalog);
    for (const auto& row : scan.rows) f.records.insert(f.records.end(), row.records.begin(), row.records.end());
    f.provenance = {{"source", "simulation"}, {"scan_config", scan.config}};
    return f;
}

struct CompareReport {
    double threshold = 0.02;
    int rows_used = 0;
    double flagged_fraction = 0.0;
    std::vector<FlaggedRow> flagged;

    bool operator==(const CompareReport&) const = default;
};

inline CompareReport make_compare_report(const ScanResult& scan, double threshold) {
    CompareReport r;
    r.threshold = threshold;
    r.flagged = compare_estimators(scan, threshold);
    r.rows_used = scan.summary.rows_used;
    r.flagged_fraction = flagged_fraction(scan, r.flagged);
    return r;
}

inline void to_json(json& j, const FlaggedRow& f) { j = {{"index", f.index}, {"difference", f.difference}}; }
inline void from_json(const json& j, FlaggedRow& f) {
    f.index = io::get<std::size_t>(j, "index");
    f.difference = io::get<double>(j, "difference");
}

inline void to_json(json& j, const CompareReport& r) {
    j = {{"schema_version", kCompareSchema},
         {"threshold", r.threshold},
         {"rows_used", r.rows_used},
         {"flagged_count", r.flagged.size()},
         {"flagged_fraction", r.flagged_fraction},
         {"flagged", r.flagged}};
}
inline void from_json(const json& j, CompareReport& r) {
    io::require_schema(j, kCompareSchema);
    r.threshold = io::get<double>(j, "threshold");
    r.rows_used = io::get<int>(j, "rows_used");
    r.flagged_fraction = io::get<double>(j, "flagged_fraction");
    r.flagged = io::get<std::vector<FlaggedRow>>(j, "flagged");
}

// Text form used for every file the tools write: two-space indent and a
// trailing newline.
template <class T>
std::string emit(const T& value) {
    return json(value).dump(2) + "\n";
}

template <class T>
T parse(const std::string& text) {
    const json j = io::parse_text(text);
    try {
        return j.get<T>();
    } catch (const nlohmann::json::exception& e) {
        throw SchemaError(e.what());
    }
}

} // namespace qvfv
