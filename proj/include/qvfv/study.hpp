#pragma once

// Monte Carlo calibration of reconstruction error. For each state, `trials`
// independent sample -> reconstruct cycles are run and the empirical
// percentile of a per-trial statistic is reported:
//
//   error mode     : |a_out - a_in| for each requested estimator
//   agreement mode : | |a_LR| - |a_MLE| | on the same records

#include <algorithm>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "qvfv/errors.hpp"
#include "qvfv/measurement.hpp"
#include "qvfv/parallel.hpp"
#include "qvfv/reconstruction.hpp"
#include "qvfv/scan.hpp"
#include "qvfv/statistics.hpp"

namespace qvfv {

enum class StudyMode { Error, Agreement };

inline std::string to_string(StudyMode m) { return m == StudyMode::Error ? "error" : "agreement"; }

inline StudyMode study_mode_from_string(const std::string& s) {
    if (s == "error") return StudyMode::Error;
    if (s == "agreement") return StudyMode::Agreement;
    throw InvalidArgument("unknown study mode '" + s + "' (expected error or agreement)");
}

// Trials below this count make the 0.99 order statistic unreliable.
inline constexpr int kMinReliableTrials = 100;

struct StudyConfig {
    StudyMode mode = StudyMode::Error;
    int trials = 2000;
    std::int64_t shots = 20000;
    // Explicit states; when empty a Fibonacci lattice of `lattice_size` is used.
    std::vector<StateAngles> states;
    int lattice_size = 20;
    std::string catalog = "tetrahedral";
    std::vector<Estimator> estimators{Estimator::MLE, Estimator::LR};
    double percentile = 0.99;
    NoiseSpec noise;
    // Feed exact Born probabilities instead of sampled counts (infinite-shot limit).
    bool exact_probabilities = false;
    std::uint64_t master_seed = 0;

    std::vector<StateAngles> resolved_states() const {
        return states.empty() ? fibonacci_sphere(lattice_size) : states;
    }

    // Throws on hard errors; returns soft warnings.
    std::vector<std::string> validate() const {
        if (trials < 1) throw InvalidArgument("trials must be at least 1");
        if (shots < 1) throw InvalidArgument("shots must be at least 1");
        if (states.empty() && lattice_size < 1) throw InvalidArgument("lattice size must be at least 1");
        if (!(percentile > 0.0 && percentile < 1.0)) throw InvalidArgument("percentile must lie in (0, 1)");
        if (estimators.empty()) throw InvalidArgument("at least one estimator is required");
        if (mode == StudyMode::Agreement) {
            const bool both = std::ranges::find(estimators, Estimator::MLE) != estimators.end() &&
                              std::ranges::find(estimators, Estimator::LR) != estimators.end();
            if (!both) throw InvalidArgument("agreement mode needs both mle and lr");
        }
        noise.validate();
        catalog_by_name(catalog);
        std::vector<std::string> warnings;
        if (trials < kMinReliableTrials) {
            warnings.push_back("trials = " + std::to_string(trials) + " < " + std::to_string(kMinReliableTrials) +
                               ": percentile estimate is unreliable");
        }
        return warnings;
    }

    bool operator==(const StudyConfig&) const = default;
};

// 200 uniform bins over [0, 0.1] plus an overflow bin.
struct Histogram {
    static constexpr int kBins = 200;
    static constexpr double kUpper = 0.1;

    std::vector<std::int64_t> counts = std::vector<std::int64_t>(kBins, 0);
    std::int64_t overflow = 0;

    void add(double v) {
        if (v >= kUpper) {
            ++overflow;
            return;
        }
        const int bin = std::clamp(static_cast<int>(v / (kUpper / kBins)), 0, kBins - 1);
        ++counts[static_cast<std::size_t>(bin)];
    }

    std::int64_t total() const {
        std::int64_t t = overflow;
        for (auto c : counts) t += c;
        return t;
    }

    bool operator==(const Histogram&) const = default;
};

struct StateStudy {
    StateAngles state;
    double percentile_value = 0.0;
    Histogram histogram;
    std::int64_t excluded = 0;

    bool operator==(const StateStudy&) const = default;
};

struct StudySeries {
    // "mle", "lr", or "lr-mle" for the agreement statistic.
    std::string label;
    std::vector<StateStudy> per_state;
    double global_max = 0.0;
    std::int64_t excluded_trials = 0;

    bool operator==(const StudySeries&) const = default;
};

struct StudyResult {
    StudyConfig config;
    std::vector<StudySeries> series;
    std::vector<std::string> warnings;

    const StudySeries* find(const std::string& label) const {
        for (const auto& s : series) if (s.label == label) return &s;
        return nullptr;
    }

    bool operator==(const StudyResult&) const = default;
};

struct TrialOutcome {
    std::vector<MeasurementRecord> records;
    std::optional<ReconstructionResult> mle;
    std::optional<ReconstructionResult> lr;
    std::string mle_error;
    std::string lr_error;
};

// One sample -> reconstruct cycle. Both estimators consume the very same
// records held in the outcome.
inline TrialOutcome run_trial(const StudyConfig& config, const PvmCatalog& catalog, std::size_t state_index,
                              const StateAngles& state, std::uint64_t trial) {
    TrialOutcome out;
    const BlochVector a_in = to_bloch(state);
    std::optional<ReconstructionInput> input;
    try {
        if (config.exact_probabilities) {
            std::vector<ReconstructionEntry> entries;
            for (const auto& b : catalog.bases) {
                entries.push_back({b.axis, outcome_probability(a_in, b, config.noise), 1.0});
            }
            input.emplace(std::move(entries));
        } else {
            out.records = simulate_records(state, state_index, trial, catalog, config.shots, config.noise, 0.0,
                                           config.master_seed);
            input = ReconstructionInput::from_records(out.records, catalog);
        }
    } catch (const Error& e) {
        out.mle_error = out.lr_error = e.kind() + ": " + e.what();
        return out;
    }
    for (Estimator e : config.estimators) {
        try {
            (e == Estimator::MLE ? out.mle : out.lr) = reconstruct(e, *input);
        } catch (const Error& err) {
            (e == Estimator::MLE ? out.mle_error : out.lr_error) = err.kind() + ": " + err.what();
        }
    }
    return out;
}

namespace detail {

inline StateStudy summarize_state(const StateAngles& state, const std::vector<std::optional<double>>& values,
                                  double percentile) {
    StateStudy s;
    s.state = state;
    std::vector<double> kept;
    kept.reserve(values.size());
    for (const auto& v : values) {
        if (!v) {
            ++s.excluded;
            continue;
        }
        kept.push_back(*v);
        s.histogram.add(*v);
    }
    s.percentile_value = kept.empty() ? 0.0 : order_statistic(std::move(kept), percentile);
    return s;
}

} // namespace detail

inline StudyResult run_study(const StudyConfig& config, unsigned threads = 1) {
    StudyResult result;
    result.config = config;
    result.warnings = config.validate();
    const PvmCatalog catalog = catalog_by_name(config.catalog);
    const auto states = config.resolved_states();
    const auto trials = static_cast<std::size_t>(config.trials);

    std::vector<std::string> labels;
    if (config.mode == StudyMode::Agreement) {
        labels = {"lr-mle"};
    } else {
        for (Estimator e : config.estimators) labels.push_back(to_string(e));
    }

    // values[label][state][trial]
    std::vector<std::vector<std::vector<std::optional<double>>>> values(
        labels.size(), std::vector<std::vector<std::optional<double>>>(states.size(),
                                                                       std::vector<std::optional<double>>(trials)));

    parallel_for(states.size() * trials, threads, [&](std::size_t job) {
        const std::size_t si = job / trials;
        const std::size_t ti = job % trials;
        const TrialOutcome t = run_trial(config, catalog, si, states[si], ti);
        if (config.mode == StudyMode::Agreement) {
            if (t.mle && t.lr) values[0][si][ti] = std::abs(norm(t.lr->estimate) - norm(t.mle->estimate));
            return;
        }
        const BlochVector a_in = to_bloch(states[si]);
        for (std::size_t l = 0; l < labels.size(); ++l) {
            const auto& r = labels[l] == "mle" ? t.mle : t.lr;
            if (r) values[l][si][ti] = distance(r->estimate, a_in);
        }
    });

    for (std::size_t l = 0; l < labels.size(); ++l) {
        StudySeries series;
        series.label = labels[l];
        for (std::size_t si = 0; si < states.size(); ++si) {
            StateStudy s = detail::summarize_state(states[si], values[l][si], config.percentile);
            series.global_max = std::max(series.global_max, s.percentile_value);
            series.excluded_trials += s.excluded;
            series.per_state.push_back(std::move(s));
        }
        if (series.excluded_trials > 0) {
            result.warnings.push_back(series.label + ": " + std::to_string(series.excluded_trials) +
                                      " trials excluded after solver failures");
        }
        result.series.push_back(std::move(series));
    }
    return result;
}

inline StudyResult run_error_study(StudyConfig config, unsigned threads = 1) {
    config.mode = StudyMode::Error;
    return run_study(config, threads);
}

inline StudyResult run_agreement_study(StudyConfig config, unsigned threads = 1) {
    config.mode = StudyMode::Agreement;
    return run_study(config, threads);
}

} // namespace qvfv
