// Command-line front end: scan, reconstruct, study, render, compare.
//
// Exit codes: 0 success, 1 runtime failure, 2 usage or validation error.
// Failures print a JSON object {"error": {...}} on stderr.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <thread>

#include "CLI11.hpp"

#include "qvfv/render.hpp"
#include "qvfv/scan.hpp"
#include "qvfv/serialization.hpp"
#include "qvfv/study.hpp"

using namespace qvfv;

namespace {

// Raised for I/O and other runtime problems outside the library's own errors.
class RuntimeFailure : public Error {
public:
    explicit RuntimeFailure(const std::string& what) : Error("RuntimeFailure", what) {}
};

int exit_code_for(const Error& e) {
    const std::string& k = e.kind();
    if (k == "InvalidArgument" || k == "SchemaError" || k == "MissingEstimator" || k == "UnphysicalState") return 2;
    return 1;
}

void report_error(const std::string& kind, const std::string& message, long index = -1) {
    json err = {{"kind", kind}, {"message", message}};
    if (index >= 0) err["index"] = index;
    std::cerr << json{{"error", err}}.dump() << "\n";
}

void warn(const std::string& msg) { std::cerr << "warning: " << msg << "\n"; }

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InvalidArgument("cannot read '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_output(const std::string& path, const std::string& text) {
    if (path.empty() || path == "-") {
        std::cout << text;
        return;
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw RuntimeFailure("cannot write '" + path + "'");
    out << text;
    if (!out.flush()) throw RuntimeFailure("write to '" + path + "' failed");
}

// Accepts a JSON file path, an inline JSON object, or key=value pairs
// separated by commas.
NoiseSpec parse_noise(const std::string& arg) {
    if (arg.empty()) return {};
    if (arg.front() == '{') return parse<NoiseSpec>(arg);
    if (arg.find('=') != std::string::npos && !std::filesystem::exists(arg)) {
        json j = json::object();
        std::stringstream ss(arg);
        std::string item;
        while (std::getline(ss, item, ',')) {
            const auto eq = item.find('=');
            if (eq == std::string::npos) throw InvalidArgument("noise entry '" + item + "' is not key=value");
            const std::string key = item.substr(0, eq);
            const std::string val = item.substr(eq + 1);
            try {
                std::size_t used = 0;
                j[key] = std::stod(val, &used);
                if (used != val.size()) throw std::invalid_argument(val);
            } catch (const std::exception&) {
                throw InvalidArgument("noise value for '" + key + "' is not a number");
            }
        }
        return j.get<NoiseSpec>();
    }
    return parse<NoiseSpec>(read_file(arg));
}

std::vector<Estimator> parse_estimators(const std::string& s) {
    if (s == "both") return {Estimator::MLE, Estimator::LR};
    return {estimator_from_string(s)};
}

// Flag wins over the environment, the environment over the default.
std::uint64_t resolve_seed(const CLI::Option* opt, std::uint64_t flag_value) {
    if (opt->count() > 0) return flag_value;
    if (const char* env = std::getenv("SQT_SEED")) {
        try {
            std::size_t used = 0;
            const auto v = std::stoull(env, &used);
            if (used == std::string(env).size()) return v;
        } catch (const std::exception&) {
        }
        throw InvalidArgument("SQT_SEED is not an unsigned integer");
    }
    return flag_value;
}

unsigned resolve_threads(const CLI::Option* opt, unsigned flag_value) {
    if (opt->count() > 0) return std::max(1u, flag_value);
    if (const char* env = std::getenv("SQT_THREADS")) {
        try {
            std::size_t used = 0;
            const auto v = std::stoul(env, &used);
            if (used == std::string(env).size() && v > 0) return static_cast<unsigned>(v);
        } catch (const std::exception&) {
        }
        throw InvalidArgument("SQT_THREADS is not a positive integer");
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

struct ScanArgs {
    int states = 200;
    std::int64_t shots = 20000;
    std::string catalog = "tetrahedral";
    std::string noise;
    std::optional<double> rot_error_scale;
    double delay = 0.0;
    std::uint64_t seed = 0;
    std::string estimator = "mle";
    unsigned threads = 1;
    std::string out = "-";
    std::string records;
    CLI::Option* seed_opt = nullptr;
    CLI::Option* threads_opt = nullptr;
};

int run_scan_cmd(const ScanArgs& a) {
    ScanConfig c;
    c.n_states = a.states;
    c.shots = a.shots;
    c.catalog = a.catalog;
    c.noise = parse_noise(a.noise);
    if (a.rot_error_scale) c.noise.rot_error_scale = *a.rot_error_scale;
    c.delay_t = a.delay;
    c.estimators = parse_estimators(a.estimator);
    c.master_seed = resolve_seed(a.seed_opt, a.seed);
    c.validate();
    const ScanResult r = run_scan(c, resolve_threads(a.threads_opt, a.threads));
    for (const auto& row : r.rows) {
        if (row.failed()) warn("row failed: " + row.error);
    }
    write_output(a.out, emit(r));
    if (!a.records.empty()) write_output(a.records, emit(records_of(r)));
    return 0;
}

struct ReconstructArgs {
    std::string in;
    std::string estimator = "mle";
    std::string out = "-";
};

int run_reconstruct_cmd(const ReconstructArgs& a) {
    const auto estimators = parse_estimators(a.estimator);
    const RecordFile file = parse<RecordFile>(read_file(a.in));
    ScanResult r;
    r.rows = group_records(file.records);
    for (auto& row : r.rows) {
        reconstruct_row(row, file.catalog, estimators);
        if (row.failed()) warn("row '" + row.state_id + "' failed: " + row.error);
    }
    r.summary = summarize(r.rows);
    r.config.n_states = static_cast<int>(r.rows.size());
    r.config.shots = file.records.empty() ? 0 : file.records.front().shots;
    r.config.catalog = file.catalog.name;
    r.config.estimators = estimators;
    r.config.master_seed = 0;
    write_output(a.out, emit(r));
    return 0;
}

struct StudyArgs {
    std::string mode = "error";
    int trials = 2000;
    std::int64_t shots = 20000;
    int states = 20;
    std::string catalog = "tetrahedral";
    std::string estimator = "both";
    double percentile = 0.99;
    std::string noise;
    std::optional<double> rot_error_scale;
    bool exact = false;
    std::uint64_t seed = 0;
    unsigned threads = 1;
    std::string out = "-";
    CLI::Option* seed_opt = nullptr;
    CLI::Option* threads_opt = nullptr;
};

int run_study_cmd(const StudyArgs& a) {
    StudyConfig c;
    c.mode = study_mode_from_string(a.mode);
    c.trials = a.trials;
    c.shots = a.shots;
    c.lattice_size = a.states;
    c.catalog = a.catalog;
    c.estimators = parse_estimators(a.estimator);
    c.percentile = a.percentile;
    c.noise = parse_noise(a.noise);
    if (a.rot_error_scale) c.noise.rot_error_scale = *a.rot_error_scale;
    c.exact_probabilities = a.exact;
    c.master_seed = resolve_seed(a.seed_opt, a.seed);
    // Soft warnings go out before the (possibly long) computation.
    const auto early = c.validate();
    for (const auto& w : early) warn(w);
    const StudyResult r = run_study(c, resolve_threads(a.threads_opt, a.threads));
    for (std::size_t i = early.size(); i < r.warnings.size(); ++i) warn(r.warnings[i]);
    write_output(a.out, emit(r));
    return 0;
}

VfvStyle load_style(const std::string& arg) {
    if (arg.empty() || arg == "defaults") return {};
    if (arg.front() == '{') return parse<VfvStyle>(arg);
    return parse<VfvStyle>(read_file(arg));
}

struct RenderArgs {
    std::string in;
    std::string style = "defaults";
    std::string out = "-";
};

int run_render_cmd(const RenderArgs& a) {
    const VfvStyle style = load_style(a.style);
    style.validate();
    const ScanResult scan = parse<ScanResult>(read_file(a.in));
    const VfvRender r = render_vfv(scan, style);
    for (const auto& w : r.warnings) warn(w);
    write_output(a.out, r.svg);
    return 0;
}

struct CompareArgs {
    std::string in;
    double threshold = 0.02;
    std::string out = "-";
    std::string svg;
    std::string style = "defaults";
};

int run_compare_cmd(const CompareArgs& a) {
    if (!(a.threshold >= 0.0)) throw InvalidArgument("threshold must be nonnegative");
    const VfvStyle style = load_style(a.style);
    style.validate();
    const ScanResult scan = parse<ScanResult>(read_file(a.in));
    const CompareReport rep = make_compare_report(scan, a.threshold);
    write_output(a.out, emit(rep));
    if (!a.svg.empty()) {
        if (rep.flagged.empty()) {
            warn("no flagged rows; no SVG written");
            return 0;
        }
        ScanResult only = scan;
        only.rows.clear();
        for (const auto& f : rep.flagged) only.rows.push_back(scan.rows[f.index]);
        only.summary = summarize(only.rows);
        const VfvRender r = render_vfv(only, style);
        for (const auto& w : r.warnings) warn(w);
        write_output(a.svg, r.svg);
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Single-qubit tomography simulation, reconstruction and Vector Field Visualisation"};
    app.require_subcommand(1);

    ScanArgs scan;
    auto* s = app.add_subcommand("scan", "Simulate and reconstruct a Fibonacci lattice of states");
    s->add_option("--states", scan.states, "Number of lattice states")->capture_default_str();
    s->add_option("--shots", scan.shots, "Shots per basis")->capture_default_str();
    s->add_option("--catalog", scan.catalog, "Measurement catalog")
        ->check(CLI::IsMember({"tetrahedral", "pauli"}))
        ->capture_default_str();
    s->add_option("--noise", scan.noise, "Noise spec: JSON file, inline JSON, or key=value,...");
    s->add_option("--rot-error-scale", scan.rot_error_scale, "Override the basis over-rotation scale");
    s->add_option("--delay", scan.delay, "Idle delay before measurement (units of t1, t2)")->capture_default_str();
    scan.seed_opt = s->add_option("--seed", scan.seed, "Master seed (env SQT_SEED)")->capture_default_str();
    s->add_option("--estimator", scan.estimator, "mle, lr or both")
        ->check(CLI::IsMember({"mle", "lr", "both"}))
        ->capture_default_str();
    scan.threads_opt = s->add_option("--threads", scan.threads, "Worker threads (env SQT_THREADS)");
    s->add_option("--out", scan.out, "Output JSON path, - for stdout")->capture_default_str();
    s->add_option("--records", scan.records, "Also write the simulated records as a record file");

    ReconstructArgs rec;
    auto* r = app.add_subcommand("reconstruct", "Reconstruct states from a record file");
    r->add_option("--in", rec.in, "Record file")->required();
    r->add_option("--estimator", rec.estimator, "mle, lr or both")
        ->check(CLI::IsMember({"mle", "lr", "both"}))
        ->capture_default_str();
    r->add_option("--out", rec.out, "Output JSON path, - for stdout")->capture_default_str();

    StudyArgs study;
    auto* st = app.add_subcommand("study", "Monte Carlo percentile study of reconstruction error");
    st->add_option("--mode", study.mode, "error or agreement")
        ->check(CLI::IsMember({"error", "agreement"}))
        ->capture_default_str();
    st->add_option("--trials", study.trials, "Trials per state")->capture_default_str();
    st->add_option("--shots", study.shots, "Shots per basis")->capture_default_str();
    st->add_option("--states", study.states, "Lattice size")->capture_default_str();
    st->add_option("--catalog", study.catalog, "Measurement catalog")
        ->check(CLI::IsMember({"tetrahedral", "pauli"}))
        ->capture_default_str();
    st->add_option("--estimator", study.estimator, "mle, lr or both")
        ->check(CLI::IsMember({"mle", "lr", "both"}))
        ->capture_default_str();
    st->add_option("--percentile", study.percentile, "Reported percentile in (0, 1)")->capture_default_str();
    st->add_option("--noise", study.noise, "Noise spec: JSON file, inline JSON, or key=value,...");
    st->add_option("--rot-error-scale", study.rot_error_scale, "Override the basis over-rotation scale");
    st->add_flag("--exact", study.exact, "Use exact outcome probabilities instead of sampled counts");
    study.seed_opt = st->add_option("--seed", study.seed, "Master seed (env SQT_SEED)")->capture_default_str();
    study.threads_opt = st->add_option("--threads", study.threads, "Worker threads (env SQT_THREADS)");
    st->add_option("--out", study.out, "Output JSON path, - for stdout")->capture_default_str();

    RenderArgs render;
    auto* rd = app.add_subcommand("render", "Render a scan as a Vector Field Visualisation SVG");
    rd->add_option("--in", render.in, "Scan JSON")->required();
    rd->add_option("--style", render.style, "Style JSON file, inline JSON, or defaults")->capture_default_str();
    rd->add_option("--out", render.out, "Output SVG path, - for stdout")->capture_default_str();

    CompareArgs cmp;
    auto* c = app.add_subcommand("compare", "Flag rows where MLE and LR norms disagree");
    c->add_option("--in", cmp.in, "Scan JSON carrying both estimators")->required();
    c->add_option("--threshold", cmp.threshold, "Norm difference threshold")->capture_default_str();
    c->add_option("--out", cmp.out, "Output JSON path, - for stdout")->capture_default_str();
    c->add_option("--svg", cmp.svg, "Also render the flagged rows to this SVG");
    c->add_option("--style", cmp.style, "Style for --svg")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        report_error("UsageError", e.what());
        return 2;
    }

    try {
        if (*s) return run_scan_cmd(scan);
        if (*r) return run_reconstruct_cmd(rec);
        if (*st) return run_study_cmd(study);
        if (*rd) return run_render_cmd(render);
        if (*c) return run_compare_cmd(cmp);
    } catch (const SchemaError& e) {
        report_error(e.kind(), e.what(), e.index());
        return 2;
    } catch (const Error& e) {
        report_error(e.kind(), e.what());
        return exit_code_for(e);
    } catch (const std::exception& e) {
        report_error("RuntimeFailure", e.what());
        return 1;
    }
    return 2;
}
