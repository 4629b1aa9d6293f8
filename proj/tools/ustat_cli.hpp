#pragma once

#include "ustat/ustat.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace ustat::cli {

/// Exit codes.
inline constexpr int exit_pass = 0;
inline constexpr int exit_verify_failed = 1;
inline constexpr int exit_input_error = 2;
inline constexpr int exit_not_canonical = 3;

/// Raised when a kernel fails the canonicality check.
class NotCanonical : public Error {
public:
    using Error::Error;
};

struct GlobalOptions {
    std::uint64_t seed = 0;
    unsigned threads = 1;
    double budget = 1e7;
};

namespace detail {

using io::Json;

inline NormConfig norm_config(const GlobalOptions& g) {
    NormConfig c;
    c.seed = g.seed;
    c.threads = g.threads;
    return c;
}

inline std::string describe_index(const std::vector<std::size_t>& index) {
    std::string s = "(";
    for (std::size_t k = 0; k < index.size(); ++k) {
        s += (k ? "," : "") + std::to_string(index[k] + 1);
    }
    return s + ")";
}

/// Throws NotCanonical with the worst conditional mean unless `allow`.
/// Returns the warning to attach when the check is waived.
inline std::optional<std::string> check_canonical(const KernelEnsemble& k, bool allow) {
    if (is_canonical(k)) {
        return std::nullopt;
    }
    const auto rep = canonicality(k);
    std::ostringstream msg;
    msg << "kernel is not canonical: conditional mean over axis j=" << rep.axis + 1
        << " at index i=" << describe_index(rep.index) << " is " << std::setprecision(17) << rep.max_abs_mean
        << " in absolute value";
    if (!allow) {
        throw NotCanonical(msg.str());
    }
    return msg.str();
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
    if (path.has_parent_path()) {
        std::filesystem::create_directories(path.parent_path());
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw SchemaError("cannot write " + path.string());
    }
    out << text;
}

inline std::string dominant_field(const BoundReport& r, bool subset) {
    if (!r.dominant) {
        return "";
    }
    const auto& t = r.terms[*r.dominant];
    return subset ? t.subset.to_string() : t.partition.to_string();
}

inline std::string bound_csv(const std::vector<BoundReport>& reports) {
    std::ostringstream out;
    const std::string param = reports.empty() ? "parameter" : reports.front().parameter_name;
    io::CsvWriter csv(out, {param, "exponent", "dominant_I", "dominant_J", "total", "bound"});
    for (const auto& r : reports) {
        csv.row({io::csv_number(r.parameter), io::csv_number(r.exponent), dominant_field(r, true),
                 dominant_field(r, false), io::csv_number(r.total), io::csv_number(r.probability)});
    }
    return out.str();
}

// ---- norm ----------------------------------------------------------------------

inline int cmd_norm(const GlobalOptions& g, const std::string& file, const std::string& spec,
                    const std::string& method, std::ostream& out) {
    const auto a = io::array_from_json(io::read_json_file(file));
    const auto partition = Partition::parse(spec);
    const auto m = io::parse_norm_method(method);
    const auto cert = partition_norm(a, partition, m, norm_config(g));
    out << io::to_json(cert, partition, m).dump(2) << '\n';
    return exit_pass;
}

// ---- canonicalize ------------------------------------------------------------

inline int cmd_canonicalize(const std::string& file, const std::string& out_file, std::ostream& out) {
    const auto doc = io::kernel_from_json(io::read_json_file(file));
    const auto before = canonicality(doc.ensemble);
    const auto canon = canonicalize(doc.ensemble);
    const auto after = canonicality(canon);
    Json j;
    j["inputMaxConditionalMean"] = io::number(before.max_abs_mean);
    j["outputMaxConditionalMean"] = io::number(after.max_abs_mean);
    j["canonical"] = is_canonical(canon);
    j["kernel"] = io::to_json(canon);
    if (!out_file.empty()) {
        write_text(out_file, io::to_json(canon).dump(2) + "\n");
    }
    out << j.dump(2) << '\n';
    return exit_pass;
}

// ---- bound ---------------------------------------------------------------------

struct BoundArgs {
    std::string kernel;
    std::string theorem;
    std::vector<double> p;
    std::vector<double> t;
    double constant = 1.0;
    std::string mode = "exact";
    std::size_t samples = 100000;
    std::optional<int> range;
    std::string process;
    double rate = 1.0;
    bool allow_noncanonical = false;
    std::string csv;
    std::string terms_csv;
};

inline ProcessSpec load_process(const StepKernel& h, const std::string& file, double rate) {
    if (file.empty()) {
        return ProcessSpec::homogeneous_poisson(h, rate);
    }
    auto spec = io::process_from_json(io::read_json_file(file));
    spec.validate(h);
    return spec;
}

inline int cmd_bound(const GlobalOptions& g, const BoundArgs& a, std::ostream& out) {
    const auto cfg = norm_config(g);
    std::vector<BoundReport> reports;
    const auto json = io::read_json_file(a.kernel);
    if (a.theorem == "8") {
        const auto h = io::stepkernel_from_json(json);
        const auto spec = load_process(h, a.process, a.rate);
        const auto table = step_tail_table(h, spec, NormMethod::automatic, cfg);
        for (double p : a.p) {
            reports.push_back(theorem8_bound(table, p, a.constant));
        }
        for (double t : a.t) {
            reports.push_back(theorem8_tail(table, t, a.constant));
        }
    } else {
        const auto doc = io::kernel_from_json(json);
        std::optional<std::string> warning;
        if (a.theorem == "6") {
            warning = check_canonical(doc.ensemble, a.allow_noncanonical);
            const auto mode = a.mode == "exact" ? ExpectationMode::exact(g.budget)
                                                : ExpectationMode::montecarlo(a.samples, g.seed, g.budget);
            for (double p : a.p) {
                reports.push_back(moment_bound(doc.ensemble, p, a.constant, mode, NormMethod::automatic, cfg));
            }
        } else if (a.theorem == "7" || a.theorem == "cor3") {
            TailTable table;
            if (a.theorem == "7") {
                warning = check_canonical(doc.ensemble, a.allow_noncanonical);
                table = tail_table(doc.ensemble, NormMethod::automatic, cfg, g.budget);
            } else {
                if (!doc.shared) {
                    throw SchemaError("theorem cor3 needs a kernel in the compact form {d, n, space, kernelTable}");
                }
                const int n = a.range.value_or(doc.ensemble.range());
                warning = check_canonical(doc.shared->expand(1), a.allow_noncanonical);
                table = iid_tail_table(*doc.shared, n, NormMethod::automatic, cfg, g.budget);
            }
            for (double p : a.p) {
                reports.push_back(tail_threshold(table, p, a.constant, a.theorem));
            }
            for (double t : a.t) {
                reports.push_back(tail_bound(table, t, a.constant, a.theorem));
            }
        } else {
            throw SchemaError("unknown theorem \"" + a.theorem + "\" (expected 6, 7, cor3 or 8)");
        }
        if (warning) {
            for (auto& r : reports) {
                if (std::find(r.warnings.begin(), r.warnings.end(), *warning) == r.warnings.end()) {
                    r.warnings.push_back(*warning);
                }
            }
        }
    }
    Json j;
    j["theorem"] = a.theorem;
    Json arr = Json::array();
    for (const auto& r : reports) {
        arr.push_back(io::to_json(r));
    }
    j["reports"] = arr;
    if (!a.csv.empty()) {
        write_text(a.csv, bound_csv(reports));
    }
    if (!a.terms_csv.empty()) {
        write_text(a.terms_csv, io::terms_csv(reports));
    }
    out << j.dump(2) << '\n';
    return exit_pass;
}

// ---- poisson -------------------------------------------------------------------

struct PoissonArgs {
    std::string stepkernel;
    std::string process;
    double rate = 1.0;
    std::vector<double> p;
    std::vector<double> t;
    double constant = 1.0;
    std::size_t samples = 0;
};

inline int cmd_poisson(const GlobalOptions& g, const PoissonArgs& a, std::ostream& out) {
    const auto cfg = norm_config(g);
    const auto h = io::stepkernel_from_json(io::read_json_file(a.stepkernel));
    const auto spec = load_process(h, a.process, a.rate);
    Json norms = Json::array();
    TailTable table;
    table.order = h.order();
    for (const auto& [subset, partition] : all_subset_partitions(h.order())) {
        const auto field = stepkernel_norm(h, spec, subset, partition, NormMethod::automatic, cfg);
        table.terms.push_back({subset, partition, h.order() - subset.size(), field.supremum});
        Json nj;
        nj["I"] = subset.to_string();
        nj["J"] = partition.to_string();
        nj["outerShape"] = field.shape;
        nj["values"] = io::numbers(field.values);
        nj["supremum"] = io::number(field.supremum);
        norms.push_back(nj);
    }
    Json j;
    j["process"] = io::to_json(spec);
    j["norms"] = norms;
    Json reports = Json::array();
    for (double p : a.p) {
        reports.push_back(io::to_json(theorem8_bound(table, p, a.constant)));
    }
    for (double t : a.t) {
        reports.push_back(io::to_json(theorem8_tail(table, t, a.constant)));
    }
    j["reports"] = reports;
    if (a.samples > 0) {
        SampleRequest req;
        req.threads = g.threads;
        req.p_list = {2.0};
        req.t_grid = a.t;
        j["samples"] = io::to_json(sample_multiple_integral(h, spec, g.seed, a.samples, req));
    }
    out << j.dump(2) << '\n';
    return exit_pass;
}

// ---- verify --------------------------------------------------------------------

struct PlotSpec {
    std::string csv;
    std::string x;
    std::vector<std::string> y;
    bool log_y = false;
};

/// Outcome of one verify run: report JSON plus CSV tables keyed by file name.
struct VerifyOutcome {
    Json report;
    std::vector<std::pair<std::string, std::string>> csv;
    std::vector<PlotSpec> plots;
    std::vector<std::string> warnings;
    bool pass = true;
};

inline std::filesystem::path resolve(const std::filesystem::path& base, const Json& j, const std::string& ctx) {
    if (!j.is_string()) {
        throw SchemaError(ctx + ": expected a file path");
    }
    const std::filesystem::path p = j.get<std::string>();
    return p.is_absolute() ? p : base / p;
}

inline std::vector<int> get_ranges(const Json& j, const std::string& ctx) {
    std::vector<int> out;
    for (auto v : io::detail::get_counts(j, ctx)) {
        if (v < 1) {
            throw SchemaError(ctx + ": ranges must be at least 1");
        }
        out.push_back(static_cast<int>(v));
    }
    return out;
}

inline Json fit_json(const FitResult& fit, bool fixed) {
    Json j;
    j["constant"] = io::number(fit.constant);
    j["fixed"] = fixed;
    j["calibrationRatios"] = io::numbers(fit.calibration_ratios);
    j["maxRatio"] = io::number(fit.max_ratio);
    j["infeasible"] = fit.infeasible;
    if (!fit.held_out_ratios.empty()) {
        j["heldOutRatios"] = io::numbers(fit.held_out_ratios);
        j["violations"] = fit.violations;
    }
    return j;
}

inline FitResult fixed_or_fitted(const Json& cfg, const std::vector<FitInstance>& instances, bool& fixed) {
    fixed = cfg.contains("constant");
    if (fixed) {
        FitResult fit;
        fit.constant = io::detail::get_number(cfg["constant"], "config.constant");
        if (!(fit.constant > 0.0)) {
            throw SchemaError("config.constant must be positive");
        }
        return fit;
    }
    auto fit = fit_constant(instances);
    if (fit.infeasible) {
        throw DomainError("constant fit is infeasible: a calibration instance has a zero bound but a nonzero value");
    }
    if (!(fit.constant > 0.0)) {
        throw DomainError("constant fit produced no positive constant; check the calibration data");
    }
    return fit;
}

/// Tail experiment: fit the constant of the tail bound on calibration ranges
/// (exact laws or sampled tails), then check sampled tails on validation ranges.
inline VerifyOutcome verify_tail(const GlobalOptions& g, const Json& cfg, const std::filesystem::path& base) {
    io::detail::check_fields(cfg, "config",
                             {"schemaVersion", "experiment", "kernel", "tGrid", "validation"},
                             {"theorem", "calibration", "constant", "allowNoncanonical"});
    const auto nc = norm_config(g);
    const auto doc = io::kernel_from_json(io::read_json_file(resolve(base, cfg["kernel"], "config.kernel")));
    const std::string theorem = cfg.value("theorem", doc.shared ? "cor3" : "7");
    if (theorem != "7" && theorem != "cor3") {
        throw SchemaError("config.theorem: expected 7 or cor3");
    }
    if (theorem == "cor3" && !doc.shared) {
        throw SchemaError("config.theorem cor3 needs a compact-form kernel");
    }
    const bool allow = cfg.value("allowNoncanonical", false);
    const auto t_grid = io::detail::get_numbers(cfg["tGrid"], "config.tGrid");
    VerifyOutcome vo;

    auto ensemble_for = [&](int n) { return theorem == "cor3" ? doc.shared->expand(n) : doc.ensemble; };
    auto table_for = [&](int n) {
        return theorem == "cor3" ? iid_tail_table(*doc.shared, n, NormMethod::automatic, nc, g.budget)
                                 : tail_table(doc.ensemble, NormMethod::automatic, nc, g.budget);
    };
    auto ranges_of = [&](const Json& phase, const std::string& ctx) {
        if (phase.contains("ranges")) {
            if (theorem != "cor3") {
                throw SchemaError(ctx + ".ranges needs theorem cor3");
            }
            return get_ranges(phase["ranges"], ctx + ".ranges");
        }
        return std::vector<int>{doc.ensemble.range()};
    };
    if (auto w = check_canonical(doc.ensemble, allow)) {
        vo.warnings.push_back(*w);
    }

    std::vector<FitInstance> instances;
    Json cal_json = Json::array();
    if (cfg.contains("calibration")) {
        const auto& cal = cfg["calibration"];
        io::detail::check_fields(cal, "config.calibration", {"source"}, {"ranges", "seed", "N"});
        const auto source = cal["source"].is_string() ? cal["source"].get<std::string>() : "";
        const auto ranges = ranges_of(cal, "config.calibration");
        for (std::size_t r = 0; r < ranges.size(); ++r) {
            const auto table = table_for(ranges[r]);
            std::vector<FitInstance> part;
            if (source == "exact") {
                part = tail_fit_instances(table, exact_distribution(ensemble_for(ranges[r]), g.budget));
            } else if (source == "sample") {
                if (!cal.contains("seed") || !cal.contains("N")) {
                    throw SchemaError("config.calibration: sampled calibration needs seed and N");
                }
                SampleRequest req;
                req.t_grid = t_grid;
                req.threads = g.threads;
                const auto seed = derive_seed(io::detail::get_count(cal["seed"], "config.calibration.seed"), r);
                part = tail_fit_instances(
                    table, sample_ustatistic(ensemble_for(ranges[r]), seed,
                                             io::detail::get_count(cal["N"], "config.calibration.N"), req));
            } else {
                throw SchemaError("config.calibration.source: expected exact or sample");
            }
            double need = 0.0;
            for (const auto& inst : part) {
                need = std::max(need, inst.lhs);
            }
            cal_json.push_back({{"n", ranges[r]}, {"instances", part.size()}, {"requiredConstant", io::number(need)}});
            instances.insert(instances.end(), part.begin(), part.end());
        }
    } else if (!cfg.contains("constant")) {
        throw SchemaError("config: give either calibration or constant");
    }
    bool fixed = false;
    const auto fit = fixed_or_fitted(cfg, instances, fixed);

    const auto& val = cfg["validation"];
    io::detail::check_fields(val, "config.validation", {"seed", "N"}, {"ranges"});
    const auto vseed = io::detail::get_count(val["seed"], "config.validation.seed");
    const auto vcount = io::detail::get_count(val["N"], "config.validation.N");
    const auto vranges = ranges_of(val, "config.validation");
    std::ostringstream csv_text;
    io::CsvWriter csv(csv_text, {"n", "t", "count", "empirical", "ci_low", "ci_high", "bound", "exponent",
                                 "dominant_I", "dominant_J", "status"});
    Json val_json = Json::array();
    std::size_t unresolvable = 0;
    for (std::size_t r = 0; r < vranges.size(); ++r) {
        const auto table = table_for(vranges[r]);
        SampleRequest req;
        req.t_grid = t_grid;
        req.threads = g.threads;
        const auto run = sample_ustatistic(ensemble_for(vranges[r]), derive_seed(vseed, r), vcount, req);
        const auto ver = verify_tail_bound(table, run, fit.constant, theorem);
        Json rows = Json::array();
        for (std::size_t k = 0; k < ver.rows.size(); ++k) {
            const auto& row = ver.rows[k];
            const auto rep = tail_bound(table, row.t, fit.constant, theorem);
            csv.row({std::to_string(vranges[r]), io::csv_number(row.t), std::to_string(row.count),
                     io::csv_number(row.empirical), io::csv_number(row.ci_low), io::csv_number(row.ci_high),
                     io::csv_number(row.bound), io::csv_number(row.exponent), dominant_field(rep, true),
                     dominant_field(rep, false), to_string(row.status)});
            rows.push_back({{"t", io::number(row.t)},
                            {"count", row.count},
                            {"empirical", io::number(row.empirical)},
                            {"ciLow", io::number(row.ci_low)},
                            {"ciHigh", io::number(row.ci_high)},
                            {"bound", io::number(row.bound)},
                            {"exponent", io::number(row.exponent)},
                            {"status", to_string(row.status)}});
        }
        unresolvable += ver.unresolvable;
        vo.pass = vo.pass && ver.pass;
        Json vj;
        vj["n"] = vranges[r];
        vj["run"] = io::to_json(run);
        vj["rows"] = rows;
        vj["pass"] = ver.pass;
        val_json.push_back(vj);
    }
    if (unresolvable > 0) {
        vo.warnings.push_back(std::to_string(unresolvable) + " tail rows have bounds below 20/N and are unresolvable");
    }
    vo.report["experiment"] = "tail";
    vo.report["theorem"] = theorem;
    vo.report["calibration"] = cal_json;
    vo.report["fit"] = fit_json(fit, fixed);
    vo.report["validation"] = val_json;
    vo.csv.emplace_back("tail.csv", csv_text.str());
    vo.plots.push_back({"tail.csv", "t", {"empirical", "ci_high", "bound"}, true});
    return vo;
}

/// Moment experiment: fit the moment-bound constant on calibration kernels and
/// require every held-out kernel to satisfy the bound at that constant.
inline VerifyOutcome verify_moment(const GlobalOptions& g, const Json& cfg, const std::filesystem::path& base) {
    io::detail::check_fields(cfg, "config", {"schemaVersion", "experiment", "pList", "validation"},
                             {"calibration", "constant", "mode", "allowNoncanonical"});
    const auto nc = norm_config(g);
    const auto p_list = io::detail::get_numbers(cfg["pList"], "config.pList");
    const bool allow = cfg.value("allowNoncanonical", false);
    ExpectationMode mode = ExpectationMode::exact(g.budget);
    std::size_t lhs_samples = 100000;
    if (cfg.contains("mode")) {
        const auto& m = cfg["mode"];
        io::detail::check_fields(m, "config.mode", {"kind"}, {"samples"});
        const auto kind = m["kind"].is_string() ? m["kind"].get<std::string>() : "";
        if (m.contains("samples")) {
            lhs_samples = io::detail::get_count(m["samples"], "config.mode.samples");
        }
        if (kind == "montecarlo") {
            mode = ExpectationMode::montecarlo(lhs_samples, g.seed, g.budget);
        } else if (kind != "exact") {
            throw SchemaError("config.mode.kind: expected exact or montecarlo");
        }
    }
    VerifyOutcome vo;
    std::ostringstream csv_text;
    io::CsvWriter csv(csv_text, {"phase", "kernel", "p", "lhs", "lhs_se", "rhs_unit", "ratio"});

    auto run_phase = [&](const Json& phase, const std::string& name, std::vector<FitInstance>& instances,
                         Json& out_json) {
        io::detail::check_fields(phase, "config." + name, {"kernels"});
        if (!phase["kernels"].is_array()) {
            throw SchemaError("config." + name + ".kernels: expected an array of paths");
        }
        for (std::size_t k = 0; k < phase["kernels"].size(); ++k) {
            const auto path = resolve(base, phase["kernels"][k], "config." + name + ".kernels");
            const auto doc = io::kernel_from_json(io::read_json_file(path));
            if (auto w = check_canonical(doc.ensemble, allow)) {
                vo.warnings.push_back(path.filename().string() + ": " + *w);
            }
            const auto ver = verify_moment_bound(doc.ensemble, p_list, 1.0, mode, derive_seed(g.seed, k),
                                                 lhs_samples, nc);
            Json rows = Json::array();
            for (const auto& row : ver.rows) {
                instances.push_back({row.lhs, row.rhs_unit});
                csv.row({name, path.filename().string(), io::csv_number(row.p), io::csv_number(row.lhs),
                         io::csv_number(row.lhs_se), io::csv_number(row.rhs_unit), io::csv_number(row.ratio)});
                rows.push_back({{"p", io::number(row.p)},
                                {"lhs", io::number(row.lhs)},
                                {"lhsExact", row.lhs_exact},
                                {"rhsUnit", io::number(row.rhs_unit)},
                                {"ratio", io::number(row.ratio)}});
            }
            out_json.push_back({{"kernel", path.filename().string()}, {"rows", rows}});
        }
    };

    std::vector<FitInstance> cal_instances;
    Json cal_json = Json::array();
    if (cfg.contains("calibration")) {
        run_phase(cfg["calibration"], "calibration", cal_instances, cal_json);
    } else if (!cfg.contains("constant")) {
        throw SchemaError("config: give either calibration or constant");
    }
    bool fixed = false;
    auto fit = fixed_or_fitted(cfg, cal_instances, fixed);
    std::vector<FitInstance> val_instances;
    Json val_json = Json::array();
    run_phase(cfg["validation"], "validation", val_instances, val_json);
    vo.pass = validate_constant(fit, val_instances);
    vo.report["experiment"] = "moment";
    vo.report["theorem"] = "6";
    vo.report["calibration"] = cal_json;
    vo.report["fit"] = fit_json(fit, fixed);
    vo.report["validation"] = val_json;
    vo.csv.emplace_back("moment.csv", csv_text.str());
    vo.plots.push_back({"moment.csv", "p", {"ratio"}, false});
    return vo;
}

/// Threshold experiment for multiple Poisson integrals.
inline VerifyOutcome verify_poisson(const GlobalOptions& g, const Json& cfg, const std::filesystem::path& base) {
    io::detail::check_fields(cfg, "config", {"schemaVersion", "experiment", "stepkernel", "pGrid", "validation"},
                             {"process", "rate", "calibration", "constant"});
    const auto nc = norm_config(g);
    const auto h = io::stepkernel_from_json(io::read_json_file(resolve(base, cfg["stepkernel"], "config.stepkernel")));
    const double rate = cfg.contains("rate") ? io::detail::get_number(cfg["rate"], "config.rate") : 1.0;
    const auto spec = cfg.contains("process")
                          ? load_process(h, resolve(base, cfg["process"], "config.process").string(), rate)
                          : ProcessSpec::homogeneous_poisson(h, rate);
    const auto p_grid = io::detail::get_numbers(cfg["pGrid"], "config.pGrid");
    const auto table = step_tail_table(h, spec, NormMethod::automatic, nc);
    VerifyOutcome vo;
    std::vector<FitInstance> instances;
    if (cfg.contains("calibration")) {
        const auto& cal = cfg["calibration"];
        io::detail::check_fields(cal, "config.calibration", {"seed", "N"});
        SampleRequest req;
        req.threads = g.threads;
        req.keep_samples = true;
        const auto run = sample_multiple_integral(h, spec, io::detail::get_count(cal["seed"], "config.calibration.seed"),
                                                  io::detail::get_count(cal["N"], "config.calibration.N"), req);
        instances = theorem8_fit_instances(table, run, p_grid);
    } else if (!cfg.contains("constant")) {
        throw SchemaError("config: give either calibration or constant");
    }
    bool fixed = false;
    const auto fit = fixed_or_fitted(cfg, instances, fixed);
    const auto& val = cfg["validation"];
    io::detail::check_fields(val, "config.validation", {"seed", "N"});
    const auto ver = verify_theorem8(table, h, spec, fit.constant,
                                     io::detail::get_count(val["seed"], "config.validation.seed"),
                                     io::detail::get_count(val["N"], "config.validation.N"), p_grid, g.threads);
    std::ostringstream csv_text;
    io::CsvWriter csv(csv_text, {"p", "threshold", "level", "count", "empirical", "ci_low", "ci_high", "status"});
    Json rows = Json::array();
    for (const auto& row : ver.rows) {
        csv.row({io::csv_number(row.p), io::csv_number(row.threshold), io::csv_number(row.level),
                 std::to_string(row.count), io::csv_number(row.empirical), io::csv_number(row.ci_low),
                 io::csv_number(row.ci_high), to_string(row.status)});
        rows.push_back({{"p", io::number(row.p)},
                        {"threshold", io::number(row.threshold)},
                        {"level", io::number(row.level)},
                        {"count", row.count},
                        {"empirical", io::number(row.empirical)},
                        {"ciHigh", io::number(row.ci_high)},
                        {"status", to_string(row.status)}});
    }
    if (ver.unresolvable > 0) {
        vo.warnings.push_back(std::to_string(ver.unresolvable) + " levels e^-p are below 20/N and are unresolvable");
    }
    vo.pass = ver.pass;
    vo.report["experiment"] = "theorem8";
    vo.report["theorem"] = "8";
    vo.report["fit"] = fit_json(fit, fixed);
    vo.report["validation"] = rows;
    vo.csv.emplace_back("theorem8.csv", csv_text.str());
    vo.plots.push_back({"theorem8.csv", "p", {"empirical", "ci_high", "level"}, true});
    return vo;
}

inline VerifyOutcome run_verify(const GlobalOptions& g, const std::string& config_file) {
    const auto cfg = io::read_json_file(config_file);
    io::detail::require_object(cfg, "config");
    if (!cfg.contains("schemaVersion") || !cfg["schemaVersion"].is_number_integer() ||
        cfg["schemaVersion"].get<int>() != 1) {
        throw SchemaError("config: schemaVersion must be 1");
    }
    if (!cfg.contains("experiment") || !cfg["experiment"].is_string()) {
        throw SchemaError("config: missing field \"experiment\"");
    }
    const auto base = std::filesystem::path(config_file).parent_path();
    const auto kind = cfg["experiment"].get<std::string>();
    VerifyOutcome vo;
    if (kind == "tail") {
        vo = verify_tail(g, cfg, base);
    } else if (kind == "moment") {
        vo = verify_moment(g, cfg, base);
    } else if (kind == "theorem8") {
        vo = verify_poisson(g, cfg, base);
    } else {
        throw SchemaError("config.experiment: expected tail, moment or theorem8");
    }
    vo.report["seed"] = g.seed;
    vo.report["pass"] = vo.pass;
    vo.report["warnings"] = vo.warnings;
    return vo;
}

inline int cmd_verify(const GlobalOptions& g, const std::string& config_file, const std::string& out_dir,
                      std::ostream& out, std::ostream& err) {
    const auto vo = run_verify(g, config_file);
    if (!out_dir.empty()) {
        const std::filesystem::path dir = out_dir;
        for (const auto& [name, text] : vo.csv) {
            write_text(dir / name, text);
        }
        Json manifest;
        Json plots = Json::array();
        for (const auto& p : vo.plots) {
            plots.push_back({{"csv", p.csv}, {"x", p.x}, {"y", p.y}, {"logY", p.log_y}});
        }
        manifest["plots"] = plots;
        write_text(dir / "plots.json", manifest.dump(2) + "\n");
        write_text(dir / "report.json", vo.report.dump(2) + "\n");
    }
    for (const auto& w : vo.warnings) {
        err << "warning: " << w << '\n';
    }
    out << vo.report.dump(2) << '\n';
    return vo.pass ? exit_pass : exit_verify_failed;
}

} // namespace detail

/// Runs the command line in `args` (without the program name).
inline int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Partition norms, moment and tail bounds for canonical U-statistics and chaoses"};
    app.name("ustat");
    app.require_subcommand(1);
    app.fallthrough();
    GlobalOptions g;
    app.add_option("--seed", g.seed, "Random seed");
    app.add_option("--threads", g.threads, "Worker threads")->check(CLI::PositiveNumber);
    app.add_option("--budget", g.budget, "Enumeration budget (states)")->check(CLI::PositiveNumber);

    std::string file;
    std::string spec;
    std::string method = "auto";
    auto* norm = app.add_subcommand("norm", "Partition norm of an array");
    norm->add_option("array", file, "Array JSON file")->required();
    norm->add_option("partition", spec, "Partition such as {1,3}|{2}")->required();
    norm->add_option("--method", method, "exact2, alternating, oracle or auto");

    std::string out_file;
    auto* canon = app.add_subcommand("canonicalize", "Apply prod_j (Id - E_j) to a kernel");
    canon->add_option("kernel", file, "Kernel JSON file")->required();
    canon->add_option("--out", out_file, "Write the canonical kernel here");

    detail::BoundArgs ba;
    int range = 0;
    auto* bound = app.add_subcommand("bound", "Evaluate a moment or tail bound");
    bound->add_option("kernel", ba.kernel, "Kernel (or step kernel for theorem 8) JSON file")->required();
    bound->add_option("--theorem", ba.theorem, "6, 7, cor3 or 8")->required();
    bound->add_option("--p", ba.p, "Moment orders / threshold parameters")->delimiter(',');
    bound->add_option("--t", ba.t, "Tail levels")->delimiter(',');
    bound->add_option("--constant", ba.constant, "Multiplicative constant")->check(CLI::PositiveNumber);
    bound->add_option("--mode", ba.mode, "exact or montecarlo")->check(CLI::IsMember({"exact", "montecarlo"}));
    bound->add_option("--samples", ba.samples, "Monte Carlo samples per expectation");
    bound->add_option("--n", range, "Index range for cor3 (defaults to the file's n)")->check(CLI::PositiveNumber);
    bound->add_option("--process", ba.process, "Process spec JSON (theorem 8)");
    bound->add_option("--rate", ba.rate, "Poisson rate when no process file is given");
    bound->add_flag("--allow-noncanonical", ba.allow_noncanonical, "Evaluate non-canonical kernels");
    bound->add_option("--csv", ba.csv, "Write a CSV summary here");
    bound->add_option("--terms-csv", ba.terms_csv, "Write one CSV row per term here");

    std::string config;
    std::string out_dir;
    auto* verify = app.add_subcommand("verify", "Run a calibration and validation experiment");
    verify->add_option("config", config, "Experiment config JSON")->required();
    verify->add_option("--out-dir", out_dir, "Directory for CSV, plot manifest and report");

    detail::PoissonArgs pa;
    auto* poisson = app.add_subcommand("poisson", "Norms and threshold bounds of a step kernel");
    poisson->add_option("stepkernel", pa.stepkernel, "Step kernel JSON file")->required();
    poisson->add_option("--process", pa.process, "Process spec JSON");
    poisson->add_option("--rate", pa.rate, "Poisson rate when no process file is given");
    poisson->add_option("--p", pa.p, "Threshold parameters")->delimiter(',');
    poisson->add_option("--t", pa.t, "Tail levels")->delimiter(',');
    poisson->add_option("--constant", pa.constant, "Multiplicative constant")->check(CLI::PositiveNumber);
    poisson->add_option("--samples", pa.samples, "Simulate this many realizations");

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return exit_pass;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return exit_pass;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << '\n';
        return exit_input_error;
    }
    if (range > 0) {
        ba.range = range;
    }
    try {
        if (norm->parsed()) {
            return detail::cmd_norm(g, file, spec, method, out);
        }
        if (canon->parsed()) {
            return detail::cmd_canonicalize(file, out_file, out);
        }
        if (bound->parsed()) {
            return detail::cmd_bound(g, ba, out);
        }
        if (verify->parsed()) {
            return detail::cmd_verify(g, config, out_dir, out, err);
        }
        if (poisson->parsed()) {
            return detail::cmd_poisson(g, pa, out);
        }
    } catch (const NotCanonical& e) {
        err << "error: " << e.what() << '\n';
        return exit_not_canonical;
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return exit_input_error;
    } catch (const nlohmann::json::exception& e) {
        err << "error: " << e.what() << '\n';
        return exit_input_error;
    } catch (const std::filesystem::filesystem_error& e) {
        err << "error: " << e.what() << '\n';
        return exit_input_error;
    }
    return exit_input_error;
}

} // namespace ustat::cli
