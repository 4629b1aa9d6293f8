#pragma once

#include "ustat/array.hpp"
#include "ustat/bounds.hpp"
#include "ustat/error.hpp"
#include "ustat/kernel.hpp"
#include "ustat/montecarlo.hpp"
#include "ustat/norms.hpp"
#include "ustat/partition.hpp"
#include "ustat/poisson.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <initializer_list>
#include <iomanip>
#include <limits>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

namespace ustat::io {

using Json = nlohmann::ordered_json;

/// Parses JSON text; syntax errors become SchemaError.
inline Json parse_json(const std::string& text, const std::string& what = "input") {
    try {
        return Json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw SchemaError(what + ": " + e.what());
    }
}

inline Json read_json_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw SchemaError("cannot open " + path);
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_json(buf.str(), path);
}

namespace detail {

inline void require_object(const Json& j, const std::string& ctx) {
    if (!j.is_object()) {
        throw SchemaError(ctx + ": expected an object");
    }
}

/// Rejects unknown fields and missing required ones.
inline void check_fields(const Json& j, const std::string& ctx, std::initializer_list<const char*> required,
                         std::initializer_list<const char*> optional = {}) {
    require_object(j, ctx);
    for (auto it = j.begin(); it != j.end(); ++it) {
        bool known = false;
        for (const char* k : required) {
            known = known || it.key() == k;
        }
        for (const char* k : optional) {
            known = known || it.key() == k;
        }
        if (!known) {
            throw SchemaError(ctx + ": unknown field \"" + it.key() + "\"");
        }
    }
    for (const char* k : required) {
        if (!j.contains(k)) {
            throw SchemaError(ctx + ": missing field \"" + std::string(k) + "\"");
        }
    }
}

inline double get_number(const Json& j, const std::string& ctx) {
    if (!j.is_number()) {
        throw SchemaError(ctx + ": expected a number");
    }
    return j.get<double>();
}

inline long long get_integer(const Json& j, const std::string& ctx) {
    if (!j.is_number_integer()) {
        throw SchemaError(ctx + ": expected an integer");
    }
    return j.get<long long>();
}

inline std::size_t get_count(const Json& j, const std::string& ctx) {
    const auto v = get_integer(j, ctx);
    if (v < 0) {
        throw SchemaError(ctx + ": expected a nonnegative integer");
    }
    return static_cast<std::size_t>(v);
}

inline std::vector<double> get_numbers(const Json& j, const std::string& ctx) {
    if (!j.is_array()) {
        throw SchemaError(ctx + ": expected an array of numbers");
    }
    std::vector<double> out;
    for (std::size_t k = 0; k < j.size(); ++k) {
        out.push_back(get_number(j[k], ctx + "[" + std::to_string(k) + "]"));
    }
    return out;
}

inline std::vector<std::size_t> get_counts(const Json& j, const std::string& ctx) {
    if (!j.is_array()) {
        throw SchemaError(ctx + ": expected an array of integers");
    }
    std::vector<std::size_t> out;
    for (std::size_t k = 0; k < j.size(); ++k) {
        out.push_back(get_count(j[k], ctx + "[" + std::to_string(k) + "]"));
    }
    return out;
}

inline std::vector<std::vector<double>> get_number_rows(const Json& j, const std::string& ctx) {
    if (!j.is_array()) {
        throw SchemaError(ctx + ": expected an array of arrays");
    }
    std::vector<std::vector<double>> out;
    for (std::size_t k = 0; k < j.size(); ++k) {
        out.push_back(get_numbers(j[k], ctx + "[" + std::to_string(k) + "]"));
    }
    return out;
}

} // namespace detail

/// Finite numbers as-is, infinities and NaN as null.
inline Json number(double v) {
    if (std::isfinite(v)) {
        return v;
    }
    return nullptr;
}

inline Json numbers(const std::vector<double>& v) {
    Json out = Json::array();
    for (double x : v) {
        out.push_back(number(x));
    }
    return out;
}

// ---- arrays ----------------------------------------------------------------

/// {"order"?, "shape": [...], "values": [...]} with values row-major.
inline MultiIndexArray array_from_json(const Json& j) {
    detail::check_fields(j, "array", {"shape", "values"}, {"order"});
    auto shape = detail::get_counts(j["shape"], "array.shape");
    if (j.contains("order") && detail::get_count(j["order"], "array.order") != shape.size()) {
        throw SchemaError("array.order does not match the length of array.shape");
    }
    try {
        return {std::move(shape), detail::get_numbers(j["values"], "array.values")};
    } catch (const Error& e) {
        throw SchemaError(std::string("array: ") + e.what());
    }
}

inline Json to_json(const MultiIndexArray& a) {
    Json j;
    j["order"] = a.order();
    j["shape"] = a.shape();
    j["values"] = numbers({a.values().begin(), a.values().end()});
    return j;
}

inline const char* to_string(NormMethod m) {
    switch (m) {
    case NormMethod::exact2:
        return "exact2";
    case NormMethod::alternating:
        return "alternating";
    case NormMethod::oracle:
        return "oracle";
    case NormMethod::automatic:
        return "auto";
    }
    return "?";
}

inline NormMethod parse_norm_method(const std::string& s) {
    if (s == "exact2") {
        return NormMethod::exact2;
    }
    if (s == "alternating") {
        return NormMethod::alternating;
    }
    if (s == "oracle") {
        return NormMethod::oracle;
    }
    if (s == "auto") {
        return NormMethod::automatic;
    }
    throw SchemaError("unknown norm method \"" + s + "\" (expected exact2, alternating, oracle or auto)");
}

inline Json to_json(const NormCertificate& c, const Partition& partition, NormMethod method) {
    Json j;
    j["partition"] = partition.to_string();
    j["method"] = to_string(method);
    j["value"] = number(c.value);
    Json w = Json::array();
    for (const auto& v : c.witnesses) {
        w.push_back(numbers(v));
    }
    j["witnesses"] = w;
    j["converged"] = c.converged;
    j["iterations"] = c.iterations;
    j["degenerate"] = c.degenerate;
    return j;
}

// ---- kernels ---------------------------------------------------------------

inline DiscreteSpace space_from_json(const Json& j, const std::string& ctx) {
    detail::check_fields(j, ctx, {"atoms", "probs"});
    DiscreteSpace s{detail::get_numbers(j["atoms"], ctx + ".atoms"), detail::get_numbers(j["probs"], ctx + ".probs")};
    s.validate();
    return s;
}

inline Json to_json(const DiscreteSpace& s) {
    Json j;
    j["atoms"] = numbers(s.atoms);
    j["probs"] = numbers(s.probs);
    return j;
}

/// A kernel file: always the ensemble, plus the shared kernel when the file
/// uses the compact form.
struct KernelDocument {
    KernelEnsemble ensemble;
    std::optional<SharedKernel> shared;
};

/// Full form {d, n, spaces, spaceIndex?, table} with spaceIndex[j][i], or
/// compact form {d, n, space, kernelTable} for one kernel shared by all i.
inline KernelDocument kernel_from_json(const Json& j) {
    detail::require_object(j, "kernel");
    try {
        if (j.contains("kernelTable")) {
            detail::check_fields(j, "kernel", {"d", "n", "space", "kernelTable"});
        } else {
            detail::check_fields(j, "kernel", {"d", "n", "spaces", "table"}, {"spaceIndex"});
        }
        const int d = static_cast<int>(detail::get_integer(j["d"], "kernel.d"));
        const int n = static_cast<int>(detail::get_integer(j["n"], "kernel.n"));
        if (j.contains("kernelTable")) {
            SharedKernel h{d, space_from_json(j["space"], "kernel.space"),
                           detail::get_numbers(j["kernelTable"], "kernel.kernelTable")};
            if (d < 1 || d >= AxisSet::max_axes || n < 1) {
                throw DomainError("kernel d must be between 1 and 31 and n at least 1");
            }
            std::size_t cells = 1;
            for (int q = 0; q < d; ++q) {
                cells *= h.space.size();
            }
            if (h.table.size() != cells) {
                throw ShapeError("kernelTable has " + std::to_string(h.table.size()) + " entries, expected " +
                                 std::to_string(cells));
            }
            auto ensemble = h.expand(n);
            return {std::move(ensemble), std::move(h)};
        }
        if (!j["spaces"].is_array()) {
            throw SchemaError("kernel.spaces: expected an array");
        }
        std::vector<DiscreteSpace> spaces;
        for (std::size_t k = 0; k < j["spaces"].size(); ++k) {
            spaces.push_back(space_from_json(j["spaces"][k], "kernel.spaces[" + std::to_string(k) + "]"));
        }
        std::vector<std::size_t> index;
        if (j.contains("spaceIndex")) {
            const auto& si = j["spaceIndex"];
            if (!si.is_array() || si.size() != static_cast<std::size_t>(std::max(d, 0))) {
                throw SchemaError("kernel.spaceIndex: expected one row per axis");
            }
            for (std::size_t q = 0; q < si.size(); ++q) {
                const auto row = detail::get_counts(si[q], "kernel.spaceIndex[" + std::to_string(q) + "]");
                if (row.size() != static_cast<std::size_t>(std::max(n, 0))) {
                    throw SchemaError("kernel.spaceIndex[" + std::to_string(q) + "]: expected n entries");
                }
                index.insert(index.end(), row.begin(), row.end());
            }
        }
        return {KernelEnsemble(d, n, std::move(spaces), std::move(index),
                               detail::get_numbers(j["table"], "kernel.table")),
                std::nullopt};
    } catch (const SchemaError&) {
        throw;
    } catch (const Error& e) {
        throw SchemaError(std::string("kernel: ") + e.what());
    }
}

inline Json to_json(const KernelEnsemble& k) {
    Json j;
    j["d"] = k.order();
    j["n"] = k.range();
    Json spaces = Json::array();
    for (const auto& s : k.spaces()) {
        spaces.push_back(to_json(s));
    }
    j["spaces"] = spaces;
    Json index = Json::array();
    for (int q = 0; q < k.order(); ++q) {
        Json row = Json::array();
        for (int i = 0; i < k.range(); ++i) {
            row.push_back(k.space_index(q, static_cast<std::size_t>(i)));
        }
        index.push_back(row);
    }
    j["spaceIndex"] = index;
    j["table"] = numbers({k.table().begin(), k.table().end()});
    return j;
}

// ---- step kernels and processes ---------------------------------------------

/// {d, grids, coefficients} with coefficients row-major over the cells.
inline StepKernel stepkernel_from_json(const Json& j) {
    detail::check_fields(j, "stepkernel", {"d", "grids", "coefficients"});
    try {
        const auto d = detail::get_count(j["d"], "stepkernel.d");
        auto grids = detail::get_number_rows(j["grids"], "stepkernel.grids");
        if (grids.size() != d) {
            throw SchemaError("stepkernel.grids: expected d grids");
        }
        std::vector<std::size_t> shape;
        for (const auto& g : grids) {
            shape.push_back(g.empty() ? 0 : g.size() - 1);
        }
        return {std::move(grids),
                MultiIndexArray(std::move(shape), detail::get_numbers(j["coefficients"], "stepkernel.coefficients"))};
    } catch (const SchemaError&) {
        throw;
    } catch (const Error& e) {
        throw SchemaError(std::string("stepkernel: ") + e.what());
    }
}

inline Json to_json(const StepKernel& h) {
    Json j;
    j["d"] = h.order();
    Json grids = Json::array();
    for (const auto& g : h.grids()) {
        grids.push_back(numbers(g));
    }
    j["grids"] = grids;
    const auto v = h.coefficients().values();
    j["coefficients"] = numbers({v.begin(), v.end()});
    return j;
}

/// {kind, perAxis: {lambdaIncrements, varianceIncrements}}; a Poisson spec may
/// omit varianceIncrements (they equal the mean increments).
inline ProcessSpec process_from_json(const Json& j) {
    detail::check_fields(j, "process", {"kind", "perAxis"});
    ProcessSpec spec;
    if (!j["kind"].is_string()) {
        throw SchemaError("process.kind: expected a string");
    }
    const auto kind = j["kind"].get<std::string>();
    if (kind == "poisson") {
        spec.kind = ProcessKind::poisson;
    } else if (kind == "independent-increments") {
        spec.kind = ProcessKind::independent_increments;
    } else {
        throw SchemaError("process.kind: unknown kind \"" + kind + "\"");
    }
    const auto& per = j["perAxis"];
    if (spec.kind == ProcessKind::poisson) {
        detail::check_fields(per, "process.perAxis", {"lambdaIncrements"}, {"varianceIncrements"});
    } else {
        detail::check_fields(per, "process.perAxis", {"lambdaIncrements", "varianceIncrements"});
    }
    spec.lambda_increments = detail::get_number_rows(per["lambdaIncrements"], "process.perAxis.lambdaIncrements");
    spec.variance_increments =
        per.contains("varianceIncrements")
            ? detail::get_number_rows(per["varianceIncrements"], "process.perAxis.varianceIncrements")
            : spec.lambda_increments;
    return spec;
}

inline Json to_json(const ProcessSpec& s) {
    Json j;
    j["kind"] = to_string(s.kind);
    Json per;
    Json lam = Json::array();
    for (const auto& v : s.lambda_increments) {
        lam.push_back(numbers(v));
    }
    Json var = Json::array();
    for (const auto& v : s.variance_increments) {
        var.push_back(numbers(v));
    }
    per["lambdaIncrements"] = lam;
    per["varianceIncrements"] = var;
    j["perAxis"] = per;
    return j;
}

// ---- reports -----------------------------------------------------------------

inline Json to_json(const BoundReport& r) {
    Json j;
    j["theorem"] = r.theorem;
    j[r.parameter_name.empty() ? "parameter" : r.parameter_name] = number(r.parameter);
    j["constant"] = number(r.constant);
    j["total"] = number(r.total);
    j["exponent"] = number(r.exponent);
    j["probability"] = number(r.probability);
    j["exact"] = r.exact;
    if (r.dominant) {
        const auto& t = r.terms[*r.dominant];
        j["dominant"] = {{"I", t.subset.to_string()}, {"J", t.partition.to_string()}};
    } else {
        j["dominant"] = nullptr;
    }
    Json terms = Json::array();
    for (const auto& t : r.terms) {
        Json tj;
        tj["I"] = t.subset.to_string();
        tj["J"] = t.partition.to_string();
        tj["pExponent"] = number(t.p_exponent);
        tj["norm"] = number(t.norm_value);
        tj["term"] = number(t.term_value);
        tj["stdError"] = number(t.std_error);
        tj["active"] = t.active;
        terms.push_back(tj);
    }
    j["terms"] = terms;
    j["warnings"] = r.warnings;
    return j;
}

inline Json to_json(const SampleRun& r) {
    Json j;
    j["seed"] = r.seed;
    j["N"] = r.count;
    j["mean"] = number(r.mean);
    j["meanStdError"] = number(r.mean_se);
    j["secondMoment"] = number(r.second_moment);
    j["secondMomentStdError"] = number(r.second_moment_se);
    j["maxAbs"] = number(r.max_abs);
    Json moments = Json::array();
    for (std::size_t k = 0; k < r.p_list.size(); ++k) {
        moments.push_back({{"p", number(r.p_list[k])},
                           {"moment", number(r.moments[k])},
                           {"stdError", number(r.moment_se[k])}});
    }
    j["moments"] = moments;
    Json tails = Json::array();
    for (std::size_t k = 0; k < r.t_grid.size(); ++k) {
        tails.push_back({{"t", number(r.t_grid[k])}, {"countGe", r.tail_ge[k]}, {"countGt", r.tail_gt[k]}});
    }
    j["tails"] = tails;
    if (!r.samples.empty()) {
        j["samples"] = numbers(r.samples);
    }
    return j;
}

inline Json to_json(const std::vector<LawAtom>& law) {
    Json j = Json::array();
    for (const auto& a : law) {
        j.push_back({{"value", number(a.value)}, {"probability", number(a.probability)}});
    }
    return j;
}

// ---- CSV ---------------------------------------------------------------------

/// Shortest round-trip decimal form; "inf", "-inf" or "nan" otherwise.
inline std::string csv_number(double v) {
    if (std::isnan(v)) {
        return "nan";
    }
    if (std::isinf(v)) {
        return v > 0 ? "inf" : "-inf";
    }
    return number(v).dump();
}

class CsvWriter {
public:
    CsvWriter(std::ostream& out, const std::vector<std::string>& header) : out_(out) { row(header); }

    void row(const std::vector<std::string>& cells) {
        for (std::size_t k = 0; k < cells.size(); ++k) {
            out_ << (k ? "," : "") << quote(cells[k]);
        }
        out_ << '\n';
    }

private:
    static std::string quote(const std::string& s) {
        if (s.find_first_of(",\"\n") == std::string::npos) {
            return s;
        }
        std::string q = "\"";
        for (char c : s) {
            q += c;
            if (c == '"') {
                q += '"';
            }
        }
        return q + "\"";
    }

    std::ostream& out_;
};

/// One row per (report, term).
inline std::string terms_csv(const std::vector<BoundReport>& reports) {
    std::ostringstream out;
    CsvWriter csv(out, {"theorem", "parameter", "value", "I", "J", "p_exponent", "norm", "term", "active",
                        "dominant"});
    for (const auto& r : reports) {
        for (std::size_t k = 0; k < r.terms.size(); ++k) {
            const auto& t = r.terms[k];
            csv.row({r.theorem, r.parameter_name, csv_number(r.parameter), t.subset.to_string(),
                     t.partition.to_string(), csv_number(t.p_exponent), csv_number(t.norm_value),
                     csv_number(t.term_value), t.active ? "1" : "0", r.dominant == k ? "1" : "0"});
        }
    }
    return out.str();
}

} // namespace ustat::io
