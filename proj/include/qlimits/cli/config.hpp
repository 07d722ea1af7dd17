#pragma once

// Experiment configuration: TOML (or JSON) to a validated ExperimentConfig.
// Every value read, defaults included, is echoed into `resolved`, which is the
// canonical scientific config that gets hashed. Keys nobody reads are errors.

#include <toml.hpp>

#include <cstdint>
#include <filesystem>
#include <limits>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "qlimits/cli/io.hpp"
#include "qlimits/errors.hpp"
#include "qlimits/hilbert.hpp"
#include "qlimits/measurement.hpp"
#include "qlimits/peres.hpp"

namespace qlimits::cli {

class ConfigError : public InputError {
public:
    using InputError::InputError;
};

enum class Experiment { truncate_sweep, readout, fidelity, peres_condition, peres_echo, speed_limit };

inline const std::vector<std::pair<Experiment, std::string>>& experiment_names() {
    static const std::vector<std::pair<Experiment, std::string>> names{
        {Experiment::truncate_sweep, "truncate-sweep"}, {Experiment::readout, "readout"},
        {Experiment::fidelity, "fidelity"},             {Experiment::peres_condition, "peres-condition"},
        {Experiment::peres_echo, "peres-echo"},         {Experiment::speed_limit, "speed-limit"},
    };
    return names;
}

inline std::string to_string(Experiment e) {
    for (const auto& [kind, name] : experiment_names())
        if (kind == e) return name;
    return "?";
}

inline Experiment parse_experiment(const std::string& name) {
    for (const auto& [kind, n] : experiment_names())
        if (n == name) return kind;
    throw ConfigError("unknown experiment '" + name + "'");
}

/// Reads one JSON object, tracking which keys were consumed and echoing the
/// values (with defaults filled in) into a parallel object.
class Reader {
public:
    Reader(const Json& node, std::string path, Json& echo) : node_(&node), path_(std::move(path)), echo_(&echo) {
        if (!node_->is_object()) fail("", "expected a table");
        if (!echo_->is_object()) *echo_ = Json::object();
    }

    [[nodiscard]] bool has(const std::string& key) const { return node_->contains(key); }

    double number(const std::string& key, std::optional<double> fallback = std::nullopt) {
        const Json* v = lookup(key, fallback.has_value());
        double out = fallback.value_or(0.0);
        if (v != nullptr) {
            if (!v->is_number()) fail(key, "expected a number");
            out = v->get<double>();
        }
        if (!std::isfinite(out)) fail(key, "must be finite");
        (*echo_)[key] = out;
        return out;
    }

    std::int64_t integer(const std::string& key, std::optional<std::int64_t> fallback = std::nullopt) {
        const Json* v = lookup(key, fallback.has_value());
        std::int64_t out = fallback.value_or(0);
        if (v != nullptr) {
            if (v->is_number_unsigned()) {
                if (v->get<std::uint64_t>() > static_cast<std::uint64_t>(INT64_MAX)) fail(key, "integer too large");
                out = static_cast<std::int64_t>(v->get<std::uint64_t>());
            } else if (v->is_number_integer()) {
                out = v->get<std::int64_t>();
            } else {
                fail(key, "expected an integer");
            }
        }
        (*echo_)[key] = out;
        return out;
    }

    std::uint64_t unsigned_integer(const std::string& key, std::uint64_t fallback) {
        const Json* v = lookup(key, true);
        std::uint64_t out = fallback;
        if (v != nullptr) {
            if (v->is_number_unsigned()) out = v->get<std::uint64_t>();
            else if (v->is_number_integer() && v->get<std::int64_t>() >= 0)
                out = static_cast<std::uint64_t>(v->get<std::int64_t>());
            else fail(key, "expected a non-negative integer");
        }
        (*echo_)[key] = out;
        return out;
    }

    bool boolean(const std::string& key, bool fallback) {
        const Json* v = lookup(key, true);
        bool out = fallback;
        if (v != nullptr) {
            if (!v->is_boolean()) fail(key, "expected true or false");
            out = v->get<bool>();
        }
        (*echo_)[key] = out;
        return out;
    }

    std::string choice(const std::string& key, const std::string& fallback, const std::vector<std::string>& allowed) {
        const Json* v = lookup(key, true);
        std::string out = fallback;
        if (v != nullptr) {
            if (!v->is_string()) fail(key, "expected a string");
            out = v->get<std::string>();
        }
        bool ok = false;
        for (const auto& a : allowed) ok = ok || a == out;
        if (!ok) {
            std::string list;
            for (const auto& a : allowed) list += (list.empty() ? "" : ", ") + a;
            fail(key, "must be one of {" + list + "} (got '" + out + "')");
        }
        (*echo_)[key] = out;
        return out;
    }

    std::vector<double> numbers(const std::string& key) {
        const Json* v = lookup(key, false);
        if (!v->is_array()) fail(key, "expected an array of numbers");
        std::vector<double> out;
        for (const auto& x : *v) {
            if (!x.is_number()) fail(key, "expected an array of numbers");
            out.push_back(x.get<double>());
            if (!std::isfinite(out.back())) fail(key, "entries must be finite");
        }
        (*echo_)[key] = out;
        return out;
    }

    std::vector<std::vector<double>> matrix(const std::string& key) {
        const Json* v = lookup(key, false);
        if (!v->is_array()) fail(key, "expected an array of rows");
        std::vector<std::vector<double>> out;
        for (const auto& row : *v) {
            if (!row.is_array()) fail(key, "expected an array of rows");
            std::vector<double> r;
            for (const auto& x : row) {
                if (!x.is_number()) fail(key, "entries must be numbers");
                r.push_back(x.get<double>());
                if (!std::isfinite(r.back())) fail(key, "entries must be finite");
            }
            if (!out.empty() && r.size() != out.front().size()) fail(key, "rows have different lengths");
            out.push_back(std::move(r));
        }
        (*echo_)[key] = out;
        return out;
    }

    /// Sub-table; a missing key reads as an empty table so defaults apply.
    Reader section(const std::string& key) {
        used_.insert(key);
        static const Json empty = Json::object();
        const Json* child = node_->contains(key) ? &node_->at(key) : &empty;
        if (!child->is_object()) fail(key, "expected a table");
        return Reader(*child, field(key), (*echo_)[key]);
    }

    /// Marks a key as understood without echoing it.
    void skip(const std::string& key) { used_.insert(key); }

    void finish() const {
        for (const auto& [key, value] : node_->items())
            if (!used_.count(key)) fail(key, "unknown field");
    }

    [[noreturn]] void fail(const std::string& key, const std::string& what) const {
        throw ConfigError(field(key) + ": " + what);
    }

    [[nodiscard]] std::string field(const std::string& key) const {
        if (key.empty()) return path_.empty() ? "<root>" : path_;
        return path_.empty() ? key : path_ + "." + key;
    }

private:
    const Json* lookup(const std::string& key, bool optional) {
        used_.insert(key);
        if (!node_->contains(key)) {
            if (!optional) fail(key, "required field is missing");
            return nullptr;
        }
        return &node_->at(key);
    }

    const Json* node_;
    std::string path_;
    Json* echo_;
    std::set<std::string> used_;
};

struct Dims {
    Index D = 0;
    Index N = 0;
    Index N1 = 0;
    std::optional<Index> n;
};

struct GridConfig {
    std::optional<double> t_max;
    std::optional<double> t_max_over_t0;  ///< fidelity only: t_max = factor * t0
    Index steps = 101;
    std::vector<double> points;

    /// Grid for a concrete t_max; `t0` is consulted only for t_max_over_t0.
    [[nodiscard]] TimeGrid build(double t0 = std::numeric_limits<double>::quiet_NaN()) const {
        if (!points.empty()) return TimeGrid::from_points(points);
        if (t_max_over_t0) {
            if (!std::isfinite(t0))
                throw RegimeError("grid.t_max_over_t0: t0 is unbounded (the coupling block of V is zero)");
            return TimeGrid::uniform(*t_max_over_t0 * t0, static_cast<int>(steps));
        }
        return TimeGrid::uniform(*t_max, static_cast<int>(steps));
    }
};

struct Tolerances {
    double epsilon = 1e-3;
    double ceiling = 1e3;
    double plateau = 0.05;
};

/// gue | zero | diagonal | explicit
struct OperatorConfig {
    std::string source = "gue";
    double scale = 1.0;
    RealVector diagonal;
    ComplexMatrix matrix;
};

/// random | basis | explicit
struct StateConfig {
    std::string source = "random";
    Index index = 0;
    ComplexVector amplitudes;
};

struct EnergiesConfig {
    std::string source = "uniform";
    double span = 8.0;
    RealVector values;
};

struct AmplitudesConfig {
    std::string source = "power_law";
    double tail_exponent = 2.0;
    double particle_weight = 0.5;
    bool random_phases = true;
    ComplexVector c;
    ComplexVector d;
};

struct DeviceConfig {
    std::string source = "random";
    Index channels = 3;
    RealMatrix weights;
};

struct EchoConfig {
    std::size_t members = 50;
    double delta = 0.1;
    bool relative = true;  ///< delta is a fraction of ||H||
    EchoOrdering ordering = EchoOrdering::forward_perturbed;
    std::vector<double> ladder;
};

struct ExperimentConfig {
    Experiment kind = Experiment::truncate_sweep;
    std::uint64_t seed = 0;
    bool seed_in_file = false;
    std::string output_dir = "qlimits-out";
    unsigned threads = 1;
    double k_constant = 1.0;
    double hbar = 1.0;
    Dims dims;
    GridConfig grid;
    Tolerances tolerances;
    OperatorConfig hamiltonian;
    OperatorConfig observable;
    OperatorConfig interaction;
    StateConfig state;
    EnergiesConfig energies;
    AmplitudesConfig amplitudes;
    DeviceConfig device;
    EchoConfig echo;
    std::string truncation_basis = "energy";
    CrossTermOrder cross_terms = CrossTermOrder::symmetric;
    Json resolved;  ///< canonical scientific config: every value used, output_dir and threads excluded

    void set_seed(std::uint64_t s) {
        seed = s;
        resolved["seed"] = s;
    }
};

namespace detail {

inline Json toml_to_json(const toml::node& node, const std::string& path) {
    if (const auto* t = node.as_table()) {
        Json out = Json::object();
        for (const auto& [k, v] : *t) out[std::string(k.str())] = toml_to_json(v, path + "." + std::string(k.str()));
        return out;
    }
    if (const auto* a = node.as_array()) {
        Json out = Json::array();
        for (const auto& v : *a) out.push_back(toml_to_json(v, path));
        return out;
    }
    if (const auto* v = node.as_integer()) return Json(v->get());
    if (const auto* v = node.as_floating_point()) return Json(v->get());
    if (const auto* v = node.as_boolean()) return Json(v->get());
    if (const auto* v = node.as_string()) return Json(v->get());
    const auto& src = node.source().begin;
    std::ostringstream os;
    os << "line " << src.line << ", column " << src.column << ": " << (path.empty() ? "<root>" : path.substr(1))
       << ": dates and times are not supported";
    throw ConfigError(os.str());
}

inline std::pair<std::size_t, std::size_t> line_column(const std::string& text, std::size_t byte) {
    std::size_t line = 1, column = 1;
    for (std::size_t k = 0; k < std::min(byte, text.size()); ++k) {
        if (text[k] == '\n') {
            ++line;
            column = 1;
        } else {
            ++column;
        }
    }
    return {line, column};
}

inline void require(bool ok, Reader& r, const std::string& key, const std::string& constraint) {
    if (!ok) r.fail(key, constraint);
}

inline OperatorConfig read_operator(Reader r, Index dim, bool allow_zero_scale = true) {
    OperatorConfig op;
    op.source = r.choice("source", "gue", {"gue", "zero", "diagonal", "explicit"});
    if (op.source == "gue") {
        op.scale = r.number("scale", 1.0);
        require(allow_zero_scale ? op.scale >= 0.0 : op.scale > 0.0, r, "scale",
                allow_zero_scale ? "must be >= 0" : "must be > 0");
    } else if (op.source == "diagonal") {
        const auto v = r.numbers("values");
        require(static_cast<Index>(v.size()) == dim, r, "values", "must have D entries");
        op.diagonal = Eigen::Map<const RealVector>(v.data(), dim);
    } else if (op.source == "explicit") {
        const auto re = r.matrix("real");
        require(static_cast<Index>(re.size()) == dim && !re.empty() && static_cast<Index>(re.front().size()) == dim, r,
                "real", "must be a D x D matrix");
        std::vector<std::vector<double>> im;
        if (r.has("imag")) {
            im = r.matrix("imag");
            require(im.size() == re.size() && !im.empty() && im.front().size() == re.front().size(), r, "imag",
                    "must be a D x D matrix");
        }
        op.matrix.resize(dim, dim);
        for (Index i = 0; i < dim; ++i)
            for (Index j = 0; j < dim; ++j)
                op.matrix(i, j) = Complex(re[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)],
                                          im.empty() ? 0.0 : im[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)]);
        if (qlimits::detail::hermitian_deviation(op.matrix) > kHermitianTolerance) r.fail("real", "matrix is not Hermitian");
    }
    r.finish();
    return op;
}

inline ComplexVector read_complex_vector(Reader& r, const std::string& re_key, const std::string& im_key, Index size) {
    const auto re = r.numbers(re_key);
    require(static_cast<Index>(re.size()) == size, r, re_key, "must have " + std::to_string(size) + " entries");
    std::vector<double> im(re.size(), 0.0);
    if (r.has(im_key)) {
        im = r.numbers(im_key);
        require(im.size() == re.size(), r, im_key, "must have " + std::to_string(size) + " entries");
    }
    ComplexVector out(size);
    for (Index k = 0; k < size; ++k)
        out(k) = Complex(re[static_cast<std::size_t>(k)], im[static_cast<std::size_t>(k)]);
    return out;
}

inline StateConfig read_state(Reader r, Index dim) {
    StateConfig s;
    s.source = r.choice("source", "random", {"random", "basis", "explicit"});
    if (s.source == "basis") {
        s.index = r.integer("index", 0);
        require(s.index >= 0 && s.index < dim, r, "index", "must satisfy 0 <= index < D");
    } else if (s.source == "explicit") {
        s.amplitudes = read_complex_vector(r, "real", "imag", dim);
        require(s.amplitudes.norm() > 0.0, r, "real", "state must be nonzero");
    }
    r.finish();
    return s;
}

inline EnergiesConfig read_energies(Reader r, Index dim) {
    EnergiesConfig e;
    e.source = r.choice("source", "uniform", {"uniform", "explicit"});
    if (e.source == "uniform") {
        e.span = r.number("span", 8.0);
        require(e.span >= 0.0, r, "span", "must be >= 0");
    } else {
        const auto v = r.numbers("values");
        require(static_cast<Index>(v.size()) == dim, r, "values", "must have D entries");
        e.values = Eigen::Map<const RealVector>(v.data(), dim);
    }
    r.finish();
    return e;
}

inline AmplitudesConfig read_amplitudes(Reader r, Index dim, Index n) {
    AmplitudesConfig a;
    a.source = r.choice("source", "power_law", {"power_law", "explicit"});
    if (a.source == "power_law") {
        a.tail_exponent = r.number("tail_exponent", 2.0);
        a.particle_weight = r.number("particle_weight", 0.5);
        require(a.particle_weight > 0.0 && a.particle_weight < 1.0, r, "particle_weight", "must lie in (0, 1)");
        a.random_phases = r.boolean("random_phases", true);
    } else {
        a.c = read_complex_vector(r, "c_real", "c_imag", n);
        a.d = read_complex_vector(r, "d_real", "d_imag", dim - n);
        const double norm2 = a.c.squaredNorm() + a.d.squaredNorm();
        require(std::abs(norm2 - 1.0) <= kModelNormTolerance, r, "c_real",
                "sum |c|^2 + sum |d|^2 must equal 1 (got " + format_double(norm2) + ")");
    }
    r.finish();
    return a;
}

inline DeviceConfig read_device(Reader r, Index dim) {
    DeviceConfig d;
    d.source = r.choice("source", "random", {"random", "uniform", "explicit"});
    if (d.source == "explicit") {
        const auto w = r.matrix("weights");
        require(!w.empty() && static_cast<Index>(w.front().size()) == dim, r, "weights",
                "must be a channels x D matrix");
        d.channels = static_cast<Index>(w.size());
        d.weights.resize(d.channels, dim);
        for (Index a = 0; a < d.channels; ++a)
            for (Index k = 0; k < dim; ++k)
                d.weights(a, k) = w[static_cast<std::size_t>(a)][static_cast<std::size_t>(k)];
        try {
            MeasurementDevice check(d.weights);
        } catch (const InputError& e) {
            r.fail("weights", e.what());
        }
    } else {
        d.channels = r.integer("channels", 3);
        require(d.channels >= 1, r, "channels", "must be >= 1");
    }
    r.finish();
    return d;
}

inline EchoConfig read_echo(Reader r) {
    EchoConfig e;
    const auto members = r.integer("members", 50);
    require(members >= 1, r, "members", "must be >= 1");
    e.members = static_cast<std::size_t>(members);
    e.delta = r.number("delta", 0.1);
    require(e.delta >= 0.0, r, "delta", "must be >= 0");
    e.relative = r.boolean("relative", true);
    const auto ordering = r.choice("ordering", "forward_perturbed", {"forward_perturbed", "forward_nominal"});
    e.ordering = ordering == "forward_nominal" ? EchoOrdering::forward_nominal : EchoOrdering::forward_perturbed;
    if (r.has("ladder")) {
        e.ladder = r.numbers("ladder");
        for (double x : e.ladder) require(x >= 0.0, r, "ladder", "entries must be >= 0");
    }
    r.finish();
    return e;
}

}  // namespace detail

/// Parses TOML or JSON text into the generic tree used for validation.
inline Json parse_config_text(const std::string& text, bool json_format, const std::string& origin = "config") {
    if (json_format) {
        try {
            return Json::parse(text);
        } catch (const Json::parse_error& e) {
            const auto [line, column] = detail::line_column(text, e.byte == 0 ? 0 : e.byte - 1);
            std::ostringstream os;
            os << origin << ": parse error at line " << line << ", column " << column << ": " << e.what();
            throw ConfigError(os.str());
        }
    }
    try {
        const toml::table table = toml::parse(text, origin);
        return detail::toml_to_json(table, "");
    } catch (const toml::parse_error& e) {
        std::ostringstream os;
        os << origin << ": parse error at line " << e.source().begin.line << ", column " << e.source().begin.column
           << ": " << e.description();
        throw ConfigError(os.str());
    }
}

/// Validates the generic tree for experiment `kind`, filling defaults.
inline ExperimentConfig build_config(const Json& tree, Experiment kind) {
    ExperimentConfig cfg;
    cfg.kind = kind;
    Json scratch = Json::object();  // receives values that are not scientific (output_dir, threads)
    Json& resolved = cfg.resolved = Json::object();
    Reader root(tree, "", resolved);
    Reader runtime(tree, "", scratch);

    const std::string declared = root.choice("experiment", to_string(kind),
                                             {"truncate-sweep", "readout", "fidelity", "peres-condition",
                                              "peres-echo", "speed-limit"});
    if (declared != to_string(kind))
        root.fail("experiment", "config declares '" + declared + "' but '" + to_string(kind) + "' was requested");
    cfg.seed_in_file = tree.contains("seed");
    cfg.seed = root.unsigned_integer("seed", 0);
    root.skip("output_dir");
    root.skip("threads");
    if (tree.contains("output_dir")) {
        if (!tree.at("output_dir").is_string()) root.fail("output_dir", "expected a string");
        cfg.output_dir = tree.at("output_dir").get<std::string>();
    }
    const std::int64_t threads = runtime.integer("threads", 1);
    if (threads < 1 || threads > 1024) root.fail("threads", "must lie in [1, 1024]");
    cfg.threads = static_cast<unsigned>(threads);

    const bool truncation = kind == Experiment::truncate_sweep;
    const bool composite = kind == Experiment::readout || kind == Experiment::fidelity ||
                           kind == Experiment::peres_condition;
    const bool needs_h = truncation || kind == Experiment::peres_echo || kind == Experiment::speed_limit;

    // Sections outside this experiment's vocabulary are rejected by name.
    const std::vector<std::pair<std::string, bool>> sections{
        {"hamiltonian", needs_h},
        {"observable", truncation},
        {"state", needs_h},
        {"truncation", truncation},
        {"energies", composite},
        {"amplitudes", composite},
        {"interaction", composite},
        {"device", kind == Experiment::readout || kind == Experiment::fidelity},
        {"readout", kind == Experiment::readout || kind == Experiment::fidelity},
        {"echo", kind == Experiment::peres_echo},
        {"tolerances", kind != Experiment::readout && kind != Experiment::peres_echo && kind != Experiment::speed_limit},
        {"K", kind == Experiment::fidelity},
        {"hbar", composite || kind == Experiment::speed_limit},
    };
    for (const auto& [name, allowed] : sections)
        if (!allowed && tree.contains(name))
            root.fail(name, "not used by experiment '" + to_string(kind) + "'");

    {
        Reader dims = root.section("dims");
        const std::int64_t d = dims.integer("D");
        if (d < 1 || d > 8192) dims.fail("D", "must lie in [1, 8192]");
        cfg.dims.D = static_cast<Index>(d);
        if (composite) {
            if (d < 2) dims.fail("D", "must be >= 2 for a composite model");
            const std::int64_t n = dims.integer("N");
            if (n < 1 || n >= d) dims.fail("N", "must satisfy 1 <= N < D (got N = " + std::to_string(n) + ")");
            cfg.dims.N = static_cast<Index>(n);
        }
        if (kind == Experiment::fidelity) {
            const std::int64_t n1 = dims.integer("N1");
            if (n1 <= cfg.dims.N || n1 > d)
                dims.fail("N1", "must satisfy N < N1 <= D (got N1 = " + std::to_string(n1) +
                                    ", N = " + std::to_string(cfg.dims.N) + ", D = " + std::to_string(d) + ")");
            cfg.dims.N1 = static_cast<Index>(n1);
        }
        if (truncation && dims.has("n")) {
            const std::int64_t n = dims.integer("n");
            if (n < 0 || n > d) dims.fail("n", "must satisfy 0 <= n <= D");
            cfg.dims.n = static_cast<Index>(n);
        }
        dims.finish();
    }

    {
        Reader grid = root.section("grid");
        const int forms = static_cast<int>(grid.has("t_max")) + static_cast<int>(grid.has("t_max_over_t0")) +
                          static_cast<int>(grid.has("points"));
        if (forms != 1) grid.fail("", "give exactly one of t_max, t_max_over_t0 or points");
        if (grid.has("points")) {
            cfg.grid.points = grid.numbers("points");
            try {
                (void)TimeGrid::from_points(cfg.grid.points);
            } catch (const InputError& e) {
                grid.fail("points", e.what());
            }
        } else {
            if (grid.has("t_max_over_t0")) {
                if (kind != Experiment::fidelity) grid.fail("t_max_over_t0", "only available for fidelity runs");
                cfg.grid.t_max_over_t0 = grid.number("t_max_over_t0");
                if (!(*cfg.grid.t_max_over_t0 > 0.0)) grid.fail("t_max_over_t0", "must be > 0");
            } else {
                cfg.grid.t_max = grid.number("t_max");
                if (!(*cfg.grid.t_max > 0.0)) grid.fail("t_max", "must be > 0");
            }
            const std::int64_t steps = grid.integer("steps", 101);
            if (steps < 2 || steps > 1000000) grid.fail("steps", "must lie in [2, 1000000]");
            cfg.grid.steps = static_cast<Index>(steps);
        }
        grid.finish();
    }

    if (tree.contains("tolerances") || kind == Experiment::truncate_sweep || kind == Experiment::fidelity ||
        kind == Experiment::peres_condition) {
        Reader tol = root.section("tolerances");
        cfg.tolerances.epsilon = tol.number("epsilon", 1e-3);
        if (!(cfg.tolerances.epsilon > 0.0)) tol.fail("epsilon", "must be > 0");
        if (kind == Experiment::fidelity) {
            cfg.tolerances.ceiling = tol.number("ceiling", 1e3);
            if (!(cfg.tolerances.ceiling > 0.0)) tol.fail("ceiling", "must be > 0");
        }
        if (kind == Experiment::fidelity || kind == Experiment::peres_condition) {
            cfg.tolerances.plateau = tol.number("plateau", 0.05);
            if (!(cfg.tolerances.plateau > 0.0 && cfg.tolerances.plateau <= 1.0))
                tol.fail("plateau", "must lie in (0, 1]");
        }
        tol.finish();
    }

    if (kind == Experiment::fidelity) {
        cfg.k_constant = root.number("K", 1.0);
        if (!(cfg.k_constant > 0.0)) root.fail("K", "must be > 0");
    }
    if (composite || kind == Experiment::speed_limit) {
        cfg.hbar = root.number("hbar", 1.0);
        if (!(cfg.hbar > 0.0)) root.fail("hbar", "must be > 0");
    }

    const Index dim = cfg.dims.D;
    if (needs_h) cfg.hamiltonian = detail::read_operator(root.section("hamiltonian"), dim);
    if (truncation) {
        cfg.observable = detail::read_operator(root.section("observable"), dim);
        Reader t = root.section("truncation");
        cfg.truncation_basis = t.choice("basis", "energy", {"energy", "computational"});
        t.finish();
    }
    if (needs_h) cfg.state = detail::read_state(root.section("state"), dim);
    if (composite) {
        cfg.energies = detail::read_energies(root.section("energies"), dim);
        cfg.amplitudes = detail::read_amplitudes(root.section("amplitudes"), dim, cfg.dims.N);
        cfg.interaction = detail::read_operator(root.section("interaction"), dim);
    }
    if (kind == Experiment::readout || kind == Experiment::fidelity) {
        cfg.device = detail::read_device(root.section("device"), dim);
        Reader ro = root.section("readout");
        cfg.cross_terms = ro.choice("cross_terms", "symmetric", {"symmetric", "transposed"}) == "transposed"
                              ? CrossTermOrder::transposed
                              : CrossTermOrder::symmetric;
        ro.finish();
    }
    if (kind == Experiment::peres_echo) cfg.echo = detail::read_echo(root.section("echo"));

    root.finish();
    return cfg;
}

inline ExperimentConfig load_config_text(const std::string& text, bool json_format, Experiment kind,
                                         const std::string& origin = "config") {
    return build_config(parse_config_text(text, json_format, origin), kind);
}

inline ExperimentConfig load_config(const std::filesystem::path& path, Experiment kind) {
    if (!std::filesystem::exists(path)) throw ConfigError(path.string() + ": no such file");
    const bool json_format = path.extension() == ".json";
    return load_config_text(read_file(path), json_format, kind, path.string());
}

}  // namespace qlimits::cli
