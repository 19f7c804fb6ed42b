// l4twist command-line tool: every subcommand writes plot-ready datasets.

#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "l4twist/l4twist.hpp"

namespace fs = std::filesystem;
using namespace l4twist;

namespace {

constexpr const char* kVersion = "1.0.0";

constexpr const char* kMuHelp =
    "mass ratio mu = m2/(m1+m2), dimensionless; valid range (0, 0.0385208965) (L4 elliptic)";
constexpr const char* kEHelp =
    "energy E relative to L4 (H(L4) = 0), in units with unit primary separation and unit "
    "angular velocity; valid range (0, 0.12]";

// ---------------------------------------------------------------------------
// Tabular output

using Cell = std::variant<double, long long, std::string>;

struct Table {
    std::vector<std::string> columns;
    std::vector<std::vector<Cell>> rows;

    void add(std::vector<Cell> row) { rows.push_back(std::move(row)); }
};

void write_csv(std::ostream& os, const Table& t)
{
    CsvWriter csv(os);
    for (const auto& c : t.columns) csv.field(std::string_view(c));
    csv.end_row();
    for (const auto& row : t.rows) {
        for (const auto& cell : row)
            std::visit([&](const auto& v) {
                using V = std::decay_t<decltype(v)>;
                if constexpr (std::is_same_v<V, std::string>)
                    csv.field(std::string_view(v));
                else
                    csv.field(v);
            }, cell);
        csv.end_row();
    }
}

void write_json_rows(JsonWriter& js, const Table& t)
{
    js.begin_array();
    for (const auto& row : t.rows) {
        js.begin_object();
        for (std::size_t i = 0; i < row.size(); ++i) {
            js.key(t.columns[i]);
            std::visit([&](const auto& v) {
                using V = std::decay_t<decltype(v)>;
                if constexpr (std::is_same_v<V, std::string>)
                    js.value(std::string_view(v));
                else
                    js.value(v);
            }, row[i]);
        }
        js.end_object();
    }
    js.end_array();
}

// ---------------------------------------------------------------------------
// Run context: output directory, format, sidecar metadata

struct Run {
    std::string command;
    std::string subcommand;
    std::string out_dir = ".";
    std::string format = "csv";
    std::map<std::string, std::string> parameters;

    std::string path(const std::string& name) const { return (fs::path(out_dir) / name).string(); }

    std::string ext() const { return format; }

    void sidecar(const std::string& data_path) const
    {
        nlohmann::ordered_json j;
        j["tool"] = "l4twist";
        j["version"] = kVersion;
        j["subcommand"] = subcommand;
        j["command_line"] = command;
        j["parameters"] = parameters;
        const std::time_t now = std::time(nullptr);
        char buf[32];
        std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
        j["generated_utc"] = buf;
        auto os = open_output(data_path + ".meta.json");
        os << j.dump(2) << '\n';
    }

    void emit(const std::string& name, const Table& t) const
    {
        const std::string p = path(name);
        {
            auto os = open_output(p);
            if (format == "json") {
                JsonWriter js(os);
                write_json_rows(js, t);
                os << '\n';
            } else {
                write_csv(os, t);
            }
        }
        sidecar(p);
        std::cout << p << '\n';
    }

    template <class Fn>
    void emit_json(const std::string& name, Fn&& body) const
    {
        const std::string p = path(name);
        {
            auto os = open_output(p);
            JsonWriter js(os);
            body(js);
            os << '\n';
        }
        sidecar(p);
        std::cout << p << '\n';
    }
};

// ---------------------------------------------------------------------------
// Parameter parsing and validation

std::vector<std::string> split(const std::string& s, char sep)
{
    std::vector<std::string> out;
    std::string cur;
    std::istringstream is(s);
    while (std::getline(is, cur, sep)) out.push_back(cur);
    return out;
}

double parse_double(const std::string& s, const std::string& what)
{
    double v = 0.0;
    const char* b = s.data();
    const char* e = b + s.size();
    while (b < e && *b == ' ') ++b;
    const auto r = std::from_chars(b, e, v);
    require(r.ec == std::errc() && r.ptr == e && std::isfinite(v), ErrorCode::InvalidParameter,
            "cannot parse " + what + " from '" + s + "'");
    return v;
}

std::size_t parse_count(const std::string& s, const std::string& what)
{
    const double v = parse_double(s, what);
    require(v >= 1.0 && v == std::floor(v) && v < 1e7, ErrorCode::InvalidParameter,
            what + " must be a positive integer");
    return static_cast<std::size_t>(v);
}

double check_mu(double mu)
{
    require(std::isfinite(mu) && mu > 0.0 && mu < kMu1, ErrorCode::InvalidParameter,
            "--mu must lie in (0, " + format_number(kMu1) + "), got " + format_number(mu));
    return mu;
}

double check_E(double E)
{
    require(std::isfinite(E) && E > 0.0 && E <= 0.12, ErrorCode::InvalidParameter,
            "--E must lie in (0, 0.12], got " + format_number(E));
    return E;
}

/// "min:max:count"
GridAxis parse_axis(const std::string& s, const std::string& what)
{
    const auto parts = split(s, ':');
    require(parts.size() == 3, ErrorCode::InvalidParameter, what + " axis must be min:max:count");
    GridAxis a{parse_double(parts[0], what), parse_double(parts[1], what),
               parse_count(parts[2], what + " count")};
    require(a.min <= a.max, ErrorCode::InvalidParameter, what + " axis bounds out of order");
    require(a.count > 1 || a.min == a.max, ErrorCode::InvalidParameter,
            what + " axis with one sample needs min = max");
    return a;
}

/// "mu_min:mu_max:n,E_min:E_max:n"
std::pair<GridAxis, GridAxis> parse_mu_E_grid(const std::string& s)
{
    const auto parts = split(s, ',');
    require(parts.size() == 2, ErrorCode::InvalidParameter,
            "--grid must be mu_min:mu_max:n,E_min:E_max:n");
    auto mu = parse_axis(parts[0], "mu");
    auto E = parse_axis(parts[1], "E");
    check_mu(mu.min);
    check_mu(mu.max);
    check_E(E.min);
    check_E(E.max);
    return {mu, E};
}

struct SeedRay {
    double a0 = 0.0, pa0 = 0.0, a1 = 0.0, pa1 = 0.0;
    std::size_t count = 1;
};

SeedRay parse_seed_ray(const std::string& s)
{
    const auto parts = split(s, ',');
    require(parts.size() == 5, ErrorCode::InvalidParameter, "--seed-ray must be a0,pa0,a1,pa1,count");
    SeedRay r{parse_double(parts[0], "a0"), parse_double(parts[1], "pa0"), parse_double(parts[2], "a1"),
              parse_double(parts[3], "pa1"), parse_count(parts[4], "seed count")};
    return r;
}

/// Seeds on the closed segment between the two ray ends.
std::vector<SectionPoint> seeds_on(const SeedRay& r, double E)
{
    std::vector<SectionPoint> out(r.count);
    for (std::size_t k = 0; k < r.count; ++k) {
        const double t = r.count == 1 ? 0.0 : static_cast<double>(k) / static_cast<double>(r.count - 1);
        out[k] = {r.a0 + t * (r.a1 - r.a0), r.pa0 + t * (r.pa1 - r.pa0), E, Direction::Negative, 0.0};
    }
    return out;
}

std::vector<double> axis_values(const GridAxis& a)
{
    return a.count == 1 ? std::vector<double>{a.min} : a.values();
}

// ---------------------------------------------------------------------------
// Config file: a JSON object whose keys mirror long flag names. Entries are
// appended after the explicit arguments unless the flag is already present.

std::string config_value(const nlohmann::json& v)
{
    if (v.is_string()) return v.get<std::string>();
    if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
    if (v.is_number_integer()) return std::to_string(v.get<long long>());
    if (v.is_number()) return format_number(v.get<double>());
    if (v.is_array()) {
        std::string s;
        for (const auto& e : v) {
            if (!s.empty()) s += ',';
            s += config_value(e);
        }
        return s;
    }
    fail(ErrorCode::InvalidParameter, "unsupported config value " + v.dump());
}

std::vector<std::string> merge_config(std::vector<std::string> args)
{
    std::string path;
    for (std::size_t i = 0; i < args.size(); ++i) {
        if (args[i] == "--config") {
            require(i + 1 < args.size(), ErrorCode::InvalidParameter, "--config needs a file");
            path = args[i + 1];
            args.erase(args.begin() + static_cast<long>(i), args.begin() + static_cast<long>(i) + 2);
            break;
        }
        if (args[i].rfind("--config=", 0) == 0) {
            path = args[i].substr(9);
            args.erase(args.begin() + static_cast<long>(i));
            break;
        }
    }
    if (path.empty()) return args;
    std::ifstream in(path);
    require(static_cast<bool>(in), ErrorCode::InvalidParameter, "cannot read config " + path);
    const auto j = nlohmann::json::parse(in, nullptr, false);
    require(!j.is_discarded() && j.is_object(), ErrorCode::InvalidParameter,
            "config " + path + " is not a JSON object");
    for (const auto& [key, value] : j.items()) {
        const std::string flag = "--" + key;
        bool present = false;
        for (const auto& a : args)
            if (a == flag || a.rfind(flag + "=", 0) == 0) present = true;
        if (present) continue;
        if (value.is_boolean()) {
            if (value.get<bool>()) args.push_back(flag);
            continue;
        }
        args.push_back(flag);
        args.push_back(config_value(value));
    }
    return args;
}

// ---------------------------------------------------------------------------
// Subcommand options

struct Options {
    double mu = NAN;
    double E = NAN;
    std::string rational;
    std::string grid;
    std::string seed_ray;
    std::string seed;
    std::string bracket;
    std::string method = "nf";
    std::string tasks = "fixed_point_W";
    std::string checkpoint;
    std::size_t max_crossings = 0;
    std::size_t seeds = 0;
    double tol = NAN;
    double ray_length = 0.1;
    double denom_floor = 1e-4;
    double E_cap = 0.12;
    int order = 8;
    int steps_per_period = 1280;
    int stride = 4;
    int farey_depth = 3;
    unsigned workers = 1;
    bool no_critical = false;
    bool verify = false;
};

PoincareMap make_map(const Options& o)
{
    const MassRatio m(o.mu);
    return PoincareMap(m, default_integrator_config(m, o.steps_per_period));
}

/// Short-period fixed point and the default +pa ray from it.
SeedRay default_ray(const FixedPoint& fp, double length, std::size_t count)
{
    return {fp.point.a, fp.point.pa, fp.point.a, fp.point.pa + length, count};
}

std::string mu_E_stem(const std::string& stem, const Options& o, const Run& run)
{
    return parameter_file_name(stem, o.mu, o.E, run.ext());
}

// resonance-table -----------------------------------------------------------

void cmd_resonance_table(const Options& o, const Run& run)
{
    struct Row {
        std::string label;
        double r;
    };
    // "c": vanishing twist at L4; "earth-moon": mu of the Earth-Moon system,
    // close to the 16/5 resonance.
    const std::vector<Row> rows{{"4", 4.0}, {"11/3", 11.0 / 3.0}, {"7/2", 3.5}, {"c", NAN},
                                {"10/3", 10.0 / 3.0}, {"earth-moon", NAN}, {"3", 3.0}};
    Table t{{"label", "ratio", "mu", "mu_5dp"}, {}};
    for (const auto& row : rows) {
        double mu = NAN, ratio = row.r;
        if (row.label == "c") {
            if (o.no_critical) continue;
            mu = critical_mass_ratio(o.order, 1e-9);
            ratio = frequencies(MassRatio(mu)).ratio();
        } else if (row.label == "earth-moon") {
            mu = kMuEarthMoon;
            ratio = frequencies(MassRatio(mu)).ratio();
        } else {
            mu = mass_ratio_for_resonance(row.r).value();
        }
        t.add({row.label, ratio, mu, format_fixed(mu, 5)});
    }
    run.emit("resonance_table." + run.ext(), t);
}

// section ---------------------------------------------------------------------

void cmd_section(const Options& o, const Run& run)
{
    const PoincareMap map = make_map(o);
    SeedRay ray;
    if (o.seed_ray.empty())
        ray = default_ray(find_fixed_point(map, o.E), o.ray_length, o.seeds ? o.seeds : 10);
    else
        ray = parse_seed_ray(o.seed_ray);
    const auto seeds = seeds_on(ray, o.E);
    const std::size_t n = o.max_crossings ? o.max_crossings : 1000;
    std::vector<std::vector<SectionPoint>> orbits(seeds.size());
    std::vector<std::string> status(seeds.size(), "ok");
    parallel_for(seeds.size(), o.workers, [&](std::size_t i) {
        try {
            orbits[i] = map.iterate(seeds[i], n);
        } catch (const Error& e) {
            status[i] = std::string(to_string(e.code()));
        }
    });
    Table t{{"seed", "crossing", "a", "pa", "t", "status"}, {}};
    for (std::size_t i = 0; i < seeds.size(); ++i) {
        t.add({static_cast<long long>(i), 0LL, seeds[i].a, seeds[i].pa, 0.0, status[i]});
        for (std::size_t k = 0; k < orbits[i].size(); ++k)
            t.add({static_cast<long long>(i), static_cast<long long>(k + 1), orbits[i][k].a,
                   orbits[i][k].pa, orbits[i][k].t_cross, std::string("ok")});
    }
    run.emit(mu_E_stem("section", o, run), t);
}

// orbit -----------------------------------------------------------------------

void cmd_orbit(const Options& o, const Run& run)
{
    const PoincareMap map = make_map(o);
    SectionPoint seed;
    if (o.seed.empty()) {
        seed = find_fixed_point(map, o.E).point;
    } else {
        const auto parts = split(o.seed, ',');
        require(parts.size() == 2, ErrorCode::InvalidParameter, "--seed must be a,pa");
        seed = {parse_double(parts[0], "a"), parse_double(parts[1], "pa"), o.E, Direction::Negative, 0.0};
    }
    TraceSink trace;
    trace.stride = o.stride;
    const std::size_t n = o.max_crossings ? o.max_crossings : 1;
    const auto crossings = map.iterate(seed, n, nullptr, &trace);
    Table t{{"x", "y", "t"}, {}};
    for (const auto& p : trace.points) t.add({p[0], p[1], p[2]});
    run.emit(mu_E_stem("orbit", o, run), t);
    Table c{{"crossing", "a", "pa", "t"}, {}};
    c.add({0LL, seed.a, seed.pa, 0.0});
    for (std::size_t k = 0; k < crossings.size(); ++k)
        c.add({static_cast<long long>(k + 1), crossings[k].a, crossings[k].pa, crossings[k].t_cross});
    run.emit(mu_E_stem("orbit_crossings", o, run), c);
}

// profile ---------------------------------------------------------------------

void cmd_profile(const Options& o, const Run& run)
{
    const PoincareMap map = make_map(o);
    const FixedPoint fp = find_fixed_point(map, o.E);
    const SeedRay ray = o.seed_ray.empty() ? default_ray(fp, o.ray_length, o.seeds ? o.seeds : 24)
                                           : parse_seed_ray(o.seed_ray);
    auto seeds = seeds_on(ray, o.E);
    if (o.seed_ray.empty()) seeds.erase(seeds.begin());
    ProfileOptions po;
    po.crossings = o.max_crossings ? o.max_crossings : 2000;
    po.workers = o.workers;
    if (std::isfinite(o.tol)) po.error_threshold = o.tol;
    const auto profile = rotation_profile(map, fp.point, seeds, po);

    std::optional<NormalForm> nf;
    try {
        nf = normal_form(MassRatio(o.mu), o.order, o.denom_floor);
    } catch (const Error&) {
    }
    Table t{{"seed", "a", "pa", "I", "W", "error", "flag", "nf_W"}, {}};
    for (const auto& e : profile) {
        double nfW = NAN;
        if (nf && e.flag != ProfileFlag::Failed) {
            try {
                nfW = nf_W_on_energy(*nf, o.E, e.I);
            } catch (const Error&) {
            }
        }
        t.add({static_cast<long long>(e.index), e.seed.a, e.seed.pa, e.I, e.W, e.error,
               std::string(to_string(e.flag)), nfW});
    }
    run.emit(mu_E_stem("profile", o, run), t);
    try {
        const auto m = profile_maximum(profile);
        std::cout << "fixed point W0 = " << format_number(fixed_point_rotation_number(fp))
                  << ", profile maximum W = " << format_number(m.W) << " at I = "
                  << format_number(m.I) << '\n';
    } catch (const Error&) {
    }
}

// fixed-point-contours / nf-contours ------------------------------------------

std::vector<Rational> contour_levels(int depth)
{
    std::vector<Rational> levels{{1, 4}};
    for (const auto& r : farey_between({1, 4}, {1, 3}, depth)) levels.push_back(r);
    levels.push_back({1, 3});
    return levels;
}

void emit_contours(const Run& run, const std::string& name, const std::vector<CellResult>& cells,
                   SweepTask task, int depth)
{
    Table t{{"rational", "level", "mu", "E"}, {}};
    for (const auto& r : contour_levels(depth))
        for (const auto& p : extract_contour(cells, task, r.value()))
            t.add({r.str(), r.value(), p.mu, p.E});
    run.emit(name, t);
}

SweepSpec sweep_spec(const Options& o, const std::string& default_grid)
{
    SweepSpec spec;
    std::tie(spec.mu, spec.E) = parse_mu_E_grid(o.grid.empty() ? default_grid : o.grid);
    spec.workers = o.workers;
    if (o.seeds) spec.profile.seeds = o.seeds;
    if (o.max_crossings) spec.profile.crossings = o.max_crossings;
    spec.profile.ray_length = o.ray_length;
    return spec;
}

std::string checkpoint_path(const Options& o, const Run& run, const std::string& name)
{
    return o.checkpoint.empty() ? run.path(name) : o.checkpoint;
}

void cmd_fixed_point_contours(const Options& o, const Run& run)
{
    SweepSpec spec = sweep_spec(o, "0.0075:0.0115:20,0.01:0.1:10");
    spec.tasks = {SweepTask::FixedPointW};
    const auto res = run_sweep(spec, checkpoint_path(o, run, "fixed_point_W.ndjson"));
    Table t{{"mu", "E", "W", "status"}, {}};
    for (const auto& c : res.cells) t.add({c.mu, c.E, c.value, c.status});
    run.emit("fixed_point_W." + run.ext(), t);
    emit_contours(run, "fixed_point_contours." + run.ext(), res.cells, SweepTask::FixedPointW,
                  o.farey_depth);
}

void cmd_nf_contours(const Options& o, const Run& run)
{
    const auto [mu_axis, E_axis] = parse_mu_E_grid(o.grid.empty() ? "0.0075:0.0125:101,0.001:0.1:100" : o.grid);
    std::vector<CellResult> cells;
    for (double m : axis_values(mu_axis)) {
        std::optional<NormalForm> nf;
        std::string failure;
        try {
            nf = normal_form(MassRatio(m), o.order, o.denom_floor);
        } catch (const Error& e) {
            failure = std::string(to_string(e.code()));
        }
        for (double e : axis_values(E_axis)) {
            CellResult c{m, e, SweepTask::NfChart, NAN, failure.empty() ? "ok" : failure};
            if (nf) {
                try {
                    c.value = short_period_W_of_E(*nf, e);
                } catch (const Error& err) {
                    c.status = std::string(to_string(err.code()));
                }
            }
            cells.push_back(c);
        }
    }
    Table t{{"mu", "E", "W", "status"}, {}};
    for (const auto& c : cells) t.add({c.mu, c.E, c.value, c.status});
    run.emit("nf_W." + run.ext(), t);
    emit_contours(run, "nf_contours." + run.ext(), cells, SweepTask::NfChart, o.farey_depth);
}

// reconnect -------------------------------------------------------------------

void write_locus(JsonWriter& js, const ReconnectionLocus& locus)
{
    js.begin_object();
    js.member("rational", locus.rational.str());
    js.member("method", to_string(locus.method));
    js.key("points").begin_array();
    for (const auto& p : locus.points) {
        js.begin_object();
        js.member("mu", p.mu).member("E", p.E);
        if (locus.method == LocusMethod::NormalForm) js.member("Is", p.actions.Is).member("Il", p.actions.Il);
        js.end_object();
    }
    js.end_array();
    js.key("failures").begin_array();
    for (const auto& f : locus.failures) {
        js.begin_object();
        js.member("mu", f.mu).member("status", to_string(f.code));
        js.end_object();
    }
    js.end_array();
    js.end_object();
}

void cmd_reconnect(const Options& o, const Run& run)
{
    require(!o.rational.empty(), ErrorCode::InvalidParameter, "--rational p/q is required");
    const Rational r = parse_rational(o.rational);
    require(o.method == "nf" || o.method == "numeric", ErrorCode::InvalidParameter,
            "--method must be nf or numeric");
    const std::string tag = std::to_string(r.p) + "_" + std::to_string(r.q);
    ReconnectionLocus locus;
    locus.rational = r;
    locus.method = o.method == "nf" ? LocusMethod::NormalForm : LocusMethod::Numeric;

    if (std::isfinite(o.E)) {
        require(!o.bracket.empty(), ErrorCode::InvalidParameter, "--E needs --bracket lo,hi");
        const auto b = split(o.bracket, ',');
        require(b.size() == 2, ErrorCode::InvalidParameter, "--bracket must be lo,hi");
        const double lo = check_mu(parse_double(b[0], "bracket")), hi = check_mu(parse_double(b[1], "bracket"));
        require(lo < hi, ErrorCode::InvalidParameter, "--bracket bounds out of order");
        double mu = NAN;
        if (locus.method == LocusMethod::NormalForm) {
            mu = reconnection_mu_nf(r, o.E, lo, hi, o.order, std::isfinite(o.tol) ? o.tol : 1e-7);
        } else {
            NumericSearchOptions opts;
            opts.ray_length = o.ray_length;
            if (o.seeds) opts.seeds = o.seeds;
            if (o.max_crossings) opts.crossings = o.max_crossings;
            if (std::isfinite(o.tol)) opts.mu_tolerance = o.tol;
            opts.workers = o.workers;
            mu = reconnection_search_numeric(r, o.E, lo, hi, opts);
        }
        locus.points.push_back({mu, o.E, {NAN, NAN}});
        std::cout << r.str() << " reconnection at E = " << format_number(o.E) << ": mu = "
                  << format_number(mu) << '\n';
    } else {
        require(locus.method == LocusMethod::NormalForm, ErrorCode::InvalidParameter,
                "the numeric method needs --E and --bracket");
        const GridAxis axis = parse_axis(o.grid.empty() ? "0.0088:0.0105:18" : o.grid, "mu");
        check_mu(axis.min);
        check_mu(axis.max);
        locus = reconnection_locus_nf(r, axis_values(axis), o.order);
    }
    const std::string name = "reconnect_" + tag + "_" + std::string(to_string(locus.method));
    if (run.format == "json") {
        run.emit_json(name + ".json", [&](JsonWriter& js) { write_locus(js, locus); });
    } else {
        Table t{{"rational", "method", "mu", "E", "Is", "Il", "status"}, {}};
        for (const auto& p : locus.points)
            t.add({r.str(), std::string(to_string(locus.method)), p.mu, p.E, p.actions.Is, p.actions.Il,
                   std::string("ok")});
        for (const auto& f : locus.failures)
            t.add({r.str(), std::string(to_string(locus.method)), f.mu, NAN, NAN, NAN,
                   std::string(to_string(f.code))});
        run.emit(name + ".csv", t);
    }
}

// nf --------------------------------------------------------------------------

void cmd_nf(const Options& o, const Run& run)
{
    const BirkhoffResult res = birkhoff_normalize(MassRatio(o.mu), o.order, o.denom_floor);
    const NormalForm& nf = res.nf;
    std::optional<VerificationReport> report;
    if (o.verify) report = nf_verify(res);
    run.emit_json(parameter_file_name("nf", o.mu, "json"), [&](JsonWriter& js) {
        js.begin_object();
        js.member("mu", nf.mu);
        js.member("omega_s", nf.omega_s).member("omega_l", nf.omega_l);
        js.member("order", nf.order);
        js.member("A", nf.A()).member("B", nf.B()).member("C", nf.C());
        js.member("W0", nf_rotation_number(nf, 0.0, 0.0));
        js.member("twist_at_origin", nf_twist(nf, 0.0, 0.0));
        js.key("coefficients").begin_array();
        for (int j = 0; j <= nf.action_degree(); ++j)
            for (int k = 0; j + k <= nf.action_degree(); ++k) {
                if (j + k == 0) continue;
                js.begin_object();
                js.member("Is_power", j).member("Il_power", k);
                js.member("value", nf.c[static_cast<std::size_t>(j)][static_cast<std::size_t>(k)]);
                js.end_object();
            }
        js.end_array();
        js.member("residual", nf.residual);
        if (report) {
            js.key("verification").begin_object();
            js.member("non_action_residual", report->non_action_residual);
            js.member("imaginary_residue", report->imaginary_residue);
            js.member("coefficient_mismatch", report->coefficient_mismatch);
            js.end_object();
        }
        js.end_object();
    });
}

// chart -----------------------------------------------------------------------

void cmd_chart(const Options& o, const Run& run)
{
    const NormalForm nf = normal_form(MassRatio(o.mu), o.order, o.denom_floor);
    ChartGrid grid;
    if (!o.grid.empty()) {
        const auto parts = split(o.grid, ',');
        require(parts.size() == 2, ErrorCode::InvalidParameter, "chart --grid must be n_Is,n_Il");
        grid.n_Is = parse_count(parts[0], "n_Is");
        grid.n_Il = parse_count(parts[1], "n_Il");
        require(grid.n_Is >= 2 && grid.n_Il >= 2, ErrorCode::InvalidParameter,
                "chart grid needs at least 2 x 2 points");
    }
    const ActionCap cap = default_action_cap(nf, o.E_cap);
    grid.Is_max = cap.Is_max;
    grid.Il_max = cap.Il_max;
    grid.farey_depth = o.farey_depth;
    const ActionChart chart = action_action_chart(nf, grid);

    Table cells{{"Is", "Il", "H", "W", "C"}, {}};
    for (const auto& c : chart.cells) cells.add({c.Is, c.Il, c.H, c.W, c.C});
    run.emit(parameter_file_name("chart", o.mu, run.ext()), cells);

    Table iso{{"field", "level", "label", "segment", "Is", "Il"}, {}};
    for (const auto& line : chart.isolines) {
        long long seg = 0;
        for (const auto& s : line.segments) {
            for (const auto& p : s) iso.add({line.field, line.level, line.label, seg, p.Is, p.Il});
            ++seg;
        }
    }
    run.emit(parameter_file_name("chart_isolines", o.mu, run.ext()), iso);

    Table tw{{"branch", "vertex", "Is", "Il", "W", "H", "C"}, {}};
    for (std::size_t b = 0; b < chart.twistless.branches.size(); ++b) {
        const auto& br = chart.twistless.branches[b];
        for (std::size_t v = 0; v < br.size(); ++v) {
            const auto& x = br[v];
            tw.add({static_cast<long long>(b), static_cast<long long>(v), x.Is, x.Il, x.W, x.H, x.C});
        }
    }
    run.emit(parameter_file_name("chart_twistless", o.mu, run.ext()), tw);
}

// sweep -----------------------------------------------------------------------

void cmd_sweep(const Options& o, const Run& run)
{
    SweepSpec spec = sweep_spec(o, "0.0075:0.0115:5,0.02:0.1:5");
    spec.tasks.clear();
    for (const auto& t : split(o.tasks, ',')) spec.tasks.push_back(parse_sweep_task(t));
    spec.validate();
    const auto res = run_sweep(spec, checkpoint_path(o, run, "sweep.ndjson"));
    const std::string p = run.path("sweep.csv");
    {
        auto os = open_output(p);
        write_sweep_csv(os, res.cells);
    }
    run.sidecar(p);
    std::cout << p << '\n';
    std::cout << "cells: " << res.cells.size() << " (resumed " << res.resumed << ", computed "
              << res.computed << ")\n";
}

} // namespace

int main(int argc, char** argv)
{
    std::vector<std::string> args(argv + 1, argv + argc);
    std::string command_line = "l4twist";
    for (const auto& a : args) command_line += " " + a;
    try {
        args = merge_config(std::move(args));
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }

    CLI::App app{"l4twist: twistless tori near L4 of the restricted three-body problem.\n"
                 "Each subcommand writes CSV or JSON datasets into --out, with a .meta.json sidecar."};
    app.require_subcommand(1);
    app.set_version_flag("--version", kVersion);
    std::string config_unused;
    app.add_option("--config", config_unused,
                   "JSON file whose keys mirror long flag names; explicit flags win");

    Options o;
    Run run;

    auto common = [&](CLI::App* sub) {
        sub->add_option("--out", run.out_dir, "output directory (created if missing)")->capture_default_str();
        sub->add_option("--format", run.format, "dataset format")
            ->check(CLI::IsMember({"csv", "json"}))
            ->capture_default_str();
    };
    auto add_mu = [&](CLI::App* sub) { sub->add_option("--mu", o.mu, kMuHelp)->required(); };
    auto add_E = [&](CLI::App* sub, bool required) {
        auto* opt = sub->add_option("--E", o.E, kEHelp);
        if (required) opt->required();
    };
    auto add_order = [&](CLI::App* sub) {
        sub->add_option("--order", o.order, "normal-form degree in the canonical variables, even, 4..16")
            ->capture_default_str();
        sub->add_option("--denom-floor", o.denom_floor,
                        "smallest accepted small divisor |k1 w_s - k2 w_l|, > 0")
            ->capture_default_str();
    };
    auto add_integrator = [&](CLI::App* sub) {
        sub->add_option("--steps-per-period", o.steps_per_period,
                        "RK4 steps per linear short period 2 pi / omega_s, >= 200")
            ->capture_default_str();
    };
    auto add_workers = [&](CLI::App* sub) {
        sub->add_option("--workers", o.workers, "worker threads, >= 1")->capture_default_str();
    };

    auto* rt = app.add_subcommand("resonance-table",
                                  "Table of mass ratios mu_r with omega_s/omega_l = r (dimensionless), "
                                  "including mu_c where the twist at L4 vanishes");
    common(rt);
    rt->add_flag("--no-critical", o.no_critical, "omit the mu_c row (saves a few normalizations)");
    rt->add_option("--order", o.order, "normal-form degree used for mu_c, even, 4..16")->capture_default_str();

    auto* sec = app.add_subcommand("section", "Poincare section crossings (a, pa, t) for a line of seeds");
    common(sec);
    add_mu(sec);
    add_E(sec, true);
    sec->add_option("--seed-ray", o.seed_ray,
                    "a0,pa0,a1,pa1,count: seeds on the closed segment in section coordinates "
                    "(a = 2x+1 along the line through the heavy primary and L4, pa its conjugate "
                    "momentum); default: 10 seeds from the short-period fixed point along +pa");
    sec->add_option("--ray-length", o.ray_length, "length of the default ray in pa, > 0")->capture_default_str();
    sec->add_option("--max-crossings", o.max_crossings, "crossings per seed, >= 1 (default 1000)");
    add_integrator(sec);
    add_workers(sec);

    auto* orb = app.add_subcommand("orbit", "Configuration-space trace (x, y, t) over several returns");
    common(orb);
    add_mu(orb);
    add_E(orb, true);
    orb->add_option("--seed", o.seed, "a,pa on the section; default: the short-period fixed point");
    orb->add_option("--max-crossings", o.max_crossings, "number of section returns, >= 1 (default 1)");
    orb->add_option("--stride", o.stride, "keep every stride-th integration step, >= 1")->capture_default_str();
    add_integrator(orb);

    auto* prof = app.add_subcommand("profile",
                                    "Rotation number W and action I (area / 2 pi) of invariant curves "
                                    "along a ray of seeds, with the normal-form W on the same energy");
    common(prof);
    add_mu(prof);
    add_E(prof, true);
    prof->add_option("--seed-ray", o.seed_ray,
                     "a0,pa0,a1,pa1,count; default: 24 seeds on (0, ray-length] along +pa from the "
                     "short-period fixed point");
    prof->add_option("--ray-length", o.ray_length, "length of the default ray in pa, > 0")->capture_default_str();
    prof->add_option("--seeds", o.seeds, "seeds on the default ray, >= 1 (default 24)");
    prof->add_option("--max-crossings", o.max_crossings, "crossings per curve, >= 1000 (default 2000)");
    prof->add_option("--tol", o.tol,
                     "error estimate above which a curve is flagged resonant/chaotic (default 1e-4)");
    add_order(prof);
    add_integrator(prof);
    add_workers(prof);

    auto* fpc = app.add_subcommand("fixed-point-contours",
                                   "Rotation number W0 of the short-period fixed point over a (mu, E) grid "
                                   "and its contours at Farey levels between 1/4 and 1/3");
    common(fpc);
    fpc->add_option("--grid", o.grid,
                    "mu_min:mu_max:n,E_min:E_max:n (default 0.0075:0.0115:20,0.01:0.1:10)");
    fpc->add_option("--checkpoint", o.checkpoint, "NDJSON checkpoint path (default OUT/fixed_point_W.ndjson)");
    fpc->add_option("--farey-depth", o.farey_depth, "Farey tree depth for contour levels, >= 1")
        ->capture_default_str();
    add_workers(fpc);

    auto* rec = app.add_subcommand("reconnect",
                                   "Reconnection (twistless) bifurcation of the p/q island chains: the "
                                   "normal-form locus E(mu) over a mu grid, or mu at fixed E");
    common(rec);
    rec->add_option("--rational", o.rational, "p/q in lowest terms with 0 < p < q, e.g. 2/7")->required();
    rec->add_option("--method", o.method, "nf (normal form) or numeric (return-map profiles)")
        ->capture_default_str();
    rec->add_option("--grid", o.grid, "mu_min:mu_max:n for the normal-form locus (default 0.0088:0.0105:18)");
    add_E(rec, false);
    rec->add_option("--bracket", o.bracket, "lo,hi mass-ratio bracket for the search at fixed --E");
    rec->add_option("--tol", o.tol, "mass-ratio tolerance of the bisection (nf 1e-7, numeric 5e-6)");
    rec->add_option("--ray-length", o.ray_length, "numeric: ray length in pa, > 0")->capture_default_str();
    rec->add_option("--seeds", o.seeds, "numeric: seeds per profile (default 24)");
    rec->add_option("--max-crossings", o.max_crossings, "numeric: crossings per curve (default 2000)");
    add_order(rec);
    add_workers(rec);

    auto* nfc = app.add_subcommand("nf", "Birkhoff normal form H(Is, Il) at L4 as JSON");
    common(nfc);
    add_mu(nfc);
    add_order(nfc);
    nfc->add_flag("--verify", o.verify, "include the residual report of the normalization");

    auto* nfcont = app.add_subcommand("nf-contours",
                                      "Normal-form rotation number of the short-period orbit W(mu, E) "
                                      "and its contours at Farey levels");
    common(nfcont);
    nfcont->add_option("--grid", o.grid, "mu_min:mu_max:n,E_min:E_max:n (default 0.0075:0.0125:101,0.001:0.1:100)");
    nfcont->add_option("--farey-depth", o.farey_depth, "Farey tree depth for contour levels, >= 1")
        ->capture_default_str();
    add_order(nfcont);

    auto* ch = app.add_subcommand("chart",
                                  "Action-action chart: H, W and twist C on an (Is, Il) grid, iso-lines "
                                  "of H and W, and the twistless curve C = 0");
    common(ch);
    add_mu(ch);
    ch->add_option("--grid", o.grid, "n_Is,n_Il grid points, each >= 2 (default 81,81)");
    ch->add_option("--E-cap", o.E_cap, "action cap: Is with H(Is, 0) = E-cap, in (0, 0.12]")->capture_default_str();
    ch->add_option("--farey-depth", o.farey_depth, "Farey tree depth for W iso-lines, >= 1")
        ->capture_default_str();
    add_order(ch);

    auto* sw = app.add_subcommand("sweep", "Checkpointed, resumable (mu, E) sweep; CSV mu,E,task,value,status");
    common(sw);
    sw->add_option("--grid", o.grid, "mu_min:mu_max:n,E_min:E_max:n (default 0.0075:0.0115:5,0.02:0.1:5)");
    sw->add_option("--tasks", o.tasks,
                   "comma list of fixed_point_W, reconnection_2_7, reconnection_3_10, nf_chart")
        ->capture_default_str();
    sw->add_option("--checkpoint", o.checkpoint, "NDJSON checkpoint path (default OUT/sweep.ndjson)");
    sw->add_option("--seeds", o.seeds, "reconnection tasks: seeds per profile (default 16)");
    sw->add_option("--max-crossings", o.max_crossings, "reconnection tasks: crossings per curve (default 1000)");
    sw->add_option("--ray-length", o.ray_length, "reconnection tasks: ray length in pa")->capture_default_str();
    add_workers(sw);

    try {
        std::vector<std::string> rev(args.rbegin(), args.rend());
        app.parse(rev);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }

    CLI::App* sub = app.get_subcommands().front();
    run.subcommand = sub->get_name();
    run.command = command_line;
    for (const auto* opt : sub->get_options())
        if (opt->count() > 0 && opt->get_name() != "--help")
            run.parameters[opt->get_name()] = opt->as<std::string>();

    try {
        // Validation before any computation.
        if (sub->get_option_no_throw("--mu") && sub->get_option("--mu")->count() > 0) check_mu(o.mu);
        if (sub->get_option_no_throw("--E") && sub->get_option("--E")->count() > 0) check_E(o.E);
        require(o.order >= 4 && o.order <= 16 && o.order % 2 == 0, ErrorCode::InvalidParameter,
                "--order must be even and in [4, 16]");
        require(o.denom_floor > 0.0, ErrorCode::InvalidParameter, "--denom-floor must be positive");
        require(o.steps_per_period >= 200, ErrorCode::InvalidParameter, "--steps-per-period must be >= 200");
        require(o.workers >= 1, ErrorCode::InvalidParameter, "--workers must be >= 1");
        require(o.stride >= 1, ErrorCode::InvalidParameter, "--stride must be >= 1");
        require(o.farey_depth >= 1 && o.farey_depth <= 8, ErrorCode::InvalidParameter,
                "--farey-depth must be in [1, 8]");
        require(o.ray_length > 0.0, ErrorCode::InvalidParameter, "--ray-length must be positive");
        require(o.E_cap > 0.0 && o.E_cap <= 0.12, ErrorCode::InvalidParameter, "--E-cap must be in (0, 0.12]");
        require(!std::isfinite(o.tol) || o.tol > 0.0, ErrorCode::InvalidParameter, "--tol must be positive");
        if (sub->get_name() == "profile" && o.max_crossings)
            require(o.max_crossings >= kMinRotationIterates, ErrorCode::InvalidParameter,
                    "--max-crossings must be >= 1000 for rotation numbers");
        if (!o.seed_ray.empty()) parse_seed_ray(o.seed_ray);
        if (!o.rational.empty()) parse_rational(o.rational);

        std::error_code ec;
        fs::create_directories(run.out_dir, ec);
        require(!ec, ErrorCode::InvalidParameter, "cannot create output directory " + run.out_dir);

        const std::string name = sub->get_name();
        if (name == "resonance-table") cmd_resonance_table(o, run);
        else if (name == "section") cmd_section(o, run);
        else if (name == "orbit") cmd_orbit(o, run);
        else if (name == "profile") cmd_profile(o, run);
        else if (name == "fixed-point-contours") cmd_fixed_point_contours(o, run);
        else if (name == "reconnect") cmd_reconnect(o, run);
        else if (name == "nf") cmd_nf(o, run);
        else if (name == "nf-contours") cmd_nf_contours(o, run);
        else if (name == "chart") cmd_chart(o, run);
        else if (name == "sweep") cmd_sweep(o, run);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return is_validation_error(e.code()) ? 1 : 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    return 0;
}
