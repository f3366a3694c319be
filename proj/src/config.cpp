#include "turbkeps/config.hpp"

#include <charconv>
#include <cstdio>
#include <functional>
#include <limits>
#include <map>
#include <set>
#include <sstream>

#include <spdlog/spdlog.h>

#include "turbkeps/errors.hpp"
#include "turbkeps/exponents.hpp"

namespace turbkeps {

namespace {

std::string_view trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

[[noreturn]] void fail(int line, const std::string& msg) {
    throw Error(ErrorKind::Config, "line " + std::to_string(line) + ": " + msg);
}

double to_double(std::string_view v, int line) {
    double out = 0.0;
    const auto* end = v.data() + v.size();
    const auto [p, ec] = std::from_chars(v.data(), end, out);
    if (ec != std::errc() || p != end) fail(line, "expected a number, got '" + std::string(v) + "'");
    return out;
}

long to_long(std::string_view v, int line) {
    long out = 0;
    const auto* end = v.data() + v.size();
    const auto [p, ec] = std::from_chars(v.data(), end, out);
    if (ec != std::errc() || p != end) fail(line, "expected an integer, got '" + std::string(v) + "'");
    return out;
}

int to_int(std::string_view v, int line) {
    const long x = to_long(v, line);
    if (x < std::numeric_limits<int>::min() || x > std::numeric_limits<int>::max())
        fail(line, "integer out of range: " + std::string(v));
    return static_cast<int>(x);
}

bool to_bool(std::string_view v, int line) {
    if (v == "true") return true;
    if (v == "false") return false;
    fail(line, "expected true or false, got '" + std::string(v) + "'");
}

template <class T>
std::vector<T> to_list(std::string_view v, int line, T (*conv)(std::string_view, int)) {
    std::vector<T> out;
    if (trim(v).empty()) return out;
    std::size_t pos = 0;
    while (true) {
        const auto comma = v.find(',', pos);
        const auto item = trim(v.substr(pos, comma == std::string_view::npos ? std::string_view::npos : comma - pos));
        if (item.empty()) fail(line, "empty list element");
        out.push_back(conv(item, line));
        if (comma == std::string_view::npos) break;
        pos = comma + 1;
    }
    return out;
}

template <class E>
E to_enum(std::string_view v, int line, std::initializer_list<std::pair<const char*, E>> options) {
    std::string names;
    for (const auto& [name, value] : options) {
        if (v == name) return value;
        names += names.empty() ? name : std::string("|") + name;
    }
    fail(line, "expected one of " + names + ", got '" + std::string(v) + "'");
}

using Setter = std::function<void(RunConfig&, std::string_view, int)>;
using Table = std::map<std::string, std::map<std::string, Setter>, std::less<>>;

const Table& table() {
    static const Table t = [] {
        Table t;
        auto num = [](double ModelParameters::*m) {
            return [m](RunConfig& c, std::string_view v, int line) { c.params.*m = to_double(v, line); };
        };
        auto& model = t["model"];
        model["d"] = [](RunConfig& c, std::string_view v, int line) { c.params.d = to_int(v, line); };
        model["alpha"] = num(&ModelParameters::alpha);
        model["beta"] = num(&ModelParameters::beta);
        model["eta"] = num(&ModelParameters::eta);
        model["zeta"] = num(&ModelParameters::zeta);
        model["gamma"] = num(&ModelParameters::gamma);
        model["theta"] = num(&ModelParameters::theta);
        model["cT"] = num(&ModelParameters::cT);
        model["CT"] = num(&ModelParameters::CT);
        model["cD"] = num(&ModelParameters::cD);
        model["CD"] = num(&ModelParameters::CD);
        model["cP"] = num(&ModelParameters::cP);
        model["CP"] = num(&ModelParameters::CP);
        model["cEps"] = num(&ModelParameters::cEps);
        model["CEps"] = num(&ModelParameters::CEps);
        model["cDa"] = num(&ModelParameters::cDa);
        model["cFo"] = num(&ModelParameters::cFo);
        model["C0"] = num(&ModelParameters::C0);
        model["T_final"] = num(&ModelParameters::T_final);
        model["override_admissibility"] = [](RunConfig& c, std::string_view v, int line) {
            c.override_admissibility = to_bool(v, line);
        };

        auto& domain = t["domain"];
        domain["mode"] = [](RunConfig& c, std::string_view v, int line) {
            c.spec.mode = to_enum<DomainMode>(v, line, {{"torus", DomainMode::PeriodicTorus2D},
                                                        {"box", DomainMode::DirichletBox2D}});
        };
        domain["Lx"] = [](RunConfig& c, std::string_view v, int line) { c.spec.extent[0] = to_double(v, line); };
        domain["Ly"] = [](RunConfig& c, std::string_view v, int line) { c.spec.extent[1] = to_double(v, line); };
        domain["N"] = [](RunConfig& c, std::string_view v, int line) { c.spec.N = to_int(v, line); };

        auto& trunc = t["truncation"];
        trunc["n"] = [](RunConfig& c, std::string_view v, int line) { c.n = to_int(v, line); };
        trunc["j"] = [](RunConfig& c, std::string_view v, int line) { c.j = to_int(v, line); };
        trunc["l"] = [](RunConfig& c, std::string_view v, int line) { c.l = to_int(v, line); };
        trunc["cutoff"] = [](RunConfig& c, std::string_view v, int line) { c.apply_cutoff = to_bool(v, line); };
        trunc["positivity"] = [](RunConfig& c, std::string_view v, int line) {
            c.positivity = to_enum<PositivityPolicy>(v, line, {{"monitor", PositivityPolicy::Monitor},
                                                               {"floor", PositivityPolicy::Floor}});
        };

        auto& integ = t["integrator"];
        integ["rel_tol"] = [](RunConfig& c, std::string_view v, int line) { c.integrator.rel_tol = to_double(v, line); };
        integ["abs_tol"] = [](RunConfig& c, std::string_view v, int line) { c.integrator.abs_tol = to_double(v, line); };
        integ["max_dt"] = [](RunConfig& c, std::string_view v, int line) { c.integrator.max_dt = to_double(v, line); };
        integ["dt_init"] = [](RunConfig& c, std::string_view v, int line) { c.integrator.dt_init = to_double(v, line); };
        integ["max_steps"] = [](RunConfig& c, std::string_view v, int line) { c.integrator.max_steps = to_long(v, line); };

        auto& init = t["initial"];
        init["u0"] = [](RunConfig& c, std::string_view v, int line) {
            using V = InitialSpec::Velocity;
            c.initial.u0 = to_enum<V>(v, line, {{"zero", V::Zero}, {"mode", V::Mode}, {"file", V::File}});
        };
        init["u0_mode"] = [](RunConfig& c, std::string_view v, int line) { c.initial.u0_mode = to_int(v, line); };
        init["u0_amplitude"] = [](RunConfig& c, std::string_view v, int line) {
            c.initial.u0_amplitude = to_double(v, line);
        };
        init["u0_file"] = [](RunConfig& c, std::string_view v, int) { c.initial.u0_file = std::string(v); };
        init["k0"] = [](RunConfig& c, std::string_view v, int line) {
            using K = InitialSpec::Tke;
            c.initial.k0 = to_enum<K>(v, line, {{"constant", K::Constant}, {"cosine", K::Cosine}, {"file", K::File}});
        };
        init["k0_value"] = [](RunConfig& c, std::string_view v, int line) { c.initial.k0_value = to_double(v, line); };
        init["k0_amplitude"] = [](RunConfig& c, std::string_view v, int line) {
            c.initial.k0_amplitude = to_double(v, line);
        };
        init["k0_file"] = [](RunConfig& c, std::string_view v, int) { c.initial.k0_file = std::string(v); };
        init["mollify"] = [](RunConfig& c, std::string_view v, int line) { c.initial.mollify = to_bool(v, line); };

        auto& forcing = t["forcing"];
        forcing["kind"] = [](RunConfig& c, std::string_view v, int line) {
            using K = Forcing::Kind;
            c.forcing.kind = to_enum<K>(v, line, {{"zero", K::Zero}, {"constant", K::Constant}, {"mode", K::Mode}});
        };
        forcing["gx"] = [](RunConfig& c, std::string_view v, int line) { c.forcing.vector[0] = to_double(v, line); };
        forcing["gy"] = [](RunConfig& c, std::string_view v, int line) { c.forcing.vector[1] = to_double(v, line); };
        forcing["mode"] = [](RunConfig& c, std::string_view v, int line) { c.forcing.mode = to_int(v, line); };
        forcing["amplitude"] = [](RunConfig& c, std::string_view v, int line) {
            c.forcing.amplitude = to_double(v, line);
        };

        auto& out = t["output"];
        out["uniform_intervals"] = [](RunConfig& c, std::string_view v, int line) {
            c.output.uniform_intervals = to_int(v, line);
        };
        out["geometric_levels"] = [](RunConfig& c, std::string_view v, int line) {
            c.output.geometric_levels = to_int(v, line);
        };
        out["extra_times"] = [](RunConfig& c, std::string_view v, int line) {
            c.output.extra_times = to_list<double>(v, line, &to_double);
        };
        auto flag = [](bool OutputSettings::*m) {
            return [m](RunConfig& c, std::string_view v, int line) { c.output.*m = to_bool(v, line); };
        };
        out["energy"] = flag(&OutputSettings::energy);
        out["tke_l1"] = flag(&OutputSettings::tke_l1);
        out["gradient"] = flag(&OutputSettings::gradient);
        out["transport"] = flag(&OutputSettings::transport);
        out["ic"] = flag(&OutputSettings::ic);
        out["weak_residual"] = flag(&OutputSettings::weak_residual);

        auto& sweep = t["sweep"];
        sweep["axis"] = [](RunConfig& c, std::string_view v, int line) {
            if (!c.sweep) c.sweep.emplace();
            c.sweep->axis = to_enum<SweepAxis>(v, line, {{"n", SweepAxis::Truncation}, {"j", SweepAxis::J},
                                                         {"l", SweepAxis::L}});
        };
        sweep["levels"] = [](RunConfig& c, std::string_view v, int line) {
            if (!c.sweep) c.sweep.emplace();
            c.sweep->levels = to_list<int>(v, line, &to_int);
        };
        return t;
    }();
    return t;
}

std::string num(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

const char* boolstr(bool b) { return b ? "true" : "false"; }

std::string margin_str(const ExactReal& m) { return m.str(); }

}  // namespace

void require_admissible(const ModelParameters& p) {
    const auto rep = check_admissibility(p);
    if (rep.admissible()) return;
    const auto& ex = rep.derived;
    std::string detail;
    if (!rep.cond1_ok)
        detail = "Cond1: eta = " + ExactReal::from_double(p.eta).str() + " must be < r_k = " + ex.r_k.str() + " (margin " +
                 margin_str(rep.margins[0]) + ")";
    else if (!rep.cond2_ok)
        detail = "Cond2: theta = " + ExactReal::from_double(p.theta).str() + " must be < zeta + 2/d = " +
                 (ExactReal::from_double(p.zeta) + ExactReal(Rational(2, p.d))).str() + " (margin " +
                 margin_str(rep.margins[1]) + ")";
    else
        detail = "Cond3: gamma/(theta+1) + beta/r_u must be < 1 with r_u = " + ex.r_u.str() + " (margin " +
                 margin_str(rep.margins[2]) + ")";
    throw Error(ErrorKind::Config, "parameters violate " + detail);
}

RunConfig parse_config(std::string_view text, bool force_override, ConfigWarnings* warnings) {
    RunConfig cfg;
    const Table& t = table();
    const std::map<std::string, Setter>* section = nullptr;
    std::string section_name;
    std::set<std::string> seen;
    int line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const auto nl = text.find('\n', pos);
        std::string_view line = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
        pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
        ++line_no;
        if (const auto c = line.find_first_of("#;"); c != std::string_view::npos) line = line.substr(0, c);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']') fail(line_no, "malformed section header");
            section_name = std::string(trim(line.substr(1, line.size() - 2)));
            const auto it = t.find(section_name);
            if (it == t.end()) fail(line_no, "unknown section [" + section_name + "]");
            if (!seen.insert("[" + section_name + "]").second) fail(line_no, "duplicate section [" + section_name + "]");
            section = &it->second;
            if (section_name == "sweep" && !cfg.sweep) cfg.sweep.emplace();
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string_view::npos) fail(line_no, "expected key = value");
        const std::string key(trim(line.substr(0, eq)));
        const std::string_view value = trim(line.substr(eq + 1));
        if (key.empty()) fail(line_no, "missing key");
        if (!section) fail(line_no, "key '" + key + "' outside any section");
        const auto setter = section->find(key);
        if (setter == section->end()) fail(line_no, "unknown key '" + key + "' in [" + section_name + "]");
        if (!seen.insert(section_name + "." + key).second) fail(line_no, "duplicate key '" + key + "'");
        setter->second(cfg, value, line_no);
    }
    if (cfg.sweep && cfg.sweep->levels.empty()) throw Error(ErrorKind::Config, "[sweep] needs levels");
    if (force_override) cfg.override_admissibility = true;
    cfg.validate();

    const auto adm = check_admissibility(cfg.params);
    if (!adm.admissible()) {
        if (!cfg.override_admissibility) require_admissible(cfg.params);
        std::string msg;
        try {
            require_admissible(cfg.params);
        } catch (const Error& e) {
            msg = e.what();
        }
        spdlog::warn("{}; accepted under override", msg);
        if (warnings) {
            warnings->admissibility_overridden = true;
            warnings->messages.push_back(msg);
        }
    }
    return cfg;
}

std::string serialize_config(const RunConfig& c) {
    std::ostringstream o;
    const auto& p = c.params;
    o << "[model]\n"
      << "d = " << p.d << "\nalpha = " << num(p.alpha) << "\nbeta = " << num(p.beta) << "\neta = " << num(p.eta)
      << "\nzeta = " << num(p.zeta) << "\ngamma = " << num(p.gamma) << "\ntheta = " << num(p.theta)
      << "\ncT = " << num(p.cT) << "\nCT = " << num(p.CT) << "\ncD = " << num(p.cD) << "\nCD = " << num(p.CD)
      << "\ncP = " << num(p.cP) << "\nCP = " << num(p.CP) << "\ncEps = " << num(p.cEps) << "\nCEps = " << num(p.CEps)
      << "\ncDa = " << num(p.cDa) << "\ncFo = " << num(p.cFo) << "\nC0 = " << num(p.C0)
      << "\nT_final = " << num(p.T_final) << "\noverride_admissibility = " << boolstr(c.override_admissibility)
      << "\n\n[domain]\nmode = " << (c.spec.mode == DomainMode::PeriodicTorus2D ? "torus" : "box")
      << "\nLx = " << num(c.spec.extent[0]) << "\nLy = " << num(c.spec.extent[1]) << "\nN = " << c.spec.N
      << "\n\n[truncation]\nn = " << c.n << "\nj = " << c.j << "\nl = " << c.l
      << "\ncutoff = " << boolstr(c.apply_cutoff)
      << "\npositivity = " << (c.positivity == PositivityPolicy::Monitor ? "monitor" : "floor")
      << "\n\n[integrator]\nrel_tol = " << num(c.integrator.rel_tol) << "\nabs_tol = " << num(c.integrator.abs_tol)
      << "\nmax_dt = " << num(c.integrator.max_dt) << "\ndt_init = " << num(c.integrator.dt_init)
      << "\nmax_steps = " << c.integrator.max_steps;

    const auto& i = c.initial;
    const char* u0 = i.u0 == InitialSpec::Velocity::Zero ? "zero" : i.u0 == InitialSpec::Velocity::Mode ? "mode" : "file";
    const char* k0 = i.k0 == InitialSpec::Tke::Constant ? "constant" : i.k0 == InitialSpec::Tke::Cosine ? "cosine" : "file";
    o << "\n\n[initial]\nu0 = " << u0 << "\nu0_mode = " << i.u0_mode << "\nu0_amplitude = " << num(i.u0_amplitude)
      << "\nu0_file = " << i.u0_file << "\nk0 = " << k0 << "\nk0_value = " << num(i.k0_value)
      << "\nk0_amplitude = " << num(i.k0_amplitude) << "\nk0_file = " << i.k0_file
      << "\nmollify = " << boolstr(i.mollify);

    const auto& f = c.forcing;
    const char* kind = f.kind == Forcing::Kind::Zero ? "zero" : f.kind == Forcing::Kind::Constant ? "constant" : "mode";
    o << "\n\n[forcing]\nkind = " << kind << "\ngx = " << num(f.vector[0]) << "\ngy = " << num(f.vector[1])
      << "\nmode = " << f.mode << "\namplitude = " << num(f.amplitude);

    const auto& out = c.output;
    o << "\n\n[output]\nuniform_intervals = " << out.uniform_intervals
      << "\ngeometric_levels = " << out.geometric_levels << "\nextra_times = ";
    for (std::size_t k = 0; k < out.extra_times.size(); ++k) o << (k ? ", " : "") << num(out.extra_times[k]);
    o << "\nenergy = " << boolstr(out.energy) << "\ntke_l1 = " << boolstr(out.tke_l1)
      << "\ngradient = " << boolstr(out.gradient) << "\ntransport = " << boolstr(out.transport)
      << "\nic = " << boolstr(out.ic) << "\nweak_residual = " << boolstr(out.weak_residual) << "\n";

    if (c.sweep) {
        o << "\n[sweep]\naxis = " << to_string(c.sweep->axis) << "\nlevels = ";
        for (std::size_t k = 0; k < c.sweep->levels.size(); ++k) o << (k ? ", " : "") << c.sweep->levels[k];
        o << "\n";
    }
    return o.str();
}

}  // namespace turbkeps
