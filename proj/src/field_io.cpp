#include "turbkeps/field_io.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

#include "turbkeps/errors.hpp"

namespace turbkeps {

namespace {

static_assert(std::endian::native == std::endian::little || std::endian::native == std::endian::big);

template <class T>
void put(std::ostream& out, T v) {
    unsigned char buf[sizeof(T)];
    std::memcpy(buf, &v, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(buf, buf + sizeof(T));
    out.write(reinterpret_cast<const char*>(buf), sizeof(T));
}

template <class T>
T get(std::istream& in) {
    unsigned char buf[sizeof(T)];
    if (!in.read(reinterpret_cast<char*>(buf), sizeof(T)))
        throw Error(ErrorKind::Data, "truncated TKEF record");
    if constexpr (std::endian::native == std::endian::big) std::reverse(buf, buf + sizeof(T));
    T v;
    std::memcpy(&v, buf, sizeof(T));
    return v;
}

}  // namespace

void write_tkef(std::ostream& out, const TkefRecord& rec) {
    out.write("TKEF", 4);
    put<std::uint32_t>(out, kTkefVersion);
    put<std::uint32_t>(out, rec.d);
    put<std::uint32_t>(out, rec.N);
    put<std::uint32_t>(out, rec.components);
    for (std::uint32_t a = 0; a < rec.d; ++a) put<double>(out, rec.extent[a]);
    put<double>(out, rec.time);
    for (double v : rec.values) put<double>(out, v);
    if (!out) throw Error(ErrorKind::Io, "failed writing TKEF record");
}

std::optional<TkefRecord> read_tkef(std::istream& in) {
    char magic[4];
    in.read(magic, 4);
    if (in.gcount() == 0 && in.eof()) return std::nullopt;
    if (in.gcount() != 4 || std::memcmp(magic, "TKEF", 4) != 0)
        throw Error(ErrorKind::Data, "bad TKEF magic");
    TkefRecord rec;
    const auto version = get<std::uint32_t>(in);
    if (version != kTkefVersion)
        throw Error(ErrorKind::Data, "unsupported TKEF version " + std::to_string(version));
    rec.d = get<std::uint32_t>(in);
    rec.N = get<std::uint32_t>(in);
    rec.components = get<std::uint32_t>(in);
    if (rec.d != 2) throw Error(ErrorKind::Data, "TKEF reader supports d = 2 only");
    if (rec.N == 0 || rec.N > 65536 || rec.components == 0 || rec.components > 16)
        throw Error(ErrorKind::Data, "implausible TKEF header");
    for (std::uint32_t a = 0; a < rec.d; ++a) rec.extent[a] = get<double>(in);
    rec.time = get<double>(in);
    rec.values.resize(static_cast<std::size_t>(rec.N) * rec.N * rec.components);
    for (double& v : rec.values) v = get<double>(in);
    return rec;
}

std::vector<TkefRecord> read_tkef_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::Io, "cannot open " + path.string());
    std::vector<TkefRecord> out;
    while (auto rec = read_tkef(in)) out.push_back(std::move(*rec));
    return out;
}

TkefRecord to_record(const DiscreteField& field, double time) {
    TkefRecord rec;
    rec.N = static_cast<std::uint32_t>(field.spec.N);
    rec.components = static_cast<std::uint32_t>(field.components);
    rec.extent = field.spec.extent;
    rec.time = time;
    rec.values = field.values;
    return rec;
}

DiscreteField from_record(const TkefRecord& rec, const DomainSpec& spec) {
    if (static_cast<int>(rec.N) != spec.N || rec.extent != spec.extent)
        throw Error(ErrorKind::Data, "TKEF grid does not match the configured domain");
    DiscreteField f(spec, static_cast<int>(rec.components));
    f.values = rec.values;
    return f;
}

DiscreteField read_csv_field(std::istream& in, const DomainSpec& spec) {
    const Grid g = base_grid(spec);
    DiscreteField f(spec, 1, std::nan(""));
    std::string line;
    int lineno = 0;
    std::size_t filled = 0;
    auto locate = [&](double v, const std::vector<double>& axis, double ext) {
        for (std::size_t i = 0; i < axis.size(); ++i)
            if (std::abs(axis[i] - v) <= 1e-9 * ext) return static_cast<int>(i);
        return -1;
    };
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        if (lineno == 1 && line.find_first_of("xX") != std::string::npos) continue;
        std::istringstream row(line);
        double x, y, v;
        char c1, c2;
        if (!(row >> x >> c1 >> y >> c2 >> v) || c1 != ',' || c2 != ',')
            throw Error(ErrorKind::Data, "CSV line " + std::to_string(lineno) + ": expected x,y,value");
        const int ix = locate(x, g.x, spec.extent[0]);
        const int iy = locate(y, g.y, spec.extent[1]);
        if (ix < 0 || iy < 0)
            throw Error(ErrorKind::Data, "CSV line " + std::to_string(lineno) + ": point is not a grid node");
        double& slot = f.at(static_cast<std::size_t>(iy) * g.n + ix);
        if (std::isnan(slot)) ++filled;
        slot = v;
    }
    if (filled != f.nodes())
        throw Error(ErrorKind::Data, "CSV covers " + std::to_string(filled) + " of " +
                                         std::to_string(f.nodes()) + " grid nodes");
    return f;
}

void write_csv_field(std::ostream& out, const DiscreteField& field) {
    const Grid g = base_grid(field.spec);
    out << "x,y";
    for (int c = 0; c < field.components; ++c) out << (field.components == 1 ? ",value" : ",v" + std::to_string(c));
    out << '\n';
    out.precision(17);
    for (std::size_t i = 0; i < field.nodes(); ++i) {
        const auto p = g.node(i);
        out << p[0] << ',' << p[1];
        for (int c = 0; c < field.components; ++c) out << ',' << field.at(i, c);
        out << '\n';
    }
}

DiscreteField load_scalar_field(const std::filesystem::path& path, const DomainSpec& spec) {
    if (path.extension() == ".csv") {
        std::ifstream in(path);
        if (!in) throw Error(ErrorKind::Io, "cannot open " + path.string());
        return read_csv_field(in, spec);
    }
    const auto recs = read_tkef_file(path);
    if (recs.empty()) throw Error(ErrorKind::Data, path.string() + " holds no TKEF records");
    auto f = from_record(recs.front(), spec);
    if (f.components != 1) throw Error(ErrorKind::Data, path.string() + " is not a scalar field");
    return f;
}

}  // namespace turbkeps
